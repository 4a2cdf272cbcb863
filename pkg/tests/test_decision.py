"""End-to-end verdicts and the audit trail of the decision loop."""
import pytest

from adiadio import parse_equation
from adiadio.decision import (DecisionConfig, VERDICT_HAS_SOLUTION,
                              VERDICT_INCONCLUSIVE, VERDICT_NO_SOLUTION,
                              fluctuation_estimate, run_decision)
from adiadio.poly import evaluate


def events(report, kind):
    return [e for e in report.trace if e["event"] == kind]


# ------------------------------------------------------------- small helpers

def test_fluctuation_estimate_is_spread_plus_residual():
    assert fluctuation_estimate([1.0, 3.0, 2.0]) == 2.0
    assert fluctuation_estimate([1.0, 3.0], residual_bound=0.5) == 2.5
    assert fluctuation_estimate([4.0]) == 0.0
    with pytest.raises(ValueError):
        fluctuation_estimate([])
    with pytest.raises(ValueError):
        fluctuation_estimate([1.0], residual_bound=-0.1)


def test_config_validation():
    p = 1
    for bad in (dict(epsilon=0.0), dict(epsilon=1.0), dict(confidence=1.0),
                dict(initial_T=0.0), dict(initial_T=10.0, max_T=5.0),
                dict(t_growth=1.0), dict(initial_model_cutoff=0),
                dict(cutoff_step=0),
                dict(max_model_cutoff=20, reference_cutoff=10)):
        with pytest.raises(ValueError):
            DecisionConfig(**bad).resolve(p)


def test_resolved_defaults_scale_with_mode_count():
    cfg = DecisionConfig()
    assert cfg.resolve(1).reference_cutoff == 16
    assert cfg.resolve(2).reference_cutoff == 12
    assert cfg.resolve(5).reference_cutoff == 10
    r = cfg.resolve(1)
    assert r.max_model_cutoff == r.reference_cutoff
    d = r.to_dict()
    assert d["reference_cutoff"] == 16
    assert d["evolve_tol"] == 1e-4


# ----------------------------------------------------------------- constants

def test_constant_zero_is_trivially_solvable():
    report = run_decision(parse_equation("x - x"))
    assert report.verdict == VERDICT_HAS_SOLUTION
    assert report.witness == (0,)
    assert report.confidence == 1.0
    assert events(report, "constant_equation")


def test_constant_nonzero_is_trivially_unsolvable():
    report = run_decision(parse_equation("x - x + 3"))
    assert report.verdict == VERDICT_NO_SOLUTION
    assert report.witness is None
    assert report.e_candidate == 9
    assert report.confidence == 1.0
    assert "never vanishes" in report.reason


# ------------------------------------------------------------------ verdicts

def test_solvable_equation_returns_exact_witness():
    p = parse_equation("x - 3")
    report = run_decision(p, DecisionConfig(reference_cutoff=10,
                                            max_model_cutoff=8))
    assert report.verdict == VERDICT_HAS_SOLUTION
    assert report.witness == (3,)
    assert evaluate(p, report.witness) == 0
    assert report.confidence == 1.0
    assert report.iterations == 1
    assert report.delta == 0.0
    route = events(report, "verdict")[0]["route"]
    assert route in ("sampled", "model_scan")


def test_unsolvable_equation_bounds_the_ground_energy():
    """2x = 3 has no integer root; the loop must confirm E > 0 with the
    truncation fluctuation below the candidate energy."""
    p = parse_equation("2x - 3")
    report = run_decision(p, DecisionConfig(reference_cutoff=10,
                                            max_model_cutoff=8))
    assert report.verdict == VERDICT_NO_SOLUTION
    assert report.witness is None
    assert report.e_ground_estimate == 1.0
    assert report.delta is not None and report.delta < 1.0
    assert report.confidence == 0.9
    assert events(report, "trend")
    persists = events(report, "persistence")
    assert persists and all(e["accepted"] for e in persists)


def test_multimode_negative_case_skips_tight_cutoffs():
    # at three modes the smallest model cutoff cannot hold the initial
    # state (coherent tail above the guard), so the loop must step past it
    p = parse_equation("x + y + z + 1")
    report = run_decision(p, DecisionConfig(reference_cutoff=10,
                                            max_model_cutoff=8))
    assert report.verdict == VERDICT_NO_SOLUTION
    assert report.e_ground_estimate == 1.0
    skipped = events(report, "model_skipped")
    assert skipped and skipped[0]["cutoff"] == 4
    accepted = [e["cutoff"] for e in events(report, "model") if e["accepted"]]
    assert len(accepted) == 2


def test_inconclusive_when_no_model_is_usable():
    # a single-cutoff model range whose initial state fails the tail guard
    # leaves nothing to corroborate the reference with
    p = parse_equation("x - 6")
    report = run_decision(p, DecisionConfig(reference_cutoff=12,
                                            max_model_cutoff=1,
                                            initial_model_cutoff=1))
    assert report.verdict == VERDICT_INCONCLUSIVE
    assert "no truncated model" in report.reason
    assert events(report, "model_skipped")


def test_inconclusive_when_candidate_is_out_of_range():
    # the root sits beyond the reference, so the best observed state lies
    # outside the model range; with no time budget left that is terminal
    p = parse_equation("x - 20")
    report = run_decision(p, DecisionConfig(reference_cutoff=12,
                                            max_model_cutoff=4,
                                            initial_model_cutoff=3,
                                            cutoff_step=1,
                                            initial_T=40.0, max_T=40.0))
    assert report.verdict == VERDICT_INCONCLUSIVE
    assert "outside the model range" in report.reason
    assert events(report, "candidate_outside_models")
    assert events(report, "time_budget_exhausted")
    assert report.iterations == 1


def test_reports_are_reproducible():
    p = parse_equation("2x - 1")
    cfg = DecisionConfig(reference_cutoff=8, max_model_cutoff=6)
    a = run_decision(p, cfg).to_dict()
    b = run_decision(p, cfg).to_dict()
    assert a == b
    assert a["verdict"] == VERDICT_NO_SOLUTION


def test_report_json_round_trip(tmp_path):
    import json
    p = parse_equation("x - 3")
    report = run_decision(p, DecisionConfig(reference_cutoff=8,
                                            max_model_cutoff=6))
    path = tmp_path / "report.json"
    report.to_json(str(path))
    data = json.loads(path.read_text())
    assert data["verdict"] == report.verdict
    assert tuple(data["witness"]) == report.witness
    assert data["config"]["reference_cutoff"] == 8
    assert data["trace"][0]["event"] == "start"
