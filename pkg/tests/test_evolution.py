"""Initial-state construction, propagation accuracy, and backend parity."""
import math

import numpy as np
import pytest

from adiadio import (CoherentParams, build_hi, build_hp, enumerate_basis,
                     parse_equation)
from adiadio.evolution import (Distribution, EvolutionError, QuantumState,
                               TruncationTailError, coherent_initial_state,
                               evolve, probabilities)
from adiadio.operators import default_schedule
from conftest import make_system


def poisson_weight(alpha, n):
    return math.exp(-alpha * alpha) * alpha ** (2 * n) / math.factorial(n)


# -------------------------------------------------------------- initial state

def test_coherent_occupations_are_poisson(x6_cutoff24):
    _, basis, coherent, _, _ = x6_cutoff24
    psi = coherent_initial_state(coherent, basis)
    # |alpha|^2 = 0.25 leaves ~1e-31 outside n = 24, so compare directly
    for n in (0, 1, 2, 5, 10):
        assert psi.probability_of((n,)) == pytest.approx(
            poisson_weight(0.5, n), abs=1e-12)
    assert psi.tail_mass < 1e-15
    assert psi.time_label == 0.0


def test_multimode_coherent_state_is_a_product():
    basis = enumerate_basis(2, 12)
    psi = coherent_initial_state(CoherentParams.uniform(0.5, 2), basis)
    for state in ((0, 0), (1, 2), (3, 1)):
        expected = poisson_weight(0.5, state[0]) * poisson_weight(0.5, state[1])
        assert psi.probability_of(state) == pytest.approx(expected, rel=1e-9)


def test_tail_guard_rejects_tight_truncation():
    basis = enumerate_basis(3, 4)
    coherent = CoherentParams.uniform(0.5, 3)
    with pytest.raises(TruncationTailError):
        coherent_initial_state(coherent, basis)
    # loosening the tolerance admits the same state and records the tail
    psi = coherent_initial_state(coherent, basis, tail_tol=1e-2)
    assert 1e-3 < psi.tail_mass < 1e-2


def test_state_validation():
    basis = enumerate_basis(1, 4)
    with pytest.raises(ValueError):
        QuantumState(basis=basis, amplitudes=np.ones(5, dtype=complex))
    with pytest.raises(ValueError):
        QuantumState(basis=basis, amplitudes=np.zeros(3, dtype=complex))
    ok = np.zeros(5, dtype=complex)
    ok[2] = 1.0
    assert QuantumState(basis=basis, amplitudes=ok).probability_of((2,)) == 1.0
    assert QuantumState(basis=basis, amplitudes=ok).probability_of((9,)) == 0.0


def test_distribution_validation():
    basis = enumerate_basis(1, 3)
    with pytest.raises(ValueError):
        Distribution(basis=basis, probs=np.array([0.5, 0.5, 0.5, -0.5]),
                     source="truncated_model")
    with pytest.raises(ValueError):
        Distribution(basis=basis, probs=np.full(4, 0.3), source="truncated_model")
    with pytest.raises(ValueError):
        Distribution(basis=basis, probs=np.full(4, 0.25), source="guesswork")
    d = Distribution(basis=basis, probs=np.array([0.1, 0.2, 0.4, 0.3]),
                     source="truncated_model")
    assert d.top_states(2) == [((2,), 0.4), ((3,), 0.3)]
    assert d.probability_of((9,)) == 0.0


def test_probabilities_of_initial_state(x6_cutoff24):
    _, basis, coherent, _, _ = x6_cutoff24
    dist = probabilities(coherent_initial_state(coherent, basis))
    assert dist.source == "truncated_model"
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.top_states(1)[0][0] == (0,)  # vacuum dominates at small alpha


# ---------------------------------------------------------------- propagation

def test_adiabatic_reference_run(x6_cutoff24, linear_schedule):
    """Slow passage on x - 6 concentrates the state on the root |6>.

    Reference probabilities were frozen from an independent high-order
    adaptive integration (rtol = atol = 1e-12) of the same interpolated
    generator on a hand-assembled matrix.
    """
    _, basis, coherent, hi, hp = x6_cutoff24
    sched = default_schedule(total_time=80.0)
    psi = evolve(hi, hp, sched, coherent_initial_state(coherent, basis))
    dist = probabilities(psi)
    assert dist.probability_of((6,)) == pytest.approx(0.905576335918, abs=1e-5)
    expected_top = {(6,): 0.905576336, (5,): 0.088429471,
                    (7,): 0.002876684, (4,): 0.002731336}
    for state, p in dist.top_states(4):
        assert p == pytest.approx(expected_top[state], abs=1e-5)
    assert psi.stats["max_norm_drift"] <= 1e-9
    assert psi.time_label == 80.0


def test_run_statistics_are_complete(x6_cutoff24):
    _, basis, coherent, hi, hp = x6_cutoff24
    sched = default_schedule(total_time=5.0)
    psi = evolve(hi, hp, sched, coherent_initial_state(coherent, basis))
    stats = psi.stats
    assert set(stats) >= {"method", "backend", "steps", "substeps",
                          "max_krylov", "max_norm_drift", "splits",
                          "halvings", "halving_diff"}
    assert stats["halvings"] >= 1
    assert stats["halving_diff"] <= 1e-7


def test_propagator_methods_agree():
    _, basis, coherent, hi, hp = make_system("x - 6", 1, 8)
    sched = default_schedule(total_time=5.0)
    psi0 = coherent_initial_state(coherent, basis)
    runs = {m: evolve(hi, hp, sched, psi0, method=m, steps=2000,
                      adaptive=False)
            for m in ("krylov", "eigh")}
    diff = np.abs(np.abs(runs["krylov"].amplitudes) ** 2
                  - np.abs(runs["eigh"].amplitudes) ** 2).max()
    assert diff < 1e-7
    assert runs["krylov"].stats["method"] == "krylov"
    assert runs["eigh"].stats["method"] == "eigh"


def test_auto_routing_prefers_eigh_when_stiff():
    _, basis, coherent, hi, hp = make_system("x - 6", 1, 8)
    psi0 = coherent_initial_state(coherent, basis)
    slow = evolve(hi, hp, default_schedule(total_time=1000.0), psi0,
                  steps=1000, adaptive=False)
    fast = evolve(hi, hp, default_schedule(total_time=5.0), psi0,
                  steps=1000, adaptive=False)
    assert slow.stats["method"] == "eigh"
    assert fast.stats["method"] == "krylov"


def test_sudden_quench_leaves_distribution_alone():
    _, basis, coherent, hi, hp = make_system("x - 6", 1, 12)
    psi0 = coherent_initial_state(coherent, basis)
    psi = evolve(hi, hp, default_schedule(total_time=1e-4), psi0)
    before = probabilities(psi0).probs
    after = probabilities(psi).probs
    assert np.abs(after - before).max() < 1e-6


def test_evolve_argument_validation(x6_cutoff24):
    _, basis, coherent, hi, hp = x6_cutoff24
    psi0 = coherent_initial_state(coherent, basis)
    with pytest.raises(ValueError):
        evolve(hi, hp, default_schedule(total_time=0.0), psi0)
    with pytest.raises(ValueError):
        evolve(hi, hp, default_schedule(), psi0, method="magic")
    with pytest.raises(ValueError):
        evolve(hi, hp, default_schedule(), psi0, steps=0)
    with pytest.raises(EvolutionError):
        evolve(hi, hp, default_schedule(), psi0, steps=2_000_000)
    _, _, _, hi8, _ = make_system("x - 6", 1, 8)
    with pytest.raises(ValueError):
        evolve(hi8, hp, default_schedule(), psi0)


def test_dimension_cap_is_enforced():
    p = parse_equation("x - 2")
    basis = enumerate_basis(1, 8192)
    hi = build_hi(CoherentParams.uniform(0.5, 1), basis, storage="sparse")
    hp = build_hp(p, basis, storage="sparse")
    psi0 = coherent_initial_state(CoherentParams.uniform(0.5, 1), basis)
    with pytest.raises(ValueError, match="8192"):
        evolve(hi, hp, default_schedule(), psi0)


# ------------------------------------------------------------------- backends

def test_backend_twins_agree_step_for_step():
    from adiadio import _propagate_py, kernels
    if kernels.BACKEND != "compiled":
        pytest.skip("compiled backend not importable here")
    from adiadio import _propagate
    _, basis, coherent, hi, hp = make_system("x - 6", 1, 10)
    h0 = hi.dense().astype(np.float64)
    w = hp.dense().astype(np.float64) - h0
    fmid = ((np.arange(50) + 0.5) / 50).astype(np.float64)
    psi0 = coherent_initial_state(coherent, basis).amplitudes

    psi_c = psi0.copy()
    rep_c = _propagate.propagate(h0, w, fmid, 0.1, psi_c, 1e-10, 48,
                                 10.0, 50.0, 25.0)
    psi_p = psi0.copy()
    rep_p = _propagate_py.propagate(h0, w, fmid, 0.1, psi_p, 1e-10, 48,
                                    10.0, 50.0, 25.0)
    assert np.abs(psi_c - psi_p).max() < 1e-12
    assert rep_c["substeps"] == rep_p["substeps"]
    assert rep_c["max_krylov"] == rep_p["max_krylov"]


def test_forced_pure_python_env(monkeypatch):
    # the selector honours the override at import time
    import importlib

    import adiadio.kernels as kmod
    monkeypatch.setenv("ADIADIO_PURE_PYTHON", "1")
    fresh = importlib.reload(kmod)
    try:
        assert fresh.BACKEND == "python"
        assert fresh.backend_info()["forced_pure_python"] is True
    finally:
        monkeypatch.delenv("ADIADIO_PURE_PYTHON")
        importlib.reload(kmod)
