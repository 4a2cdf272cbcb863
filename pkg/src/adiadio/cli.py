"""Command-line interface.

Subcommands: parse, flow, evolve, decide, odeflow, oracle.  Machine-readable
outputs are JSON (17 significant digits, manifest embedded) or CSV with a
manifest sidecar; precedence for options is flags > config file > defaults.

Exit codes: 0 success or has_solution, 1 no_solution_within_confidence,
2 parse/usage/configuration error, 3 propagation norm drift, 4 inconclusive,
70 unexpected internal failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import scipy

from . import __version__, kernels
from .decision import DecisionConfig, run_decision
from .evolution import (EvolutionError, TruncationTailError,
                        coherent_initial_state, evolve, probabilities)
from .fock import BasisSizeError, enumerate_basis
from .odeflow import DegenerateFlowError, FlowDriftError, integrate_flow
from .operators import (CoherentParams, Schedule, build_hi, build_hp, get_ramp)
from .poly import ParseError, brute_force_search, parse_equation
from .sampling import repetitions_needed
from .schemas import SCHEMA_VERSION
from .serialize import dumps, write_csv
from .spectral import DegenerateGapError, gap_and_time, spectral_flow

EXIT_OK = 0
EXIT_NO_SOLUTION = 1
EXIT_USAGE = 2
EXIT_NORM_DRIFT = 3
EXIT_INCONCLUSIVE = 4
EXIT_INTERNAL = 70


class UsageError(ValueError):
    """Configuration or input rejected before any computation ran."""


# ---------------------------------------------------------------------------
# option plumbing

def _read_config_file(path: str) -> dict:
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err}") from None
    return values


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults, with unknown file keys rejected."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        for key, text in _read_config_file(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for this command")
            resolved[key] = _coerce(text)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    return resolved


def _parse_constants(pairs: list[str] | None) -> dict[str, int]:
    constants: dict[str, int] = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep:
            raise UsageError(f"--const expects NAME=VALUE, got {pair!r}")
        try:
            constants[name.strip()] = int(value.strip())
        except ValueError:
            raise UsageError(f"constant {name!r} needs an integer value") from None
    return constants


def _parse_alphas(text: str | float, num_modes: int) -> CoherentParams:
    if isinstance(text, (int, float)):
        return CoherentParams.uniform(float(text), num_modes)
    parts = [p for p in str(text).split(",") if p != ""]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--alpha expects a float or comma list, got {text!r}") from None
    if len(values) == 1:
        return CoherentParams.uniform(values[0], num_modes)
    if len(values) != num_modes:
        raise UsageError(
            f"--alpha lists {len(values)} values for {num_modes} modes")
    return CoherentParams(alphas=tuple(values))


def _jobs(resolved: dict) -> int:
    jobs = resolved.get("jobs")
    if jobs is None:
        jobs = os.environ.get("ADIADIO_JOBS", "1")
    try:
        jobs = int(jobs)
    except (TypeError, ValueError):
        raise UsageError(f"jobs must be an integer, got {jobs!r}") from None
    if jobs < 1:
        raise UsageError("jobs must be at least 1")
    return jobs


def _manifest(command: str, equation: str, resolved: dict) -> dict:
    return {
        "command": command,
        "equation": equation,
        "config": resolved,
        "versions": {
            "adiadio": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "backend": kernels.BACKEND,
        },
        "schema": SCHEMA_VERSION,
    }


def _emit_json(payload: dict, out: str | None) -> None:
    text = dumps(payload)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
            fh.write("\n")
    else:
        sys.stdout.write(text)
        sys.stdout.write("\n")


def _emit_csv(write_fn, out: str | None, manifest: dict) -> None:
    """write_fn takes a path; stdout streaming writes to a temp-free pipe."""
    if out:
        write_fn(out)
        with open(out + ".manifest.json", "w") as fh:
            fh.write(dumps(manifest))
            fh.write("\n")
    else:
        import io
        import tempfile
        with tempfile.NamedTemporaryFile("w+", suffix=".csv", delete=True) as tmp:
            write_fn(tmp.name)
            tmp.seek(0)
            sys.stdout.write(tmp.read())


def _build_system(p, resolved: dict):
    if p.is_constant():
        raise UsageError("constant equation; there is nothing to simulate")
    basis = enumerate_basis(p.num_vars, resolved["cutoff"],
                            scheme=resolved.get("truncation", "total"))
    coherent = _parse_alphas(resolved["alpha"], p.num_vars)
    hi = build_hi(coherent, basis)
    hp = build_hp(p, basis)
    return basis, coherent, hi, hp


# ---------------------------------------------------------------------------
# subcommands

def _cmd_parse(args) -> int:
    defaults = {"out": None}
    resolved = _resolve(args, defaults)
    p = parse_equation(args.equation, constants=_parse_constants(args.const))
    keys = sorted(p.terms, key=lambda e: (sum(e), e), reverse=True)
    payload = {
        "manifest": _manifest("parse", args.equation, {}),
        "num_vars": p.num_vars,
        "var_names": list(p.var_names),
        "total_degree": p.total_degree,
        "canonical": p.to_text(),
        "terms": [{"exponents": list(e), "coefficient": p.terms[e]} for e in keys],
    }
    _emit_json(payload, resolved["out"])
    return EXIT_OK


def _cmd_flow(args) -> int:
    defaults = {"cutoff": 24, "levels": 8, "grid": 101, "ramp": "linear",
                "alpha": 0.5, "truncation": "total", "jobs": None,
                "gap_report": False, "out": None}
    resolved = _resolve(args, defaults)
    jobs = _jobs(resolved)
    p = parse_equation(args.equation, constants=_parse_constants(args.const))
    basis, coherent, hi, hp = _build_system(p, resolved)
    schedule = Schedule(total_time=1.0, ramp=get_ramp(resolved["ramp"]),
                        grid=np.linspace(0.0, 1.0, resolved["grid"]))
    flow = spectral_flow(hi, hp, schedule, resolved["levels"], jobs=jobs)

    gap_payload = None
    if resolved["gap_report"]:
        try:
            gap_payload = gap_and_time(flow, hi, hp, jobs=jobs).to_dict()
        except DegenerateGapError as err:
            print(f"gap report unavailable: {err}", file=sys.stderr)

    manifest = _manifest("flow", args.equation, resolved)
    out = resolved["out"]
    if out and out.endswith(".json"):
        payload = {"manifest": manifest, **flow.to_dict()}
        if gap_payload is not None:
            payload["gap_report"] = gap_payload
        _emit_json(payload, out)
    else:
        _emit_csv(flow.to_csv, out, manifest)
        if gap_payload is not None:
            print(dumps(gap_payload), file=sys.stderr)
    e_final = ", ".join(format(v, ".6g") for v in sorted(flow.curves[-1])[:3])
    print(f"tracked {flow.num_tracked} curves over {len(flow.s_grid)} points; "
          f"lowest final energies: {e_final}", file=sys.stderr)
    return EXIT_OK


def _cmd_evolve(args) -> int:
    defaults = {"cutoff": 24, "T": None, "steps": None, "ramp": "linear",
                "alpha": 0.5, "truncation": "total", "method": "auto",
                "out": None}
    resolved = _resolve(args, defaults)
    if resolved["T"] is None:
        raise UsageError("evolve needs --T (total evolution time)")
    p = parse_equation(args.equation, constants=_parse_constants(args.const))
    basis, coherent, hi, hp = _build_system(p, resolved)
    schedule = Schedule(total_time=float(resolved["T"]),
                        ramp=get_ramp(resolved["ramp"]),
                        grid=np.linspace(0.0, 1.0, 11))
    psi0 = coherent_initial_state(coherent, basis)
    state = evolve(hi, hp, schedule, psi0,
                   steps=resolved["steps"], method=resolved["method"])
    dist = probabilities(state)
    payload = {
        "manifest": _manifest("evolve", args.equation, resolved),
        **dist.to_dict(),
        "stats": state.stats,
    }
    _emit_json(payload, resolved["out"])
    return EXIT_OK


def _cmd_decide(args) -> int:
    defaults = {"epsilon": 0.1, "p": 0.9, "seed": 2026, "initial_T": 5.0,
                "max_T": 500.0, "t_growth": 2.0, "initial_cutoff": 4,
                "cutoff_step": 2, "max_cutoff": None, "reference_cutoff": None,
                "alpha": 0.5, "ramp": "linear", "trend_margin": 0.02,
                "grid_points": 41, "levels": 6, "max_iterations": 12,
                "jobs": None, "out": None}
    resolved = _resolve(args, defaults)
    jobs = _jobs(resolved)
    p = parse_equation(args.equation, constants=_parse_constants(args.const))
    alpha = resolved["alpha"]
    if not isinstance(alpha, (int, float)):
        raise UsageError("decide supports a single uniform --alpha value")
    config = DecisionConfig(
        epsilon=float(resolved["epsilon"]),
        confidence=float(resolved["p"]),
        seed=int(resolved["seed"]),
        initial_T=float(resolved["initial_T"]),
        t_growth=float(resolved["t_growth"]),
        max_T=float(resolved["max_T"]),
        initial_model_cutoff=int(resolved["initial_cutoff"]),
        cutoff_step=int(resolved["cutoff_step"]),
        max_model_cutoff=resolved["max_cutoff"],
        reference_cutoff=resolved["reference_cutoff"],
        alpha=float(alpha),
        ramp=resolved["ramp"],
        trend_margin=float(resolved["trend_margin"]),
        grid_points=int(resolved["grid_points"]),
        levels=int(resolved["levels"]),
        max_iterations=int(resolved["max_iterations"]),
        jobs=jobs,
    )
    report = run_decision(p, config)
    payload = {"manifest": _manifest("decide", args.equation, resolved),
               **report.to_dict()}
    _emit_json(payload, resolved["out"])
    summary = f"verdict: {report.verdict}"
    if report.witness is not None:
        summary += f", witness {tuple(report.witness)}"
    if report.reason:
        summary += f" ({report.reason})"
    print(summary, file=sys.stderr)
    if report.verdict == "has_solution":
        return EXIT_OK
    if report.verdict == "no_solution_within_confidence":
        return EXIT_NO_SOLUTION
    return EXIT_INCONCLUSIVE


def _cmd_odeflow(args) -> int:
    defaults = {"cutoff": 4, "levels": 8, "ramp": "linear", "alpha": 0.5,
                "truncation": "total", "s_margin": 1e-3, "m_check": False,
                "out": None}
    resolved = _resolve(args, defaults)
    p = parse_equation(args.equation, constants=_parse_constants(args.const))
    basis, coherent, hi, hp = _build_system(p, resolved)
    schedule = Schedule(total_time=1.0, ramp=get_ramp(resolved["ramp"]),
                        grid=np.linspace(0.0, 1.0, 11))
    result = integrate_flow(hi, hp, schedule, min(resolved["levels"], basis.size),
                            s_margin=float(resolved["s_margin"]),
                            check_m_doubling=resolved["m_check"])
    manifest = _manifest("odeflow", args.equation, resolved)
    out = resolved["out"]
    if out and out.endswith(".json"):
        payload = {
            "manifest": manifest,
            "e0_extrapolated": result.e0_extrapolated,
            "checkpoints": result.checkpoints,
            "cross_checks": result.cross_checks,
            "steps_accepted": result.steps_accepted,
            "steps_rejected": result.steps_rejected,
        }
        _emit_json(payload, out)
    else:
        _emit_csv(result.to_csv, out, manifest)
    print(f"E_0 extrapolated to s=1: {result.e0_extrapolated:.9g} "
          f"({result.steps_accepted} accepted steps)", file=sys.stderr)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    defaults = {"box": None, "volume_cap": 2_000_000, "out": None}
    resolved = _resolve(args, defaults)
    p = parse_equation(args.equation, constants=_parse_constants(args.const))
    if resolved["box"] is None:
        raise UsageError("oracle needs --box (comma-separated bounds)")
    try:
        bounds = tuple(int(b) for b in str(resolved["box"]).split(","))
    except ValueError:
        raise UsageError(f"bad --box {resolved['box']!r}") from None
    if p.num_vars == 0:
        bounds = ()
    solutions = brute_force_search(p, bounds,
                                   volume_cap=int(resolved["volume_cap"]))
    import math
    payload = {
        "manifest": _manifest("oracle", args.equation, resolved),
        "box": list(bounds),
        "volume": math.prod(b + 1 for b in bounds) if bounds else 1,
        "count": len(solutions),
        "solutions": [list(s) for s in solutions],
    }
    _emit_json(payload, resolved["out"])
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiadio",
        description="Adiabatic ground-state emulation for Diophantine equations")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("equation", help="equation text, e.g. 'x^2 + y^2 - 25'")
    common.add_argument("--const", action="append", metavar="NAME=VALUE",
                        help="named integer constant (repeatable)")
    common.add_argument("--config", help="key=value options file")
    common.add_argument("--out", help="output path (default: stdout)")

    p_parse = sub.add_parser("parse", parents=[common],
                             help="parse and expand an equation")
    p_parse.set_defaults(fn=_cmd_parse)

    p_flow = sub.add_parser("flow", parents=[common],
                            help="scan the low-lying spectrum along the ramp")
    p_flow.add_argument("--cutoff", type=int)
    p_flow.add_argument("--levels", type=int)
    p_flow.add_argument("--grid", type=int)
    p_flow.add_argument("--ramp")
    p_flow.add_argument("--alpha")
    p_flow.add_argument("--truncation", choices=["total", "per_mode"])
    p_flow.add_argument("--jobs", type=int)
    p_flow.add_argument("--gap-report", dest="gap_report", action="store_const",
                        const=True, default=None,
                        help="also estimate min gap, coupling norm, and t_min")
    p_flow.set_defaults(fn=_cmd_flow)

    p_evolve = sub.add_parser("evolve", parents=[common],
                              help="evolve the coherent start through the ramp")
    p_evolve.add_argument("--T", type=float, help="total evolution time")
    p_evolve.add_argument("--steps", type=int)
    p_evolve.add_argument("--cutoff", type=int)
    p_evolve.add_argument("--ramp")
    p_evolve.add_argument("--alpha")
    p_evolve.add_argument("--truncation", choices=["total", "per_mode"])
    p_evolve.add_argument("--method", choices=["auto", "krylov", "eigh"])
    p_evolve.set_defaults(fn=_cmd_evolve)

    p_decide = sub.add_parser("decide", parents=[common],
                              help="decide solvability within the emulation")
    p_decide.add_argument("--epsilon", type=float)
    p_decide.add_argument("--p", type=float, help="confidence level")
    p_decide.add_argument("--seed", type=int)
    p_decide.add_argument("--initial-T", dest="initial_T", type=float)
    p_decide.add_argument("--max-T", dest="max_T", type=float)
    p_decide.add_argument("--t-growth", dest="t_growth", type=float)
    p_decide.add_argument("--initial-cutoff", dest="initial_cutoff", type=int)
    p_decide.add_argument("--cutoff-step", dest="cutoff_step", type=int)
    p_decide.add_argument("--max-cutoff", dest="max_cutoff", type=int)
    p_decide.add_argument("--reference-cutoff", dest="reference_cutoff", type=int)
    p_decide.add_argument("--alpha", type=float)
    p_decide.add_argument("--ramp")
    p_decide.add_argument("--trend-margin", dest="trend_margin", type=float)
    p_decide.add_argument("--grid-points", dest="grid_points", type=int)
    p_decide.add_argument("--levels", type=int)
    p_decide.add_argument("--max-iterations", dest="max_iterations", type=int)
    p_decide.add_argument("--jobs", type=int)
    p_decide.set_defaults(fn=_cmd_decide)

    p_ode = sub.add_parser("odeflow", parents=[common],
                           help="integrate the eigenpair flow equations")
    p_ode.add_argument("--cutoff", type=int)
    p_ode.add_argument("--levels", type=int)
    p_ode.add_argument("--ramp")
    p_ode.add_argument("--alpha")
    p_ode.add_argument("--truncation", choices=["total", "per_mode"])
    p_ode.add_argument("--s-margin", dest="s_margin", type=float)
    p_ode.add_argument("--m-check", dest="m_check", action="store_const",
                       const=True, default=None,
                       help="rerun with doubled levels and report the difference")
    p_ode.set_defaults(fn=_cmd_odeflow)

    p_oracle = sub.add_parser("oracle", parents=[common],
                              help="exhaustive search over a finite box")
    p_oracle.add_argument("--box", help="comma-separated inclusive bounds")
    p_oracle.add_argument("--volume-cap", dest="volume_cap", type=int)
    p_oracle.set_defaults(fn=_cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, BasisSizeError, TruncationTailError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except EvolutionError as err:
        print(f"propagation error: {err}", file=sys.stderr)
        return EXIT_NORM_DRIFT
    except (DegenerateFlowError, FlowDriftError, DegenerateGapError) as err:
        print(f"flow error: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # anything else must not alias a verdict code
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
