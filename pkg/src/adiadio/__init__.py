"""Adiabatic ground-state emulation for Diophantine equations.

Pipeline: parse an equation into an exact polynomial, encode it as a diagonal
squared-value Hamiltonian on a truncated Fock basis, interpolate from a
displaced-oscillator start, then inspect the interpolation by spectral scans,
direct ODE flow of the eigenpairs, or schedule-driven time evolution with
seeded measurement emulation — feeding a decision loop that reports whether
the equation has a nonnegative integer solution.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .decision import DecisionConfig, DecisionReport, fluctuation_estimate, run_decision
from .evolution import (Distribution, EvolutionError, QuantumState,
                        TruncationTailError, coherent_initial_state, evolve,
                        probabilities)
from .fock import BasisSizeError, FockBasis, enumerate_basis, index_of
from .odeflow import (DegenerateFlowError, FlowDriftError, OdeFlowResult,
                      OdeFlowState, flow_derivatives, integrate_flow)
from .operators import (CoherentParams, OperatorMatrix, Ramp, Schedule,
                        build_hi, build_hp, build_interpolated,
                        commutator_nonzero, default_schedule, export_matrix,
                        get_ramp)
from .poly import (ParseError, Polynomial, brute_force_search, evaluate,
                   parse_equation, shift_variables)
from .sampling import (IncomparableBasesError, SamplingPlan, candidate_state,
                       export_histogram, repetitions_needed, sample_histogram,
                       sup_distance)
from .spectral import (DegenerateGapError, EigsolverError, FlowState,
                       GapReport, eigs_lowest, gap_and_time, spectral_flow)

__all__ = [
    "__version__",
    "ParseError", "Polynomial", "parse_equation", "evaluate",
    "shift_variables", "brute_force_search",
    "BasisSizeError", "FockBasis", "enumerate_basis", "index_of",
    "CoherentParams", "Ramp", "Schedule", "OperatorMatrix", "get_ramp",
    "default_schedule", "build_hp", "build_hi", "build_interpolated",
    "commutator_nonzero", "export_matrix",
    "EigsolverError", "DegenerateGapError", "FlowState", "GapReport",
    "eigs_lowest", "spectral_flow", "gap_and_time",
    "QuantumState", "Distribution", "EvolutionError", "TruncationTailError",
    "coherent_initial_state", "evolve", "probabilities",
    "SamplingPlan", "IncomparableBasesError", "repetitions_needed",
    "sample_histogram", "candidate_state", "sup_distance", "export_histogram",
    "DecisionConfig", "DecisionReport", "fluctuation_estimate", "run_decision",
    "OdeFlowState", "OdeFlowResult", "DegenerateFlowError", "FlowDriftError",
    "flow_derivatives", "integrate_flow",
]
