"""Hamiltonian construction, ramps, schedules, and matrix export."""
import math
import os
import warnings

import numpy as np
import pytest

from adiadio.fock import enumerate_basis, index_of
from adiadio.operators import (CoherentParams, InexactConversionWarning,
                               OperatorMatrix, Ramp, Schedule, build_hi,
                               build_hp, build_interpolated,
                               commutator_nonzero, default_schedule,
                               export_matrix, get_ramp)
from adiadio.poly import evaluate, parse_equation


# ---------------------------------------------------------------------------
# H_P: exact integer diagonal

def test_hp_diagonal_matches_exact_squares():
    p = parse_equation("x - 6")
    basis = enumerate_basis(1, 24)
    hp = build_hp(p, basis)
    d = hp.dense().diagonal()
    for i, state in enumerate(basis.states):
        assert d[i] == float(evaluate(p, state) ** 2)


def test_hp_multivariate_diagonal():
    p = parse_equation("(x+1)^2 + (y+1)^2 - (z+1)^2")
    basis = enumerate_basis(3, 9)
    hp = build_hp(p, basis)
    d = hp.dense().diagonal()
    assert d[index_of(basis, (2, 3, 4))] == 0.0
    assert d[index_of(basis, (3, 2, 4))] == 0.0
    assert np.count_nonzero(d == 0.0) == 2


def test_hp_offdiagonal_is_zero():
    p = parse_equation("x^2 - 2")
    basis = enumerate_basis(1, 6)
    hp = build_hp(p, basis).dense()
    assert np.array_equal(hp, np.diag(hp.diagonal()))


def test_hp_rejects_values_beyond_float_exactness():
    # 2^27 squared exceeds 2^53: the double can no longer hold it exactly
    p = parse_equation("x - 134217728")
    basis = enumerate_basis(1, 2)
    with pytest.warns(InexactConversionWarning):
        build_hp(p, basis)


# ---------------------------------------------------------------------------
# H_I: the coherent state is its zero-energy ground state

def coherent_vector(alpha: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    amp = np.exp(-alpha * alpha / 2.0) * alpha**n
    amp /= np.sqrt(np.array([math.factorial(int(k)) for k in n], dtype=float))
    return amp / np.linalg.norm(amp)


def test_hi_annihilates_truncated_coherent_state():
    basis = enumerate_basis(1, 40)
    hi = build_hi(CoherentParams.uniform(0.5, 1), basis).dense()
    v = coherent_vector(0.5, 40)
    # residual is dominated by the truncation tail, vanishing with the cutoff
    assert np.linalg.norm(hi @ v) < 1e-9


def test_hi_ground_energy_is_zero():
    basis = enumerate_basis(1, 30)
    hi = build_hi(CoherentParams.uniform(0.7, 1), basis).dense()
    evals = np.linalg.eigvalsh(hi)
    assert abs(evals[0]) < 1e-10
    # spectrum of the displaced number operator: 0, 1, 2, ...
    assert np.allclose(evals[:5], [0, 1, 2, 3, 4], atol=1e-6)


def test_hi_structure_single_mode():
    basis = enumerate_basis(1, 5)
    a = 0.5
    hi = build_hi(CoherentParams.uniform(a, 1), basis).dense()
    n = np.arange(6)
    expect = np.diag(n + a * a)
    off = -a * np.sqrt(n[:-1] + 1.0)
    expect += np.diag(off, 1) + np.diag(off, -1)
    assert np.allclose(hi, expect, atol=0, rtol=0)


def test_hi_multimode_additivity():
    # two uncoupled modes: H_I = H_1 (x) 1 + 1 (x) H_2 up to basis ordering
    basis = enumerate_basis(2, 4)
    hi = build_hi(CoherentParams.uniform(0.5, 2), basis).dense()
    for i, si in enumerate(basis.states):
        for j, sj in enumerate(basis.states):
            diff = [abs(x - y) for x, y in zip(si, sj)]
            if sum(diff) > 1:
                assert hi[i, j] == 0.0


def test_hi_per_mode_alphas():
    params = CoherentParams(alphas=(0.3, 0.9))
    basis = enumerate_basis(2, 3)
    hi = build_hi(params, basis).dense()
    i00 = index_of(basis, (0, 0))
    i10 = index_of(basis, (1, 0))
    i01 = index_of(basis, (0, 1))
    assert hi[i00, i10] == pytest.approx(-0.3)
    assert hi[i00, i01] == pytest.approx(-0.9)


# ---------------------------------------------------------------------------
# ramps and schedules

def test_linear_ramp_values():
    ramp = get_ramp("linear")
    s = np.linspace(0, 1, 11)
    assert np.allclose(ramp.f(s), s)
    assert np.allclose(ramp.df(s), 1.0)


def test_smoothstep_ramp_endpoints_and_derivative():
    ramp = get_ramp("smoothstep")
    assert ramp.f(0.0) == 0.0
    assert ramp.f(1.0) == 1.0
    assert ramp.df(0.0) == 0.0
    assert ramp.df(1.0) == 0.0
    s = np.linspace(0, 1, 201)
    fd = np.gradient(ramp.f(s), s)
    assert np.max(np.abs(fd[2:-2] - ramp.df(s)[2:-2])) < 1e-3


def test_unknown_ramp_rejected():
    with pytest.raises(ValueError):
        get_ramp("cubic-ease")


def test_schedule_grid_validation():
    ramp = get_ramp("linear")
    # sub-interval zoom grids are allowed; duplicates and excursions are not
    Schedule(total_time=1.0, ramp=ramp, grid=np.array([0.0, 0.4]))
    with pytest.raises(ValueError):
        Schedule(total_time=1.0, ramp=ramp, grid=np.array([0.0, 0.4, 0.4, 1.0]))
    with pytest.raises(ValueError):
        Schedule(total_time=1.0, ramp=ramp, grid=np.array([-0.1, 0.5, 1.0]))
    with pytest.raises(ValueError):
        Schedule(total_time=1.0, ramp=ramp, grid=np.array([0.0, 1.5]))


def test_nonmonotone_ramp_rejected():
    bad = Ramp(name="dip", f=lambda s: np.asarray(s) * (1 - np.asarray(s)),
               df=lambda s: 1 - 2 * np.asarray(s))
    with pytest.raises(ValueError):
        Schedule(total_time=1.0, ramp=bad, grid=np.linspace(0, 1, 9))


def test_default_schedule_shape():
    sched = default_schedule()
    assert sched.grid[0] == 0.0
    assert sched.grid[-1] == 1.0
    assert len(sched.grid) == 101


# ---------------------------------------------------------------------------
# interpolation

def test_interpolation_endpoints_bitwise():
    p = parse_equation("x - 2")
    basis = enumerate_basis(1, 8)
    hi = build_hi(CoherentParams.uniform(0.5, 1), basis)
    hp = build_hp(p, basis)
    sched = default_schedule()
    h0 = build_interpolated(hi, hp, 0.0, sched).dense()
    h1 = build_interpolated(hi, hp, 1.0, sched).dense()
    assert np.array_equal(h0, hi.dense())
    assert np.array_equal(h1, hp.dense())


def test_interpolation_midpoint_convexity():
    p = parse_equation("x - 2")
    basis = enumerate_basis(1, 8)
    hi = build_hi(CoherentParams.uniform(0.5, 1), basis)
    hp = build_hp(p, basis)
    sched = default_schedule()
    h = build_interpolated(hi, hp, 0.5, sched).dense()
    assert np.allclose(h, 0.5 * hi.dense() + 0.5 * hp.dense())


def test_commutator_nonzero_scale():
    p = parse_equation("x - 6")
    basis = enumerate_basis(1, 24)
    hi = build_hi(CoherentParams.uniform(0.5, 1), basis)
    hp = build_hp(p, basis)
    c = commutator_nonzero(hi, hp)
    assert c > 1.0
    # an operator commutes with itself
    assert commutator_nonzero(hp, hp) == 0.0


def test_operator_matrix_requires_symmetry():
    basis = enumerate_basis(1, 2)
    bad = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        OperatorMatrix(basis=basis, entries=bad)


# ---------------------------------------------------------------------------
# export

def test_export_text_round_trip(tmp_path):
    p = parse_equation("x - 2")
    basis = enumerate_basis(1, 5)
    hp = build_hp(p, basis)
    path = tmp_path / "hp.txt"
    export_matrix(hp, str(path), fmt="text")
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    data = [ln for ln in lines if not ln.startswith("#")]
    assert any("size" in h for h in header)
    got = np.array([[float(x) for x in ln.split()] for ln in data])
    assert np.array_equal(got, hp.dense())


def test_export_binary_round_trip(tmp_path):
    p = parse_equation("x^2 - 3")
    basis = enumerate_basis(1, 6)
    hp = build_hp(p, basis)
    path = tmp_path / "hp.npy"
    export_matrix(hp, str(path), fmt="binary")
    got = np.load(path)
    assert np.array_equal(got, hp.dense())
    assert os.path.exists(str(path) + ".meta.json")


def test_export_rejects_unknown_format(tmp_path):
    p = parse_equation("x - 1")
    basis = enumerate_basis(1, 3)
    hp = build_hp(p, basis)
    with pytest.raises(ValueError):
        export_matrix(hp, str(tmp_path / "m.bin"), fmt="hdf5")
