"""Shared builders for the single-mode reference system used across tests."""
import pytest

from adiadio import (CoherentParams, build_hi, build_hp, enumerate_basis,
                     parse_equation)
from adiadio.operators import default_schedule


def make_system(equation: str, num_modes: int, cutoff: int, alpha: float = 0.5):
    p = parse_equation(equation)
    assert p.num_vars == num_modes
    basis = enumerate_basis(num_modes, cutoff)
    coherent = CoherentParams.uniform(alpha, num_modes)
    return p, basis, coherent, build_hi(coherent, basis), build_hp(p, basis)


@pytest.fixture(scope="session")
def x6_cutoff24():
    """x - 6 on 25 single-mode states: the workhorse configuration."""
    return make_system("x - 6", 1, 24)


@pytest.fixture(scope="session")
def linear_schedule():
    return default_schedule()
