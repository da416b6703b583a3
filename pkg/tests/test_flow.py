import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle import const_surd
from polysquare.errors import SingularHit
from polysquare.flow import (
    OrbitStats,
    complement,
    discrepancy,
    psi_b_2alpha,
    psi_b_alpha,
    psi_b_alpha_tau0,
    psi_closed_form,
    psi_count,
    rotation_indices,
    simulate,
    symmetry_transform,
    which_square,
)
from polysquare.iet import build_iet
from polysquare.numbers import ALPHA, ContinuedFraction, LinearForm, compare, frac_form
from polysquare.surfaces import make_L_b, make_n_square_b, make_torus

GOLDEN = ContinuedFraction.parse("golden")
SILVER = ContinuedFraction.parse("silver")


def psi_brute(a: int, tau: Fraction, b, N: int) -> int:
    """#{0 <= q < N : {tau + q alpha} < b} for alpha = const:a, b = (u, v)."""
    surd = const_surd(a)
    bu, bv = b
    count = 0
    for q in range(N):
        fl = surd.floor(tau, q)
        if surd.sign(tau - fl - bu, q - bv) < 0:
            count += 1
    return count


def b_pair(a: int, m: int):
    """{m alpha} as (u, v)."""
    return const_surd(a).frac(m)


# -- Psi ------------------------------------------------------------------

@pytest.mark.parametrize("a", [1, 2, 3])
def test_psi_count_matches_oracle(a):
    cf = ContinuedFraction.parse(f"const:{a}")
    env = {"alpha": cf}
    for m in (1, 2, 3):
        b = frac_form(ALPHA * m, env)
        for tau in (Fraction(0), Fraction(1, 3), Fraction(5, 7)):
            for N in (1, 2, 5, 17, 60):
                assert psi_count(cf, tau, b, N) == psi_brute(a, tau, b_pair(a, m), N)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.fractions(0, 1).filter(lambda t: t < 1), st.fractions(0, 1).filter(lambda b: 0 < b < 1), st.integers(0, 300))
def test_psi_count_rational_gate(a, tau, b, N):
    cf = ContinuedFraction.parse(f"const:{a}")
    assert psi_count(cf, tau, b, N) == psi_brute(a, tau, (b, 0), N)


def test_psi_count_gate_below_fixed_point_resolution():
    tiny = Fraction(1, 2**64 + 1)
    for a in (1, 3):
        cf = ContinuedFraction.parse(f"const:{a}")
        assert psi_count(cf, 0, tiny, 300) == psi_brute(a, 0, (tiny, 0), 300) == 1
        assert psi_count(cf, Fraction(1, 3), tiny, 300) == 0


@pytest.mark.parametrize("cf", [GOLDEN, SILVER, ContinuedFraction.parse("const:4")])
def test_psi_closed_forms(cf):
    env = {"alpha": cf}
    for N in range(2, 80):
        assert psi_b_alpha_tau0(cf, N) == psi_count(cf, 0, ALPHA, N)
        for tau in (Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)):
            assert psi_b_alpha(cf, tau, N) == psi_count(cf, tau, ALPHA, N)
        for m in (1, 2, 3, 4):
            b = frac_form(ALPHA * m, env)
            assert psi_closed_form(cf, Fraction(1, 3), b, N, m) == psi_count(cf, Fraction(1, 3), b, N)


@pytest.mark.parametrize("spec", ["golden", "silver", "const:3", "const:1"])
def test_psi_two_alpha_form(spec):
    cf = ContinuedFraction.parse(spec)
    b = frac_form(ALPHA * 2, {"alpha": cf})
    for N in range(3, 120):
        assert psi_b_2alpha(cf, N) == psi_count(cf, 0, b, N)


def test_psi_examples_at_ten():
    # golden alpha ~ 0.618: ceil(9 alpha) = 6
    assert psi_b_alpha_tau0(GOLDEN, 10) == 6
    # silver alpha ~ 0.414: ceil(9 alpha) = 4
    assert psi_b_alpha_tau0(SILVER, 10) == 4


def test_which_square_follows_simulation():
    cf = SILVER
    b = Fraction(3, 10)
    surf = make_n_square_b(2, b)
    tau = Fraction(1, 7)
    # the first edge hit is at height tau, so the particle starts one segment earlier
    start = frac_form(LinearForm.const(tau) - ALPHA, {"alpha": cf})
    stats = simulate(surf, cf, (0, start), 200, record=True)
    for N in range(1, 201):
        parity, sq = which_square(cf, tau, b, N)
        assert sq == stats.squares[N]


# -- rotation indices -----------------------------------------------------

def test_rotation_indices_against_exact():
    env = {"alpha": GOLDEN}
    bps = [LinearForm(), LinearForm.const(Fraction(1, 3)), LinearForm.const(1) - ALPHA]
    idx, hit = rotation_indices(GOLDEN, LinearForm.const(Fraction(1, 5)), env, 500, bps)
    surd = const_surd(1)
    for j in range(500):
        y = (Fraction(1, 5) - surd.floor(Fraction(1, 5), j), j)
        k = sum(1 for u, v in [(0, 0), (Fraction(1, 3), 0), (1, -1)] if surd.sign(y[0] - u, y[1] - v) >= 0) - 1
        assert idx[j] == k
    assert not hit.any()


# -- simulation -----------------------------------------------------------

def test_torus_equidistributes():
    stats = simulate(make_torus(3), GOLDEN, (0, Fraction(1, 2)), 200000, grid=8)
    assert np.allclose(stats.densities, 1 / 3, atol=2e-3)
    assert discrepancy(stats) < 0.01
    assert discrepancy(stats, 8) < 0.01
    with pytest.raises(ValueError):
        discrepancy(stats, 4)


def test_time_accounting():
    n = 12345
    stats = simulate(make_L_b(Fraction(3, 10)), SILVER, (1, Fraction(1, 3)), n)
    L = math.sqrt(1 + float(SILVER) ** 2)
    assert stats.crossings == n
    assert stats.total_time == pytest.approx(n * L)
    assert stats.time_per_square.sum() == pytest.approx(stats.total_time)
    assert stats.densities.sum() == pytest.approx(1.0)


def test_simulate_by_time():
    L = math.sqrt(1 + float(GOLDEN) ** 2)
    stats = simulate(make_torus(2), GOLDEN, (0, Fraction(1, 4)), time=100.5 * L)
    assert stats.crossings == 100
    assert stats.total_time == pytest.approx(100.5 * L)
    with pytest.raises(ValueError):
        simulate(make_torus(2), GOLDEN, (0, Fraction(1, 4)))


def test_simulation_matches_iet_orbit():
    surf = make_L_b(Fraction(3, 10))
    T = build_iet(surf, SILVER)
    y0 = Fraction(2, 9)
    stats = simulate(surf, SILVER, (2, y0), 300, iet=T, record=True)
    orbit = T.orbit(2 + y0, 300)
    assert list(stats.squares) == orbit.squares


def test_two_square_alpha_gate_is_uniform():
    # gcd(2, 1, Upsilon) = 1: no invariant coloring, both squares get 1/2
    b = frac_form(ALPHA, {"alpha": GOLDEN})
    stats = simulate(make_n_square_b(2, b), GOLDEN, (0, Fraction(1, 3)), 10**5)
    assert np.allclose(stats.densities, 0.5, atol=1e-2)


def test_singular_start_raises():
    with pytest.raises(SingularHit):
        simulate(make_n_square_b(2, Fraction(3, 10)), SILVER, (0, 0), 10)
    with pytest.raises(ValueError):
        simulate(make_torus(1), SILVER, (0, Fraction(3, 2)), 10)


def test_orbit_stats_add():
    surf = make_torus(2)
    a = simulate(surf, GOLDEN, (0, Fraction(1, 3)), 100, grid=2)
    b = simulate(surf, GOLDEN, (1, Fraction(1, 5)), 50, grid=2)
    c = a + b
    assert c.crossings == 150
    assert c.total_time == pytest.approx(a.total_time + b.total_time)
    assert np.allclose(c.test_cell_hits, a.test_cell_hits + b.test_cell_hits)
    assert isinstance(c, OrbitStats)


def test_deterministic():
    surf = make_L_b(Fraction(3, 10))
    a = simulate(surf, SILVER, (0, Fraction(1, 3)), 5000, grid=4)
    b = simulate(surf, SILVER, (0, Fraction(1, 3)), 5000, grid=4)
    assert np.array_equal(a.time_per_square, b.time_per_square)
    assert np.array_equal(a.test_cell_hits, b.test_cell_hits)


# -- symmetry -------------------------------------------------------------

@pytest.mark.parametrize("spec", ["golden", "silver", "const:3", "periodic:1,4", "const:7"])
def test_complement(spec):
    cf = ContinuedFraction.parse(spec) if not spec.startswith("periodic") else ContinuedFraction([], [1, 4])
    c = complement(cf)
    assert float(c) == pytest.approx(1 - float(cf), abs=1e-12)
    assert float(complement(c)) == pytest.approx(float(cf), abs=1e-12)


def test_symmetry_transform_is_an_involution():
    b = Fraction(3, 10)
    x = Fraction(1, 7)
    y, beta, env = symmetry_transform(x, SILVER, b)
    assert float(beta) == pytest.approx(1 - float(SILVER))
    z, gamma, _ = symmetry_transform(y, beta, b)
    assert z == LinearForm.const(x)
    assert float(gamma) == pytest.approx(float(SILVER))


def test_symmetry_preserves_densities():
    b = Fraction(3, 10)
    surf = make_n_square_b(2, b)
    x = Fraction(1, 7)
    y, beta, env = symmetry_transform(x, SILVER, b)
    d1 = simulate(surf, SILVER, (0, x), 200000).densities
    d2 = simulate(surf, beta, (0, y.coef("1")), 200000).densities
    # the reflection maps the pair of squares onto itself
    assert sorted(d1) == pytest.approx(sorted(d2), abs=2e-2)
