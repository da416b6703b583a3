import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracle import const_surd
from polysquare.criteria import (
    double_periodic_coloring,
    gcd_criterion,
    predicted_densities,
    shaded_color,
    upsilon,
    verify_invariance,
)
from polysquare.errors import DivisibilityViolated, NotInvariant
from polysquare.numbers import ALPHA, ContinuedFraction, LinearForm, frac_form

GOLDEN = ContinuedFraction.parse("golden")
SILVER = ContinuedFraction.parse("silver")


def upsilon_brute(a: int, m: int) -> int:
    surd = const_surd(a)
    return sum(1 for q in range(1, m + 1) if surd.sign(-surd.floor(0, q), q - 1) < 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(1, 40))
def test_upsilon_matches_oracle(a, m):
    assert upsilon(m, ContinuedFraction.parse(f"const:{a}")) == upsilon_brute(a, m)


def test_upsilon_examples():
    # alpha < 1/2: {2 alpha} > alpha, so nothing below alpha for m = 2
    assert upsilon(2, SILVER) == 0
    # golden: {2 alpha} ~ 0.236 < alpha
    assert upsilon(2, GOLDEN) == 1
    with pytest.raises(ValueError):
        upsilon(0, GOLDEN)


@pytest.mark.parametrize(
    "n,m,spec,d",
    [(2, 2, "const:2", 2), (2, 2, "golden", 1), (2, 4, "const:5", 2), (3, 3, "const:4", 3), (2, 1, "golden", 1), (4, 2, "silver", 2)],
)
def test_gcd_examples(n, m, spec, d):
    cf = ContinuedFraction.parse(spec)
    got, holds = gcd_criterion(n, m, cf)
    assert got == d == math.gcd(n, m, upsilon(m, cf))
    assert holds == (d > 1)


def test_coloring_table_shape_and_periodicity():
    col = double_periodic_coloring(4, 6, SILVER, 2)
    table = col.table()
    assert len(table) == 6 and all(len(r) == 4 for r in table)
    for sq in range(4):
        for j in range(6):
            assert col.color_of(sq + 2, j) == col.color_of(sq, j)
            assert col.color_of(sq, j + 2) == col.color_of(sq, j)
            assert col.color_of(sq + 1, j + 1) == col.color_of(sq, j)
    assert shaded_color(col) == col.color_of(0, 0)


def test_coloring_boundaries_are_sorted_multiples():
    col = double_periodic_coloring(2, 4, GOLDEN, 2)
    env = {"alpha": GOLDEN}
    bounds = [col.boundary(j).interval(env, 64).mid for j in range(5)]
    assert bounds[0] == 0 and bounds[-1] == 1
    assert bounds == sorted(bounds)
    assert col.gate() == frac_form(ALPHA * 4, env)


def test_divisibility():
    with pytest.raises(DivisibilityViolated):
        double_periodic_coloring(3, 4, GOLDEN, 2)
    with pytest.raises(DivisibilityViolated):
        double_periodic_coloring(2, 2, GOLDEN, 1)


@pytest.mark.parametrize("n,m", [(2, 1), (2, 2), (2, 3), (2, 4), (3, 3), (4, 4), (6, 6)])
@pytest.mark.parametrize("spec", ["golden", "silver", "const:3", "const:6", "periodic"])
def test_invariance_iff_criterion(n, m, spec):
    cf = ContinuedFraction([1, 3], [2, 5]) if spec == "periodic" else ContinuedFraction.parse(spec)
    g = math.gcd(n, m)
    d, holds = gcd_criterion(n, m, cf)
    for dd in range(2, g + 1):
        if g % dd:
            continue
        v = verify_invariance(double_periodic_coloring(n, m, cf, dd), samples=200)
        # a d-coloring is invariant exactly when d also divides Upsilon
        assert v.invariant == (v.upsilon % dd == 0)
        assert v.combinatorial == v.invariant
        assert v.torus_colorings_equal == v.invariant
        if v.invariant:
            assert holds


def test_densities_for_figure_cases():
    cases = [
        ("const:2", 2, (ALPHA, 1 - ALPHA)),
        ("const:5", 4, (ALPHA * 2, 1 - ALPHA * 2)),
    ]
    for spec, m, expect in cases:
        cf = ContinuedFraction.parse(spec)
        col = double_periodic_coloring(2, m, cf, 2)
        dens = predicted_densities(col)
        c = shaded_color(col)
        assert (dens[(c, 0)], dens[(c, 1)]) == expect


@pytest.mark.parametrize("n,m,spec", [(2, 2, "const:2"), (2, 4, "const:5"), (4, 4, "const:9"), (3, 3, "const:4")])
def test_densities_sum_to_one_and_never_uniform(n, m, spec):
    cf = ContinuedFraction.parse(spec)
    d, holds = gcd_criterion(n, m, cf)
    assert holds
    col = double_periodic_coloring(n, m, cf, d)
    dens = predicted_densities(col)
    for c in range(d):
        assert sum((dens[(c, sq)] for sq in range(n)), LinearForm()) == LinearForm.const(1)
        for sq in range(n):
            assert dens[(c, sq)] != LinearForm.const(Fraction(1, n))


def test_non_invariant_coloring_refused():
    col = double_periodic_coloring(2, 2, GOLDEN, 2)
    with pytest.raises(NotInvariant):
        predicted_densities(col)
    assert predicted_densities(col, check=False)
