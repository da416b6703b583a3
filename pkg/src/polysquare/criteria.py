"""Invariant colorings of the n-square-b surface for gates b = {m alpha}.

Colors are 0-based: color c here is the (c+1)-st color of the algorithm, and
square 0 is the first square face.  Interval j of a left edge is
I_j = [b'_j, b'_{j+1}) with b'_j = {q_j alpha}; the top interval is I_{m-1}.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import DivisibilityViolated, NotInvariant
from .numbers import ALPHA, ContinuedFraction, LinearForm, compare, frac_form, sort_by_rotation


def upsilon(m: int, alpha: ContinuedFraction) -> int:
    """Number of q in [1, m] with {q alpha} < alpha."""
    if m < 1:
        raise ValueError("m must be positive")
    order = sort_by_rotation(alpha, range(m + 1))
    # everything sorted strictly below q=1 except q=0 itself
    return order.index(1) - 1


def gcd_criterion(n: int, m: int, alpha: ContinuedFraction) -> tuple[int, bool]:
    """d = gcd(n, m, Upsilon(m; alpha)) and whether d > 1."""
    d = math.gcd(math.gcd(n, m), upsilon(m, alpha))
    return d, d > 1


@dataclass(frozen=True)
class ColoringSpec:
    n: int
    m: int
    d: int
    interval_digits: tuple[int, ...]
    alpha: ContinuedFraction

    def color_of(self, square: int, j: int) -> int:
        """Color of interval I_j on the left edge of a square (top to bottom the
        colors of square l start at color l)."""
        return (square + self.m - 1 - j) % self.d

    def boundary(self, j: int) -> LinearForm:
        if j >= self.m:
            return LinearForm.const(1)
        return frac_form(ALPHA * self.interval_digits[j], {"alpha": self.alpha})

    def interval_length(self, j: int) -> LinearForm:
        return self.boundary(j + 1) - self.boundary(j)

    def gate(self) -> LinearForm:
        return frac_form(ALPHA * self.m, {"alpha": self.alpha})

    def locate(self, y: LinearForm, env) -> int:
        lo, hi = 0, self.m
        while lo < hi:
            mid = (lo + hi) // 2
            if compare(self.boundary(mid), y, env) <= 0:
                lo = mid + 1
            else:
                hi = mid
        return lo - 1

    def color_at(self, square: int, y: LinearForm, env) -> int:
        return self.color_of(square, self.locate(y, env))

    def table(self) -> list[list[int]]:
        """Rows I_{m-1} (top) down to I_0, one column per square."""
        return [[self.color_of(sq, j) for sq in range(self.n)] for j in reversed(range(self.m))]


def double_periodic_coloring(n: int, m: int, alpha: ContinuedFraction, d: int) -> ColoringSpec:
    if d < 2:
        raise DivisibilityViolated("a coloring needs d >= 2")
    if n % d or m % d:
        raise DivisibilityViolated(f"d={d} must divide n={n} and m={m}")
    order = tuple(sort_by_rotation(alpha, range(m)))
    return ColoringSpec(n, m, d, order, alpha)


@dataclass
class InvarianceVerdict:
    invariant: bool
    combinatorial: bool
    torus_colorings_equal: bool
    samples: int
    sample_failures: int
    upsilon: int


def _cell_midpoints(alpha: ContinuedFraction, qs) -> list[LinearForm]:
    env = {"alpha": alpha}
    order = sort_by_rotation(alpha, list(qs))
    forms = [frac_form(ALPHA * q, env) for q in order] + [LinearForm.const(1)]
    if compare(forms[0], 0, env) != 0:
        forms.insert(0, LinearForm())
    return [(a + b) / 2 for a, b in zip(forms, forms[1:])]


def verify_invariance(coloring: ColoringSpec, alpha: Optional[ContinuedFraction] = None, samples: int = 1000, seed: int = 0) -> InvarianceVerdict:
    """Is the coloring carried to itself by the alpha-flow on the n-square-{m alpha} surface?"""
    alpha = alpha or coloring.alpha
    env = {"alpha": alpha}
    n, m, d = coloring.n, coloring.m, coloring.d
    b = coloring.gate()

    def step(sq: int, y: LinearForm) -> tuple[int, LinearForm]:
        y2 = frac_form(y + ALPHA, env)
        return ((sq + 1) % n if compare(y2, b, env) < 0 else sq), y2

    # exact check on the common refinement {q alpha}, q = -1..m-1
    combinatorial = True
    for mid in _cell_midpoints(alpha, range(-1, m)):
        for sq in range(n):
            sq2, y2 = step(sq, mid)
            if coloring.color_at(sq, mid, env) != coloring.color_at(sq2, y2, env):
                combinatorial = False
    # the two colorings of the unit torus from the proof
    equal = True
    for mid in _cell_midpoints(alpha, range(0, m + 1)):
        shifted = coloring.color_at(0, frac_form(mid - ALPHA, env), env)
        bumped = (coloring.color_at(0, mid, env) + (1 if compare(mid, b, env) < 0 else 0)) % d
        if shifted != bumped:
            equal = False
    rng = random.Random(seed)
    failures = 0
    for _ in range(samples):
        sq = rng.randrange(n)
        y = LinearForm.const(Fraction(rng.getrandbits(53), 1 << 53))
        sq2, y2 = step(sq, y)
        if coloring.color_at(sq, y, env) != coloring.color_at(sq2, y2, env):
            failures += 1
    return InvarianceVerdict(combinatorial and failures == 0, combinatorial, equal, samples, failures, upsilon(m, alpha))


def predicted_densities(coloring: ColoringSpec, alpha: Optional[ContinuedFraction] = None, *, check: bool = True) -> dict[tuple[int, int], LinearForm]:
    """Visit density of each color class on each square, as u*alpha + v.

    A geodesic inside color class c spends the fraction (d/n) * |color c on the
    left edge of square l| of its time in square l.
    """
    alpha = alpha or coloring.alpha
    if check and not verify_invariance(coloring, alpha, samples=0).combinatorial:
        raise NotInvariant("the coloring is not flow invariant")
    out: dict[tuple[int, int], LinearForm] = {}
    scale = Fraction(coloring.d, coloring.n)
    for c in range(coloring.d):
        for sq in range(coloring.n):
            total = LinearForm()
            for j in range(coloring.m):
                if coloring.color_of(sq, j) == c:
                    total = total + coloring.interval_length(j)
            out[(c, sq)] = total * scale
    return out


def shaded_color(coloring: ColoringSpec) -> int:
    """The class containing the bottom interval I_0 of square 0 (the shaded set)."""
    return coloring.color_of(0, 0)
