"""Interval exchange transformation of the alpha-flow on a polysquare surface.

The left side of square i is identified with [i, i+1) by height.  A point
x = i + y flows with slope alpha; if y < 1 - alpha it meets the right side of
square i at height y + alpha, otherwise it first crosses the top edge into
``top[i]`` and meets that square's right side at height y + alpha - 1.  The
gluing of that right side decides which left side it lands on.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import InvalidSurface, PrecisionExhausted, SingularHit
from .numbers import ALPHA, ContinuedFraction, LinearForm, compare, floor_form, sign
from .surfaces import PolysquareSurface, resolve_gates, segment_bounds, validate

Point = Union[int, Fraction, LinearForm]


@dataclass(frozen=True)
class Piece:
    lo: LinearForm
    hi: LinearForm
    target: LinearForm
    square: int
    target_square: int

    @property
    def shift(self) -> LinearForm:
        return self.target - self.lo

    @property
    def target_hi(self) -> LinearForm:
        return self.target + (self.hi - self.lo)

    def __str__(self) -> str:
        return f"T([{self.lo}, {self.hi})) = [{self.target}, {self.target_hi})"


class _SortedForms:
    """Binary search over sorted linear forms with cached 64-bit enclosures."""

    def __init__(self, forms: Sequence[LinearForm], env):
        self.forms = list(forms)
        self.env = env
        ivs = [f.interval(env, 64) for f in self.forms]
        self.lo = [iv.lo for iv in ivs]
        self.hi = [iv.hi for iv in ivs]

    def _cmp(self, i: int, x: LinearForm, xlo: Fraction, xhi: Fraction) -> int:
        if self.hi[i] < xlo:
            return -1
        if self.lo[i] > xhi:
            return 1
        return compare(self.forms[i], x, self.env)

    def locate(self, x: LinearForm) -> tuple[int, bool]:
        """Index of the last form <= x and whether it equals x."""
        iv = x.interval(self.env, 64)
        lo, hi = 0, len(self.forms)
        exact = False
        while lo < hi:
            mid = (lo + hi) // 2
            c = self._cmp(mid, x, iv.lo, iv.hi)
            if c <= 0:
                lo = mid + 1
                if c == 0:
                    exact = True
                    break
            else:
                hi = mid
        if exact:
            return lo - 1, True
        return lo - 1, False


@dataclass
class OrbitResult:
    points: list[LinearForm]
    squares: list[int]
    singular_step: Optional[int] = None

    @property
    def truncated(self) -> bool:
        return self.singular_step is not None


class IntervalExchange:
    """A piecewise translation of [0, s) built from a surface and a slope."""

    def __init__(self, pieces: Sequence[Piece], s: int, alpha: ContinuedFraction, env, surface=None):
        self.pieces = list(pieces)
        self.s = s
        self.alpha = alpha
        self.env = env
        self.surface = surface
        self._fwd = _SortedForms([p.lo for p in self.pieces], env)
        by_target = sorted(range(len(self.pieces)), key=lambda i: float(self._target_mid(i)))
        self._inv_order = by_target
        self._inv = _SortedForms([self.pieces[i].target for i in by_target], env)

    def _target_mid(self, i: int):
        return self.pieces[i].target.interval(self.env, 64).mid

    # -- structure ----------------------------------------------------------

    def singularities(self) -> list[LinearForm]:
        return [p.lo for p in self.pieces]

    def singularities_mod1(self) -> list[LinearForm]:
        """Distinct piece endpoints reduced mod 1, sorted."""
        out: list[LinearForm] = []
        for p in self.pieces:
            f = p.lo - floor_form(p.lo, self.env)
            if not any(f == g or compare(f, g, self.env) == 0 for g in out):
                out.append(f)
        out.sort(key=lambda f: f.interval(self.env, 64).mid)
        return out

    def inverse_singularities_mod1(self) -> list[LinearForm]:
        out: list[LinearForm] = []
        for p in self.pieces:
            f = p.target - floor_form(p.target, self.env)
            if not any(compare(f, g, self.env) == 0 for g in out):
                out.append(f)
        out.sort(key=lambda f: f.interval(self.env, 64).mid)
        return out

    def square_maps(self) -> tuple[list[LinearForm], list[tuple[int, ...]]]:
        """Mod-1 breakpoints s_0 = 0 < s_1 < ... and, for each [s_k, s_k+1), the
        map square -> next square shared by every point of that interval."""
        pts = self.singularities_mod1()
        maps = []
        for sk in pts:
            row = []
            for sq in range(self.s):
                i, _ = self._fwd.locate(sk + sq)
                row.append(self.pieces[i].target_square)
            maps.append(tuple(row))
        return pts, maps

    # -- evaluation ---------------------------------------------------------

    def _piece(self, x: LinearForm, step: int = 0) -> Piece:
        i, exact = self._fwd.locate(x)
        if exact:
            raise SingularHit(f"{x} is a singular point of T", step=step)
        if i < 0 or compare(x, self.s, self.env) >= 0:
            raise ValueError(f"{x} is outside [0, {self.s})")
        return self.pieces[i]

    def apply(self, x: Point, step: int = 0) -> LinearForm:
        x = LinearForm.lift(x)
        return x + self._piece(x, step).shift

    def apply_inverse(self, x: Point, step: int = 0) -> LinearForm:
        x = LinearForm.lift(x)
        j, exact = self._inv.locate(x)
        if exact:
            raise SingularHit(f"{x} is a singular point of the inverse", step=step)
        if j < 0 or compare(x, self.s, self.env) >= 0:
            raise ValueError(f"{x} is outside [0, {self.s})")
        p = self.pieces[self._inv_order[j]]
        return x - p.shift

    def square_of(self, x: Point) -> int:
        return floor_form(x, self.env)

    def orbit(self, x: Point, steps: int) -> OrbitResult:
        """Visit sequence x_0..x_steps with the square of every visit.  Stops early
        (flagged) when the orbit reaches a singular point."""
        x = LinearForm.lift(x)
        pts = [x]
        sqs = [self.square_of(x)]
        for j in range(steps):
            try:
                p = self._piece(x, j)
            except SingularHit:
                return OrbitResult(pts, sqs, j)
            x = x + p.shift
            pts.append(x)
            sqs.append(p.target_square)
        return OrbitResult(pts, sqs)

    def rows(self) -> list[tuple[str, str, str, str, int, int]]:
        return [(str(p.lo), str(p.hi), str(p.target), str(p.target_hi), p.square, p.target_square) for p in self.pieces]

    def check(self) -> list[str]:
        """Partition, bijection and rotation-reduction checks on the piece table."""
        out = []
        env = self.env
        cursor = LinearForm()
        for p in self.pieces:
            if compare(p.lo, cursor, env) != 0:
                out.append(f"gap or overlap at {cursor}")
            if compare(p.lo, p.hi, env) >= 0:
                out.append(f"empty piece {p}")
            d = p.shift - ALPHA
            if not d.is_constant or d.coef("1").denominator != 1:
                out.append(f"piece {p} is not alpha plus an integer mod 1")
            cursor = p.hi
        if compare(cursor, self.s, env) != 0:
            out.append("pieces do not end at s")
        targets = sorted(self.pieces, key=lambda p: p.target.interval(env, 64).mid)
        cursor = LinearForm()
        for p in targets:
            if compare(p.target, cursor, env) != 0:
                out.append(f"image gap or overlap at {cursor}")
            cursor = p.target_hi
        if compare(cursor, self.s, env) != 0:
            out.append("images do not end at s")
        return out


def build_iet(surface: PolysquareSurface, alpha: ContinuedFraction, **gates) -> IntervalExchange:
    """Shoot the flow from every left edge to the next one and record the pieces."""
    if gates:
        surface = surface.specialize(**gates)
    bad = validate(surface, alpha)
    if bad:
        raise InvalidSurface("; ".join(bad))
    names = surface.gate_names()
    values = dict(surface.gates)
    env, forms = resolve_gates({k: values[k] for k in names}, alpha, names)
    one = LinearForm.const(1)
    a = ALPHA
    if not (0 < float(alpha) < 1):
        raise ValueError("alpha must lie in (0, 1)")
    pieces: list[Piece] = []
    right = [segment_bounds(surface, i, forms, env) for i in range(surface.s)]
    for sq in range(surface.s):
        base = LinearForm.const(sq)
        # heights [alpha, 1) on the right side of the square itself
        for lo, hi, tgt in right[sq]:
            if compare(hi, a, env) <= 0:
                continue
            start = a if compare(lo, a, env) < 0 else lo
            pieces.append(Piece(base + start - a, base + hi - a, tgt + start, sq, tgt))
        # heights [0, alpha) on the right side of the square above
        up = surface.top[sq]
        for lo, hi, tgt in right[up]:
            if compare(lo, a, env) >= 0:
                continue
            end = hi if compare(hi, a, env) < 0 else a
            pieces.append(Piece(base + one - a + lo, base + one - a + end, tgt + lo, sq, tgt))
    return IntervalExchange(pieces, surface.s, alpha, env, surface)


def _lf(c=0, a=0, b=0) -> LinearForm:
    return LinearForm({"1": Fraction(c), "alpha": Fraction(a), "b": Fraction(b)})


_H = Fraction(1, 2)

# The (L;b) table for 0 < b < alpha < 1/2: (source lo, source hi, target lo).
L_B_TABLE: tuple[tuple[LinearForm, LinearForm, LinearForm], ...] = (
    (_lf(0), _lf(1, -1, -_H), _lf(0, 1)),
    (_lf(1, -1, -_H), _lf(1, -1), _lf(2, 0, -_H)),
    (_lf(1, -1), _lf(1), _lf(3)),
    (_lf(1), _lf(2, -1, -1), _lf(1, 1)),
    (_lf(2, -1, -1), _lf(2, -1), _lf(3, 0, -1)),
    (_lf(2, -1), _lf(2, -1, 1), _lf(2)),
    (_lf(2, -1, 1), _lf(2), _lf(1, 0, 1)),
    (_lf(2), _lf(3, -1, -1), _lf(2, 1)),
    (_lf(3, -1, -1), _lf(3, -1, -_H), _lf(2, 0, -1)),
    (_lf(3, -1, -_H), _lf(3, -1), _lf(1, 0, -_H)),
    (_lf(3, -1), _lf(3, -1, 1), _lf(0)),
    (_lf(3, -1, 1), _lf(3), _lf(2, 0, 1)),
    (_lf(3), _lf(4, -1), _lf(3, 1)),
    (_lf(4, -1), _lf(4, -1, 1), _lf(1)),
    (_lf(4, -1, 1), _lf(4), _lf(0, 0, 1)),
)


def predicted_singularities_mod1(surface: PolysquareSurface, alpha: ContinuedFraction, **gates) -> list[LinearForm]:
    """{0, 1 - alpha} together with {r b - alpha} over all division multipliers."""
    names = surface.gate_names()
    values = dict(surface.gates)
    values.update(gates)
    env, forms = resolve_gates({k: values[k] for k in names}, alpha, names)
    cands = [LinearForm(), LinearForm.const(1) - ALPHA]
    for i in range(surface.s):
        for dp in surface.division_points(i):
            v = dp.form(forms) - ALPHA
            cands.append(v - floor_form(v, env))
    out: list[LinearForm] = []
    for f in cands:
        if not any(compare(f, g, env) == 0 for g in out):
            out.append(f)
    out.sort(key=lambda f: f.interval(env, 64).mid)
    return out
