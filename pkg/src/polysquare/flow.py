"""Geodesic flow statistics on polysquare surfaces.

Between two consecutive hits of the left vertical edges a geodesic stays in a
known pair of squares, so the continuous flow is driven by the interval
exchange.  Modulo 1 the hit heights form the rotation sequence {y0 + j alpha},
which is generated in 64-bit fixed point and checked against a certified error
bound.  Heights that land too close to a breakpoint are redone exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import SingularHit
from .iet import IntervalExchange, build_iet
from .numbers import (
    ALPHA,
    ContinuedFraction,
    Exact,
    LinearForm,
    Real,
    compare,
    floor_form,
    frac_form,
    sign,
)
from .surfaces import PolysquareSurface

_BITS = 64
_SCALE = 1 << _BITS
_CHUNK = 1 << 18


def _to_fixed(form: LinearForm, env) -> int:
    """floor(form * 2**64) for a form with value in [0, 1), within one unit."""
    iv = form.interval(env, _BITS + 32)
    return math.floor(iv.lo * _SCALE) % _SCALE


def rotation_indices(
    alpha: ContinuedFraction,
    y0: LinearForm,
    env,
    n: int,
    breakpoints: Sequence[LinearForm],
    *,
    start: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """For j = start..start+n-1, the index k with s_k <= {y0 + j alpha} < s_k+1.

    ``breakpoints`` must be sorted in [0, 1) and begin with 0.  The second array
    flags the j whose point coincides exactly with a breakpoint.
    """
    y0 = frac_form(y0, env)
    S = np.array([_to_fixed(b, env) for b in breakpoints], dtype=np.uint64)
    if len(S) == 0 or S[0] != 0 or np.any(np.diff(S.astype(object)) < 0):
        raise ValueError("breakpoints must start at 0 and increase")
    # breakpoints closer than one fixed-point unit collide; points near them
    # are resolved exactly below, so only the exact order needs checking
    for i in np.flatnonzero(np.diff(S.astype(object)) == 0):
        if compare(breakpoints[i], breakpoints[i + 1], env) >= 0:
            raise ValueError("breakpoints must start at 0 and increase")
    Y0 = _to_fixed(y0, env)
    A = _to_fixed(frac_form(ALPHA, env), env)
    K = len(S)
    out = np.empty(n, dtype=np.int64)
    hits = np.zeros(n, dtype=bool)
    for c0 in range(0, n, _CHUNK):
        c1 = min(n, c0 + _CHUNK)
        j = np.arange(start + c0, start + c1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            Y = np.uint64(Y0) + np.uint64(A) * j
        k = np.searchsorted(S, Y, side="right").astype(np.int64) - 1
        lo = Y - S[k]
        nxt = np.where(k + 1 < K, S[np.minimum(k + 1, K - 1)], np.uint64(0))
        with np.errstate(over="ignore"):
            hi = nxt - Y  # wraps to the distance up to 1 for the last interval
        err = j + np.uint64(4)
        bad = (lo <= err) | (hi <= err)
        out[c0:c1] = k
        for i in np.flatnonzero(bad):
            jj = start + c0 + int(i)
            kk, eq = _exact_index(y0 + ALPHA * jj, env, breakpoints)
            out[c0 + i] = kk
            hits[c0 + i] = eq
    return out, hits


def _exact_index(y: LinearForm, env, breakpoints) -> tuple[int, bool]:
    y = frac_form(y, env)
    lo, hi = 0, len(breakpoints)
    while lo < hi:
        mid = (lo + hi) // 2
        c = compare(breakpoints[mid], y, env)
        if c == 0:
            return mid, True
        if c < 0:
            lo = mid + 1
        else:
            hi = mid
    return lo - 1, False


# ---------------------------------------------------------------------------
# continuous simulation


@dataclass
class OrbitStats:
    total_time: float
    time_per_square: np.ndarray
    crossings: int
    gate_crossings: int
    test_cell_hits: Optional[np.ndarray] = None
    squares: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def densities(self) -> np.ndarray:
        return self.time_per_square / self.total_time

    def __add__(self, other: "OrbitStats") -> "OrbitStats":
        cells = None
        if self.test_cell_hits is not None and other.test_cell_hits is not None:
            cells = self.test_cell_hits + other.test_cell_hits
        return OrbitStats(
            self.total_time + other.total_time,
            self.time_per_square + other.time_per_square,
            self.crossings + other.crossings,
            self.gate_crossings + other.gate_crossings,
            cells,
        )


def _as_form(y, env, name: str) -> LinearForm:
    if isinstance(y, LinearForm):
        return y
    if isinstance(y, (int, Fraction)):
        return LinearForm.const(y)
    if isinstance(y, float):
        return LinearForm.const(Fraction(y))
    env[name] = y
    return LinearForm.symbol(name)


def simulate(
    surface: PolysquareSurface,
    alpha: ContinuedFraction,
    start: tuple[int, object] = (0, Fraction(1, 2)),
    crossings: Optional[int] = None,
    *,
    time: Optional[float] = None,
    grid: Optional[int] = None,
    record: bool = False,
    iet: Optional[IntervalExchange] = None,
    **gates,
) -> OrbitStats:
    """Run the alpha-flow from height ``start[1]`` on the left edge of square
    ``start[0]`` for a number of edge-to-edge segments (or a total time)."""
    T = iet if iet is not None else build_iet(surface, alpha, **gates)
    env = dict(T.env)
    sq0, y = start
    yform = _as_form(y, env, "__start")
    if sign(yform, env) < 0 or compare(yform, 1, env) >= 0:
        raise ValueError("start height must lie in [0, 1)")
    L = math.sqrt(1.0 + float(alpha) ** 2)
    if crossings is None:
        if time is None:
            raise ValueError("give crossings or time")
        crossings = int(time // L)
        tail = time / L - crossings
    else:
        tail = 0.0
    n = crossings + (1 if tail > 0 else 0)
    pts, maps = T.square_maps()
    idx, hit = rotation_indices(alpha, yform, env, n, pts)
    if hit.any():
        j = int(np.argmax(hit))
        raise SingularHit(f"geodesic reaches a singular point after {j} segments", step=j, elapsed=j * L)
    s = surface.s
    table = [list(m) for m in maps]
    sqs = np.empty(n + 1, dtype=np.int64)
    cur = sq0
    sqs[0] = cur
    ks = idx.tolist()
    out = [0] * n
    for j in range(n):
        cur = table[ks[j]][cur]
        out[j] = cur
    sqs[1:] = out
    here = sqs[:-1]
    top = np.array(surface.top, dtype=np.int64)
    ys = _heights(yform, env, n)
    a = float(alpha)
    frac_in = np.where(ys < 1.0 - a, 1.0, (1.0 - ys) / a)
    weight = np.full(n, L)
    if tail > 0:
        weight[-1] = L * tail
        frac_in[-1] = np.minimum(frac_in[-1], tail) / tail
    t_here = weight * frac_in
    per = np.bincount(here, weights=t_here, minlength=s)
    per += np.bincount(top[here], weights=weight - t_here, minlength=s)
    cells = None
    if grid:
        cells = _cell_hits(ys, here, top, a, grid, weight, s)
    gate = int(np.count_nonzero(sqs[1 : crossings + 1] != sqs[:crossings]))
    return OrbitStats(
        float(weight.sum()), per, crossings, gate, cells, sqs if record else None
    )


def _heights(yform: LinearForm, env, n: int) -> np.ndarray:
    Y0 = _to_fixed(frac_form(yform, env), env)
    A = _to_fixed(frac_form(ALPHA, env), env)
    j = np.arange(n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        Y = np.uint64(Y0) + np.uint64(A) * j
    return Y.astype(np.float64) / float(_SCALE)


def _cell_hits(ys, here, top, a, g, weight, s) -> np.ndarray:
    """Time in each of the g x g cells of every square, sampled at column midpoints."""
    cells = np.zeros(s * g * g)
    for c in range(g):
        h = ys + a * (c + 0.5) / g
        up = h >= 1.0
        sq = np.where(up, top[here], here)
        row = np.minimum((np.where(up, h - 1.0, h) * g).astype(np.int64), g - 1)
        cells += np.bincount((sq * g + row) * g + c, weights=weight / g, minlength=s * g * g)
    return cells.reshape(s, g, g)


def discrepancy(stats: OrbitStats, g: Optional[int] = None) -> float:
    """max over test cells of |empirical measure - cell area / s|."""
    if stats.test_cell_hits is None:
        raise ValueError("simulation was run without a grid")
    cells = stats.test_cell_hits
    s, gg, _ = cells.shape
    if g is not None and g != gg:
        raise ValueError("grid size mismatch")
    total = cells.sum()
    return float(np.max(np.abs(cells / total - 1.0 / (s * gg * gg))))


# ---------------------------------------------------------------------------
# the counting function of the 2-square-b surface


def _env_with(alpha: ContinuedFraction, **vals) -> tuple[dict, dict[str, LinearForm]]:
    env: dict = {"alpha": alpha}
    forms = {k: _as_form(v, env, f"__{k}") for k, v in vals.items()}
    return env, forms


def psi_count(alpha: ContinuedFraction, tau, b, N: int) -> int:
    """Number of q in [0, N-1] with {tau + q alpha} in [0, b)."""
    if N <= 0:
        return 0
    env, f = _env_with(alpha, tau=tau, b=b)
    bb = frac_form(f["b"], env) if compare(f["b"], 1, env) >= 0 else f["b"]
    if sign(bb, env) <= 0:
        return 0
    idx, _ = rotation_indices(alpha, f["tau"], env, N, [LinearForm(), bb])
    return int(np.count_nonzero(idx == 0))


def psi_closed_form(alpha: ContinuedFraction, tau, b, N: int, m: Optional[int] = None) -> int:
    """Psi via the per-residue-class formula for b = {m alpha} (default m = 1, b = alpha).

    The subsequence s_r, s_r+m, ... is a rotation by {m alpha} = b, so each one
    contributes floor(t + (n-1) b) + [t < b] with t = {tau + r alpha}.
    """
    env, f = _env_with(alpha, tau=tau)
    if m is None:
        m = 1
    bform = frac_form(ALPHA * m, env)
    if b is not None:
        env2, fb = _env_with(alpha, b=b)
        env.update(env2)
        if compare(fb["b"], bform, env) != 0:
            raise ValueError("b must equal {m alpha}")
    total = 0
    for r in range(m):
        cnt = (N - 1 - r) // m + 1 if N > r else 0
        if cnt <= 0:
            continue
        t = frac_form(f["tau"] + ALPHA * r, env)
        first = 1 if compare(t, bform, env) < 0 else 0
        total += floor_form(t + bform * (cnt - 1), env) + first
    return total


def psi_b_alpha_tau0(alpha: ContinuedFraction, N: int) -> int:
    """ceil((N-1) alpha) for b = alpha and tau = 0, N >= 2."""
    return -floor_form(-ALPHA * (N - 1), {"alpha": alpha})


def psi_b_alpha(alpha: ContinuedFraction, tau, N: int) -> int:
    """b = alpha: ceil({tau} + (N-1) alpha) if {tau} < alpha else the floor."""
    env, f = _env_with(alpha, tau=tau)
    t = frac_form(f["tau"], env)
    x = t + ALPHA * (N - 1)
    if compare(t, ALPHA, env) < 0:
        return -floor_form(-x, env)
    return floor_form(x, env)


def psi_b_2alpha(alpha: ContinuedFraction, N: int) -> int:
    """b = {2 alpha}, tau = 0, using the case split at alpha = 1/2."""
    env = {"alpha": alpha}
    ceil = lambda x: -floor_form(-x, env)
    if compare(ALPHA, Fraction(1, 2), env) < 0:
        return ceil(ALPHA * 2 * ((N - 1) // 2)) + ceil(ALPHA + ALPHA * 2 * ((N - 2) // 2))
    g = ALPHA * 2 - 1
    return ceil(g * ((N - 1) // 2)) + floor_form(ALPHA + g * ((N - 2) // 2), env)


def which_square(alpha: ContinuedFraction, tau, b, N: int) -> tuple[int, int]:
    """(Psi mod 2, square) for a particle that starts in square 0 of the
    2-square-b surface and meets the vertical edges at heights {tau + q alpha}:
    the square occupied right after the N-th edge hit."""
    parity = psi_count(alpha, tau, b, N) % 2
    return parity, parity


# ---------------------------------------------------------------------------
# the reflection symmetry


def complement(alpha: ContinuedFraction) -> ContinuedFraction:
    """Continued fraction of 1 - alpha for alpha in (0, 1)."""
    a1 = alpha.digit(1)
    depth = alpha.depth
    if a1 >= 2:
        func = lambda i: 1 if i == 1 else (a1 - 1 if i == 2 else alpha.digit(i - 1))
        new_depth = None if depth is None else depth + 1
    else:
        func = lambda i: 1 + alpha.digit(2) if i == 1 else alpha.digit(i + 1)
        new_depth = None if depth is None else depth - 1
    return ContinuedFraction.from_function(func, new_depth)


def symmetry_transform(x, alpha: ContinuedFraction, b) -> tuple[LinearForm, ContinuedFraction, dict]:
    """Start height {b + 1 - x} and slope 1 - alpha of the conjugate geodesic.

    The third value is the environment binding any symbols of the new height.
    """
    env, f = _env_with(alpha, x=x, b=b)
    y = frac_form(f["b"] + 1 - f["x"], env)
    env.pop("alpha")
    return y, complement(alpha), env
