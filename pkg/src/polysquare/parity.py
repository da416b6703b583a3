"""Parity of Phi(alpha; beta''; N) - Phi(alpha; beta'; N) and the block census.

Phi(alpha; beta; N) counts q in [0, N) with {q alpha} in [0, beta).  The digit
formula below combines the Ostrowski digits b_i of N with the alpha-expansion
digits c_i of the two gate ends.  The digits of N are padded with two zeros
before the Delta terms are read off; without the padding the formula misses the
q whose digits agree with those of beta on every index up to the top of N (see
the decision log).  ``mode="literal"`` keeps the unpadded reading for
comparison.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DigitTooSmall, HypothesisViolated, PreconditionViolated
from .flow import rotation_indices
from .numbers import (
    AlphaExpansion,
    ContinuedFraction,
    DigitRule,
    LinearForm,
    OstrowskiRep,
    compare,
    ostrowski_encode,
    sign,
)

PAD = 2


# ---------------------------------------------------------------------------
# counting


def _beta_env(alpha: ContinuedFraction, beta) -> tuple[dict, LinearForm]:
    env: dict = {"alpha": alpha}
    if isinstance(beta, LinearForm):
        return env, beta
    if isinstance(beta, (int, Fraction)):
        return env, LinearForm.const(beta)
    env["__beta"] = beta
    return env, LinearForm.symbol("__beta")


def phi_counts(alpha: ContinuedFraction, beta, N: int) -> np.ndarray:
    """Array whose entry n is Phi(alpha; beta; n) for n = 0..N."""
    env, bf = _beta_env(alpha, beta)
    if sign(bf, env) <= 0 or compare(bf, 1, env) >= 0:
        raise ValueError("beta must lie in (0, 1)")
    out = np.zeros(N + 1, dtype=np.int64)
    if N:
        idx, _ = rotation_indices(alpha, LinearForm(), env, N, [LinearForm(), bf])
        out[1:] = np.cumsum(idx == 0)
    return out


def phi_count(alpha: ContinuedFraction, beta, N: int) -> int:
    if N < 0:
        raise ValueError("N must be non-negative")
    return int(phi_counts(alpha, beta, N)[N])


# ---------------------------------------------------------------------------
# the digit formula


@dataclass(frozen=True)
class ParityInput:
    alpha: ContinuedFraction
    N_digits: OstrowskiRep
    cprime: AlphaExpansion
    cdoubleprime: AlphaExpansion

    @classmethod
    def make(cls, alpha: ContinuedFraction, N: int, cprime: AlphaExpansion, cdoubleprime: AlphaExpansion) -> "ParityInput":
        return cls(alpha, ostrowski_encode(alpha, N), cprime, cdoubleprime)

    def violations(self) -> list[str]:
        out = []
        b = self.N_digits.digits
        for i in range(1, len(b)):
            if b[i] >= self.alpha.digit(i + 1):
                out.append(f"b_{i}={b[i]} is not below a_{i + 1}")
        for name, c in (("c'", self.cprime), ("c''", self.cdoubleprime)):
            for i in range(len(b) + PAD):
                ci = c.digit(i)
                if ci % 2:
                    out.append(f"{name}_{i}={ci} is odd")
                if i % 2 == 0 and ci == 0:
                    out.append(f"{name}_{i} is zero at an even index")
        return out


def _delta(b: Sequence[int], c: Sequence[int], ell: int) -> int:
    """Delta_ell from the digit conditions: compare b and c at ell and at the
    first index below ell where they differ."""
    below = 0
    for i in range(ell - 1, -1, -1):
        if b[i] != c[i]:
            below = 1 if b[i] > c[i] else -1
            break
    if ell % 2 == 0:
        return 1 if b[ell] < c[ell] and below > 0 else 0
    return -1 if c[ell] < b[ell] and below <= 0 else 0


def _delta_partial_sums(b: Sequence[int], c: Sequence[int], q: Sequence[int], ell: int) -> int:
    """Delta_ell straight from the partial sums N_j and C_j."""
    N1 = sum(b[i] * q[i] for i in range(ell))
    N0 = N1 + b[ell] * q[ell]
    C1 = sum(c[i] * q[i] for i in range(ell))
    C0 = C1 + c[ell] * q[ell]
    if ell % 2 == 0:
        return 1 if C1 < N1 <= N0 < C0 else 0
    return -1 if N1 <= C1 <= C0 < N0 else 0


def parity_terms(b: Sequence[int], c1: Sequence[int], c2: Sequence[int], top: int, *, partial_sums: Optional[Sequence[int]] = None) -> int:
    total = sum(min(b[i], c1[i]) + min(b[i], c2[i]) for i in range(top + 1))
    for ell in range(1, top + 1):
        if partial_sums is None:
            total += _delta(b, c1, ell) + _delta(b, c2, ell)
        else:
            total += _delta_partial_sums(b, c1, partial_sums, ell) + _delta_partial_sums(b, c2, partial_sums, ell)
    return total


def parity_formula(inp: ParityInput, *, mode: str = "padded", check: bool = True) -> int:
    """Parity of Phi(beta'') - Phi(beta') from digits alone."""
    if check:
        bad = inp.violations()
        if bad:
            raise PreconditionViolated("; ".join(bad))
    b = list(inp.N_digits.digits)
    if not b:
        return 0
    k = len(b) - 1
    top = k + PAD if mode == "padded" else k
    if mode not in ("padded", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    b = b + [0] * (top - k)
    c1 = [inp.cprime.digit(i) for i in range(top + 1)]
    c2 = [inp.cdoubleprime.digit(i) for i in range(top + 1)]
    return parity_terms(b, c1, c2, top) % 2


def parity_batch(alpha: ContinuedFraction, digits: np.ndarray, c1: Sequence[int], c2: Sequence[int], *, mode: str = "padded") -> np.ndarray:
    """Vectorised formula for rows of Ostrowski digits (zero padded on the right).

    Rows must carry at least PAD trailing zeros beyond their top digit; any
    further zeros do not change the result in padded mode.
    """
    S, width = digits.shape
    if mode == "literal":
        # the literal reading stops at each row's own top digit
        nz = digits != 0
        topk = np.where(nz.any(axis=1), width - 1 - np.argmax(nz[:, ::-1], axis=1), -1)
    total = np.zeros(S, dtype=np.int64)
    for c in (c1, c2):
        rel = np.zeros(S, dtype=np.int64)
        for ell in range(width):
            col = digits[:, ell]
            ce = c[ell]
            m = np.minimum(col, ce)
            if ell >= 1:
                if ell % 2 == 0:
                    d = ((col < ce) & (rel > 0)).astype(np.int64)
                else:
                    d = -((ce < col) & (rel <= 0)).astype(np.int64)
                m = m + d
            if mode == "literal":
                m = np.where(ell <= topk, m, 0)
            total += m
            diff = col != ce
            rel = np.where(diff, np.sign(col - ce), rel)
    return total % 2


def ostrowski_matrix(alpha: ContinuedFraction, Ns: Sequence[int], width: int) -> np.ndarray:
    out = np.zeros((len(Ns), width), dtype=np.int64)
    qs = [alpha.q(i) for i in range(width)]
    for r, N in enumerate(Ns):
        rest = N
        for i in range(width - 1, -1, -1):
            if qs[i] <= rest:
                d, rest = divmod(rest, qs[i])
                out[r, i] = d
    return out


def legal_mask(alpha: ContinuedFraction, digits: np.ndarray) -> np.ndarray:
    """Rows satisfying b_i < a_(i+1) for i >= 1."""
    a = np.array([alpha.digit(i + 1) for i in range(digits.shape[1])], dtype=np.int64)
    return np.all(digits[:, 1:] < a[1:], axis=1)


# ---------------------------------------------------------------------------
# block counting identities


def count_sequences_A(h: int, r: int, s: int, alpha: ContinuedFraction) -> int:
    """Number of (y_h..y_r) with y_h = s, 0 <= y_i <= a_(i+1) and y_(i-1) = 0 whenever y_i = a_(i+1)."""
    if not 0 <= h <= r:
        raise ValueError("need 0 <= h <= r")
    p, q = alpha.p, alpha.q
    sgn = -1 if h % 2 else 1
    if s >= 1:
        return sgn * (q(h) * p(r + 1) - p(h) * q(r + 1))
    return sgn * ((p(h + 1) - p(h)) * q(r + 1) - (q(h + 1) - q(h)) * p(r + 1))


def enumerate_sequences_A(h: int, r: int, s: int, alpha: ContinuedFraction) -> int:
    ranges = [range(alpha.digit(i + 1) + 1) for i in range(h + 1, r + 1)]
    count = 0
    for tail in itertools.product(*ranges):
        ys = (s,) + tail
        ok = True
        for off, y in enumerate(tail, start=1):
            i = h + off
            if y == alpha.digit(i + 1) and ys[off - 1] != 0:
                ok = False
                break
        count += ok
    return count


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True)
class GatePair:
    name: str
    beta_prime: AlphaExpansion
    beta_doubleprime: AlphaExpansion
    rule_prime: DigitRule
    rule_doubleprime: DigitRule
    digit_sum: float

    @property
    def width_rule(self) -> str:
        return f"{self.rule_prime} / {self.rule_doubleprime}"

    def c1(self, width: int) -> list[int]:
        return [self.rule_prime(i) for i in range(width)]

    def c2(self, width: int) -> list[int]:
        return [self.rule_doubleprime(i) for i in range(width)]


def make_gates(
    alpha: ContinuedFraction,
    variant: str = "beta0",
    n: Optional[int] = None,
    *,
    epsilon: Optional[float] = None,
    depth: int = 24,
    strict: bool = False,
) -> GatePair:
    """Gate ends beta' < beta'' with even alpha-expansion digits.

    ``beta0``: c'_i = 2 for all i.  ``beta1``: c'_i = 2 except c'_i = 0 for odd
    i > 2n + 2.  In both c''_i = 4 for even i and 0 for odd i.  The digit sum
    sum 1/a_i over the first ``depth`` digits is reported; with ``strict`` it
    must stay below epsilon / 300.
    """
    digits = alpha.digits(depth + 2) if alpha.depth is None else alpha.digits(min(depth + 2, alpha.depth))
    for i, a in enumerate(digits, start=1):
        if a < 6:
            raise DigitTooSmall(f"a_{i} = {a} < 6: the gate digits would not be legal")
    dsum = float(sum(Fraction(1, a) for a in digits))
    if strict:
        if epsilon is None:
            raise ValueError("strict checking needs epsilon")
        if dsum >= epsilon / 300:
            raise HypothesisViolated(f"sum of 1/a_i = {dsum:.3g} is not below epsilon/300 = {epsilon / 300:.3g}")
    rule2 = DigitRule(even=4, odd=0)
    if variant == "beta0":
        rule1 = DigitRule(even=2, odd=2)
    elif variant == "beta1":
        if n is None or n < 1:
            raise ValueError("beta1 needs n >= 1")
        rule1 = DigitRule(even=2, odd=0, prefix=2 * n + 2, odd_prefix=2)
    else:
        raise ValueError(f"unknown gate variant {variant!r}")
    b1 = AlphaExpansion.from_rule(alpha, rule1, depth)
    b2 = AlphaExpansion.from_rule(alpha, rule2, depth)
    env = {"alpha": alpha, "b1": b1, "b2": b2}
    B1, B2 = LinearForm.symbol("b1"), LinearForm.symbol("b2")
    one_minus_alpha = LinearForm.const(1) - LinearForm.symbol("alpha")
    if not (sign(B1, env) > 0 and compare(B1, B2, env) < 0 and compare(B2, one_minus_alpha, env) < 0):
        raise HypothesisViolated("gate ends are not ordered 0 < beta' < beta'' < 1 - alpha")
    name = variant if variant == "beta0" else f"beta1(n={n})"
    return GatePair(name, b1, b2, rule1, rule2, dsum)


# ---------------------------------------------------------------------------
# census


@dataclass
class CensusResult:
    k: int
    b: int
    lo: int
    hi: int
    evaluated: int
    parity0: int
    rejected: int
    exhaustive: bool
    seed: Optional[int] = None

    @property
    def fraction0(self) -> float:
        return self.parity0 / self.evaluated if self.evaluated else float("nan")

    @property
    def fraction1(self) -> float:
        return 1.0 - self.fraction0

    @property
    def radius(self) -> float:
        """Two-sided 95% normal-approximation radius (0 when exhaustive)."""
        if self.exhaustive or not self.evaluated:
            return 0.0
        p = self.fraction0
        return 1.96 * math.sqrt(max(p * (1 - p), 1.0 / self.evaluated) / self.evaluated)


EXHAUSTIVE_LIMIT = 10**6


def _census_range(alpha, gates: GatePair, lo: int, hi: int, sample: int, rng: Optional[random.Random], mode: str) -> tuple[int, int, int, bool]:
    size = hi - lo
    exhaustive = size <= EXHAUSTIVE_LIMIT and (rng is None or size <= sample)
    if exhaustive:
        Ns = range(lo, hi)
    else:
        Ns = [lo + rng.randrange(size) for _ in range(sample)]
    width = alpha.index_of(max(hi - 1, 1)) + 1 + PAD + 1
    c1, c2 = gates.c1(width), gates.c2(width)
    evaluated = parity0 = rejected = 0
    chunk = 50000
    Ns = list(Ns)
    for s in range(0, len(Ns), chunk):
        part = Ns[s : s + chunk]
        digits = ostrowski_matrix(alpha, part, width)
        ok = legal_mask(alpha, digits)
        rejected += int((~ok).sum())
        par = parity_batch(alpha, digits[ok], c1, c2, mode=mode)
        evaluated += len(par)
        parity0 += int((par == 0).sum())
    return evaluated, parity0, rejected, exhaustive


def block_parity_census(
    alpha: ContinuedFraction,
    gates: GatePair,
    k: int,
    b: int = 0,
    sample: int = 100000,
    *,
    seed: int = 0,
    mode: str = "padded",
) -> CensusResult:
    """Parity-0 fraction over B(k) = [0, q_(k+1)) (b = 0) or B*(k; b) = [b q_(k+1), (b+1) q_(k+1))."""
    q = alpha.q(k + 1)
    if b < 0 or (b and b >= alpha.digit(k + 2)):
        raise ValueError(f"block index b={b} must lie in [0, a_(k+2))")
    lo, hi = b * q, (b + 1) * q
    rng = random.Random(f"{seed}:{k}:{b}")
    ev, p0, rej, exh = _census_range(alpha, gates, lo, hi, sample, rng, mode)
    return CensusResult(k, b, lo, hi, ev, p0, rej, exh, seed)


def prefix_parity_census(alpha: ContinuedFraction, gates: GatePair, Q: int, sample: int = 100000, *, seed: int = 0, mode: str = "padded") -> CensusResult:
    """Parity-0 fraction over [0, Q)."""
    rng = random.Random(f"{seed}:prefix:{Q}")
    ev, p0, rej, exh = _census_range(alpha, gates, 0, Q, sample, rng, mode)
    k = alpha.index_of(max(Q - 1, 1))
    return CensusResult(k, -1, 0, Q, ev, p0, rej, exh, seed)


# ---------------------------------------------------------------------------
# the anti-uniformity experiment


@dataclass
class InequalityRow:
    label: str
    n: int
    k: int
    b: int
    window: str
    side: str
    fraction: float
    radius: float
    threshold: float

    @property
    def holds(self) -> bool:
        return self.fraction > self.threshold


@dataclass
class AntiUniformityReport:
    alpha: str
    epsilon: float
    C: int
    rows: list[InequalityRow] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)

    def by_label(self, label: str) -> list[InequalityRow]:
        return [r for r in self.rows if r.label == label]


def _row(label, n, k, b, window, side, census: CensusResult, threshold) -> InequalityRow:
    frac = census.fraction0 if side == "left" else census.fraction1
    return InequalityRow(label, n, k, b, window, side, frac, census.radius, threshold)


def cumulative_grid(alpha: ContinuedFraction, k: int, points: int = 6) -> list[int]:
    """Horizons Q in [q_(k+1), q_(k+2)) spread over the block structure."""
    qk = alpha.q(k + 1)
    top = alpha.digit(k + 2)
    cands = [qk + qk // 100, 2 * qk, (7 * qk) // 2, 10 * qk, (top // 2) * qk + qk // 3, top * qk + qk // 7]
    out = sorted({min(Q, alpha.q(k + 2) - 1) for Q in cands if Q > qk})
    return out[:points]


def anti_uniformity_experiment(
    alpha: ContinuedFraction,
    epsilon: float = 0.05,
    C: int = 10,
    n_max: int = 2,
    *,
    sample: int = 100000,
    seed: int = 0,
    k_max: int = 6,
    cumulative_points: int = 6,
    mode: str = "padded",
) -> AntiUniformityReport:
    """Left/right occupancy over the time windows of the anti-uniformity statement.

    A window [b T, (b+1) T] with T = (1 + alpha^2)^(1/2) q_(k+1) covers the
    geodesic segments with index N - 1, N in B*(k; b) up to one boundary
    segment; a segment lies in the left square iff the parity is 0.
    """
    if C >= 200 / epsilon:
        raise HypothesisViolated("C must be below 200/epsilon")
    rep = AntiUniformityReport(str(alpha), epsilon, C)
    g0 = make_gates(alpha, "beta0", epsilon=epsilon)
    hi_left = 1 - epsilon

    def cap(k: int) -> int:
        return min(C, alpha.digit(k + 2) - 1)

    for n in range(1, n_max + 1):
        k = 2 * n  # T*_n = L q_(2n+1)
        if k <= k_max:
            for b in range(cap(k) + 1):
                cen = block_parity_census(alpha, g0, k, b, sample, seed=seed, mode=mode)
                if b == 1:
                    rep.rows.append(_row("T1_right", n, k, b, "[T*,2T*]", "right", cen, hi_left))
                else:
                    rep.rows.append(_row("T1_left", n, k, b, f"[{b}T*,{b + 1}T*]", "left", cen, hi_left))
        k = 2 * n - 1  # T**_n = L q_(2n)
        if k <= k_max:
            for b in range(cap(k) + 1):
                cen = block_parity_census(alpha, g0, k, b, sample, seed=seed, mode=mode)
                if b == 2:
                    rep.rows.append(_row("T2_right", n, k, b, "[2T**,3T**]", "right", cen, hi_left))
                else:
                    rep.rows.append(_row("T2_left", n, k, b, f"[{b}T**,{b + 1}T**]", "left", cen, hi_left))
    for n in range(1, n_max + 1):
        g1 = make_gates(alpha, "beta1", n, epsilon=epsilon)
        for i in range(1, n + 1):
            k = 2 * i  # W_i = L q_(2i+1)
            if k > k_max:
                continue
            cen = block_parity_census(alpha, g1, k, 0, sample, seed=seed, mode=mode)
            rep.rows.append(_row("W_left", n, k, 0, f"[0,W_{i}]", "left", cen, hi_left))
            cen = block_parity_census(alpha, g1, k, 1, sample, seed=seed, mode=mode)
            rep.rows.append(_row("W_right", n, k, 1, f"[W_{i},2W_{i}]", "right", cen, hi_left))
        # cumulative occupancy beyond W* = L q_(2n+3)
        for k in range(2 * n + 2, k_max + 1):
            qk = alpha.q(k + 1)
            for Q in cumulative_grid(alpha, k, cumulative_points):
                cen = prefix_parity_census(alpha, g1, Q, sample, seed=seed, mode=mode)
                rep.rows.append(_row("cumulative", n, k, -1, f"[0,{Fraction(Q, qk).limit_denominator(100)}q_{k + 1}L]", "left", cen, 2 / 3 - epsilon))
    return rep


# ---------------------------------------------------------------------------
# the equivalent 2-square start


def gate_surface_start(gates: GatePair):
    """(gate width, start height) of the equivalent 2-square surface: the gate is
    [0, beta'' - beta') and the geodesic starts at distance beta' below the top
    of the left edge of the left square."""
    from .numbers import BoundForm

    env = {"alpha": gates.beta_prime.cf, "b1": gates.beta_prime, "b2": gates.beta_doubleprime}
    width = BoundForm(LinearForm.symbol("b2") - LinearForm.symbol("b1"), env)
    start = BoundForm(LinearForm.const(1) - LinearForm.symbol("b1"), env)
    return width, start


def simulated_parities(alpha: ContinuedFraction, gates: GatePair, N_max: int) -> np.ndarray:
    """Square (0 left, 1 right) of geodesic segment N-1 for N = 1..N_max on the
    2-square-(beta''-beta') surface."""
    from .flow import simulate
    from .surfaces import make_n_square_b

    width, start = gate_surface_start(gates)
    surf = make_n_square_b(2, width)
    stats = simulate(surf, alpha, (0, start), N_max, record=True)
    return stats.squares[:N_max]
