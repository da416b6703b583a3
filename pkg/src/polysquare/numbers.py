"""Continued fractions, certified intervals, numeration systems and distance theorems.

Irrational slopes live only as digit streams.  Every derived real is either a
``LinearForm`` over named symbols (``"1"``, ``"alpha"``, gate parameters) or a
``RealInterval`` of exact rationals that is refined on demand.  Comparisons
double the working precision until the sign is certain and give up with
``PrecisionExhausted`` at the cap instead of guessing.
"""
from __future__ import annotations

import contextlib
import contextvars
import math
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Protocol, Sequence, Union

from .errors import (
    DepthExhausted,
    DigitBoundViolated,
    HypothesisViolated,
    IllegalDigits,
    OutOfRange,
    PrecisionExhausted,
)

Rational = Union[int, Fraction]

START_BITS = 64
_cap_bits: contextvars.ContextVar[int] = contextvars.ContextVar("cap_bits", default=4096)


def precision_cap() -> int:
    return _cap_bits.get()


@contextlib.contextmanager
def precision_limit(bits: int):
    """Temporarily change the maximal working precision (in bits)."""
    token = _cap_bits.set(int(bits))
    try:
        yield
    finally:
        _cap_bits.reset(token)


def _bit_schedule(start: int = START_BITS) -> Iterator[int]:
    bits = start
    cap = precision_cap()
    while True:
        yield min(bits, cap)
        if bits >= cap:
            return
        bits *= 2


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class RealInterval:
    """Closed interval [lo, hi] with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: Rational) -> "RealInterval":
        x = Fraction(x)
        return cls(x, x)

    @classmethod
    def hull(cls, a: Rational, b: Rational) -> "RealInterval":
        a, b = Fraction(a), Fraction(b)
        return cls(min(a, b), max(a, b))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __add__(self, other):
        if isinstance(other, RealInterval):
            return RealInterval(self.lo + other.lo, self.hi + other.hi)
        other = Fraction(other)
        return RealInterval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self):
        return RealInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RealInterval):
            ps = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
            return RealInterval(min(ps), max(ps))
        other = Fraction(other)
        return RealInterval.hull(self.lo * other, self.hi * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, RealInterval):
            if other.lo <= 0 <= other.hi:
                raise ZeroDivisionError("interval divisor contains zero")
            return self * RealInterval.hull(1 / other.lo, 1 / other.hi)
        return self * (1 / Fraction(other))

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def intersect(self, other: "RealInterval") -> "RealInterval":
        return RealInterval(max(self.lo, other.lo), min(self.hi, other.hi))

    def sign(self) -> Optional[int]:
        """-1, 0 or 1 when certain, otherwise ``None``."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        if self.lo == self.hi == 0:
            return 0
        return None

    def floor(self) -> Optional[int]:
        a, b = math.floor(self.lo), math.floor(self.hi)
        return a if a == b else None

    def __float__(self) -> float:
        return float(self.mid)

    def __repr__(self) -> str:
        return f"RealInterval({float(self.lo):.17g}, {float(self.hi):.17g})"


class Real(Protocol):
    """Anything that can produce a certified enclosure at a requested precision."""

    def interval(self, bits: int) -> RealInterval: ...


@dataclass(frozen=True)
class Exact:
    value: Fraction

    def __init__(self, value):
        if isinstance(value, float):
            value = Fraction(value)
        object.__setattr__(self, "value", Fraction(value))

    def interval(self, bits: int) -> RealInterval:
        return RealInterval.point(self.value)

    def __str__(self) -> str:
        return str(self.value)


# ---------------------------------------------------------------------------
# continued fractions


class ContinuedFraction:
    """Slope alpha = a0 + [a1, a2, ...] given as a digit stream.

    The stream is an explicit finite prefix, an eventually periodic pattern or a
    callable ``i -> a_i`` with an optional declared depth.  Convergents are
    memoised behind a lock, so instances can be shared between threads.
    """

    def __init__(
        self,
        digits: Sequence[int] = (),
        period: Sequence[int] = (),
        a0: int = 0,
        *,
        func: Optional[Callable[[int], int]] = None,
        depth: Optional[int] = None,
    ):
        self._pre = tuple(int(d) for d in digits)
        self._period = tuple(int(d) for d in period)
        self._func = func
        self.a0 = int(a0)
        if func is not None:
            self.depth = depth
        elif self._period:
            self.depth = None
        else:
            self.depth = len(self._pre)
        for d in self._pre + self._period:
            if d < 1:
                raise IllegalDigits(f"continued fraction digits must be >= 1, got {d}")
        if func is None and not self._pre and not self._period:
            raise ValueError("empty continued fraction")
        self._lock = threading.Lock()
        # p[k+1], q[k+1] stored at list index k+1 so that index 0 holds k=-1
        self._p = [1, self.a0]
        self._q = [0, 1]
        self._interval_cache: dict[int, RealInterval] = {}

    # -- construction helpers
    @classmethod
    def constant(cls, a: int) -> "ContinuedFraction":
        return cls((), (a,))

    @classmethod
    def periodic(cls, pre: Sequence[int], period: Sequence[int], a0: int = 0) -> "ContinuedFraction":
        return cls(pre, period, a0)

    @classmethod
    def from_function(cls, func: Callable[[int], int], depth: Optional[int] = None) -> "ContinuedFraction":
        return cls(func=func, depth=depth)

    @classmethod
    def quadratic(cls, a: int, b: int, d: int, c: int = 1) -> "ContinuedFraction":
        """Expansion of (a + b*sqrt(d))/c for a non-square d > 0 and b != 0."""
        if d <= 0 or math.isqrt(d) ** 2 == d or b == 0 or c == 0:
            raise ValueError("not a quadratic irrational")
        if b < 0:
            a, b, c = -a, -b, -c
        # rewrite as (P + sqrt(D)) / Q with Q | D - P^2
        P, D, Q = a * abs(c), b * b * d * c * c, c * abs(c)
        s = math.isqrt(D)
        terms: list[int] = []
        seen: dict[tuple[int, int], int] = {}
        while (P, Q) not in seen:
            seen[(P, Q)] = len(terms)
            if Q > 0:
                t = (P + s) // Q
            else:
                t = -((P + s) // (-Q)) - 1
            terms.append(t)
            P = t * Q - P
            Q = (D - P * P) // Q
        start = seen[(P, Q)]
        a0 = terms[0]
        if start == 0:
            # purely periodic including a0: a0 reappears inside the period
            pre: list[int] = []
            period = terms[1:] + [terms[0]]
        else:
            pre = terms[1:start]
            period = terms[start:]
        return cls(pre, period, a0)

    @classmethod
    def parse(cls, spec: str) -> "ContinuedFraction":
        """Parse ``[a1,a2,...]``, ``[pre;(period)]``, ``const:a`` or ``quad:a,b,d[,c]``.

        An optional ``+a0`` suffix sets the integer part.  ``golden`` and
        ``silver`` are accepted as names for const:1 and const:2.
        """
        text = spec.strip().replace(" ", "")
        a0 = 0
        m = re.fullmatch(r"(.*?)\+(-?\d+)", text)
        if m and not text.startswith("quad:"):
            text, a0 = m.group(1), int(m.group(2))
        named = {"golden": "const:1", "silver": "const:2"}
        text = named.get(text, text)
        if text.startswith("const:"):
            return cls((), (int(text[6:]),), a0)
        if text.startswith("quad:"):
            parts = [int(x) for x in text[5:].split(",")]
            return cls.quadratic(*parts)
        m = re.fullmatch(r"\[([\d,]*)(?:;\(([\d,]+)\))?\]", text)
        if not m:
            raise ValueError(f"cannot parse continued fraction spec {spec!r}")
        pre = [int(x) for x in m.group(1).split(",") if x]
        period = [int(x) for x in m.group(2).split(",")] if m.group(2) else []
        return cls(pre, period, a0)

    def __str__(self) -> str:
        if self._func is not None:
            body = f"<function depth={self.depth}>"
        elif self._period and not self._pre and len(self._period) == 1:
            body = f"const:{self._period[0]}"
        elif self._period:
            body = "[" + ",".join(map(str, self._pre)) + ";(" + ",".join(map(str, self._period)) + ")]"
        else:
            body = "[" + ",".join(map(str, self._pre)) + "]"
        return body + (f"+{self.a0}" if self.a0 else "")

    def __repr__(self) -> str:
        return f"ContinuedFraction({self})"

    # -- digits and convergents
    def digit(self, i: int) -> int:
        """a_i for i >= 1 (a_0 is the integer part)."""
        if i == 0:
            return self.a0
        if i < 0:
            raise IndexError(i)
        if self.depth is not None and i > self.depth:
            raise DepthExhausted(f"digit a_{i} requested but only {self.depth} digits available")
        if self._func is not None:
            d = int(self._func(i))
            if d < 1:
                raise IllegalDigits(f"digit a_{i} = {d} < 1")
            return d
        if i <= len(self._pre):
            return self._pre[i - 1]
        j = (i - len(self._pre) - 1) % len(self._period)
        return self._period[j]

    def digits(self, n: int) -> list[int]:
        return [self.digit(i) for i in range(1, n + 1)]

    def _extend(self, k: int) -> None:
        if len(self._q) > k + 1:
            return
        with self._lock:
            while len(self._q) <= k + 1:
                j = len(self._q) - 1  # next convergent index
                a = self.digit(j)
                self._p.append(a * self._p[-1] + self._p[-2])
                self._q.append(a * self._q[-1] + self._q[-2])

    def p(self, k: int) -> int:
        if k < -1:
            raise IndexError(k)
        self._extend(k)
        return self._p[k + 1]

    def q(self, k: int) -> int:
        if k < -1:
            raise IndexError(k)
        self._extend(k)
        return self._q[k + 1]

    def index_of(self, N: int) -> int:
        """Largest k >= 0 with q_k <= N (N >= 1)."""
        if N < 1:
            raise ValueError("N must be positive")
        k = 0
        while self.q(k + 1) <= N:
            k += 1
        return k

    # -- enclosures
    def interval(self, bits: int) -> RealInterval:
        """Certified enclosure of alpha of width at most 2**-bits (when depth allows)."""
        hit = self._interval_cache.get(bits)
        if hit is not None:
            return hit
        target = 1 << bits
        k = 1
        while True:
            try:
                qk, qk1 = self.q(k), self.q(k - 1)
            except DepthExhausted:
                raise DepthExhausted(f"{self} cannot reach {bits} bits of precision") from None
            if qk * (qk + qk1) >= target:
                break
            k += 1
        pk, pk1 = self.p(k), self.p(k - 1)
        iv = RealInterval.hull(Fraction(pk, qk), Fraction(pk + pk1, qk + qk1))
        if len(self._interval_cache) < 64:
            self._interval_cache[bits] = iv
        return iv

    def __float__(self) -> float:
        return float(self.interval(80).mid)

    def eta(self, k: int, bits: int = START_BITS) -> RealInterval:
        """Enclosure of eta_k = q_k alpha - p_k, with relative width about 2**-bits."""
        if k == -1:
            return RealInterval.point(-1)
        qk, pk = self.q(k), self.p(k)
        extra = 2 * self.q(k + 1).bit_length() + 2
        iv = self.interval(bits + extra) * qk - pk
        # sign is exactly (-1)^k
        if k % 2 == 0:
            iv = RealInterval(max(iv.lo, Fraction(0)), iv.hi)
        else:
            iv = RealInterval(iv.lo, min(iv.hi, Fraction(0)))
        return iv

    def eta_form(self, k: int) -> "LinearForm":
        return LinearForm({"alpha": self.q(k), "1": -self.p(k)})


# ---------------------------------------------------------------------------
# linear forms over named symbols


Env = Mapping[str, Real]


_TERM = re.compile(
    r"(?P<sign>[+-])(?:(?P<c>\d+(?:\.\d+)?(?:/\d+)?)\*?)?(?P<s>[A-Za-z_]\w*)?(?:/(?P<d>\d+))?"
)


class LinearForm:
    """Exact rational combination of symbols; the symbol ``"1"`` is the constant."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Union[Mapping[str, Rational], Iterable[tuple[str, Rational]], None] = None):
        acc: dict[str, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        for name, c in items:
            c = Fraction(c)
            if c:
                acc[name] = acc.get(name, Fraction(0)) + c
        self._terms = tuple(sorted((k, v) for k, v in acc.items() if v))
        self._hash = hash(self._terms)

    @classmethod
    def const(cls, c: Rational) -> "LinearForm":
        return cls({"1": c})

    @classmethod
    def symbol(cls, name: str, coef: Rational = 1) -> "LinearForm":
        return cls({name: coef})

    @staticmethod
    def lift(x) -> "LinearForm":
        if isinstance(x, LinearForm):
            return x
        if isinstance(x, (int, Fraction)):
            return LinearForm.const(x)
        raise TypeError(f"cannot convert {type(x).__name__} to LinearForm")

    @classmethod
    def parse(cls, text: str) -> "LinearForm":
        """Inverse of ``str``: terms like ``3/10``, ``2*alpha``, ``alpha/4``, ``0.25*b``."""
        body = text.replace(" ", "")
        if not body:
            raise ValueError("empty linear form")
        if body[0] not in "+-":
            body = "+" + body
        out = cls()
        pos = 0
        for m in _TERM.finditer(body):
            if m.start() != pos or not (m.group("c") or m.group("s")):
                raise ValueError(f"cannot parse linear form {text!r}")
            pos = m.end()
            c = Fraction(m.group("c") or 1)
            if m.group("d"):
                c /= int(m.group("d"))
            if m.group("sign") == "-":
                c = -c
            out = out + cls.symbol(m.group("s") or "1", c)
        if pos != len(body):
            raise ValueError(f"cannot parse linear form {text!r}")
        return out

    @property
    def terms(self) -> dict[str, Fraction]:
        return dict(self._terms)

    def coef(self, name: str) -> Fraction:
        for k, v in self._terms:
            if k == name:
                return v
        return Fraction(0)

    def symbols(self) -> set[str]:
        return {k for k, _ in self._terms if k != "1"}

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_constant(self) -> bool:
        return not self.symbols()

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = LinearForm.const(other)
        return isinstance(other, LinearForm) and self._terms == other._terms

    def __hash__(self) -> int:
        return self._hash

    def __add__(self, other) -> "LinearForm":
        other = LinearForm.lift(other)
        return LinearForm(list(self._terms) + list(other._terms))

    __radd__ = __add__

    def __neg__(self) -> "LinearForm":
        return LinearForm((k, -v) for k, v in self._terms)

    def __sub__(self, other) -> "LinearForm":
        return self + (-LinearForm.lift(other))

    def __rsub__(self, other) -> "LinearForm":
        return LinearForm.lift(other) - self

    def __mul__(self, c) -> "LinearForm":
        c = Fraction(c)
        return LinearForm((k, v * c) for k, v in self._terms)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "LinearForm":
        return self * (1 / Fraction(c))

    def substitute(self, mapping: Mapping[str, "LinearForm"]) -> "LinearForm":
        out = LinearForm()
        for k, v in self._terms:
            out = out + (mapping[k] * v if k in mapping else LinearForm.symbol(k, v))
        return out

    def interval(self, env: Env, bits: int) -> RealInterval:
        total = RealInterval.point(0)
        for k, v in self._terms:
            if k == "1":
                total = total + v
            else:
                if k not in env:
                    raise KeyError(f"no value bound for symbol {k!r}")
                scale = abs(v.numerator).bit_length() + 2
                total = total + env[k].interval(bits + scale) * v
        return total

    def __repr__(self) -> str:
        return f"LinearForm({self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        order = sorted(self._terms, key=lambda kv: (kv[0] != "1", kv[0] != "alpha", kv[0]))
        out = ""
        for i, (k, v) in enumerate(order):
            neg = v < 0
            a = -v if neg else v
            if k == "1":
                piece = str(a)
            elif a == 1:
                piece = k
            elif a.denominator == 1:
                piece = f"{a}*{k}"
            else:
                piece = f"{a.numerator}/{a.denominator}*{k}" if a.numerator != 1 else f"{k}/{a.denominator}"
            if i == 0:
                out = ("-" if neg else "") + piece
            else:
                out += (" - " if neg else " + ") + piece
        return out


@dataclass(frozen=True)
class BoundForm:
    """A linear form together with the environment that gives it a value."""

    form: LinearForm
    env: Env = field(compare=False, hash=False)

    def interval(self, bits: int) -> RealInterval:
        return self.form.interval(self.env, bits)


def sign(x, env: Env) -> int:
    """Certified sign of a real given as LinearForm (or rational)."""
    x = LinearForm.lift(x)
    if x.is_zero:
        return 0
    if x.is_constant:
        c = x.coef("1")
        return (c > 0) - (c < 0)
    last = None
    for bits in _bit_schedule():
        iv = x.interval(env, bits)
        s = iv.sign()
        if s is not None:
            return s
        last = iv
    raise PrecisionExhausted(f"cannot decide the sign of {x}", detail=(str(x), last))


def compare(x, y, env: Env) -> int:
    return sign(LinearForm.lift(x) - LinearForm.lift(y), env)


def floor_form(x, env: Env) -> int:
    x = LinearForm.lift(x)
    if x.is_constant:
        return math.floor(x.coef("1"))
    last = None
    for bits in _bit_schedule():
        iv = x.interval(env, bits)
        f = iv.floor()
        if f is not None:
            # guard against an exact integer hiding at the upper end
            if iv.hi != f + 1:
                return f
        last = iv
    # the value may be an exact integer: check symbolically via the sign test
    guess = math.floor(last.mid) if last is not None else 0
    for cand in (guess, guess + 1):
        if sign(x - cand, env) >= 0 and sign(x - cand - 1, env) < 0:
            return cand
    raise PrecisionExhausted(f"cannot decide the floor of {x}", detail=str(x))


def frac_form(x, env: Env) -> LinearForm:
    """The fractional part {x} as an exact linear form."""
    x = LinearForm.lift(x)
    return x - floor_form(x, env)


def real_interval(x, env: Env, bits: int = START_BITS) -> RealInterval:
    return LinearForm.lift(x).interval(env, bits)


def alpha_env(cf: ContinuedFraction, **params: Real) -> dict[str, Real]:
    env: dict[str, Real] = {"alpha": cf}
    env.update(params)
    return env


ALPHA = LinearForm.symbol("alpha")
ONE = LinearForm.const(1)


# ---------------------------------------------------------------------------
# convergents and fractional parts


def convergents(cf: ContinuedFraction, k: int, bits: int = START_BITS) -> tuple[int, int, RealInterval]:
    """Return (p_k, q_k, eta_k) with eta_k enclosed to relative precision 2**-bits."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return cf.p(k), cf.q(k), cf.eta(k, bits)


def fractional_part(cf: ContinuedFraction, q: int, bits: int = START_BITS) -> RealInterval:
    """Certified enclosure of {q alpha}."""
    if q == 0:
        return RealInterval.point(0)
    env = alpha_env(cf)
    f = frac_form(ALPHA * q, env)
    return f.interval(env, bits + abs(q).bit_length())


class FixedAlpha:
    """alpha as an integer A with |A/2**bits - alpha| < 2**-bits (certified)."""

    def __init__(self, cf: ContinuedFraction, bits: int):
        iv = cf.interval(bits + 4)
        scale = 1 << bits
        self.bits = bits
        self.scale = scale
        self.value = round(iv.mid * scale)
        # |value/scale - alpha| <= |value/scale - mid| + width < 2**-bits
        assert abs(Fraction(self.value, scale) - iv.mid) + iv.width < Fraction(1, scale)

    def frac(self, q: int) -> int:
        """{q alpha} scaled by 2**bits, accurate to within |q| + 1 units."""
        return (q * self.value) % self.scale


def sort_by_rotation(cf: ContinuedFraction, qs: Sequence[int]) -> list[int]:
    """Indices q sorted by {q alpha} in [0,1), certified against rounding."""
    qs = list(qs)
    if len(set(qs)) != len(qs):
        raise ValueError("indices must be distinct")
    if len(qs) < 2:
        return qs
    qmax = max(abs(q) for q in qs) + 1
    bits = 2 * qmax.bit_length() + 24
    while True:
        fa = FixedAlpha(cf, bits)
        err = qmax + 1
        keyed = sorted((fa.frac(q), q) for q in qs)
        ok = all(b[0] - a[0] > 2 * err for a, b in zip(keyed, keyed[1:]))
        # points within err of 0 must be q=0 itself or they could wrap around
        ok = ok and all(q == 0 or err < y < fa.scale - err for y, q in keyed)
        if ok:
            return [q for _, q in keyed]
        if bits >= precision_cap():
            raise PrecisionExhausted("rotation points too close to sort")
        bits *= 2


# ---------------------------------------------------------------------------
# Ostrowski numeration


@dataclass(frozen=True)
class OstrowskiRep:
    value: int
    digits: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.digits) - 1

    def padded(self, length: int) -> tuple[int, ...]:
        return self.digits + (0,) * max(0, length - len(self.digits))


def ostrowski_violations(cf: ContinuedFraction, digits: Sequence[int], *, strict_top: bool = True) -> list[str]:
    """Reasons why ``digits`` is not a legal representation (empty when legal)."""
    out = []
    digits = list(digits)
    if not digits:
        return out
    if digits[0] < 0 or digits[0] >= cf.digit(1):
        out.append(f"b_0={digits[0]} outside [0, a_1)")
    for i in range(1, len(digits)):
        a = cf.digit(i + 1)
        if not 0 <= digits[i] <= a:
            out.append(f"b_{i}={digits[i]} outside [0, a_{i + 1}={a}]")
        if digits[i] == a and digits[i - 1] != 0:
            out.append(f"b_{i}=a_{i + 1} but b_{i - 1}={digits[i - 1]} != 0")
    if strict_top and digits[-1] == 0:
        out.append("leading digit is zero")
    return out


def ostrowski_encode(cf: ContinuedFraction, N: int) -> OstrowskiRep:
    if N < 0:
        raise ValueError("N must be non-negative")
    if N == 0:
        return OstrowskiRep(0, ())
    k = cf.index_of(N)
    rest = N
    digits = [0] * (k + 1)
    for i in range(k, -1, -1):
        digits[i], rest = divmod(rest, cf.q(i))
    # greedy from the top is already legal; this pass only guards the invariant
    bad = ostrowski_violations(cf, digits)
    if bad or rest:
        raise AssertionError(f"greedy Ostrowski encoding of {N} is illegal: {bad}")
    return OstrowskiRep(N, tuple(digits))


def ostrowski_decode(cf: ContinuedFraction, rep: Union[OstrowskiRep, Sequence[int]]) -> int:
    digits = rep.digits if isinstance(rep, OstrowskiRep) else tuple(rep)
    # trailing zeros are tolerated as padding
    trimmed = list(digits)
    while trimmed and trimmed[-1] == 0:
        trimmed.pop()
    bad = ostrowski_violations(cf, trimmed)
    if bad:
        raise IllegalDigits("; ".join(bad))
    return sum(b * cf.q(i) for i, b in enumerate(trimmed))


# ---------------------------------------------------------------------------
# alpha-expansions


@dataclass(frozen=True)
class DigitRule:
    """Digits c_i = even for even i, odd for odd i; odd indices below ``prefix`` use ``odd_prefix``."""

    even: int
    odd: int
    prefix: int = 0
    odd_prefix: int = 0

    def __call__(self, i: int) -> int:
        if i % 2 == 0:
            return self.even
        return self.odd_prefix if i < self.prefix else self.odd

    def __str__(self) -> str:
        s = f"even={self.even},odd={self.odd}"
        if self.prefix:
            s += f",odd<{self.prefix}={self.odd_prefix}"
        return s


class AlphaExpansion:
    """beta = sum_i c_i eta_i, stored as a digit prefix with a certified tail enclosure.

    Expansions built from a digit rule refine themselves indefinitely; those built
    from an interval source delegate refinement to the source.
    """

    def __init__(
        self,
        cf: ContinuedFraction,
        digits: Sequence[int],
        tail_bound: Optional[RealInterval] = None,
        *,
        rule: Optional[Callable[[int], int]] = None,
        source: Optional[Real] = None,
    ):
        self.cf = cf
        self.rule = rule
        self.source = source
        self._digits = list(int(c) for c in digits)
        bad = alpha_digit_violations(cf, self._digits)
        if bad:
            raise IllegalDigits("; ".join(bad))
        K = len(self._digits) - 1
        legal_tail = RealInterval(Fraction(-1, cf.q(K + 1)), Fraction(1, cf.q(K + 1)))
        self.tail_bound = legal_tail if tail_bound is None else tail_bound.intersect(legal_tail)
        self._lock = threading.Lock()

    @classmethod
    def from_rule(cls, cf: ContinuedFraction, rule: Callable[[int], int], depth: int = 24) -> "AlphaExpansion":
        return cls(cf, [rule(i) for i in range(depth + 1)], rule=rule)

    @property
    def digits(self) -> tuple[int, ...]:
        return tuple(self._digits)

    @property
    def K(self) -> int:
        return len(self._digits) - 1

    def digit(self, i: int) -> int:
        if i < len(self._digits):
            return self._digits[i]
        if self.rule is not None:
            return int(self.rule(i))
        raise DepthExhausted(f"alpha-expansion digit c_{i} not stored")

    def _ensure(self, depth: int) -> None:
        if self.rule is None or depth < len(self._digits):
            return
        with self._lock:
            while len(self._digits) <= depth:
                i = len(self._digits)
                c = int(self.rule(i))
                self._digits.append(c)
                bad = alpha_digit_violations(self.cf, self._digits[-2:], offset=i - 1) if i else []
                if bad:
                    self._digits.pop()
                    raise IllegalDigits("; ".join(bad))

    def prefix_form(self, K: Optional[int] = None) -> LinearForm:
        """sum_{i<=K} c_i eta_i as an exact form in alpha."""
        K = self.K if K is None else K
        self._ensure(K)
        Q = sum(self.digit(i) * self.cf.q(i) for i in range(K + 1))
        P = sum(self.digit(i) * self.cf.p(i) for i in range(K + 1))
        return LinearForm({"alpha": Q, "1": -P})

    def interval(self, bits: int) -> RealInterval:
        if self.source is not None:
            own = self._fixed_interval(bits)
            return self.source.interval(bits).intersect(own)
        if self.rule is None:
            return self._fixed_interval(bits)
        K = 1
        while self.cf.q(K + 1) < (1 << (bits + 1)):
            K += 1
        self._ensure(K)
        base = self._prefix_interval(K, bits + 1)
        tail = Fraction(1, self.cf.q(K + 1))
        return RealInterval(base.lo - tail, base.hi + tail)

    def _prefix_interval(self, K: int, bits: int) -> RealInterval:
        form = self.prefix_form(K)
        return form.interval({"alpha": self.cf}, bits)

    def _fixed_interval(self, bits: int) -> RealInterval:
        base = self._prefix_interval(self.K, bits)
        return base + self.tail_bound

    def __float__(self) -> float:
        return float(self.interval(60).mid)

    @property
    def leading_index(self) -> Optional[int]:
        for i, c in enumerate(self._digits):
            if c:
                return i
        return None

    def in_gap(self) -> bool:
        """True iff beta lies in (0, 1 - alpha), decided by the first non-zero digit."""
        i = self.leading_index
        if i is None and self.rule is not None:
            i = next((j for j in range(len(self._digits), len(self._digits) + 64) if self.rule(j)), None)
        return i is not None and i % 2 == 0

    def __repr__(self) -> str:
        head = ",".join(map(str, self._digits[:8]))
        more = ",..." if len(self._digits) > 8 or self.rule is not None else ""
        return f"AlphaExpansion([{head}{more}])"


def alpha_digit_violations(cf: ContinuedFraction, digits: Sequence[int], offset: int = 0) -> list[str]:
    out = []
    for j, c in enumerate(digits):
        i = j + offset
        a = cf.digit(i + 1)
        if i == 0 and not 0 <= c < a:
            out.append(f"c_0={c} outside [0, a_1={a})")
        elif i > 0 and not 0 <= c <= a:
            out.append(f"c_{i}={c} outside [0, a_{i + 1}={a}]")
        if j > 0 and c == a and digits[j - 1] != 0:
            out.append(f"c_{i}=a_{i + 1} but c_{i - 1}={digits[j - 1]} != 0")
    return out


def _ceil_interval(iv: RealInterval) -> Optional[int]:
    a, b = math.ceil(iv.lo), math.ceil(iv.hi)
    return a if a == b else None


def alpha_expand(cf: ContinuedFraction, beta, depth: int = 24) -> AlphaExpansion:
    """alpha-expansion of beta in (-alpha, 1-alpha).

    ``beta`` may be a digit rule (callable on indices), a rational, a
    ``LinearForm`` in alpha, or any ``Real`` source.  Digits are extracted
    greedily: c_s is the least admissible digit leaving a remainder inside the
    range of legal tails starting at s+1.
    """
    if callable(beta) and not hasattr(beta, "interval"):
        return AlphaExpansion.from_rule(cf, beta, depth)
    if isinstance(beta, (int, Fraction, float)):
        beta = Exact(beta)
    elif isinstance(beta, LinearForm):
        beta = BoundForm(beta, {"alpha": cf})

    env = {"alpha": cf, "__beta": beta}
    bf = LinearForm.symbol("__beta")
    if sign(bf + ALPHA, env) <= 0 or sign(ONE - ALPHA - bf, env) <= 0:
        raise OutOfRange("beta is not inside (-alpha, 1-alpha)")

    need = 2 * cf.q(depth + 2).bit_length() + 16
    for bits in _bit_schedule(max(START_BITS, need)):
        digits = _greedy_digits(cf, beta, depth, bits)
        if digits is not None:
            prefix = AlphaExpansion(cf, digits, source=beta).prefix_form()
            tail = beta.interval(bits) - prefix.interval(env, bits + 8)
            return AlphaExpansion(cf, digits, tail, source=beta)
    raise PrecisionExhausted("beta is too close to an expansion boundary to fix its digits")


def _greedy_digits(cf: ContinuedFraction, src: Real, depth: int, bits: int) -> Optional[list[int]]:
    alpha = cf.interval(bits)
    R = src.interval(bits)

    def eta_abs(k: int) -> RealInterval:
        iv = alpha * cf.q(k) - cf.p(k)
        return iv if k % 2 == 0 else -iv

    digits: list[int] = []
    for s in range(depth + 1):
        e_s = eta_abs(s)
        e_next = eta_abs(s + 1)
        if e_s.lo <= 0:
            return None
        if s % 2 == 0:
            c = _ceil_interval((R - e_next) / e_s)
        else:
            c = _ceil_interval((-e_next - R) / e_s)
        if c is None:
            return None
        c = max(c, 0)
        digits.append(c)
        sgn = 1 if s % 2 == 0 else -1
        R = R - e_s * (c * sgn)
    return digits


# ---------------------------------------------------------------------------
# distance theorems


@dataclass(frozen=True)
class ThreeDistanceReport:
    N: int
    k: int
    mu: int
    r: int
    gap_forms: tuple[LinearForm, ...]
    gaps: tuple[RealInterval, ...]
    multiplicities: tuple[int, ...]

    @property
    def decomposition(self) -> tuple[int, int, int]:
        return self.k, self.mu, self.r


def _abs_eta_form(cf: ContinuedFraction, k: int) -> LinearForm:
    if k == -1:
        return ONE
    f = cf.eta_form(k)
    return f if k % 2 == 0 else -f


def three_distance(cf: ContinuedFraction, N: int, bits: int = START_BITS) -> ThreeDistanceReport:
    """Gap lengths and multiplicities of the partition of [0,1) by {q alpha}, 0 <= q <= N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    k = 0
    while not (cf.q(k) + cf.q(k - 1) <= N < cf.q(k + 1) + cf.q(k)):
        k += 1
    qk, qk1 = cf.q(k), cf.q(k - 1)
    mu, r = divmod(N - qk1, qk)
    e_k, e_k1 = _abs_eta_form(cf, k), _abs_eta_form(cf, k - 1)
    forms = [e_k, e_k1 - e_k * mu, e_k1 - e_k * (mu - 1)]
    mults = [N + 1 - qk, r + 1, qk - r - 1]
    keep = [i for i in range(3) if mults[i] > 0]
    forms = [forms[i] for i in keep]
    mults = [mults[i] for i in keep]
    env = alpha_env(cf)
    gaps = tuple(f.interval(env, bits + N.bit_length()) for f in forms)
    return ThreeDistanceReport(N, k, mu, r, tuple(forms), gaps, tuple(mults))


@dataclass(frozen=True)
class TwoDistancePartition:
    k: int
    order: tuple[int, ...]  # indices q in increasing order of {q alpha}
    gap_class: tuple[str, ...]  # class of the gap after each point ("short" / "long")
    left_of_zero: int
    right_of_zero: int


def _neighbour_steps(cf: ContinuedFraction, k: int) -> tuple[int, int]:
    s = 1 if k % 2 == 0 else -1
    return s * cf.q(k), s * (cf.q(k) - cf.q(k + 1))


def two_distance_partition(cf: ContinuedFraction, k: int) -> TwoDistancePartition:
    """The partition A_k by {q alpha}, -1 <= q <= q_{k+1} - 2, in circular order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    Q = cf.q(k + 1)
    order = sort_by_rotation(cf, range(-1, Q - 1))
    short, long_ = _neighbour_steps(cf, k)
    classes = []
    for a, b in zip(order, order[1:] + order[:1]):
        d = b - a
        if d == short:
            classes.append("short")
        elif d == long_:
            classes.append("long")
        else:
            raise AssertionError(f"unexpected step {d} between partition points")
    z = order.index(0)
    return TwoDistancePartition(k, tuple(order), tuple(classes), order[z - 1], order[(z + 1) % len(order)])


def rotation_neighbours(cf: ContinuedFraction, y: Real, k: int, *, expansion: Optional[AlphaExpansion] = None):
    """Neighbours of a point y in [0,1) among {j alpha}, 0 <= j < q_{k+1}.

    Returns (j_below, j_above).  Uses the alpha-expansion of y: the truncation
    j = sum_{i<=k} c_i q_i is one neighbour and the sign of the tail picks the side.
    """
    Q = cf.q(k + 1)
    env = {"alpha": cf, "__y": y}
    yf = LinearForm.symbol("__y")
    if expansion is None:
        shifted = yf if sign(yf - (ONE - ALPHA), env) < 0 else yf - 1
        expansion = alpha_expand(cf, BoundForm(shifted, env), depth=k + 2)
        base = shifted
    else:
        base = yf if sign(yf - (ONE - ALPHA), env) < 0 else yf - 1
    j = sum(expansion.digit(i) * cf.q(i) for i in range(k + 1))
    if not 0 <= j < Q:
        raise AssertionError("truncated expansion left the index range")
    tail = base - expansion.prefix_form(k)
    side = sign(tail, env)
    if side == 0:
        raise HypothesisViolated("point coincides with a rotation point")
    short, long_ = _neighbour_steps(cf, k)

    def step(jj: int, direction: int) -> int:
        for d in (short, long_):
            t = jj + direction * d
            if 0 <= t < Q:
                return t
        raise AssertionError("no neighbour in range")

    return (j, step(j, 1)) if side > 0 else (step(j, -1), j)


# ---------------------------------------------------------------------------
# diophantine diagnostics


@dataclass(frozen=True)
class BadApproxReport:
    A: int
    n_max: int
    ok: bool
    min_value: float  # min over n of n * ||n alpha||
    witness: int
    failures: tuple[int, ...]


def badly_approximable_check(cf: ContinuedFraction, A: int, n_max: int) -> BadApproxReport:
    """Check n * ||n alpha|| * (A + 2) > 1 for 1 <= n <= n_max, certified."""
    K = cf.index_of(max(n_max, 1)) + 2
    for i in range(1, K + 1):
        if cf.digit(i) > A:
            raise DigitBoundViolated(f"a_{i} = {cf.digit(i)} exceeds A = {A}")
    bits = 2 * n_max.bit_length() + 48
    fa = FixedAlpha(cf, bits)
    scale = fa.scale
    best = None
    witness = 1
    failures = []
    for n in range(1, n_max + 1):
        y = fa.frac(n)
        d = min(y, scale - y)
        err = n + 1
        lower = (d - err) * n * (A + 2)
        upper = (d + err) * n * (A + 2)
        if lower <= scale:
            if upper <= scale:
                failures.append(n)
            else:
                raise PrecisionExhausted(f"||{n} alpha|| too close to the bound")
        val = d * n
        if best is None or val < best:
            best, witness = val, n
    return BadApproxReport(A, n_max, not failures, best / scale, witness, tuple(failures))


@dataclass(frozen=True)
class SeparationRow:
    k: int
    q_next: int
    neighbours: tuple[tuple[int, int], ...]  # (h_k(i;-), h_k(i;+)) per division number
    max_gap: float
    away_from_ends: bool
    pairwise_separated: bool

    @property
    def in_K0(self) -> bool:
        return self.away_from_ends and self.pairwise_separated


def separation_delta(A: int, rs: Sequence[Fraction]) -> Fraction:
    U = max(abs(Fraction(r).numerator) for r in rs)
    V = max(Fraction(r).denominator for r in rs)
    return Fraction(1, 100 * (A + 2) ** 2 * U**4 * V**5)


def separation_scan(
    cf: ContinuedFraction,
    division_numbers: Sequence[Rational],
    b,
    k_range: Iterable[int],
    *,
    A: Optional[int] = None,
    m_bound: int = 100,
) -> list[SeparationRow]:
    """Neighbour indices of the singularities {r_i b - alpha} in A_k and the separation tests.

    ``b`` is a Real source (for example an AlphaExpansion) or a LinearForm in alpha.
    """
    rs = [Fraction(r) for r in division_numbers]
    ks = list(k_range)
    env: dict[str, Real] = {"alpha": cf}
    if isinstance(b, LinearForm):
        bform = b
    elif isinstance(b, (int, Fraction)):
        bform = LinearForm.const(b)
    else:
        env["b"] = b
        bform = LinearForm.symbol("b")
    if A is None:
        A = max(cf.digit(i) for i in range(1, max(ks) + 3))
    delta = separation_delta(A, rs)
    # hypothesis: {r b} != {m alpha} for 0 < |m| <= m_bound
    points = []
    for r in rs:
        rb = bform * r
        pos = frac_form(rb, env)
        points.append(pos)
        if rb.symbols() <= {"alpha"}:
            m = rb.coef("alpha")
            if m.denominator == 1 and m != 0 and rb.coef("1").denominator == 1:
                raise HypothesisViolated(f"{{{r}*b}} equals {{{m}*alpha}}")
        for m in range(1, m_bound + 1):
            for mm in (m, -m):
                d = pos - frac_form(ALPHA * mm, env)
                if sign(d, env) == 0:
                    raise HypothesisViolated(f"{{{r}*b}} equals {{{mm}*alpha}}")
    exps = []
    for pos in points:
        shifted = pos if sign(pos - (ONE - ALPHA), env) < 0 else pos - 1
        exps.append((BoundForm(pos, env), alpha_expand(cf, BoundForm(shifted, env), depth=max(ks) + 2)))
    rows = []
    for k in ks:
        Q = cf.q(k + 1)
        hs = []
        max_gap = 0.0
        for (ysrc, exp), pos in zip(exps, points):
            lo, hi = rotation_neighbours(cf, ysrc, k, expansion=exp)
            for j in (lo, hi):
                g = frac_form(pos - ALPHA * j, env)
                g = min(float(g.interval(env, 64).mid), 1 - float(g.interval(env, 64).mid))
                max_gap = max(max_gap, g)
            hs.append((lo - 1, hi - 1))
        flat = [h for pair in hs for h in pair]
        ends_ok = all(delta * Q < h < (1 - delta) * Q for h in flat)
        sep_ok = all(abs(x - y) > delta * Q for i, x in enumerate(flat) for y in flat[i + 1 :])
        rows.append(SeparationRow(k, Q, tuple(hs), max_gap, ends_ok, sep_ok))
    return rows
