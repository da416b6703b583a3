"""Polysquare translation surfaces with b-rational gates on vertical edges.

A surface is a list of unit squares.  Horizontal gluing is a permutation: the
top edge of square i is glued to the bottom edge of ``top[i]``.  The right side
of every square is cut by division points {r*b} into half-open segments
[lo, hi), and each segment is glued by a horizontal translation to the left
side of some square at the same heights.  A barrier is simply a place where
the two sides of a vertical line are glued to different squares.
"""
from __future__ import annotations

import functools
import random
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import InvalidGate, InvalidSurface
from .numbers import (
    ContinuedFraction,
    Exact,
    LinearForm,
    Real,
    compare,
    frac_form,
    sign,
)

GateValue = Union[int, Fraction, float, LinearForm, Real]


@dataclass(frozen=True, order=True)
class DivisionPoint:
    """The point at height {r * gate} on a vertical edge."""

    r: Fraction
    gate: str = "b"

    def __init__(self, r, gate: str = "b"):
        object.__setattr__(self, "r", Fraction(r))
        object.__setattr__(self, "gate", gate)

    def form(self, gates: Mapping[str, LinearForm]) -> LinearForm:
        return gates[self.gate] * self.r

    def position(self, gates: Mapping[str, LinearForm], env) -> LinearForm:
        return frac_form(self.form(gates), env)

    def __str__(self) -> str:
        r = self.r
        tag = "" if self.gate == "b" else f"*{self.gate}"
        return f"{r}{tag}"


@dataclass(frozen=True)
class Segment:
    """Part of a right side starting at ``start`` (None = bottom) glued to the left side of ``target``."""

    start: Optional[DivisionPoint]
    target: int


@dataclass(frozen=True)
class PolysquareSurface:
    name: str
    cells: tuple[tuple[int, int], ...]
    top: tuple[int, ...]
    right: tuple[tuple[Segment, ...], ...]
    gates: Mapping[str, GateValue] = field(default_factory=dict)

    @property
    def s(self) -> int:
        return len(self.cells)

    def division_points(self, i: int) -> list[DivisionPoint]:
        return [seg.start for seg in self.right[i] if seg.start is not None]

    def gate_names(self) -> set[str]:
        return {dp.gate for i in range(self.s) for dp in self.division_points(i)}

    def specialize(self, **gates: GateValue) -> "PolysquareSurface":
        merged = dict(self.gates)
        merged.update(gates)
        return PolysquareSurface(self.name, self.cells, self.top, self.right, merged)

    def bottom(self) -> tuple[int, ...]:
        inv = [0] * self.s
        for i, t in enumerate(self.top):
            inv[t] = i
        return tuple(inv)


# ---------------------------------------------------------------------------
# gate resolution


def resolve_gates(
    gates: Mapping[str, GateValue], alpha: Optional[ContinuedFraction], names: Iterable[str] = ()
) -> tuple[dict, dict[str, LinearForm]]:
    """Environment and substitution forms for the gate parameters.

    Rational or interval-valued gates stay symbolic (their own symbol, bound in
    the environment); gates given as linear forms in alpha are substituted.
    """
    env: dict = {}
    if alpha is not None:
        env["alpha"] = alpha
    forms: dict[str, LinearForm] = {}
    for name in set(gates) | set(names):
        if name not in gates:
            raise InvalidGate(f"gate {name!r} has no value")
        v = gates[name]
        if isinstance(v, LinearForm):
            if v.symbols() - {"alpha"}:
                raise InvalidGate(f"gate {name!r} must be a form in alpha")
            forms[name] = v
        else:
            if isinstance(v, (int, float, Fraction)):
                v = Exact(v)
            env[name] = v
            forms[name] = LinearForm.symbol(name)
    return env, forms


def _check_gate_range(name: str, form: LinearForm, env) -> None:
    if sign(form, env) <= 0 or sign(form - 1, env) >= 0:
        raise InvalidGate(f"gate {name} must lie in (0, 1)")


def segment_bounds(surface: PolysquareSurface, i: int, forms, env) -> list[tuple[LinearForm, LinearForm, int]]:
    """Right-side segments of square i as (lo, hi, target), sorted by height."""
    starts = []
    for seg in surface.right[i]:
        pos = LinearForm() if seg.start is None else seg.start.position(forms, env)
        starts.append((pos, seg.target))
    _sort_forms(starts, env)
    out = []
    for j, (pos, tgt) in enumerate(starts):
        hi = starts[j + 1][0] if j + 1 < len(starts) else LinearForm.const(1)
        out.append((pos, hi, tgt))
    return out


def _sort_forms(items: list, env) -> None:
    items.sort(key=functools.cmp_to_key(lambda a, b: compare(a[0], b[0], env)))


# ---------------------------------------------------------------------------
# constructions


def _seg(start, target) -> Segment:
    return Segment(None if start is None else DivisionPoint(start), target)


def make_n_square_b(n: int, b: Optional[GateValue] = None) -> PolysquareSurface:
    """n squares in a row, each vertical edge carrying a b-gate below a barrier."""
    if n < 1:
        raise InvalidSurface("n must be positive")
    right = tuple((_seg(None, (i + 1) % n), _seg(1, i)) for i in range(n))
    surf = PolysquareSurface(f"{n}-square-b", tuple((i, 0) for i in range(n)), tuple(range(n)), right)
    if b is not None:
        surf = surf.specialize(b=b)
        if not isinstance(b, LinearForm):
            env, forms = resolve_gates(surf.gates, None)
            _check_gate_range("b", forms["b"], env)
    return surf


def make_torus(s: int = 1) -> PolysquareSurface:
    """A horizontal cylinder of s squares closed up into a torus (no gates)."""
    right = tuple((_seg(None, (i + 1) % s),) for i in range(s))
    return PolysquareSurface(f"torus-{s}", tuple((i, 0) for i in range(s)), tuple(range(s)), right)


def make_L_b(b: Optional[GateValue] = None) -> PolysquareSurface:
    """The four-square L with three b-gates and one b/2-gate.

    Squares: 0 bottom-left, 1 bottom-middle, 2 bottom-right, 3 top-left.  The
    left edge of square 1 carries division points b and 1-b/2, the left edge of
    square 2 carries b and 1-b.
    """
    half = Fraction(-1, 2)
    right = (
        (_seg(None, 1), _seg(1, 0), _seg(half, 1)),
        (_seg(None, 2), _seg(1, 1), _seg(-1, 2)),
        (_seg(None, 0), _seg(1, 2), _seg(-1, 1), _seg(half, 0)),
        (_seg(None, 3),),
    )
    surf = PolysquareSurface("L-b", ((0, 0), (1, 0), (2, 0), (0, 1)), (3, 1, 2, 0), right)
    if b is not None:
        surf = surf.specialize(b=b)
        if not isinstance(b, LinearForm):
            env, forms = resolve_gates(surf.gates, None)
            bf = forms["b"]
            if sign(bf, env) <= 0 or sign(bf - Fraction(2, 3), env) >= 0:
                raise InvalidGate("the (L;b) surface needs 0 < b < 2/3 so that b < 1-b < 1-b/2")
    return surf


def random_surface(
    s: int,
    multipliers: Sequence[Fraction],
    b: GateValue,
    alpha: Optional[ContinuedFraction] = None,
    *,
    seed: Optional[int] = None,
) -> PolysquareSurface:
    """A random valid s-square surface with division points {r b} on every right side.

    Each slab between consecutive division heights gets its own random
    permutation of target squares; ``top`` is a random permutation too.
    """
    rng = random.Random(seed)
    dps = sorted({DivisionPoint(r) for r in multipliers})
    env, forms = resolve_gates({"b": b}, alpha, {"b"})
    pos = [(dp.position(forms, env), dp) for dp in dps]
    for f, dp in pos:
        if sign(f, env) == 0:
            raise InvalidGate(f"division point {dp} sits at height 0")
    _sort_forms(pos, env)
    for (f, _), (g, _) in zip(pos, pos[1:]):
        if compare(f, g, env) == 0:
            raise InvalidGate("two division points coincide")
    starts = [None] + [dp for _, dp in pos]
    perms = [rng.sample(range(s), s) for _ in starts]
    right = tuple(tuple(Segment(st, perms[j][i]) for j, st in enumerate(starts)) for i in range(s))
    top = tuple(rng.sample(range(s), s))
    return PolysquareSurface(f"random-{s}", tuple((i, 0) for i in range(s)), top, right, {"b": b})


# ---------------------------------------------------------------------------
# billiard unfolding


Height = Union[int, DivisionPoint]


@dataclass(frozen=True)
class BilliardTable:
    """A polysquare table.  ``walls`` maps a vertical grid edge (x, y), the line x
    between cells (x-1, y) and (x, y), to wall intervals [lo, hi) where the
    endpoints are 0, 1 or division points."""

    cells: tuple[tuple[int, int], ...]
    walls: Mapping[tuple[int, int], tuple[tuple[Height, Height], ...]] = field(default_factory=dict)
    gates: Mapping[str, GateValue] = field(default_factory=dict)


def _edge_pieces(table: BilliardTable, line: tuple[int, int], boundary: bool, flipped: bool):
    """Pieces of a physical vertical edge as (start, is_wall) in unfolded heights."""
    if boundary:
        return [(None, True)]
    walls = table.walls.get(line, ())
    los = {w[0] for w in walls}
    his = {w[1] for w in walls}
    pts = {h for w in walls for h in w if isinstance(h, DivisionPoint)}
    pieces = []
    if not flipped:
        pieces.append((None, 0 in los))
        for p in pts:
            pieces.append((p, p in los))
    else:
        pieces.append((None, 1 in his))
        for p in pts:
            pieces.append((DivisionPoint(-p.r, p.gate), p in his))
    return pieces


def unfold_billiard(table: Union[BilliardTable, PolysquareSurface]) -> PolysquareSurface:
    """Four-copy translation surface of a billiard table (reflect across a vertical
    side, then reflect everything across a horizontal side)."""
    if isinstance(table, PolysquareSurface):
        table = BilliardTable(table.cells, {}, table.gates)
    cells = list(table.cells)
    index = {c: i for i, c in enumerate(cells)}
    if len(index) != len(cells):
        raise InvalidSurface("duplicate table cells")
    W = max(x for x, _ in cells) + 1
    H = max(y for _, y in cells) + 1
    n = len(cells)

    def sq(copy: int, cell: int) -> int:
        return copy * n + cell

    grid = []
    top = [0] * (4 * n)
    right: list[tuple[Segment, ...]] = [()] * (4 * n)
    for copy in range(4):
        h, v = copy & 1, copy >> 1
        for ci, (x, y) in enumerate(cells):
            grid.append((2 * W - 1 - x if h else x, 2 * H - 1 - y if v else y))
            # right side of the unfolded square is the physical east edge (west if mirrored)
            line = (x + 1, y) if not h else (x, y)
            nb = (x + 1, y) if not h else (x - 1, y)
            boundary = nb not in index
            segs = []
            for start, wall in _edge_pieces(table, line, boundary, bool(v)):
                tgt = sq(copy ^ 1, ci) if wall else sq(copy, index[nb])
                segs.append(Segment(start, tgt))
            right[sq(copy, ci)] = tuple(segs)
            up = (x, y + 1) if not v else (x, y - 1)
            top[sq(copy, ci)] = sq(copy, index[up]) if up in index else sq(copy ^ 2, ci)
    return PolysquareSurface("unfolded", tuple(grid), tuple(top), tuple(right), dict(table.gates))


# ---------------------------------------------------------------------------
# validation and topology


def validate(surface: PolysquareSurface, alpha: Optional[ContinuedFraction] = None) -> list[str]:
    """All invariant violations of a surface (empty list when valid)."""
    out: list[str] = []
    s = surface.s
    if s == 0:
        return ["surface has no squares"]
    if len(set(surface.cells)) != s:
        out.append("two squares share a grid cell")
    if len(surface.top) != s or len(surface.right) != s:
        out.append("identification tables do not match the square count")
        return out
    if sorted(surface.top) != list(range(s)):
        hit = set(surface.top)
        for j in range(s):
            if j not in hit:
                out.append(f"bottom edge of square {j} is unpaired")
    for i, segs in enumerate(surface.right):
        starts = [seg.start for seg in segs]
        if starts.count(None) != 1:
            out.append(f"right side of square {i} needs exactly one segment at the bottom")
        dps = [d for d in starts if d is not None]
        if len(set(dps)) != len(dps):
            out.append(f"right side of square {i} repeats a division point")
        for seg in segs:
            if not 0 <= seg.target < s:
                out.append(f"right side of square {i} glued to unknown square {seg.target}")
    # edge-connectedness of the polysquare region
    pos = {c: i for i, c in enumerate(surface.cells)}
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        x, y = surface.cells[i]
        for c in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            j = pos.get(c)
            if j is not None and j not in seen:
                seen.add(j)
                stack.append(j)
    if len(seen) != s:
        out.append("squares are not edge-connected")
    if out:
        return out
    names = surface.gate_names()
    if not names <= set(surface.gates):
        return out  # symbolic surface: structural checks only
    needs_alpha = any(isinstance(v, LinearForm) for v in surface.gates.values())
    if needs_alpha and alpha is None:
        return out
    env, forms = resolve_gates({k: surface.gates[k] for k in names}, alpha, names)
    for name in names:
        if not isinstance(surface.gates[name], LinearForm):
            try:
                _check_gate_range(name, forms[name], env)
            except InvalidGate as e:
                out.append(str(e))
    if out:
        return out
    incoming: dict[int, list] = defaultdict(list)
    for i in range(s):
        segs = segment_bounds(surface, i, forms, env)
        for a, b_, _ in segs:
            if compare(a, b_, env) >= 0:
                out.append(f"division points on the right side of square {i} are not strictly sorted")
                break
            if sign(a, env) < 0 or sign(b_ - 1, env) > 0:
                out.append(f"division point on square {i} outside (0,1)")
        for a, b_, t in segs:
            incoming[t].append((a, b_))
    for j in range(s):
        segs = incoming.get(j, [])
        segs.sort(key=lambda ab: float(ab[0].interval(env, 64).mid))
        cursor = LinearForm()
        ok = True
        for a, b_ in segs:
            if compare(a, cursor, env) != 0:
                ok = False
                break
            cursor = b_
        if not ok or compare(cursor, 1, env) != 0:
            out.append(f"left side of square {j} is not covered exactly once")
    if not out:
        for cone in cone_angles(surface, alpha):
            if cone % 4:
                out.append(f"cone angle {cone}*pi/2 is not a multiple of 2*pi")
    return out


def cone_angles(surface: PolysquareSurface, alpha: Optional[ContinuedFraction] = None) -> list[int]:
    """Total angles (in units of pi/2) around every vertex class of the surface."""
    names = surface.gate_names()
    env, forms = resolve_gates({k: surface.gates[k] for k in names}, alpha, names)
    parent: dict = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b_):
        ra, rb = find(a), find(b_)
        if ra != rb:
            parent[ra] = rb

    zero, one = LinearForm(), LinearForm.const(1)
    angle: dict = defaultdict(int)
    left_points: dict[int, set] = defaultdict(set)
    for i in range(surface.s):
        for a, b_, t in segment_bounds(surface, i, forms, env):
            union(("R", i, a), ("L", t, a))
            union(("R", i, b_), ("L", t, b_))
            left_points[t].update((a, b_))
            angle[("R", i, a)] = 2
            angle[("R", i, b_)] = 2
    for i in range(surface.s):
        for side in ("L", "R"):
            for h in (zero, one):
                angle[(side, i, h)] = 1
        for h in left_points[i]:
            if h not in (zero, one):
                angle[("L", i, h)] = 2
        union(("L", i, one), ("L", surface.top[i], zero))
        union(("R", i, one), ("R", surface.top[i], zero))
    totals: dict = defaultdict(int)
    for key, a in angle.items():
        totals[find(key)] += a
    return sorted(totals.values())


def genus(surface: PolysquareSurface, alpha: Optional[ContinuedFraction] = None) -> int:
    """Genus from the cone angles: sum(theta/2pi - 1) = 2g - 2."""
    excess = sum(a // 4 - 1 for a in cone_angles(surface, alpha))
    return excess // 2 + 1


# ---------------------------------------------------------------------------
# text format


_ARROW = re.compile(r"\s*(?:->|→)\s*")


def _parse_r(text: str, default_gate: str) -> DivisionPoint:
    text = text.strip()
    m = re.fullmatch(r"(-?[\d/]+)(?:\*(\w+))?", text)
    if not m:
        raise InvalidSurface(f"bad division multiplier {text!r}")
    return DivisionPoint(Fraction(m.group(1)), m.group(2) or default_gate)


def parse_surface(text: str) -> PolysquareSurface:
    """Read the line-oriented surface format (see ``format_surface``)."""
    section = None
    name = "surface"
    gate = "b"
    cells: dict[int, tuple[int, int]] = {}
    top: dict[int, int] = {}
    segs: dict[int, list[Segment]] = defaultdict(list)
    divisions: dict[int, list[DivisionPoint]] = {}
    gates: dict[str, GateValue] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low.endswith(":") and low[:-1] in ("squares", "vident", "hident", "divisions"):
            section = low[:-1]
            continue
        if section is None:
            key, _, val = line.partition(":")
            key, val = key.strip().lower(), val.strip()
            if key == "name":
                name = val
            elif key == "gate":
                gate = val
            elif key == "value":
                gname, _, gval = val.partition("=")
                gates[gname.strip()] = Fraction(gval.strip())
            else:
                raise InvalidSurface(f"line {lineno}: unknown header {key!r}")
            continue
        try:
            if section == "squares":
                idx, x, y = line.replace(",", " ").split()
                cells[int(idx)] = (int(x), int(y))
            elif section == "hident":
                lhs, rhs = _ARROW.split(line)
                top[int(lhs.strip().lstrip("Tt"))] = int(rhs.strip().lstrip("Bb"))
            elif section == "vident":
                lhs, rhs = _ARROW.split(line)
                src, _, start = lhs.strip().partition("@")
                i = int(src.strip().lstrip("Rr"))
                st = None if start.strip() in ("", "0") else _parse_r(start, gate)
                segs[i].append(Segment(st, int(rhs.strip().lstrip("Ll"))))
            elif section == "divisions":
                lhs, rhs = _ARROW.split(line)
                i = int(lhs.strip().lstrip("Rr"))
                body = rhs.strip().strip("[]")
                divisions[i] = [_parse_r(t, gate) for t in body.split(",") if t.strip()]
        except (ValueError, IndexError) as exc:
            raise InvalidSurface(f"line {lineno}: cannot parse {raw!r}") from exc
    s = len(cells)
    if sorted(cells) != list(range(s)):
        raise InvalidSurface("squares must be numbered 0..s-1")
    for i in range(s):
        declared = sorted(divisions.get(i, []))
        used = sorted(seg.start for seg in segs[i] if seg.start is not None)
        if declared != used:
            raise InvalidSurface(f"square {i}: divisions {declared} do not match vident starts {used}")
    return PolysquareSurface(
        name,
        tuple(cells[i] for i in range(s)),
        tuple(top.get(i, -1) for i in range(s)),
        tuple(tuple(segs[i]) for i in range(s)),
        gates,
    )


def load_surface(path: Union[str, Path]) -> PolysquareSurface:
    return parse_surface(Path(path).read_text())


def format_surface(surface: PolysquareSurface) -> str:
    lines = [f"name: {surface.name}"]
    for k, v in surface.gates.items():
        if isinstance(v, (int, Fraction)):
            lines.append(f"value: {k}={v}")
    lines.append("squares:")
    lines += [f"  {i} {x} {y}" for i, (x, y) in enumerate(surface.cells)]
    lines.append("hident:")
    lines += [f"  T{i} -> B{t}" for i, t in enumerate(surface.top)]
    lines.append("divisions:")
    for i in range(surface.s):
        dps = surface.division_points(i)
        if dps:
            lines.append(f"  R{i} -> [" + ", ".join(str(d) for d in dps) + "]")
    lines.append("vident:")
    for i, segs in enumerate(surface.right):
        for seg in segs:
            start = "0" if seg.start is None else str(seg.start)
            lines.append(f"  R{i}@{start} -> L{seg.target}")
    return "\n".join(lines) + "\n"


BUILTIN = {
    "L-b": lambda: make_L_b(),
    "2-square-b": lambda: make_n_square_b(2),
    "3-square-b": lambda: make_n_square_b(3),
    "torus": lambda: make_torus(1),
}


def builtin_or_file(ref: str) -> PolysquareSurface:
    m = re.fullmatch(r"(\d+)-square-b", ref)
    if m:
        return make_n_square_b(int(m.group(1)))
    if ref in BUILTIN:
        return BUILTIN[ref]()
    m = re.fullmatch(r"torus-(\d+)", ref)
    if m:
        return make_torus(int(m.group(1)))
    return load_surface(ref)
