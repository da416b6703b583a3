"""Command line entry point: ``polysquare <group> <command> [options]``.

Every command writes a CSV table (stdout or ``--csv``) followed by
``key=value`` summary lines.  Exit codes: 0 ok, 1 a checked criterion failed,
2 usage or input error, 3 precision exhausted.
"""
from __future__ import annotations

import csv
import io
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import click

from . import criteria as crit
from . import flow as flw
from . import iet as iet_mod
from . import numbers as num
from . import parity as par
from . import surfaces as surf
from .errors import IllegalDigits, InvalidGate, InvalidSurface, PolysquareError, PrecisionExhausted

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECISION = 0, 1, 2, 3

_INPUT_ERRORS = (InvalidSurface, InvalidGate, IllegalDigits, ValueError, FileNotFoundError)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Everything a recipe needs; serialised as ``key=value`` lines."""

    alpha: str = ""  # empty: the recipe default
    surface: str = "2-square-b"
    gate: str = ""
    crossings: int = 10**6
    grid: int = 0
    sample: int = 100000
    seed: int = 0
    csv: str = ""
    precision_cap: int = 4096

    def serialize(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        vals = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in types:
                raise ValueError(f"bad config line {line!r}")
            vals[key] = int(val) if types[key] in (int, "int") else val.strip()
        return cls(**vals)

    def check_files(self) -> None:
        ref = self.surface
        try:
            surf.builtin_or_file(ref)
        except FileNotFoundError:
            raise FileNotFoundError(f"surface file {ref!r} does not exist") from None


def parse_value(text: str, alpha: Optional[num.ContinuedFraction] = None):
    """A gate or height: ``3/10``, ``0.3``, ``2*alpha - 1`` or ``{4*alpha}`` (fractional part).

    Constants come back as Fractions, everything else as a LinearForm in alpha.
    """
    text = text.strip()
    braces = text.startswith("{") and text.endswith("}")
    form = num.LinearForm.parse(text[1:-1] if braces else text)
    if form.symbols() - {"alpha"}:
        raise ValueError(f"only alpha may appear in {text!r}")
    if braces:
        if alpha is None:
            raise ValueError("a fractional part needs --alpha")
        form = num.frac_form(form, {"alpha": alpha})
    return form.coef("1") if form.is_constant else form


def parse_gates(specs: Sequence[str], alpha) -> dict:
    out = {}
    for spec in specs:
        for part in spec.split(","):
            if not part.strip():
                continue
            name, sep, val = part.partition("=")
            if not sep:
                raise ValueError(f"gate spec {part!r} is not name=value")
            out[name.strip()] = parse_value(val, alpha)
    return out


def parse_cf(text: str) -> num.ContinuedFraction:
    return num.ContinuedFraction.parse(text)


# ---------------------------------------------------------------------------
# output helpers


class Output:
    def __init__(self, csv_path: Optional[str]):
        self.csv_path = csv_path or None
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.summary: list[tuple[str, object]] = []

    def header(self, *cols: str) -> None:
        self.writer.writerow(cols)

    def row(self, *vals) -> None:
        self.writer.writerow([_fmt(v) for v in vals])

    def note(self, key: str, value) -> None:
        self.summary.append((key, _fmt(value)))

    def flush(self) -> None:
        if self.csv_path:
            Path(self.csv_path).write_text(self.buf.getvalue())
            click.echo(f"csv={self.csv_path}")
        else:
            click.echo(self.buf.getvalue(), nl=False)
        for k, v in self.summary:
            click.echo(f"{k}={v}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _value(form, env) -> float:
    return float(num.LinearForm.lift(form).interval(env, 64).mid)


# ---------------------------------------------------------------------------
# root group


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--precision-cap", type=int, default=None, help="Maximal working precision in bits.")
@click.pass_context
def cli(ctx, precision_cap):
    """Polysquare surfaces, interval exchanges and Ostrowski parity."""
    if precision_cap is not None:
        ctx.with_resource(num.precision_limit(precision_cap))


# ---------------------------------------------------------------------------
# numbers


@cli.group()
def numbers():
    """Continued fractions and numeration."""


@numbers.command("cf")
@click.option("--alpha", required=True)
@click.option("--k", "k", type=int, default=10, show_default=True)
@click.option("--csv", "csv_path", default=None)
def numbers_cf(alpha, k, csv_path):
    """Digits and convergents p_k/q_k."""
    cf = parse_cf(alpha)
    out = Output(csv_path)
    out.header("k", "a_k", "p_k", "q_k")
    for i in range(0, k + 1):
        if cf.depth is not None and i > cf.depth:
            break
        out.row(i, cf.a0 if i == 0 else cf.digit(i), cf.p(i), cf.q(i))
    out.note("alpha", cf)
    out.note("value", float(cf))
    out.flush()
    return EXIT_OK


@numbers.command("ostrowski")
@click.option("--alpha", required=True)
@click.option("--N", "N", type=int, multiple=True, required=True)
@click.option("--csv", "csv_path", default=None)
def numbers_ostrowski(alpha, N, csv_path):
    """Ostrowski digits of N (b_0 first)."""
    cf = parse_cf(alpha)
    out = Output(csv_path)
    out.header("N", "digits", "decoded")
    ok = True
    for n in N:
        rep = num.ostrowski_encode(cf, n)
        back = num.ostrowski_decode(cf, rep)
        ok &= back == n
        out.row(n, " ".join(map(str, rep.digits)), back)
    out.note("roundtrip", ok)
    out.flush()
    return EXIT_OK if ok else EXIT_FAIL


@numbers.command("three-distance")
@click.option("--alpha", required=True)
@click.option("--N", "N", type=int, required=True)
@click.option("--csv", "csv_path", default=None)
def numbers_three_distance(alpha, N, csv_path):
    """Gap lengths of {q alpha}, 0 <= q <= N."""
    cf = parse_cf(alpha)
    rep = num.three_distance(cf, N)
    out = Output(csv_path)
    out.header("gap", "length", "multiplicity")
    for f, iv, m in zip(rep.gap_forms, rep.gaps, rep.multiplicities):
        out.row(str(f), float(iv), m)
    k, mu, r = rep.decomposition
    out.note("k", k)
    out.note("mu", mu)
    out.note("r", r)
    out.note("distinct_gaps", len(rep.multiplicities))
    out.flush()
    return EXIT_OK


@numbers.command("badapprox")
@click.option("--alpha", required=True)
@click.option("--A", "A", type=int, required=True)
@click.option("--n-max", type=int, default=10**5, show_default=True)
def numbers_badapprox(alpha, A, n_max):
    """Check n ||n alpha|| (A + 2) > 1 for n <= n-max."""
    rep = num.badly_approximable_check(parse_cf(alpha), A, n_max)
    out = Output(None)
    out.note("ok", rep.ok)
    out.note("min_n_norm", rep.min_value)
    out.note("witness", rep.witness)
    out.note("failures", len(rep.failures))
    out.flush()
    return EXIT_OK if rep.ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# surfaces


@cli.group()
def surface():
    """Surface files and builtin surfaces."""


@surface.command("validate")
@click.argument("ref")
@click.option("--alpha", default=None)
@click.option("--gate", multiple=True)
def surface_validate(ref, alpha, gate):
    """Check identifications, gate ranges, cone angles and genus."""
    cf = parse_cf(alpha) if alpha else None
    s = surf.builtin_or_file(ref)
    gates = parse_gates(gate, cf)
    if gates:
        s = s.specialize(**gates)
    problems = surf.validate(s, cf)
    for p in problems:
        click.echo(f"violation: {p}")
    click.echo(f"name={s.name}")
    click.echo(f"squares={s.s}")
    if not problems:
        click.echo("cone_angles=" + " ".join(f"{Fraction(a, 2)}pi" for a in surf.cone_angles(s, cf)))
        click.echo(f"genus={surf.genus(s, cf)}")
    click.echo(f"valid={_fmt(not problems)}")
    return EXIT_OK if not problems else EXIT_FAIL


@surface.command("show")
@click.argument("ref")
def surface_show(ref):
    """Print the surface in file format."""
    click.echo(surf.format_surface(surf.builtin_or_file(ref)), nl=False)
    return EXIT_OK


# ---------------------------------------------------------------------------
# interval exchanges


def _surface_and_gates(ref, alpha, gate):
    cf = parse_cf(alpha)
    s = surf.builtin_or_file(ref)
    return cf, s, parse_gates(gate, cf)


@cli.group("iet")
def iet_group():
    """First-return map to the left vertical edges."""


@iet_group.command("build")
@click.argument("ref")
@click.option("--alpha", required=True)
@click.option("--gate", multiple=True, help="name=value, e.g. b=3/10 or b={2*alpha}.")
@click.option("--csv", "csv_path", default=None)
def iet_build(ref, alpha, gate, csv_path):
    """Dump the piece table."""
    cf, s, gates = _surface_and_gates(ref, alpha, gate)
    T = iet_mod.build_iet(s, cf, **gates)
    out = Output(csv_path)
    out.header("lo", "hi", "target", "target_hi", "square", "target_square")
    for r in T.rows():
        out.row(*r)
    bad = T.check()
    out.note("pieces", len(T.pieces))
    out.note("singularities_mod1", " ".join(str(f) for f in T.singularities_mod1()))
    out.note("consistent", not bad)
    out.flush()
    return EXIT_OK if not bad else EXIT_FAIL


@iet_group.command("orbit")
@click.argument("ref")
@click.option("--alpha", required=True)
@click.option("--gate", multiple=True)
@click.option("--start", required=True, help="Point of [0, s), e.g. 1/3 or 1 + alpha/2.")
@click.option("--steps", type=int, default=100, show_default=True)
@click.option("--csv", "csv_path", default=None)
def iet_orbit(ref, alpha, gate, start, steps, csv_path):
    """Stream the orbit as (step, x, square)."""
    cf, s, gates = _surface_and_gates(ref, alpha, gate)
    T = iet_mod.build_iet(s, cf, **gates)
    res = T.orbit(parse_value(start, cf), steps)
    out = Output(csv_path)
    out.header("step", "x", "square")
    for j, (x, sq) in enumerate(zip(res.points, res.squares)):
        out.row(j, str(x), sq)
    out.note("steps", len(res.points) - 1)
    out.note("singular_step", "" if res.singular_step is None else res.singular_step)
    out.flush()
    return EXIT_OK


# ---------------------------------------------------------------------------
# flow


@cli.group("flow")
def flow_group():
    """Continuous geodesic flow."""


def _parse_start(text: str, alpha):
    edge, sep, h = text.partition(":")
    if not sep:
        raise ValueError("--start must look like square:height")
    return int(edge), parse_value(h, alpha)


@flow_group.command("simulate")
@click.argument("ref")
@click.option("--alpha", required=True)
@click.option("--gate", multiple=True)
@click.option("--start", default="0:1/2", show_default=True, help="square:height on the left edge.")
@click.option("--crossings", type=int, default=10**6, show_default=True)
@click.option("--grid", type=int, default=0, help="Side of the test-cell grid (0 = none).")
@click.option("--csv", "csv_path", default=None)
def flow_simulate(ref, alpha, gate, start, crossings, grid, csv_path):
    """Time spent in each square along one geodesic."""
    cf, s, gates = _surface_and_gates(ref, alpha, gate)
    stats = flw.simulate(s, cf, _parse_start(start, cf), crossings, grid=grid or None, **gates)
    out = Output(csv_path)
    out.header("square", "time", "fraction")
    for i, (t, f) in enumerate(zip(stats.time_per_square, stats.densities)):
        out.row(i, float(t), float(f))
    out.note("total_time", stats.total_time)
    out.note("crossings", stats.crossings)
    out.note("square_changes", stats.gate_crossings)
    if grid:
        out.note("discrepancy", flw.discrepancy(stats, grid))
    out.flush()
    return EXIT_OK


# ---------------------------------------------------------------------------
# criteria


@cli.group("criteria")
def criteria_group():
    """GCD criterion and invariant colorings."""


@criteria_group.command("check")
@click.option("--n", "n", type=int, required=True)
@click.option("--m", "m", type=int, required=True)
@click.option("--alpha", required=True)
def criteria_check(n, m, alpha):
    """d, Upsilon, verdict and (when d > 1) the coloring with its densities."""
    cf = parse_cf(alpha)
    env = {"alpha": cf}
    d, holds = crit.gcd_criterion(n, m, cf)
    click.echo(f"d={d}")
    click.echo(f"upsilon={crit.upsilon(m, cf)}")
    if not holds:
        click.echo("verdict=equidistributed")
        return EXIT_OK
    click.echo("verdict=invariant-coloring")
    col = crit.double_periodic_coloring(n, m, cf, d)
    ver = crit.verify_invariance(col)
    click.echo("interval,lo," + ",".join(f"square{i}" for i in range(n)))
    for j, row in zip(reversed(range(m)), col.table()):
        click.echo(f"I{j},{col.boundary(j)}," + ",".join(map(str, row)))
    dens = crit.predicted_densities(col, check=False)
    for (c, sq), f in sorted(dens.items()):
        click.echo(f"density[color={c},square={sq}]={f} ({_value(f, env):.10g})")
    click.echo(f"shaded_color={crit.shaded_color(col)}")
    click.echo(f"invariant={_fmt(ver.invariant)}")
    return EXIT_OK if ver.invariant else EXIT_FAIL


# ---------------------------------------------------------------------------
# parity


@cli.group("parity")
def parity_group():
    """Parity census of Phi'' - Phi'."""


def _gates(alpha, family: str, n: int, epsilon: float) -> par.GatePair:
    return par.make_gates(alpha, family, n if family == "beta1" else None, epsilon=epsilon)


def _census_rows(out: Output, results: Sequence[par.CensusResult]) -> None:
    out.header("k", "b", "lo", "hi", "evaluated", "parity0", "fraction0", "fraction1", "radius", "exhaustive")
    for r in results:
        out.row(r.k, r.b, r.lo, r.hi, r.evaluated, r.parity0, r.fraction0, r.fraction1, r.radius, r.exhaustive)


@parity_group.command("census")
@click.option("--alpha", default="const:5000", show_default=True)
@click.option("--k", "k", type=int, default=6, show_default=True)
@click.option("--b", "b", type=int, default=0, show_default=True)
@click.option("--gates", "family", type=click.Choice(["beta0", "beta1"]), default="beta0", show_default=True)
@click.option("--n", "n", type=int, default=1, show_default=True, help="n of the beta1 family.")
@click.option("--epsilon", type=float, default=0.05, show_default=True)
@click.option("--sample", type=int, default=100000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mode", type=click.Choice(["padded", "literal"]), default="padded", show_default=True)
@click.option("--csv", "csv_path", default=None)
def parity_census(alpha, k, b, family, n, epsilon, sample, seed, mode, csv_path):
    """Parity-0 fraction over one block [b q_(k+1), (b+1) q_(k+1))."""
    cf = parse_cf(alpha)
    g = _gates(cf, family, n, epsilon)
    res = par.block_parity_census(cf, g, k, b, sample, seed=seed, mode=mode)
    out = Output(csv_path)
    _census_rows(out, [res])
    out.note("gates", g.name)
    out.note("fraction0", res.fraction0)
    out.note("fraction1", res.fraction1)
    out.flush()
    return EXIT_OK


def _anti_uniformity(out: Output, cf, epsilon, C, n, sample, seed, k_max, mode) -> bool:
    rep = par.anti_uniformity_experiment(cf, epsilon, C, n, sample=sample, seed=seed, k_max=k_max, mode=mode)
    out.header("label", "n", "k", "b", "window", "side", "fraction", "radius", "threshold", "holds")
    for r in rep.rows:
        out.row(r.label, r.n, r.k, r.b, r.window, r.side, r.fraction, r.radius, r.threshold, r.holds)
    labels = list(dict.fromkeys(r.label for r in rep.rows))
    for lab in labels:
        rows = rep.by_label(lab)
        out.note(f"{lab}", f"{sum(r.holds for r in rows)}/{len(rows)} hold")
    out.note("holds", rep.holds)
    return rep.holds


@parity_group.command("thm34")
@click.option("--alpha", default="const:5000", show_default=True)
@click.option("--epsilon", type=float, default=0.05, show_default=True)
@click.option("--C", "C", type=int, default=10, show_default=True)
@click.option("--n", "n", type=int, default=2, show_default=True)
@click.option("--k-max", type=int, default=6, show_default=True)
@click.option("--sample", type=int, default=100000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mode", type=click.Choice(["padded", "literal"]), default="padded", show_default=True)
@click.option("--csv", "csv_path", default=None)
def parity_thm34(alpha, epsilon, C, n, k_max, sample, seed, mode, csv_path):
    """Left/right occupancy over every window of the anti-uniformity statement."""
    out = Output(csv_path)
    ok = _anti_uniformity(out, parse_cf(alpha), epsilon, C, n, sample, seed, k_max, mode)
    out.flush()
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# recipes


# name -> (alpha, m, reference densities (left, right) as text)
FIGURES = {
    "fig2.2": ("const:2", 2, ("alpha", "1 - alpha")),
    "fig2.3": ("const:5", 4, ("2*alpha", "1 - 2*alpha")),
    "fig2.4": ("quad:3,-1,6", 4, ("4*alpha - 2", "3 - 4*alpha")),
    "fig2.5": ("quad:-1,1,3", 4, ("2*alpha - 1", "2 - 2*alpha")),
}
FIGURE_TOLERANCE = 1e-3
RECIPES = (*FIGURES, "Lbt-iet-table", "thm34")


def run_figure(name: str, cfg: ExperimentConfig, out: Output) -> bool:
    spec, m, expected = FIGURES[name]
    cf = parse_cf(cfg.alpha or spec)
    env = {"alpha": cf}
    col = crit.double_periodic_coloring(2, m, cf, 2)
    dens = crit.predicted_densities(col)
    shaded = crit.shaded_color(col)
    # midpoint of the bottom interval of the left square lies in the shaded set
    start = (col.boundary(0) + col.boundary(1)) / 2
    b = num.frac_form(num.ALPHA * m, env)
    stats = flw.simulate(surf.make_n_square_b(2, b), cf, (0, start), cfg.crossings)
    out.header("square", "time", "fraction", "predicted", "reference")
    err = 0.0
    agree = True
    for sq in range(2):
        pred = dens[(shaded, sq)]
        ref = num.LinearForm.parse(expected[sq])
        agree &= pred == ref
        f = float(stats.densities[sq])
        err = max(err, abs(f - _value(ref, env)))
        out.row(sq, float(stats.time_per_square[sq]), f, str(pred), str(ref))
    ok = agree and err < FIGURE_TOLERANCE
    out.note("recipe", name)
    out.note("alpha", cf)
    out.note("b", f"{{{m}*alpha}} = {b}")
    out.note("start", f"0:{start}")
    out.note("crossings", cfg.crossings)
    out.note("predicted_matches_reference", agree)
    out.note("max_error", err)
    out.note(f"criterion_figure_densities_{name}", "pass" if ok else "fail")
    return ok


def run_lbt_table(cfg: ExperimentConfig, out: Output) -> bool:
    cf = parse_cf(cfg.alpha or "silver")
    gates = parse_gates([cfg.gate or "b=3/10"], cf)
    T = iet_mod.build_iet(surf.make_L_b(), cf, **gates)
    out.header("lo", "hi", "target", "target_hi", "square", "target_square")
    for r in T.rows():
        out.row(*r)
    got = [(p.lo, p.hi, p.target) for p in T.pieces]
    ok = got == list(iet_mod.L_B_TABLE) and not T.check()
    out.note("recipe", "Lbt-iet-table")
    out.note("alpha", cf)
    out.note("gate", " ".join(f"{k}={v}" for k, v in gates.items()))
    out.note("pieces", len(T.pieces))
    out.note("criterion_iet_regression", "pass" if ok else "fail")
    return ok


def run_thm34(cfg: ExperimentConfig, out: Output) -> bool:
    ok = _anti_uniformity(out, parse_cf(cfg.alpha or "const:5000"), 0.05, 10, 2, cfg.sample, cfg.seed, 6, "padded")
    out.note("recipe", "thm34")
    out.note("criterion_anti_uniformity", "pass" if ok else "fail")
    return ok


@cli.command("repro")
@click.argument("case", type=click.Choice(RECIPES))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--alpha", default=None)
@click.option("--surface", default=None)
@click.option("--gate", default=None)
@click.option("--crossings", type=int, default=None)
@click.option("--sample", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--csv", "csv_path", default=None)
@click.option("--dump-config", is_flag=True, help="Print the effective configuration and stop.")
def repro(case, config_path, alpha, surface, gate, crossings, sample, seed, csv_path, dump_config):
    """Run a named recipe deterministically."""
    cfg = ExperimentConfig.parse(Path(config_path).read_text()) if config_path else ExperimentConfig()
    overrides = dict(alpha=alpha, surface=surface, gate=gate, crossings=crossings, sample=sample, seed=seed, csv=csv_path)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    if dump_config:
        click.echo(cfg.serialize(), nl=False)
        return EXIT_OK
    cfg.check_files()
    out = Output(cfg.csv)
    with num.precision_limit(cfg.precision_cap):
        if case in FIGURES:
            ok = run_figure(case, cfg, out)
        elif case == "Lbt-iet-table":
            ok = run_lbt_table(cfg, out)
        else:
            ok = run_thm34(cfg, out)
    out.flush()
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        rv = cli.main(args=args, prog_name="polysquare", standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_FAIL
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except PrecisionExhausted as exc:
        click.echo(f"error: precision exhausted: {exc}", err=True)
        return EXIT_PRECISION
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except PolysquareError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_FAIL
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
