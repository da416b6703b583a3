from fractions import Fraction

import pytest

from polysquare.cli import ExperimentConfig, parse_gates, parse_value, run
from polysquare.numbers import ALPHA, ContinuedFraction, LinearForm


def call(capsys, *argv):
    rc = run(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def summary(out: str) -> dict:
    return dict(line.split("=", 1) for line in out.splitlines() if "=" in line and "," not in line)


def test_parse_value():
    silver = ContinuedFraction.parse("silver")
    assert parse_value("3/10") == Fraction(3, 10)
    assert parse_value("0.25") == Fraction(1, 4)
    assert parse_value("2*alpha - 1") == ALPHA * 2 - 1
    # {4 alpha} for alpha = sqrt(2) - 1 ~ 0.414 is 4 alpha - 1
    assert parse_value("{4*alpha}", silver) == ALPHA * 4 - 1
    with pytest.raises(ValueError):
        parse_value("{4*alpha}")
    with pytest.raises(ValueError):
        parse_value("b + 1")
    assert parse_gates(["b=1/3,c=alpha/2"], silver) == {"b": Fraction(1, 3), "c": ALPHA / 2}
    with pytest.raises(ValueError):
        parse_gates(["b"], silver)


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(alpha="const:5", gate="b={2*alpha}", crossings=1000, seed=7)
    assert ExperimentConfig.parse(cfg.serialize()) == cfg
    assert ExperimentConfig.parse("# comment\nseed = 3\n").seed == 3
    with pytest.raises(ValueError):
        ExperimentConfig.parse("colour=blue\n")


def test_numbers_commands(capsys):
    rc, out, _ = call(capsys, "numbers", "cf", "--alpha", "golden", "--k", "5")
    assert rc == 0 and "8" in out
    rc, out, _ = call(capsys, "numbers", "ostrowski", "--alpha", "golden", "--N", "12", "--N", "100")
    assert rc == 0
    rc, out, _ = call(capsys, "numbers", "three-distance", "--alpha", "silver", "--N", "30")
    assert rc == 0
    rc, out, _ = call(capsys, "numbers", "badapprox", "--alpha", "const:2", "--A", "2", "--n-max", "1000")
    assert rc == 0


def test_surface_commands(capsys, tmp_path):
    rc, out, _ = call(capsys, "surface", "validate", "L-b", "--gate", "b=3/10")
    assert rc == 0
    s = summary(out)
    assert s["genus"] == "4"
    rc, out, _ = call(capsys, "surface", "show", "2-square-b")
    assert rc == 0 and "squares" in out
    path = tmp_path / "two.txt"
    path.write_text(out)
    rc, out, _ = call(capsys, "surface", "validate", str(path), "--gate", "b=1/4")
    assert rc == 0


def test_iet_and_flow(capsys, tmp_path):
    csv_path = tmp_path / "iet.csv"
    rc, out, _ = call(capsys, "iet", "build", "L-b", "--alpha", "silver", "--gate", "b=3/10", "--csv", str(csv_path))
    assert rc == 0
    assert len(csv_path.read_text().splitlines()) == 16
    rc, out, _ = call(capsys, "iet", "orbit", "2-square-b", "--alpha", "golden", "--gate", "b=3/10", "--start", "1/3", "--steps", "10")
    assert rc == 0
    rc, out, _ = call(capsys, "flow", "simulate", "torus-2", "--alpha", "golden", "--crossings", "10000", "--grid", "4")
    assert rc == 0
    rc, out, _ = call(capsys, "flow", "simulate", "2-square-b", "--alpha", "golden", "--gate", "b=3/10", "--start", "0:0", "--crossings", "10")
    assert rc == 1


def test_criteria_check(capsys):
    rc, out, _ = call(capsys, "criteria", "check", "--n", "2", "--m", "4", "--alpha", "quad:3,-1,6")
    assert rc == 0
    s = summary(out)
    assert s["d"] == "2"


def test_parity_commands(capsys):
    rc, out, _ = call(capsys, "parity", "census", "--alpha", "const:7", "--k", "2", "--b", "1", "--sample", "1000")
    assert rc == 0
    rc, out, _ = call(capsys, "parity", "thm34", "--alpha", "const:40", "--k-max", "2", "--n", "1", "--sample", "500")
    assert rc in (0, 1)


def test_exit_codes(capsys, tmp_path):
    assert call(capsys, "no-such-command")[0] == 2
    assert call(capsys, "numbers", "cf")[0] == 2
    assert call(capsys, "numbers", "cf", "--alpha", "nonsense")[0] == 2
    assert call(capsys, "surface", "validate", str(tmp_path / "missing.txt"))[0] == 2
    assert call(capsys, "iet", "build", "2-square-b", "--alpha", "golden", "--gate", "b=3/2")[0] == 2
    rc, _, err = call(capsys, "--precision-cap", "8", "criteria", "check", "--n", "2", "--m", "5000", "--alpha", "golden")
    assert rc == 3 and "precision" in err


def test_repro_recipes(capsys, tmp_path):
    rc, out, _ = call(capsys, "repro", "Lbt-iet-table")
    assert rc == 0 and summary(out)["criterion_iet_regression"] == "pass"
    rc, out, _ = call(capsys, "repro", "fig2.2", "--crossings", "200000")
    assert rc == 0 and summary(out)["criterion_figure_densities_fig2.2"] == "pass"
    rc, out, _ = call(capsys, "repro", "fig2.3", "--dump-config", "--seed", "5")
    assert rc == 0 and "seed=5" in out
    cfg = tmp_path / "run.cfg"
    cfg.write_text(out)
    rc, out, _ = call(capsys, "repro", "fig2.3", "--config", str(cfg), "--crossings", "100000")
    assert rc == 0


def test_repro_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        rc, _, _ = call(capsys, "repro", "thm34", "--alpha", "const:40", "--sample", "300", "--seed", "2", "--csv", str(path))
    assert a.read_bytes() == b.read_bytes()
