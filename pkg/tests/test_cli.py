import json

import numpy as np
import pytest

from mcissa import TimeSeriesPanel, load_panel, write_panel
from mcissa.cli import main

from .conftest import random_panel

TWO_HARMONICS = """\
seed: 3
phase_offsets: [0.0, 0.4, 1.1]
components:
  - type: harmonic
    name: annual
    amplitude: 2.0
    frequency: 0.08333333333333333
  - type: harmonic
    name: slow
    amplitude: 1.0
    frequency: 0.020833333333333332
"""


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def panel_csv(tmp_path):
    p = random_panel(21, 3, 200)
    p = TimeSeriesPanel(p.values + np.array([[10.0], [-3.0], [0.5]]), p.series_names)
    path = tmp_path / "panel.csv"
    write_panel(p, path)
    return path


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_then_decompose_two_harmonics(tmp_path):
    recipe = tmp_path / "r.yaml"
    recipe.write_text(TWO_HARMONICS)
    assert run("synth", "--recipe", recipe, "-M", 3, "-T", 240, "-o", tmp_path / "syn") == 0
    src = tmp_path / "syn" / "panel.csv"
    out = tmp_path / "dec"
    assert run("decompose", "-i", src, "-L", 48, "--groups", "trend:k=1; cycle:period=12", "-o", out) == 0
    comps = sorted(p.name for p in (out / "components").iterdir())
    assert comps == ["cycle.csv", "residual.csv", "trend.csv"]
    total = sum(load_panel(out / "components" / c).values for c in comps)
    np.testing.assert_allclose(total, load_panel(src).values, rtol=0, atol=1e-8)
    truth = load_panel(tmp_path / "syn" / "truth" / "annual.csv").values
    np.testing.assert_allclose(load_panel(out / "components" / "cycle.csv").values, truth, atol=1e-8)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["window_length"] == 48
    assert manifest["resolved_groups"]["cycle"] == [[5, 1], [5, 2], [5, 3]]
    assert set(manifest["files"]) >= {"components/trend.csv", "contributions.csv", "phase.csv"}


def test_decompose_outputs_and_no_trend_level(panel_csv, tmp_path):
    out = tmp_path / "o"
    assert run("decompose", "-i", panel_csv, "-L", 24, "--groups", "trend:k=1; c:k=2-4",
               "--emit", "components,tables,phase,elementary,uniqueness", "--no-trend-level", "-o", out) == 0
    names = set(read_tree(out))
    assert {"contributions.csv", "subcomponents.csv", "eigenvector_weights.csv", "series_subcomponents.csv",
            "participation.csv", "phase.csv", "segments.csv", "uniqueness.csv",
            "elementary/k001_m01.csv", "elementary/k013_m03.csv"} <= names
    total = sum(load_panel(out / "components" / f"{g}.csv").values for g in ("trend", "c", "residual"))
    x = load_panel(panel_csv).values
    np.testing.assert_allclose(total, x - x.mean(axis=1, keepdims=True), atol=1e-10)
    rows = (out / "contributions.csv").read_text().splitlines()
    assert rows[0] == "k,period,share" and len(rows) == 14
    assert sum(float(r.split(",")[2]) for r in rows[1:]) == pytest.approx(100.0)


def test_decompose_window_too_long(panel_csv, tmp_path, capsys):
    assert run("decompose", "-i", panel_csv, "-L", 200, "-o", tmp_path / "o") == 1
    assert not (tmp_path / "o").exists()
    err = capsys.readouterr().err.strip()
    assert err.startswith("mcissa: error:") and "\n" not in err


def test_bad_groups_and_emit(panel_csv, tmp_path):
    assert run("decompose", "-i", panel_csv, "-L", 24, "--groups", "a:k=1-3; b:k=2", "-o", tmp_path / "o") == 1
    assert run("decompose", "-i", panel_csv, "-L", 24, "--emit", "plots", "-o", tmp_path / "o") == 1
    assert not (tmp_path / "o").exists()


def test_missing_input_is_io_error(tmp_path, capsys):
    assert run("decompose", "-i", tmp_path / "nope.csv", "-L", 12, "-o", tmp_path / "o") == 2
    assert "I/O error" in capsys.readouterr().err


def test_rebase_by_label_prefix(tmp_path):
    labels = [f"{2000 + t // 12}-{t % 12 + 1:02d}" for t in range(120)]
    x = 50 + np.random.default_rng(1).standard_normal((2, 120)).cumsum(axis=1)
    path = tmp_path / "d.csv"
    write_panel(TimeSeriesPanel(x, ["a", "b"], labels), path)
    out = tmp_path / "o"
    assert run("decompose", "-i", path, "-L", 24, "--rebase", "2003", "--groups", "t:k=1", "-o", out) == 0
    total = sum(load_panel(out / "components" / g).values for g in ("t.csv", "residual.csv"))
    expected = 100 * x / x[:, 36:48].mean(axis=1, keepdims=True)
    np.testing.assert_allclose(total, expected, atol=1e-8)
    assert run("decompose", "-i", path, "-L", 24, "--rebase", "1999", "-o", out) == 1


def test_verify_passes(panel_csv, capsys):
    assert run("verify", "-i", panel_csv, "-L", 24) == 0
    text = capsys.readouterr().out
    assert "all checks passed" in text and "FAIL" not in text
    for check in ("orthonormality", "completeness", "pairing", "uniqueness", "decay"):
        assert check in text


def test_verify_single_series_prints_zero(tmp_path, capsys):
    path = tmp_path / "one.csv"
    write_panel(random_panel(22, 1, 120), path)
    assert run("verify", "-i", path, "-L", 12) == 0
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("uniqueness"))
    assert line.split()[3] == "0"


def test_verify_detects_injected_fault(panel_csv, capsys):
    assert run("verify", "-i", panel_csv, "-L", 24, "--inject-fault", "basis-sign") == 3
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("orthonormality"))
    assert line.endswith("FAIL")


def test_synth_files(tmp_path):
    one = tmp_path / "one.yaml"
    one.write_text("components:\n  - type: harmonic\n    amplitude: 1\n    frequency: 0.1\n")
    assert run("synth", "-r", one, "-M", 2, "-T", 50, "-o", tmp_path / "a") == 0
    files = set(read_tree(tmp_path / "a")) - {"manifest.json"}
    assert files == {"panel.csv", "truth/harmonic1.csv"}
    np.testing.assert_array_equal(load_panel(tmp_path / "a" / "panel.csv").values,
                                  load_panel(tmp_path / "a" / "truth" / "harmonic1.csv").values)

    two = tmp_path / "two.yaml"
    two.write_text("seed: 9\ncomponents:\n  - {type: harmonic, amplitude: 1, frequency: 0.1}\n"
                   "  - {type: noise, std: 0.5}\n")
    assert run("synth", "-r", two, "-M", 2, "-T", 50, "-o", tmp_path / "b") == 0
    files = set(read_tree(tmp_path / "b")) - {"manifest.json"}
    assert files == {"panel.csv", "truth/harmonic1.csv", "truth/noise2.csv"}
    truths = [load_panel(tmp_path / "b" / f).values for f in files if f.startswith("truth")]
    np.testing.assert_allclose(load_panel(tmp_path / "b" / "panel.csv").values, sum(truths), atol=1e-15)


def test_synth_recipe_error_has_line(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("components:\n  - type: noise\n    std: -1\n")
    assert run("synth", "-r", bad, "-M", 1, "-T", 10, "-o", tmp_path / "o") == 1
    assert f"{bad}:2:" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_reruns_are_byte_identical(tmp_path):
    recipe = tmp_path / "r.yaml"
    recipe.write_text(TWO_HARMONICS + "  - {type: ar1, phi: 0.6, std: 0.3}\n")
    trees = []
    for _ in range(2):
        assert run("synth", "-r", recipe, "-M", 3, "-T", 120, "--seed", 5, "-o", tmp_path / "s") == 0
        assert run("decompose", "-i", tmp_path / "s" / "panel.csv", "-L", 24, "--groups", "t:k=1; c:period=12",
                   "--emit", "components,elementary,tables,phase,uniqueness", "-o", tmp_path / "d") == 0
        trees.append(read_tree(tmp_path))
    assert trees[0] == trees[1]
