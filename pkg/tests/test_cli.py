import json
import subprocess
import sys

import pytest

from knotform import cli


@pytest.fixture
def knots(tmp_path):
    docs = {
        "circle": {"preset": "circle"},
        "trefoil": {"preset": "trefoil"},
        "figure_eight": {"preset": "figure_eight"},
        "perturbed": {"preset": "perturbed_circle"},
        "hopf_a": {"preset": "hopf_a"},
        "hopf_b": {"preset": "hopf_b"},
        "far": {"preset": "circle", "translate": [0, 0, 10]},
        "crossing": {"preset": "circle", "translate": [1, 0, 0]},
        "nov2": {"fourier": {"x": {"cos": [0, 1]}, "y": {"sin": [0, 1]}, "z": {}}},
        "broken": "{not json",
        "identity": [],
        "pole": [{"type": "inversion", "center": [1, 0, 0], "radius": 1}],
        "inversion": [{"type": "inversion", "center": [0.2, 0.3, 2.0], "radius": 1.3}],
    }
    paths = {}
    for name, doc in docs.items():
        p = tmp_path / f"{name}.json"
        p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        paths[name] = str(p)
    return paths


def run(*argv):
    return cli.main([str(a) for a in argv])


def report(path):
    with open(path) as fh:
        return json.load(fh)


# -- link ----------------------------------------------------------------------


def test_link_hopf(knots, tmp_path):
    out = tmp_path / "r.json"
    assert run("link", knots["hopf_a"], knots["hopf_b"], "--out", out) == 0
    rep = report(out)
    vals = {r["name"]: r for r in rep["results"]}
    assert abs(abs(vals["linking_number"]["value"]) - 1) < 1e-3
    assert vals["integer_residual"]["passed"] and vals["integer_residual"]["tolerance"] == 1e-3
    assert set(rep["inputs"]) == {knots["hopf_a"], knots["hopf_b"]}
    assert all(len(d) == 64 for d in rep["inputs"].values())


def test_link_distant(knots):
    assert run("link", knots["circle"], knots["far"]) == 0


def test_link_intersecting(knots, capsys):
    assert run("link", knots["circle"], knots["crossing"]) == 2
    assert "CurvesIntersect" in capsys.readouterr().err


def test_bad_input_exit_2(knots, tmp_path):
    assert run("link", knots["broken"], knots["circle"]) == 2
    assert run("ey", tmp_path / "missing.json") == 2


# -- invariance --------------------------------------------------------------------


def test_invariance_random(knots):
    assert run("invariance", knots["circle"], "--random-seed", 3) == 0


def test_invariance_explicit_inversion(knots, tmp_path):
    out = tmp_path / "r.json"
    assert run("invariance", knots["trefoil"], "--moebius", knots["inversion"], "--out", out) == 0
    rep = report(out)
    assert len(rep["results"]) == 4
    assert all(r["tolerance"] == 1e-9 and r["passed"] for r in rep["results"])


def test_invariance_identity_exact(knots, tmp_path):
    out = tmp_path / "r.json"
    assert run("invariance", knots["trefoil"], "--moebius", knots["identity"], "--out", out) == 0
    assert all(r["value"] == 0.0 for r in report(out)["results"])


def test_invariance_pole_on_knot(knots, capsys):
    assert run("invariance", knots["circle"], "--moebius", knots["pole"]) == 2
    assert "PoleError" in capsys.readouterr().err


def test_invariance_tolerance_failure(knots):
    # an impossible tolerance turns the same run into an assertion failure
    assert run("invariance", knots["trefoil"], "--tol", 0.0) == 1


# -- v2 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("name, ref", [("circle", 0), ("trefoil", 1), ("figure_eight", -1)])
def test_v2(knots, tmp_path, name, ref):
    out = tmp_path / "r.json"
    assert run("v2", knots[name], "--samples", 400_000, "--out", out) == 0
    row = {r["name"]: r for r in report(out)["results"]}["v2_combination"]
    assert row["reference"] == ref
    assert row["tolerance"] >= 0.15
    assert "z_score" in row


def test_v2_without_reference(knots, capsys):
    assert run("v2", knots["nov2"], "--samples", 1000) == 2
    assert "reference v2" in capsys.readouterr().err


def test_v2_bound_widens_with_error_bar(knots, tmp_path):
    # at a tiny budget the error bar, not --tol, sets the acceptance bound
    out = tmp_path / "r.json"
    run("v2", knots["trefoil"], "--samples", 2000, "--tol", 1e-6, "--out", out)
    row = {r["name"]: r for r in report(out)["results"]}["v2_combination"]
    assert row["tolerance"] == pytest.approx(3 * row["standard_error"])
    assert row["passed"] == (abs(row["value"] - 1) <= row["tolerance"])


# -- ey / aey-scan ------------------------------------------------------------------


@pytest.mark.parametrize("name", ["circle", "trefoil"])
def test_ey(knots, name):
    assert run("ey", knots[name], "--samples", 300_000) == 0


def test_aey_scan_trefoil(knots, tmp_path):
    out = tmp_path / "r.csv"
    assert run("aey-scan", knots["trefoil"], "--shells", "3:6", "--samples", 300_000, "--out", out, "--format", "csv") == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[0] == "n"
    assert [int(line.split(",")[0]) for line in lines[1:]] == [3, 4, 5, 6]


def test_aey_scan_circle_fails(knots, tmp_path):
    # the circle's integrand vanishes identically, so no shell is positive
    out = tmp_path / "r.json"
    assert run("aey-scan", knots["circle"], "--samples", 50_000, "--out", out) == 1
    rep = report(out)
    assert all(row["value"] == 0.0 for row in rep["table"])


def test_aey_scan_bad_shells(knots):
    assert run("aey-scan", knots["trefoil"], "--shells", "5:3") == 2
    assert run("aey-scan", knots["trefoil"], "--shells", "x") == 2


# -- angle-fit ---------------------------------------------------------------------


def test_angle_fit_circle_skipped(knots, tmp_path):
    out = tmp_path / "r.json"
    assert run("angle-fit", knots["circle"], "--out", out) == 0
    rep = report(out)
    assert rep["notes"] and {r["name"] for r in rep["results"]} == {"predicted_coefficient", "max_conformal_angle"}


@pytest.mark.parametrize("name", ["trefoil", "perturbed"])
def test_angle_fit(knots, name):
    assert run("angle-fit", knots[name], "--s", 0.1) == 0


# -- reports -------------------------------------------------------------------------


def test_reports_byte_deterministic(knots, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("ey", knots["trefoil"], "--samples", 100_000, "--out", a) == 0
    assert run("ey", knots["trefoil"], "--samples", 100_000, "--out", b, "--threads", 4) == 0
    ra, rb = report(a), report(b)
    assert ra["results"] == rb["results"]
    assert run("ey", knots["trefoil"], "--samples", 100_000, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_report_echoes_settings(knots, tmp_path):
    out = tmp_path / "r.json"
    run("ey", knots["trefoil"], "--samples", 12345, "--seed", 9, "--out", out)
    settings = report(out)["settings"]
    assert settings["samples"] == 12345 and settings["seed"] == 9


def test_threads_env_override(knots, tmp_path, monkeypatch):
    out = tmp_path / "r.json"
    monkeypatch.setenv("KNOTFORM_THREADS", "3")
    run("ey", knots["trefoil"], "--samples", 10_000, "--threads", 1, "--out", out)
    assert report(out)["settings"]["workers"] == 3


def test_timing_flag(knots, tmp_path):
    out = tmp_path / "r.json"
    run("angle-fit", knots["trefoil"], "--out", out)
    assert "wall_time" not in report(out)
    run("angle-fit", knots["trefoil"], "--out", out, "--timing")
    assert report(out)["wall_time"] >= 0


def test_console_script(knots):
    proc = subprocess.run(
        [sys.executable, "-m", "knotform.cli", "angle-fit", knots["trefoil"]], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "PASS" in proc.stdout
