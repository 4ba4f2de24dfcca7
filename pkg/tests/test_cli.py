import json
import math
from pathlib import Path

import numpy as np
import pytest

from hc3kit.cli import (EXIT_ASSUMPTION, EXIT_OK, EXIT_USAGE, RunConfig, UsageError,
                        build_surface, load_config, main)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, command, ini="", out="out", extra=()):
    cfg = write(tmp_path, f"{command}.ini", ini)
    o = tmp_path / out
    code = main([command, "--config", cfg, "--out", str(o), *extra])
    return code, o


def manifest(o):
    return json.loads((o / "manifest.json").read_text())


QUICK_CONSTANTS = "[constants]\nmu_points = 5\nxi_points = 5\ncurves = mu, montgomery\n"


class TestConfig:
    def test_beta_normalised(self):
        cfg = RunConfig("gamma", beta=(0, 3, 4))
        assert cfg.beta == (0.0, 0.6, 0.8)

    def test_bad_beta(self):
        with pytest.raises(UsageError):
            RunConfig("gamma", beta=(0, 0, 0))

    def test_bad_tolerance(self):
        with pytest.raises(UsageError):
            RunConfig("gamma", tolerances={"root": -1.0})

    def test_bad_resolution(self):
        with pytest.raises(UsageError):
            RunConfig("constants", resolution=0)

    def test_ini_sections(self, tmp_path):
        p = write(tmp_path, "c.ini", "[run]\nseed = 7\nkappas = 10, 20\n"
                  "[surface]\nkind = ellipsoid\na = 2\nbeta = 1, 0, 1\n"
                  "[tolerances]\nroot = 1e-9\n[hc3]\nmodel = linear\n")
        cfg = load_config("hc3", p, {"out": "x"})
        assert cfg.seed == 7 and cfg.kappas == [10.0, 20.0] and cfg.out == "x"
        assert cfg.surface["kind"] == "ellipsoid"
        assert cfg.beta == pytest.approx((math.sqrt(0.5), 0, math.sqrt(0.5)))
        assert cfg.tolerances["root"] == 1e-9 and cfg.tolerances["eigen"] == 1e-9
        assert cfg.options == {"model": "linear"}

    def test_missing_config_file(self, tmp_path):
        assert main(["gamma", "--config", str(tmp_path / "nope.ini")]) == EXIT_USAGE

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as e:
            main(["teleport"])
        assert e.value.code == EXIT_USAGE

    def test_surface_builder(self):
        assert build_surface({"kind": "sphere", "radius": "2"}).params == {"r": 2.0}
        e = build_surface({"kind": "expression", "x": "a*sin(u)*cos(v)", "y": "sin(u)*sin(v)",
                           "z": "cos(u)", "a": "2", "u_range": "0, pi"})
        assert np.allclose(e.point(math.pi / 2, 0.0), [2, 0, 0])
        with pytest.raises(UsageError):
            build_surface({"kind": "torus"})


class TestConstantsCommand:
    def test_cache_and_bytes(self, tmp_path):
        code, o = run(tmp_path, "constants", QUICK_CONSTANTS)
        assert code == EXIT_OK
        first = {f: (o / f).read_bytes() for f in ("constants.json", "mu_curve.csv")}
        theta0 = json.loads(first["constants.json"])["theta0"]
        assert 0.585 < theta0 < 0.595
        m1 = manifest(o)
        assert not any(v["cache_hit"] for v in m1["constants_used"].values())
        code, o = run(tmp_path, "constants", QUICK_CONSTANTS)
        m2 = manifest(o)
        assert all(v["cache_hit"] for v in m2["constants_used"].values())
        for f, data in first.items():
            assert (o / f).read_bytes() == data
        assert m1["outputs"] == m2["outputs"]

    def test_resolution_doubling_reports_deltas(self, tmp_path):
        code, o = run(tmp_path, "constants", QUICK_CONSTANTS.replace("mu, montgomery", "mu"),
                      extra=["--resolution", "2"])
        assert code == EXIT_OK
        d = json.loads((o / "cauchy_deltas.json").read_text())
        assert d["coarse_resolution"] == 1
        assert d["deltas"]["theta0"] < 1e-6 and d["deltas"]["nu0_hat"] < 1e-4

    def test_unknown_curve(self, tmp_path):
        code, _ = run(tmp_path, "constants", "[constants]\ncurves = zeta\n")
        assert code == EXIT_USAGE


class TestGammaCommand:
    def test_sphere(self, tmp_path, sphere_gamma):
        code, o = run(tmp_path, "gamma", "[surface]\nkind = sphere\n")
        assert code == EXIT_OK
        g = json.loads((o / "gamma_hat.json").read_text())
        assert g["gamma_hat"] == pytest.approx(sphere_gamma, rel=1e-8)
        eq = np.loadtxt(o / "tangency_curve_0.csv", delimiter=",", skiprows=1)
        assert np.max(np.abs(eq[:, 3])) < 1e-9

    def test_tilted_ellipsoid_passes(self, tmp_path):
        code, o = run(tmp_path, "gamma", "[surface]\nkind = ellipsoid\na = 2\n"
                      "beta = 0.29552020666134, 0, 0.955336489125606\n")
        assert code == EXIT_OK
        assert json.loads((o / "assumptions.json").read_text())["all_pass"] is True

    def test_cylinder_patch_exit_code(self, tmp_path):
        code, o = run(tmp_path, "gamma", "[surface]\nkind = capsule\nradius = 1\n"
                      "half_length = 1\n")
        assert code == EXIT_ASSUMPTION
        assert json.loads((o / "assumptions.json").read_text())["gamma_regular"] is False
        assert manifest(o)["exit_code"] == EXIT_ASSUMPTION


class TestHc3Command:
    def test_sphere_two_term(self, tmp_path, consts, sphere_gamma):
        code, o = run(tmp_path, "hc3", "[run]\nkappas = 100\n")
        assert code == EXIT_OK
        lines = (o / "hc3.csv").read_text().splitlines()
        assert lines[0] == "kappa,leading,two_term,underline_loc,overline_loc"
        k, lead, tt, lo, hi = map(float, lines[1].split(","))
        th = consts.theta0
        assert tt == pytest.approx(100 / th - sphere_gamma * th ** (-5 / 3) * 100 ** (1 / 3),
                                   rel=1e-9)
        assert lead == pytest.approx(100 / th, rel=1e-12)
        assert lo == hi

    def test_linear_model(self, tmp_path, consts):
        code, o = run(tmp_path, "hc3", "[run]\nkappas = 10, 30\n[hc3]\nmodel = linear\n")
        rows = np.loadtxt(o / "hc3.csv", delimiter=",", skiprows=1)
        assert np.allclose(rows[:, 3], rows[:, 0] / consts.theta0, rtol=1e-9)
        assert np.array_equal(rows[:, 3], rows[:, 4])

    def test_wiggle_model_note(self, tmp_path, capsys):
        code, o = run(tmp_path, "hc3", "[run]\nkappas = 8\n[hc3]\nmodel = wiggle\n")
        assert code == EXIT_OK
        rows = np.loadtxt(o / "hc3.csv", delimiter=",", skiprows=1, ndmin=2)
        assert rows[0, 3] < rows[0, 4]
        assert "crossings" in capsys.readouterr().err
        assert manifest(o)["notes"]

    def test_unknown_model(self, tmp_path):
        code, _ = run(tmp_path, "hc3", "[hc3]\nmodel = quadratic\n")
        assert code == EXIT_USAGE


class TestLambda1Command:
    def test_sweep(self, tmp_path):
        code, o = run(tmp_path, "lambda1", "[run]\nb_grid = 0, 200, 400, 600, 800, 1000\n"
                      "[lambda1]\nradial_n = 1000\n")
        assert code == EXIT_OK
        rows = np.genfromtxt(o / "lambda1_sweep.csv", delimiter=",", names=True)
        assert rows["lambda1"][0] == pytest.approx(0.0, abs=1e-9)
        assert np.all(np.diff(rows["lambda1"]) > 0)

    def test_box_with_dump(self, tmp_path):
        code, o = run(tmp_path, "lambda1", "[run]\nb_grid = 1, 2\n"
                      "[lambda1]\ndomain = box\nn = 8\nside = 2\ndump = true\n")
        assert code == EXIT_OK
        assert (o / "eigenvector.bin").stat().st_size == 16 * 8**3
        paths = {d["path"] for d in manifest(o)["outputs"]}
        assert {"eigenvector.bin", "eigenvector.bin.json", "lambda1_sweep.csv"} <= paths


GL_SMALL = ("[glprobe]\nkappa = 2\nr = 2\nl = 1.6\nnr = 8\nnphi = 32\nnz = 8\n"
            "window = 3.2, 4.4\nbudget = 2\nstate_h = 2.5\n")


class TestGlprobeCommand:
    # the grid is deliberately coarse to keep the run short
    @pytest.mark.filterwarnings("ignore::hc3kit.errors.CoarseGridWarning")
    def test_small_run(self, tmp_path):
        code, o = run(tmp_path, "glprobe", GL_SMALL)
        assert code == EXIT_OK
        doc = json.loads((o / "glprobe.json").read_text())
        lo, hi = doc["bracket"]
        assert lo <= doc["H_estimate"] <= hi
        assert doc["inequalities_pass"] is True
        paths = {d["path"] for d in manifest(o)["outputs"]}
        assert {"transition.csv", "glprobe.json", "state_nontrivial.psi",
                "state_nontrivial.a", "state_nontrivial.json"} <= paths
