import json
import math

import numpy as np
import pytest

from driftwell.cli import main


def read_csv_body(path):
    """CSV lines with comments stripped (drops the timestamp line too)."""
    lines = path.read_text().splitlines()
    assert lines[0] == "# driftwell-csv v1"
    return [ln for ln in lines if not ln.startswith("#")]


class TestEig1d:
    def test_dirichlet_baseline(self, tmp_path):
        rc = main(["eig1d", "--potential", "constant", "--c", "0", "--p", "0",
                   "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "eigen.json").read_text())
        assert data["lambda"] == pytest.approx(np.pi**2 / 4, rel=1e-6)
        body = read_csv_body(tmp_path / "eigenfunction.csv")
        assert body[0] == "x,u1,v1"
        assert len(body) == 1 + data["n"]

    def test_ax_p40(self, tmp_path):
        rc = main(["eig1d", "--potential", "power", "--alpha", "2",
                   "--p", "40", "--out", str(tmp_path)])
        assert rc == 0
        lam = json.loads((tmp_path / "eigen.json").read_text())["lambda"]
        cf = math.sqrt(2 / math.pi) * 40**1.5 * math.exp(-20.0)
        assert 0.85 <= lam / cf <= 1.15

    def test_overflow_guard_exit_code(self, tmp_path, capsys):
        rc = main(["eig1d", "--potential", "power", "--alpha", "2",
                   "--p", "2000", "--out", str(tmp_path)])
        assert rc == 3
        err = json.loads(capsys.readouterr().err)
        assert "asym" in err["error"]
        assert err["kind"] == "OverflowGuardError"

    def test_multiple_eigenvalues(self, tmp_path):
        rc = main(["eig1d", "--potential", "constant", "--c", "0", "--p", "0",
                   "--m", "3", "--n", "1001", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "eigen.json").read_text())
        lams = [e["lambda"] for e in data["eigenvalues"]]
        expect = [(k * np.pi / 2) ** 2 for k in (1, 2, 3)]
        np.testing.assert_allclose(lams, expect, rtol=1e-4)


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("potential = power\nwhatever = 3\n")
        rc = main(["eig1d", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 2
        assert "whatever" in json.loads(capsys.readouterr().err)["error"]

    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("potential = constant\nc = 0\np = 0\nn = 501\n"
                       "# comment line\nl = 1.0\n")
        rc = main(["eig1d", "--config", str(cfg), "--n", "2001",
                   "--out", str(tmp_path)])
        assert rc == 0
        assert json.loads((tmp_path / "eigen.json").read_text())["n"] == 2001

    def test_bad_value_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = not_a_number\n")
        assert main(["eig1d", "--config", str(cfg)]) == 2

    def test_unknown_potential_exit_2(self, tmp_path):
        assert main(["eig1d", "--potential", "cubic",
                     "--out", str(tmp_path)]) == 2


class TestAsym:
    def test_catalog_columns(self, tmp_path):
        rc = main(["asym", "--potential", "power", "--alpha", "2",
                   "--p-list", "20,40,80", "--n", "2001",
                   "--out", str(tmp_path)])
        assert rc == 0
        body = read_csv_body(tmp_path / "asym.csv")
        assert body[0] == "p,log_lambda_product,log_lambda_closed,ratio"
        rows = [ln.split(",") for ln in body[1:]]
        ratios = [float(r[3]) for r in rows]
        assert all(0.8 < r < 1.3 for r in ratios)

    def test_determinism_modulo_timestamp(self, tmp_path):
        args = ["asym", "--potential", "sine", "--l", str(1.5 * np.pi),
                "--p-list", "30,60", "--n", "1001"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        a = read_csv_body(tmp_path / "a" / "asym.csv")
        b = read_csv_body(tmp_path / "b" / "asym.csv")
        assert a == b


class TestSweep:
    def test_ax_fit(self, tmp_path):
        rc = main(["sweep", "--potential", "power", "--alpha", "2",
                   "--p-list", "10,20,30,40,50,60", "--n", "2001",
                   "--out", str(tmp_path)])
        assert rc == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["decay"]
        assert fit["fitted_b0"] == pytest.approx(0.5, rel=0.05)
        assert fit["abs_diff"] < 0.05 * 0.5
        body = read_csv_body(tmp_path / "sweep.csv")
        assert body[0].startswith("p,lambda_solver,log_lambda_asym")
        assert len(body) == 7

    def test_constant_drift_reports_no_decay(self, tmp_path):
        rc = main(["sweep", "--potential", "constant", "--c", "1",
                   "--p-list", "5,10,15,20", "--n", "1001",
                   "--out", str(tmp_path)])
        assert rc == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert not fit["decay"]
        assert fit["fitted_b0"] is None
        # running rate (1/p) log(1/lambda) is negative and growing toward 0
        body = read_csv_body(tmp_path / "sweep.csv")
        rates = [float(ln.split(",")[5]) for ln in body[1:]]
        assert all(r < 0 for r in rates)
        assert rates[-1] > rates[0]

    def test_needs_three_points(self, tmp_path):
        assert main(["sweep", "--potential", "power", "--p-list", "10,20",
                     "--out", str(tmp_path)]) == 2

    def test_asymptotic_fallback_beyond_solver_window(self, tmp_path):
        # beyond p*range(b) ~ 300 the solver saturates; the sweep must
        # switch to the log-domain asymptotics and still recover the depth
        rc = main(["sweep", "--potential", "sine", "--l", str(1.5 * np.pi),
                   "--p-list", "100,200,280,320,360", "--n", "2001",
                   "--out", str(tmp_path)])
        assert rc == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["fitted_b0"] == pytest.approx(2.0, rel=0.05)
        body = read_csv_body(tmp_path / "sweep.csv")
        sources = [ln.split(",")[6] for ln in body[1:]]
        assert sources[0] == "solver" and sources[-1] == "asymptotics"


class TestWell:
    def test_two_bump_field(self, tmp_path):
        rc = main(["well", "--field", "two-bump", "--nx", "199", "--ny", "199",
                   "--tol", "0.05", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "well.json").read_text())
        depths = sorted(w["depth"] for w in data["wells"])
        assert depths == pytest.approx([2 * 0.4 / np.pi, 2 * 2 * 0.25 / np.pi],
                                       abs=2e-3)
        assert data["b0"] == pytest.approx(max(depths))
        body = read_csv_body(tmp_path / "potential.csv")
        assert body[0] == "x,y,b,q"

    def test_1d_quartic(self, tmp_path):
        rc = main(["well", "--potential", "quartic", "--l", "2",
                   "--n", "2001", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "well.json").read_text())
        assert data["b0"] == pytest.approx(2.25, abs=0.03)
        assert data["ordering_check"] is True
        assert read_csv_body(tmp_path / "potential.csv")[0] == "x,b,a,q"


class TestEvolve2d:
    def test_pure_diffusion(self, tmp_path):
        rc = main(["evolve2d", "--field", "constant", "--cx", "0", "--cy", "0",
                   "--p", "0", "--nx", "49", "--ny", "49", "--tau", "1e-3",
                   "--t-end", "0.8", "--line=-1,-0.5,1,0.7",
                   "--window-start", "0.5", "--window-end", "0.8",
                   "--snapshot-every", "0.4", "--out", str(tmp_path)])
        assert rc == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["rate_l2"] == pytest.approx(np.pi**2 / 2, rel=0.05)
        assert fit["plateau"]
        assert fit["window"] == [0.5, 0.8]
        for name in ("norms.csv", "profile.csv", "section.csv",
                     "section_line.csv", "adjoint_profile.csv",
                     "snapshot_0000.csv", "snapshot_0001.csv"):
            assert (tmp_path / name).exists(), name
        body = read_csv_body(tmp_path / "profile.csv")
        assert body[0] == "x1,x2,u"
        assert len(body) == 1 + 49 * 49


class TestLifespan:
    def test_ax_p40(self, tmp_path):
        rc = main(["lifespan", "--potential", "power", "--alpha", "2",
                   "--p", "40", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "lifespan.json").read_text())
        assert data["source"] == "solver"
        assert data["half_life"] == pytest.approx(
            math.log(2) / data["lambda"], rel=1e-12)
        # magnitude ~ ln 2 / 4.16e-7 ~ 1.7e6 time units
        assert data["half_life"] == pytest.approx(1.67e6, rel=0.2)
        assert (tmp_path / "colony.csv").exists()

    def test_log_safe_beyond_solver_range(self, tmp_path):
        rc = main(["lifespan", "--potential", "power", "--alpha", "2",
                   "--p", "4000", "--n", "2001", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "lifespan.json").read_text())
        assert data["source"] == "asymptotics"
        assert data["lambda"] is None          # underflows a double
        assert data["lifespan"] is None        # overflows a double
        assert data["log_lifespan"] == pytest.approx(-data["log_lambda"])
        assert data["log_lifespan"] > 1900.0


class TestSelfcheck:
    def test_all_pass(self, capsys):
        assert main(["selfcheck", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 6
