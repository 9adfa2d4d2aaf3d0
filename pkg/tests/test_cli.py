import json
import subprocess
import sys

import numpy as np
import pytest

from photonz import io
from photonz.cli import main
from photonz.measurement import DetectorModel, GaussianSourceSpec, sample_quadratures
from photonz.states import PhotonDistribution, make_coherent, total_variation


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("PHOTONZ_SEED", raising=False)


def run(*argv):
    return main([str(a) for a in argv])


class TestSimulate:
    def test_coherent_outputs(self, tmp_path):
        assert run("simulate", "--source", "coherent", "--mean-photons", 2, "--count", 500, "--seed", 1,
                   "--out", tmp_path) == 0
        params = json.loads((tmp_path / "params.json").read_text())
        assert params["files"] == {"quadratures": "quadratures.csv", "z": "z.csv"}
        assert params["phase_mode"] == "random_uniform"
        q = io.read_quadratures(tmp_path / "quadratures.csv")
        z = io.read_z(tmp_path / "z.csv")
        assert len(q.x3) == 500
        np.testing.assert_array_equal(z.values, q.x3**2 + q.p4**2)

    def test_lossless_reparse(self, tmp_path):
        run("simulate", "--source", "thermal", "--mean-photons", 3, "--count", 200, "--seed", 9, "--out", tmp_path)
        batch = sample_quadratures(GaussianSourceSpec("thermal", 3.0), DetectorModel(), 200, 9)
        q = io.read_quadratures(tmp_path / "quadratures.csv")
        np.testing.assert_array_equal(q.x3, batch.x3)
        np.testing.assert_array_equal(q.p4, batch.p4)

    def test_bit_reproducible(self, tmp_path):
        for name in ("a", "b"):
            run("simulate", "--source", "coherent", "--mean-photons", 1, "--phase", 0.3, "--count", 300,
                "--seed", 5, "--out", tmp_path / name)
        for f in ("quadratures.csv", "z.csv", "params.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        run("simulate", "--source", "coherent", "--mean-photons", 1, "--count", 50, "--seed", 17, "--out", tmp_path / "a")
        monkeypatch.setenv("PHOTONZ_SEED", "17")
        assert run("simulate", "--source", "coherent", "--mean-photons", 1, "--count", 50, "--out", tmp_path / "b") == 0
        assert (tmp_path / "a" / "z.csv").read_bytes() == (tmp_path / "b" / "z.csv").read_bytes()

    def test_missing_seed(self, tmp_path, capsys):
        assert run("simulate", "--source", "coherent", "--mean-photons", 1, "--count", 10, "--out", tmp_path) == 2
        assert "seed" in capsys.readouterr().err

    def test_fock_source_gives_z_only(self, tmp_path):
        assert run("simulate", "--source", "fock", "--fock-n", 2, "--eta", 0.5, "--count", 4000, "--seed", 2,
                   "--out", tmp_path) == 0
        assert not (tmp_path / "quadratures.csv").exists()
        params = json.loads((tmp_path / "params.json").read_text())
        assert params["effective_mean_photons"] == pytest.approx(1.0)
        assert io.read_z(tmp_path / "z.csv").values.mean() == pytest.approx(2.0, abs=0.1)

    def test_fock_with_noise_rejected(self, tmp_path):
        assert run("simulate", "--source", "fock", "--fock-n", 2, "--sigma2-x", 0.1, "--count", 10, "--seed", 2,
                   "--out", tmp_path) == 2

    @pytest.mark.parametrize("flag,value", [("--eta", 1.5), ("--eta", 0), ("--count", 0), ("--sigma2-x", -1)])
    def test_argument_errors(self, tmp_path, flag, value):
        opts = {"--source": "coherent", "--mean-photons": 1, "--count": 10, "--seed": 1, "--out": tmp_path}
        opts[flag] = value
        assert run("simulate", *[x for pair in opts.items() for x in pair]) == 2

    def test_unknown_source(self, tmp_path):
        assert run("simulate", "--source", "squeezed", "--count", 1, "--seed", 1, "--out", tmp_path) == 2


class TestReconstruct:
    def test_roundtrip_with_efficiency(self, tmp_path, capsys):
        run("simulate", "--source", "coherent", "--mean-photons", 5, "--eta", 0.8, "--count", 32768, "--seed", 3,
            "--out", tmp_path / "sim")
        capsys.readouterr()
        assert run("reconstruct", "--in", tmp_path / "sim" / "z.csv", "--nmax", 25, "--eta", 0.8,
                   "--out", tmp_path / "rec") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["mean_n"] == pytest.approx(4.0, abs=0.1)
        corrected = json.loads((tmp_path / "rec" / "corrected.json").read_text())
        dist = PhotonDistribution.from_dict(corrected["distribution"])
        assert total_variation(dist, make_coherent(5, 25, tol=1e-4)) <= 0.1
        assert set(corrected["conditioning"]) == {"max_negative", "clipped_mass", "error_bound"}
        header = (tmp_path / "rec" / "histogram.csv").read_text().splitlines()[0]
        assert header == "n,reconstructed,corrected"

    def test_reads_quadrature_files(self, tmp_path, capsys):
        run("simulate", "--source", "coherent", "--mean-photons", 1, "--count", 1000, "--seed", 4, "--out", tmp_path)
        assert run("reconstruct", "--in", tmp_path / "quadratures.csv", "--out", tmp_path / "rec") == 0
        em = json.loads((tmp_path / "rec" / "em_result.json").read_text())
        assert em["converged"]

    def test_bad_eta(self, tmp_path):
        (tmp_path / "z.csv").write_text("z\n1.0\n2.0\n")
        assert run("reconstruct", "--in", tmp_path / "z.csv", "--eta", 1.5, "--out", tmp_path) == 2

    def test_ill_conditioned_inverse(self, tmp_path):
        run("simulate", "--source", "thermal", "--mean-photons", 10, "--count", 2000, "--seed", 4, "--out", tmp_path)
        assert run("reconstruct", "--in", tmp_path / "z.csv", "--eta", 0.05, "--out", tmp_path / "rec") == 4


class TestMoments:
    def test_vacuum_g2_null(self, tmp_path, capsys):
        run("simulate", "--source", "coherent", "--mean-photons", 0, "--count", 10_000, "--seed", 6, "--out", tmp_path)
        capsys.readouterr()
        assert run("moments", "--in", tmp_path / "z.csv") == 0
        data = json.loads(capsys.readouterr().out)
        assert data["g2"] is None
        assert data["sample_count"] == 10_000

    def test_csv_to_file(self, tmp_path):
        (tmp_path / "z.csv").write_text("z\n1.0\n3.0\n5.0\n")
        assert run("moments", "--in", tmp_path / "z.csv", "--format", "csv", "--out", tmp_path / "m.csv") == 0
        header, row = (tmp_path / "m.csv").read_text().splitlines()
        values = dict(zip(header.split(","), row.split(",")))
        assert float(values["mean_n"]) == 2.0

    def test_missing_header_names_line(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("\n1.0,2.0\n3.0,4.0\n")
        assert run("moments", "--in", tmp_path / "bad.csv") == 3
        err = capsys.readouterr().err
        assert "bad.csv:2:" in err and "missing header" in err

    def test_bad_row_names_line(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("z\n1.0\noops\n")
        assert run("moments", "--in", tmp_path / "bad.csv") == 3
        assert "bad.csv:3:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("moments", "--in", tmp_path / "nope.csv") == 3


class TestIngest:
    def test_calibrates(self, tmp_path):
        rng = np.random.default_rng(0)
        # vacuum std is sqrt(1/2) before the gain of 3
        vac = rng.normal(0.2, 3.0 * np.sqrt(0.5), size=(5000, 2))
        sig = 3.0 * sample_quadratures(GaussianSourceSpec("coherent", 4.0), DetectorModel(), 5000, 1).samples + 0.2
        (tmp_path / "vac.csv").write_text("x3,p4\n" + "\n".join(f"{a:.17g},{b:.17g}" for a, b in vac) + "\n")
        (tmp_path / "sig.csv").write_text("x3,p4\n" + "\n".join(f"{a:.17g},{b:.17g}" for a, b in sig) + "\n")
        assert run("ingest", "--in", tmp_path / "sig.csv", "--calib", tmp_path / "vac.csv", "--out", tmp_path / "o") == 0
        z = io.read_z(tmp_path / "o" / "z.csv")
        assert z.values.mean() - 1 == pytest.approx(4.0, abs=0.2)
        assert json.loads((tmp_path / "o" / "calibration.json").read_text())["calibrated"] is True

    def test_short_vacuum_record(self, tmp_path):
        (tmp_path / "vac.csv").write_text("x3,p4\n0.1,0.2\n0.3,-0.1\n")
        (tmp_path / "sig.csv").write_text("x3,p4\n1.0,2.0\n")
        assert run("ingest", "--in", tmp_path / "sig.csv", "--calib", tmp_path / "vac.csv", "--out", tmp_path / "o") == 3


class TestSpdCurve:
    def test_csv(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert run("spd-curve", "--threshold-points", 11, "--out", out) == 0
        curve = io.read_curve(out)
        assert len(curve) == 11 and curve[1].threshold == 1.0
        assert curve[1].efficiency == pytest.approx(2 * np.exp(-1), abs=1e-15)

    def test_json_stdout(self, capsys):
        assert run("spd-curve", "--threshold-min", 1, "--threshold-max", 2, "--threshold-points", 2,
                   "--format", "json") == 0
        data = json.loads(capsys.readouterr().out)
        assert [p["ratio"] for p in data] == [2.0, 3.0]

    def test_bad_range(self):
        assert run("spd-curve", "--threshold-min", 3, "--threshold-max", 1) == 2


class TestEquivalence:
    def test_report(self, tmp_path):
        out = tmp_path / "eq.json"
        assert run("equivalence", "--source", "coherent", "--mean-photons", 5, "--phase", 0, "--eta", 0.6,
                   "--count", 20000, "--seed", 1, "--out", out) == 0
        report = json.loads(out.read_text())
        assert report["passed"]
        assert report["model_a"]["mean"][0] == pytest.approx(np.sqrt(3), abs=1e-12)

    def test_small_count_rejected(self, tmp_path):
        assert run("equivalence", "--source", "thermal", "--mean-photons", 1, "--eta", 0.5, "--count", 100,
                   "--seed", 1) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "photonz", "spd-curve", "--threshold-points", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "threshold,efficiency,dark_count,ratio"


def test_no_command():
    assert main([]) == 2
