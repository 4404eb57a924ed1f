import json

import numpy as np
import pytest

from m2spec import TorusGrid, random_coercive_density
from m2spec import io
from m2spec.cli import main
from m2spec.errors import DataError


@pytest.fixture
def synth_files(tmp_path):
    cov, truth = tmp_path / "cov.json", tmp_path / "truth.grid"
    assert main(["synth", "--d", "2", "--m", "2", "--N", "16", "--seed", "3",
                 "--out-cov", str(cov), "--out-truth", str(truth)]) == 0
    return cov, truth


class TestIO:
    def test_covariance_round_trip(self, tmp_path, grid2, box2):
        sigma = random_coercive_density(0, grid2, 2, 0.5, 2.0).moments(box2)
        path = tmp_path / "c.json"
        io.write_covariance(path, sigma, {"note": "x"})
        back, meta = io.read_covariance(path)
        assert back.index_set == box2 and np.array_equal(back.values, sigma.values)
        assert meta == {"note": "x"}

    def test_grid_round_trip(self, tmp_path, grid2):
        phi = random_coercive_density(1, grid2, 2, 0.5, 2.0)
        path = tmp_path / "g.grid"
        io.write_grid(path, grid2, phi.samples)
        g, s = io.read_grid(path)
        assert g == grid2 and np.array_equal(s, phi.samples)
        assert path.stat().st_size == 29 + grid2.n_nodes * 4 * 16

    def test_grid_truncated(self, tmp_path, grid2):
        path = tmp_path / "g.grid"
        io.write_grid(path, grid2, np.zeros((grid2.n_nodes, 1, 1)))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(DataError):
            io.read_grid(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.grid"
        path.write_bytes(b"NOPE!" + bytes(40))
        with pytest.raises(DataError):
            io.read_grid(path)

    def test_malformed_covariance(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"format": "m2spec-covariance", "d": 1}')
        with pytest.raises(DataError):
            io.read_covariance(path)
        path.write_text("{not json")
        with pytest.raises(DataError):
            io.read_covariance(path)


class TestSynth:
    def test_deterministic(self, tmp_path):
        outs = []
        for i in range(2):
            cov, truth = tmp_path / f"c{i}.json", tmp_path / f"t{i}.grid"
            main(["synth", "--N", "16", "--seed", "5", "--mode", "periodogram", "--realizations", "20",
                  "--out-cov", str(cov), "--out-truth", str(truth)])
            outs.append((cov.read_bytes(), truth.read_bytes()))
        assert outs[0] == outs[1]

    def test_white_noise_moments(self, tmp_path):
        cov = tmp_path / "c.json"
        main(["synth", "--truth", "white", "--N", "16", "--out-cov", str(cov)])
        sigma, _ = io.read_covariance(cov)
        for k, v in zip(sigma.index_set.indices, sigma.values):
            expected = np.eye(2) if not k.any() else np.zeros((2, 2))
            assert np.allclose(v, expected, atol=1e-14)

    def test_white_noise_periodogram(self, tmp_path):
        cov = tmp_path / "c.json"
        main(["synth", "--truth", "white", "--N", "16", "--mode", "periodogram",
              "--realizations", "200", "--out-cov", str(cov)])
        sigma, _ = io.read_covariance(cov)
        assert np.abs(sigma[(0, 0)] - np.eye(2)).max() <= 0.05

    def test_bad_resolution(self, tmp_path, capsys):
        code = main(["synth", "--N", "2", "--K", "1", "--out-cov", str(tmp_path / "c.json")])
        assert code == 2 and "error" in capsys.readouterr().err


class TestEstimate:
    def test_round_trip_and_verify(self, tmp_path, synth_files, capsys):
        cov, _ = synth_files
        report, dens = tmp_path / "r.json", tmp_path / "phi.grid"
        assert main(["estimate", "--cov", str(cov), "--out-report", str(report),
                     "--out-density", str(dens)]) == 0
        out = json.loads(report.read_text())
        assert out["report"]["status"] == "converged-interior"
        assert out["certificate"]["ok"] is True
        assert out["moments"] == "grid-consistent"
        assert main(["verify", "--cov", str(cov), "--density", str(dens)]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_verify_fails_against_wrong_data(self, tmp_path, synth_files):
        cov, truth = synth_files
        other = tmp_path / "o.json"
        main(["synth", "--N", "16", "--seed", "9", "--out-cov", str(other)])
        assert main(["verify", "--cov", str(other), "--density", str(truth)]) == 1

    def test_no_certificate_exit(self, synth_files, capsys):
        cov, _ = synth_files
        assert main(["estimate", "--cov", str(cov), "--max-iters", "1"]) == 1
        assert "max-iters" in capsys.readouterr().err

    def test_corrupted_symmetry(self, tmp_path, synth_files):
        cov, _ = synth_files
        obj = json.loads(cov.read_text())
        obj["values"][0]["re"][0][1] += 0.1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(obj))
        assert main(["estimate", "--cov", str(bad)]) != 0

    def test_config_file(self, tmp_path, synth_files):
        cov, _ = synth_files
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nu": "2", "max_iters": 300}))
        report = tmp_path / "r.json"
        assert main(["--config", str(cfg), "estimate", "--cov", str(cov), "--out-report", str(report)]) == 0
        assert json.loads(report.read_text())["report"]["nu"] == 2
        cfg.write_text(json.dumps({"bogus": 1}))
        assert main(["--config", str(cfg), "estimate", "--cov", str(cov)]) == 2

    def test_grid_prior(self, tmp_path, synth_files):
        cov, truth = synth_files
        # estimating with the truth as prior reproduces it
        dens = tmp_path / "phi.grid"
        assert main(["estimate", "--cov", str(cov), "--prior", f"grid:{truth}", "--out-density", str(dens)]) == 0
        _, a = io.read_grid(truth)
        _, b = io.read_grid(dens)
        assert np.abs(a - b).max() <= 1e-6


class TestOtherCommands:
    def test_gradcheck_pass_and_fail(self, capsys):
        assert main(["gradcheck", "--N", "12", "--points", "3"]) == 0
        assert "PASS" in capsys.readouterr().out
        assert main(["gradcheck", "--N", "12", "--points", "3", "--step", "0.3", "--threshold", "1e-8"]) == 1

    def test_divergence_values(self, tmp_path, capsys):
        g = TorusGrid(1, 4)
        a, b = tmp_path / "a.grid", tmp_path / "b.grid"
        io.write_grid(a, g, np.full((4, 1, 1), 2.0))
        io.write_grid(b, g, np.ones((4, 1, 1)))
        assert main(["divergence", str(a), str(b), "--tau", "0.5"]) == 0
        t = float(capsys.readouterr().out)
        assert main(["divergence", str(a), str(b), "--nu", "2"]) == 0
        n = float(capsys.readouterr().out)
        assert t == pytest.approx(n, rel=1e-12)
        assert t == pytest.approx(6 - 4 * np.sqrt(2), rel=1e-12)
        assert main(["divergence", str(a), str(a), "--tau", "0.3"]) == 0
        assert abs(float(capsys.readouterr().out)) <= 1e-14

    def test_divergence_shape_mismatch(self, tmp_path):
        a, b = tmp_path / "a.grid", tmp_path / "b.grid"
        io.write_grid(a, TorusGrid(1, 4), np.ones((4, 1, 1)))
        io.write_grid(b, TorusGrid(1, 5), np.ones((5, 1, 1)))
        assert main(["divergence", str(a), str(b), "--tau", "0.5"]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["verify", "--cov", str(tmp_path / "no.json"), "--density", "x"]) == 2
