import json
import os
import subprocess
import sys

import pytest

from torusrgg.cli import main


def run_cli(args, tmp_path, name):
    out = tmp_path / name
    code = main(args + ["--output-dir", str(out)])
    return code, out


class TestCalibrateCommand:
    def test_writes_json_and_manifest(self, tmp_path):
        code, out = run_cli(["calibrate", "--q", "2", "--d", "64", "--p", "0.3",
                             "--budget", "100000"], tmp_path, "a")
        assert code == 0
        res = json.loads((out / "calibrate.json").read_text())
        assert abs(res["achieved_p"] - 0.3) < 0.01
        man = json.loads((out / "manifest.json").read_text())
        assert man["command"] == "calibrate"
        assert "master_seed" in man and "wall_seconds" in man
        assert man["spec"]["q"] == 2

    def test_byte_identical_reruns(self, tmp_path):
        _, out1 = run_cli(["calibrate", "--q", "1", "--d", "32", "--p", "0.4",
                           "--budget", "50000", "--seed", "11"], tmp_path, "r1")
        _, out2 = run_cli(["calibrate", "--q", "1", "--d", "32", "--p", "0.4",
                           "--budget", "50000", "--seed", "11"], tmp_path, "r2")
        assert (out1 / "calibrate.json").read_bytes() \
            == (out2 / "calibrate.json").read_bytes()

    def test_env_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RGG_SEED", "777")
        _, out = run_cli(["calibrate", "--q", "1", "--d", "16", "--p", "0.4",
                          "--budget", "50000", "--seed", "1"], tmp_path, "env")
        man = json.loads((out / "manifest.json").read_text())
        assert man["master_seed"] == 777


class TestConfigFile:
    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"q": 1, "d": 16, "p": 0.4, "budget": 50000}))
        code, out = run_cli(["calibrate", "--config", str(cfg), "--p", "0.2"],
                            tmp_path, "cf")
        assert code == 0
        res = json.loads((out / "calibrate.json").read_text())
        assert res["p"] == 0.2
        assert res["q"] == 1


class TestSampleCommand:
    def test_edge_list_format(self, tmp_path):
        code, out = run_cli(["sample", "--model", "gnp", "--n", "30", "--d", "4",
                             "--p", "0.3", "--norm", "2"], tmp_path, "s")
        assert code == 0
        for line in (out / "edges.txt").read_text().splitlines():
            u, v = map(int, line.split())
            assert 0 <= u < v < 30

    def test_rgg_determinism(self, tmp_path):
        args = ["sample", "--model", "rgg", "--n", "20", "--d", "8", "--p", "0.4",
                "--norm", "2", "--seed", "5", "--tau", "0.9"]
        _, o1 = run_cli(args, tmp_path, "d1")
        _, o2 = run_cli(args, tmp_path, "d2")
        assert (o1 / "edges.txt").read_bytes() == (o2 / "edges.txt").read_bytes()


class TestSpectrumCommand:
    def test_outputs(self, tmp_path):
        code, out = run_cli(["spectrum", "--model", "gnp", "--n", "60", "--d", "8",
                             "--p", "0.5", "--norm", "2"], tmp_path, "sp")
        assert code == 0
        lines = (out / "eigenvalues.csv").read_text().splitlines()
        assert lines[0] == "rank,eigenvalue,n,d,p,norm"
        assert len(lines) == 61
        summary = json.loads((out / "spectrum.json").read_text())
        assert set(summary) == {"lambda1", "lambda2_abs_max", "counts"}


class TestCoreContractCommand:
    def test_round_trip(self, tmp_path):
        edges = tmp_path / "edges.txt"
        edges.write_text("1 2 1\n2 3 1\n3 1 1\n")
        code, out = run_cli(["core-contract", "--input", str(edges)], tmp_path, "cc")
        assert code == 0
        res = json.loads((out / "core.json").read_text())
        assert res["trivial"] and res["s"] == 1
        assert res["counting_identity_holds"]

    def test_missing_input_exits_2(self, tmp_path):
        code = main(["core-contract", "--input", str(tmp_path / "nope.txt"),
                     "--output-dir", str(tmp_path / "x")])
        assert code == 2

    def test_non_eulerian_exits_2(self, tmp_path):
        edges = tmp_path / "path.txt"
        edges.write_text("1 2 1\n2 3 1\n")
        code = main(["core-contract", "--input", str(edges),
                     "--output-dir", str(tmp_path / "y")])
        assert code == 2


class TestMomentsCommand:
    def test_json_shape(self, tmp_path):
        code, out = run_cli(["moments", "--q", "2", "--k", "3",
                             "--d-values", "64,256"], tmp_path, "m")
        assert code == 0
        res = json.loads((out / "moments.json").read_text())
        assert res["gamma_moment"] < 0
        assert res["rho"] < 0
        assert set(res["kappa_d_at"]) == {"64", "256"}


class TestTraceMomentCommand:
    def test_csv_columns(self, tmp_path):
        code, out = run_cli(["trace-moment", "--n", "40", "--p", "0.4",
                             "--norm", "2", "--d-values", "4,16", "--m", "2",
                             "--trials", "5"], tmp_path, "tm")
        assert code == 0
        lines = (out / "trace_moment.csv").read_text().splitlines()
        assert lines[0] == "m,d,mean,stderr,regime_prediction"
        assert len(lines) == 3


class TestSweepPowerCommand:
    def test_csv_columns(self, tmp_path):
        code, out = run_cli(["sweep-power", "--n", "40", "--p", "0.5",
                             "--norm", "2", "--d-values", "8", "--trials", "50",
                             "--calibration-method", "gaussian"], tmp_path, "pw")
        assert code == 0
        lines = (out / "sweep_power.csv").read_text().splitlines()
        assert lines[0] == ("norm,q,n,d,p,trials,statistic_mean,statistic_stderr,"
                            "power,fpr,seed")
        assert len(lines) == 2


class TestTvBoundCommand:
    def test_json_output(self, tmp_path):
        code, out = run_cli(["tv-bound", "--n", "30", "--d", "64", "--p", "0.3",
                             "--norm", "2", "--k-max", "3", "--trials", "120",
                             "--inner-budget", "1500"], tmp_path, "tv")
        assert code == 0
        res = json.loads((out / "tv_bound.json").read_text())
        assert [t["j"] for t in res["terms"]] == [2, 3]


class TestArcVectorsCommand:
    def test_outputs(self, tmp_path):
        code, out = run_cli(["arc-vectors", "--n", "200", "--d", "4", "--p", "0.5",
                             "--norm", "inf"], tmp_path, "av")
        assert code == 0
        lines = (out / "arc_rayleigh.csv").read_text().splitlines()
        assert lines[0] == "vector,dimension,rayleigh"
        summary = json.loads((out / "arc_summary.json").read_text())
        assert "gram_offdiag_max" in summary


class TestExitCodes:
    def test_unknown_command_via_subprocess(self):
        proc = subprocess.run([sys.executable, "-m", "torusrgg.cli", "nonsense"],
                              capture_output=True)
        assert proc.returncode == 2

    def test_invalid_model_spec(self, tmp_path):
        code = main(["sample", "--model", "rgg", "--n", "1", "--d", "4",
                     "--p", "0.5", "--norm", "2",
                     "--output-dir", str(tmp_path / "bad")])
        assert code == 2

    def test_stdout_mirror(self, tmp_path, capsys):
        main(["calibrate", "--q", "1", "--d", "8", "--p", "0.5",
              "--budget", "20000", "--stdout", "--output-dir",
              str(tmp_path / "so")])
        captured = capsys.readouterr()
        assert json.loads(captured.out.strip())["q"] == 1
