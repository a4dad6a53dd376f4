import json
import subprocess
import sys

import numpy as np
import pytest

from convect_uq.cli import main
from convect_uq.pce import fit_surrogate, save_pce
from convect_uq.sampling import tensor_grid

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# conduction at a modest Ra settles in tens of steps, tight enough for
# the verify study to look fully converged
CONDUCTION = """\
[grid]
n = 8
sizes = 8, 12, 16
[solver]
ra = 1e4
buoyancy = false
steady_tol = 1e-8
[boundary]
[case_a]
[case_b]
[pce]
[dnn]
[output]
directory = out
"""

CASE_A = """\
[grid]
n = 8
[solver]
steady_tol = 1e-5
[boundary]
[case_a]
n_test = 3
mc_samples = 400
[case_b]
[pce]
level = 2
order = 1
[dnn]
[output]
case = a
"""

# 8^3 at Ra=1e6 needs the smaller CFL number to stay stable
CASE_B = """\
[grid]
n = 8
[solver]
steady_tol = 1e-4
cfl_target = 0.35
[boundary]
[case_a]
[case_b]
n_train = 6
n_val = 2
n_test = 2
mc_samples = 300
[pce]
[dnn]
epochs = 60
[output]
case = b
"""


@pytest.fixture
def cli(capsys):
    def run(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestArgumentHandling:
    def test_usage_errors_exit_1(self, cli):
        code, _, err = cli("frobnicate")
        assert code == 1 and "error:" in err
        code, _, err = cli("simulate")  # --config is required
        assert code == 1 and "config" in err

    def test_missing_config_file_exit_1(self, cli, tmp_path):
        code, _, err = cli("simulate", "--config", str(tmp_path / "no.ini"))
        assert code == 1 and "cannot read" in err

    def test_help_lists_config_keys(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for token in ("[solver]", "steady_tol", "mc_samples", "figures"):
            assert token in out

    def test_bad_log_env_exit_1(self, cli, tmp_path, monkeypatch):
        monkeypatch.setenv("CONVECT_UQ_LOG", "loud")
        code, _, err = cli(
            "simulate", "--config", write_config(tmp_path, CONDUCTION)
        )
        assert code == 1 and "CONVECT_UQ_LOG" in err

    def test_missing_section_exit_1(self, cli, tmp_path):
        text = CONDUCTION.replace("[solver]\nra = 1e4\nbuoyancy = false\n", "")
        text = text.replace("steady_tol = 1e-8\n", "")
        code, _, err = cli(
            "simulate", "--config", write_config(tmp_path, text)
        )
        assert code == 1 and "[solver]" in err

    def test_unknown_key_reports_line(self, cli, tmp_path):
        text = CONDUCTION.replace("[pce]", "[pce]\nsparse = yes")
        code, _, err = cli(
            "simulate", "--config", write_config(tmp_path, text)
        )
        assert code == 1
        line = text.splitlines().index("sparse = yes") + 1
        assert f":{line}:" in err and "sparse" in err

    def test_bad_workers_flag_exit_1(self, cli, tmp_path):
        code, _, err = cli(
            "simulate", "--config", write_config(tmp_path, CONDUCTION),
            "--workers", "0",
        )
        assert code == 1 and "workers" in err


class TestSimulate:
    def test_conduction_unit_nusselt(self, cli, tmp_path, monkeypatch):
        monkeypatch.setenv("CONVECT_UQ_LOG", "debug")
        out_dir = tmp_path / "sim"
        code, out, _ = cli(
            "simulate", "--config", write_config(tmp_path, CONDUCTION),
            "--out-dir", str(out_dir),
        )
        assert code == 0
        assert "mean Nu 1.000" in out and "steps" in out
        for name in ("nu", "theta", "u", "v"):
            assert (out_dir / f"{name}.csv").is_file()
            png = out_dir / "figures" / f"{name}.png"
            assert png.read_bytes().startswith(PNG_MAGIC)
        assert (out_dir / "residual_history.csv").is_file()
        summary = json.loads((out_dir / "summary.json").read_text())
        assert abs(summary["mean_nu"] - 1.0) < 1e-3

    def test_out_dir_defaults_to_config_value(self, cli, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, _, _ = cli(
            "simulate", "--config", write_config(tmp_path, CONDUCTION)
        )
        assert code == 0
        assert (tmp_path / "out" / "summary.json").is_file()

    def test_nonconvergence_exit_2(self, cli, tmp_path):
        text = CONDUCTION.replace(
            "steady_tol = 1e-8", "steady_tol = 1e-12\nmax_steps = 1"
        )
        code, _, err = cli(
            "simulate", "--config", write_config(tmp_path, text),
            "--out-dir", str(tmp_path / "sim"),
        )
        assert code == 2 and "steady" in err

    def test_rerun_is_byte_identical(self, cli, tmp_path):
        cfg = write_config(tmp_path, CONDUCTION)
        dirs = (tmp_path / "one", tmp_path / "two")
        for d in dirs:
            assert cli("simulate", "--config", cfg, "--out-dir", str(d))[0] == 0
        files = sorted(p.relative_to(dirs[0])
                       for p in dirs[0].rglob("*") if p.is_file())
        assert files  # includes the PNGs
        for rel in files:
            assert (dirs[0] / rel).read_bytes() == (dirs[1] / rel).read_bytes()


class TestVerify:
    def test_conduction_grid_study_prints_exact(self, cli, tmp_path):
        out_dir = tmp_path / "ver"
        code, out, _ = cli(
            "verify", "--config", write_config(tmp_path, CONDUCTION),
            "--out-dir", str(out_dir),
        )
        assert code == 0
        assert out.count("mean Nu") == 3
        assert "exact" in out
        for n in (8, 12, 16):
            assert (out_dir / f"centerline_x_n{n}.csv").is_file()
            assert (out_dir / f"centerline_y_n{n}.csv").is_file()
        summary = json.loads((out_dir / "summary.json").read_text())
        assert abs(summary["richardson"] - 1.0) < 1e-3
        assert summary["observed_order"] is None
        for stem in ("centerline_theta_x", "centerline_v_x", "centerline_u_y"):
            assert (out_dir / "figures" / f"{stem}.png").is_file()

    def test_single_size_exit_1(self, cli, tmp_path):
        text = CONDUCTION.replace("sizes = 8, 12, 16", "sizes = 16")
        code, _, err = cli(
            "verify", "--config", write_config(tmp_path, text),
            "--out-dir", str(tmp_path / "ver"),
        )
        assert code == 1 and "three" in err


class TestCaseAStages:
    def test_stage_chain(self, cli, tmp_path):
        cfg = write_config(tmp_path, CASE_A)
        out = str(tmp_path / "study")

        code, _, err = cli("fit-pce", "--config", cfg, "--out-dir", out)
        assert code == 3 and "manifest.csv" in err and "ensemble" in err

        code, table, _ = cli("ensemble", "--config", cfg, "--out-dir", out)
        assert code == 0
        assert "ensemble" in table and "test" in table
        assert (tmp_path / "study" / "ensemble" / "manifest.csv").is_file()
        assert (tmp_path / "study" / "test" / "manifest.csv").is_file()

        code, report_out, _ = cli("fit-pce", "--config", cfg, "--out-dir", out)
        assert code == 0
        assert "fit residual" in report_out and "test error" in report_out
        for key in ("nu", "theta", "u", "v", "scalars"):
            assert (tmp_path / "study" / "models" / f"{key}.pce").is_file()
        assert (tmp_path / "study" / "response_surface_nu_mean.csv").is_file()
        assert (tmp_path / "study" / "figures"
                / "response_surface_nu_mean.png").is_file()
        summary = json.loads((tmp_path / "study" / "summary.json").read_text())
        assert summary["n_samples"] == 4 and summary["test_error"] > 0

        code, sobol_out, _ = cli("sobol", "--config", cfg, "--out-dir", out)
        assert code == 0
        assert "nu_mean: S1_T=" in sobol_out
        header = (tmp_path / "study" / "sobol.csv").read_text().splitlines()[0]
        assert header == "output,ra_total,pr_total"

        code, prop_out, _ = cli("propagate", "--config", cfg, "--out-dir", out)
        assert code == 0
        assert "shift of mean %" in prop_out
        stats = tmp_path / "study" / "stats"
        assert len(list(stats.glob("*.csv"))) == 20
        assert len(list(stats.glob("*_summary.json"))) == 4
        assert len(list((stats / "figures").glob("*.png"))) == 20

    def test_sobol_before_fit_exit_3(self, cli, tmp_path):
        code, _, err = cli(
            "sobol", "--config", write_config(tmp_path, CASE_A),
            "--out-dir", str(tmp_path / "empty"),
        )
        assert code == 3 and "scalars.pce" in err

    def test_sobol_fixture_total_indices(self, cli, tmp_path):
        # f = xi1 + xi1*xi2 has total indices 1.0 and 0.5 exactly
        pts = tensor_grid(4, [0.0, 0.0], [1.0, 1.0])
        f = pts[:, 0] + pts[:, 0] * pts[:, 1]
        model = fit_surrogate(pts, f[:, None], [0.0, 0.0], [1.0, 1.0], 2)
        out_dir = tmp_path / "fixture"
        (out_dir / "models").mkdir(parents=True)
        save_pce(out_dir / "models" / "scalars.pce", model)
        code, out, _ = cli(
            "sobol", "--config", write_config(tmp_path, CASE_A),
            "--out-dir", str(out_dir),
        )
        assert code == 0
        assert "S1_T=1.00" in out and "S2_T=0.50" in out

    def test_propagate_with_two_samples(self, cli, tmp_path):
        # n=2 is the smallest legal Monte Carlo run (std uses n-1=1)
        text = CASE_A.replace("n_test = 3", "n_test = 0")
        text = text.replace("mc_samples = 400", "mc_samples = 2")
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "tiny")
        assert cli("ensemble", "--config", cfg, "--out-dir", out)[0] == 0
        assert not (tmp_path / "tiny" / "test").exists()  # n_test=0 skips it
        assert cli("fit-pce", "--config", cfg, "--out-dir", out)[0] == 0
        code, _, _ = cli("propagate", "--config", cfg, "--out-dir", out)
        assert code == 0
        summary = json.loads(
            (tmp_path / "tiny" / "stats" / "nu_summary.json").read_text()
        )
        assert np.isfinite(summary["max_std"])

    def test_seed_override_flows_into_design(self, cli, tmp_path):
        text = CASE_A.replace("n_test = 3", "n_test = 0")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "seeded"
        code, _, _ = cli("ensemble", "--config", cfg, "--out-dir", str(out),
                         "--seed-override", "5")
        assert code == 0
        meta = (out / "ensemble" / "manifest.csv").read_text().splitlines()[0]
        assert meta.startswith("# seed=5 ")

    def test_worker_pool_matches_serial(self, cli, tmp_path):
        text = CASE_A.replace("n_test = 3", "n_test = 0")
        cfg = write_config(tmp_path, text)
        dirs = (tmp_path / "serial", tmp_path / "pooled")
        assert cli("ensemble", "--config", cfg, "--out-dir", str(dirs[0]))[0] == 0
        assert cli("ensemble", "--config", cfg, "--out-dir", str(dirs[1]),
                   "--workers", "2")[0] == 0
        files = sorted(p.relative_to(dirs[0])
                       for p in dirs[0].rglob("*") if p.is_file())
        for rel in files:
            assert (dirs[0] / rel).read_bytes() == (dirs[1] / rel).read_bytes()


class TestCaseBStages:
    def test_stage_chain(self, cli, tmp_path):
        cfg = write_config(tmp_path, CASE_B)
        out = str(tmp_path / "strips")

        code, _, err = cli("train-dnn", "--config", cfg, "--out-dir", out)
        assert code == 3 and "train" in err and "manifest.csv" in err

        code, table, _ = cli("ensemble", "--config", cfg, "--out-dir", out)
        assert code == 0
        for name in ("train", "val", "test"):
            assert name in table
            assert (tmp_path / "strips" / name / "manifest.csv").is_file()

        code, train_out, _ = cli("train-dnn", "--config", cfg, "--out-dir", out)
        assert code == 0
        assert "train %" in train_out and "test %" in train_out
        for key in ("nu", "theta", "u", "v"):
            assert (tmp_path / "strips" / "models" / f"{key}.mlp").is_file()
            assert (tmp_path / "strips"
                    / f"training_history_{key}.csv").is_file()
            assert (tmp_path / "strips" / "figures"
                    / f"training_history_{key}.png").is_file()
        table = json.loads(
            (tmp_path / "strips" / "error_table.json").read_text()
        )
        assert table["scale"] == "desk"

        code, prop_out, _ = cli("propagate", "--config", cfg, "--out-dir", out)
        assert code == 0
        assert "shift of mean %" in prop_out
        stats = tmp_path / "strips" / "stats"
        assert len(list(stats.glob("*.csv"))) == 20
        assert len(list((stats / "figures").glob("*.png"))) == 20

    def test_wrong_case_exit_1(self, cli, tmp_path):
        code, _, err = cli(
            "train-dnn", "--config", write_config(tmp_path, CASE_A),
            "--out-dir", str(tmp_path / "x"),
        )
        assert code == 1 and "case = b" in err
        code, _, err = cli(
            "fit-pce", "--config", write_config(tmp_path, CASE_B),
            "--out-dir", str(tmp_path / "y"),
        )
        assert code == 1 and "case = a" in err


class TestModuleEntryPoint:
    def test_python_m_usage_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "convect_uq"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert "error:" in proc.stderr
