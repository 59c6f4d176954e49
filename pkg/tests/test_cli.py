import csv
import io

import pytest

from plkg.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VALIDATION,
    ConfigError,
    ExperimentConfig,
    build_config,
    main,
)
from plkg.nnbp import load_network


def read_table(path):
    """Skip the '#' echo block, return (comments, header, rows)."""
    comments, body = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            (comments if line.startswith("#") else body).append(line)
    rows = list(csv.reader(io.StringIO("".join(body))))
    return comments, rows[0], rows[1:]


class TestConfig:
    def test_defaults(self):
        cfg = build_config(None)
        assert cfg.seed == 1
        assert cfg.params.pilot_snr_db == 14.0
        assert cfg.pilot_snr_db_list[0] == 0.0 and cfg.pilot_snr_db_list[-1] == 30.0

    def test_overlay(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text(
            "pilot_snr_db_list = 6, 14, 26\n"
            "d = 10\n"
            "seed = 9\n"
            "q_mode = analytic\n"
        )
        cfg = build_config(str(p))
        assert cfg.pilot_snr_db_list == [6.0, 14.0, 26.0]
        assert cfg.params.d == 10.0
        assert cfg.seed == 9
        assert cfg.q_mode == "analytic"

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("snr = 10\n")
        with pytest.raises(ConfigError, match="unknown"):
            build_config(str(p))

    def test_non_increasing_list(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("delta_list = 0.2, 0.1\n")
        with pytest.raises(ConfigError, match="increasing"):
            build_config(str(p))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            build_config("/no/such/file.cfg")

    def test_bad_value_type(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("seed = often\n")
        with pytest.raises(ConfigError):
            build_config(str(p))


class TestCommands:
    def _cfg(self, tmp_path, text):
        p = tmp_path / "run.cfg"
        p.write_text(text)
        return str(p)

    def test_kdr_sweep_closed_form(self, tmp_path):
        cfg = self._cfg(tmp_path, "pilot_snr_db_list = 6, 14\ndelta_list = 0, 0.1\n")
        out = str(tmp_path / "kdr.csv")
        assert main(["kdr-sweep", "--config", cfg, "--out", out]) == EXIT_OK
        comments, header, rows = read_table(out)
        assert header[:3] == ["pilot_snr_db", "tau_s", "delta"]
        assert len(rows) == 2 * 2 * 2  # snr x tau x delta
        assert all(r[-1] == "closed-form" for r in rows)
        # KDR decreases with SNR at fixed (tau, delta)
        kdr = {(r[0], r[1], r[2]): float(r[6]) for r in rows}
        assert kdr[("14", "0.01", "0.1")] < kdr[("6", "0.01", "0.1")]
        assert any(line.startswith("# command=kdr-sweep") for line in comments)

    def test_kdr_sweep_with_monte_carlo(self, tmp_path):
        cfg = self._cfg(
            tmp_path,
            "pilot_snr_db_list = 14\ntau_s_list = 0.01\ndelta_list = 0.1\n"
            "n_samples = 50000\n",
        )
        out = str(tmp_path / "kdr_mc.csv")
        assert main(["kdr-sweep", "--config", cfg, "--out", out]) == EXIT_OK
        _, header, rows = read_table(out)
        assert "kdr_mc" in header and "z_max" in header
        z_max = float(rows[0][header.index("z_max")])
        assert z_max < 4.0

    def test_rerun_byte_identical(self, tmp_path):
        cfg = self._cfg(tmp_path, "pilot_snr_db_list = 6, 14\nn_samples = 20000\n")
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        for out in (out1, out2):
            assert main(["kdr-sweep", "--config", cfg, "--seed", "7",
                         "--out", str(out)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_ee_sweep(self, tmp_path):
        cfg = self._cfg(
            tmp_path,
            "a_list = 0.2, 0.4, 0.6, 0.8\nr0_list = 1, 6\n",
        )
        out = str(tmp_path / "ee.csv")
        assert main(["ee-sweep", "--config", cfg, "--out", out]) == EXIT_OK
        _, header, rows = read_table(out)
        i_r0 = header.index("r0")
        i_arg = header.index("is_argmax")
        for r0 in ("1", "6"):
            marks = [r[i_arg] for r in rows if r[i_r0] == r0]
            assert marks.count("1") == 1
        # energy identity holds row-wise
        i_ek, i_ed, i_et = (header.index(k) for k in ("e_key", "e_data", "e_total"))
        for r in rows:
            assert float(r[i_et]) == pytest.approx(
                float(r[i_ek]) + float(r[i_ed]), rel=1e-9
            )

    def test_validate_passes(self, tmp_path):
        cfg = self._cfg(
            tmp_path,
            "pilot_snr_db_list = 14\ntau_s_list = 0.01\ndelta_list = 0.1\n"
            "n_samples = 100000\n",
        )
        out = str(tmp_path / "val.csv")
        assert main(["validate", "--config", cfg, "--out", out]) == EXIT_OK
        _, header, rows = read_table(out)
        assert rows[0][header.index("pass")] == "1"

    def test_validate_fails_with_tight_threshold(self, tmp_path):
        # z_threshold ~ 0: random fluctuation alone must trip the gate
        cfg = self._cfg(
            tmp_path,
            "pilot_snr_db_list = 14\ntau_s_list = 0.01\ndelta_list = 0.1\n"
            "n_samples = 100000\nz_threshold = 0.001\n",
        )
        out = str(tmp_path / "val.csv")
        assert main(["validate", "--config", cfg, "--out", out]) == EXIT_VALIDATION

    def test_mse_sweep(self, tmp_path):
        cfg = self._cfg(
            tmp_path,
            "pilot_snr_db_list = 10\ntrain_len = 8000\neval_len = 2000\n",
        )
        out = str(tmp_path / "mse.csv")
        assert main(["mse-sweep", "--config", cfg, "--out", out]) == EXIT_OK
        _, header, rows = read_table(out)
        raw = float(rows[0][header.index("mse_raw")])
        nn = float(rows[0][header.index("mse_nnbp")])
        assert nn < raw

    def test_esr_sweep(self, tmp_path):
        cfg = self._cfg(
            tmp_path,
            "delta_list = 0, 0.2, 0.4\ntrain_len = 8000\neval_len = 2000\n",
        )
        out = str(tmp_path / "esr.csv")
        assert main(["esr-sweep", "--config", cfg, "--out", out]) == EXIT_OK
        _, header, rows = read_table(out)
        i_d, i_v, i_esr = (header.index(k) for k in ("delta", "variant", "esr"))
        esr_cf = {r[i_d]: float(r[i_esr]) for r in rows if r[i_v] == "gbbq"}
        assert esr_cf["0.4"] < esr_cf["0.2"] < esr_cf["0"]
        assert sum(1 for r in rows if r[i_v] == "gbbq+nnbp") == 3

    def test_nnbp_train(self, tmp_path, capsys):
        cfg = self._cfg(tmp_path, "train_len = 8000\neval_len = 2000\n")
        out = str(tmp_path / "net.txt")
        assert main(["nnbp-train", "--config", cfg, "--out", out]) == EXIT_OK
        net = load_network(out)
        assert net.m == 5 and net.n_hidden == 10
        assert "epochs" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = self._cfg(tmp_path, "whatever = 1\n")
        assert main(["kdr-sweep", "--config", cfg]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = self._cfg(tmp_path, "seed = 3\npilot_snr_db_list = 14\n"
                        "tau_s_list = 0.01\ndelta_list = 0.1\nn_samples = 20000\n")
        out_a = tmp_path / "s3.csv"
        out_b = tmp_path / "s4.csv"
        main(["kdr-sweep", "--config", cfg, "--out", str(out_a)])
        main(["kdr-sweep", "--config", cfg, "--seed", "4", "--out", str(out_b)])
        # same grid, different Monte Carlo draws
        _, header, rows_a = read_table(str(out_a))
        _, _, rows_b = read_table(str(out_b))
        i = header.index("p2_mc")
        assert rows_a[0][i] != rows_b[0][i]
