import json

import numpy as np
import pytest

import owclb
from owclb.cli import main, read_table

from conftest import build_reference_chain


@pytest.fixture
def channel_path(tmp_path):
    path = tmp_path / "channel.json"
    owclb.save_chain(build_reference_chain(), path)
    return str(path)


def run_cli(*argv) -> int:
    return main(list(argv))


class TestGnrEval:
    def test_writes_readable_csv(self, channel_path, tmp_path):
        out = tmp_path / "gnr.csv"
        assert run_cli("gnr-eval", "--channel", channel_path, "--out", str(out)) == 0
        header, rows = read_table(out)
        assert header == ["f_hz", "gain_magsq", "noise_psd_v2_per_hz", "gnr_linear"]
        np.testing.assert_allclose(rows[:, 3], rows[:, 1] / rows[:, 2], rtol=1e-12)
        assert rows[0, 3] == pytest.approx(4.602e10, rel=1e-3)

    def test_custom_sweep(self, channel_path, tmp_path):
        out = tmp_path / "gnr.csv"
        assert (
            run_cli(
                "gnr-eval", "--channel", channel_path, "--out", str(out),
                "--sweep", "fmax:1e6:1e8:11:log",
            )
            == 0
        )
        _, rows = read_table(out)
        assert rows.shape[0] == 11
        assert rows[0, 0] == 1e6 and rows[-1, 0] == pytest.approx(1e8)


class TestRateCurve:
    def test_fmax_sweep_is_monotone(self, channel_path, tmp_path):
        out = tmp_path / "rate.csv"
        assert (
            run_cli(
                "rate-curve", "--channel", channel_path, "--gamma-db", "6.06",
                "--sweep", "fmax:1e6:2e8:25:log", "--out", str(out),
            )
            == 0
        )
        header, rows = read_table(out)
        assert header == ["f_max_hz", "rate_mbit_s"]
        assert np.all(np.diff(rows[:, 1]) > 0.0)

    def test_power_sweep_columns_and_ordering(self, channel_path, tmp_path):
        out = tmp_path / "rp.csv"
        assert (
            run_cli(
                "rate-curve", "--channel", channel_path, "--gamma-db", "6.06",
                "--sweep", "power:1e4:1e9:6:log", "--k", "64", "--fchip", "2e8",
                "--out", str(out),
            )
            == 0
        )
        header, rows = read_table(out)
        assert header == [
            "sigma2_v2",
            "rate_newton_mbit_s",
            "rate_hh_mbit_s",
            "rate_flat_mbit_s",
        ]
        assert np.all(np.diff(rows[:, 1]) >= 0.0)
        # optimized spectra beat the flat baseline once power is plentiful
        assert rows[-1, 1] > rows[-1, 3]
        assert rows[-1, 2] > rows[-1, 3]


class TestOptimize:
    def test_newton_solution_round_trips(self, channel_path, tmp_path):
        out = tmp_path / "wf.csv"
        assert (
            run_cli(
                "optimize-newton", "--channel", channel_path, "--gamma-db", "6.06",
                "--budget", "3.5e7", "--k", "64", "--fchip", "2e8", "--out", str(out),
            )
            == 0
        )
        sol = owclb.read_solution_csv(out)
        assert sol.sigma2 <= 3.5e7
        assert sol.f_max > 0

    def test_hh_zero_budget_all_zero_exit_0(self, channel_path, tmp_path):
        out = tmp_path / "hh.csv"
        assert (
            run_cli(
                "optimize-hh", "--channel", channel_path, "--gamma-db", "6.06",
                "--budget", "0", "--k", "16", "--fchip", "2e8", "--out", str(out),
            )
            == 0
        )
        plan = owclb.read_plan_csv(out)
        assert plan["bits"].tolist() == [0] * 16
        assert plan["rate_bit_s"] == 0.0

    def test_hh_naive_flag(self, channel_path, tmp_path):
        out = tmp_path / "hh.csv"
        assert (
            run_cli(
                "optimize-hh", "--channel", channel_path, "--gamma-db", "6.06",
                "--budget", "1e7", "--k", "32", "--fchip", "2e8", "--naive",
                "--out", str(out),
            )
            == 0
        )
        assert owclb.read_plan_csv(out)["algorithm"] == "hh_naive"


class TestCompare:
    def test_savings_positive(self, channel_path, tmp_path):
        out = tmp_path / "cmp.csv"
        assert (
            run_cli(
                "compare", "--channel", channel_path, "--gamma-db", "6.06",
                "--budget", "1e7", "--k", "512", "--fchip", "2e8", "--out", str(out),
            )
            == 0
        )
        header, rows = read_table(out)
        saved = rows[0, header.index("flops_saved")]
        assert saved > 0
        assert rows[0, header.index("naive_flops")] > rows[0, header.index("accel_flops")]


class TestFitCommand:
    def test_fit_writes_loadable_fragment(self, tmp_path):
        model = owclb.MagSqPoleZeroGnr(gnr0=1e4, zeros=(3e7,), poles=(2e6, 8e6))
        freqs = np.geomspace(1e4, 1e9, 120)
        table = owclb.ResponseTable(frequencies=freqs, values=model.evaluate(freqs))
        table_path = tmp_path / "meas.csv"
        owclb.write_response_table(table, table_path)
        out = tmp_path / "fit.json"
        assert (
            run_cli(
                "fit", "--channel", str(table_path), "--zeros", "1", "--poles", "2",
                "--seed", "4", "--out", str(out),
            )
            == 0
        )
        chain = owclb.chain_from_dict(json.loads(out.read_text()))
        back = owclb.reduce_to_polezero(chain)
        assert back.poles == pytest.approx(model.poles, rel=1e-3)

    def test_fit_db_input(self, tmp_path):
        model = owclb.MagSqPoleZeroGnr(gnr0=50.0, poles=(5e6,))
        freqs = np.geomspace(1e4, 1e9, 80)
        db_vals = 10.0 * np.log10(model.evaluate(freqs))
        table_path = tmp_path / "meas_db.csv"
        table_path.write_text(
            "frequency_hz,value\n"
            + "\n".join(f"{repr(float(f))},{repr(float(v))}" for f, v in zip(freqs, db_vals))
            + "\n"
        )
        out = tmp_path / "fit.json"
        assert (
            run_cli(
                "fit", "--channel", str(table_path), "--zeros", "0", "--poles", "1",
                "--db", "--out", str(out),
            )
            == 0
        )
        back = owclb.reduce_to_polezero(owclb.chain_from_dict(json.loads(out.read_text())))
        assert back.poles[0] == pytest.approx(5e6, rel=1e-3)
        assert back.gnr0 == pytest.approx(50.0, rel=1e-3)

    def test_scan_orders_runs(self, tmp_path, capsys):
        model = owclb.MagSqPoleZeroGnr(gnr0=5.0, poles=(4e6, 60e6))
        freqs = np.geomspace(1e4, 1e9, 100)
        table = owclb.ResponseTable(frequencies=freqs, values=model.evaluate(freqs))
        table_path = tmp_path / "meas.csv"
        owclb.write_response_table(table, table_path)
        assert (
            run_cli(
                "fit", "--channel", str(table_path), "--zeros", "1", "--poles", "2",
                "--scan-orders",
            )
            == 0
        )
        printed = capsys.readouterr().out
        assert "order M=0 N=2" in printed


class TestValidationAndDeterminism:
    def test_missing_channel_names_field(self, capsys):
        assert run_cli("gnr-eval", "--channel", "/nope/missing.json") == 2
        assert "channel" in capsys.readouterr().err

    def test_negative_gamma_names_field(self, channel_path, capsys):
        rc = run_cli(
            "rate-curve", "--channel", channel_path, "--gamma-db", "-1",
            "--sweep", "fmax:1e6:1e8:5",
        )
        assert rc == 2
        assert "gamma_db" in capsys.readouterr().err

    def test_descending_sweep_rejected(self, channel_path, capsys):
        rc = run_cli(
            "rate-curve", "--channel", channel_path, "--sweep", "fmax:1e8:1e6:5"
        )
        assert rc == 2
        assert "sweep" in capsys.readouterr().err

    def test_missing_budget_named(self, channel_path, capsys):
        rc = run_cli(
            "optimize-newton", "--channel", channel_path, "--gamma-db", "6.06",
            "--k", "64", "--fchip", "2e8",
        )
        assert rc == 2
        assert "budget" in capsys.readouterr().err

    def test_non_reducible_channel_fails_cleanly(self, tmp_path, capsys):
        chain = owclb.LinkChain(
            stages=(owclb.GaussianLowPass(dc_gain=1.0, corner=1e9),),
            noise=owclb.NoiseSpectrum(floor=1e-17),
        )
        path = tmp_path / "gauss.json"
        owclb.save_chain(chain, path)
        rc = run_cli(
            "rate-curve", "--channel", str(path), "--sweep", "fmax:1e6:1e8:5"
        )
        assert rc == 1
        assert "fit" in capsys.readouterr().err

    def test_byte_identical_reruns(self, channel_path, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        for out in (out1, out2):
            assert (
                run_cli(
                    "rate-curve", "--channel", channel_path, "--gamma-db", "6.06",
                    "--sweep", "power:1e4:1e8:5:log", "--k", "32", "--fchip", "2e8",
                    "--out", str(out),
                )
                == 0
            )
        assert out1.read_bytes() == out2.read_bytes()

    def test_stdout_csv_is_clean(self, channel_path, capsys):
        assert run_cli("gnr-eval", "--channel", channel_path, "--sweep", "fmax:1e6:1e8:5:log") == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "f_hz,gain_magsq,noise_psd_v2_per_hz,gnr_linear"
        assert len(lines) == 6

    def test_log_env_var_accepted(self, channel_path, tmp_path, monkeypatch):
        monkeypatch.setenv("OWCLB_LOG", "debug")
        out = tmp_path / "gnr.csv"
        assert run_cli("gnr-eval", "--channel", channel_path, "--out", str(out)) == 0

    def test_fit_reruns_byte_identical(self, tmp_path):
        model = owclb.MagSqPoleZeroGnr(gnr0=9.0, poles=(3e6, 50e6))
        freqs = np.geomspace(1e4, 1e9, 90)
        table = owclb.ResponseTable(frequencies=freqs, values=model.evaluate(freqs))
        table_path = tmp_path / "meas.csv"
        owclb.write_response_table(table, table_path)
        outs = []
        for name in ("f1.json", "f2.json"):
            out = tmp_path / name
            assert (
                run_cli(
                    "fit", "--channel", str(table_path), "--zeros", "0", "--poles", "2",
                    "--seed", "12", "--out", str(out),
                )
                == 0
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
