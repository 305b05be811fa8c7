import json
import math
from pathlib import Path

import pytest

from qlab.cli import main
from qlab.sweep import (
    SweepConfigError,
    format_number,
    parse_config,
    read_csv_rows,
)

DATA_DIR = Path(__file__).parent / "data"


def run_cli(*argv) -> int:
    return main(list(argv))


MODEL_FLAGS = ["--ell", "1", "--kappa", "2", "--sigma", "2", "--q", "0.25", "--theta", "1"]


class TestExact:
    def test_hand_derived_value(self, capsys):
        assert run_cli("exact", "--m", "2", *MODEL_FLAGS) == 0
        out = capsys.readouterr().out
        assert "e_tau0 = 10.4" in out

    def test_m1(self, capsys):
        assert run_cli("exact", "--m", "1", *MODEL_FLAGS, "--format", "json") == 0
        record = json.loads(capsys.readouterr().out)
        assert record["e_tau0"] == pytest.approx(4.0, rel=1e-12)
        assert record["params"]["m"] == 1 and record["params"]["q"] == 0.25

    def test_zero_mutation_reports_inf(self, capsys):
        argv = ["exact", "--m", "2", "--ell", "1", "--kappa", "2", "--sigma", "2",
                "--q", "0", "--theta", "1", "--format", "json"]
        assert run_cli(*argv) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["log_e_tau0"] == "inf"
        assert "e_tau0" not in record

    def test_invalid_domain_exits_3(self, capsys):
        argv = ["exact", "--m", "2", "--ell", "1", "--kappa", "2", "--sigma", "0.5",
                "--q", "0.25", "--theta", "1"]
        assert run_cli(*argv) == 3
        assert "sigma" in capsys.readouterr().err

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as info:
            run_cli("exact", "--m", "2")
        assert info.value.code == 2


class TestThreshold:
    def test_worked_numbers(self, capsys):
        assert run_cli("threshold", "--sigma", "2", "--kappa", "2",
                       "--ell", "400", "--m", "10000", "--format", "json") == 0
        record = json.loads(capsys.readouterr().out)
        assert record["q_star"] == pytest.approx(0.00114416, abs=1e-6)
        assert record["c_star"] == pytest.approx(1.1774100, abs=1e-6)

    def test_no_threshold_exit_code(self, capsys):
        code = run_cli("threshold", "--sigma", "2.718281828", "--kappa", "2", "--alpha", "0.5")
        assert code == 4
        assert "no_threshold" in capsys.readouterr().out

    def test_alpha_survival_target(self, capsys):
        assert run_cli("threshold", "--sigma", "2", "--kappa", "2",
                       "--alpha", "1e9", "--format", "json") == 0
        record = json.loads(capsys.readouterr().out)
        assert record["survival_target"] == pytest.approx(0.5, abs=1e-4)

    def test_rejects_mixed_modes(self, capsys):
        assert run_cli("threshold", "--sigma", "2", "--kappa", "2",
                       "--alpha", "2", "--ell", "10") == 3
        assert run_cli("threshold", "--sigma", "2", "--kappa", "2", "--ell", "10") == 3


class TestSimulate:
    def test_byte_identical_outputs(self, tmp_path):
        argv = ["simulate", "--model", "lumped", "--m", "2", *MODEL_FLAGS,
                "--runs", "500", "--seed", "11"]
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(*argv, "--output", str(first)) == 0
        assert run_cli(*argv, "--output", str(second)) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_full_model_with_plot(self, tmp_path, capsys):
        png = tmp_path / "hist.png"
        argv = ["simulate", "--model", "full", "--m", "5", "--ell", "2", "--kappa", "2",
                "--sigma", "1.5", "--q", "0.1", "--runs", "200", "--seed", "3",
                "--format", "json", "--plot", str(png)]
        assert run_cli(*argv) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["n_uncensored"] + record["censored"] == 200
        assert png.exists() and png.stat().st_size > 0


class TestAudit:
    def test_golden_row(self, tmp_path):
        out = tmp_path / "audit.csv"
        argv = ["audit", "--m", "500", "--ell", "25", "--kappa", "2", "--sigma", "2",
                "--q", "0.02", "--theta", "25", "--output", str(out)]
        assert run_cli(*argv) == 0
        golden = read_csv_rows(DATA_DIR / "audit_golden.csv")
        fresh = read_csv_rows(out)
        assert len(fresh) == len(golden) == 1
        assert set(fresh[0]) == set(golden[0])
        for key, expected in golden[0].items():
            if isinstance(expected, float):
                assert fresh[0][key] == pytest.approx(expected, rel=1e-9), key
            else:
                assert fresh[0][key] == expected, key

    def test_skipped_row_at_zero_mutation(self, capsys):
        argv = ["audit", "--m", "20", "--ell", "5", "--kappa", "2", "--sigma", "2",
                "--q", "0", "--theta", "1", "--format", "json"]
        assert run_cli(*argv) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["skipped"] is True
        assert record["ln_exact"] == "inf"


class TestSweepConfig:
    def test_lists_and_ranges(self):
        config = parse_config(
            "m = 10\nm = 20\nell = 5\nq = linspace:0.1:0.3:3\nsigma = 2\n"
            "theta = 1\nseed = 4\nformat = json\n"
        )
        assert config.m == [10, 20]
        assert config.q == pytest.approx([0.1, 0.2, 0.3])
        assert config.seed == 4 and config.format == "json"

    def test_logspace(self):
        config = parse_config("m = 10\nell = 4\nq = logspace:1e-4:1e-2:3\n")
        assert config.q == pytest.approx([1e-4, 1e-3, 1e-2])

    def test_error_reports_line_and_field(self):
        with pytest.raises(SweepConfigError, match="line 2"):
            parse_config("m = 10\nq = banana\nell = 4\n")
        with pytest.raises(SweepConfigError, match="wibble"):
            parse_config("wibble = 3\n")
        with pytest.raises(SweepConfigError, match="ell"):
            parse_config("m = 5\nq = 0.1\n")

    def test_format_number_round_trips(self):
        for value in (0.1, 1 / 3, 1e-300, 123456789.123456789, math.pi):
            assert float(format_number(value)) == value
        assert format_number(math.inf) == "inf"
        assert format_number(-math.inf) == "-inf"
        assert format_number(math.nan) == "nan"


class TestSweepCommand:
    def write_config(self, tmp_path, text) -> str:
        path = tmp_path / "sweep.cfg"
        path.write_text(text)
        return str(path)

    def test_offset_sweep_emits_main_terms_and_phase(self, tmp_path):
        config = self.write_config(
            tmp_path,
            "sigma = 2\nkappa = 2\nell = 50\nm = 400\ntheta = 1\n"
            "q_rule = threshold_offset\nc = 0.8\nc = 1.0\nc = 1.2\nc = 1.4\n",
        )
        out = tmp_path / "rows.csv"
        assert run_cli("sweep", "--config", config, "--output", str(out)) == 0
        rows = read_csv_rows(out)
        assert len(rows) == 4
        for needed in ("log_persistence_main", "log_discovery", "phase_by_offset", "c_star"):
            assert needed in rows[0]
        assert rows[0]["phase_by_offset"] == "neutral"  # c = 0.8
        assert rows[-1]["phase_by_offset"] == "quasispecies"  # c = 1.4
        assert rows[-1]["phase_by_times"] == "quasispecies"

    def test_empty_range_gives_header_only(self, tmp_path, capsys):
        config = self.write_config(
            tmp_path, "sigma = 2\nkappa = 2\nell = 5\nm = 0\nq = 0.1\ntheta = 1\n"
        )
        out = tmp_path / "rows.csv"
        assert run_cli("sweep", "--config", config, "--output", str(out)) == 0
        content = out.read_text()
        lines = content.splitlines()
        assert len(lines) == 1 and lines[0].startswith("index,")

    def test_csv_round_trip_exact(self, tmp_path):
        config = self.write_config(
            tmp_path,
            "sigma = 2\nkappa = 2\nell = 7\nm = 13\nq = 0.0314159\ntheta = 1\nexact = true\n",
        )
        out = tmp_path / "rows.csv"
        assert run_cli("sweep", "--config", config, "--output", str(out)) == 0
        row = read_csv_rows(out)[0]
        from qlab.chain import log_expected_persistence_time, transition_probabilities
        from qlab.model import ModelParams

        params = ModelParams(m=13, ell=7, kappa=2, sigma=2.0, q=0.0314159, theta=1)
        assert row["log_e_tau0"] == log_expected_persistence_time(
            transition_probabilities(params)
        )
        assert row["q"] == 0.0314159

    def test_byte_identical_and_thread_independent(self, tmp_path, monkeypatch):
        config = self.write_config(
            tmp_path,
            "sigma = 2\nkappa = 2\nell = 4\nm = 5\nm = 9\nq = 0.1\nq = 0.2\n"
            "theta = 1\nsimulate = 300\nseed = 12\n",
        )
        paths = [tmp_path / name for name in ("t1.csv", "t4.csv", "again.csv")]
        for threads, path in zip(("1", "4", "4"), paths):
            monkeypatch.setenv("QLAB_THREADS", threads)
            assert run_cli("sweep", "--config", config, "--output", str(path)) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        config = self.write_config(tmp_path, "m = 5\nell = 3\nq = oops\n")
        assert run_cli("sweep", "--config", config) == 2
        assert "line 3" in capsys.readouterr().err

    def test_alpha_coupling_rule(self, tmp_path):
        config = self.write_config(
            tmp_path,
            "sigma = 2\nkappa = 2\nell = 40\nell = 80\nq = 0.005\ntheta = 1\n"
            "m_rule = alpha_times_ell\nalpha = 2\nalpha = 4\n",
        )
        out = tmp_path / "rows.csv"
        assert run_cli("sweep", "--config", config, "--output", str(out)) == 0
        rows = read_csv_rows(out)
        assert [(row["m"], row["ell"], row["alpha"]) for row in rows] == [
            (80.0, 40.0, 2.0), (160.0, 40.0, 4.0), (160.0, 80.0, 2.0), (320.0, 80.0, 4.0),
        ]

    def test_json_lines_output(self, tmp_path):
        config = self.write_config(
            tmp_path,
            "sigma = 2\nkappa = 2\nell = 4\nm = 6\nq = 0.1\ntheta = 1\nformat = json\n",
        )
        out = tmp_path / "rows.jsonl"
        assert run_cli("sweep", "--config", config, "--output", str(out)) == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(records) == 1 and records[0]["m"] == 6


class TestPhaseDiagram:
    def test_preset_writes_rows_and_figure(self, tmp_path):
        out = tmp_path / "phase.csv"
        argv = ["phase-diagram", "--sigma", "2", "--kappa", "2", "--ell", "100",
                "--m", "2500", "--c-min", "0.8", "--c-max", "1.6", "--c-steps", "5",
                "--output", str(out), "--plot"]
        assert run_cli(*argv) == 0
        rows = read_csv_rows(out)
        assert len(rows) == 5
        assert {row["phase_by_offset"] for row in rows} == {"neutral", "quasispecies"}
        figure = tmp_path / "phase.png"
        assert figure.exists() and figure.stat().st_size > 0

    def test_plot_without_output_needs_path(self, capsys):
        argv = ["phase-diagram", "--sigma", "2", "--kappa", "2", "--ell", "10",
                "--m", "100", "--c-steps", "2", "--plot"]
        assert run_cli(*argv) == 3
        assert "--plot" in capsys.readouterr().err
