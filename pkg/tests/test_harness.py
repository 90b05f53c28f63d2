import csv
import io
import math

import pytest

from dpglm.harness import (
    RESULT_HEADER,
    build_instance,
    cmd_gen,
    cmd_report,
    cmd_run,
    load_config,
    parse_config,
)
from dpglm.cli import main as cli_main
from dpglm.data import load_dataset
from dpglm.losses import squared_loss
from dpglm.optim import noisy_gd
from dpglm.rng import RngHandle
from dpglm.schedules import OptimizerSchedule


BASIC = """
# regression sweep
instance=regression
algorithm=noisy-gd-nonprivate
loss=squared
n_list=64,128
d=6
epsilon=1.0
delta=1e-4
ball_radius=1.0
seeds=3
w_star_norm=1.0
noise_std=0.2
x_bound=1.0
"""


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestConfig:
    def test_parse_basic(self):
        cfg = parse_config(BASIC)
        assert cfg.n_values == (64, 128)
        assert cfg.seeds == (0, 1, 2)
        assert cfg.algorithm == "noisy-gd-nonprivate"

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            parse_config(BASIC + "\nbogus_key=1\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError):
            parse_config("instance regression")

    def test_loss_algorithm_compatibility(self):
        with pytest.raises(ValueError):
            parse_config("algorithm=output-pert-lipschitz\nloss=squared\n")
        with pytest.raises(ValueError):
            parse_config("algorithm=noisy-gd\nloss=absolute\n")

    def test_adaptive_radius_needs_selection_algorithm(self):
        with pytest.raises(ValueError):
            parse_config("algorithm=noisy-gd\nball_radius=adaptive\n")
        cfg = parse_config("algorithm=flagship\nball_radius=adaptive\n")
        assert cfg.ball_radius == "adaptive"

    def test_seed_list(self):
        cfg = parse_config("seed_list=5,9\n")
        assert cfg.seeds == (5, 9)


class TestCmdGen(object):
    def test_writes_csv_and_metadata(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text("instance=regression\nn=40\nd=10\nseeds=1\nnoise_std=0.1\n")
        out = tmp_path / "data.csv"
        cmd_gen(cfg_path, out)
        ds, meta = load_dataset(out)
        assert ds.n == 40 and ds.d == 10
        assert meta["generator"] == "regression"
        assert "rank" in meta and "seed" in meta
        assert len(out.read_text().splitlines()) == 40

    def test_smooth_hard_metadata_reports_realized_bias(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(
            "instance=smooth-hard\nn=128\nd=8\nepsilon=0.5\nminimizer_norm=1.0\ny_bound=1.0\nseeds=1\n"
        )
        out = tmp_path / "hard.csv"
        cmd_gen(cfg_path, out)
        _, meta = load_dataset(out)
        assert "b_realized" in meta and 0 <= meta["b_realized"] <= 1

    def test_reuse_seed_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text("instance=regression\nn=20\nd=4\nseeds=1\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cmd_gen(cfg_path, a)
        cmd_gen(cfg_path, b)
        assert a.read_bytes() == b.read_bytes()


def _mask_runtime(text):
    out = []
    for row in rows_of(text):
        row["runtime_ms"] = "X"
        out.append(row)
    return out


class TestCmdRun:
    def test_row_count_and_header(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        text = cmd_run(cfg)
        lines = text.strip().splitlines()
        assert lines[0] == ",".join(RESULT_HEADER)
        assert len(lines) == 1 + 2 * 3  # two n values x three seeds

    def test_deterministic_modulo_runtime(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        assert _mask_runtime(cmd_run(cfg)) == _mask_runtime(cmd_run(cfg))

    def test_identical_noiseless_columns(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        rows = rows_of(cmd_run(cfg))
        again = rows_of(cmd_run(cfg))
        assert [r["excess_risk"] for r in rows] == [r["excess_risk"] for r in again]

    def test_schedule_json_round_trip_reproduces_run(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(
            "instance=regression\nalgorithm=noisy-gd\nn=64\nd=4\nepsilon=1.0\n"
            "delta=1e-4\nball_radius=1.0\nseeds=1\nnoise_std=0.2\n"
        )
        row = rows_of(cmd_run(cfg_path))[0]
        cfg = load_config(cfg_path)
        schedule = OptimizerSchedule.from_json(row["schedule_json"])
        rng = RngHandle(int(row["seed"]), stream=0)
        dataset, oracle, _ = build_instance(cfg, 64, 4, 1.0, rng.child(0))
        loss = squared_loss(dataset.y_bound)
        model = noisy_gd(loss, dataset, schedule, rng.child(1))
        assert oracle.excess(model.w) == float(row["excess_risk"])

    def test_composite_schedule_json_parse_identity(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(
            "instance=regression\nalgorithm=flagship\nball_radius=adaptive\nn=96\nd=4\n"
            "epsilon=1.0\ndelta=1e-4\nseeds=1\nnoise_std=0.2\nw_star_norm=1.0\n"
        )
        row = rows_of(cmd_run(cfg_path))[0]
        schedule = OptimizerSchedule.from_json(row["schedule_json"])
        assert schedule.to_json() == row["schedule_json"]
        assert row["b_used"] != ""

    def test_guardrail_refuses_huge_sweeps(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC + "max_grad_evals=10\n")
        with pytest.raises(RuntimeError):
            cmd_run(cfg)

    def test_threads_match_serial(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        serial = _mask_runtime(cmd_run(cfg, threads=1))
        parallel = _mask_runtime(cmd_run(cfg, threads=4))
        assert serial == parallel

    def test_rank_column_reflects_signal_dim(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(
            "instance=regression\nalgorithm=noisy-gd-nonprivate\nn=64\nd=10\nsignal_dim=3\n"
            "ball_radius=1.0\nseeds=1\n"
        )
        row = rows_of(cmd_run(cfg))[0]
        assert row["rank"] == "3"

    def test_smooth_hard_instance_runs(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(
            "instance=smooth-hard\nalgorithm=noisy-gd\nn=256\nd=16\nepsilon=0.5\n"
            "delta=1e-4\nball_radius=2.0\nminimizer_norm=1.0\ny_bound=1.0\nseeds=2\n"
        )
        rows = rows_of(cmd_run(cfg))
        assert len(rows) == 2
        assert all(float(r["excess_risk"]) >= 0 for r in rows)

    def test_lipschitz_hard_instance_runs(self, tmp_path):
        # Excess here is relative to the comparator vector, so it may be
        # negative; the row must simply be finite and well-formed.
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(
            "instance=lipschitz-hard\nalgorithm=output-pert-lipschitz\nloss=absolute\n"
            "n=128\nd=8\nepsilon=1.0\ndelta=1e-4\nball_radius=1.0\nseeds=2\n"
            "comparator_norm=1.0\n"
        )
        rows = rows_of(cmd_run(cfg))
        assert len(rows) == 2
        assert all(math.isfinite(float(r["excess_risk"])) for r in rows)

    def test_adaptive_records_selected_radius(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(
            "instance=regression\nalgorithm=flagship\nball_radius=adaptive\nn=96\nd=4\n"
            "epsilon=1.0\ndelta=1e-4\nseeds=1\nw_star_norm=2.0\nnoise_std=0.2\n"
        )
        row = rows_of(cmd_run(cfg))[0]
        assert float(row["b_used"]) in {0.0} | {float(2**j) for j in range(1, 12)}

    def test_grid_search_wrapper_algorithms(self, tmp_path):
        for algo in ("grid-search(noisy-gd)", "grid-search(output-pert-smooth)", "boost(noisy-gd)"):
            cfg = tmp_path / "cfg.txt"
            radius = "adaptive" if algo.startswith("grid-search") else "1.0"
            cfg.write_text(
                f"instance=regression\nalgorithm={algo}\nball_radius={radius}\nn=128\nd=4\n"
                "epsilon=2.0\ndelta=1e-4\nseeds=1\nw_star_norm=1.5\nnoise_std=0.2\n"
            )
            row = rows_of(cmd_run(cfg))[0]
            assert row["algorithm"] == algo
            assert math.isfinite(float(row["excess_risk"]))


class TestCmdReport:
    def test_planted_power_law_slope(self, tmp_path):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RESULT_HEADER, lineterminator="\n")
        writer.writeheader()
        for n in (100, 200, 400, 800):
            for seed in range(3):
                writer.writerow(
                    {
                        "algorithm": "stub",
                        "n": n,
                        "d": 5,
                        "rank": 5,
                        "epsilon": 1.0,
                        "delta": 0.0,
                        "b_used": 1.0,
                        "seed": seed,
                        "excess_risk": 3.0 / math.sqrt(n),
                        "empirical_risk": 0.0,
                        "runtime_ms": 1.0,
                        "schedule_json": "{}",
                    }
                )
        path = tmp_path / "rows.csv"
        path.write_text(buf.getvalue())
        text = cmd_report(path)
        slope = float(text.split("loglog_slope=")[1].split()[0])
        assert slope == pytest.approx(-0.5, abs=0.01)

    def test_single_point_slope_undefined(self, tmp_path):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RESULT_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerow(
            {
                "algorithm": "stub", "n": 100, "d": 2, "rank": 2, "epsilon": 1.0,
                "delta": 0.0, "b_used": 1.0, "seed": 0, "excess_risk": 0.5,
                "empirical_risk": 0.0, "runtime_ms": 1.0, "schedule_json": "{}",
            }
        )
        path = tmp_path / "one.csv"
        path.write_text(buf.getvalue())
        assert "loglog_slope=undefined" in cmd_report(path)

    def test_schema_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            cmd_report(path)

    def test_summary_csv_written(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        results = tmp_path / "rows.csv"
        cmd_run(cfg, out_path=results)
        out = tmp_path / "summary.csv"
        cmd_report(results, out_path=out)
        summary = list(csv.DictReader(open(out)))
        assert {r["n"] for r in summary} == {"64", "128"}


class TestCli:
    def test_gen_run_report_round_trip(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        results = tmp_path / "out.csv"
        assert cli_main(["run", "--config", str(cfg), "--out", str(results)]) == 0
        assert results.exists()
        assert cli_main(["report", str(results)]) == 0
        captured = capsys.readouterr()
        assert "loglog_slope" in captured.out

    def test_gen_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("instance=regression\nn=16\nd=3\nseeds=1\n")
        out = tmp_path / "data.csv"
        assert cli_main(["gen", "--config", str(cfg), "--out", str(out)]) == 0
        assert out.exists()

    def test_error_is_nonzero_exit(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("algorithm=nope\n")
        assert cli_main(["run", "--config", str(cfg)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_seed_override(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASIC)
        a = cmd_run(cfg, base_seed=50)
        b = cmd_run(cfg, base_seed=50)
        assert _mask_runtime(a) == _mask_runtime(b)
        assert {r["seed"] for r in rows_of(a)} == {"50", "51", "52"}
