import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from tworate import KeyedHashScore, SweepConfig, ingest_csv, run_sweep
from tworate.cli import main


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "data.csv"
    rng = np.random.default_rng(99)
    rows = [f"{rng.integers(0, 1000)},{rng.integers(0, 10)}" for _ in range(200)]
    path.write_text("\n".join(rows) + "\n")
    return str(path)


def run(args):
    return main(args)


class TestBound:
    def test_kl_value(self, capsys):
        assert run(["bound", "--alpha", "0.1", "--beta", "0.1"]) == 0
        out = capsys.readouterr().out
        lines = dict(l.split(" ") for l in out.strip().splitlines())
        assert float(lines["bound"]) == pytest.approx(1.757780, abs=1e-5)
        assert float(lines["g1"]) == pytest.approx(1.021651, abs=1e-5)
        assert float(lines["margin"]) > 0

    def test_tv_value(self, capsys):
        assert run(["bound", "--alpha", "0.3", "--beta", "0.3", "--div", "tv"]) == 0
        out = capsys.readouterr().out
        assert float(out.split()[1]) == pytest.approx(0.4, abs=1e-12)

    def test_infeasible_exit_code(self, capsys):
        assert run(["bound", "--alpha", "0.6", "--beta", "0.5"]) == 2
        assert "alpha <= 1 - beta" in capsys.readouterr().err


class TestCalibrate:
    def test_csv_output(self, dataset, tmp_path, capsys):
        out = tmp_path / "cal.csv"
        assert run([
            "calibrate", dataset, "--taus", "0.25,0.5,0.75", "--out", str(out)
        ]) == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "tau,alpha"
        alphas = [float(r.split(",")[1]) for r in rows[1:]]
        assert alphas == sorted(alphas, reverse=True)

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,1\nb\n")
        assert run(["calibrate", str(bad), "--taus", "0.5"]) == 3


class TestEmbed:
    def test_samples_and_stats(self, dataset, tmp_path):
        out = tmp_path / "samples.csv"
        stats = tmp_path / "stats.json"
        code = run([
            "embed", dataset, "--tau", "0.7", "--beta", "0.1",
            "-n", "5000", "--seed", "3", "--out", str(out),
            "--stats-out", str(stats),
        ])
        assert code == 0
        assert len(out.read_text().strip().splitlines()) == 5000
        obj = json.loads(stats.read_text())
        p = obj["acceptances"] / obj["proposals"]
        assert obj["acceptances"] == 5000 or obj["acceptances"] >= 5000
        assert 0 < p <= 1

    def test_deterministic(self, dataset, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            run([
                "embed", dataset, "--tau", "0.7", "--beta", "0.1",
                "-n", "1000", "--seed", "5", "--out", str(out),
                "--stats-out", str(tmp_path / (name + ".json")),
            ])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_infeasible_beta(self, dataset):
        assert run([
            "embed", dataset, "--tau", "0.0", "--beta", "0.5", "-n", "10"
        ]) == 2


class TestExact:
    def test_plan_and_distribution(self, dataset, tmp_path):
        out = tmp_path / "exact.json"
        assert run([
            "exact", dataset, "--tau", "0.5", "--beta", "0.2", "--out", str(out)
        ]) == 0
        obj = json.loads(out.read_text())
        plan = obj["plan"]
        assert plan["seedless"] is True
        total = math.fsum(r["mass"] for r in obj["distribution"])
        assert abs(total - 1.0) <= 1e-9


class TestRl:
    def test_trains_and_reports(self, dataset, tmp_path):
        out = tmp_path / "rl.json"
        assert run([
            "rl", dataset, "--tau", "0.5", "--beta", "0.2", "--out", str(out)
        ]) == 0
        obj = json.loads(out.read_text())
        assert obj["report"]["converged"]
        assert obj["report"]["kl_to_target"] <= 1e-8

    def test_beta_zero_redirects(self, dataset, capsys):
        assert run(["rl", dataset, "--tau", "0.5", "--beta", "0.0"]) == 2
        assert "embed" in capsys.readouterr().err

    def test_non_convergence_exit_code(self, dataset, tmp_path):
        out = tmp_path / "rl.json"
        code = run([
            "rl", dataset, "--tau", "0.5", "--beta", "0.2",
            "--max-iters", "2", "--out", str(out),
        ])
        assert code == 4


class TestBestOfM:
    def test_law_mode(self, dataset, tmp_path):
        out = tmp_path / "law.json"
        assert run([
            "best-of-m", dataset, "-m", "4", "--law", "--out", str(out)
        ]) == 0
        obj = json.loads(out.read_text())
        assert abs(math.fsum(r["mass"] for r in obj) - 1.0) <= 1e-9

    def test_sample_mode_deterministic(self, dataset, tmp_path):
        blobs = []
        for name in ("x.csv", "y.csv"):
            out = tmp_path / name
            run([
                "best-of-m", dataset, "-m", "2", "-n", "500",
                "--seed", "7", "--out", str(out),
            ])
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestSweep:
    def test_exact_sweep_gaps(self, dataset, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run([
            "sweep", dataset, "--generator", "exact",
            "--taus", "0.4,0.6", "--betas", "0.1,0.3", "--out", str(out),
        ]) == 0
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        header = rows[0].split(",")
        gap_i = header.index("gap")
        feas_i = header.index("feasible")
        data = [r.split(",") for r in rows[1:]]
        assert len(data) == 4  # every grid point emitted
        for cells in data:
            if cells[feas_i] == "1" and cells[gap_i]:
                assert abs(float(cells[gap_i])) <= 1e-10

    def test_infeasible_points_flagged_not_dropped(self, dataset, tmp_path):
        out = tmp_path / "sweep.csv"
        run([
            "sweep", dataset, "--generator", "exact",
            "--taus", "0.2", "--betas", "0.9", "--out", str(out),
        ])
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        assert len(rows) == 2
        assert rows[1].split(",")[8] == "0"  # feasible flag off

    def test_rejection_sweep_determinism(self, dataset, tmp_path):
        blobs = []
        for name in ("s1.csv", "s2.csv"):
            out = tmp_path / name
            run([
                "sweep", dataset, "--generator", "rejection",
                "--taus", "0.5", "--betas", "0.2", "-n", "2000",
                "--seed", "11", "--out", str(out),
            ])
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_plot_rendered(self, dataset, tmp_path):
        out = tmp_path / "sweep.csv"
        fig = tmp_path / "sweep.png"
        assert run([
            "sweep", dataset, "--generator", "exact",
            "--taus", "0.5", "--betas", "0.1,0.2", "--out", str(out),
            "--plot", str(fig),
        ]) == 0
        assert fig.exists() and fig.stat().st_size > 0

    def test_json_format(self, dataset, tmp_path):
        out = tmp_path / "sweep.json"
        run([
            "sweep", dataset, "--generator", "best_of_m", "-m", "2",
            "--taus", "0.5", "--betas", "0.2", "--out", str(out),
            "--format", "json",
        ])
        obj = json.loads(out.read_text())
        assert obj["config"]["generator"] == "best_of_m"
        assert len(obj["records"]) == 1


class TestCompareBounds:
    def test_margin_positive(self, tmp_path):
        out = tmp_path / "cmp.csv"
        assert run(["compare-bounds", "--out", str(out)]) == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "alpha,beta,g1,g2,margin"
        margins = [float(r.split(",")[4]) for r in rows[1:]]
        assert margins and min(margins) > 0

    def test_spot_row(self, tmp_path):
        out = tmp_path / "cmp.csv"
        run(["compare-bounds", "--alphas", "0.1", "--betas", "0.1", "--out", str(out)])
        _, row = out.read_text().strip().splitlines()
        cells = [float(c) for c in row.split(",")]
        assert cells[2] == pytest.approx(1.021651, abs=1e-5)
        assert cells[3] == pytest.approx(1.757780, abs=1e-5)

    def test_plot_rendered(self, tmp_path):
        fig = tmp_path / "cmp.png"
        assert run([
            "compare-bounds", "--alphas", "0.1,0.2", "--betas", "0.1,0.2",
            "--out", str(tmp_path / "cmp.csv"), "--plot", str(fig),
        ]) == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestHarnessLibrary:
    def test_rl_sweep_point(self, dataset):
        F = ingest_csv(dataset)
        score = KeyedHashScore(b"0")
        cfg = SweepConfig(taus=(0.5,), betas=(0.2,), generator_kind="rl", seed=1)
        (rec,) = run_sweep(F, score, cfg)
        assert rec.feasible and not rec.error
        assert abs(rec.gap) <= 1e-6

    def test_rejection_gap_within_allowance(self, dataset):
        F = ingest_csv(dataset)
        score = KeyedHashScore(b"0")
        cfg = SweepConfig(
            taus=(0.5,), betas=(0.2,), generator_kind="rejection",
            n_samples=50_000, seed=2,
        )
        (rec,) = run_sweep(F, score, cfg)
        assert rec.feasible
        assert abs(rec.gap) <= rec.allowance
