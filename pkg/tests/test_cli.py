import csv
import json

import pytest

from cutofflab.cli import main
from cutofflab.data import CSV_HEADER, load_csv, write_csv
from cutofflab.simulator import SimulationConfig, simulate_dataset

from conftest import outcome_dataset

SMALL_CONFIG = {
    "n_seasons": 2,
    "events_per_season": [5, 5],
    "regime_schedule": ["before", "after"],
    "seed": 21,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL_CONFIG), encoding="utf-8")
    return path


@pytest.fixture
def data_path(tmp_path, config_path):
    out = tmp_path / "data.csv"
    assert main(["simulate", "--config", str(config_path), "--out", str(out)]) == 0
    return out


class TestSimulateCommand:
    def test_default_scale_row_count(self, tmp_path):
        out = tmp_path / "full.csv"
        assert main(["simulate", "--out", str(out)]) == 0
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == CSV_HEADER
        assert len(rows) - 1 == (53 + 44) * 50  # 4,850 starters

    def test_manifest_written(self, data_path):
        manifest = json.loads(
            data_path.with_suffix(".manifest.json").read_text()
        )
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 21
        assert manifest["output_paths"][0]["path"] == "data.csv"

    def test_identical_bytes_on_rerun(self, tmp_path, config_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(config_path), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(config_path), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_config_exits_2(self, tmp_path):
        code = main(
            ["simulate", "--config", str(tmp_path / "none.json"),
             "--out", str(tmp_path / "x.csv")]
        )
        assert code == 2

    def test_env_seed_override(self, tmp_path, config_path, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", str(config_path), "--out", str(a)])
        monkeypatch.setenv("CUTOFFLAB_SEED", "777")
        main(["simulate", "--config", str(config_path), "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()
        manifest = json.loads(b.with_suffix(".manifest.json").read_text())
        assert manifest["seed"] == 777


class TestEstimateCommand:
    def test_local_window(self, data_path, tmp_path, capsys):
        out = tmp_path / "res.json"
        code = main(
            ["estimate", "--data", str(data_path), "--method", "local",
             "--regime", "after", "--window", "30:31",
             "--permutations", "300", "--out", str(out)]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "Point estimate" in text and "[30, 31]" in text
        payload = json.loads(out.read_text())
        assert payload["method"] == "local"
        assert payload["result"]["window"] == [30, 31]
        # json and table carry the same numbers (table rounded to 3 dp)
        rendered = f"{payload['result']['estimate']:.3f}"
        assert rendered in text

    def test_local_auto_window(self, data_path, capsys):
        code = main(
            ["estimate", "--data", str(data_path), "--method", "local",
             "--regime", "after", "--auto-window", "--permutations", "200"]
        )
        assert code == 0
        assert "Window" in capsys.readouterr().out

    def test_continuity_with_covariates(self, data_path, tmp_path, capsys):
        out = tmp_path / "cont.json"
        code = main(
            ["estimate", "--data", str(data_path), "--method", "continuity",
             "--regime", "after",
             "--covariates", "wc_points_before,home_event", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["result"]["covariates"] == ["wc_points_before", "home_event"]
        assert "Bandwidth" in capsys.readouterr().out

    def test_diffdisc(self, data_path, capsys):
        code = main(["estimate", "--data", str(data_path), "--method", "diffdisc"])
        assert code == 0
        assert "Difference in discontinuities" in capsys.readouterr().out

    def test_diffdisc_rejects_regime_filter(self, data_path):
        code = main(
            ["estimate", "--data", str(data_path), "--method", "diffdisc",
             "--regime", "after"]
        )
        assert code == 2

    def test_bad_window_flag(self, data_path):
        code = main(
            ["estimate", "--data", str(data_path), "--method", "local",
             "--window", "banana"]
        )
        assert code == 2

    def test_unknown_covariate(self, data_path):
        code = main(
            ["estimate", "--data", str(data_path), "--method", "continuity",
             "--covariates", "shoe_size"]
        )
        assert code == 2

    def test_missing_data_file_exits_1(self, tmp_path):
        code = main(
            ["estimate", "--data", str(tmp_path / "ghost.csv"), "--method", "local"]
        )
        assert code == 1

    def test_estimator_failure_exits_3(self, tmp_path):
        # only two distinct ranks: the continuity fits cannot be supported
        ds = outcome_dataset([30] * 30 + [31] * 30, [float(i % 2) for i in range(60)])
        path = tmp_path / "thin.csv"
        write_csv(ds, path)
        code = main(["estimate", "--data", str(path), "--method", "continuity"])
        assert code == 3
        # and a window with an empty side exits the same way
        code = main(
            ["estimate", "--data", str(path), "--method", "local",
             "--cutoff", "31.5", "--window", "31:32", "--permutations", "50"]
        )
        assert code == 3

    def test_malformed_data_exits_2(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        code = main(["estimate", "--data", str(path), "--method", "local"])
        assert code == 2


class TestValidateCommand:
    def test_report_with_density_anchor(self, tmp_path, capsys):
        # 51 treated / 53 controls in the smallest window; ranks span the
        # placebo cutoffs so the full battery can run
        rng = __import__("numpy").random.default_rng(0)
        ranks, outcomes = [], []
        for r in range(11, 51):
            count = {30: 51, 31: 53}.get(r, 52)
            ranks.extend([r] * count)
            outcomes.extend((rng.random(count) < 1.1 - r / 45).astype(float))
        ds = outcome_dataset(ranks, outcomes)
        path = tmp_path / "d.csv"
        write_csv(ds, path)
        out = tmp_path / "report.json"
        code = main(
            ["validate", "--data", str(path), "--outcome", "round1_total",
             "--covariates", "wc_points_before", "--permutations", "200",
             "--out", str(out)]
        )
        assert code == 0
        report = json.loads(out.read_text())
        density = report["after"]["density"]
        small = next(row for row in density if row["window"] == "[30, 31]")
        assert small["n_treated"] == 51 and small["n_control"] == 53
        assert small["p_value"] == pytest.approx(0.922, abs=1e-3)
        assert {r["cutoff"] for r in report["after"]["placebo"]} == {20.5, 40.5}
        assert "Binomial p" in capsys.readouterr().out


class TestReplicateCommand:
    def test_pipeline_and_determinism(self, tmp_path, config_path):
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        args = ["replicate", "--config", str(config_path), "--permutations", "150"]
        assert main(args + ["--out-dir", str(out1)]) == 0
        assert main(args + ["--out-dir", str(out2)]) == 0

        manifest = json.loads((out1 / "manifest.json").read_text())
        assert len(manifest["output_paths"]) >= 10
        listed = {o["path"] for o in manifest["output_paths"]}
        for name in (
            "dataset.csv", "descriptive.txt", "local_advanced.json",
            "continuity_advanced.json", "diffdisc_advanced.json",
            "validation_before.json", "validation_after.json",
            "rdplot_after.csv", "rdplot_after.png",
            "group_compare_advanced.csv", "digest.txt",
        ):
            assert name in listed, name
        # every artifact in the directory is accounted for by the manifest
        on_disk = {p.name for p in out1.iterdir() if p.name != "manifest.json"}
        assert on_disk == listed

        digest1 = (out1 / "digest.txt").read_text()
        digest2 = (out2 / "digest.txt").read_text()
        assert digest1 == digest2

    def test_effect_contrast_in_outputs(self, tmp_path):
        config = {
            "n_seasons": 2,
            "events_per_season": [80, 80],
            "regime_schedule": ["before", "after"],
            "seed": 5,
        }
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config), encoding="utf-8")
        out = tmp_path / "run"
        assert main(
            ["replicate", "--config", str(cfg), "--out-dir", str(out),
             "--permutations", "400"]
        ) == 0
        local = json.loads((out / "local_advanced.json").read_text())
        smallest_after = local["after"][0]
        smallest_before = local["before"][0]
        assert smallest_after["p_value"] < 0.05
        assert smallest_before["p_value"] > 0.05
        assert smallest_after["estimate"] > smallest_before["estimate"]


class TestEquilibriumCommand:
    def test_text_output(self, capsys):
        assert main(["equilibrium", "--W", "1", "--d", "1", "--u", "0", "--s", "1"]) == 0
        out = capsys.readouterr().out
        assert "win probability p1" in out
        assert "0.7500" in out

    def test_json_output(self, capsys):
        assert main(["equilibrium", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["solution"]["p1"] == 0.75

    def test_invalid_parameters_exit_3(self):
        assert main(["equilibrium", "--W", "0"]) == 3

    def test_figure1_outputs(self, tmp_path, capsys):
        out = tmp_path / "fig1.csv"
        assert main(["equilibrium", "--figure1", str(out)]) == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {"x", "baseline", "pos_expect", "neg_expect"}
        assert out.with_suffix(".png").exists()
        mid = min(rows, key=lambda r: abs(float(r["x"])))
        assert float(mid["baseline"]) == pytest.approx(0.0, abs=1e-9)


class TestParser:
    def test_bad_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
