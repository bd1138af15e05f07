import csv
import json

import numpy as np
import pytest

from repalign import cli, pipeline, tensorio
from repalign.errors import ConfigError


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def synth_score_config(**overrides):
    doc = {
        "pipeline": ["synth", "score"],
        "seed": 0,
        "output_dir": "out",
        "synth": {
            "n_stimuli": 60,
            "d_source": 12,
            "d_target": 8,
            "noise_sigma": 0.0,
            "n_subjects": 1,
        },
        "score": {"folds": 5, "lambda": 1e-8, "ceiling": 1.0},
    }
    doc.update(overrides)
    return doc


def read_summary(out_dir):
    with open(out_dir / "summary.csv", newline="") as fh:
        return list(csv.DictReader(fh))


class TestRunPipeline:
    def test_synth_score_noiseless(self, tmp_path):
        cfg = pipeline.resolve_config(synth_score_config(), base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        cells = report["stages"]["score"]["cells"]
        assert len(cells) == 1
        assert cells[0]["brain_score"] > 0.99
        rows = read_summary(tmp_path / "out")
        assert float(rows[0]["brain_score"]) > 0.99

    def test_missing_manifest_is_config_error(self, tmp_path):
        doc = {
            "pipeline": ["score"],
            "inputs": {
                "activations": [{"manifest": "nowhere/manifest.json"}],
                "responses": [{"manifest": "nowhere/manifest.json"}],
            },
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        with pytest.raises(ConfigError, match="nowhere"):
            pipeline.run_pipeline(cfg)

    def test_sweep_cross_product_accounting(self, tmp_path):
        rng = np.random.default_rng(0)
        acts = tmp_path / "acts" / "manifest.json"
        resps = tmp_path / "resps" / "manifest.json"
        n = 24
        for layer in range(3):
            for condition in ("pos", "nopos"):
                tensor = tensorio.ActivationTensor(
                    data=rng.standard_normal((n, 6)).astype(np.float32),
                    model_id="toy",
                    unit="layer",
                    unit_index=layer,
                    condition=condition,
                )
                tensorio.save_matrix(tensor, acts, f"L{layer}:{condition}")
        for subject in ("sub-00", "sub-01"):
            resp = tensorio.ResponseMatrix(
                data=rng.standard_normal((n, 5)).astype(np.float32),
                subject_id=subject,
            )
            tensorio.save_matrix(resp, resps, subject)
        doc = {
            "pipeline": ["score"],
            "seed": 1,
            "output_dir": "out",
            "inputs": {
                "activations": [{"manifest": "acts/manifest.json"}],
                "responses": [{"manifest": "resps/manifest.json"}],
            },
            "score": {"folds": 4, "lambda": 0.2, "ceiling": 1.0},
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        cells = report["stages"]["score"]["cells"]
        assert len(cells) == 12  # 3 layers x 2 conditions x 2 subjects
        keys = {
            (c["model_id"], c["unit_index"], c["condition"], c["subject_id"])
            for c in cells
        }
        assert len(keys) == 12
        positions = {c["unit_index"]: c["relative_position"] for c in cells}
        assert positions == {0: 0.0, 1: 0.5, 2: 1.0}

    def test_workers_do_not_change_results(self, tmp_path):
        base = pipeline.resolve_config(
            synth_score_config(synth={"n_stimuli": 40, "d_source": 6, "d_target": 4,
                                      "noise_sigma": 0.2, "n_subjects": 3}),
            base_dir=tmp_path,
        )
        serial = pipeline.run_pipeline(json.loads(json.dumps(base)))
        parallel = pipeline.run_pipeline(json.loads(json.dumps(base)), workers=4)
        assert serial["stages"]["score"] == parallel["stages"]["score"]

    def test_report_embeds_config_and_seed(self, tmp_path):
        cfg = pipeline.resolve_config(synth_score_config(seed=7), base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        assert report["seed"] == 7
        assert report["config"]["score"]["alpha"] == 1e-8
        on_disk = json.loads((tmp_path / "out" / "report.json").read_text())
        assert on_disk["config"]["synth"]["n_stimuli"] == 60

    def test_cka_and_gw_stages(self, tmp_path):
        doc = synth_score_config()
        doc["pipeline"] = ["synth", "cka", "gw"]
        doc["synth"]["n_stimuli"] = 24
        doc["gw"] = {"pca_dims": 4, "restarts": 2}
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        cka_cells = report["stages"]["cka"]["cells"]
        gw_cells = report["stages"]["gw"]["cells"]
        assert -1.0 <= cka_cells[0]["cka"] <= 1.0
        assert gw_cells[0]["gw_loss"] >= 0.0
        assert gw_cells[0]["gw_converged"]
        rows = read_summary(tmp_path / "out")
        assert {r["stage"] for r in rows} == {"cka", "gw"}

    def test_reliability_stage(self, tmp_path):
        rng = np.random.default_rng(2)
        halves = tmp_path / "halves" / "manifest.json"
        shared = rng.standard_normal((30, 20))
        for name in ("half_a", "half_b"):
            noisy = shared + 0.4 * rng.standard_normal((30, 20))
            tensorio.save_matrix(
                tensorio.ResponseMatrix(data=noisy.astype(np.float32), subject_id=name),
                halves,
                name,
            )
        doc = {
            "pipeline": ["reliability"],
            "output_dir": "out",
            "inputs": {
                "halves": [
                    {"manifest": "halves/manifest.json", "entry": "half_a"},
                    {"manifest": "halves/manifest.json", "entry": "half_b"},
                ]
            },
            "reliability": {"fraction": 0.25},
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        section = report["stages"]["reliability"]
        assert section["n_selected"] == 5  # ceil(0.25 * 20)
        assert (tmp_path / "out" / "reliability.csv").exists()

    def test_pca_stage(self, tmp_path):
        doc = synth_score_config()
        doc["pipeline"] = ["synth", "pca"]
        doc["pca"] = {"components": 3}
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        section = report["stages"]["pca"]
        assert section["components"] == 3
        scores, _ = tensorio.load_array(section["manifest"], "pca.scores")
        assert scores.shape == (60, 3)

    def test_stats_stage(self, tmp_path):
        rng = np.random.default_rng(3)
        rows = []
        for i in range(40):
            cka = rng.random()
            gw = rng.random()
            score = 2.0 - 0.9 * cka - 0.2 * gw + 0.05 * rng.standard_normal()
            rows.append({"cka": cka, "gw": gw, "brain_score": score,
                         "score_b": score - 0.3 - 0.05 * rng.random()})
        table = tmp_path / "table.csv"
        with table.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        doc = {
            "pipeline": ["stats"],
            "output_dir": "out",
            "inputs": {"table": "table.csv"},
            "stats": {
                "ols": {"y": "brain_score", "x": ["cka", "gw"]},
                "wilcoxon": [{"name": "a_vs_b", "a": "brain_score", "b": "score_b"}],
            },
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        report = pipeline.run_pipeline(cfg)
        ols = report["stages"]["stats"]["ols"]
        assert [r["term"] for r in ols["rows"]] == ["Intercept", "cka", "gw"]
        assert ols["adjusted_r2"] > 0.8
        wil = report["stages"]["stats"]["wilcoxon"][0]
        assert wil["name"] == "a_vs_b"
        assert wil["p_bonferroni"] >= wil["p"]
        assert (tmp_path / "out" / "ols_table.csv").exists()

    def test_degenerate_cell_degrades_to_warning(self, tmp_path):
        rng = np.random.default_rng(4)
        acts = tmp_path / "acts" / "manifest.json"
        resps = tmp_path / "resps" / "manifest.json"
        good = tensorio.ActivationTensor(
            data=rng.standard_normal((12, 5)).astype(np.float32),
            model_id="m", unit_index=1,
        )
        constant = tensorio.ActivationTensor(
            data=np.ones((12, 5), np.float32), model_id="m", unit_index=0
        )
        tensorio.save_matrix(good, acts, "L1:pos")
        tensorio.save_matrix(constant, acts, "L0:pos")
        tensorio.save_matrix(
            tensorio.ResponseMatrix(
                data=rng.standard_normal((12, 4)).astype(np.float32), subject_id="s"
            ),
            resps,
            "s",
        )
        doc = {
            "pipeline": ["gw"],
            "output_dir": "out",
            "inputs": {
                "activations": [{"manifest": "acts/manifest.json"}],
                "responses": [{"manifest": "resps/manifest.json"}],
            },
            "gw": {"pca_dims": None, "restarts": 2},
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        with pytest.warns(RuntimeWarning, match="failed"):
            report = pipeline.run_pipeline(cfg)
        cells = {c["activation_entry"]: c for c in report["stages"]["gw"]["cells"]}
        assert "error" in cells["L0:pos"]
        assert "gw_loss" in cells["L1:pos"]
        rows = read_summary(tmp_path / "out")
        failed = [r for r in rows if r["error"]]
        assert len(failed) == 1

    def test_gw_nonconvergence_warns(self, tmp_path):
        doc = synth_score_config()
        doc["pipeline"] = ["synth", "gw"]
        doc["synth"].update({"n_stimuli": 16, "noise_sigma": 1.0})
        doc["gw"] = {
            "pca_dims": 3,
            "epsilon": 0.05,
            "max_outer_iters": 1,
            "inner_iters": 2,
            "tol": 1e-15,
            "restarts": 0,
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        with pytest.warns(RuntimeWarning, match="did not converge"):
            report = pipeline.run_pipeline(cfg)
        assert report["warnings"]
        assert not report["stages"]["gw"]["cells"][0]["gw_converged"]


class TestValidation:
    def test_unknown_stage(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown pipeline stage"):
            pipeline.resolve_config({"pipeline": ["scoreboard"]}, base_dir=tmp_path)

    def test_validate_lists_problems(self, tmp_path):
        doc = {
            "pipeline": ["reliability", "stats"],
            "inputs": {},
        }
        cfg = pipeline.resolve_config(doc, base_dir=tmp_path)
        issues = pipeline.validate_config(cfg)
        text = "; ".join(issues)
        assert "halves" in text
        assert "table" in text

    def test_lambda_alias(self, tmp_path):
        cfg = pipeline.resolve_config(
            synth_score_config(score={"lambda": 0.5, "lambda_grid": [0.1, 0.5]}),
            base_dir=tmp_path,
        )
        assert cfg["score"]["alpha"] == 0.5
        assert cfg["score"]["alpha_grid"] == [0.1, 0.5]


class TestCli:
    def test_run_and_validate(self, tmp_path, capsys):
        path = write_config(tmp_path, synth_score_config())
        assert cli.main(["validate", "--config", str(path)]) == 0
        assert cli.main(["run", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "report.json" in out
        assert (tmp_path / "out" / "report.json").exists()

    def test_missing_config_exits_2(self, tmp_path, capsys):
        assert cli.main(["run", "--config", str(tmp_path / "none.json")]) == 2
        err = capsys.readouterr().err
        assert json.loads(err)["error"]["type"] == "config"

    def test_missing_manifest_exits_2_and_names_path(self, tmp_path, capsys):
        doc = {
            "pipeline": ["score"],
            "inputs": {
                "activations": [{"manifest": "gone/manifest.json"}],
                "responses": [{"manifest": "gone/manifest.json"}],
            },
        }
        path = write_config(tmp_path, doc)
        assert cli.main(["run", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "gone" in json.loads(err)["error"]["message"]

    def test_corrupt_payload_exits_3(self, tmp_path, capsys):
        acts = tmp_path / "acts" / "manifest.json"
        tensor = tensorio.ActivationTensor(
            data=np.ones((8, 3), np.float32), model_id="m"
        )
        tensorio.save_matrix(tensor, acts, "a")
        resps = tmp_path / "resps" / "manifest.json"
        tensorio.save_matrix(
            tensorio.ResponseMatrix(data=np.ones((8, 2), np.float32), subject_id="s"),
            resps,
            "r",
        )
        # truncate the payload after validation-time existence checks pass
        payload = acts.parent / json.loads(acts.read_text())["entries"][0]["path"]
        payload.write_bytes(payload.read_bytes()[:-4])
        doc = {
            "pipeline": ["score"],
            "inputs": {
                "activations": [{"manifest": "acts/manifest.json"}],
                "responses": [{"manifest": "resps/manifest.json"}],
            },
            "score": {"folds": 4},
        }
        path = write_config(tmp_path, doc)
        assert cli.main(["run", "--config", str(path)]) == 3
        err = capsys.readouterr().err
        assert json.loads(err)["error"]["type"] == "data"

    def test_env_seed_override(self, tmp_path, monkeypatch, capsys):
        path = write_config(tmp_path, synth_score_config(seed=1))
        monkeypatch.setenv("REPALIGN_SEED", "42")
        assert cli.main(["run", "--config", str(path)]) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["seed"] == 42
