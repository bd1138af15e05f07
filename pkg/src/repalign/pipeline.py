"""Configuration-driven orchestration of the analysis pipeline.

A run is described by a single JSON config naming input manifests, the
pipeline stages to execute, and their hyperparameters. Stages run in the
order given; the ``synth`` stage can generate fixture manifests that later
stages consume, so synthetic controls flow through exactly the same paths as
real data.

Outputs per run: ``report.json`` (full provenance: resolved config, seed,
per-cell metrics), ``summary.csv`` (one row per analysis cell, keyed by
subject, model, unit, condition and relative layer position), and
``pervoxel_r.csv`` for encoding scores. Identical configs and inputs produce
byte-identical reports except for the ``created_at`` timestamp.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import encode, reduce, repgeo, stats, synth, tensorio
from .errors import ConfigError, DataError

PIPELINE_STAGES = ("synth", "score", "cka", "gw", "reliability", "pca", "stats")

_SCORE_DEFAULTS = {
    "folds": 5,
    "alpha": encode.DEFAULT_ALPHA,
    "alpha_grid": None,
    "ceiling": 1.0,
}
_GW_DEFAULTS = {
    "pca_dims": "auto",
    "epsilon": 0.0,
    "max_outer_iters": 1000,
    "inner_iters": 200,
    "tol": 1e-9,
    "restarts": 3,
    "mass_source": None,
    "mass_target": None,
}
_SYNTH_DEFAULTS = {
    "n_stimuli": 60,
    "d_source": 12,
    "d_target": 8,
    "noise_sigma": 0.0,
    "shared_rank": None,
    "n_subjects": 1,
    "ablate": [],
}


def load_config(path: str | Path) -> dict:
    """Read a config file and resolve its relative paths."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return resolve_config(doc, base_dir=path.parent)


def resolve_config(doc: dict, base_dir: str | Path = ".") -> dict:
    """Normalize a raw config dict: stage list, defaults, absolute paths."""
    base = Path(base_dir)
    cfg = dict(doc)

    pipeline = cfg.get("pipeline")
    if isinstance(pipeline, str):
        pipeline = [pipeline]
    if not isinstance(pipeline, list) or not pipeline:
        raise ConfigError("config must select at least one pipeline stage")
    unknown = [s for s in pipeline if s not in PIPELINE_STAGES]
    if unknown:
        raise ConfigError(f"unknown pipeline stage(s) {unknown}; valid: {PIPELINE_STAGES}")
    cfg["pipeline"] = list(pipeline)

    cfg["seed"] = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", "out")
    cfg["output_dir"] = str((base / out_dir).resolve())

    inputs = dict(cfg.get("inputs", {}))
    for key in ("activations", "responses", "halves"):
        refs = inputs.get(key)
        if refs is None:
            continue
        if not isinstance(refs, list):
            raise ConfigError(f"inputs.{key} must be a list of manifest references")
        resolved = []
        for ref in refs:
            if not isinstance(ref, dict) or "manifest" not in ref:
                raise ConfigError(f"inputs.{key}: each reference needs a 'manifest' path")
            item = dict(ref)
            item["manifest"] = str((base / ref["manifest"]).resolve())
            resolved.append(item)
        inputs[key] = resolved
    if "table" in inputs:
        inputs["table"] = str((base / inputs["table"]).resolve())
    if "matrix" in inputs:
        ref = inputs["matrix"]
        if not isinstance(ref, dict) or "manifest" not in ref or "entry" not in ref:
            raise ConfigError("inputs.matrix needs 'manifest' and 'entry'")
        inputs["matrix"] = {
            "manifest": str((base / ref["manifest"]).resolve()),
            "entry": ref["entry"],
        }
    cfg["inputs"] = inputs

    cfg["score"] = {**_SCORE_DEFAULTS, **cfg.get("score", {})}
    if "lambda" in cfg["score"]:
        cfg["score"]["alpha"] = cfg["score"].pop("lambda")
    if "lambda_grid" in cfg["score"]:
        cfg["score"]["alpha_grid"] = cfg["score"].pop("lambda_grid")
    cfg["gw"] = {**_GW_DEFAULTS, **cfg.get("gw", {})}
    cfg["synth"] = {**_SYNTH_DEFAULTS, **cfg.get("synth", {})}
    cfg["reliability"] = {"fraction": 0.1, **cfg.get("reliability", {})}
    cfg["pca"] = {"components": 50, **cfg.get("pca", {})}
    cfg["stats"] = {
        "ols": None,
        "wilcoxon": [],
        "bonferroni": True,
        **cfg.get("stats", {}),
    }
    return cfg


def validate_config(cfg: dict) -> list[str]:
    """Dry-run validation; returns a list of problems (empty when runnable)."""
    issues: list[str] = []
    stages = cfg["pipeline"]
    synth_provides = "synth" in stages

    def check_refs(key: str, needed_by: str) -> None:
        refs = cfg["inputs"].get(key)
        if not refs:
            if not synth_provides:
                issues.append(f"stage {needed_by!r} needs inputs.{key} (or a synth stage)")
            return
        for ref in refs:
            manifest = Path(ref["manifest"])
            if not manifest.exists():
                issues.append(f"inputs.{key}: manifest not found: {manifest}")
                continue
            names = set(tensorio.manifest_entry_names(manifest))
            for entry in ref.get("entries") or []:
                if entry not in names:
                    issues.append(
                        f"inputs.{key}: entry {entry!r} not in {manifest}"
                    )

    for stage in stages:
        if stage in ("score", "cka", "gw"):
            check_refs("activations", stage)
            check_refs("responses", stage)
        elif stage == "reliability":
            halves = cfg["inputs"].get("halves") or []
            if len(halves) != 2:
                issues.append("stage 'reliability' needs exactly two inputs.halves references")
            else:
                for ref in halves:
                    if "entry" not in ref:
                        issues.append("inputs.halves: each reference needs an 'entry' name")
                    if not Path(ref["manifest"]).exists():
                        issues.append(f"inputs.halves: manifest not found: {ref['manifest']}")
            fraction = cfg["reliability"]["fraction"]
            if not 0 < fraction <= 1:
                issues.append(f"reliability.fraction must lie in (0, 1], got {fraction}")
        elif stage == "pca":
            ref = cfg["inputs"].get("matrix")
            if ref is None:
                if not synth_provides:
                    issues.append("stage 'pca' needs inputs.matrix")
            elif not Path(ref["manifest"]).exists():
                issues.append(f"inputs.matrix: manifest not found: {ref['manifest']}")
            if cfg["pca"]["components"] < 1:
                issues.append("pca.components must be >= 1")
        elif stage == "stats":
            table = cfg["inputs"].get("table")
            if table is None:
                issues.append("stage 'stats' needs inputs.table (a CSV path)")
            elif not Path(table).exists():
                issues.append(f"inputs.table: file not found: {table}")
            if cfg["stats"]["ols"] is None and not cfg["stats"]["wilcoxon"]:
                issues.append("stage 'stats' needs stats.ols and/or stats.wilcoxon")
        elif stage == "synth":
            try:
                synth.SynthSpec(
                    n_stimuli=cfg["synth"]["n_stimuli"],
                    d_source=cfg["synth"]["d_source"],
                    d_target=cfg["synth"]["d_target"],
                    noise_sigma=cfg["synth"]["noise_sigma"],
                    shared_rank=cfg["synth"]["shared_rank"],
                    seed=cfg["seed"],
                )
            except DataError as exc:
                issues.append(f"synth: {exc}")
            for mode in cfg["synth"]["ablate"]:
                if mode not in synth.ABLATION_MODES:
                    issues.append(f"synth.ablate: unknown mode {mode!r}")

    score = cfg["score"]
    if score["folds"] < 2:
        issues.append("score.folds must be >= 2")
    if score["alpha"] < 0:
        issues.append("score.alpha must be nonnegative")
    if score["ceiling"] <= 0:
        issues.append("score.ceiling must be positive")
    gw = cfg["gw"]
    if gw["epsilon"] < 0:
        issues.append("gw.epsilon must be nonnegative")
    if gw["pca_dims"] not in (None, "auto") and (
        not isinstance(gw["pca_dims"], int) or gw["pca_dims"] < 1
    ):
        issues.append("gw.pca_dims must be 'auto', null, or a positive integer")
    return issues


# ---------------------------------------------------------------------------
# Input loading


def _load_group(refs: list[dict], kind: str) -> list[tuple[str, object]]:
    """Load manifest entries of one kind, preserving reference order."""
    expected = tensorio.ActivationTensor if kind == "activations" else tensorio.ResponseMatrix
    loaded = []
    for ref in refs:
        manifest = ref["manifest"]
        names = ref.get("entries")
        if not names:
            names = [
                name
                for name in tensorio.manifest_entry_names(manifest)
                if _entry_kind(manifest, name) == kind
            ]
        for name in names:
            matrix = tensorio.load_matrix(manifest, name)
            if not isinstance(matrix, expected):
                raise DataError(
                    f"entry {name!r} in {manifest} is not a {kind} matrix"
                )
            loaded.append((name, matrix))
    return loaded


def _entry_kind(manifest: str, name: str) -> str | None:
    _, meta = tensorio.load_array(manifest, name)
    kind = meta.get("kind")
    if kind is None:
        if "model_id" in meta:
            return "activations"
        if "subject_id" in meta:
            return "responses"
    return kind


def _relative_positions(activations: list[tuple[str, tensorio.ActivationTensor]]) -> dict[str, float]:
    """Relative depth per entry: unit_index / max_index within its group."""
    groups: dict[tuple, list[int]] = {}
    for name, act in activations:
        groups.setdefault((act.model_id, act.unit, act.condition), []).append(act.unit_index)
    out = {}
    for name, act in activations:
        max_index = max(groups[(act.model_id, act.unit, act.condition)])
        out[name] = act.unit_index / max_index if max_index > 0 else 0.0
    return out


# ---------------------------------------------------------------------------
# Stage runners


def _run_synth(cfg: dict, out_dir: Path, report: dict) -> None:
    params = cfg["synth"]
    spec = synth.SynthSpec(
        n_stimuli=params["n_stimuli"],
        d_source=params["d_source"],
        d_target=params["d_target"],
        noise_sigma=params["noise_sigma"],
        shared_rank=params["shared_rank"],
        seed=cfg["seed"],
    )
    activations, _, weights = synth.gen_linear_pair(spec)
    act_manifest = out_dir / "synth" / "activations" / "manifest.json"
    resp_manifest = out_dir / "synth" / "responses" / "manifest.json"
    tensorio.save_matrix(activations, act_manifest, "synth:layer0:pos")
    for mode in params["ablate"]:
        ablated = synth.ablate_structure(activations, mode, seed=cfg["seed"])
        ablated = tensorio.ActivationTensor(
            data=ablated.data,
            model_id=ablated.model_id,
            unit=ablated.unit,
            unit_index=ablated.unit_index,
            condition=mode,
        )
        tensorio.save_matrix(ablated, act_manifest, f"synth:layer0:{mode}")
    for subject in range(params["n_subjects"]):
        resp = synth.gen_subject_responses(
            activations, weights, spec.noise_sigma, seed=cfg["seed"], subject=subject
        )
        tensorio.save_matrix(resp, resp_manifest, resp.subject_id)

    # later stages fall back to the generated fixtures when no inputs are given
    if not cfg["inputs"].get("activations"):
        cfg["inputs"]["activations"] = [{"manifest": str(act_manifest)}]
    if not cfg["inputs"].get("responses"):
        cfg["inputs"]["responses"] = [{"manifest": str(resp_manifest)}]
    if not cfg["inputs"].get("matrix"):
        cfg["inputs"]["matrix"] = {
            "manifest": str(resp_manifest),
            "entry": "sub-00",
        }
    report["stages"]["synth"] = {
        "activations_manifest": str(act_manifest),
        "responses_manifest": str(resp_manifest),
        "spec": {
            "n_stimuli": spec.n_stimuli,
            "d_source": spec.d_source,
            "d_target": spec.d_target,
            "noise_sigma": spec.noise_sigma,
            "shared_rank": spec.shared_rank,
            "seed": spec.seed,
        },
        "n_subjects": params["n_subjects"],
        "ablate": list(params["ablate"]),
    }


def _metric_cells(cfg: dict, stage: str, workers: int) -> list[dict]:
    activations = _load_group(cfg["inputs"].get("activations") or [], "activations")
    responses = _load_group(cfg["inputs"].get("responses") or [], "responses")
    if not activations:
        raise DataError(f"stage {stage!r}: no activation entries available")
    if not responses:
        raise DataError(f"stage {stage!r}: no response entries available")
    rel_pos = _relative_positions(activations)

    cells = [
        (act_name, act, resp_name, resp)
        for act_name, act in activations
        for resp_name, resp in responses
    ]

    def run_cell(cell):
        act_name, act, resp_name, resp = cell
        row = {
            "activation_entry": act_name,
            "response_entry": resp_name,
            "subject_id": resp.subject_id,
            "model_id": act.model_id,
            "unit": act.unit,
            "unit_index": act.unit_index,
            "condition": act.condition,
            "relative_position": rel_pos[act_name],
        }
        try:
            compute_cell(row, act, resp)
        except DataError as exc:
            # one degenerate cell (constant representation, too few stimuli)
            # must not abort a sweep; record it and keep going
            row["error"] = f"{exc}"
        return row

    def compute_cell(row, act, resp):
        act_name = row["activation_entry"]
        resp_name = row["response_entry"]
        if act.data.shape[0] != resp.data.shape[0]:
            raise DataError(
                f"cell ({act_name}, {resp_name}): stimulus counts differ "
                f"({act.data.shape[0]} vs {resp.data.shape[0]})"
            )
        if stage == "score":
            params = cfg["score"]
            folds = encode.make_folds(act.data.shape[0], params["folds"], cfg["seed"])
            grid = params["alpha_grid"]
            ridge_cfg = encode.RidgeConfig(
                alpha=params["alpha"],
                alpha_grid=tuple(grid) if grid else None,
            )
            result = encode.brain_score(
                act, resp, folds, ridge_cfg, ceiling=params["ceiling"]
            )
            row.update(result.to_dict())
            row["_per_voxel_r"] = result.per_voxel_r
        elif stage == "cka":
            row["cka"] = repgeo.cka_unbiased(act.data, resp.data)
        else:  # gw
            params = cfg["gw"]
            n = act.data.shape[0]
            dims = params["pca_dims"]
            solver = repgeo.GwSolverConfig(
                epsilon=params["epsilon"],
                max_outer_iters=params["max_outer_iters"],
                inner_iters=params["inner_iters"],
                tol=params["tol"],
                seed=cfg["seed"],
                restarts=params["restarts"],
            )
            rdm_a = repgeo.build_rdm(
                act.data,
                repgeo.default_rdm_pca_dims(n, act.data.shape[1])
                if dims == "auto"
                else dims,
            )
            rdm_b = repgeo.build_rdm(
                resp.data,
                repgeo.default_rdm_pca_dims(n, resp.data.shape[1])
                if dims == "auto"
                else dims,
            )
            result = repgeo.gw_distance(
                rdm_a, rdm_b,
                mass_a=np.asarray(params["mass_source"]) if params["mass_source"] else None,
                mass_b=np.asarray(params["mass_target"]) if params["mass_target"] else None,
                config=solver,
            )
            row.update(
                {
                    "gw_loss": result.loss,
                    "gw_converged": result.converged,
                    "gw_iterations": result.iterations,
                    "gw_epsilon": result.epsilon,
                }
            )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(cell) for cell in cells]
    return rows


def _run_reliability(cfg: dict, out_dir: Path, report: dict) -> None:
    refs = cfg["inputs"]["halves"]
    half_a = tensorio.load_matrix(refs[0]["manifest"], refs[0]["entry"])
    half_b = tensorio.load_matrix(refs[1]["manifest"], refs[1]["entry"])
    selection = encode.reliability_select(half_a, half_b, cfg["reliability"]["fraction"])
    path = out_dir / "reliability.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["voxel", "reliability", "selected"])
        chosen = set(selection.selected.tolist())
        for v, rel in enumerate(selection.per_voxel_reliability):
            writer.writerow([v, float(rel), int(v in chosen)])
    report["stages"]["reliability"] = {
        "fraction": selection.fraction,
        "n_voxels": int(selection.per_voxel_reliability.size),
        "n_selected": int(selection.selected.size),
        "selected": [int(v) for v in selection.selected],
        "csv": str(path),
    }


def _run_pca(cfg: dict, out_dir: Path, report: dict) -> None:
    ref = cfg["inputs"].get("matrix")
    if ref is None:
        raise DataError("stage 'pca': no inputs.matrix available")
    arr, _ = tensorio.load_array(ref["manifest"], ref["entry"])
    k = min(cfg["pca"]["components"], arr.shape[0] - 1, arr.shape[1])
    model = reduce.pca_fit(arr, k)
    scores = reduce.pca_transform(model, arr)
    manifest = out_dir / "pca" / "manifest.json"
    reduce.save_pca(model, manifest, "pca")
    tensorio.save_array(scores, manifest, "pca.scores", meta={"kind": "pca_scores"})
    report["stages"]["pca"] = {
        "input": dict(ref),
        "components": int(k),
        "rank": int(model.rank),
        "explained_variance_ratio": [float(v) for v in model.explained_variance_ratio],
        "manifest": str(manifest),
    }


def _read_table(path: str) -> dict[str, list]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        columns: dict[str, list] = {name: [] for name in reader.fieldnames or []}
        for record in reader:
            for name, value in record.items():
                try:
                    columns[name].append(float(value))
                except (TypeError, ValueError):
                    columns[name].append(value)
    return columns


def _run_stats(cfg: dict, out_dir: Path, report: dict) -> None:
    table = _read_table(cfg["inputs"]["table"])
    section: dict = {}
    params = cfg["stats"]
    if params["ols"]:
        y_col = params["ols"]["y"]
        x_cols = list(params["ols"]["x"])
        missing = [c for c in [y_col, *x_cols] if c not in table]
        if missing:
            raise DataError(f"stats.ols: columns {missing} not in table")
        x = np.column_stack([np.asarray(table[c], dtype=np.float64) for c in x_cols])
        y = np.asarray(table[y_col], dtype=np.float64)
        result = stats.ols_fit(x, y)
        rows = result.to_rows(names=x_cols)
        path = out_dir / "ols_table.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["term", "coef", "std_err", "t", "p"])
            writer.writeheader()
            writer.writerows(rows)
        section["ols"] = {
            "rows": rows,
            "adjusted_r2": result.adjusted_r2,
            "r2": result.r2,
            "dof": result.dof,
            "csv": str(path),
        }
    contrasts = params["wilcoxon"]
    if contrasts:
        results = []
        for contrast in contrasts:
            a_col, b_col = contrast["a"], contrast["b"]
            missing = [c for c in (a_col, b_col) if c not in table]
            if missing:
                raise DataError(f"stats.wilcoxon: columns {missing} not in table")
            res = stats.wilcoxon_signed_rank(
                np.asarray(table[a_col], dtype=np.float64),
                np.asarray(table[b_col], dtype=np.float64),
            )
            results.append(
                {"name": contrast.get("name", f"{a_col} vs {b_col}"), **res.to_dict()}
            )
        if params["bonferroni"]:
            corrected = stats.bonferroni([r["p"] for r in results])
            for row, cp in zip(results, corrected):
                row["p_bonferroni"] = float(cp)
        section["wilcoxon"] = results
    report["stages"]["stats"] = section


# ---------------------------------------------------------------------------
# Report writing


_SUMMARY_KEYS = [
    "subject_id",
    "model_id",
    "unit",
    "unit_index",
    "condition",
    "relative_position",
]
_SUMMARY_METRICS = {
    "score": ["mean_r", "median_fold_p", "brain_score", "alpha", "n_degenerate"],
    "cka": ["cka"],
    "gw": ["gw_loss", "gw_converged", "gw_iterations"],
}


def _write_summary(rows_by_stage: dict[str, list[dict]], out_dir: Path) -> Path:
    path = out_dir / "summary.csv"
    metric_cols: list[str] = []
    for stage in ("score", "cka", "gw"):
        if stage in rows_by_stage:
            metric_cols.extend(_SUMMARY_METRICS[stage])
    header = ["stage", *_SUMMARY_KEYS, *metric_cols, "error"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for stage, rows in rows_by_stage.items():
            for row in rows:
                writer.writerow(
                    [stage]
                    + [row.get(k, "") for k in _SUMMARY_KEYS]
                    + [row.get(k, "") for k in metric_cols]
                    + [row.get("error", "")]
                )
    return path


def _write_pervoxel(rows: list[dict], out_dir: Path) -> Path:
    path = out_dir / "pervoxel_r.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*_SUMMARY_KEYS, "fold", "voxel", "r"])
        for row in rows:
            if "_per_voxel_r" not in row:
                continue
            keys = [row.get(k, "") for k in _SUMMARY_KEYS]
            per_voxel = row["_per_voxel_r"]
            for fold in range(per_voxel.shape[0]):
                for voxel in range(per_voxel.shape[1]):
                    writer.writerow([*keys, fold, voxel, float(per_voxel[fold, voxel])])
    return path


def run_pipeline(cfg: dict, workers: int = 1, output_dir: str | Path | None = None) -> dict:
    """Execute the configured stages and write report files.

    Returns the report dict; raises :class:`ConfigError` on invalid configs
    and :class:`DataError` / :class:`ManifestError` on bad inputs.
    """
    cfg = json.loads(json.dumps(cfg))  # deep copy; report embeds resolved config
    if output_dir is not None:
        cfg["output_dir"] = str(Path(output_dir).resolve())
    issues = validate_config(cfg)
    if issues:
        raise ConfigError("; ".join(issues))
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    report: dict = {
        "format": "repalign-report/1",
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seed": cfg["seed"],
        "pipeline": cfg["pipeline"],
        "stages": {},
        "warnings": [],
    }

    rows_by_stage: dict[str, list[dict]] = {}
    score_rows: list[dict] = []
    for stage in cfg["pipeline"]:
        if stage == "synth":
            _run_synth(cfg, out_dir, report)
        elif stage in ("score", "cka", "gw"):
            rows = _metric_cells(cfg, stage, workers)
            if stage == "score":
                score_rows = rows
            for row in rows:
                if "error" in row:
                    message = (
                        f"{stage} cell ({row['activation_entry']}, "
                        f"{row['response_entry']}) failed: {row['error']}"
                    )
                    warnings.warn(message, RuntimeWarning, stacklevel=2)
                    report["warnings"].append(message)
                elif stage == "gw" and not row["gw_converged"]:
                    message = (
                        f"gw cell ({row['activation_entry']}, {row['response_entry']}) "
                        "did not converge"
                    )
                    warnings.warn(message, RuntimeWarning, stacklevel=2)
                    report["warnings"].append(message)
            rows_by_stage[stage] = rows
            report["stages"][stage] = {
                "cells": [
                    {k: v for k, v in row.items() if not k.startswith("_")}
                    for row in rows
                ]
            }
        elif stage == "reliability":
            _run_reliability(cfg, out_dir, report)
        elif stage == "pca":
            _run_pca(cfg, out_dir, report)
        elif stage == "stats":
            _run_stats(cfg, out_dir, report)

    report["config"] = cfg
    if rows_by_stage:
        report["summary_csv"] = str(_write_summary(rows_by_stage, out_dir))
    if score_rows:
        report["pervoxel_csv"] = str(_write_pervoxel(score_rows, out_dir))

    report_path = out_dir / "report.json"
    report_path.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    report["report_path"] = str(report_path)
    return report
