"""On-disk matrix interchange format and train-fit/test-apply standardization.

A dataset is a JSON manifest (``manifest.json``) plus one raw binary payload
per matrix. The manifest holds an ``entries`` array; each entry records
``name``, ``path`` (relative to the manifest), ``rows``, ``cols``,
``dtype`` (always ``"f32le"``) and a free-form ``meta`` object. Payloads are
row-major little-endian IEEE-754 float32 with no header, so any scientific
environment can read or write them directly. Round trips are bit-exact.

Matrices containing NaN or Inf are rejected both on save and on load:
downstream alignment metrics are undefined on them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ManifestError

DTYPE_TAG = "f32le"
_F32 = np.dtype("<f4")

ACTIVATION_UNITS = ("layer", "head_output", "attention_weights")


def _check_matrix(data: np.ndarray, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=_F32)
    if arr.ndim != 2:
        raise DataError(f"{what}: expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{what}: empty matrix of shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError(f"{what}: matrix contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class StimulusSet:
    """Ordered stimulus identifiers, optionally with the sentence strings.

    Order is canonical: every matrix row in an associated tensor corresponds
    to the id at the same position.
    """

    ids: tuple[str, ...]
    texts: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.ids) < 1:
            raise DataError("StimulusSet: needs at least one stimulus id")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("StimulusSet: ids must be unique")
        if self.texts is not None and len(self.texts) != len(self.ids):
            raise DataError("StimulusSet: texts length must match ids")

    @property
    def count(self) -> int:
        return len(self.ids)

    @classmethod
    def from_text_file(cls, path: str | Path) -> "StimulusSet":
        """One sentence per line, UTF-8; id is the 0-based line number."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        texts = tuple(line.strip() for line in lines if line.strip())
        if not texts:
            raise DataError(f"stimulus file {path} contains no sentences")
        return cls(ids=tuple(str(i) for i in range(len(texts))), texts=texts)


@dataclass(frozen=True)
class ActivationTensor:
    """Stimuli x features matrix for one (model, unit, condition) triple.

    ``unit`` is the granularity of the extraction: a whole layer, one head's
    output vectors, or one head's flattened attention weights. ``condition``
    is free-form; ``"pos"`` and ``"nopos"`` mark intact vs zeroed positional
    encodings.
    """

    data: np.ndarray
    model_id: str
    unit: str = "layer"
    unit_index: int = 0
    condition: str = "pos"

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _check_matrix(self.data, "ActivationTensor"))
        if self.unit not in ACTIVATION_UNITS:
            raise DataError(
                f"ActivationTensor: unit must be one of {ACTIVATION_UNITS}, got {self.unit!r}"
            )
        if self.unit_index < 0:
            raise DataError("ActivationTensor: unit_index must be nonnegative")
        if not self.model_id:
            raise DataError("ActivationTensor: model_id must be nonempty")
        if not self.condition:
            raise DataError("ActivationTensor: condition must be nonempty")

    @property
    def n_stimuli(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ResponseMatrix:
    """Stimuli x voxels matrix for one subject, with optional ROI labels."""

    data: np.ndarray
    subject_id: str
    voxel_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _check_matrix(self.data, "ResponseMatrix"))
        if not self.subject_id:
            raise DataError("ResponseMatrix: subject_id must be nonempty")
        if self.voxel_labels is not None and len(self.voxel_labels) != self.data.shape[1]:
            raise DataError("ResponseMatrix: voxel_labels length must equal n_voxels")

    @property
    def n_stimuli(self) -> int:
        return self.data.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# Manifest + payload IO


def _read_manifest(manifest_path: Path) -> dict:
    if not manifest_path.exists():
        raise ManifestError(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise ManifestError(f"manifest {manifest_path} must contain an 'entries' array")
    return doc


def _find_entry(doc: dict, manifest_path: Path, entry_name: str) -> dict:
    matches = [e for e in doc["entries"] if e.get("name") == entry_name]
    if not matches:
        raise ManifestError(f"entry {entry_name!r} not listed in {manifest_path}")
    if len(matches) > 1:
        raise ManifestError(f"entry {entry_name!r} is duplicated in {manifest_path}")
    return matches[0]


def manifest_entry_names(manifest_path: str | Path) -> list[str]:
    """Names of all entries in a manifest, in file order."""
    doc = _read_manifest(Path(manifest_path))
    return [e.get("name", "") for e in doc["entries"]]


def load_array(manifest_path: str | Path, entry_name: str) -> tuple[np.ndarray, dict]:
    """Load one entry as a float32 matrix together with its meta object."""
    manifest_path = Path(manifest_path)
    doc = _read_manifest(manifest_path)
    entry = _find_entry(doc, manifest_path, entry_name)
    for key in ("path", "rows", "cols", "dtype"):
        if key not in entry:
            raise ManifestError(f"entry {entry_name!r} is missing required field {key!r}")
    if entry["dtype"] != DTYPE_TAG:
        raise ManifestError(
            f"entry {entry_name!r} has dtype {entry['dtype']!r}; only {DTYPE_TAG!r} is supported"
        )
    rows, cols = int(entry["rows"]), int(entry["cols"])
    if rows < 1 or cols < 1:
        raise ManifestError(f"entry {entry_name!r} declares empty shape {rows}x{cols}")
    payload_path = manifest_path.parent / entry["path"]
    if not payload_path.exists():
        raise ManifestError(f"payload not found: {payload_path}")
    raw = payload_path.read_bytes()
    expected = rows * cols * 4
    if len(raw) != expected:
        raise ManifestError(
            f"payload {payload_path} has {len(raw)} bytes, expected {expected} "
            f"for {rows}x{cols} float32"
        )
    arr = np.frombuffer(raw, dtype=_F32).reshape(rows, cols)
    if not np.isfinite(arr).all():
        raise ManifestError(f"payload {payload_path} contains NaN or Inf")
    meta = entry.get("meta", {})
    return arr.copy(), dict(meta) if isinstance(meta, dict) else {}


def _payload_filename(doc: dict, entry_name: str) -> str:
    stem = re.sub(r"[^A-Za-z0-9._-]+", "_", entry_name) or "entry"
    taken = {e.get("path") for e in doc["entries"] if e.get("name") != entry_name}
    candidate = f"{stem}.f32"
    suffix = 1
    while candidate in taken:
        candidate = f"{stem}_{suffix}.f32"
        suffix += 1
    return candidate


def save_array(
    data: np.ndarray,
    manifest_path: str | Path,
    entry_name: str,
    meta: dict | None = None,
) -> None:
    """Write one matrix entry, creating or updating the manifest.

    An existing entry with the same name is replaced; its payload file is
    reused. Payload bytes are the row-major little-endian float32 image of
    the data, so ``load_array`` inverts this bit-exactly.
    """
    if not entry_name:
        raise ManifestError("entry name must be nonempty")
    arr = _check_matrix(np.asarray(data), f"entry {entry_name!r}")
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    if manifest_path.exists():
        doc = _read_manifest(manifest_path)
    else:
        doc = {"format": "repalign-manifest/1", "entries": []}

    existing = [e for e in doc["entries"] if e.get("name") == entry_name]
    rel_path = existing[0]["path"] if existing else _payload_filename(doc, entry_name)
    payload_path = manifest_path.parent / rel_path
    try:
        payload_path.write_bytes(arr.tobytes(order="C"))
    except OSError as exc:
        raise ManifestError(f"cannot write payload {payload_path}: {exc}") from exc

    entry = {
        "name": entry_name,
        "path": rel_path,
        "rows": int(arr.shape[0]),
        "cols": int(arr.shape[1]),
        "dtype": DTYPE_TAG,
        "meta": meta or {},
    }
    if existing:
        doc["entries"][doc["entries"].index(existing[0])] = entry
    else:
        doc["entries"].append(entry)
    manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def save_matrix(
    m: ActivationTensor | ResponseMatrix,
    manifest_path: str | Path,
    entry_name: str,
) -> None:
    """Persist a typed matrix; its metadata goes into the entry's meta object."""
    if isinstance(m, ActivationTensor):
        meta = {
            "kind": "activations",
            "model_id": m.model_id,
            "unit": m.unit,
            "unit_index": m.unit_index,
            "condition": m.condition,
        }
    elif isinstance(m, ResponseMatrix):
        meta = {"kind": "responses", "subject_id": m.subject_id}
        if m.voxel_labels is not None:
            meta["voxel_labels"] = list(m.voxel_labels)
    else:
        raise DataError(f"save_matrix: unsupported type {type(m).__name__}")
    save_array(m.data, manifest_path, entry_name, meta=meta)


def load_matrix(
    manifest_path: str | Path, entry_name: str
) -> ActivationTensor | ResponseMatrix:
    """Load an entry back as the typed matrix its meta object describes."""
    arr, meta = load_array(manifest_path, entry_name)
    kind = meta.get("kind")
    if kind == "activations" or (kind is None and "model_id" in meta):
        return ActivationTensor(
            data=arr,
            model_id=str(meta.get("model_id", "")),
            unit=str(meta.get("unit", "layer")),
            unit_index=int(meta.get("unit_index", 0)),
            condition=str(meta.get("condition", "pos")),
        )
    if kind == "responses" or (kind is None and "subject_id" in meta):
        labels = meta.get("voxel_labels")
        return ResponseMatrix(
            data=arr,
            subject_id=str(meta.get("subject_id", "")),
            voxel_labels=tuple(labels) if labels is not None else None,
        )
    raise ManifestError(
        f"entry {entry_name!r} is neither an activation nor a response matrix; "
        "use load_array for plain matrices"
    )


# ---------------------------------------------------------------------------
# Column standardization (fit on train, apply to train and test)


@dataclass(frozen=True)
class ColumnStats:
    """Per-column means and population standard deviations (divisor n)."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64).ravel()
        stds = np.asarray(self.stds, dtype=np.float64).ravel()
        if means.shape != stds.shape:
            raise DataError("ColumnStats: means and stds must have equal length")
        if np.any(stds < 0):
            raise DataError("ColumnStats: stds must be nonnegative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)


def zscore_fit(train: np.ndarray) -> ColumnStats:
    """Column means and population stds of the training block.

    Columns whose values are all identical get std recorded as exactly 0;
    ``zscore_apply`` maps them to zeros instead of dividing by noise-level
    std estimates.
    """
    arr = np.asarray(train, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("zscore_fit: expected a 2-D matrix")
    if arr.shape[0] < 2:
        raise DataError("zscore_fit: need at least 2 rows")
    means = arr.mean(axis=0)
    stds = arr.std(axis=0)
    constant = np.all(arr == arr[0, :], axis=0)
    stds = np.where(constant, 0.0, stds)
    return ColumnStats(means=means, stds=stds)


def zscore_apply(stats: ColumnStats, m: np.ndarray) -> np.ndarray:
    """Standardize columns with previously fitted stats; std-0 columns map to 0."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != stats.means.shape[0]:
        raise DataError(
            f"zscore_apply: column count {arr.shape} does not match stats "
            f"({stats.means.shape[0]} columns)"
        )
    safe = np.where(stats.stds > 0, stats.stds, 1.0)
    out = (arr - stats.means) / safe
    out[:, stats.stds == 0] = 0.0
    return out
