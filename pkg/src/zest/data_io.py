"""Dataset ingestion and the versioned on-disk document formats.

Binary datasets are stored bit-packed per row. JSON documents (model, base,
result) carry a format tag that readers check before touching any payload;
numbers round-trip exactly because Python serializes shortest-repr floats.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ais import AisConfig, AisResult, BaseDistribution, Schedule
from .rbm import RbmModel

MODEL_FORMAT = "zest-rbm-v1"
BASE_FORMAT = "zest-base-v1"
RESULT_FORMAT = "zest-ais-result-v1"
ZBD_MAGIC = b"ZBD1"
IDX_IMAGES_MAGIC = 0x00000803


class FormatError(ValueError):
    """A file does not satisfy its declared (or expected) format."""


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    """Uniform-width {0,1} rows, bit-packed (big-endian bit order per byte)."""

    n_examples: int
    n_features: int
    packed: np.ndarray

    def __post_init__(self):
        row_bytes = (self.n_features + 7) // 8
        arr = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if arr.shape != (self.n_examples, row_bytes):
            raise ValueError(
                f"packed shape {arr.shape} inconsistent with "
                f"{self.n_examples} rows of {self.n_features} bits"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "packed", arr)

    @classmethod
    def from_dense(cls, rows) -> "BinaryDataset":
        arr = np.asarray(rows)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("dataset must be a non-empty 2-d array")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("dataset must contain only 0/1 values")
        packed = np.packbits(arr.astype(np.uint8), axis=1)
        return cls(arr.shape[0], arr.shape[1], packed)

    def to_dense(self) -> np.ndarray:
        bits = np.unpackbits(self.packed, axis=1)[:, : self.n_features]
        return bits.astype(np.float64)

    def row(self, i: int) -> np.ndarray:
        return np.unpackbits(self.packed[i])[: self.n_features].astype(np.float64)

    def column_means(self) -> np.ndarray:
        bits = np.unpackbits(self.packed, axis=1)[:, : self.n_features]
        return bits.mean(axis=0, dtype=np.float64)


def save_zbd(path, dataset: BinaryDataset) -> None:
    with open(path, "wb") as f:
        f.write(ZBD_MAGIC)
        f.write(struct.pack("<II", dataset.n_examples, dataset.n_features))
        f.write(dataset.packed.tobytes())


def load_zbd(path) -> BinaryDataset:
    data = Path(path).read_bytes()
    if data[:4] != ZBD_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    n, f = struct.unpack("<II", data[4:12])
    row_bytes = (f + 7) // 8
    body = data[12:]
    if len(body) != n * row_bytes:
        raise FormatError(f"{path}: expected {n * row_bytes} payload bytes, found {len(body)}")
    packed = np.frombuffer(body, dtype=np.uint8).reshape(n, row_bytes)
    return BinaryDataset(n, f, packed)


def load_idx(path, threshold: float = 0.5) -> BinaryDataset:
    """Parse big-endian idx3-ubyte images, binarizing at intensity/255 >= threshold."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise FormatError(f"{path}: truncated idx header")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"{path}: bad idx magic 0x{magic:08x}")
    expected = n * rows * cols
    body = data[16:]
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} pixels, found {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(n, rows * cols)
    bits = (pixels.astype(np.float64) / 255.0) >= threshold
    return BinaryDataset.from_dense(bits.astype(np.uint8))


def load_libsvm_binary(path, n_features: int) -> BinaryDataset:
    """Parse sparse `label index:value` lines; a present index sets its bit.

    Indices are 1-based; labels are discarded. Malformed lines and indices
    beyond n_features report the offending line number.
    """
    rows: list[np.ndarray] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            row = np.zeros(n_features, dtype=np.uint8)
            for tok in parts[1:]:
                idx_s, sep, _ = tok.partition(":")
                if not sep:
                    raise FormatError(f"{path}:{lineno}: malformed feature {tok!r}")
                try:
                    idx = int(idx_s)
                except ValueError as e:
                    raise FormatError(f"{path}:{lineno}: malformed index {idx_s!r}") from e
                if not 1 <= idx <= n_features:
                    raise FormatError(
                        f"{path}:{lineno}: index {idx} outside [1, {n_features}]"
                    )
                row[idx - 1] = 1
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no examples")
    return BinaryDataset.from_dense(np.stack(rows))


def _check_format(doc: dict, expected: str, path) -> None:
    tag = doc.get("format")
    if tag != expected:
        raise FormatError(f"{path}: format tag {tag!r}, expected {expected!r}")


def save_model(path, model: RbmModel) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "n_visible": model.n_visible,
        "n_hidden": model.n_hidden,
        "weights": model.weights.tolist(),
        "visible_bias": model.visible_bias.tolist(),
        "hidden_bias": model.hidden_bias.tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_model(path) -> RbmModel:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    _check_format(doc, MODEL_FORMAT, path)
    n_v, n_h = int(doc["n_visible"]), int(doc["n_hidden"])
    w = np.asarray(doc["weights"], dtype=np.float64)
    b = np.asarray(doc["visible_bias"], dtype=np.float64)
    c = np.asarray(doc["hidden_bias"], dtype=np.float64)
    if w.shape != (n_h, n_v) or b.shape != (n_v,) or c.shape != (n_h,):
        raise FormatError(f"{path}: array lengths inconsistent with declared sizes")
    return RbmModel(w, b, c)


def save_base(path, base: BaseDistribution, n_hidden: int | None = None, spec: dict | None = None) -> None:
    doc = {
        "format": BASE_FORMAT,
        "B": base.B.tolist(),
        "log_z0": base.log_z0,
        "n_hidden": n_hidden,
        "spec": spec,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_base(path) -> BaseDistribution:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    _check_format(doc, BASE_FORMAT, path)
    return BaseDistribution(np.asarray(doc["B"], dtype=np.float64), float(doc["log_z0"]))


def save_result(path, result: AisResult, include_samples: bool = True) -> None:
    doc = {
        "format": RESULT_FORMAT,
        "log_z_ais": result.log_z_ais,
        "log_z0": result.log_z0,
        "sample_mean": result.sample_mean,
        "sample_std": result.sample_std,
        "n_beta": result.config.n_beta,
        "n_samples": result.config.n_samples,
        "seed": result.config.seed,
        "schedule": result.config.schedule.value,
        "wall_time": result.wall_time,
        "samples": result.samples.tolist() if include_samples else None,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_result(path) -> AisResult:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    _check_format(doc, RESULT_FORMAT, path)
    samples = doc.get("samples")
    samples = np.asarray(samples if samples is not None else [], dtype=np.float64)
    return AisResult(
        log_z_ais=float(doc["log_z_ais"]),
        log_z0=float(doc["log_z0"]),
        samples=samples,
        sample_mean=float(doc["sample_mean"]),
        sample_std=float(doc["sample_std"]),
        config=AisConfig(
            n_beta=int(doc["n_beta"]),
            n_samples=int(doc["n_samples"]),
            seed=int(doc["seed"]),
            schedule=Schedule(doc["schedule"]),
        ),
        wall_time=float(doc["wall_time"]),
    )
