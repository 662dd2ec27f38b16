"""Persistence: the ASTX feature store, JSON model documents and CSV tables.

ASTX layout (little-endian):

    magic "ASTX" | version u32 | row_count u64 | dim u32 | dtype u32 | trailer_bytes u32
    payload: row_count x dim float32, row-major
    trailer: per row, u32 byte length + UTF-8 clip_id + u32 window index
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union
import json
import logging
import struct

import numpy as np
import pandas as pd

from .exceptions import (
    ModelFormatError,
    StoreDimensionError,
    StoreMagicError,
    StoreVersionError,
    TruncatedPayloadError,
    TruncatedTrailerError,
)
from .labeling import ClusterModel, PcaModel
from .probe import LinearModel

logger = logging.getLogger(__name__)

STORE_MAGIC = b"ASTX"
STORE_VERSION = 1
DTYPE_FLOAT32 = 1
HEADER = struct.Struct("<4sIQIII")
HEADER_SIZE = HEADER.size  # 28
MAX_DIM = 2 ** 32 - 1
MODEL_FORMAT_VERSION = 1

PathLike = Union[str, Path]
RowId = Tuple[str, int]


@dataclass(frozen=True)
class StoreHeader:
    version: int
    row_count: int
    dim: int
    dtype: int
    trailer_bytes: int

    @property
    def payload_bytes(self) -> int:
        return 4 * self.row_count * self.dim

    @property
    def total_bytes(self) -> int:
        return HEADER_SIZE + self.payload_bytes + self.trailer_bytes


@dataclass(frozen=True, eq=False)
class FeatureStore:
    matrix: np.ndarray
    ids: List[RowId]

    @property
    def row_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def clip_ids(self) -> List[str]:
        return [clip_id for clip_id, _ in self.ids]


def _encode_trailer(ids: Sequence[RowId]) -> bytes:
    parts = []
    for clip_id, window in ids:
        raw = clip_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", int(window)))
    return b"".join(parts)


def encode_store(matrix: np.ndarray, ids: Sequence[RowId]) -> bytes:
    """Serialize a float32 matrix and its row ids to ASTX bytes."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise StoreDimensionError(f"store matrix must be 2-D, got shape {matrix.shape}")
    rows, dim = matrix.shape
    if dim > MAX_DIM:
        raise StoreDimensionError(f"dim {dim} does not fit in 32 bits")
    if len(ids) != rows:
        raise StoreDimensionError(f"{len(ids)} row ids for {rows} rows")
    trailer = _encode_trailer(ids)
    header = HEADER.pack(STORE_MAGIC, STORE_VERSION, rows, dim, DTYPE_FLOAT32, len(trailer))
    payload = np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    return header + payload + trailer


def write_store(path: PathLike, matrix: np.ndarray, ids: Sequence[RowId]) -> None:
    data = encode_store(matrix, ids)
    Path(path).write_bytes(data)
    logger.info(f"Wrote feature store {path}: {len(ids)} rows x {np.asarray(matrix).shape[1]} dims")


def decode_header(data: bytes) -> StoreHeader:
    """Parse and check the 28-byte ASTX header."""
    if len(data) < 4 or data[:4] != STORE_MAGIC:
        raise StoreMagicError(bytes(data[:4]))
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"truncated payload: header needs {HEADER_SIZE} bytes, file has {len(data)}")
    _, version, rows, dim, dtype, trailer_bytes = HEADER.unpack(data[:HEADER_SIZE])
    if version != STORE_VERSION:
        raise StoreVersionError(version, STORE_VERSION)
    if dtype != DTYPE_FLOAT32:
        raise StoreDimensionError(f"unknown dtype tag {dtype}")
    return StoreHeader(version, rows, dim, dtype, trailer_bytes)


def read_store_header(path: PathLike) -> StoreHeader:
    """Read only the header of an ASTX file."""
    with open(path, "rb") as f:
        return decode_header(f.read(HEADER_SIZE))


def decode_store(data: bytes) -> FeatureStore:
    """Parse ASTX bytes into a FeatureStore, checking every declared length."""
    header = decode_header(data)
    end_payload = HEADER_SIZE + header.payload_bytes
    if len(data) < end_payload:
        raise TruncatedPayloadError(
            f"truncated payload: expected {header.payload_bytes} bytes, found {len(data) - HEADER_SIZE}"
        )
    if len(data) < header.total_bytes:
        raise TruncatedTrailerError(
            f"truncated trailer: expected {header.trailer_bytes} bytes, found {len(data) - end_payload}"
        )
    if len(data) > header.total_bytes:
        raise StoreDimensionError(f"{len(data) - header.total_bytes} unexpected bytes after trailer")

    matrix = np.frombuffer(data, dtype="<f4", count=header.row_count * header.dim, offset=HEADER_SIZE)
    matrix = matrix.reshape(header.row_count, header.dim).astype(np.float32)

    ids: List[RowId] = []
    pos, end = end_payload, header.total_bytes
    for _ in range(header.row_count):
        if pos + 4 > end:
            raise TruncatedTrailerError("truncated trailer: row id length missing")
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + length + 4 > end:
            raise TruncatedTrailerError("truncated trailer: row id runs past end of file")
        clip_id = data[pos:pos + length].decode("utf-8")
        pos += length
        (window,) = struct.unpack_from("<I", data, pos)
        pos += 4
        ids.append((clip_id, window))
    if pos != end:
        raise StoreDimensionError(f"trailer declares {header.trailer_bytes} bytes but row ids use {pos - end_payload}")
    return FeatureStore(matrix=matrix, ids=ids)


def read_store(path: PathLike) -> FeatureStore:
    store = decode_store(Path(path).read_bytes())
    logger.debug(f"Read feature store {path}: {store.row_count} x {store.dim}")
    return store


# Model documents

def _to_list(a) -> Any:
    return None if a is None else np.asarray(a, dtype=np.float64).tolist()


def model_to_dict(model) -> Dict[str, Any]:
    """JSON-ready document for a cluster, PCA or linear model."""
    if isinstance(model, ClusterModel):
        return {
            "kind": "cluster",
            "format_version": MODEL_FORMAT_VERSION,
            "k": model.k,
            "seed": model.seed,
            "inertia": model.inertia,
            "iterations_run": model.iterations_run,
            "inertia_history": list(model.inertia_history),
            "feature_rescale": model.feature_rescale,
            "centroids": _to_list(model.centroids),
        }
    if isinstance(model, PcaModel):
        return {
            "kind": "pca",
            "format_version": MODEL_FORMAT_VERSION,
            "sign_convention": model.sign_convention,
            "mean": _to_list(model.mean),
            "components": _to_list(model.components),
            "explained_variance": _to_list(model.explained_variance),
        }
    if isinstance(model, LinearModel):
        return {
            "kind": "linear",
            "format_version": MODEL_FORMAT_VERSION,
            "classes": model.classes,
            "feature_dim": model.feature_dim,
            "weights": _to_list(model.weights),
            "bias": _to_list(model.bias),
            "feature_mean": _to_list(model.feature_mean),
            "feature_scale": _to_list(model.feature_scale),
            "training_log": list(model.training_log),
        }
    raise ModelFormatError(f"cannot serialize {type(model).__name__}")


def _array(doc: Dict[str, Any], key: str, ndim: int) -> np.ndarray:
    value = np.asarray(doc[key], dtype=np.float64)
    if value.ndim != ndim:
        raise ModelFormatError(f"field {key!r} must be {ndim}-D")
    return value


def model_from_dict(doc: Dict[str, Any], expected_kind: str = None):
    """Rebuild a model from its document; raises ModelFormatError."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ModelFormatError("model document has no 'kind'")
    kind = doc["kind"]
    if expected_kind is not None and kind != expected_kind:
        raise ModelFormatError(f"expected a {expected_kind} model, found {kind!r}")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {doc.get('format_version')} is not supported (expected {MODEL_FORMAT_VERSION})"
        )
    try:
        if kind == "cluster":
            return ClusterModel(
                k=int(doc["k"]),
                centroids=_array(doc, "centroids", 2),
                inertia=float(doc["inertia"]),
                iterations_run=int(doc["iterations_run"]),
                seed=int(doc["seed"]),
                inertia_history=[float(v) for v in doc.get("inertia_history", [])],
                feature_rescale=doc.get("feature_rescale"),
            )
        if kind == "pca":
            return PcaModel(
                mean=_array(doc, "mean", 1),
                components=_array(doc, "components", 2),
                explained_variance=_array(doc, "explained_variance", 1),
                sign_convention=doc.get("sign_convention", "max-abs-positive"),
            )
        if kind == "linear":
            mean = doc.get("feature_mean")
            return LinearModel(
                weights=_array(doc, "weights", 2),
                bias=_array(doc, "bias", 1),
                classes=int(doc["classes"]),
                feature_dim=int(doc["feature_dim"]),
                training_log=[float(v) for v in doc.get("training_log", [])],
                feature_mean=None if mean is None else _array(doc, "feature_mean", 1),
                feature_scale=None if mean is None else _array(doc, "feature_scale", 1),
            )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed {kind} model: {e}")
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(path: PathLike, model) -> None:
    """Write a model as a JSON document."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f)
    logger.info(f"Saved {type(model).__name__} to {path}")


def load_model(path: PathLike, expected_kind: str = None):
    """Load a model JSON file, optionally requiring its kind."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path} is not a JSON model document: {e}")
    return model_from_dict(doc, expected_kind)


# Tables

def write_table(path: PathLike, frame: pd.DataFrame) -> None:
    """CSV with full float precision and Unix line endings."""
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    logger.info(f"Wrote {len(frame)} rows to {path}")


def read_table(path: PathLike) -> pd.DataFrame:
    """Read a CSV table keeping clip ids and codes as strings."""
    return pd.read_csv(path, dtype={"clip_id": str, "code": str}, keep_default_na=False)
