"""Clip manifest: one JSON record per line, plus window-center sampling."""
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union
import logging

import numpy as np
import pandas as pd

from .exceptions import ManifestError
from .texture_stats import DEFAULT_WINDOW_S

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ("clip_id", "path", "duration_s", "window_centers_s")
EDGE_TOL = 1e-9

PathLike = Union[str, Path]


@dataclass
class ManifestRecord:
    clip_id: str
    path: str
    duration_s: float
    window_centers_s: List[float] = field(default_factory=list)

    def resolve(self, base_dir: Optional[Path]) -> Path:
        p = Path(self.path)
        if base_dir is None or p.is_absolute():
            return p
        return base_dir / p


@dataclass
class Manifest:
    records: List[ManifestRecord]
    base_dir: Optional[Path] = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ManifestRecord]:
        return iter(self.records)

    def validate(self, window_s: float = DEFAULT_WINDOW_S) -> None:
        """Raise ManifestError on empty or duplicate ids, bad durations or windows outside a clip."""
        seen = set()
        half = window_s / 2.0
        for position, rec in enumerate(self.records):
            if not rec.clip_id:
                raise ManifestError(f"record {position}: empty clip_id")
            if rec.clip_id in seen:
                raise ManifestError(f"duplicate clip_id {rec.clip_id!r} at record {position}")
            seen.add(rec.clip_id)
            if not np.isfinite(rec.duration_s) or rec.duration_s <= 0:
                raise ManifestError(f"clip {rec.clip_id!r}: duration_s must be positive, got {rec.duration_s}")
            for t in rec.window_centers_s:
                if t - half < -EDGE_TOL or t + half > rec.duration_s + EDGE_TOL:
                    raise ManifestError(
                        f"clip {rec.clip_id!r}: window center {t:g} s does not admit a full "
                        f"{window_s:g} s window in a {rec.duration_s:g} s clip"
                    )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "clip_id": r.clip_id,
                    "path": r.path,
                    "duration_s": float(r.duration_s),
                    "window_centers_s": [float(t) for t in r.window_centers_s],
                }
                for r in self.records
            ],
            columns=list(MANIFEST_FIELDS),
        )


def _centers(value) -> List[float]:
    if value is None:
        return []
    if isinstance(value, float) and np.isnan(value):
        return []
    if not isinstance(value, (list, tuple, np.ndarray)):
        raise ManifestError(f"window_centers_s must be a list, got {value!r}")
    return [float(t) for t in value]


def parse_manifest(text: str, base_dir: Optional[Path] = None, window_s: float = DEFAULT_WINDOW_S) -> Manifest:
    """Parse JSON-lines manifest text and validate it."""
    if not text.strip():
        return Manifest(records=[], base_dir=base_dir)
    try:
        df = pd.read_json(
            StringIO(text),
            lines=True,
            dtype={"clip_id": str, "path": str, "duration_s": float},
            convert_dates=False,
        )
    except ValueError as e:
        raise ManifestError(f"manifest is not valid JSON lines: {e}")

    missing = [c for c in ("clip_id", "path", "duration_s") if c not in df.columns]
    if missing:
        raise ManifestError(f"manifest is missing required fields {missing}")
    if "window_centers_s" not in df.columns:
        df["window_centers_s"] = None

    records = []
    for row in df.itertuples(index=False):
        if pd.isna(row.clip_id) or pd.isna(row.path):
            raise ManifestError("clip_id and path are required on every record")
        records.append(ManifestRecord(
            clip_id=str(row.clip_id),
            path=str(row.path),
            duration_s=float(row.duration_s),
            window_centers_s=_centers(row.window_centers_s),
        ))
    manifest = Manifest(records=records, base_dir=base_dir)
    manifest.validate(window_s)
    return manifest


def read_manifest(path: PathLike, window_s: float = DEFAULT_WINDOW_S) -> Manifest:
    """Load and validate a manifest; relative clip paths resolve against its directory."""
    path = Path(path)
    manifest = parse_manifest(path.read_text(encoding="utf-8"), base_dir=path.parent, window_s=window_s)
    logger.info(f"Loaded manifest {path} with {len(manifest)} clips")
    return manifest


def write_manifest(path: PathLike, manifest: Manifest) -> None:
    frame = manifest.to_frame()
    text = frame.to_json(orient="records", lines=True, double_precision=15) if len(frame) else ""
    if text and not text.endswith("\n"):
        text += "\n"
    Path(path).write_text(text, encoding="utf-8")
    logger.info(f"Wrote manifest {path} with {len(manifest)} clips")


def sample_windows(
    duration_s: float,
    n: int,
    seed: Union[int, Sequence[int]] = 0,
    window_s: float = DEFAULT_WINDOW_S,
) -> np.ndarray:
    """Sorted window centers drawn uniformly from the admissible interval.

    A clip shorter than one window yields no centers and a warning.
    """
    half = window_s / 2.0
    if duration_s + EDGE_TOL < window_s:
        logger.warning(f"Clip of {duration_s:g} s is shorter than the {window_s:g} s window; skipping")
        return np.empty(0)
    low, high = half, max(half, duration_s - half)
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(low, high, size=n)) if high > low else np.full(n, low)
