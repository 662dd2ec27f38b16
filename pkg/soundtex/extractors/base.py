"""Per-clip feature extraction over a manifest.

Clips run concurrently in worker threads, bounded by a semaphore; results
are gathered back into manifest order so the output never depends on the
worker count.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import asyncio
import logging

import numpy as np

from ..config import PipelineConfig
from ..dsp_core import CochlearFilterBank, Waveform, make_cochlear_filterbank, resample
from ..manifest import EDGE_TOL, Manifest, ManifestRecord, sample_windows
from ..wav import decode_wav

logger = logging.getLogger(__name__)


@dataclass
class ClipResult:
    clip_id: str
    centers: np.ndarray
    rows: np.ndarray
    warnings: List[str] = field(default_factory=list)


@dataclass
class ExtractionResult:
    matrix: np.ndarray
    ids: List[Tuple[str, int]]
    manifest: Manifest
    warnings: List[str]

    @property
    def row_count(self) -> int:
        return self.matrix.shape[0]


class FeatureExtractor(ABC):
    """Base class for feature extractors."""

    kind: str = ""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.bank: CochlearFilterBank = make_cochlear_filterbank(
            n_channels=config.n_channels,
            low_hz=config.low_hz,
            high_hz=config.high_hz,
            sample_rate=config.sample_rate,
        )

    @property
    @abstractmethod
    def dim(self) -> int:
        """Length of one feature row."""

    @abstractmethod
    def extract_clip(self, waveform: Waveform, centers: np.ndarray) -> np.ndarray:
        """Feature rows (len(centers) x dim) for one clip at the working rate."""

    def load_clip(self, record: ManifestRecord, base_dir=None) -> Waveform:
        """Decode a clip and bring it to the working sample rate."""
        waveform = decode_wav(record.resolve(base_dir))
        if waveform.sample_rate != self.config.sample_rate:
            logger.debug(f"Resampling {record.clip_id} from {waveform.sample_rate} to {self.config.sample_rate} Hz")
            waveform = resample(waveform, self.config.sample_rate)
        return waveform

    def window_centers(self, record: ManifestRecord, position: int, n_windows: int, seed: int) -> np.ndarray:
        """Recorded centers if the manifest has them, else seeded uniform draws."""
        if record.window_centers_s:
            return np.asarray(record.window_centers_s, dtype=np.float64)
        return sample_windows(record.duration_s, n_windows, seed=[seed, position], window_s=self.config.window_s)

    def process_clip(
        self, record: ManifestRecord, position: int, n_windows: int, seed: int, base_dir=None
    ) -> ClipResult:
        """Feature rows for one clip, or an empty result with a warning when the clip cannot be windowed."""
        centers = self.window_centers(record, position, n_windows, seed)
        if centers.size == 0:
            message = (
                f"clip {record.clip_id}: {record.duration_s:g} s is shorter than the "
                f"{self.config.window_s:g} s window, skipped"
            )
            return ClipResult(record.clip_id, centers, np.empty((0, self.dim)), [message])
        waveform = self.load_clip(record, base_dir)
        if np.any(centers + self.config.window_s / 2.0 > waveform.duration_s + EDGE_TOL):
            message = (
                f"clip {record.clip_id}: file holds {waveform.duration_s:g} s but the manifest says "
                f"{record.duration_s:g} s, skipped"
            )
            logger.warning(message)
            return ClipResult(record.clip_id, np.empty(0), np.empty((0, self.dim)), [message])
        rows = self.extract_clip(waveform, centers)
        return ClipResult(record.clip_id, centers, rows)

    async def _process_limited(
        self, semaphore: asyncio.Semaphore, record: ManifestRecord, position: int,
        n_windows: int, seed: int, base_dir,
    ) -> ClipResult:
        async with semaphore:
            return await asyncio.to_thread(self.process_clip, record, position, n_windows, seed, base_dir)

    async def extract_manifest(
        self,
        manifest: Manifest,
        n_windows: Optional[int] = None,
        seed: int = 0,
        workers: int = 4,
    ) -> ExtractionResult:
        """Extract every clip of ``manifest``; the first clip failure is re-raised."""
        n_windows = n_windows or self.config.windows_per_clip
        workers = max(1, workers)
        logger.info(f"Extracting {self.kind} features for {len(manifest)} clips with {workers} workers")

        semaphore = asyncio.Semaphore(workers)
        tasks = [
            self._process_limited(semaphore, record, position, n_windows, seed, manifest.base_dir)
            for position, record in enumerate(manifest.records)
        ]
        results = await asyncio.gather(*tasks, return_exceptions=True)

        failures = [(rec, r) for rec, r in zip(manifest.records, results) if isinstance(r, Exception)]
        for rec, error in failures:
            logger.error(f"Error processing {rec.clip_id}: {error}")
        if failures:
            raise failures[0][1]

        rows, ids, warnings, records = [], [], [], []
        for record, result in zip(manifest.records, results):
            warnings.extend(result.warnings)
            rows.append(result.rows)
            ids.extend((record.clip_id, i) for i in range(result.rows.shape[0]))
            records.append(ManifestRecord(
                clip_id=record.clip_id,
                path=record.path,
                duration_s=record.duration_s,
                window_centers_s=[float(t) for t in result.centers],
            ))

        matrix = np.vstack(rows) if rows else np.empty((0, self.dim))
        logger.info(f"Extracted {matrix.shape[0]} rows of dim {self.dim}, {len(warnings)} warnings")
        return ExtractionResult(
            matrix=matrix,
            ids=ids,
            manifest=Manifest(records=records, base_dir=manifest.base_dir),
            warnings=warnings,
        )

    def extract(self, manifest: Manifest, n_windows: Optional[int] = None, seed: int = 0, workers: int = 4):
        """Synchronous wrapper around extract_manifest."""
        return asyncio.run(self.extract_manifest(manifest, n_windows=n_windows, seed=seed, workers=workers))
