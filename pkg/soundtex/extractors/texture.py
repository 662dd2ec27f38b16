import logging

import numpy as np

from ..config import PipelineConfig
from ..dsp_core import Waveform
from ..texture_stats import TextureLayout, make_modulation_filterbank, texture_for_window
from .base import FeatureExtractor

logger = logging.getLogger(__name__)


class TextureExtractor(FeatureExtractor):
    """Sound-texture vectors, one per window center."""

    kind = "texture"

    def __init__(self, config: PipelineConfig):
        super().__init__(config)
        self.mod_bank = make_modulation_filterbank(
            n=config.n_mod_filters,
            low_hz=config.mod_low_hz,
            high_hz=config.mod_high_hz,
            env_len=config.window_env_len,
            env_rate=config.env_rate,
            q=config.mod_q,
        )
        self.layout = TextureLayout(
            n_channels=config.n_channels,
            offsets=tuple(config.corr_offsets),
            n_mod=config.n_mod_filters,
            rescale=config.rescale,
        )

    @property
    def dim(self) -> int:
        return self.layout.dim

    def extract_clip(self, waveform: Waveform, centers: np.ndarray) -> np.ndarray:
        rows = np.empty((len(centers), self.dim))
        for i, t in enumerate(centers):
            texture = texture_for_window(
                waveform,
                self.bank,
                self.mod_bank,
                float(t),
                win=self.config.window_s,
                offsets=self.config.corr_offsets,
                rescale=self.config.rescale,
                env_rate=self.config.env_rate,
                exponent=self.config.compression,
            )
            rows[i] = texture.to_vector()
        return rows
