import numpy as np

from ..dsp_core import Waveform, cochleagram
from ..labeling import spectrum_from_cochleagram
from .base import FeatureExtractor


class SpectrumExtractor(FeatureExtractor):
    """Short-window channel means; the clip's cochleagram is computed once."""

    kind = "spectrum"

    @property
    def dim(self) -> int:
        return self.config.n_channels

    def extract_clip(self, waveform: Waveform, centers: np.ndarray) -> np.ndarray:
        c = cochleagram(waveform, self.bank, env_rate=self.config.env_rate, exponent=self.config.compression)
        return np.vstack([
            spectrum_from_cochleagram(c, float(t), self.config.spectrum_window_s) for t in centers
        ])
