from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple
import logging

from dotenv import dotenv_values

from .exceptions import InvalidConfigError

logger = logging.getLogger(__name__)

RESCALE_MODES = ("dim", "sqrtdim")
PRUNE_SCOPES = ("per-cluster", "global", "off")
FEATURE_KINDS = ("texture", "spectrum")


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables of the extraction and labeling pipeline."""
    # Cochlear front end
    sample_rate: int = 20000
    n_channels: int = 32
    low_hz: float = 20.0
    high_hz: float = 10000.0
    env_rate: int = 400
    compression: float = 0.3

    # Texture statistics
    n_mod_filters: int = 10
    mod_low_hz: float = 0.5
    mod_high_hz: float = 200.0
    mod_q: float = 2.0
    window_s: float = 3.75
    corr_offsets: Tuple[int, ...] = (1, 2, 3, 5)
    rescale: str = "dim"

    # Sampling / labels
    windows_per_clip: int = 10
    spectrum_window_s: float = 1.0 / 30.0
    k: int = 30
    n_components: int = 30
    prune: str = "per-cluster"
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6

    # Probe
    probe_epochs: int = 200
    probe_lr: float = 1.0
    probe_l2: float = 1e-4

    log_level: str = "INFO"
    extra: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidConfigError("sample_rate must be positive")
        if self.n_channels < 2:
            raise InvalidConfigError("n_channels must be at least 2")
        if not 0 < self.low_hz < self.high_hz <= self.sample_rate / 2:
            raise InvalidConfigError(
                f"passband must satisfy 0 < low_hz < high_hz <= sample_rate/2, "
                f"got [{self.low_hz}, {self.high_hz}] at {self.sample_rate} Hz"
            )
        if self.env_rate <= 0:
            raise InvalidConfigError("env_rate must be positive")
        if self.compression <= 0:
            raise InvalidConfigError("compression exponent must be positive")
        if self.n_mod_filters < 1:
            raise InvalidConfigError("n_mod_filters must be at least 1")
        if not 0 < self.mod_low_hz < self.mod_high_hz <= self.env_rate / 2:
            raise InvalidConfigError("modulation band must lie inside (0, env_rate/2]")
        if self.mod_q <= 0:
            raise InvalidConfigError("mod_q must be positive")
        if self.window_s <= 0:
            raise InvalidConfigError("window_s must be positive")
        if not self.corr_offsets or any(d < 1 for d in self.corr_offsets):
            raise InvalidConfigError("corr_offsets must be positive integers")
        if self.rescale not in RESCALE_MODES:
            raise InvalidConfigError(f"rescale must be one of {RESCALE_MODES}, got {self.rescale!r}")
        if self.prune not in PRUNE_SCOPES:
            raise InvalidConfigError(f"prune must be one of {PRUNE_SCOPES}, got {self.prune!r}")
        if self.windows_per_clip < 1:
            raise InvalidConfigError("windows_per_clip must be at least 1")
        if self.spectrum_window_s <= 0:
            raise InvalidConfigError("spectrum_window_s must be positive")
        if self.k < 2:
            raise InvalidConfigError("k must be at least 2")
        if self.n_components < 1:
            raise InvalidConfigError("n_components must be at least 1")
        if self.kmeans_max_iter < 1 or self.kmeans_tol < 0:
            raise InvalidConfigError("kmeans_max_iter must be >= 1 and kmeans_tol >= 0")
        if self.probe_epochs < 0 or self.probe_lr <= 0 or self.probe_l2 < 0:
            raise InvalidConfigError("probe settings must satisfy epochs >= 0, lr > 0, l2 >= 0")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.sample_rate))

    @property
    def window_env_len(self) -> int:
        return int(round(self.window_s * self.env_rate))

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Return a copy with the given fields replaced (None values are ignored)."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        return replace(self, **overrides)


def _coerce(name: str, raw: str, default: Any) -> Any:
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(int(part) for part in raw.split(",") if part.strip())
    return raw.strip()


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """Build a PipelineConfig from an optional key=value file.

    Keys are field names in upper or lower case (``N_CHANNELS=32``). Unknown
    keys are kept in ``extra`` and logged. The process environment is not
    consulted.
    """
    if not path:
        return PipelineConfig()

    values = dotenv_values(path)
    defaults = PipelineConfig()
    known = {f.name: getattr(defaults, f.name) for f in fields(PipelineConfig) if f.name != "extra"}

    overrides: Dict[str, Any] = {}
    extra: Dict[str, str] = {}
    for key, raw in values.items():
        if raw is None:
            continue
        name = key.strip().lower()
        if name in known:
            try:
                overrides[name] = _coerce(name, raw, known[name])
            except ValueError as e:
                raise InvalidConfigError(f"Invalid value for {key} in {path}: {raw!r} ({e})")
        else:
            extra[key] = raw
            logger.warning(f"Ignoring unknown config key {key} in {path}")

    logger.info(f"Loaded {len(overrides)} config overrides from {path}")
    return PipelineConfig(extra=extra, **overrides)
