"""Static figures: cochleagram graymaps (PGM P5) and statistic bar charts (SVG)."""
from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np

from .dsp_core import Cochleagram
from .exceptions import InvalidConfigError, InvalidInputError, OutOfRangeError
from .labeling import ClusterModel
from .texture_stats import TextureLayout

logger = logging.getLogger(__name__)

COLORMAPS = ("grayscale", "diverging")
NORMALIZATIONS = ("per-image", "fixed")
CHART_WIDTH = 640
CHART_HEIGHT = 240


@dataclass(frozen=True)
class RenderSpec:
    """Raster size (None keeps one pixel per frame/channel) and value mapping."""
    width: Optional[int] = None
    height: Optional[int] = None
    colormap: str = "grayscale"
    normalization: str = "per-image"
    vmin: float = 0.0
    vmax: float = 1.0

    def __post_init__(self):
        for name in ("width", "height"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise InvalidConfigError(f"{name} must be positive, got {value}")
        if self.colormap not in COLORMAPS:
            raise InvalidConfigError(f"colormap must be one of {COLORMAPS}")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if self.normalization == "fixed" and not self.vmax > self.vmin:
            raise InvalidConfigError("fixed normalization needs vmax > vmin")


def _to_gray(values: np.ndarray, spec: RenderSpec) -> np.ndarray:
    if spec.colormap == "diverging":
        # zero maps to mid-gray, the largest magnitude to black/white
        if spec.normalization == "fixed":
            bound = max(abs(spec.vmin), abs(spec.vmax))
        else:
            bound = float(np.max(np.abs(values)))
        if bound == 0:
            return np.full(values.shape, 128, dtype=np.uint8)
        scaled = 0.5 + 0.5 * np.clip(values / bound, -1.0, 1.0)
        return np.round(scaled * 255).astype(np.uint8)

    if spec.normalization == "fixed":
        low, high = spec.vmin, spec.vmax
    else:
        low, high = float(values.min()), float(values.max())
    if high == low:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = np.clip((values - low) / (high - low), 0.0, 1.0)
    return np.round(scaled * 255).astype(np.uint8)


def _resize_nearest(image: np.ndarray, height: int, width: int) -> np.ndarray:
    rows = (np.arange(height) * image.shape[0]) // height
    cols = (np.arange(width) * image.shape[1]) // width
    return image[rows][:, cols]


def render_cochleagram(c: Cochleagram, spec: Optional[RenderSpec] = None) -> bytes:
    """Binary PGM of a cochleagram, low-frequency channels at the bottom."""
    spec = spec or RenderSpec()
    envelopes = np.asarray(c.envelopes, dtype=np.float64)
    if envelopes.size == 0:
        raise InvalidInputError("cannot render an empty cochleagram")

    image = _to_gray(envelopes, spec)[::-1]
    height = spec.height or image.shape[0]
    width = spec.width or image.shape[1]
    if (height, width) != image.shape:
        image = _resize_nearest(image, height, width)

    header = f"P5 {width} {height} 255\n".encode("ascii")
    return header + np.ascontiguousarray(image).tobytes()


def display_values(vector: np.ndarray, layout: TextureLayout) -> Tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and standard deviation with the group rescaling undone."""
    raw = layout.unscale(vector)
    s = layout.slices
    mu = raw[s["mu"]]
    sigma = np.clip(raw[s["sigma_tilde"]] * np.abs(mu), 0.0, None)
    return mu, sigma


def render_texture_stats(
    vector: np.ndarray,
    layout: Optional[TextureLayout] = None,
    title: str = "",
    width: int = CHART_WIDTH,
    height: int = CHART_HEIGHT,
) -> bytes:
    """SVG bar chart of the channel means with mean +/- std whiskers."""
    layout = layout or TextureLayout()
    mu, sigma = display_values(vector, layout)
    n = mu.size

    margin_left, margin_right, margin_top, margin_bottom = 40, 10, 20, 30
    plot_w = width - margin_left - margin_right
    plot_h = height - margin_top - margin_bottom
    top_value = float(np.max(mu + sigma)) if n else 0.0
    y_max = top_value if top_value > 0 else 1.0
    slot = plot_w / max(n, 1)
    bar_w = 0.7 * slot
    base_y = margin_top + plot_h

    def y_of(v: float) -> float:
        return base_y - plot_h * max(v, 0.0) / y_max

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin_left}" y1="{base_y:.3f}" x2="{width - margin_right}" y2="{base_y:.3f}" stroke="black"/>',
        f'<line x1="{margin_left}" y1="{margin_top}" x2="{margin_left}" y2="{base_y:.3f}" stroke="black"/>',
        f'<text x="4" y="{margin_top + 4}" font-size="10">{y_max:.4g}</text>',
        f'<text x="4" y="{base_y:.3f}" font-size="10">0</text>',
    ]
    if title:
        parts.append(f'<text x="{margin_left}" y="14" font-size="12">{title}</text>')

    for i in range(n):
        x = margin_left + i * slot + 0.15 * slot
        top = y_of(mu[i])
        parts.append(
            f'<rect x="{x:.3f}" y="{top:.3f}" width="{bar_w:.3f}" height="{base_y - top:.3f}" fill="steelblue"/>'
        )
        cx = x + bar_w / 2
        parts.append(
            f'<line x1="{cx:.3f}" y1="{y_of(mu[i] + sigma[i]):.3f}" x2="{cx:.3f}" '
            f'y2="{y_of(mu[i] - sigma[i]):.3f}" stroke="black"/>'
        )
        if i % 4 == 0:
            parts.append(f'<text x="{x:.3f}" y="{base_y + 14:.3f}" font-size="9">{i}</text>')
    parts.append(f'<text x="{margin_left + plot_w / 2:.3f}" y="{height - 4}" font-size="10">channel</text>')
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def render_centroid_stats(
    model: ClusterModel, cluster: int, layout: Optional[TextureLayout] = None
) -> bytes:
    """SVG chart of one centroid's channel statistics."""
    if not 0 <= cluster < model.k:
        raise OutOfRangeError(f"cluster {cluster} out of range for k={model.k}")
    layout = layout or TextureLayout()
    if model.dim != layout.dim:
        raise InvalidInputError(
            f"centroids have dimension {model.dim}, texture layout expects {layout.dim}"
        )
    logger.debug(f"Rendering centroid {cluster} of {model.k}")
    return render_texture_stats(model.centroids[cluster], layout, title=f"cluster {cluster}")
