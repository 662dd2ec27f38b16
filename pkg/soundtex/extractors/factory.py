from typing import Dict, Type
import logging

from ..config import FEATURE_KINDS, PipelineConfig
from ..exceptions import InvalidConfigError
from .base import FeatureExtractor
from .spectrum import SpectrumExtractor
from .texture import TextureExtractor

logger = logging.getLogger(__name__)

EXTRACTORS: Dict[str, Type[FeatureExtractor]] = {
    "texture": TextureExtractor,
    "spectrum": SpectrumExtractor,
}


def create_extractor(kind: str, config: PipelineConfig) -> FeatureExtractor:
    """Create the extractor for a feature kind."""
    if kind not in EXTRACTORS:
        raise InvalidConfigError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
    logger.debug(f"Creating {kind} extractor")
    return EXTRACTORS[kind](config)
