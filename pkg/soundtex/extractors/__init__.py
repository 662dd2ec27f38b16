from .base import ExtractionResult, FeatureExtractor
from .factory import create_extractor
from .spectrum import SpectrumExtractor
from .texture import TextureExtractor

__all__ = [
    "ExtractionResult",
    "FeatureExtractor",
    "SpectrumExtractor",
    "TextureExtractor",
    "create_extractor",
]
