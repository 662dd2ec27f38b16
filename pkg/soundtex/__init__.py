"""Sound-texture features and self-supervision labels for ambient audio."""

__version__ = "1.0.0"
