class SoundTexError(Exception):
    """Base class for every error raised by the pipeline."""


class InvalidInputError(SoundTexError, ValueError):
    pass


class InvalidConfigError(SoundTexError, ValueError):
    pass


class OutOfRangeError(SoundTexError, ValueError):
    pass


class ChannelIndexError(SoundTexError, IndexError):
    pass


class ConvergenceError(SoundTexError, RuntimeError):
    pass


# WAV decoding

class WavParseError(SoundTexError, ValueError):
    pass


class BadContainerMagicError(WavParseError):
    def __init__(self, magic: bytes):
        super().__init__(f"bad container magic: {magic!r}")
        self.magic = magic


class MalformedHeaderError(WavParseError):
    pass


class UnsupportedCodecError(WavParseError):
    pass


class TruncatedDataError(WavParseError):
    pass


# Feature store / models

class StoreError(SoundTexError, ValueError):
    pass


class StoreMagicError(StoreError):
    def __init__(self, magic: bytes):
        super().__init__(f"bad store magic: {magic!r}")
        self.magic = magic


class StoreVersionError(StoreError):
    def __init__(self, found: int, expected: int):
        super().__init__(f"store format version {found} is not supported (expected {expected})")
        self.found = found
        self.expected = expected


class TruncatedPayloadError(StoreError):
    pass


class TruncatedTrailerError(StoreError):
    pass


class StoreDimensionError(StoreError):
    pass


class ModelFormatError(StoreError):
    pass


class ManifestError(SoundTexError, ValueError):
    pass


class UsageError(SoundTexError):
    pass
