"""RIFF/WAVE decoding and encoding for PCM 16/24-bit and IEEE float32 audio."""
from pathlib import Path
from typing import Tuple, Union
import logging
import struct

import numpy as np

from .dsp_core import Waveform
from .exceptions import (
    BadContainerMagicError,
    InvalidInputError,
    MalformedHeaderError,
    TruncatedDataError,
    UnsupportedCodecError,
)

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
SUPPORTED = {(WAVE_FORMAT_PCM, 16), (WAVE_FORMAT_PCM, 24), (WAVE_FORMAT_IEEE_FLOAT, 32)}

PathLike = Union[str, Path]


def _read_fmt(body: bytes) -> Tuple[int, int, int, int, int]:
    if len(body) < 16:
        raise MalformedHeaderError(f"fmt chunk is {len(body)} bytes, need at least 16")
    format_tag, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if format_tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise MalformedHeaderError("WAVE_FORMAT_EXTENSIBLE fmt chunk is too short")
        # the sub-format GUID starts with the actual format tag
        format_tag = struct.unpack("<I", body[24:28])[0]
    return format_tag, channels, rate, block_align, bits


def decode_wav_bytes(data: bytes) -> Waveform:
    """Decode an in-memory RIFF/WAVE file to a mono Waveform."""
    if len(data) < 12:
        raise MalformedHeaderError(f"file is only {len(data)} bytes")
    magic, _size, form = struct.unpack("<4sI4s", data[:12])
    if magic != b"RIFF":
        raise BadContainerMagicError(magic)
    if form != b"WAVE":
        raise MalformedHeaderError(f"RIFF form type is {form!r}, expected b'WAVE'")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id, chunk_size = struct.unpack("<4sI", data[pos:pos + 8])
        body_start = pos + 8
        body_end = body_start + chunk_size
        if chunk_id == b"fmt ":
            if body_end > len(data):
                raise MalformedHeaderError("fmt chunk runs past end of file")
            fmt = _read_fmt(data[body_start:body_end])
        elif chunk_id == b"data":
            if fmt is None:
                raise MalformedHeaderError("data chunk precedes fmt chunk")
            if body_end > len(data):
                raise TruncatedDataError(
                    f"data chunk declares {chunk_size} bytes, only {len(data) - body_start} present"
                )
            payload = data[body_start:body_end]
            break
        else:
            logger.debug(f"Skipping {chunk_id!r} chunk of {chunk_size} bytes")
        # chunks are word aligned
        pos = body_end + (chunk_size & 1)

    if fmt is None:
        raise MalformedHeaderError("no fmt chunk found")
    if payload is None:
        raise MalformedHeaderError("no data chunk found")

    format_tag, channels, rate, block_align, bits = fmt
    if (format_tag, bits) not in SUPPORTED:
        raise UnsupportedCodecError(f"unsupported codec: format tag 0x{format_tag:04x}, {bits} bits")
    if channels not in (1, 2):
        raise UnsupportedCodecError(f"unsupported channel count {channels}")
    if rate == 0:
        raise MalformedHeaderError("sample rate is zero")
    width = bits // 8
    if block_align != width * channels:
        raise MalformedHeaderError(f"block_align {block_align} does not match {channels} x {bits}-bit samples")
    if len(payload) % block_align:
        raise TruncatedDataError(f"data chunk of {len(payload)} bytes is not a whole number of frames")

    if format_tag == WAVE_FORMAT_IEEE_FLOAT:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    elif bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    else:
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float64) / 8388608.0

    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    if samples.size == 0:
        raise TruncatedDataError("data chunk holds no samples")
    return Waveform(samples, rate)


def decode_wav(path: PathLike) -> Waveform:
    """Read a WAV file into a mono Waveform with samples in [-1, 1]."""
    data = Path(path).read_bytes()
    waveform = decode_wav_bytes(data)
    logger.debug(f"Decoded {path}: {len(waveform)} samples at {waveform.sample_rate} Hz")
    return waveform


def encode_wav_bytes(waveform: Waveform, bits: int = 16) -> bytes:
    """Mono WAV bytes: 16- or 24-bit PCM, or 32-bit IEEE float."""
    samples = np.clip(waveform.samples, -1.0, 1.0)
    if bits == 16:
        format_tag = WAVE_FORMAT_PCM
        payload = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2").tobytes()
    elif bits == 24:
        format_tag = WAVE_FORMAT_PCM
        ints = np.clip(np.round(samples * 8388608.0), -8388608, 8388607).astype(np.int32)
        as_bytes = ints.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3]
        payload = as_bytes.tobytes()
    elif bits == 32:
        format_tag = WAVE_FORMAT_IEEE_FLOAT
        payload = samples.astype("<f4").tobytes()
    else:
        raise InvalidInputError(f"bits must be 16, 24 or 32, got {bits}")

    width = bits // 8
    fmt = struct.pack("<HHIIHH", format_tag, 1, waveform.sample_rate,
                      waveform.sample_rate * width, width, bits)
    pad = b"\x00" if len(payload) & 1 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt \
        + b"data" + struct.pack("<I", len(payload)) + payload + pad
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path: PathLike, waveform: Waveform, bits: int = 16) -> None:
    Path(path).write_bytes(encode_wav_bytes(waveform, bits))
    logger.debug(f"Wrote {path} ({bits}-bit, {len(waveform)} samples)")
