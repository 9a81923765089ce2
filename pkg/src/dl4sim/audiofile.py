"""WAV reading and writing for render inputs, goldens, and the file-loop
audio source.

Supported: RIFF/WAVE little-endian, PCM 16/24-bit and IEEE float32, one
or two channels.  Integer samples normalize by 2**(bits-1) so full
scale is [-1.0, 1.0); float samples pass through untouched.  Unknown
chunks are skipped, which is what keeps files from other tools
readable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    MalformedWavError,
    TruncatedWavError,
    UnsupportedWavError,
)

_TAG_PCM = 0x0001
_TAG_FLOAT = 0x0003
_TAG_EXTENSIBLE = 0xFFFE

FORMATS = ("pcm16", "pcm24", "float32")


@dataclass
class AudioBuffer:
    """Non-interleaved samples: ``data`` has shape (channels, frames).

    ``storage`` records which disk format the samples came from (set by
    read_wav), so a comparison can push another buffer through the same
    precision first.
    """

    data: np.ndarray
    sample_rate: int
    storage: str | None = None

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if self.data.ndim != 2:
            raise DomainError(f"audio data must be 2-D, got shape {self.data.shape}")
        if not 1 <= self.data.shape[0] <= 2:
            raise DomainError(f"channel count must be 1 or 2, got {self.data.shape[0]}")
        if self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate!r}")
        self.sample_rate = int(self.sample_rate)

    @classmethod
    def from_mono(cls, samples, sample_rate: int) -> "AudioBuffer":
        return cls(np.asarray(samples, dtype=np.float64)[np.newaxis, :], sample_rate)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def mono(self) -> np.ndarray:
        """The single channel of a mono buffer, 1-D."""
        if self.channels != 1:
            raise DomainError(f"buffer has {self.channels} channels, expected mono")
        return self.data[0]


def extract_channel(buffer: AudioBuffer, index: int) -> AudioBuffer:
    """Pull one channel out as a new mono buffer."""
    if not 0 <= index < buffer.channels:
        raise DomainError(f"channel index {index} out of range 0..{buffer.channels - 1}")
    return AudioBuffer(buffer.data[index : index + 1].copy(), buffer.sample_rate)


def _parse_fmt(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise MalformedWavError("fmt chunk shorter than 16 bytes")
    tag, channels, rate, _byte_rate, _align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == _TAG_EXTENSIBLE:
        # The real codec hides in the first two bytes of the SubFormat GUID.
        if len(body) < 40:
            raise MalformedWavError("extensible fmt chunk shorter than 40 bytes")
        tag = struct.unpack("<H", body[24:26])[0]
    return tag, channels, rate, bits


def read_wav(path) -> AudioBuffer:
    """Read a WAV file into float64 samples."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF":
        raise MalformedWavError(f"{path}: not a RIFF file")
    if raw[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: RIFF file is not WAVE")

    fmt = None
    data_body = None
    offset = 12
    while offset + 8 <= len(raw):
        chunk_id = raw[offset : offset + 4]
        (size,) = struct.unpack("<I", raw[offset + 4 : offset + 8])
        body = raw[offset + 8 : offset + 8 + size]
        if len(body) < size:
            raise TruncatedWavError(
                f"{path}: chunk {chunk_id!r} claims {size} bytes, file has {len(body)}"
            )
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data" and data_body is None:
            data_body = body
        offset += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise MalformedWavError(f"{path}: no fmt chunk")
    if data_body is None:
        raise MalformedWavError(f"{path}: no data chunk")

    tag, channels, rate, bits = fmt
    if not 1 <= channels <= 2:
        raise UnsupportedWavError(f"{path}: {channels} channels, only 1-2 supported")
    if rate <= 0:
        raise MalformedWavError(f"{path}: sample rate {rate}")

    if tag == _TAG_PCM and bits == 16:
        bytes_per = 2
    elif tag == _TAG_PCM and bits == 24:
        bytes_per = 3
    elif tag == _TAG_FLOAT and bits == 32:
        bytes_per = 4
    elif tag in (_TAG_PCM, _TAG_FLOAT):
        raise UnsupportedWavError(f"{path}: {bits}-bit depth not supported for this codec")
    else:
        raise UnsupportedWavError(f"{path}: codec tag 0x{tag:04x} not supported")

    frame_bytes = bytes_per * channels
    if len(data_body) % frame_bytes:
        raise TruncatedWavError(f"{path}: data chunk ends mid-frame")

    if tag == _TAG_FLOAT:
        flat = np.frombuffer(data_body, dtype="<f4").astype(np.float64)
    elif bits == 16:
        flat = np.frombuffer(data_body, dtype="<i2").astype(np.float64) / 32768.0
    else:
        b = np.frombuffer(data_body, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        val = (val ^ 0x800000) - 0x800000  # sign-extend 24 -> 64 bits
        flat = val.astype(np.float64) / 8388608.0

    fmt_name = {(_TAG_FLOAT, 32): "float32", (_TAG_PCM, 16): "pcm16", (_TAG_PCM, 24): "pcm24"}
    frames = flat.reshape(-1, channels).T if len(flat) else np.zeros((channels, 0))
    return AudioBuffer(frames, rate, storage=fmt_name[(tag, bits)])


def _encode(data: np.ndarray, fmt: str) -> bytes:
    interleaved = np.ascontiguousarray(data.T)
    if fmt == "float32":
        return interleaved.astype("<f4").tobytes()
    if fmt == "pcm16":
        scaled = np.clip(np.rint(interleaved * 32768.0), -32768, 32767)
        return scaled.astype("<i2").tobytes()
    if fmt == "pcm24":
        scaled = np.clip(np.rint(interleaved * 8388608.0), -8388608, 8388607)
        as32 = scaled.astype("<i4").view(np.uint8).reshape(-1, 4)
        return as32[:, :3].tobytes()
    raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")


def quantize_to_format(buffer: AudioBuffer, fmt: str) -> AudioBuffer:
    """Pass samples through a storage format's precision without a file.

    This is what a write/read round trip does to the values; the
    regression harness uses it so a fresh render can be compared
    bit-exactly against a golden that lives on disk in that format.
    """
    if fmt == "float32":
        data = buffer.data.astype("<f4").astype(np.float64)
    elif fmt == "pcm16":
        data = np.clip(np.rint(buffer.data * 32768.0), -32768, 32767) / 32768.0
    elif fmt == "pcm24":
        data = np.clip(np.rint(buffer.data * 8388608.0), -8388608, 8388607) / 8388608.0
    else:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    return AudioBuffer(data, buffer.sample_rate)


def write_wav(path, buffer: AudioBuffer, fmt: str = "float32") -> None:
    """Write a buffer to disk; default storage is float32."""
    if fmt not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    payload = _encode(buffer.data, fmt)
    channels = buffer.channels
    bits = {"pcm16": 16, "pcm24": 24, "float32": 32}[fmt]
    tag = _TAG_FLOAT if fmt == "float32" else _TAG_PCM
    block_align = channels * bits // 8
    fmt_chunk = struct.pack(
        "<HHIIHH", tag, channels, buffer.sample_rate,
        buffer.sample_rate * block_align, block_align, bits,
    )
    chunks = [(b"fmt ", fmt_chunk)]
    if tag == _TAG_FLOAT:
        # Non-PCM files carry a fact chunk with the frame count.
        chunks.append((b"fact", struct.pack("<I", buffer.frames)))
    chunks.append((b"data", payload))

    body = bytearray()
    for chunk_id, chunk_body in chunks:
        body += chunk_id + struct.pack("<I", len(chunk_body)) + chunk_body
        if len(chunk_body) & 1:
            body += b"\x00"
    blob = b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + bytes(body)
    Path(path).write_bytes(blob)
