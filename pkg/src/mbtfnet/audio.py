"""Audio buffers and WAV file I/O.

Supported WAV encodings: PCM 16-bit, PCM 24-bit, and IEEE float32, mono or
multichannel (first channel extracted). Files at rates other than the
requested rate raise unless ``resample=True``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import DataError, ValidationError

__all__ = ["AudioBuffer", "read_wav", "write_wav", "resample"]

NATIVE_RATE = 44100


@dataclass(frozen=True)
class AudioBuffer:
    """Mono sample sequence with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValidationError(f"AudioBuffer expects 1-D samples, got shape {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValidationError("AudioBuffer samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2))) if len(self) else 0.0


def resample(audio: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Polyphase resampling to ``target_rate``."""
    if audio.sample_rate == target_rate:
        return audio
    from math import gcd

    g = gcd(audio.sample_rate, target_rate)
    up, down = target_rate // g, audio.sample_rate // g
    out = resample_poly(audio.samples, up, down)
    return AudioBuffer(out, target_rate)


# ---------------------------------------------------------------------------
# WAV parsing
# ---------------------------------------------------------------------------

_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


def read_wav(path: str | Path, expect_rate: int | None = NATIVE_RATE,
             allow_resample: bool = False) -> AudioBuffer:
    """Read a WAV file as a mono :class:`AudioBuffer`.

    Multichannel files contribute their first channel. When ``expect_rate``
    is set and the file rate differs, raises unless ``allow_resample``.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise DataError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_len,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_len]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_len + (chunk_len & 1)
    if fmt is None or data is None:
        raise DataError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _FMT_EXTENSIBLE:
        if len(fmt) < 40:
            raise DataError(f"{path}: truncated extensible fmt chunk")
        (tag,) = struct.unpack_from("<H", fmt, 24)
    if channels < 1:
        raise DataError(f"{path}: invalid channel count {channels}")

    if tag == _FMT_FLOAT and bits == 32:
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    elif tag == _FMT_PCM and bits == 16:
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _FMT_PCM and bits == 24:
        b = np.frombuffer(data[: len(data) - len(data) % 3], dtype=np.uint8)
        b = b.reshape(-1, 3)
        vals = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        flat = vals.astype(np.float64) / float(1 << 23)
    else:
        raise DataError(
            f"{path}: unsupported encoding (format tag {tag}, {bits}-bit); "
            "supported: PCM16, PCM24, float32"
        )

    usable = flat.size - flat.size % channels
    samples = flat[:usable].reshape(-1, channels)[:, 0]
    audio = AudioBuffer(np.ascontiguousarray(samples), rate)

    if expect_rate is not None and rate != expect_rate:
        if not allow_resample:
            raise DataError(
                f"{path}: sample rate {rate} Hz differs from expected {expect_rate} Hz "
                "(pass allow_resample=True / --resample to convert)"
            )
        audio = resample(audio, expect_rate)
    return audio


def write_wav(path: str | Path, audio: AudioBuffer, encoding: str = "pcm16") -> None:
    """Write a mono WAV file; ``encoding`` is pcm16, pcm24, or float32."""
    x = np.asarray(audio.samples, dtype=np.float64)
    if encoding == "pcm16":
        clipped = np.clip(x, -1.0, 1.0)
        payload = (np.round(clipped * 32767.0)).astype("<i2").tobytes()
        tag, bits = _FMT_PCM, 16
    elif encoding == "pcm24":
        clipped = np.clip(x, -1.0, 1.0)
        vals = np.round(clipped * float((1 << 23) - 1)).astype(np.int32)
        b = np.empty((vals.size, 3), dtype=np.uint8)
        b[:, 0] = vals & 0xFF
        b[:, 1] = (vals >> 8) & 0xFF
        b[:, 2] = (vals >> 16) & 0xFF
        payload = b.tobytes()
        tag, bits = _FMT_PCM, 24
    elif encoding == "float32":
        payload = x.astype("<f4").tobytes()
        tag, bits = _FMT_FLOAT, 32
    else:
        raise ValidationError(f"unknown WAV encoding {encoding!r}")

    rate = audio.sample_rate
    block_align = bits // 8
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<I", 16),
            struct.pack("<HHIIHH", tag, 1, rate, rate * block_align, block_align, bits),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    Path(path).write_bytes(header + payload)
