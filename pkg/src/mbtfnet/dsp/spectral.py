"""STFT / iSTFT and chroma features.

Analysis windows a (reflect-padded) signal with a periodic Hann window;
synthesis overlap-adds windowed inverse frames and divides by the summed
squared window, so the round trip is exact up to floating error wherever the
envelope is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import AudioBuffer
from ..errors import ValidationError

__all__ = ["ComplexSpectrogram", "stft", "istft", "stft_window", "chroma"]

PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
CHROMA_MIN_HZ = 60.0


def stft_window(frame_len: int, kind: str = "hann") -> np.ndarray:
    if kind == "hann":
        # periodic Hann
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(frame_len) / frame_len)
    if kind == "rect":
        return np.ones(frame_len)
    raise ValidationError(f"unknown window kind {kind!r}")


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Complex F x T grid with its analysis geometry."""

    bins: np.ndarray
    frame_len: int
    hop: int
    fft_size: int
    sample_rate: int
    window: str = "hann"
    centered: bool = True
    num_samples: int | None = None

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValidationError(f"bins must be 2-D [F, T], got shape {arr.shape}")
        if arr.shape[0] != self.fft_size // 2 + 1:
            raise ValidationError(
                f"frequency bins {arr.shape[0]} do not match fft_size {self.fft_size} "
                f"(expected {self.fft_size // 2 + 1})"
            )
        if not (0 < self.hop <= self.frame_len <= self.fft_size):
            raise ValidationError(
                f"need 0 < hop <= frame_len <= fft_size, got "
                f"hop={self.hop} frame_len={self.frame_len} fft_size={self.fft_size}"
            )
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValidationError("spectrogram entries must be finite")
        object.__setattr__(self, "bins", arr)

    @property
    def num_bins(self) -> int:
        return self.bins.shape[0]

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.bins)

    def with_bins(self, bins: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(bins, self.frame_len, self.hop, self.fft_size,
                                  self.sample_rate, self.window, self.centered,
                                  self.num_samples)


def _frame_positions(n_padded: int, frame_len: int, hop: int) -> int:
    if n_padded < frame_len:
        return 0
    return 1 + int(np.ceil((n_padded - frame_len) / hop))


def stft(audio: AudioBuffer, frame_len: int, hop: int, fft_size: int | None = None,
         window: str = "hann", centered: bool = True) -> ComplexSpectrogram:
    """Short-time Fourier transform.

    With ``centered`` the signal is reflect-padded by half a frame at both
    ends; the tail is zero-padded so the final frame fits. Empty input yields
    a spectrogram with zero frames.
    """
    fft_size = fft_size or frame_len
    if not (0 < hop <= frame_len <= fft_size):
        raise ValidationError(
            f"need 0 < hop <= frame_len <= fft_size, got "
            f"hop={hop} frame_len={frame_len} fft_size={fft_size}"
        )
    x = audio.samples
    if x.size == 0:
        empty = np.zeros((fft_size // 2 + 1, 0), dtype=np.complex128)
        return ComplexSpectrogram(empty, frame_len, hop, fft_size, audio.sample_rate,
                                  window, centered, 0)
    if centered:
        pad = frame_len // 2
        left = x[1 : pad + 1][::-1] if x.size > pad else np.zeros(pad)
        right = x[-pad - 1 : -1][::-1] if x.size > pad else np.zeros(pad)
        x = np.concatenate([left, x, right])
    n_frames = _frame_positions(x.size, frame_len, hop)
    if n_frames == 0:
        n_frames = 1
    needed = (n_frames - 1) * hop + frame_len
    if needed > x.size:
        x = np.concatenate([x, np.zeros(needed - x.size)])
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * stft_window(frame_len, window)[None, :]
    bins = np.fft.rfft(frames, n=fft_size, axis=1).T
    return ComplexSpectrogram(bins, frame_len, hop, fft_size, audio.sample_rate,
                              window, centered, len(audio))


def istft(spec: ComplexSpectrogram, length: int | None = None) -> AudioBuffer:
    """Inverse STFT by windowed overlap-add with window-square normalization.

    ``length`` overrides the output length; otherwise the spectrogram's
    recorded source length (or the full overlap-add span) is used.
    """
    f, t = spec.bins.shape
    win = stft_window(spec.frame_len, spec.window)
    if t == 0:
        return AudioBuffer(np.zeros(0), spec.sample_rate)
    frames = np.fft.irfft(spec.bins.T, n=spec.fft_size, axis=1)[:, : spec.frame_len]
    frames = frames * win[None, :]
    total = (t - 1) * spec.hop + spec.frame_len
    out = np.zeros(total)
    env = np.zeros(total)
    win_sq = win * win
    for i in range(t):
        start = i * spec.hop
        out[start : start + spec.frame_len] += frames[i]
        env[start : start + spec.frame_len] += win_sq
    out = out / np.maximum(env, 1e-10)
    pad = spec.frame_len // 2 if spec.centered else 0
    out = out[pad : total - pad]
    if length is None:
        length = spec.num_samples if spec.num_samples is not None else out.size
    if out.size < length:
        out = np.concatenate([out, np.zeros(length - out.size)])
    return AudioBuffer(out[:length], spec.sample_rate)


def chroma(spec: ComplexSpectrogram, tuning_ref: float = 440.0) -> np.ndarray:
    """Fold magnitude energy into 12 pitch classes (C..B, index 9 = A).

    Bins below 60 Hz are ignored. Columns are L2-normalized when nonzero.
    """
    f, t = spec.bins.shape
    freqs = np.arange(f) * spec.sample_rate / spec.fft_size
    energy = np.abs(spec.bins) ** 2
    out = np.zeros((12, t))
    valid = freqs >= CHROMA_MIN_HZ
    if np.any(valid):
        # midi pitch class relative to the tuning reference (A above middle C)
        midi = 69.0 + 12.0 * np.log2(freqs[valid] / tuning_ref)
        classes = np.round(midi).astype(int) % 12
        np.add.at(out, classes, energy[valid])
    norms = np.linalg.norm(out, axis=0)
    nonzero = norms > 0
    out[:, nonzero] /= norms[nonzero]
    return out
