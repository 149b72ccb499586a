"""Near-perfect-reconstruction pseudo-QMF filter bank.

A Kaiser-windowed lowpass prototype is cosine-modulated into C analysis and
C synthesis filters. Analysis filters, decimates by C; synthesis zero-stuffs,
filters, and sums. The round trip is a pure delay of ``prototype_len - 1``
samples up to the design's stopband leakage.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, firwin

from ..audio import AudioBuffer
from ..errors import ValidationError

__all__ = [
    "PqmfConfig",
    "SubbandSignals",
    "design_prototype",
    "modulation_filters",
    "pqmf_analysis",
    "pqmf_synthesis",
    "pqmf_delay",
    "tune_cutoff",
]

# cutoff values from tune_cutoff(), frozen per band count (beta 9.0, 32*C taps)
_TUNED_CUTOFF = {2: 0.266733, 4: 0.1333, 8: 0.066634}


@dataclass(frozen=True)
class PqmfConfig:
    """Prototype design parameters.

    ``cutoff`` is the lowpass edge as a fraction of Nyquist; a near-perfect
    reconstruction design wants it close to ``1 / (2 * num_bands)``.
    """

    num_bands: int = 4
    prototype_len: int = 128
    kaiser_beta: float = 9.0
    cutoff: float = 0.1333

    def __post_init__(self):
        if self.num_bands < 2:
            raise ValidationError(f"num_bands must be >= 2, got {self.num_bands}")
        if self.prototype_len % (2 * self.num_bands) != 0:
            raise ValidationError(
                f"prototype_len {self.prototype_len} must be divisible by "
                f"2 * num_bands = {2 * self.num_bands}"
            )
        if not 0.0 < self.cutoff < 1.0 / self.num_bands:
            raise ValidationError(
                f"cutoff {self.cutoff} out of range (0, 1/num_bands)"
            )

    @staticmethod
    def default(num_bands: int = 4) -> "PqmfConfig":
        taps = 32 * num_bands
        if num_bands in _TUNED_CUTOFF:
            cut = _TUNED_CUTOFF[num_bands]
        else:
            cut = tune_cutoff(num_bands, taps, 9.0)
        return PqmfConfig(num_bands=num_bands, prototype_len=taps, kaiser_beta=9.0,
                          cutoff=cut)


@dataclass(frozen=True)
class SubbandSignals:
    """C equal-length band signals at ``parent_rate / C``."""

    bands: np.ndarray  # [C, L]
    band_rate: int
    num_bands: int

    def __post_init__(self):
        arr = np.asarray(self.bands, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"bands must be 2-D [C, L], got shape {arr.shape}")
        if arr.shape[0] != self.num_bands:
            raise ValidationError(
                f"band count {arr.shape[0]} does not match num_bands {self.num_bands}"
            )
        if self.num_bands < 2:
            raise ValidationError("num_bands must be >= 2")
        object.__setattr__(self, "bands", arr)

    @property
    def band_len(self) -> int:
        return self.bands.shape[1]


def design_prototype(prototype_len: int, cutoff: float, beta: float) -> np.ndarray:
    """Kaiser-windowed linear-phase lowpass, ``cutoff`` relative to Nyquist."""
    return firwin(prototype_len, cutoff, window=("kaiser", beta))


@lru_cache(maxsize=8)
def _filters_cached(num_bands: int, prototype_len: int, beta: float,
                    cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    proto = design_prototype(prototype_len, cutoff, beta)
    n = np.arange(prototype_len)
    center = (prototype_len - 1) / 2.0
    analysis = np.empty((num_bands, prototype_len))
    synthesis = np.empty((num_bands, prototype_len))
    # sqrt(C) on both sides makes analysis energy-preserving for white input
    # while keeping the round trip at unit gain
    gain = 2.0 * np.sqrt(num_bands)
    for k in range(num_bands):
        phase = (2 * k + 1) * (np.pi / (2 * num_bands)) * (n - center)
        sign = (-1) ** k * np.pi / 4
        analysis[k] = gain * proto * np.cos(phase + sign)
        synthesis[k] = gain * proto * np.cos(phase - sign)
    return analysis, synthesis


def modulation_filters(cfg: PqmfConfig) -> tuple[np.ndarray, np.ndarray]:
    """(analysis, synthesis) filter banks, each ``[C, prototype_len]``."""
    return _filters_cached(cfg.num_bands, cfg.prototype_len, cfg.kaiser_beta, cfg.cutoff)


def pqmf_analysis(audio: AudioBuffer, cfg: PqmfConfig) -> SubbandSignals:
    """Split ``audio`` into C critically decimated sub-band signals."""
    x = audio.samples
    if x.size < cfg.prototype_len:
        raise ValidationError(
            f"audio of {x.size} samples is shorter than the {cfg.prototype_len}-tap prototype"
        )
    c = cfg.num_bands
    pad = (-x.size) % c
    if pad:
        x = np.concatenate([x, np.zeros(pad)])
    h, _ = modulation_filters(cfg)
    bands = np.empty((c, x.size // c))
    for k in range(c):
        filtered = fftconvolve(x, h[k], mode="full")[: x.size]
        bands[k] = filtered[::c]
    if audio.sample_rate % c != 0:
        raise ValidationError(
            f"sample rate {audio.sample_rate} not divisible by {c} bands"
        )
    return SubbandSignals(bands, audio.sample_rate // c, c)


def pqmf_synthesis(subbands: SubbandSignals, cfg: PqmfConfig) -> AudioBuffer:
    """Merge sub-band signals back to a full-rate waveform."""
    if subbands.num_bands != cfg.num_bands:
        raise ValidationError(
            f"subband count {subbands.num_bands} does not match config "
            f"num_bands {cfg.num_bands}"
        )
    c = cfg.num_bands
    _, g = modulation_filters(cfg)
    n_out = subbands.band_len * c
    out = np.zeros(n_out)
    for k in range(c):
        up = np.zeros(n_out)
        up[::c] = subbands.bands[k]
        out += fftconvolve(up, g[k], mode="full")[:n_out]
    return AudioBuffer(out, subbands.band_rate * c)


def pqmf_delay(cfg: PqmfConfig) -> int:
    """Group delay of the analysis-synthesis round trip, in samples."""
    return cfg.prototype_len - 1


def roundtrip_impulse_response(cfg: PqmfConfig, length: int = 1024) -> np.ndarray:
    """Impulse response of analysis followed by synthesis."""
    impulse = np.zeros(length)
    impulse[0] = 1.0
    audio = AudioBuffer(impulse, cfg.num_bands * 11025)
    return pqmf_synthesis(pqmf_analysis(audio, cfg), cfg).samples


def _roundtrip_error(cfg: PqmfConfig) -> float:
    resp = roundtrip_impulse_response(cfg, length=4 * cfg.prototype_len)
    ideal = np.zeros_like(resp)
    ideal[pqmf_delay(cfg)] = 1.0
    return float(np.sum((resp - ideal) ** 2))


def tune_cutoff(num_bands: int, prototype_len: int, beta: float,
                iterations: int = 40) -> float:
    """Golden-section search for the cutoff minimizing round-trip error."""
    lo = 0.5 / num_bands * 0.6
    hi = min(0.5 / num_bands * 1.4, 0.999 / num_bands)

    def err(cut: float) -> float:
        return _roundtrip_error(PqmfConfig(num_bands, prototype_len, beta, cut))

    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - phi * (b - a)
    c2 = a + phi * (b - a)
    f1, f2 = err(c1), err(c2)
    for _ in range(iterations):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = err(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = err(c2)
    return round((a + b) / 2.0, 6)
