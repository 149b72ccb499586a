"""Differentiable spectrogram-to-waveform path.

The time-domain loss needs gradients through inverse STFT and band synthesis.
Both are linear, so they are expressed with tensor primitives plus two small
custom ops (overlap-add and FIR filtering); forward results match the numpy
paths in :mod:`mbtfnet.dsp` to rounding.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .dsp.pqmf import PqmfConfig, modulation_filters
from .dsp.spectral import stft_window
from .errors import ValidationError
from .nn import Tensor, as_tensor, concat

__all__ = [
    "overlap_add",
    "fir_filter",
    "istft_tensor",
    "pqmf_synthesis_tensor",
    "features_to_waveform",
]


def overlap_add(frames: Tensor, hop: int) -> Tensor:
    """Overlap-add frames [T, L] into a signal [(T-1)*hop + L]."""
    t, l = frames.shape
    idx = np.arange(t)[:, None] * hop + np.arange(l)[None, :]
    out = np.zeros((t - 1) * hop + l, dtype=frames.dtype)
    np.add.at(out, idx, frames.data)

    def backward(g):
        if frames.requires_grad:
            frames._accum(g[idx])

    return Tensor._make(out, (frames,), backward)


def fir_filter(x: Tensor, taps: np.ndarray) -> Tensor:
    """Full convolution of a 1-D signal with fixed taps."""
    h = np.asarray(taps, dtype=np.float64)
    out = fftconvolve(x.data.astype(np.float64), h).astype(x.dtype)
    n = x.shape[0]
    lh = h.size

    def backward(g):
        if x.requires_grad:
            full = fftconvolve(g.astype(np.float64), h[::-1])
            x._accum(full[lh - 1 : lh - 1 + n].astype(x.dtype))

    return Tensor._make(out, (x,), backward)


def _irfft_basis(fft_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices mapping rfft real/imag parts [F] to samples [fft_size]."""
    f = fft_size // 2 + 1
    n = np.arange(fft_size)[:, None]
    k = np.arange(f)[None, :]
    ang = 2.0 * np.pi * n * k / fft_size
    w = np.full(f, 2.0)
    w[0] = 1.0
    if fft_size % 2 == 0:
        w[-1] = 1.0
    return (w * np.cos(ang) / fft_size), (-w * np.sin(ang) / fft_size)


def istft_tensor(re: Tensor, im: Tensor, frame_len: int, hop: int, length: int,
                 window: str = "hann") -> Tensor:
    """Differentiable inverse STFT for centered spectra (fft_size == frame_len).

    Matches ``dsp.istft`` on the same geometry: windowed inverse frames,
    overlap-add, window-square normalization, center trim to ``length``.
    """
    if re.shape != im.shape or re.ndim != 2:
        raise ValidationError(
            f"expected matching 2-D [F, T] parts, got {re.shape} and {im.shape}"
        )
    f, t = re.shape
    if f != frame_len // 2 + 1:
        raise ValidationError(
            f"bin count {f} does not match frame_len {frame_len}"
        )
    dtype = re.dtype
    basis_c, basis_s = _irfft_basis(frame_len)
    frames = (as_tensor(basis_c.astype(dtype)) @ re
              + as_tensor(basis_s.astype(dtype)) @ im).transpose()  # [T, N]
    win = stft_window(frame_len, window)
    frames = frames * win[None, :].astype(dtype)
    sig = overlap_add(frames, hop)
    total = (t - 1) * hop + frame_len
    env = np.zeros(total)
    win_sq = win * win
    for i in range(t):
        env[i * hop : i * hop + frame_len] += win_sq
    sig = sig * (1.0 / np.maximum(env, 1e-10)).astype(dtype)
    pad = frame_len // 2
    out = sig[pad : pad + length]
    if out.shape[0] != length:
        raise ValidationError(
            f"spectrogram covers {sig.shape[0] - 2 * pad} samples, need {length}"
        )
    return out


def pqmf_synthesis_tensor(bands: list[Tensor], cfg: PqmfConfig) -> Tensor:
    """Differentiable counterpart of ``dsp.pqmf_synthesis``."""
    if len(bands) != cfg.num_bands:
        raise ValidationError(
            f"got {len(bands)} bands, config expects {cfg.num_bands}"
        )
    c = cfg.num_bands
    _, g = modulation_filters(cfg)
    n = bands[0].shape[0]
    out = None
    for k, band in enumerate(bands):
        zeros = Tensor(np.zeros((n, c - 1), dtype=band.dtype))
        up = concat([band.reshape(n, 1), zeros], axis=1).reshape(n * c)
        term = fir_filter(up, g[k])[: n * c]
        out = term if out is None else out + term
    return out


def features_to_waveform(feat: Tensor, pqmf_cfg: PqmfConfig, frame_len: int,
                         hop: int, band_len: int, length: int,
                         window: str = "hann") -> Tensor:
    """Interleaved band features [2C, F, T] -> full-rate waveform Tensor.

    ``band_len`` is each sub-band signal's sample count; ``length`` trims the
    synthesized full-rate waveform.
    """
    c2 = feat.shape[0]
    if c2 != 2 * pqmf_cfg.num_bands:
        raise ValidationError(
            f"feature channels {c2} do not match {pqmf_cfg.num_bands} bands"
        )
    bands = []
    for i in range(pqmf_cfg.num_bands):
        re, im = feat[2 * i], feat[2 * i + 1]
        bands.append(istft_tensor(re, im, frame_len, hop, band_len, window))
    wave = pqmf_synthesis_tensor(bands, pqmf_cfg)
    if wave.shape[0] < length:
        raise ValidationError(
            f"synthesized waveform has {wave.shape[0]} samples, need {length}"
        )
    return wave[:length]
