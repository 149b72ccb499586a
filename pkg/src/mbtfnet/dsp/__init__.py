"""Deterministic signal-processing front and back ends."""

from .pitch import pitch_shift_semitones
from .pqmf import (
    PqmfConfig,
    SubbandSignals,
    design_prototype,
    modulation_filters,
    pqmf_analysis,
    pqmf_delay,
    pqmf_synthesis,
    roundtrip_impulse_response,
    tune_cutoff,
)
from .spectral import ComplexSpectrogram, chroma, istft, stft, stft_window

__all__ = [
    "PqmfConfig",
    "SubbandSignals",
    "design_prototype",
    "modulation_filters",
    "pqmf_analysis",
    "pqmf_delay",
    "pqmf_synthesis",
    "roundtrip_impulse_response",
    "tune_cutoff",
    "ComplexSpectrogram",
    "chroma",
    "istft",
    "stft",
    "stft_window",
    "pitch_shift_semitones",
]
