"""Resampling-based pitch shifting."""

from __future__ import annotations

from fractions import Fraction

from scipy.signal import resample_poly

from ..audio import AudioBuffer
from ..errors import ValidationError

__all__ = ["pitch_shift_semitones"]


def pitch_shift_semitones(audio: AudioBuffer, semitones: int) -> AudioBuffer:
    """Shift pitch by resampling; duration scales by the reciprocal factor.

    A shift of +s semitones multiplies every frequency by 2^(s/12) and
    shortens the clip by the same factor. Good enough for data simulation,
    where tempo drift does not matter.
    """
    semitones = int(semitones)
    if abs(semitones) > 12:
        raise ValidationError(f"|semitones| must be <= 12, got {semitones}")
    if semitones == 0:
        return audio
    factor = 2.0 ** (semitones / 12.0)
    # playing back at rate*factor raises pitch; implement as rational resample
    ratio = Fraction(factor).limit_denominator(1000)
    shifted = resample_poly(audio.samples, ratio.denominator, ratio.numerator)
    return AudioBuffer(shifted, audio.sample_rate)
