"""Personalized-stage support: cleanliness scoring, speaker embeddings, and
the chunked streaming update of the temporary speaker embedding.

The stream driver keeps a temporary embedding E (initialized to all ones).
For every chunk it estimates a mean cleanliness score from the enhanced and
noisy spectrograms; when the score clears the threshold, E is blended toward
the speaker encoder's output on the enhanced chunk. Until the first accepted
update the personalized stage is bypassed, so a threshold no score can reach
reduces the pipeline to the band-enhancement stage exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .audio import AudioBuffer
from .dsp import stft
from .errors import DataError, ValidationError
from .model import (
    EnhancerModel,
    SnrModule,
    bands_to_features,
    features_to_bands,
)
from .nn import Tensor, no_grad

__all__ = [
    "cleanliness_score",
    "CleanlinessStats",
    "normalize_stats",
    "mel_filterbank",
    "ToySpeakerEncoder",
    "load_embedding",
    "save_embedding",
    "IpeStreamState",
    "initial_stream_state",
    "score_chunk",
    "update_embedding",
    "estimate_lambda_t",
    "ChunkDecision",
    "IpeResult",
    "personalized_enhance",
]

SCORE_EPS = 1e-8
SCORE_CLAMP = 8.0
STD_FLOOR = 1e-6
_TOY_ENCODER_SEED = 742991


# ---- cleanliness -------------------------------------------------------------


def cleanliness_score(x_bands: np.ndarray, y_bands: np.ndarray) -> np.ndarray:
    """Per-frame log10 ratio of clean to noisy magnitude sums, clamped.

    Inputs are complex [C, F, T] stacks; the sum runs over all sub-bands and
    bins, i.e. the full-band magnitude. Both sides are floored at 1e-8 and
    the score is clamped to [-8, 8].
    """
    x = np.asarray(x_bands)
    y = np.asarray(y_bands)
    if x.shape != y.shape:
        raise ValidationError(f"band stacks must match, got {x.shape} vs {y.shape}")
    num = np.abs(x).sum(axis=(0, 1))
    den = np.abs(y).sum(axis=(0, 1))
    s = np.log10(np.maximum(num, SCORE_EPS) / np.maximum(den, SCORE_EPS))
    return np.clip(s, -SCORE_CLAMP, SCORE_CLAMP)


@dataclass(frozen=True)
class CleanlinessStats:
    """Population statistics of the raw score over a training set."""

    mean: float
    std: float

    def __post_init__(self):
        if not np.isfinite(self.mean) or not np.isfinite(self.std):
            raise ValidationError("cleanliness stats must be finite")
        if self.std <= 0:
            raise ValidationError(f"std must be positive, got {self.std}")

    def zscore(self, s):
        return (np.asarray(s) - self.mean) / self.std

    def squash(self, s):
        """Logistic of the z-score: a (0,1) target matching the sigmoid head."""
        z = self.zscore(s)
        return 1.0 / (1.0 + np.exp(-z))


def normalize_stats(values) -> CleanlinessStats:
    """Population mean/std of raw scores; std floored at 1e-6."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValidationError("cannot compute statistics of an empty score set")
    return CleanlinessStats(float(arr.mean()), float(max(arr.std(), STD_FLOOR)))


# ---- speaker embeddings --------------------------------------------------------


def mel_filterbank(sample_rate: int, fft_size: int, num_bands: int,
                   fmin: float = 40.0, fmax: float | None = None) -> np.ndarray:
    """Triangular mel filters [num_bands, fft_size//2 + 1]."""
    fmax = fmax or sample_rate / 2.0

    def to_mel(hz):
        return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)

    def to_hz(mel):
        return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)

    edges = to_hz(np.linspace(to_mel(fmin), to_mel(fmax), num_bands + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    fb = np.zeros((num_bands, freqs.size))
    for m in range(num_bands):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - freqs) / max(hi - mid, 1e-9)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


class ToySpeakerEncoder:
    """Deterministic, training-free speaker encoder.

    Pools log-mel statistics (per-band mean and standard deviation) and
    projects them through a fixed seeded linear map, then L2-normalizes.
    Requires at least one second of audio.
    """

    def __init__(self, sample_rate: int = 44100, mel_bands: int = 48,
                 embedding_dim: int = 192, frame_len: int = 2048, hop: int = 512):
        self.sample_rate = sample_rate
        self.embedding_dim = embedding_dim
        self.frame_len = frame_len
        self.hop = hop
        self._mel = mel_filterbank(sample_rate, frame_len, mel_bands)
        rng = np.random.default_rng(_TOY_ENCODER_SEED)
        self._proj = rng.standard_normal((embedding_dim, 2 * mel_bands))
        self._proj /= np.sqrt(2 * mel_bands)

    def __call__(self, audio: AudioBuffer) -> np.ndarray:
        if audio.sample_rate != self.sample_rate:
            raise ValidationError(
                f"encoder expects {self.sample_rate} Hz audio, got {audio.sample_rate}"
            )
        if audio.duration < 1.0:
            raise ValidationError(
                f"need at least 1 s of audio for an embedding, got {audio.duration:.3f} s"
            )
        spec = stft(audio, self.frame_len, self.hop, self.frame_len)
        power = np.abs(spec.bins) ** 2
        logmel = np.log(self._mel @ power + SCORE_EPS)
        stats = np.concatenate([logmel.mean(axis=1), logmel.std(axis=1)])
        e = self._proj @ stats
        norm = np.linalg.norm(e)
        return e / max(norm, SCORE_EPS)


def load_embedding(path: str | Path, dim: int = 192) -> np.ndarray:
    """Read a raw little-endian float32 embedding file."""
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != dim:
        raise DataError(
            f"{path}: expected exactly {dim} float32 values, found {raw.size}"
        )
    if not np.all(np.isfinite(raw)):
        raise DataError(f"{path}: embedding contains non-finite values")
    return raw.astype(np.float64)


def save_embedding(path: str | Path, embedding: np.ndarray) -> None:
    np.asarray(embedding, dtype="<f4").tofile(path)


# ---- streaming state machine ---------------------------------------------------


@dataclass(frozen=True)
class IpeStreamState:
    """Per-stream state of the embedding update loop."""

    embedding: np.ndarray
    lam: float
    alpha: float
    updated_count: int = 0
    snr_state: tuple | None = None   # carried GRU hidden states
    snr_tail: np.ndarray | None = None  # carried conv context

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")


def initial_stream_state(lam: float, alpha: float, dim: int = 192) -> IpeStreamState:
    """Algorithm start: the temporary embedding is the all-ones vector."""
    return IpeStreamState(embedding=np.ones(dim), lam=lam, alpha=alpha)


def score_chunk(snr: SnrModule, x_s_chunk: np.ndarray, y_chunk: np.ndarray,
                state: IpeStreamState) -> tuple[float, np.ndarray, IpeStreamState]:
    """Mean predicted cleanliness of one chunk, carrying recurrent state."""
    feats = SnrModule.features(x_s_chunk, y_chunk)
    h0 = None if state.snr_state is None else [Tensor(h) for h in state.snr_state]
    tail = None if state.snr_tail is None else Tensor(state.snr_tail)
    with no_grad():
        scores, new_state, new_tail = snr(Tensor(feats), h0, tail)
    carried = replace(
        state,
        snr_state=tuple(h.data for h in new_state),
        snr_tail=new_tail.data,
    )
    return float(scores.data.mean()), scores.data.copy(), carried


def update_embedding(state: IpeStreamState, x_s_chunk: np.ndarray,
                     y_chunk: np.ndarray, snr: SnrModule, sem,
                     chunk_audio: AudioBuffer | None) -> tuple[IpeStreamState, float, bool]:
    """One streaming step: score the chunk, gate, blend the embedding.

    ``sem`` is a callable mapping an :class:`AudioBuffer` to an embedding;
    it is only invoked when the gate passes. ``chunk_audio`` may be None when
    the chunk cannot produce an embedding (too short); the update is then
    skipped regardless of the score.
    """
    s_bar, _, state = score_chunk(snr, x_s_chunk, y_chunk, state)
    updated = False
    if s_bar >= state.lam and chunk_audio is not None:
        e = np.asarray(sem(chunk_audio), dtype=np.float64)
        if e.shape != state.embedding.shape:
            raise ValidationError(
                f"speaker encoder returned shape {e.shape}, "
                f"expected {state.embedding.shape}"
            )
        blended = state.alpha * state.embedding + (1.0 - state.alpha) * e
        state = replace(state, embedding=blended,
                        updated_count=state.updated_count + 1)
        updated = True
    return state, s_bar, updated


def estimate_lambda_t(s_bar_values) -> float:
    """Arithmetic mean of per-chunk mean scores (the trained threshold)."""
    arr = np.asarray(list(s_bar_values), dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot estimate a threshold from an empty log")
    return float(arr.mean())


# ---- chunked personalized enhancement -------------------------------------------


@dataclass(frozen=True)
class ChunkDecision:
    index: int
    start_frame: int
    end_frame: int
    s_bar: float
    updated: bool
    bypassed: bool


@dataclass
class IpeResult:
    x_p: np.ndarray                  # complex [C, F, T]
    decisions: list[ChunkDecision]
    embedding: np.ndarray
    updated_count: int


def _pem_slice(model: EnhancerModel, x_s_feat: np.ndarray, z: np.ndarray,
               embedding: np.ndarray, t0: int, t1: int) -> np.ndarray:
    """Personalized output for frames [t0, t1) with full left context."""
    xs = Tensor(x_s_feat[:, :, :t1])
    zt = Tensor(z[:, :, :t1])
    with no_grad():
        out = model.pem(xs, zt, embedding)
    return out.data[:, :, t0:t1]


def personalized_enhance(model: EnhancerModel, y_bands: np.ndarray,
                         x_s_bands: np.ndarray, z: np.ndarray, lam: float,
                         alpha: float, chunk_frames: int, sem,
                         chunk_audio_fn=None,
                         enroll: np.ndarray | None = None) -> IpeResult:
    """Run the personalized stage over a whole utterance.

    With ``enroll`` given (explicit enrollment) the state machine is skipped
    and the full sequence is refined with that embedding. Otherwise chunks are
    scored and the temporary embedding evolves per the update rule; chunks
    seen before the first accepted update pass through unchanged.
    ``chunk_audio_fn(start_frame, end_frame)`` supplies the waveform handed to
    the speaker encoder; returning None skips that chunk's update.
    """
    dtype = next(iter(model.named_parameters().values())).dtype
    c, f, t = x_s_bands.shape
    x_s_feat = bands_to_features(x_s_bands, dtype=dtype)
    z = z.astype(dtype, copy=False)

    if enroll is not None:
        with no_grad():
            out = model.pem(Tensor(x_s_feat), Tensor(z), enroll)
        return IpeResult(features_to_bands(out.data), [], np.asarray(enroll, float), 0)

    state = initial_stream_state(lam, alpha, dim=model.pem._dim)
    x_p_feat = np.empty_like(x_s_feat)
    decisions: list[ChunkDecision] = []
    index = 0
    for t0 in range(0, t, chunk_frames):
        t1 = min(t0 + chunk_frames, t)
        full_chunk = (t1 - t0) == chunk_frames
        chunk_audio = None
        if full_chunk and chunk_audio_fn is not None:
            chunk_audio = chunk_audio_fn(t0, t1)
        state, s_bar, updated = update_embedding(
            state, x_s_bands[:, :, t0:t1], y_bands[:, :, t0:t1], model.snr,
            sem, chunk_audio,
        )
        bypassed = state.updated_count == 0
        if bypassed:
            x_p_feat[:, :, t0:t1] = x_s_feat[:, :, t0:t1]
        else:
            x_p_feat[:, :, t0:t1] = _pem_slice(
                model, x_s_feat, z, state.embedding, t0, t1
            )
        decisions.append(ChunkDecision(index, t0, t1, s_bar, updated, bypassed))
        index += 1
    return IpeResult(features_to_bands(x_p_feat), decisions,
                     state.embedding.copy(), state.updated_count)
