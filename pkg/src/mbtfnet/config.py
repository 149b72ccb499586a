"""Model/pipeline configuration and the key=value config-file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

__all__ = [
    "MbtfConfig",
    "toy_config",
    "parse_config_text",
    "load_config_file",
    "config_from_dict",
    "config_to_dict",
]


@dataclass(frozen=True)
class MbtfConfig:
    """Full topology + signal geometry of the enhancement pipeline.

    Defaults give the full-size non-causal model; :func:`toy_config` shrinks
    every knob so the whole test suite runs in seconds.
    """

    # band split and sub-band spectrogram geometry
    num_bands: int = 4
    sample_rate: int = 44100
    frame_len: int = 256
    hop: int = 128
    fft_size: int = 256

    # inter-band U-Net
    encoder_channels: tuple[int, ...] = (8, 64, 64, 64, 128, 128)
    encoder_kernel: tuple[int, int] = (5, 2)
    encoder_freq_strides: tuple[int, ...] = (2, 2, 2, 2, 2, 2)
    tdb_per_block: int = 6
    tdb_kernel: tuple[int, int] = (3, 3)

    # bottleneck
    dprnn_layers: int = 2
    rnn_units: int = 256
    stcm_layers: int = 1
    stcm_hidden: int = 64
    stcm_kernel_t: int = 3
    stcm_dilations: tuple[int, ...] = (1, 2, 4)

    # intra-band path (one block per band plus a merge block)
    dpcb_count: int = 4
    fdb_per_dpcb: int = 5
    tdb_per_dpcb: int = 5
    dpcb_kernel: tuple[int, int] = (3, 3)
    band_adapter_channels: int = 6

    causal: bool = False

    # cleanliness estimator and personalized stage
    snr_gru_layers: int = 2
    snr_rnn_units: int = 256
    embedding_dim: int = 192
    mel_bands: int = 48
    alpha: float = 0.9
    chunk_seconds: float = 1.0

    # optimizer schedule
    schedule_d: float = 1e-3
    warmup_steps: int = 5000

    def __post_init__(self):
        if self.num_bands < 1:
            raise ConfigError(f"num_bands must be >= 1, got {self.num_bands}")
        if len(self.encoder_channels) != len(self.encoder_freq_strides):
            raise ConfigError(
                f"encoder_channels ({len(self.encoder_channels)} entries) and "
                f"encoder_freq_strides ({len(self.encoder_freq_strides)}) must match"
            )
        if not self.encoder_channels:
            raise ConfigError("encoder_channels must not be empty")
        for group in ("encoder_channels", "encoder_freq_strides", "stcm_dilations"):
            if any(v < 1 for v in getattr(self, group)):
                raise ConfigError(f"{group} entries must be positive")
        if self.dpcb_count != self.num_bands:
            raise ConfigError(
                f"dpcb_count must equal num_bands (one block per band), got "
                f"{self.dpcb_count} vs {self.num_bands}"
            )
        if not (0 < self.hop <= self.frame_len <= self.fft_size):
            raise ConfigError("need 0 < hop <= frame_len <= fft_size")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.chunk_seconds <= 0:
            raise ConfigError("chunk_seconds must be positive")
        positives = [
            "tdb_per_block", "dprnn_layers", "rnn_units", "stcm_layers",
            "stcm_hidden", "stcm_kernel_t", "fdb_per_dpcb", "tdb_per_dpcb",
            "band_adapter_channels", "snr_gru_layers", "snr_rnn_units",
            "embedding_dim", "mel_bands", "warmup_steps",
        ]
        for name in positives:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    # ---- derived geometry -------------------------------------------------

    @property
    def num_freq_bins(self) -> int:
        """Bins per sub-band spectrogram (F)."""
        return self.fft_size // 2 + 1

    @property
    def band_rate(self) -> int:
        return self.sample_rate // self.num_bands

    @property
    def latent_channels(self) -> int:
        """Channel count of the encoder-stack output (N)."""
        return self.encoder_channels[-1]

    def encoder_freq_sizes(self) -> list[int]:
        """Frequency extents entering each encoder block, plus the final one.

        Index 0 is the input F; index i+1 is the output of block i; the last
        entry is the latent frequency extent K.
        """
        sizes = [self.num_freq_bins]
        kf = self.encoder_kernel[0]
        for stride in self.encoder_freq_strides:
            f = sizes[-1]
            total_pad = kf - 1
            span = kf  # dilation 1 on the frequency axis
            sizes.append((f + total_pad - span) // stride + 1)
        return sizes

    @property
    def latent_bins(self) -> int:
        """Frequency extent of the latent (K)."""
        return self.encoder_freq_sizes()[-1]

    @property
    def chunk_frames(self) -> int:
        """Streaming-update chunk length in sub-band STFT frames."""
        return max(1, math.ceil(self.chunk_seconds * self.band_rate / self.hop))


def toy_config(causal: bool = False) -> MbtfConfig:
    """Shrunken topology for tests and demos; same structure, tiny sizes."""
    return MbtfConfig(
        encoder_channels=(8, 16, 16, 24),
        encoder_freq_strides=(2, 2, 2, 2),
        tdb_per_block=2,
        dprnn_layers=2,
        rnn_units=32,
        stcm_hidden=8,
        fdb_per_dpcb=2,
        tdb_per_dpcb=2,
        band_adapter_channels=4,
        snr_rnn_units=32,
        causal=causal,
    )


# ---- config file: flat "key = value" lines, '#' comments -------------------

_TUPLE_FIELDS = {"encoder_channels", "encoder_freq_strides", "stcm_dilations",
                 "encoder_kernel", "tdb_kernel", "dpcb_kernel"}


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config_file(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def _coerce(name: str, value, target_type):
    if isinstance(value, str):
        text = value.strip()
        if name in _TUPLE_FIELDS:
            parts = [p for p in text.replace(",", " ").split() if p]
            try:
                return tuple(int(p) for p in parts)
            except ValueError:
                raise ConfigError(f"{name}: expected integers, got {value!r}") from None
        if target_type is bool:
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ConfigError(f"{name}: expected a boolean, got {value!r}")
        if target_type is int:
            try:
                return int(text)
            except ValueError:
                raise ConfigError(f"{name}: expected an integer, got {value!r}") from None
        if target_type is float:
            try:
                return float(text)
            except ValueError:
                raise ConfigError(f"{name}: expected a number, got {value!r}") from None
        return text
    if name in _TUPLE_FIELDS:
        return tuple(int(v) for v in value)
    if target_type is bool:
        return bool(value)
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value


def config_from_dict(values: dict, base: MbtfConfig | None = None) -> MbtfConfig:
    """Build a config from a flat mapping; unknown keys are rejected."""
    base = base or MbtfConfig()
    known = {f.name: f for f in fields(MbtfConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    merged = {}
    for name in known:
        if name in values:
            # dataclass defaults carry the real target type
            merged[name] = _coerce(name, values[name], type(getattr(base, name)))
        else:
            merged[name] = getattr(base, name)
    return MbtfConfig(**merged)


def config_to_dict(cfg: MbtfConfig) -> dict:
    """JSON-safe flat dict (tuples become lists)."""
    out = {}
    for f in fields(MbtfConfig):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out
