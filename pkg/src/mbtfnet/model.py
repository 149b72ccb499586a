"""Enhancement model graph.

Complex sub-band spectrograms are carried as real tensors with real/imag
interleaved on the channel axis: band i occupies channels 2i (real) and
2i+1 (imag). The band-split stage is a U-Net over all bands with a recurrent
bottleneck, followed by per-band refinement blocks conditioned on the shared
latent; the personalized stage reuses the refinement structure with the
latent gated by a speaker embedding. Every stage emits a complex ratio mask
that multiplies its input spectrograms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MbtfConfig, config_from_dict, config_to_dict
from .errors import DataError, ValidationError
from .nn import (
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    GRULayer,
    Linear,
    Module,
    Parameter,
    PReLU,
    Tensor,
    as_tensor,
    concat,
    no_grad,
    pad,
)
from .nn import functional as F
from .nn.layers import _time_padding, _uniform
from .nn.serialize import WeightsContainer, load_weights, save_weights

__all__ = [
    "SveOutput",
    "TimeDilationBlock",
    "FrequencyDilationBlock",
    "EncoderBlock",
    "DecoderBlock",
    "DualPathRecurrentBlock",
    "DepthwiseTimeConv",
    "SqueezedTemporalBlock",
    "DualPathConvBlock",
    "InterBandModule",
    "BandRefiner",
    "SnrModule",
    "PersonalizedModule",
    "SveModel",
    "EnhancerModel",
    "bands_to_features",
    "features_to_bands",
    "apply_complex_mask",
    "freq_interp_matrix",
    "force_identity_masks",
    "save_checkpoint",
    "load_checkpoint",
    "load_arrays_into",
    "model_arrays",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


# ---- real/complex channel packing ------------------------------------------


def bands_to_features(bands: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Complex [C, F, T] -> real [2C, F, T], channels (re0, im0, re1, im1, ...)."""
    if bands.ndim != 3:
        raise ValidationError(f"expected [C, F, T] band array, got shape {bands.shape}")
    c, f, t = bands.shape
    out = np.empty((2 * c, f, t), dtype=dtype)
    out[0::2] = bands.real
    out[1::2] = bands.imag
    return out


def features_to_bands(feat: np.ndarray) -> np.ndarray:
    """Inverse of :func:`bands_to_features`."""
    if feat.ndim != 3 or feat.shape[0] % 2:
        raise ValidationError(f"expected [2C, F, T] feature array, got shape {feat.shape}")
    return feat[0::2].astype(np.float64) + 1j * feat[1::2].astype(np.float64)


def _interleave_pairs(re: Tensor, im: Tensor) -> Tensor:
    c, f, t = re.shape
    stacked = concat([re.reshape(c, 1, f, t), im.reshape(c, 1, f, t)], axis=1)
    return stacked.reshape(2 * c, f, t)


def apply_complex_mask(mask: Tensor, x: Tensor) -> Tensor:
    """Complex multiplication of interleaved-channel mask and spectrogram."""
    mr, mi = mask[0::2], mask[1::2]
    xr, xi = x[0::2], x[1::2]
    return _interleave_pairs(mr * xr - mi * xi, mr * xi + mi * xr)


def freq_interp_matrix(src_bins: int, dst_bins: int) -> np.ndarray:
    """Linear-interpolation matrix [dst, src] mapping a coarse frequency grid
    onto a fine one (endpoints aligned)."""
    m = np.zeros((dst_bins, src_bins))
    if src_bins == 1:
        m[:, 0] = 1.0
        return m
    for f in range(dst_bins):
        pos = f * (src_bins - 1) / (dst_bins - 1) if dst_bins > 1 else 0.0
        i0 = min(int(np.floor(pos)), src_bins - 2)
        frac = pos - i0
        m[f, i0] = 1.0 - frac
        m[f, i0 + 1] = frac
    return m


# ---- building blocks --------------------------------------------------------


class TimeDilationBlock(Module):
    """Dilated conv along time + batch norm + PReLU, residual."""

    def __init__(self, channels: int, kernel: tuple[int, int], dilation_t: int,
                 causal: bool, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.conv = Conv2d(channels, channels, kernel, rng,
                           dilation=(1, dilation_t), causal=causal, dtype=dtype)
        self.norm = BatchNorm2d(channels, dtype=dtype)
        self.act = PReLU(channels, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return x + self.act(self.norm(self.conv(x)))


class FrequencyDilationBlock(Module):
    """Dilated conv along frequency + batch norm + PReLU, residual."""

    def __init__(self, channels: int, kernel: tuple[int, int], dilation_f: int,
                 causal: bool, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.conv = Conv2d(channels, channels, kernel, rng,
                           dilation=(dilation_f, 1), causal=causal, dtype=dtype)
        self.norm = BatchNorm2d(channels, dtype=dtype)
        self.act = PReLU(channels, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return x + self.act(self.norm(self.conv(x)))


class EncoderBlock(Module):
    """Frequency-strided conv block followed by stacked time-dilation blocks
    with dilations 2^1 .. 2^n."""

    def __init__(self, in_ch: int, out_ch: int, cfg: MbtfConfig, freq_stride: int,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.conv = Conv2d(in_ch, out_ch, cfg.encoder_kernel, rng,
                           stride=(freq_stride, 1), causal=cfg.causal, dtype=dtype)
        self.norm = BatchNorm2d(out_ch, dtype=dtype)
        self.act = PReLU(out_ch, dtype=dtype)
        self.tdbs = [
            TimeDilationBlock(out_ch, cfg.tdb_kernel, 2 ** n, cfg.causal, rng, dtype)
            for n in range(1, cfg.tdb_per_block + 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        h = self.act(self.norm(self.conv(x)))
        for tdb in self.tdbs:
            h = tdb(h)
        return h


class DecoderBlock(Module):
    """Mirror of :class:`EncoderBlock`: skip concat, transposed conv block
    restoring the paired frequency extent, then time-dilation blocks."""

    def __init__(self, in_ch: int, out_ch: int, cfg: MbtfConfig, freq_stride: int,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.conv = ConvTranspose2d(in_ch, out_ch, cfg.encoder_kernel, rng,
                                    stride=(freq_stride, 1), causal=cfg.causal,
                                    dtype=dtype)
        self.norm = BatchNorm2d(out_ch, dtype=dtype)
        self.act = PReLU(out_ch, dtype=dtype)
        self.tdbs = [
            TimeDilationBlock(out_ch, cfg.tdb_kernel, 2 ** n, cfg.causal, rng, dtype)
            for n in range(1, cfg.tdb_per_block + 1)
        ]

    def __call__(self, x: Tensor, skip: Tensor, target_f: int) -> Tensor:
        h = concat([x, skip], axis=0)
        h = self.act(self.norm(self.conv(h, target_f)))
        for tdb in self.tdbs:
            h = tdb(h)
        return h


class DualPathRecurrentBlock(Module):
    """Recurrence along frequency (bidirectional) then along time
    (unidirectional when causal), each with projection and residual."""

    def __init__(self, channels: int, units: int, causal: bool,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.freq_rnn = GRULayer(channels, units, rng, bidirectional=True, dtype=dtype)
        self.freq_proj = Linear(2 * units, channels, rng, dtype=dtype)
        self.time_rnn = GRULayer(channels, units, rng, bidirectional=not causal,
                                 dtype=dtype)
        self.time_proj = Linear(units if causal else 2 * units, channels, dtype=dtype,
                                rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        seq = x.transpose(1, 2, 0)                      # [K, T, N]
        out, _ = self.freq_rnn(seq)
        x = x + self.freq_proj(out).transpose(2, 0, 1)
        seq = x.transpose(2, 1, 0)                      # [T, K, N]
        out, _ = self.time_rnn(seq)
        return x + self.time_proj(out).transpose(2, 1, 0)


class DepthwiseTimeConv(Module):
    """Per-channel dilated convolution along the time axis."""

    def __init__(self, channels: int, k_t: int, dilation: int, causal: bool,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        bound = 1.0 / np.sqrt(k_t)
        self.weight = Parameter(_uniform(rng, (channels, k_t), bound, dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))
        self.k_t = k_t
        self.dilation = dilation
        self.pad_t = _time_padding(k_t, dilation, causal)

    def __call__(self, x: Tensor) -> Tensor:
        c, _, t = x.shape
        xp = pad(x, ((0, 0), (0, 0), self.pad_t))
        out = None
        for a in range(self.k_t):
            tap = xp[:, :, a * self.dilation : a * self.dilation + t]
            term = tap * self.weight[:, a].reshape(c, 1, 1)
            out = term if out is None else out + term
        return out + self.bias.reshape(c, 1, 1)


class SqueezedTemporalBlock(Module):
    """Pointwise squeeze, stacked dilated depthwise time convs, pointwise
    expand; residual."""

    def __init__(self, channels: int, hidden: int, k_t: int, dilations: tuple[int, ...],
                 causal: bool, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.squeeze = Conv2d(channels, hidden, (1, 1), rng, dtype=dtype)
        self.norm_in = BatchNorm2d(hidden, dtype=dtype)
        self.act_in = PReLU(hidden, dtype=dtype)
        self.convs = [DepthwiseTimeConv(hidden, k_t, d, causal, rng, dtype)
                      for d in dilations]
        self.norms = [BatchNorm2d(hidden, dtype=dtype) for _ in dilations]
        self.acts = [PReLU(hidden, dtype=dtype) for _ in dilations]
        self.expand = Conv2d(hidden, channels, (1, 1), rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.act_in(self.norm_in(self.squeeze(x)))
        for conv, norm, act in zip(self.convs, self.norms, self.acts):
            h = act(norm(conv(h)))
        return x + self.expand(h)


class DualPathConvBlock(Module):
    """Frequency-dilation blocks then time-dilation blocks, dilations 2^n."""

    def __init__(self, channels: int, cfg: MbtfConfig, rng: np.random.Generator,
                 dtype=np.float32):
        super().__init__()
        self.fdbs = [
            FrequencyDilationBlock(channels, cfg.dpcb_kernel, 2 ** n, cfg.causal,
                                   rng, dtype)
            for n in range(1, cfg.fdb_per_dpcb + 1)
        ]
        self.tdbs = [
            TimeDilationBlock(channels, cfg.dpcb_kernel, 2 ** n, cfg.causal, rng, dtype)
            for n in range(1, cfg.tdb_per_dpcb + 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for blk in self.fdbs:
            x = blk(x)
        for blk in self.tdbs:
            x = blk(x)
        return x


# ---- stages ------------------------------------------------------------------


class InterBandModule(Module):
    """U-Net over the stacked band features with a recurrent bottleneck.

    Returns the masked spectrogram features and the latent Z taken at the
    encoder-stack output (before the bottleneck).
    """

    def __init__(self, cfg: MbtfConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        in_ch = 2 * cfg.num_bands
        chans = [in_ch] + list(cfg.encoder_channels)
        strides = list(cfg.encoder_freq_strides)
        self.encoders = [
            EncoderBlock(chans[i], chans[i + 1], cfg, strides[i], rng, dtype)
            for i in range(len(strides))
        ]
        n = cfg.latent_channels
        self.dp_blocks = [
            DualPathRecurrentBlock(n, cfg.rnn_units, cfg.causal, rng, dtype)
            for _ in range(cfg.dprnn_layers)
        ]
        self.stcm_blocks = [
            SqueezedTemporalBlock(n, cfg.stcm_hidden, cfg.stcm_kernel_t,
                                  cfg.stcm_dilations, cfg.causal, rng, dtype)
            for _ in range(cfg.stcm_layers)
        ]
        enc_outs_rev = list(reversed(cfg.encoder_channels))
        dec_outs = list(reversed(chans[:-1]))
        self.decoders = []
        prev = n
        for i in range(len(strides)):
            dec_in = prev + enc_outs_rev[i]
            self.decoders.append(
                DecoderBlock(dec_in, dec_outs[i], cfg, strides[len(strides) - 1 - i],
                             rng, dtype)
            )
            prev = dec_outs[i]
        self.mask_head = Conv2d(dec_outs[-1], in_ch, (1, 1), rng, dtype=dtype)
        self._f_sizes = cfg.encoder_freq_sizes()

    def __call__(self, feats: Tensor) -> tuple[Tensor, Tensor]:
        skips = []
        h = feats
        for enc in self.encoders:
            h = enc(h)
            skips.append(h)
        z = h
        for blk in self.dp_blocks:
            h = blk(h)
        for blk in self.stcm_blocks:
            h = blk(h)
        n_blocks = len(self.encoders)
        for i, dec in enumerate(self.decoders):
            h = dec(h, skips[n_blocks - 1 - i], self._f_sizes[n_blocks - 1 - i])
        mask = self.mask_head(h)
        return apply_complex_mask(mask, feats), z


class BandRefiner(Module):
    """Per-band conv blocks conditioned on the shared latent, then a merge
    block and a complex-mask head applied to the stage input."""

    def __init__(self, cfg: MbtfConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        c = cfg.num_bands
        zc = cfg.band_adapter_channels
        self.adapter = Conv2d(cfg.latent_channels, zc, (1, 1), rng, dtype=dtype)
        self.band_blocks = [DualPathConvBlock(2 + zc, cfg, rng, dtype)
                            for _ in range(c)]
        self.merge = DualPathConvBlock((2 + zc) * c, cfg, rng, dtype)
        self.mask_head = Conv2d((2 + zc) * c, 2 * c, (1, 1), rng, dtype=dtype)
        self._interp = freq_interp_matrix(cfg.latent_bins, cfg.num_freq_bins)
        self._num_bands = c

    def _expand_latent(self, cond: Tensor, dtype) -> Tensor:
        za = self.adapter(cond)                      # [zc, K, T]
        zc, k, t = za.shape
        m = as_tensor(self._interp.T.astype(dtype))  # [K, F]
        flat = za.transpose(0, 2, 1).reshape(zc * t, k) @ m
        return flat.reshape(zc, t, -1).transpose(0, 2, 1)

    def __call__(self, x_feat: Tensor, cond: Tensor) -> Tensor:
        if x_feat.shape[0] != 2 * self._num_bands:
            raise ValidationError(
                f"expected {2 * self._num_bands} feature channels, got {x_feat.shape[0]}"
            )
        zf = self._expand_latent(cond, x_feat.dtype)
        chunks = []
        for i, blk in enumerate(self.band_blocks):
            xi = x_feat[2 * i : 2 * i + 2]
            chunks.append(blk(concat([xi, zf], axis=0)))
        merged = self.merge(concat(chunks, axis=0))
        mask = self.mask_head(merged)
        return apply_complex_mask(mask, x_feat)


class SveModel(Module):
    """Band-split enhancement: U-Net stage then latent-conditioned per-band
    refinement. Input/output are interleaved-channel band features."""

    def __init__(self, cfg: MbtfConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.interband = InterBandModule(cfg, rng, dtype)
        self.refiner = BandRefiner(cfg, rng, dtype)
        self._in_ch = 2 * cfg.num_bands

    def __call__(self, feats: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """Returns (x_r rough features, x_s refined features, z latent)."""
        if feats.ndim != 3 or feats.shape[0] != self._in_ch:
            raise ValidationError(
                f"expected [{self._in_ch}, F, T] features, got shape {feats.shape}"
            )
        x_r, z = self.interband(feats)
        x_s = self.refiner(x_r, z)
        return x_r, x_s, z


class SnrModule(Module):
    """Per-frame cleanliness estimator.

    Consumes concatenated log1p magnitudes of the enhanced and noisy band
    spectrograms, runs stacked unidirectional GRUs, a small 2-D conv over the
    feature map, a mean reduction, and a sigmoid. The time conv is always
    left-padded so chunked streaming with carried state matches one-shot
    processing exactly.
    """

    def __init__(self, cfg: MbtfConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        in_dim = 2 * cfg.num_bands * cfg.num_freq_bins
        u = cfg.snr_rnn_units
        self.grus = [
            GRULayer(in_dim if i == 0 else u, u, rng, dtype=dtype)
            for i in range(cfg.snr_gru_layers)
        ]
        self.conv = Conv2d(1, 2, (3, 3), rng, causal=True, dtype=dtype)
        self.units = u

    @staticmethod
    def features(x_s_bands: np.ndarray, y_bands: np.ndarray, dtype=np.float32) -> np.ndarray:
        """log1p magnitude features [T, 2*C*F] from two complex [C, F, T] stacks."""
        if x_s_bands.shape != y_bands.shape:
            raise ValidationError(
                f"band stacks must match, got {x_s_bands.shape} vs {y_bands.shape}"
            )
        mags = np.concatenate([np.abs(x_s_bands), np.abs(y_bands)], axis=0)
        c2, f, t = mags.shape
        return np.log1p(mags).reshape(c2 * f, t).T.astype(dtype)

    def __call__(self, feats: Tensor, state: list | None = None,
                 conv_tail: Tensor | None = None):
        """Returns (scores [T], gru states, conv tail) for streaming reuse."""
        t = feats.shape[0]
        x = feats.reshape(t, 1, -1)
        new_state = []
        for i, gru in enumerate(self.grus):
            h0 = state[i] if state is not None else None
            x, h_last = gru(x, h0)
            new_state.append(h_last)
        img = x.reshape(t, self.units).transpose(1, 0).reshape(1, self.units, t)
        k_t = self.conv.weight.shape[3]
        if conv_tail is None:
            conv_tail = Tensor(np.zeros((1, self.units, k_t - 1), dtype=feats.dtype))
        padded = concat([conv_tail, img], axis=2)
        out = F.conv2d(padded, self.conv.weight, self.conv.bias, (1, 1), (1, 1),
                       self.conv.pad_f, (0, 0))
        scores = out.mean(axis=(0, 1)).sigmoid()
        new_tail = padded[:, :, padded.shape[2] - (k_t - 1):]
        return scores, new_state, new_tail


class PersonalizedModule(Module):
    """Refinement stage gated by a speaker embedding.

    The embedding is projected to a latent-shaped map A, multiplied with the
    latent Z, and the product conditions a :class:`BandRefiner` over the
    enhanced features.
    """

    def __init__(self, cfg: MbtfConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self._n = cfg.latent_channels
        self._k = cfg.latent_bins
        self.embed_map = Linear(cfg.embedding_dim, self._n * self._k, rng, dtype=dtype)
        self.refiner = BandRefiner(cfg, rng, dtype)
        self._dim = cfg.embedding_dim

    def embed_to_map(self, embedding) -> Tensor:
        a = as_tensor(embedding, dtype=self.embed_map.weight.dtype)
        if a.shape != (self._dim,):
            raise ValidationError(
                f"embedding must have shape ({self._dim},), got {a.shape}"
            )
        return self.embed_map(a.reshape(1, self._dim)).reshape(self._n, self._k)

    def __call__(self, x_s_feat: Tensor, z: Tensor, embedding) -> Tensor:
        amap = self.embed_to_map(embedding)
        cond = z * amap.reshape(self._n, self._k, 1)
        return self.refiner(x_s_feat, cond)


class EnhancerModel(Module):
    """Full two-stage graph: band enhancement (sve), cleanliness estimator
    (snr), and personalized refinement (pem)."""

    def __init__(self, cfg: MbtfConfig, seed: int = 0, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.sve = SveModel(cfg, rng, dtype)
        self.snr = SnrModule(cfg, rng, dtype)
        self.pem = PersonalizedModule(cfg, rng, dtype)
        self.config = cfg


@dataclass
class SveOutput:
    """Numpy view of a band-enhancement pass."""

    x_r: np.ndarray  # complex [C, F, T]
    x_s: np.ndarray  # complex [C, F, T]
    z: np.ndarray    # real [N, K, T]


def sve_enhance(model: EnhancerModel, y_bands: np.ndarray) -> SveOutput:
    """Run the band-enhancement stage on complex [C, F, T] bands (no grad)."""
    dtype = next(iter(model.named_parameters().values())).dtype
    feats = bands_to_features(y_bands, dtype=dtype)
    with no_grad():
        x_r, x_s, z = model.sve(Tensor(feats))
    return SveOutput(features_to_bands(x_r.data), features_to_bands(x_s.data), z.data)


# ---- identity helper ---------------------------------------------------------


def force_identity_masks(model: EnhancerModel) -> EnhancerModel:
    """Zero every parameter and bias each mask head to the unit mask (1+0j).

    All residual blocks then pass features through unchanged and each stage's
    output equals its input spectrograms, which isolates the analysis and
    synthesis chain in round-trip tests.
    """
    for p in model.named_parameters().values():
        p.data = np.zeros_like(p.data)
    heads = (model.sve.interband.mask_head, model.sve.refiner.mask_head,
             model.pem.refiner.mask_head)
    for head in heads:
        bias = np.zeros_like(head.bias.data)
        bias[0::2] = 1.0
        head.bias.data = bias
    return model


# ---- checkpoints -------------------------------------------------------------


def model_arrays(model: Module) -> dict[str, np.ndarray]:
    arrays = {k: p.data for k, p in model.named_parameters().items()}
    arrays.update(model.named_buffers())
    return arrays


def save_checkpoint(path, model: EnhancerModel, stage: str, *,
                    lambda_t: float | None = None,
                    clean_stats: tuple[float, float] | None = None,
                    extra_arrays: dict[str, np.ndarray] | None = None,
                    extra_metadata: dict | None = None) -> None:
    """Write weights + topology + stage metadata.

    ``stage='sve'`` stores only the band-enhancement subtree; ``'ipe'`` stores
    everything (the frozen sve weights included).
    """
    if stage not in ("sve", "ipe"):
        raise ValidationError(f"stage must be 'sve' or 'ipe', got {stage!r}")
    arrays = model_arrays(model)
    if stage == "sve":
        arrays = {k: v for k, v in arrays.items() if k.startswith("sve.")}
    if extra_arrays:
        arrays.update({f"extra.{k}": v for k, v in extra_arrays.items()})
    metadata = {
        "format": "mbtfnet-checkpoint",
        "checkpoint_version": CHECKPOINT_VERSION,
        "stage": stage,
        "config": config_to_dict(model.config),
        "lambda_t": lambda_t,
        "clean_stats": list(clean_stats) if clean_stats is not None else None,
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    save_weights(path, WeightsContainer(arrays, metadata))


def load_arrays_into(model: Module, arrays: dict[str, np.ndarray],
                     prefix: str = "") -> None:
    """Copy arrays into a model, validating the topology.

    The first missing, unexpected, or shape-mismatched path raises
    :class:`DataError` naming that path.
    """
    params = model.named_parameters()
    buffers = model.named_buffers()
    expected = dict(params)
    expected.update(buffers)
    expected = {f"{prefix}{k}": v for k, v in expected.items()}
    for key in sorted(expected):
        if key not in arrays:
            raise DataError(f"weights file is missing tensor {key!r}")
        if tuple(arrays[key].shape) != tuple(expected[key].shape):
            raise DataError(
                f"shape mismatch for {key!r}: file has {arrays[key].shape}, "
                f"model expects {tuple(expected[key].shape)}"
            )
    for key in sorted(arrays):
        if key.startswith("extra."):
            continue
        if key not in expected:
            raise DataError(f"weights file has unexpected tensor {key!r}")
    for key, p in params.items():
        p.data = arrays[f"{prefix}{key}"].astype(p.dtype, copy=True)
    for key, buf in buffers.items():
        buf[...] = arrays[f"{prefix}{key}"]


def load_checkpoint(path, dtype=np.float32) -> tuple[EnhancerModel, dict]:
    """Rebuild the model recorded in a checkpoint; returns (model, metadata)."""
    container = load_weights(path)
    meta = container.metadata
    if meta.get("format") != "mbtfnet-checkpoint":
        raise DataError(f"{path}: not an enhancement checkpoint")
    cfg = config_from_dict(meta.get("config", {}))
    model = EnhancerModel(cfg, seed=0, dtype=dtype)
    stage = meta.get("stage", "ipe")
    arrays = dict(container.arrays)
    if stage == "sve":
        sve_arrays = {k[len("sve."):]: v for k, v in arrays.items()
                      if k.startswith("sve.")}
        rest = [k for k in arrays if not (k.startswith("sve.") or k.startswith("extra."))]
        if rest:
            raise DataError(f"sve checkpoint has unexpected tensor {rest[0]!r}")
        load_arrays_into(model.sve, sve_arrays)
    else:
        load_arrays_into(model, arrays)
    model.eval()
    return model, meta
