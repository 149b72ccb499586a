"""Neural-net primitives: 2-D convolution, transposed convolution, GRU.

Convolution uses cross-correlation semantics (no kernel flip) on 3-D tensors
laid out as ``[channels, freq, time]``. Forward and backward share two helper
routines: a patch *gather* (fancy-index read) and its adjoint *scatter*
(``np.add.at`` write), so the conv/conv-transpose pair is adjoint by
construction.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["conv2d", "conv_transpose2d", "gru", "prelu"]


def _out_size(n: int, k: int, stride: int, dilation: int) -> int:
    span = (k - 1) * dilation + 1
    if n < span:
        raise ValueError(f"input extent {n} smaller than dilated kernel span {span}")
    return (n - span) // stride + 1


def _index_grids(f_out, t_out, kf, kt, sf, st, df, dt):
    f_idx = np.arange(f_out)[:, None] * sf + np.arange(kf)[None, :] * df  # [F', kf]
    t_idx = np.arange(t_out)[:, None] * st + np.arange(kt)[None, :] * dt  # [T', kt]
    return f_idx, t_idx


def _gather(x: np.ndarray, kf, kt, sf, st, df, dt) -> np.ndarray:
    """Read conv patches from padded input [C, F, T] -> [C, F', T', kf, kt]."""
    f_out = _out_size(x.shape[1], kf, sf, df)
    t_out = _out_size(x.shape[2], kt, st, dt)
    f_idx, t_idx = _index_grids(f_out, t_out, kf, kt, sf, st, df, dt)
    return x[:, f_idx[:, None, :, None], t_idx[None, :, None, :]]


def _scatter(contrib: np.ndarray, out_shape, kf, kt, sf, st, df, dt) -> np.ndarray:
    """Adjoint of `_gather`: accumulate [C, F', T', kf, kt] into [C, F, T]."""
    out = np.zeros(out_shape, dtype=contrib.dtype)
    f_out, t_out = contrib.shape[1], contrib.shape[2]
    f_idx, t_idx = _index_grids(f_out, t_out, kf, kt, sf, st, df, dt)
    np.add.at(out, (slice(None), f_idx[:, None, :, None], t_idx[None, :, None, :]), contrib)
    return out


def _pad_ft(x: np.ndarray, pad_f, pad_t) -> np.ndarray:
    return np.pad(x, ((0, 0), pad_f, pad_t))


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None,
    stride: tuple[int, int] = (1, 1),
    dilation: tuple[int, int] = (1, 1),
    pad_f: tuple[int, int] = (0, 0),
    pad_t: tuple[int, int] = (0, 0),
) -> Tensor:
    """Cross-correlate ``x [C_in, F, T]`` with ``weight [C_out, C_in, kf, kt]``."""
    if x.ndim != 3:
        raise ValueError(f"conv2d expects [C, F, T] input, got shape {x.shape}")
    c_out, c_in, kf, kt = weight.shape
    if x.shape[0] != c_in:
        raise ValueError(
            f"conv2d channel mismatch: input has {x.shape[0]} channels, weight expects {c_in}"
        )
    sf, st = stride
    df, dt = dilation

    xp = _pad_ft(x.data, pad_f, pad_t)
    patches = _gather(xp, kf, kt, sf, st, df, dt)  # [C_in, F', T', kf, kt]
    out = np.einsum("cftab,ocab->oft", patches, weight.data, optimize=True)
    if bias is not None:
        out = out + bias.data[:, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if weight.requires_grad:
            gw = np.einsum("cftab,oft->ocab", patches, g, optimize=True)
            weight._accum(gw)
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=(1, 2)))
        if x.requires_grad:
            contrib = np.einsum("oft,ocab->cftab", g, weight.data, optimize=True)
            gxp = _scatter(contrib, xp.shape, kf, kt, sf, st, df, dt)
            gx = gxp[
                :,
                pad_f[0] : gxp.shape[1] - pad_f[1] or None,
                pad_t[0] : gxp.shape[2] - pad_t[1] or None,
            ]
            x._accum(gx)

    return Tensor._make(np.ascontiguousarray(out), parents, backward)


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None,
    stride: tuple[int, int] = (1, 1),
    dilation: tuple[int, int] = (1, 1),
    pad_f: tuple[int, int] = (0, 0),
    pad_t: tuple[int, int] = (0, 0),
    output_padding: tuple[int, int] = (0, 0),
) -> Tensor:
    """Adjoint of :func:`conv2d`; ``weight`` is laid out ``[C_in, C_out, kf, kt]``.

    Output extent per axis: ``(n - 1) * stride - pad_before - pad_after
    + (k - 1) * dilation + 1 + output_padding``.
    """
    if x.ndim != 3:
        raise ValueError(f"conv_transpose2d expects [C, F, T] input, got shape {x.shape}")
    c_in, c_out, kf, kt = weight.shape
    if x.shape[0] != c_in:
        raise ValueError(
            f"conv_transpose2d channel mismatch: input has {x.shape[0]} channels, "
            f"weight expects {c_in}"
        )
    sf, st = stride
    df, dt = dilation
    _, f_in, t_in = x.shape

    full_f = (f_in - 1) * sf + (kf - 1) * df + 1
    full_t = (t_in - 1) * st + (kt - 1) * dt + 1
    out_f = full_f - pad_f[0] - pad_f[1] + output_padding[0]
    out_t = full_t - pad_t[0] - pad_t[1] + output_padding[1]
    if out_f <= 0 or out_t <= 0:
        raise ValueError("conv_transpose2d output size is non-positive; check padding")

    contrib = np.einsum("ift,ioab->oftab", x.data, weight.data, optimize=True)
    full = _scatter(contrib, (c_out, full_f, full_t), kf, kt, sf, st, df, dt)
    # crop padding, then extend with output_padding zeros
    cropped = full[
        :, pad_f[0] : full_f - pad_f[1] or None, pad_t[0] : full_t - pad_t[1] or None
    ]
    out = np.zeros((c_out, out_f, out_t), dtype=cropped.dtype)
    out[:, : cropped.shape[1], : cropped.shape[2]] = cropped
    if bias is not None:
        out += bias.data[:, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        # re-pad gradient back to the uncropped frame
        g_core = g[:, : full_f - pad_f[0] - pad_f[1], : full_t - pad_t[0] - pad_t[1]]
        g_full = _pad_ft(g_core, pad_f, pad_t)
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=(1, 2)))
        g_patches = None
        if x.requires_grad or weight.requires_grad:
            g_patches = _gather(g_full, kf, kt, sf, st, df, dt)  # [C_out, f_in, t_in, kf, kt]
        if x.requires_grad:
            gx = np.einsum("oftab,ioab->ift", g_patches, weight.data, optimize=True)
            x._accum(gx)
        if weight.requires_grad:
            gw = np.einsum("ift,oftab->ioab", x.data, g_patches, optimize=True)
            weight._accum(gw)

    return Tensor._make(out, parents, backward)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """PReLU with per-channel slope; channel axis is axis 0."""
    a = slope.data.reshape((-1,) + (1,) * (x.ndim - 1))
    neg = x.data < 0
    out = np.where(neg, a * x.data, x.data)

    def backward(g):
        if x.requires_grad:
            x._accum(np.where(neg, a * g, g))
        if slope.requires_grad:
            gs = (g * x.data * neg).sum(axis=tuple(range(1, x.ndim)))
            slope._accum(gs.reshape(slope.data.shape))

    return Tensor._make(out.astype(x.dtype), (x, slope), backward)


def gru(
    x: Tensor,
    h0: Tensor,
    w_ih: Tensor,
    w_hh: Tensor,
    b_ih: Tensor,
    b_hh: Tensor,
) -> Tensor:
    """Fused unidirectional GRU.

    ``x`` is ``[T, B, D]``, ``h0`` is ``[B, H]``; weights follow the
    (reset, update, candidate) gate order: ``w_ih [3H, D]``, ``w_hh [3H, H]``.
    Returns the hidden sequence ``[T, B, H]``; the final state is ``out[-1]``.
    Backward is hand-rolled truncated-nowhere BPTT over the saved gate values.
    """
    T, B, D = x.shape
    H = h0.shape[-1]
    if w_ih.shape != (3 * H, D):
        raise ValueError(f"GRU w_ih shape {w_ih.shape} does not match (3*{H}, {D})")
    if w_hh.shape != (3 * H, H):
        raise ValueError(f"GRU w_hh shape {w_hh.shape} does not match (3*{H}, {H})")

    xd, h = x.data, h0.data
    Wi, Wh = w_ih.data, w_hh.data
    bi, bh = b_ih.data, b_hh.data

    def _sig(v):
        return np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                        np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    ys = np.empty((T, B, H), dtype=xd.dtype)
    rs = np.empty_like(ys)
    zs = np.empty_like(ys)
    ns = np.empty_like(ys)
    ss = np.empty_like(ys)  # W_hn h + b_hn, needed for the reset-gate grad
    hs_prev = np.empty_like(ys)

    gates_x = xd.reshape(T * B, D) @ Wi.T + bi  # [T*B, 3H]
    gates_x = gates_x.reshape(T, B, 3 * H)
    for t in range(T):
        gh = h @ Wh.T + bh  # [B, 3H]
        gx = gates_x[t]
        r = _sig(gx[:, :H] + gh[:, :H])
        z = _sig(gx[:, H : 2 * H] + gh[:, H : 2 * H])
        s = gh[:, 2 * H :]
        n = np.tanh(gx[:, 2 * H :] + r * s)
        hs_prev[t] = h
        h = (1.0 - z) * n + z * h
        ys[t], rs[t], zs[t], ns[t], ss[t] = h, r, z, n, s

    def backward(g):
        gWi = np.zeros_like(Wi) if w_ih.requires_grad else None
        gWh = np.zeros_like(Wh) if w_hh.requires_grad else None
        gbi = np.zeros_like(bi) if b_ih.requires_grad else None
        gbh = np.zeros_like(bh) if b_hh.requires_grad else None
        gx_all = np.zeros((T, B, 3 * H), dtype=xd.dtype)
        dh = np.zeros((B, H), dtype=xd.dtype)
        for t in range(T - 1, -1, -1):
            dh_t = g[t] + dh
            r, z, n, s, hp = rs[t], zs[t], ns[t], ss[t], hs_prev[t]
            dn = dh_t * (1.0 - z)
            dz = dh_t * (hp - n)
            dn_pre = dn * (1.0 - n * n)
            dr = dn_pre * s
            dz_pre = dz * z * (1.0 - z)
            dr_pre = dr * r * (1.0 - r)
            gi = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)          # input side
            ghs = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=1)     # hidden side
            gx_all[t] = gi
            if gWh is not None:
                gWh += ghs.T @ hp
            if gbh is not None:
                gbh += ghs.sum(axis=0)
            dh = dh_t * z + ghs @ Wh
        if w_ih.requires_grad:
            gWi += gx_all.reshape(T * B, 3 * H).T @ xd.reshape(T * B, D)
            w_ih._accum(gWi)
        if gbi is not None:
            b_ih._accum(gx_all.sum(axis=(0, 1)))
        if gWh is not None:
            w_hh._accum(gWh)
        if gbh is not None:
            b_hh._accum(gbh)
        if x.requires_grad:
            x._accum((gx_all.reshape(T * B, 3 * H) @ Wi).reshape(T, B, D))
        if h0.requires_grad:
            h0._accum(dh)

    return Tensor._make(ys, (x, h0, w_ih, w_hh, b_ih, b_hh), backward)
