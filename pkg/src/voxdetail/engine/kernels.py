"""Numba-compiled 3-D convolution kernels.

The stride-1 forward kernels are the hot path of the whole engine. They
block over pairs of output channels and accumulate full output rows, with
the kernel taps unrolled so the innermost loop is a dense fused
multiply-add stream the compiler vectorizes. k=5 and k=3 (the generator
kernels) get dedicated unrolled variants, k=1 collapses to a BLAS matmul
over channels, everything else takes a generic path. The input-gradient
pass reuses the forward kernels on flipped, channel-transposed weights.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import ShapeError


@njit(cache=True, fastmath=True)
def _fwd_k5(xp, w, bias, out):
    cout, cin = w.shape[0], w.shape[1]
    do, ho, wo = out.shape[1], out.shape[2], out.shape[3]
    acc = np.empty((2, wo), np.float32)
    co = 0
    while co < cout:
        nb = min(2, cout - co)
        for z in range(do):
            for y in range(ho):
                acc[:nb, :] = 0.0
                for ci in range(cin):
                    for dz in range(5):
                        for dy in range(5):
                            src = xp[ci, z + dz, y + dy]
                            if nb == 2:
                                a0 = acc[0]
                                a1 = acc[1]
                                w00 = w[co, ci, dz, dy, 0]
                                w01 = w[co, ci, dz, dy, 1]
                                w02 = w[co, ci, dz, dy, 2]
                                w03 = w[co, ci, dz, dy, 3]
                                w04 = w[co, ci, dz, dy, 4]
                                w10 = w[co + 1, ci, dz, dy, 0]
                                w11 = w[co + 1, ci, dz, dy, 1]
                                w12 = w[co + 1, ci, dz, dy, 2]
                                w13 = w[co + 1, ci, dz, dy, 3]
                                w14 = w[co + 1, ci, dz, dy, 4]
                                for x in range(wo):
                                    s0 = src[x]
                                    s1 = src[x + 1]
                                    s2 = src[x + 2]
                                    s3 = src[x + 3]
                                    s4 = src[x + 4]
                                    a0[x] += w00 * s0 + w01 * s1 + w02 * s2 + w03 * s3 + w04 * s4
                                    a1[x] += w10 * s0 + w11 * s1 + w12 * s2 + w13 * s3 + w14 * s4
                            else:
                                a0 = acc[0]
                                w00 = w[co, ci, dz, dy, 0]
                                w01 = w[co, ci, dz, dy, 1]
                                w02 = w[co, ci, dz, dy, 2]
                                w03 = w[co, ci, dz, dy, 3]
                                w04 = w[co, ci, dz, dy, 4]
                                for x in range(wo):
                                    a0[x] += (
                                        w00 * src[x]
                                        + w01 * src[x + 1]
                                        + w02 * src[x + 2]
                                        + w03 * src[x + 3]
                                        + w04 * src[x + 4]
                                    )
                for j in range(nb):
                    bv = bias[co + j]
                    for x in range(wo):
                        out[co + j, z, y, x] = acc[j, x] + bv
        co += 2


@njit(cache=True, fastmath=True)
def _fwd_k3(xp, w, bias, out):
    cout, cin = w.shape[0], w.shape[1]
    do, ho, wo = out.shape[1], out.shape[2], out.shape[3]
    acc = np.empty((2, wo), np.float32)
    co = 0
    while co < cout:
        nb = min(2, cout - co)
        for z in range(do):
            for y in range(ho):
                acc[:nb, :] = 0.0
                for ci in range(cin):
                    for dz in range(3):
                        for dy in range(3):
                            src = xp[ci, z + dz, y + dy]
                            if nb == 2:
                                a0 = acc[0]
                                a1 = acc[1]
                                w00 = w[co, ci, dz, dy, 0]
                                w01 = w[co, ci, dz, dy, 1]
                                w02 = w[co, ci, dz, dy, 2]
                                w10 = w[co + 1, ci, dz, dy, 0]
                                w11 = w[co + 1, ci, dz, dy, 1]
                                w12 = w[co + 1, ci, dz, dy, 2]
                                for x in range(wo):
                                    s0 = src[x]
                                    s1 = src[x + 1]
                                    s2 = src[x + 2]
                                    a0[x] += w00 * s0 + w01 * s1 + w02 * s2
                                    a1[x] += w10 * s0 + w11 * s1 + w12 * s2
                            else:
                                a0 = acc[0]
                                w00 = w[co, ci, dz, dy, 0]
                                w01 = w[co, ci, dz, dy, 1]
                                w02 = w[co, ci, dz, dy, 2]
                                for x in range(wo):
                                    a0[x] += w00 * src[x] + w01 * src[x + 1] + w02 * src[x + 2]
                for j in range(nb):
                    bv = bias[co + j]
                    for x in range(wo):
                        out[co + j, z, y, x] = acc[j, x] + bv
        co += 2


@njit(cache=True, fastmath=True)
def _fwd_generic(xp, w, bias, out, k):
    cout, cin = w.shape[0], w.shape[1]
    do, ho, wo = out.shape[1], out.shape[2], out.shape[3]
    acc = np.empty(wo, np.float32)
    for co in range(cout):
        for z in range(do):
            for y in range(ho):
                acc[:] = 0.0
                for ci in range(cin):
                    for dz in range(k):
                        for dy in range(k):
                            src = xp[ci, z + dz, y + dy]
                            for dx in range(k):
                                wv = w[co, ci, dz, dy, dx]
                                for x in range(wo):
                                    acc[x] += wv * src[x + dx]
                bv = bias[co]
                for x in range(wo):
                    out[co, z, y, x] = acc[x] + bv


@njit(cache=True, fastmath=True)
def _fwd_strided(xp, w, bias, out, k, stride):
    cout, cin = w.shape[0], w.shape[1]
    do, ho, wo = out.shape[1], out.shape[2], out.shape[3]
    for co in range(cout):
        for z in range(do):
            for y in range(ho):
                for x in range(wo):
                    acc = bias[co]
                    for ci in range(cin):
                        for dz in range(k):
                            for dy in range(k):
                                src = xp[ci, z * stride + dz, y * stride + dy]
                                for dx in range(k):
                                    acc += w[co, ci, dz, dy, dx] * src[x * stride + dx]
                    out[co, z, y, x] = acc


@njit(cache=True, fastmath=True)
def _gradw_k5(xp, gout, gw):
    cout, cin = gw.shape[0], gw.shape[1]
    do, ho, wo = gout.shape[1], gout.shape[2], gout.shape[3]
    co = 0
    while co < cout:
        paired = co + 2 <= cout
        for ci in range(cin):
            for dz in range(5):
                for dy in range(5):
                    s00 = np.float32(0.0)
                    s01 = np.float32(0.0)
                    s02 = np.float32(0.0)
                    s03 = np.float32(0.0)
                    s04 = np.float32(0.0)
                    s10 = np.float32(0.0)
                    s11 = np.float32(0.0)
                    s12 = np.float32(0.0)
                    s13 = np.float32(0.0)
                    s14 = np.float32(0.0)
                    if paired:
                        for z in range(do):
                            for y in range(ho):
                                g0 = gout[co, z, y]
                                g1 = gout[co + 1, z, y]
                                src = xp[ci, z + dz, y + dy]
                                for x in range(wo):
                                    v0 = src[x]
                                    v1 = src[x + 1]
                                    v2 = src[x + 2]
                                    v3 = src[x + 3]
                                    v4 = src[x + 4]
                                    a = g0[x]
                                    b = g1[x]
                                    s00 += a * v0
                                    s01 += a * v1
                                    s02 += a * v2
                                    s03 += a * v3
                                    s04 += a * v4
                                    s10 += b * v0
                                    s11 += b * v1
                                    s12 += b * v2
                                    s13 += b * v3
                                    s14 += b * v4
                    else:
                        for z in range(do):
                            for y in range(ho):
                                g0 = gout[co, z, y]
                                src = xp[ci, z + dz, y + dy]
                                for x in range(wo):
                                    a = g0[x]
                                    s00 += a * src[x]
                                    s01 += a * src[x + 1]
                                    s02 += a * src[x + 2]
                                    s03 += a * src[x + 3]
                                    s04 += a * src[x + 4]
                    gw[co, ci, dz, dy, 0] = s00
                    gw[co, ci, dz, dy, 1] = s01
                    gw[co, ci, dz, dy, 2] = s02
                    gw[co, ci, dz, dy, 3] = s03
                    gw[co, ci, dz, dy, 4] = s04
                    if paired:
                        gw[co + 1, ci, dz, dy, 0] = s10
                        gw[co + 1, ci, dz, dy, 1] = s11
                        gw[co + 1, ci, dz, dy, 2] = s12
                        gw[co + 1, ci, dz, dy, 3] = s13
                        gw[co + 1, ci, dz, dy, 4] = s14
        co += 2 if paired else 1


@njit(cache=True, fastmath=True)
def _gradw_k3(xp, gout, gw):
    cout, cin = gw.shape[0], gw.shape[1]
    do, ho, wo = gout.shape[1], gout.shape[2], gout.shape[3]
    co = 0
    while co < cout:
        paired = co + 2 <= cout
        for ci in range(cin):
            for dz in range(3):
                for dy in range(3):
                    s00 = np.float32(0.0)
                    s01 = np.float32(0.0)
                    s02 = np.float32(0.0)
                    s10 = np.float32(0.0)
                    s11 = np.float32(0.0)
                    s12 = np.float32(0.0)
                    if paired:
                        for z in range(do):
                            for y in range(ho):
                                g0 = gout[co, z, y]
                                g1 = gout[co + 1, z, y]
                                src = xp[ci, z + dz, y + dy]
                                for x in range(wo):
                                    v0 = src[x]
                                    v1 = src[x + 1]
                                    v2 = src[x + 2]
                                    a = g0[x]
                                    b = g1[x]
                                    s00 += a * v0
                                    s01 += a * v1
                                    s02 += a * v2
                                    s10 += b * v0
                                    s11 += b * v1
                                    s12 += b * v2
                    else:
                        for z in range(do):
                            for y in range(ho):
                                g0 = gout[co, z, y]
                                src = xp[ci, z + dz, y + dy]
                                for x in range(wo):
                                    a = g0[x]
                                    s00 += a * src[x]
                                    s01 += a * src[x + 1]
                                    s02 += a * src[x + 2]
                    gw[co, ci, dz, dy, 0] = s00
                    gw[co, ci, dz, dy, 1] = s01
                    gw[co, ci, dz, dy, 2] = s02
                    if paired:
                        gw[co + 1, ci, dz, dy, 0] = s10
                        gw[co + 1, ci, dz, dy, 1] = s11
                        gw[co + 1, ci, dz, dy, 2] = s12
        co += 2 if paired else 1


@njit(cache=True, fastmath=True)
def _gradw_generic(xp, gout, gw, k):
    cout, cin = gw.shape[0], gw.shape[1]
    do, ho, wo = gout.shape[1], gout.shape[2], gout.shape[3]
    for co in range(cout):
        for ci in range(cin):
            for dz in range(k):
                for dy in range(k):
                    for dx in range(k):
                        s = np.float32(0.0)
                        for z in range(do):
                            for y in range(ho):
                                g = gout[co, z, y]
                                src = xp[ci, z + dz, y + dy]
                                for x in range(wo):
                                    s += g[x] * src[x + dx]
                        gw[co, ci, dz, dy, dx] = s


@njit(cache=True, fastmath=True)
def _gradw_strided(xp, gout, gw, k, stride):
    cout, cin = gw.shape[0], gw.shape[1]
    do, ho, wo = gout.shape[1], gout.shape[2], gout.shape[3]
    for co in range(cout):
        for ci in range(cin):
            for dz in range(k):
                for dy in range(k):
                    for dx in range(k):
                        s = np.float32(0.0)
                        for z in range(do):
                            for y in range(ho):
                                g = gout[co, z, y]
                                src = xp[ci, z * stride + dz, y * stride + dy]
                                for x in range(wo):
                                    s += g[x] * src[x * stride + dx]
                        gw[co, ci, dz, dy, dx] = s


@njit(cache=True, fastmath=True)
def _gradx_strided(gout, w, gxp, k, stride):
    cout, cin = w.shape[0], w.shape[1]
    do, ho, wo = gout.shape[1], gout.shape[2], gout.shape[3]
    for co in range(cout):
        for z in range(do):
            for y in range(ho):
                for x in range(wo):
                    g = gout[co, z, y, x]
                    for ci in range(cin):
                        for dz in range(k):
                            for dy in range(k):
                                row = gxp[ci, z * stride + dz, y * stride + dy]
                                for dx in range(k):
                                    row[x * stride + dx] += g * w[co, ci, dz, dy, dx]


def normalize_padding(pad, k: int) -> tuple[tuple[int, int], ...]:
    """Accepts an int, a (lo, hi) pair, a per-axis tuple, or per-axis pairs."""
    if isinstance(pad, int):
        pad = (pad, pad, pad)
    elif len(pad) == 2 and all(isinstance(p, int) for p in pad):
        pad = (tuple(pad),) * 3
    if len(pad) != 3:
        raise ShapeError(f"padding needs 3 axes, got {pad!r}")
    out = []
    for p in pad:
        lo, hi = (p, p) if isinstance(p, int) else p
        if lo < 0 or hi < 0:
            raise ShapeError(f"negative padding {pad!r}")
        out.append((lo, hi))
    return tuple(out)


def _pad_volume(x: np.ndarray, pads) -> np.ndarray:
    (zl, zh), (yl, yh), (xl, xh) = pads
    if not any((zl, zh, yl, yh, xl, xh)):
        return np.ascontiguousarray(x)
    c, d, h, w = x.shape
    xp = np.zeros((c, d + zl + zh, h + yl + yh, w + xl + xh), np.float32)
    xp[:, zl : zl + d, yl : yl + h, xl : xl + w] = x
    return xp


def conv_output_shape(in_shape, k: int, stride: int, pads) -> tuple[int, int, int]:
    dims = []
    for size, (lo, hi) in zip(in_shape, pads):
        span = size + lo + hi - k
        if span < 0:
            raise ShapeError(f"conv input {in_shape} too small for k={k} pad={pads}")
        dims.append(span // stride + 1)
    return tuple(dims)


def _dispatch_fwd(xp, w, bias, out, k: int, stride: int):
    if stride != 1:
        _fwd_strided(xp, w, bias, out, k, stride)
    elif k == 5:
        _fwd_k5(xp, w, bias, out)
    elif k == 3:
        _fwd_k3(xp, w, bias, out)
    else:
        _fwd_generic(xp, w, bias, out, k)


def conv3d_forward(x, w, bias, stride: int, pads) -> np.ndarray:
    """Cross-correlation of [Cin,D,H,W] with [Cout,Cin,k,k,k]."""
    k = w.shape[2]
    do, ho, wo = conv_output_shape(x.shape[1:], k, stride, pads)
    cout, cin = w.shape[0], w.shape[1]
    if k == 1 and stride == 1 and not any(p for pair in pads for p in pair):
        flat = w.reshape(cout, cin) @ x.reshape(cin, -1)
        return (flat + bias[:, None]).reshape(cout, do, ho, wo)
    xp = _pad_volume(x, pads)
    out = np.empty((cout, do, ho, wo), np.float32)
    _dispatch_fwd(xp, w, bias, out, k, stride)
    return out


def conv3d_backward(x, w, stride: int, pads, gout, need_gx=True, need_gw=True):
    """Gradients (gx, gw, gb) of the forward cross-correlation.

    Unneeded gradients are skipped and returned as None.
    """
    k = w.shape[2]
    cout, cin = w.shape[0], w.shape[1]
    gb = gout.sum(axis=(1, 2, 3), dtype=np.float64).astype(np.float32)
    if k == 1 and stride == 1 and not any(p for pair in pads for p in pair):
        g2 = gout.reshape(cout, -1)
        gx = gw = None
        if need_gx:
            gx = np.ascontiguousarray((w.reshape(cout, cin).T @ g2).reshape(x.shape))
        if need_gw:
            gw = np.ascontiguousarray((g2 @ x.reshape(cin, -1).T).reshape(w.shape))
        return gx, gw, gb
    _, d, h, wd = x.shape
    gx = gw = None
    if stride == 1:
        if need_gw:
            xp = _pad_volume(x, pads)
            gw = np.empty_like(w)
            if k == 5:
                _gradw_k5(xp, gout, gw)
            elif k == 3:
                _gradw_k3(xp, gout, gw)
            else:
                _gradw_generic(xp, gout, gw, k)
        if need_gx:
            # input gradient = forward conv of the output gradient with the
            # spatially flipped, channel-transposed weights; pad so the
            # valid conv lands exactly on the unpadded input region
            wt = np.ascontiguousarray(w[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4))
            back_pads = tuple((k - 1 - lo, k - 1 - hi) for lo, hi in pads)
            if min(p for pair in back_pads for p in pair) >= 0:
                gp = _pad_volume(gout, back_pads)
                gx = np.empty(x.shape, np.float32)
                _dispatch_fwd(gp, wt, np.zeros(cin, np.float32), gx, k, 1)
            else:
                # padding exceeds k-1: take the full conv and crop
                gp = _pad_volume(gout, tuple((k - 1, k - 1) for _ in range(3)))
                xp_shape = (cin, d + pads[0][0] + pads[0][1], h + pads[1][0] + pads[1][1], wd + pads[2][0] + pads[2][1])
                gxp = np.empty(xp_shape, np.float32)
                _dispatch_fwd(gp, wt, np.zeros(cin, np.float32), gxp, k, 1)
                (zl, _), (yl, _), (xl, _) = pads
                gx = np.ascontiguousarray(gxp[:, zl : zl + d, yl : yl + h, xl : xl + wd])
        return gx, gw, gb
    xp = _pad_volume(x, pads)
    if need_gw:
        gw = np.empty_like(w)
        _gradw_strided(xp, gout, gw, k, stride)
    if need_gx:
        gxp = np.zeros(xp.shape, np.float32)
        _gradx_strided(gout, w, gxp, k, stride)
        (zl, _), (yl, _), (xl, _) = pads
        gx = np.ascontiguousarray(gxp[:, zl : zl + d, yl : yl + h, xl : xl + wd])
    return gx, gw, gb


def warmup():
    """Trigger JIT compilation of every kernel on dummy problems."""
    for k in (3, 4, 5):
        x = np.zeros((2, 6, 6, 6), np.float32)
        w = np.zeros((2, 2, k, k, k), np.float32)
        b = np.zeros(2, np.float32)
        pads = normalize_padding(k // 2, k)
        out = conv3d_forward(x, w, b, 1, pads)
        conv3d_backward(x, w, 1, pads, out)
        out2 = conv3d_forward(x, w, b, 2, pads)
        conv3d_backward(x, w, 2, pads, out2)
