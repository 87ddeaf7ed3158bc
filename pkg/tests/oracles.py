"""Independent float64 reference implementations used as test oracles.

Everything here is written against the mathematical definitions with plain
numpy, deliberately sharing no code with the engine's kernels.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv3d_f64(x, w, b, stride=1, pads=((0, 0), (0, 0), (0, 0))):
    """Direct cross-correlation in float64 via explicit windows."""
    x = np.asarray(x, np.float64)
    w = np.asarray(w, np.float64)
    b = np.asarray(b, np.float64)
    (zl, zh), (yl, yh), (xl, xh) = pads
    xp = np.pad(x, ((0, 0), (zl, zh), (yl, yh), (xl, xh)))
    k = w.shape[2]
    wins = sliding_window_view(xp, (k, k, k), axis=(1, 2, 3))[:, ::stride, ::stride, ::stride]
    out = np.einsum("czyxijk,ocijk->ozyx", wins, w, optimize=True)
    return out + b[:, None, None, None]


def normalize_pads(pad):
    if isinstance(pad, int):
        pad = (pad, pad, pad)
    elif len(pad) == 2 and all(isinstance(p, int) for p in pad):
        pad = (tuple(pad),) * 3
    return tuple((p, p) if isinstance(p, int) else tuple(p) for p in pad)


def leaky_relu_f64(x, slope=0.02):
    x = np.asarray(x, np.float64)
    return np.where(x > 0, x, slope * x)


def sigmoid_f64(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, np.float64)))


def upsample2_f64(x):
    x = np.asarray(x, np.float64)
    for axis in (1, 2, 3):
        x = np.repeat(x, 2, axis=axis)
    return x


def broadcast_code_f64(code, spatial):
    code = np.asarray(code, np.float64)
    return np.broadcast_to(code[:, None, None, None], (len(code),) + tuple(spatial)).copy()


def masked_mse_f64(pred, target, mask, normalizer):
    diff = (np.asarray(pred, np.float64) - np.asarray(target, np.float64)) * np.asarray(
        mask, np.float64
    )
    return float((diff**2).sum() / normalizer)


def generator_forward_f64(params, content, code, kernel_size):
    """Float64 mirror of the generator architecture, reading the same params."""
    pad = kernel_size // 2
    pads = normalize_pads(pad)

    def conv(h, name):
        return conv3d_f64(h, params[name + ".w"], params[name + ".b"], 1, pads)

    x = np.asarray(content, np.float64)[None]
    h = np.concatenate([x, broadcast_code_f64(code, x.shape[1:])], axis=0)
    h = leaky_relu_f64(conv(h, "gen/conv1"))
    h = leaky_relu_f64(conv(h, "gen/conv2"))
    h = upsample2_f64(h)
    h = np.concatenate([h, broadcast_code_f64(code, h.shape[1:])], axis=0)
    h = leaky_relu_f64(conv(h, "gen/conv3"))
    h = upsample2_f64(h)
    h = np.concatenate([h, broadcast_code_f64(code, h.shape[1:])], axis=0)
    h = leaky_relu_f64(conv(h, "gen/conv4"))
    h = conv3d_f64(h, params["gen/conv5.w"], params["gen/conv5.b"], 1, normalize_pads(0))
    return sigmoid_f64(h)


def discriminator_forward_f64(params, field):
    x = np.asarray(field, np.float64)[None]
    h = leaky_relu_f64(
        conv3d_f64(x, params["dis/conv1.w"], params["dis/conv1.b"], 2, normalize_pads(1))
    )
    h = leaky_relu_f64(
        conv3d_f64(h, params["dis/conv2.w"], params["dis/conv2.b"], 1, normalize_pads(1))
    )
    h = leaky_relu_f64(
        conv3d_f64(h, params["dis/conv3.w"], params["dis/conv3.b"], 1, normalize_pads(1))
    )
    h = conv3d_f64(h, params["dis/conv4.w"], params["dis/conv4.b"], 1, normalize_pads((1, 2)))
    return sigmoid_f64(h)


def directional_fd(forward, params, direction, h=1e-3):
    """Central finite difference of `forward` along a parameter direction."""
    plus = {k: v + h * direction[k] for k, v in params.items()}
    minus = {k: v - h * direction[k] for k, v in params.items()}
    return (forward(plus) - forward(minus)) / (2.0 * h)


def dilate_naive(occ, radius):
    """Chebyshev-ball dilation by brute neighborhood scan."""
    occ = np.asarray(occ)
    out = np.zeros_like(occ)
    dx, dy, dz = occ.shape
    for x in range(dx):
        for y in range(dy):
            for z in range(dz):
                xs = occ[
                    max(0, x - radius) : x + radius + 1,
                    max(0, y - radius) : y + radius + 1,
                    max(0, z - radius) : z + radius + 1,
                ]
                out[x, y, z] = 1 if xs.any() else 0
    return out


def downsample_max_naive(values, factor):
    dx, dy, dz = values.shape
    out = np.zeros((dx // factor, dy // factor, dz // factor), values.dtype)
    for x in range(out.shape[0]):
        for y in range(out.shape[1]):
            for z in range(out.shape[2]):
                out[x, y, z] = values[
                    x * factor : (x + 1) * factor,
                    y * factor : (y + 1) * factor,
                    z * factor : (z + 1) * factor,
                ].max()
    return out


def components_touching_naive(raw, reference):
    """Flood-fill (6-connected) component filter."""
    raw = np.asarray(raw)
    reference = np.asarray(reference)
    keep = np.zeros_like(raw)
    visited = np.zeros(raw.shape, bool)
    dims = raw.shape
    for seed in np.argwhere(raw):
        seed = tuple(seed)
        if visited[seed]:
            continue
        stack = [seed]
        visited[seed] = True
        component = []
        touches = False
        while stack:
            p = stack.pop()
            component.append(p)
            if reference[p]:
                touches = True
            for axis in range(3):
                for step in (-1, 1):
                    q = list(p)
                    q[axis] += step
                    if 0 <= q[axis] < dims[axis]:
                        q = tuple(q)
                        if raw[q] and not visited[q]:
                            visited[q] = True
                            stack.append(q)
        if touches:
            for p in component:
                keep[p] = 1
    return keep


def gaussian_blur_naive(values, sigma):
    """Dense 3-D convolution with the separable-product kernel."""
    radius = int(np.ceil(3.0 * sigma))
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (offs / sigma) ** 2)
    k1 /= k1.sum()
    kernel = k1[:, None, None] * k1[None, :, None] * k1[None, None, :]
    v = np.asarray(values, np.float64)
    out = np.zeros_like(v)
    dx, dy, dz = v.shape
    for x in range(dx):
        for y in range(dy):
            for z in range(dz):
                acc = 0.0
                for ix in range(-radius, radius + 1):
                    for iy in range(-radius, radius + 1):
                        for iz in range(-radius, radius + 1):
                            px, py, pz = x + ix, y + iy, z + iz
                            if 0 <= px < dx and 0 <= py < dy and 0 <= pz < dz:
                                acc += kernel[ix + radius, iy + radius, iz + radius] * v[px, py, pz]
                out[x, y, z] = acc
    return out
