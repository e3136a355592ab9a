"""Synthetic light fields with known geometry, used as ground truth."""

from __future__ import annotations

import math

import numpy as np

from .alignment import FlowField, FlowSet, bilinear_sample
from .lightfield import LightField
from .resample import resize


def value_noise(shape, seed: int = 0, cells=(48, 24, 12, 6), persistence: float = 0.6,
                lo: float = 0.1, hi: float = 0.9) -> np.ndarray:
    """Multi-octave value noise: random lattices bicubically interpolated.

    ``cells`` are lattice spacings in pixels, coarsest first; each finer
    octave's amplitude is ``persistence`` times the previous one.  The
    result is rescaled to ``[lo, hi]``.
    """
    rng = np.random.default_rng(seed)
    Y, X = shape
    out = np.zeros(shape)
    amp = 1.0
    for cell in cells:
        gy = max(2, math.ceil(Y / cell) + 1)
        gx = max(2, math.ceil(X / cell) + 1)
        lattice = rng.random((gy, gx))
        big = resize(lattice, ((gy) * cell, (gx) * cell), antialias=False)
        out += amp * big[:Y, :X]
        amp *= persistence
    out -= out.min()
    out /= max(out.max(), 1e-12)
    return lo + (hi - lo) * out


def _grid_offsets(P: int, Q: int):
    n = P * Q
    sc, tc = divmod(n // 2, Q)
    s = np.arange(P) - sc
    t = np.arange(Q) - tc
    return s, t, sc, tc


def synth_translational(base: np.ndarray, P: int, Q: int, disparity: float) -> tuple[LightField, FlowSet]:
    """Light field whose view ``(s, t)`` is ``base`` translated by
    ``(d * (t - t_c), d * (s - s_c))`` pixels, plus the exact flows back.

    Shifts use bilinear interpolation.  All views are cut from the same
    central window of ``base``, shrunk on each side by the largest shift
    (rounded up) so no view samples outside ``base``.
    """
    base = np.asarray(base, dtype=np.float64)
    d = float(disparity)
    s_off, t_off, _, _ = _grid_offsets(P, Q)
    my = math.ceil(abs(d) * np.abs(s_off).max() - 1e-9)
    mx = math.ceil(abs(d) * np.abs(t_off).max() - 1e-9)
    Yb, Xb = base.shape[:2]
    Y, X = Yb - 2 * my, Xb - 2 * mx
    if Y < 1 or X < 1:
        raise ValueError(f"base {Xb}x{Yb} too small for disparity {d} on a {P}x{Q} grid")
    yy, xx = np.mgrid[0:Y, 0:X]
    views, flows = [], []
    for s in s_off:
        for t in t_off:
            dx, dy = d * t, d * s
            # view(x) = base(x - shift), expressed in cropped coordinates
            img, _ = bilinear_sample(base, yy + my - dy, xx + mx - dx)
            views.append(img)
            flows.append(FlowField.uniform((Y, X), -dx, -dy))
    lf = LightField(np.stack(views).reshape((P, Q) + views[0].shape),
                    "rgb" if base.ndim == 3 else "luma")
    return lf, FlowSet(flows, P, Q)


def synth_layered(background: np.ndarray, foreground: np.ndarray, P: int, Q: int,
                  d_back: float, d_front: float, box: tuple[int, int, int, int],
                  shading: float = 0.0):
    """Two fronto-parallel layers: an opaque textured box over a background.

    ``box = (y0, x0, height, width)`` locates the foreground in the centre
    view.  ``shading`` adds view-dependent illumination: view ``(s, t)`` is
    multiplied by ``1 + shading * ((t - t_c) * xr + (s - s_c) * yr)`` with
    ``xr, yr`` ramps over [-0.5, 0.5] across the frame, so views differ by
    more than a warp.  Returns the light field and per-view ground-truth
    flows (the flow of whichever layer is visible at each pixel).
    """
    background = np.asarray(background, dtype=np.float64)
    foreground = np.asarray(foreground, dtype=np.float64)
    s_off, t_off, _, _ = _grid_offsets(P, Q)
    dmax = max(abs(d_back), abs(d_front))
    my = math.ceil(dmax * np.abs(s_off).max() - 1e-9)
    mx = math.ceil(dmax * np.abs(t_off).max() - 1e-9)
    Yb, Xb = background.shape
    Y, X = Yb - 2 * my, Xb - 2 * mx
    y0, x0, h, w = box
    yy, xx = np.mgrid[0:Y, 0:X]
    xr = xx / max(X - 1, 1) - 0.5
    yr = yy / max(Y - 1, 1) - 0.5
    views, flows = [], []
    for s in s_off:
        for t in t_off:
            bg, _ = bilinear_sample(background, yy + my - d_back * s, xx + mx - d_back * t)
            fy = yy - d_front * s
            fx = xx - d_front * t
            fg, _ = bilinear_sample(foreground, fy + my, fx + mx)
            inside = (fy >= y0) & (fy < y0 + h) & (fx >= x0) & (fx < x0 + w)
            gain = 1.0 + shading * (t * xr + s * yr)
            views.append(np.clip(np.where(inside, fg, bg) * gain, 0.0, 1.0))
            u = np.where(inside, -d_front * t, -d_back * t)
            v = np.where(inside, -d_front * s, -d_back * s)
            ok = (xx + u >= 0) & (xx + u <= X - 1) & (yy + v >= 0) & (yy + v <= Y - 1)
            flows.append(FlowField(u, v, ok))
    return LightField(np.stack(views).reshape(P, Q, Y, X)), FlowSet(flows, P, Q)


TEXTURE = dict(cells=(32, 16, 8, 4, 2), persistence=0.7)


def view_margin(d: float, P: int, Q: int) -> tuple[int, int]:
    s_off, t_off, _, _ = _grid_offsets(P, Q)
    return (math.ceil(abs(d) * np.abs(s_off).max() - 1e-9),
            math.ceil(abs(d) * np.abs(t_off).max() - 1e-9))


def benchmark_lightfield(seed: int = 0, P: int = 5, Q: int = 5, shape=(168, 204),
                         disparity: float = 1.0) -> tuple[LightField, FlowSet]:
    """Seeded textured translational light field with views of exactly ``shape``."""
    my, mx = view_margin(disparity, P, Q)
    base = value_noise((shape[0] + 2 * my, shape[1] + 2 * mx), seed=seed, **TEXTURE)
    return synth_translational(base, P, Q, disparity)


def benchmark_layered(seed: int = 0, P: int = 5, Q: int = 5, shape=(168, 204),
                      d_back: float = 1.0, d_front: float = 3.0) -> tuple[LightField, FlowSet]:
    """Seeded occluding scene: a textured box covering the middle third of the
    centre view in front of a differently textured background."""
    my, mx = view_margin(max(abs(d_back), abs(d_front)), P, Q)
    full = (shape[0] + 2 * my, shape[1] + 2 * mx)
    bg = value_noise(full, seed=seed, **TEXTURE)
    fg = value_noise(full, seed=seed + 1000, **TEXTURE)
    Y, X = shape
    box = (Y // 3, X // 3, Y // 3, X // 3)
    return synth_layered(bg, fg, P, Q, d_back, d_front, box)
