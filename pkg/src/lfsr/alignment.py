"""Dense flows to the centre view, forward/inverse warping and alignment.

A :class:`FlowField` lives on the grid of the view it belongs to: pixel
``(x, y)`` of that view corresponds to ``(x + u, y + v)`` in the centre
view.  Forward warping scatters the view onto the centre grid along the
flow; inverse warping gathers a centre-grid image back onto the view grid,
so ``inverse_warp(forward_warp(view, f)[0], f)`` recovers ``view`` for
integer translations.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage

from .lightfield import LightField, view_filename


@dataclass(frozen=True)
class FlowField:
    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float32)
        v = np.asarray(self.v, dtype=np.float32)
        valid = np.asarray(self.valid, dtype=bool)
        if not (u.shape == v.shape == valid.shape) or u.ndim != 2:
            raise ValueError(f"flow planes disagree: {u.shape}, {v.shape}, {valid.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise ValueError("flow contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @classmethod
    def zeros(cls, shape) -> "FlowField":
        return cls(np.zeros(shape), np.zeros(shape), np.ones(shape, bool))

    @classmethod
    def uniform(cls, shape, u: float, v: float) -> "FlowField":
        Y, X = shape
        yy, xx = np.mgrid[0:Y, 0:X]
        valid = (xx + u >= 0) & (xx + u <= X - 1) & (yy + v >= 0) & (yy + v <= Y - 1)
        return cls(np.full(shape, u), np.full(shape, v), valid)


@dataclass(frozen=True)
class FlowSet:
    flows: tuple
    P: int
    Q: int

    def __post_init__(self):
        flows = tuple(self.flows)
        if len(flows) != self.P * self.Q:
            raise ValueError(f"expected {self.P * self.Q} flows, got {len(flows)}")
        if len({f.shape for f in flows}) != 1:
            raise ValueError("flow fields differ in size")
        object.__setattr__(self, "flows", flows)

    def __len__(self):
        return len(self.flows)

    def __getitem__(self, i) -> FlowField:
        return self.flows[i]

    def __iter__(self):
        return iter(self.flows)


@dataclass(frozen=True)
class WarpMask:
    filled: np.ndarray
    # accumulated splat weight per target pixel; > 1 where sources collide
    weight: np.ndarray | None = None


@dataclass(frozen=True)
class FlowParams:
    max_disparity: float = 4.0
    block: int = 8
    levels: int = 3
    median: int = 5
    texture_eps: float = 1e-6
    # window of the per-pixel candidate refinement; 0 keeps the smooth field
    refine: int = 5


FlowEstimator = Callable[[np.ndarray, np.ndarray, FlowParams], FlowField]


def _pmap(fn, items, threads: int | None):
    if threads is not None and threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# -- sampling and warping --------------------------------------------------

def bilinear_sample(image: np.ndarray, yy: np.ndarray, xx: np.ndarray):
    """Sample ``image`` at real coordinates with edge replication.

    Returns ``(values, inside)`` where ``inside`` flags coordinates within
    the frame ``[0, X-1] x [0, Y-1]``.
    """
    Y, X = image.shape[:2]
    inside = (xx >= -1e-6) & (xx <= X - 1 + 1e-6) & (yy >= -1e-6) & (yy <= Y - 1 + 1e-6)
    xx = np.clip(xx, 0, X - 1)
    yy = np.clip(yy, 0, Y - 1)
    x0 = np.minimum(np.floor(xx).astype(np.intp), X - 1)
    y0 = np.minimum(np.floor(yy).astype(np.intp), Y - 1)
    fx = xx - x0
    fy = yy - y0
    x1 = np.minimum(x0 + 1, X - 1)
    y1 = np.minimum(y0 + 1, Y - 1)
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bot * fy, inside


def _check_dims(view: np.ndarray, flow: FlowField):
    if view.shape[:2] != flow.shape:
        raise ValueError(f"view {view.shape[:2]} and flow {flow.shape} differ in size")


def forward_warp(view: np.ndarray, flow: FlowField) -> tuple[np.ndarray, WarpMask]:
    """Scatter ``view`` along ``flow`` with bilinear splats.

    Each source pixel spreads over the four pixels around its target with
    bilinear weights; colliding splats are averaged by weight.  Targets
    receiving no weight are zero and flagged unfilled.
    """
    view = np.asarray(view, dtype=np.float64)
    _check_dims(view, flow)
    Y, X = flow.shape
    yy, xx = np.mgrid[0:Y, 0:X]
    tx = (xx + flow.u.astype(np.float64)).ravel()
    ty = (yy + flow.v.astype(np.float64)).ravel()
    x0 = np.floor(tx).astype(np.intp)
    y0 = np.floor(ty).astype(np.intp)
    fx = tx - x0
    fy = ty - y0
    src = view.reshape(Y * X, -1)

    idx_parts, w_parts, s_parts = [], [], []
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            w = wy * wx
            ty_, tx_ = y0 + dy, x0 + dx
            keep = (w > 0) & (tx_ >= 0) & (tx_ < X) & (ty_ >= 0) & (ty_ < Y)
            idx_parts.append((ty_ * X + tx_)[keep])
            w_parts.append(w[keep])
            s_parts.append(np.nonzero(keep)[0])
    idx = np.concatenate(idx_parts)
    w = np.concatenate(w_parts)
    s = np.concatenate(s_parts)

    wsum = np.bincount(idx, weights=w, minlength=Y * X)
    filled = wsum > 0
    out = np.zeros((Y * X, src.shape[1]))
    for c in range(src.shape[1]):
        acc = np.bincount(idx, weights=w * src[s, c], minlength=Y * X)
        out[filled, c] = acc[filled] / wsum[filled]
    out = out.reshape(view.shape)
    return out, WarpMask(filled.reshape(Y, X), wsum.reshape(Y, X))


def inverse_warp(view: np.ndarray, flow: FlowField, return_mask: bool = False):
    """Gather: ``out(x, y) = view(x + u, y + v)`` with bilinear sampling.

    Samples falling outside the frame take edge-replicated values; with
    ``return_mask`` the out-of-frame mask is returned alongside.
    """
    view = np.asarray(view, dtype=np.float64)
    _check_dims(view, flow)
    Y, X = flow.shape
    yy, xx = np.mgrid[0:Y, 0:X]
    out, inside = bilinear_sample(view, yy + flow.v.astype(np.float64),
                                  xx + flow.u.astype(np.float64))
    if return_mask:
        return out, ~inside
    return out


def align(lf: LightField, flows: FlowSet, threads: int | None = None) -> tuple[LightField, list[WarpMask]]:
    """Forward-warp every view onto the centre grid.

    Pixels no splat reaches take the collocated centre-view value; the
    returned masks keep track of them.
    """
    if len(flows) != lf.n:
        raise ValueError(f"{len(flows)} flows for {lf.n} views")
    views = lf.flat_views()
    if lf.n == 1:
        return lf, [WarpMask(np.ones(flows[0].shape, bool), np.ones(flows[0].shape))]
    center = lf.center_view()

    def one(i):
        warped, mask = forward_warp(views[i], flows[i])
        holes = ~mask.filled
        if warped.ndim == 3:
            holes = holes[..., None] & np.ones(warped.shape, bool)
        warped[holes] = center[holes]
        return warped, mask

    res = _pmap(one, range(lf.n), threads)
    return lf.with_views(np.stack([r[0] for r in res])), [r[1] for r in res]


def view_variance(lf: LightField) -> float:
    """Mean over pixels of the population variance across views, 8-bit units."""
    if lf.n < 2:
        raise ValueError("view variance needs at least two views")
    v = lf.flat_views().reshape(lf.n, -1) * 255.0
    return float(v.var(axis=0).mean())


# -- block matching --------------------------------------------------------

def _halve(img: np.ndarray) -> np.ndarray:
    Y, X = img.shape
    img = img[: Y - Y % 2, : X - X % 2]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def _candidates(r: int):
    c = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    # ties resolve toward the smallest displacement
    return sorted(c, key=lambda d: (abs(d[0]) + abs(d[1]), max(abs(d[0]), abs(d[1]))))


class _BlockMatcher:
    """Block costs for one pyramid level; one displacement per block."""

    def __init__(self, src, ref, block):
        self.block = block
        Y, X = src.shape
        self.shape = (Y, X)
        self.grid = (-(-Y // block), -(-X // block))
        pad = ((0, self.grid[0] * block - Y), (0, self.grid[1] * block - X))
        self.src = np.pad(src, pad, mode="edge")
        self.ref = ref
        gy, gx = self.grid
        self.yy, self.xx = np.mgrid[0:gy * block, 0:gx * block]

    def _per_pixel(self, d):
        b = self.block
        return np.repeat(np.repeat(d, b, axis=0), b, axis=1)

    def cost(self, u, v, squared=False):
        Y, X = self.shape
        ry = np.clip(self.yy + self._per_pixel(v), 0, Y - 1)
        rx = np.clip(self.xx + self._per_pixel(u), 0, X - 1)
        diff = self.src - self.ref[ry, rx]
        diff = diff * diff if squared else np.abs(diff)
        gy, gx = self.grid
        b = self.block
        return diff.reshape(gy, b, gx, b).sum(axis=(1, 3))

    def search(self, u0, v0, r, limit):
        best = np.full(self.grid, np.inf)
        bu = u0.copy()
        bv = v0.copy()
        for dy, dx in _candidates(r):
            u = np.clip(u0 + dx, -limit, limit)
            v = np.clip(v0 + dy, -limit, limit)
            c = self.cost(u, v)
            better = c < best
            best[better] = c[better]
            bu[better] = u[better]
            bv[better] = v[better]
        return bu, bv

    def block_centers(self):
        b = self.block
        gy, gx = self.grid
        return (np.arange(gy) * b + (b - 1) / 2, np.arange(gx) * b + (b - 1) / 2)


def _parent(field: np.ndarray, coarse: _BlockMatcher, fine: _BlockMatcher) -> np.ndarray:
    """Initial fine-level block displacements from the enclosing coarse block."""
    cy, cx = fine.block_centers()
    iy = np.clip((cy / 2 // coarse.block).astype(int), 0, coarse.grid[0] - 1)
    ix = np.clip((cx / 2 // coarse.block).astype(int), 0, coarse.grid[1] - 1)
    return field[np.ix_(iy, ix)] * 2


def _parabola(cm, c0, cp):
    denom = cm - 2 * c0 + cp
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom > 1e-12, (cm - cp) / (2 * denom), 0.0)
    return np.clip(off, -0.5, 0.5)


def _densify(field: np.ndarray, m: _BlockMatcher) -> np.ndarray:
    """Bilinear interpolation of block-centre values onto every pixel."""
    cy, cx = m.block_centers()
    Y, X = m.shape
    py = np.interp(np.arange(Y), cy, np.arange(len(cy)))
    px = np.interp(np.arange(X), cx, np.arange(len(cx)))
    yy, xx = np.meshgrid(py, px, indexing="ij")
    out, _ = bilinear_sample(field, yy, xx)
    return out


def _refine(view, center, fu, fv, tu, tv, m: _BlockMatcher, window: int):
    """Per pixel, pick the densified flow or one of the 3x3 neighbouring
    tile displacements, whichever has the lowest windowed SSD.  Keeps
    motion boundaries sharp where tiles straddle two surfaces."""
    Y, X = view.shape
    yy, xx = np.mgrid[0:Y, 0:X]
    ty = np.minimum(yy // m.block, m.grid[0] - 1)
    tx = np.minimum(xx // m.block, m.grid[1] - 1)

    def cost(u, v):
        warped, _ = bilinear_sample(center, yy + v, xx + u)
        return ndimage.uniform_filter((warped - view) ** 2, window, mode="nearest")

    best_u, best_v = fu.copy(), fv.copy()
    best = cost(fu, fv)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            iy = np.clip(ty + dy, 0, m.grid[0] - 1)
            ix = np.clip(tx + dx, 0, m.grid[1] - 1)
            u, v = tu[iy, ix], tv[iy, ix]
            c = cost(u, v)
            better = c < best
            best[better] = c[better]
            best_u[better] = u[better]
            best_v[better] = v[better]
    return best_u, best_v


def block_matching(view: np.ndarray, center: np.ndarray, params: FlowParams) -> FlowField:
    """Coarse-to-fine SAD block matching from ``view`` to ``center``.

    Non-overlapping ``block x block`` tiles each get one integer
    displacement: full +-max_disparity search on the coarsest of ``levels``
    dyadic pyramid levels, +-2 refinement below.  The finest level adds a
    per-axis parabola fit on squared-difference costs (SAD is V-shaped
    around its minimum, SSD is locally quadratic).  Tile displacements are
    median filtered on the tile grid and interpolated bilinearly to pixels;
    with ``refine`` each pixel may then switch to a neighbouring tile's
    displacement if that matches better over a small window.
    """
    if params.max_disparity <= 0:
        raise ValueError("max_disparity must be positive")
    view = np.asarray(view, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    pyr = [(view, center)]
    for _ in range(params.levels - 1):
        s, r = pyr[-1]
        if min(s.shape) < 4 * params.block:
            break
        pyr.append((_halve(s), _halve(r)))

    prev = None
    for level in range(len(pyr) - 1, -1, -1):
        src, ref = pyr[level]
        limit = int(np.ceil(params.max_disparity / 2 ** level))
        m = _BlockMatcher(src, ref, params.block)
        if prev is None:
            z = np.zeros(m.grid, np.intp)
            u, v = m.search(z, z.copy(), limit, limit)
        else:
            u, v = m.search(_parent(u, prev, m), _parent(v, prev, m), 2, limit)
        prev = m

    c0 = m.cost(u, v, True)
    fu = u + _parabola(m.cost(u - 1, v, True), c0, m.cost(u + 1, v, True))
    fv = v + _parabola(m.cost(u, v - 1, True), c0, m.cost(u, v + 1, True))
    if params.median > 1:
        fu = ndimage.median_filter(fu, size=params.median, mode="nearest")
        fv = ndimage.median_filter(fv, size=params.median, mode="nearest")
    tu, tv = fu, fv
    fu, fv = _densify(tu, m), _densify(tv, m)
    if params.refine > 1:
        fu, fv = _refine(view, center, fu, fv, tu, tv, m, params.refine)
    fu = np.clip(fu, -params.max_disparity, params.max_disparity)
    fv = np.clip(fv, -params.max_disparity, params.max_disparity)

    Y, X = view.shape
    yy, xx = np.mgrid[0:Y, 0:X]
    inside = (xx + fu >= 0) & (xx + fu <= X - 1) & (yy + fv >= 0) & (yy + fv <= Y - 1)
    mean = ndimage.uniform_filter(view, params.block, mode="nearest")
    var = ndimage.uniform_filter(view * view, params.block, mode="nearest") - mean * mean
    return FlowField(fu, fv, inside & (var > params.texture_eps))


def estimate_flows(lf: LightField, estimator: FlowEstimator | None = None,
                   params: FlowParams = FlowParams(), threads: int | None = None) -> FlowSet:
    """One flow per view towards the centre view (luma is used for rgb input)."""
    if params.max_disparity <= 0:
        raise ValueError("max_disparity must be positive")
    estimator = estimator or block_matching
    views = lf.flat_views()
    if lf.color_space == "rgb":
        views = views @ np.array([0.299, 0.587, 0.114])
    center = views[lf.center_index]

    def one(i):
        if i == lf.center_index:
            return FlowField.zeros(center.shape)
        return estimator(views[i], center, params)

    return FlowSet(_pmap(one, range(lf.n), threads), lf.P, lf.Q)


# -- flow cache ------------------------------------------------------------

FLOW_MAGIC = b"LFFW"
_HEADER = struct.Struct("<4sII")


def flow_filename(s: int, t: int) -> str:
    return view_filename(s, t).replace("view_", "flow_").replace(".png", ".bin")


def write_flow(path, flow: FlowField) -> None:
    Y, X = flow.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FLOW_MAGIC, X, Y))
        fh.write(flow.u.astype("<f4").tobytes())
        fh.write(flow.v.astype("<f4").tobytes())
        fh.write(flow.valid.astype(np.uint8).tobytes())


def read_flow(path) -> FlowField:
    raw = Path(path).read_bytes()
    magic, X, Y = _HEADER.unpack_from(raw)
    if magic != FLOW_MAGIC:
        raise ValueError(f"{path}: bad flow magic {magic!r}")
    m = X * Y
    expect = _HEADER.size + 9 * m
    if len(raw) != expect:
        raise ValueError(f"{path}: expected {expect} bytes, got {len(raw)}")
    off = _HEADER.size
    u = np.frombuffer(raw, "<f4", m, off).reshape(Y, X)
    v = np.frombuffer(raw, "<f4", m, off + 4 * m).reshape(Y, X)
    valid = np.frombuffer(raw, np.uint8, m, off + 8 * m).reshape(Y, X)
    return FlowField(u, v, valid.astype(bool))


def write_flowset(path, flows: FlowSet) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(flows):
        s, t = divmod(i, flows.Q)
        write_flow(path / flow_filename(s, t), f)


def read_flowset(path, P: int, Q: int) -> FlowSet:
    path = Path(path)
    return FlowSet([read_flow(path / flow_filename(s, t)) for s in range(P) for t in range(Q)], P, Q)


def has_flowset(path, P: int, Q: int) -> bool:
    path = Path(path)
    return all((path / flow_filename(s, t)).is_file() for s in range(P) for t in range(Q))
