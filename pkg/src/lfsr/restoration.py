"""Principal-basis super-resolution of a light field and the edit-propagation baseline.

Pipeline (``pb_superresolve``): bicubic upsampling of every view to the
target grid, flows to the centre view, forward-warp alignment, SVD of the
aligned field, restoration of the principal basis by a single-image
backend, reconstruction, inverse warping back to each view and crack
filling.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .alignment import (FlowField, FlowParams, FlowSet, WarpMask, _pmap, align,
                        bilinear_sample, estimate_flows, forward_warp, inverse_warp)
from .backends import BackendError, IdentityBackend, SharpenBackend
from .compaction import Decomposition, decompose, reconstruct
from .lightfield import LightField, flatten, rgb_to_ycbcr, unvec, vec, ycbcr_to_rgb
from .resample import resize, upsample, upsample_lightfield

log = logging.getLogger(__name__)

CRACK_MODES = ("collocated_lr", "inverse_warp", "none")
PIPELINE_ORDERS = ("upsample-first", "decompose-first")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception, view: int | None = None):
        where = stage if view is None else f"{stage} (view {view})"
        super().__init__(f"{where}: {cause}")
        self.stage, self.view, self.cause = stage, view, cause


@dataclass(frozen=True)
class PipelineConfig:
    alpha: int = 3
    backend: object = field(default_factory=SharpenBackend)
    flow: FlowParams = field(default_factory=FlowParams)
    crack_fill: str = "collocated_lr"
    # accumulated splat weight above which a target counts as an occlusion collision
    collision_threshold: float = 1.5
    fallback_identity: bool = False
    threads: int | None = None
    pipeline_order: str = "upsample-first"

    def __post_init__(self):
        if self.alpha not in (2, 3, 4):
            raise ValueError(f"alpha must be 2, 3 or 4, got {self.alpha}")
        if self.crack_fill not in CRACK_MODES:
            raise ValueError(f"crack_fill must be one of {CRACK_MODES}")
        if self.pipeline_order not in PIPELINE_ORDERS:
            raise ValueError(f"pipeline_order must be one of {PIPELINE_ORDERS}")


@dataclass
class PipelineResult:
    lightfield: LightField
    upsampled: LightField
    flows: FlowSet
    cracks: list[np.ndarray]
    decomposition: Decomposition
    restored: Decomposition
    timings: dict[str, float]


class _Clock:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self._t = time.perf_counter()

    def lap(self, stage: str):
        now = time.perf_counter()
        self.timings[stage] = self.timings.get(stage, 0.0) + now - self._t
        self._t = now


def restore_principal(b0: np.ndarray, backend, alpha: int, fallback_identity: bool = False) -> np.ndarray:
    """Run ``backend`` on the principal basis mapped to [0, 1], then map back.

    Only the backend's change is rescaled, so an unchanged image returns
    the input basis bit-for-bit.
    """
    b0 = np.asarray(b0, dtype=np.float64)
    lo, hi = float(b0.min()), float(b0.max())
    if hi <= lo:
        return b0.copy()
    norm = (b0 - lo) / (hi - lo)
    try:
        out = np.asarray(backend(norm, alpha), dtype=np.float64)
    except BackendError:
        if not fallback_identity:
            raise
        log.warning("backend failed on the principal basis, falling back to identity", exc_info=True)
        return b0.copy()
    if out.shape != norm.shape:
        raise ValueError(f"backend returned {out.shape}, expected {norm.shape}")
    if not np.isfinite(out).all():
        raise ValueError("backend returned non-finite values")
    return b0 + (out - norm) * (hi - lo)


def fill_cracks(view: np.ndarray, mask: WarpMask, fallback_view: np.ndarray) -> np.ndarray:
    """Keep filled pixels of ``view``, take the rest from ``fallback_view``."""
    view = np.asarray(view, dtype=np.float64)
    fallback_view = np.asarray(fallback_view, dtype=np.float64)
    if view.shape != fallback_view.shape or view.shape[:2] != mask.filled.shape:
        raise ValueError(f"shape mismatch: view {view.shape}, fallback {fallback_view.shape}, "
                         f"mask {mask.filled.shape}")
    keep = mask.filled if view.ndim == 2 else mask.filled[..., None]
    return np.where(keep, view, fallback_view)


def crack_mask(flow: FlowField, warp: WarpMask, collision_threshold: float = 1.5) -> np.ndarray:
    """View pixels whose aligned-domain footprint cannot be trusted.

    A view pixel is a crack when its position on the centre grid is out of
    frame, touches a target no splat reached, or lands where splats from
    several surfaces collided (occlusion).
    """
    Y, X = flow.shape
    yy, xx = np.mgrid[0:Y, 0:X]
    ty = yy + flow.v.astype(np.float64)
    tx = xx + flow.u.astype(np.float64)
    filled, inside = bilinear_sample(warp.filled.astype(np.float64), ty, tx)
    cracks = ~inside | (filled < 1.0 - 1e-9)
    if warp.weight is not None:
        weight, _ = bilinear_sample(warp.weight, ty, tx)
        cracks |= weight > collision_threshold
    return cracks


def _split_color(lf: LightField):
    if lf.color_space == "luma":
        return lf, None
    ycc = rgb_to_ycbcr(lf.views)
    return LightField(ycc[..., 0]), ycc[..., 1:]


def _merge_color(luma_views: np.ndarray, chroma, lr: LightField, alpha: int) -> LightField:
    if chroma is None:
        return lr.with_views(np.clip(luma_views, 0.0, 1.0))
    flat = chroma.reshape((lr.n,) + chroma.shape[2:])
    up = np.stack([upsample(c, alpha) for c in flat])
    rgb = ycbcr_to_rgb(np.concatenate([luma_views[..., None], up], axis=-1))
    return lr.with_views(np.clip(rgb, 0.0, 1.0))


def _upsample_flow(f: FlowField, alpha: int, shape) -> FlowField:
    u = resize(f.u.astype(np.float64), shape) * alpha
    v = resize(f.v.astype(np.float64), shape) * alpha
    valid = np.kron(f.valid, np.ones((alpha, alpha), bool))
    return FlowField(u, v, valid)


def superresolve(lr: LightField, cfg: PipelineConfig, flows: FlowSet | None = None) -> PipelineResult:
    """Full pipeline with intermediate products and per-stage wall times.

    The inverse warp of the restored aligned field ``B' C`` is evaluated as
    ``up_i + inverse_warp((B' - B) C)_i``: ``B C`` is exactly the aligned
    upsampled field, whose inverse alignment is the upsampled view itself,
    so only the backend's change travels through the warp.  With only the
    principal basis modified, that change is ``(B'_0 - B_0) C[0, i]``.
    """
    clock = _Clock()
    luma_lr, chroma = _split_color(lr)
    alpha = cfg.alpha
    try:
        up = upsample_lightfield(luma_lr, alpha)
    except Exception as exc:
        raise StageError("upsample", exc) from exc
    clock.lap("upsample")

    decompose_first = cfg.pipeline_order == "decompose-first"
    work = luma_lr if decompose_first else up
    flow_params = cfg.flow
    if decompose_first:
        flow_params = FlowParams(**{**flow_params.__dict__,
                                    "max_disparity": flow_params.max_disparity / alpha})
    try:
        if flows is None:
            flows = estimate_flows(work, params=flow_params, threads=cfg.threads)
        elif flows[0].shape != (work.Y, work.X):
            raise ValueError(f"flows are {flows[0].shape}, views are {(work.Y, work.X)}")
    except Exception as exc:
        raise StageError("flow", exc) from exc
    clock.lap("flow")

    try:
        aligned, masks = align(work, flows, threads=cfg.threads)
    except Exception as exc:
        raise StageError("align", exc) from exc
    clock.lap("align")

    try:
        d = decompose(flatten(aligned))
    except Exception as exc:
        raise StageError("decompose", exc) from exc
    clock.lap("decompose")

    try:
        b0 = d.basis_image(0)
        if decompose_first:
            b0 = upsample(b0, alpha)
        b0_hat = restore_principal(b0, cfg.backend, alpha, cfg.fallback_identity)
    except BackendError as exc:
        raise StageError("restore", exc) from exc
    clock.lap("restore")

    delta = b0_hat - b0
    if decompose_first:
        d_hat = d
    else:
        d_hat = d.with_basis(0, vec(b0_hat))
    rec = reconstruct(d_hat)
    clock.lap("reconstruct")

    up_views = up.flat_views()
    X, Y = up.X, up.Y
    coeff = d.C[0]

    def one(i):
        try:
            flow = flows[i]
            cracks = crack_mask(flow, masks[i], cfg.collision_threshold)
            if decompose_first:
                flow = _upsample_flow(flow, alpha, (Y, X))
                cracks = np.kron(cracks, np.ones((alpha, alpha), bool))
            out = up_views[i] + inverse_warp(delta * coeff[i], flow)
            if cfg.crack_fill == "collocated_lr":
                out = fill_cracks(out, WarpMask(~cracks), up_views[i])
            elif cfg.crack_fill == "inverse_warp":
                if decompose_first:
                    direct = up_views[i] + inverse_warp(delta * coeff[i], flow)
                else:
                    direct = inverse_warp(unvec(rec.data[:, i], X, Y), flow)
                out = fill_cracks(out, WarpMask(~cracks), direct)
            else:
                out = np.where(cracks, 0.0, out)
            return out, cracks
        except Exception as exc:
            raise StageError("inverse_warp", exc, view=i) from exc

    res = _pmap(one, range(up.n), cfg.threads)
    clock.lap("inverse_warp")
    out = _merge_color(np.stack([r[0] for r in res]), chroma, lr, alpha)
    clock.lap("color")
    return PipelineResult(out, up, flows, [r[1] for r in res], d, d_hat, clock.timings)


def pb_superresolve(lr: LightField, cfg: PipelineConfig, flows: FlowSet | None = None) -> LightField:
    return superresolve(lr, cfg, flows).lightfield


def invert_flow(flow: FlowField) -> FlowField:
    """Centre-to-view flow on the centre grid, by splatting the negated flow.

    Centre pixels no view pixel maps to fall back to the negated flow at
    the same location.
    """
    neg = np.stack([-flow.u, -flow.v], axis=-1).astype(np.float64)
    warped, mask = forward_warp(neg, flow)
    warped[~mask.filled] = neg[~mask.filled]
    return FlowField(warped[..., 0], warped[..., 1], mask.filled)


def edit_propagate(lr: LightField, cfg: PipelineConfig, flows: FlowSet | None = None) -> LightField:
    """Baseline: restore the centre view only and forward-warp it to every view.

    Targets the warp leaves empty take the collocated upsampled view.
    """
    luma_lr, chroma = _split_color(lr)
    up = upsample_lightfield(luma_lr, cfg.alpha)
    if flows is None:
        flows = estimate_flows(up, params=cfg.flow, threads=cfg.threads)
    views = up.flat_views()
    c = up.center_index
    restored = np.asarray(cfg.backend(views[c], cfg.alpha), dtype=np.float64)

    def one(i):
        if i == c:
            return restored
        warped, mask = forward_warp(restored, invert_flow(flows[i]))
        return fill_cracks(warped, mask, views[i])

    out = np.stack(_pmap(one, range(up.n), cfg.threads))
    return _merge_color(out, chroma, lr, cfg.alpha)


__all__ = [
    "CRACK_MODES", "PIPELINE_ORDERS", "PipelineConfig", "PipelineResult", "StageError",
    "IdentityBackend", "SharpenBackend", "crack_mask", "edit_propagate", "fill_cracks",
    "invert_flow", "pb_superresolve", "restore_principal", "superresolve",
]
