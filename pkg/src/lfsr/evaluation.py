"""Image quality metrics, per-view light field reports and shift-and-add refocusing."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .alignment import bilinear_sample
from .lightfield import LightField, luma

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)``; identical inputs give ``inf``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r * r) / (2 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _filter_valid(img: np.ndarray, g1: np.ndarray) -> np.ndarray:
    # separable correlation keeping only windows fully inside the image
    k = len(g1)
    rows = sum(g1[i] * img[i: img.shape[0] - k + 1 + i] for i in range(k))
    return sum(g1[j] * rows[:, j: rows.shape[1] - k + 1 + j] for j in range(k))


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian (sigma 1.5) windows.

    K1 = 0.01, K2 = 0.03, biased (weighted) local moments.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("ssim expects single-channel images")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if np.array_equal(a, b):
        return 1.0
    g1 = gaussian_window()[SSIM_WINDOW // 2]
    g1 = g1 / g1.sum()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = _filter_valid(a, g1)
    mu_b = _filter_valid(b, g1)
    saa = _filter_valid(a * a, g1) - mu_a * mu_a
    sbb = _filter_valid(b * b, g1) - mu_b * mu_b
    sab = _filter_valid(a * b, g1) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


@dataclass
class ViewScore:
    index: int
    s: int
    t: int
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    per_view: list[ViewScore]
    aggregate: dict
    diagnostics: dict = field(default_factory=dict)

    def psnrs(self) -> np.ndarray:
        return np.array([v.psnr for v in self.per_view])

    def ssims(self) -> np.ndarray:
        return np.array([v.ssim for v in self.per_view])

    def to_dict(self) -> dict:
        return {"per_view": [asdict(v) for v in self.per_view],
                "aggregate": dict(self.aggregate),
                "diagnostics": dict(self.diagnostics)}

    def save(self, path, stem: str = "report") -> None:
        """``<stem>.json`` plus ``<stem>.csv`` (index, s, t, psnr_db, ssim)."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=True)
        (path / f"{stem}.json").write_text(text + "\n")
        with open(path / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "s", "t", "psnr_db", "ssim"])
            for v in self.per_view:
                w.writerow([v.index, v.s, v.t, repr(float(v.psnr)), repr(float(v.ssim))])

    @classmethod
    def load(cls, path, stem: str = "report") -> "EvalReport":
        data = json.loads((Path(path) / f"{stem}.json").read_text())
        return cls([ViewScore(**v) for v in data["per_view"]], data["aggregate"], data["diagnostics"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def default_border_crop(max_disparity: float, alpha: int) -> int:
    return int(math.ceil(max_disparity)) + int(alpha)


def evaluate_lf(restored: LightField, truth: LightField, border_crop: int = 0,
                diagnostics: dict | None = None) -> EvalReport:
    """Per-view PSNR/SSIM on luma after removing ``border_crop`` pixels per side."""
    if (restored.P, restored.Q) != (truth.P, truth.Q):
        raise ValueError(f"angular grids differ: {restored.P}x{restored.Q} vs {truth.P}x{truth.Q}")
    if (restored.X, restored.Y) != (truth.X, truth.Y):
        raise ValueError(f"view sizes differ: {restored.X}x{restored.Y} vs {truth.X}x{truth.Y}")
    c = int(border_crop)
    if 2 * c >= min(restored.X, restored.Y):
        raise ValueError(f"border crop {c} leaves no pixels")
    a = luma(restored).flat_views()
    b = luma(truth).flat_views()
    if c:
        a = a[:, c:-c, c:-c]
        b = b[:, c:-c, c:-c]
    scores = []
    for i in range(restored.n):
        s, t = divmod(i, restored.Q)
        scores.append(ViewScore(i, s, t, psnr(a[i], b[i]), ssim(a[i], b[i])))
    agg = {"mean_psnr": float(np.mean([v.psnr for v in scores])),
           "mean_ssim": float(np.mean([v.ssim for v in scores]))}
    diag = {"border_crop": c}
    diag.update(diagnostics or {})
    return EvalReport(scores, agg, diag)


@dataclass(frozen=True)
class RefocusParams:
    """Positive ``slope`` samples view ``(s, t)`` at ``(x + slope (t - t_c), y + slope (s - s_c))``."""

    slope: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.slope):
            raise ValueError("slope must be finite")


def refocus(lf: LightField, p: RefocusParams | float) -> np.ndarray:
    """Shift-and-add: average of all views resampled along ``slope``.

    Samples falling outside a view are left out of that pixel's mean; the
    centre view always contributes.
    """
    slope = p.slope if isinstance(p, RefocusParams) else float(p)
    sc, tc = lf.center
    yy, xx = np.mgrid[0:lf.Y, 0:lf.X].astype(np.float64)
    acc = np.zeros(lf.views.shape[2:])
    count = np.zeros((lf.Y, lf.X))
    for s in range(lf.P):
        for t in range(lf.Q):
            val, inside = bilinear_sample(lf.views[s, t], yy + slope * (s - sc), xx + slope * (t - tc))
            w = inside.astype(np.float64)
            acc += val * (w[..., None] if val.ndim == 3 else w)
            count += w
    return acc / (count[..., None] if acc.ndim == 3 else count)


def sharpness(image: np.ndarray, border: int = 0) -> float:
    """Variance of the (4-neighbour) Laplacian, optionally on an inner window."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img @ np.array([0.299, 0.587, 0.114])
    lap = ndimage.laplace(img, mode="nearest")
    if border:
        lap = lap[border:-border, border:-border]
    return float(lap.var())


def refocus_sweep(lf: LightField, slopes, border: int = 0) -> np.ndarray:
    return np.array([sharpness(refocus(lf, RefocusParams(float(s))), border) for s in slopes])
