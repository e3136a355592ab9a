"""Light field container, its matrix form and the on-disk directory layout.

Views are stored as one array of shape ``(P, Q, Y, X)`` (luma) or
``(P, Q, Y, X, 3)`` (rgb), float64 in [0, 1].  ``s`` indexes rows of the
angular grid (vertical), ``t`` columns; view index ``i = s * Q + t``.

Matrix form: column ``i`` of the ``m x n`` matrix is view ``i`` scanned
column-major over the ``Y x X`` image, i.e. ``vec[y + Y * x] = view[y, x]``
(the same scan as MATLAB's ``view(:)``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

MANIFEST = "manifest.json"

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class LightFieldError(Exception):
    """Malformed light field data."""


class MissingViewError(LightFieldError):
    def __init__(self, s: int, t: int):
        super().__init__(f"missing view ({s},{t})")
        self.s, self.t = s, t


class DimensionError(LightFieldError, ValueError):
    pass


@dataclass(frozen=True)
class LightField:
    views: np.ndarray
    color_space: str = "luma"

    def __post_init__(self):
        v = np.asarray(self.views, dtype=np.float64)
        if self.color_space == "luma" and v.ndim != 4:
            raise DimensionError(f"luma light field needs (P,Q,Y,X) views, got shape {v.shape}")
        if self.color_space == "rgb" and (v.ndim != 5 or v.shape[-1] != 3):
            raise DimensionError(f"rgb light field needs (P,Q,Y,X,3) views, got shape {v.shape}")
        if self.color_space not in ("luma", "rgb"):
            raise ValueError(f"unknown color space {self.color_space!r}")
        if min(v.shape[:4]) < 1:
            raise DimensionError(f"empty light field {v.shape}")
        object.__setattr__(self, "views", v)

    @property
    def P(self) -> int:
        return self.views.shape[0]

    @property
    def Q(self) -> int:
        return self.views.shape[1]

    @property
    def Y(self) -> int:
        return self.views.shape[2]

    @property
    def X(self) -> int:
        return self.views.shape[3]

    @property
    def n(self) -> int:
        return self.P * self.Q

    @property
    def shape(self) -> tuple[int, int, int, int]:
        """``(P, Q, X, Y)``."""
        return (self.P, self.Q, self.X, self.Y)

    @property
    def center_index(self) -> int:
        return self.n // 2

    @property
    def center(self) -> tuple[int, int]:
        return divmod(self.center_index, self.Q)

    def index(self, s: int, t: int) -> int:
        return s * self.Q + t

    def coords(self, i: int) -> tuple[int, int]:
        return divmod(i, self.Q)

    def view(self, i: int) -> np.ndarray:
        s, t = divmod(i, self.Q)
        return self.views[s, t]

    def center_view(self) -> np.ndarray:
        return self.view(self.center_index)

    def flat_views(self) -> np.ndarray:
        """Views stacked along one axis in raster order: ``(n, Y, X[, 3])``."""
        return self.views.reshape((self.n,) + self.views.shape[2:])

    def with_views(self, views: np.ndarray) -> "LightField":
        """Same grid and color space, new pixel data (flat or gridded)."""
        views = np.asarray(views)
        if views.shape[0] == self.n and views.ndim == self.views.ndim - 1:
            views = views.reshape((self.P, self.Q) + views.shape[1:])
        return LightField(views, self.color_space)


@dataclass(frozen=True)
class LFMatrix:
    data: np.ndarray
    dims: tuple[int, int, int, int]  # (X, Y, P, Q)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def flatten(lf: LightField) -> LFMatrix:
    if lf.color_space != "luma":
        raise ValueError("flatten operates on single-channel (luma) light fields")
    v = lf.flat_views()  # (n, Y, X)
    data = np.ascontiguousarray(v.transpose(2, 1, 0).reshape(lf.X * lf.Y, lf.n))
    return LFMatrix(data, (lf.X, lf.Y, lf.P, lf.Q))


def unflatten(mat: LFMatrix) -> LightField:
    X, Y, P, Q = mat.dims
    data = np.asarray(mat.data)
    if data.ndim != 2:
        raise DimensionError(f"matrix must be 2-D, got shape {data.shape}")
    if data.shape[0] != X * Y:
        raise DimensionError(f"m mismatch: {data.shape[0]} ≠ {X * Y}")
    if data.shape[1] != P * Q:
        raise DimensionError(f"n mismatch: {data.shape[1]} ≠ {P * Q}")
    views = data.reshape(X, Y, P * Q).transpose(2, 1, 0).reshape(P, Q, Y, X)
    return LightField(views.copy(), "luma")


def vec(image: np.ndarray) -> np.ndarray:
    """Column-major scan of a single view."""
    return np.asarray(image).reshape(-1, order="F")


def unvec(column: np.ndarray, X: int, Y: int) -> np.ndarray:
    return np.asarray(column).reshape((Y, X), order="F")


# -- color ----------------------------------------------------------------

def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """Full-range BT.601 YCbCr, chroma centred on 0.5."""
    y = rgb @ _LUMA
    cb = (rgb[..., 2] - y) * (0.5 / (1 - _LUMA[2])) + 0.5
    cr = (rgb[..., 0] - y) * (0.5 / (1 - _LUMA[0])) + 0.5
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y = ycc[..., 0]
    cb = ycc[..., 1] - 0.5
    cr = ycc[..., 2] - 0.5
    r = y + cr * (2 * (1 - _LUMA[0]))
    b = y + cb * (2 * (1 - _LUMA[2]))
    g = (y - _LUMA[0] * r - _LUMA[2] * b) / _LUMA[1]
    return np.stack([r, g, b], axis=-1)


def luma(lf: LightField) -> LightField:
    if lf.color_space == "luma":
        return lf
    return LightField(lf.views @ _LUMA, "luma")


# -- directory container --------------------------------------------------

def view_filename(s: int, t: int) -> str:
    return f"view_{s:02d}_{t:02d}.png"


def _read_manifest(path: Path, manifest) -> dict:
    if manifest is None:
        mpath = path / MANIFEST
        if not mpath.is_file():
            raise LightFieldError(f"no {MANIFEST} in {path}")
        manifest = json.loads(mpath.read_text())
    elif isinstance(manifest, (str, Path)):
        manifest = json.loads(Path(manifest).read_text())
    for key in ("P", "Q"):
        if key not in manifest:
            raise LightFieldError(f"manifest lacks {key!r}")
    return dict(manifest)


def load_lightfield(path, manifest=None) -> LightField:
    """Read a ``view_<s>_<t>.png`` directory described by ``manifest.json``.

    Integer samples are normalised by the maximum of their dtype (255 or
    65535).  Every view must exist and share the manifest's dimensions.
    """
    path = Path(path)
    meta = _read_manifest(path, manifest)
    P, Q = int(meta["P"]), int(meta["Q"])
    color_space = meta.get("color_space", "luma")

    views = []
    for s in range(P):
        for t in range(Q):
            f = path / view_filename(s, t)
            if not f.is_file():
                raise MissingViewError(s, t)
            views.append(((s, t), _read_png(f)))

    shapes = {}
    for st, img in views:
        shapes.setdefault(img.shape, []).append(st)
    want = None
    if "X" in meta and "Y" in meta:
        want = (int(meta["Y"]), int(meta["X"]))
    elif len(shapes) == 1:
        want = next(iter(shapes))[:2]
    else:
        # majority shape is taken as the reference
        want = max(shapes.items(), key=lambda kv: len(kv[1]))[0][:2]
    bad = [st for st, img in views if img.shape[:2] != want]
    if bad:
        raise DimensionError(
            f"views with dimensions other than {want[1]}x{want[0]}: "
            + ", ".join(f"({s},{t})" for s, t in bad))

    stack = np.stack([img for _, img in views])
    if color_space == "luma" and stack.ndim == 4:
        stack = stack @ _LUMA
    elif color_space == "rgb" and stack.ndim == 3:
        stack = np.repeat(stack[..., None], 3, axis=-1)
    return LightField(stack.reshape((P, Q) + stack.shape[1:]), color_space)


def save_lightfield(lf: LightField, path, bit_depth: int = 16, extra: dict | None = None) -> None:
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for s in range(lf.P):
        for t in range(lf.Q):
            write_png(path / view_filename(s, t), lf.views[s, t], bit_depth)
    meta = {"P": lf.P, "Q": lf.Q, "X": lf.X, "Y": lf.Y,
            "bit_depth": bit_depth, "color_space": lf.color_space}
    if extra:
        meta.update(extra)
    (path / MANIFEST).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read_png(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise LightFieldError(f"cannot decode {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise LightFieldError(f"unsupported sample type {img.dtype} in {path}")
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[..., :3]
        img = img[..., ::-1]  # BGR -> RGB
    return img.astype(np.float64) / scale


def write_png(path, image: np.ndarray, bit_depth: int = 16) -> None:
    maxval = 255 if bit_depth == 8 else 65535
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    q = np.round(np.clip(image, 0.0, 1.0) * maxval).astype(dtype)
    if q.ndim == 3:
        q = np.ascontiguousarray(q[..., ::-1])
    try:
        ok = cv2.imwrite(str(path), q)
    except cv2.error as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    if not ok:
        raise OSError(f"could not write {path}")
