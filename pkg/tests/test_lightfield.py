import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfsr.lightfield import (DimensionError, LFMatrix, LightField, MissingViewError, flatten,
                             load_lightfield, luma, rgb_to_ycbcr, save_lightfield, unflatten, unvec,
                             vec, view_filename, write_png, ycbcr_to_rgb)

from conftest import random_lf


def test_shape_is_pqxy_and_center():
    lf = random_lf(P=3, Q=5, Y=7, X=11)
    assert lf.shape == (3, 5, 11, 7)
    assert lf.center_index == 7 and lf.center == (1, 2)
    assert np.array_equal(lf.center_view(), lf.views[1, 2])
    assert lf.index(2, 3) == 13 and lf.coords(13) == (2, 3)


def test_flatten_is_column_major_scan():
    lf = random_lf(P=2, Q=3, Y=5, X=4)
    M = flatten(lf)
    assert M.data.shape == (20, 6) and M.dims == (4, 5, 2, 3)
    for i in range(lf.n):
        s, t = divmod(i, lf.Q)
        for y in range(lf.Y):
            for x in range(lf.X):
                assert M.data[y + lf.Y * x, i] == lf.views[s, t, y, x]


def test_vec_unvec_inverse():
    img = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(vec(img), img.T.ravel())
    assert np.array_equal(unvec(vec(img), 4, 3), img)


def test_unflatten_rejects_wrong_view_count():
    M = LFMatrix(np.zeros((20, 4)), (4, 5, 2, 3))
    with pytest.raises(DimensionError, match="n mismatch: 4 ≠ 6"):
        unflatten(M)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 9), st.integers(1, 9), st.integers(0, 99))
def test_flatten_roundtrip(P, Q, Y, X, seed):
    lf = random_lf(P, Q, Y, X, seed)
    back = unflatten(flatten(lf))
    assert np.array_equal(back.views, lf.views)


def test_flatten_refuses_rgb():
    with pytest.raises(ValueError):
        flatten(random_lf(rgb=True))


def test_ycbcr_roundtrip():
    rgb = np.random.default_rng(0).random((6, 7, 3))
    assert np.allclose(ycbcr_to_rgb(rgb_to_ycbcr(rgb)), rgb, atol=1e-12)
    grey = np.full((2, 2, 3), 0.4)
    assert np.allclose(rgb_to_ycbcr(grey)[..., 1:], 0.5)


@pytest.mark.parametrize("bit_depth, tol", [(16, 0.5 / 65535), (8, 0.5 / 255)])
def test_save_load_roundtrip(tmp_path, bit_depth, tol):
    lf = random_lf(P=2, Q=3, Y=9, X=13)
    save_lightfield(lf, tmp_path, bit_depth)
    meta = json.loads((tmp_path / "manifest.json").read_text())
    assert meta == {"P": 2, "Q": 3, "X": 13, "Y": 9, "bit_depth": bit_depth, "color_space": "luma"}
    back = load_lightfield(tmp_path)
    assert back.shape == lf.shape
    assert np.abs(back.views - lf.views).max() <= tol + 1e-12


def test_save_load_rgb(tmp_path):
    lf = random_lf(P=1, Q=2, Y=5, X=6, rgb=True)
    save_lightfield(lf, tmp_path)
    back = load_lightfield(tmp_path)
    assert back.color_space == "rgb"
    assert np.abs(back.views - lf.views).max() <= 0.5 / 65535 + 1e-12


def test_missing_view_named(tmp_path):
    save_lightfield(random_lf(P=2, Q=3), tmp_path)
    (tmp_path / view_filename(1, 2)).unlink()
    with pytest.raises(MissingViewError, match=r"missing view \(1,2\)"):
        load_lightfield(tmp_path)


def test_dimension_mismatch_lists_views(tmp_path):
    save_lightfield(random_lf(P=2, Q=2, Y=6, X=6), tmp_path)
    write_png(tmp_path / view_filename(0, 1), np.zeros((5, 6)))
    with pytest.raises(DimensionError, match=r"\(0,1\)"):
        load_lightfield(tmp_path)


def test_luma_weights():
    lf = LightField(np.ones((1, 1, 2, 2, 3)) * np.array([1.0, 0.0, 0.0]), "rgb")
    assert np.allclose(luma(lf).views, 0.299)
