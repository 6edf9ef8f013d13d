import numpy as np
import pytest

from retargetkit import imaging
from retargetkit.engines import (
    ENGINE_IDS,
    EngineError,
    RetargetJob,
    retarget,
    seam_carve,
    shift_map,
)
from retargetkit.engines import aad, cropopt, multiop, seam
from retargetkit.engines.shiftmap import ShiftMapContext, energy_of_labeling

import oracles


def rand_image(rng, h, w):
    return rng.random((h, w, 3))


# ---------------------------------------------------------------- seam carving

def test_first_seam_worked_example():
    energy = np.array([[1.0, 2.0, 3.0], [4.0, 1.0, 2.0], [3.0, 4.0, 1.0]])
    path, total = seam.find_vertical_seam(energy)
    assert list(path) == [0, 1, 2]
    assert total == pytest.approx(3.0)
    assert len(list(oracles.enumerate_vertical_seams(3, 3))) == 17
    assert oracles.min_seam_energy(energy) == pytest.approx(total)


def test_first_seam_matches_exhaustive_oracle():
    rng = np.random.default_rng(10)
    for _ in range(50):
        h, w = rng.integers(2, 7, size=2)
        energy = rng.random((h, w))
        _, total = seam.find_vertical_seam(energy)
        assert total == pytest.approx(oracles.min_seam_energy(energy), abs=1e-12)


def test_zero_seams_is_identity():
    rng = np.random.default_rng(11)
    img = rand_image(rng, 5, 6)
    out = seam_carve(img, np.zeros((5, 6)), 0)
    assert np.array_equal(out, img)


def test_constant_image_removes_leftmost_column():
    img = np.full((4, 5, 3), 0.5)
    out = seam_carve(img, np.zeros((4, 5)), 1)
    assert out.shape[1] == 4
    path, _ = seam.find_vertical_seam(seam.seam_energy(img, np.zeros((4, 5))))
    assert list(path) == [0, 0, 0, 0]


def test_seam_carve_height_axis():
    rng = np.random.default_rng(12)
    img = rand_image(rng, 8, 5)
    out = seam_carve(img, np.zeros((8, 5)), 2, axis="h")
    assert out.shape[:2] == (6, 5)


# ------------------------------------------------------------------- cropping

def test_crop_row_profile_example():
    imp = np.array([[0.0, 1.0, 3.0, 2.0, 0.0]]) / 3.0
    x, y, _ = cropopt.best_window(imp, 3, 1)
    assert (x, y) == (1, 0)


def test_crop_uniform_tie_break():
    imp = np.full((6, 6), 0.5)
    x, y, _ = cropopt.best_window(imp, 3, 3)
    assert (x, y) == (0, 0)


def test_crop_full_importance_region_retention():
    imp = np.zeros((10, 12))
    imp[2:6, 3:8] = 1.0
    img = np.zeros((10, 12, 3))
    out, diag = cropopt.crop_optimal(img, imp, 5, 4)
    assert diag["window"] == (3, 2)
    assert diag["retention"] == pytest.approx(1.0)
    assert out.shape[:2] == (4, 5)


def test_crop_matches_exhaustive_oracle():
    rng = np.random.default_rng(13)
    for _ in range(50):
        h, w = rng.integers(4, 33, size=2)
        th, tw = rng.integers(1, h + 1), rng.integers(1, w + 1)
        imp = rng.random((h, w))
        x, y, _ = cropopt.best_window(imp, tw, th)
        ox, oy, osum = oracles.best_crop_exhaustive(imp, tw, th)
        assert imp[y : y + th, x : x + tw].sum() == pytest.approx(osum, abs=1e-9)


# ------------------------------------------------------------------- AAD warp

def test_aad_uniform_importance_scales_evenly():
    img = np.random.default_rng(14).random((10, 40, 3))
    imp = np.full((10, 40), 0.5)
    out, diag = aad.aad_warp(img, imp, 20, 10)
    assert out.shape[:2] == (10, 20)
    widths = diag["column_widths"]
    assert np.allclose(widths, widths[0])


def test_aad_closed_form_two_columns():
    w, residual = aad.solve_column_widths(
        np.array([10.0, 10.0]), np.array([3.0, 1.0]), 10.0
    )
    assert np.allclose(w, [7.5, 2.5])
    assert residual < 1e-9


def test_aad_rest_state_when_target_equals_source():
    img = np.random.default_rng(15).random((8, 30, 3))
    imp = np.random.default_rng(16).random((8, 30))
    out, diag = aad.aad_warp(img, imp, 30, 8)
    assert np.allclose(diag["column_widths"].sum(), 30.0)
    assert diag["kkt_residual"] < 1e-9


def test_aad_kkt_and_constraint_residuals():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        w0 = rng.uniform(2.0, 10.0, size=n)
        s = rng.uniform(0.01, 1.0, size=n)
        target = float(rng.uniform(n * 1.0, w0.sum()))
        w, residual = aad.solve_column_widths(w0, s, target)
        assert abs(w.sum() - target) < 1e-6
        assert residual < 1e-6
        assert np.all(w >= 1.0 - 1e-9)


def test_aad_infeasible_target():
    with pytest.raises(aad.InfeasibleWarp):
        aad.solve_column_widths(np.array([5.0, 5.0, 5.0]), np.ones(3), 2.0)


# ------------------------------------------------------------------ shift-map

def test_shiftmap_duplicate_removal_row():
    img = np.zeros((1, 4, 3))
    img[0, 0] = img[0, 1] = [0.2, 0.2, 0.2]  # A A
    img[0, 2] = [0.8, 0.1, 0.1]              # B
    img[0, 3] = [0.1, 0.1, 0.8]              # C
    imp = np.array([[0.0, 0.0, 1.0, 1.0]])   # B and C matter, the As do not
    out, diag = shift_map(img, imp, 3)
    assert out.shape[:2] == (1, 3)
    assert diag["energy"] == pytest.approx(0.0)
    assert np.allclose(out[0, 0], [0.2, 0.2, 0.2])
    assert np.allclose(out[0, 1], [0.8, 0.1, 0.1])
    assert np.allclose(out[0, 2], [0.1, 0.1, 0.8])
    ctx = ShiftMapContext(img, imp, 3)
    assert diag["energy"] == pytest.approx(oracles.min_shiftmap_energy(ctx), abs=1e-9)


def test_shiftmap_zero_reduction_identity():
    rng = np.random.default_rng(18)
    img = rand_image(rng, 4, 6)
    out, diag = shift_map(img, np.zeros((4, 6)), 6)
    assert np.array_equal(out, img)
    assert diag["energy"] == 0.0


def test_shiftmap_removes_uniform_stripe():
    img = np.full((4, 4, 3), 0.3)
    img[:, 2] = [0.3, 0.3, 0.3]  # stripe same color as background
    imp = np.full((4, 4), 0.9)
    imp[:, 2] = 0.0  # zero-importance stripe
    out, diag = shift_map(img, imp, 3)
    labels = diag["labels"]
    # all rows share the same shifts and the stripe column is skipped
    assert np.all(labels == labels[0])
    used = np.arange(3) + labels[0]
    assert 2 not in used.tolist()


def test_shiftmap_matches_exhaustive_oracle():
    rng = np.random.default_rng(19)
    for trial in range(20):
        h = int(rng.integers(2, 7))
        w = int(rng.integers(3, 7))
        r = int(rng.integers(1, min(3, w // 2 + 1)))
        img = rand_image(rng, h, w)
        imp = rng.random((h, w))
        _, diag = shift_map(img, imp, w - r)
        ctx = ShiftMapContext(img, imp, w - r)
        oracle = oracles.min_shiftmap_energy(ctx)
        assert diag["energy"] == pytest.approx(oracle, abs=1e-9), f"trial {trial}"


def test_shiftmap_rejects_large_reduction():
    img = np.zeros((4, 8, 3))
    with pytest.raises(ValueError):
        shift_map(img, np.zeros((4, 8)), 3)


# -------------------------------------------------------------- multi-operator

def test_multiop_zero_reduction():
    rng = np.random.default_rng(20)
    img = rand_image(rng, 6, 8)
    out, diag = multiop.multi_operator(img, np.zeros((6, 8)), 8)
    assert np.array_equal(out, img)
    assert diag["score"] == 1.0


def test_multiop_pure_crop_wins_when_importance_fits():
    img = np.full((8, 16, 3), 0.5)
    imp = np.zeros((8, 16))
    imp[:, 4:12] = 1.0  # all importance inside a centered window of target width
    out, diag = multiop.multi_operator(img, imp, 8)
    assert diag["retention"] == pytest.approx(1.0)
    assert out.shape[:2] == (8, 8)


def test_multiop_constant_image_tie_break():
    img = np.full((8, 12, 3), 0.5)
    _, diag = multiop.multi_operator(img, np.zeros((8, 12)), 8)
    assert diag["fractions"] == (0.0, 1.0, 0.0)


def test_simplex_grid_has_15_candidates():
    grid = multiop.simplex_fractions()
    assert len(grid) == 15
    assert all(abs(sum(f) - 1.0) < 1e-12 for f in grid)


# ------------------------------------------------------------------- dispatch

def test_retarget_identity_job_all_engines():
    rng = np.random.default_rng(21)
    img = rand_image(rng, 12, 16)
    imp = rng.random((12, 16))
    for engine in ENGINE_IDS:
        outcome = retarget(RetargetJob(img, imp, engine, 16, 12))
        assert np.array_equal(outcome.result, img)


def test_retarget_unknown_engine():
    img = np.zeros((10, 10, 3))
    with pytest.raises(EngineError):
        retarget(RetargetJob(img, np.zeros((10, 10)), "bogus", 8, 10))


def test_retarget_rejects_two_changed_dims():
    img = np.zeros((16, 16, 3))
    with pytest.raises(EngineError):
        retarget(RetargetJob(img, np.zeros((16, 16)), "crop", 8, 8))


def test_dimensional_exactness_random_jobs():
    rng = np.random.default_rng(22)
    for trial in range(200):
        engine = ENGINE_IDS[trial % 4]
        h = int(rng.integers(10, 28))
        w = int(rng.integers(10, 28))
        img = rand_image(rng, h, w)
        imp = rng.random((h, w))
        axis = "w" if rng.random() < 0.5 else "h"
        extent = w if axis == "w" else h
        target = int(rng.integers(max(8, extent - extent // 2), extent + 1))
        tw, th = (target, h) if axis == "w" else (w, target)
        outcome = retarget(RetargetJob(img, imp, engine, tw, th))
        assert outcome.result.shape[:2] == (th, tw), (trial, engine)
