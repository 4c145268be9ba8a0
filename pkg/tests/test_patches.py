import numpy as np
import pytest

from facehall.imagecore import bicubic_upscale, degrade
from facehall.patches import (
    PatchGeometry,
    PatchIndex,
    assemble,
    candidate_count,
    candidate_positions,
    enumerate_grid,
    extract_patch,
    gather_candidates,
    make_hr_residual,
    make_lr_feature,
)


def geom(p=12, o=4, w=20, s=2, width=100, height=120):
    return PatchGeometry(
        patch_size=p, overlap=o, window_size=w, context_step=s,
        image_width=width, image_height=height,
    )


def coverage_mask(grid, geometry):
    mask = np.zeros((geometry.image_height, geometry.image_width), dtype=int)
    for idx in grid:
        mask[idx.top : idx.top + geometry.patch_size, idx.left : idx.left + geometry.patch_size] += 1
    return mask


class TestGrid:
    def test_canonical_grid_is_14_by_12(self):
        grid = enumerate_grid(geom())
        assert len(grid) == 168
        rows = {idx.top for idx in grid}
        cols = {idx.left for idx in grid}
        assert len(rows) == 14 and len(cols) == 12
        assert max(rows) == 120 - 12 and max(cols) == 100 - 12
        assert (coverage_mask(grid, geom()) >= 1).all()

    def test_grid_is_row_major(self):
        grid = enumerate_grid(geom())
        keys = [(idx.grid_row, idx.grid_col) for idx in grid]
        assert keys == sorted(keys)

    def test_single_patch_when_image_equals_patch(self):
        g = geom(p=12, o=4, w=12, width=12, height=12)
        grid = enumerate_grid(g)
        assert grid == [PatchIndex(grid_row=0, grid_col=0, top=0, left=0)]

    def test_exact_tiling_without_overlap(self):
        g = geom(p=12, o=0, w=12, width=24, height=24)
        grid = enumerate_grid(g)
        assert len(grid) == 4
        assert (coverage_mask(grid, g) == 1).all()

    @pytest.mark.parametrize("height,width", [(24, 36), (52, 44), (120, 100), (64, 92)])
    def test_every_pixel_covered(self, height, width):
        g = geom(width=width, height=height)
        assert (coverage_mask(enumerate_grid(g), g) >= 1).all()

    def test_rejects_image_smaller_than_patch(self):
        with pytest.raises(ValueError, match="smaller than patch"):
            geom(width=8, height=120, w=12)


class TestCandidateCount:
    def test_reference_configuration_count(self):
        assert candidate_count(360, geom()) == 9000

    def test_window_equal_patch_degenerates_to_position_patches(self):
        assert candidate_count(123, geom(w=12)) == 123

    def test_direct_evaluation(self):
        assert candidate_count(10, geom(w=16)) == 90

    def test_monotone_in_window_size(self):
        counts = [candidate_count(50, geom(w=w)) for w in (12, 14, 16, 20, 24)]
        assert counts == sorted(counts)
        assert counts[0] == 50


class TestFeatures:
    def test_constant_patch_mean_removed(self):
        g = geom()
        fv = make_lr_feature(np.full(144, 0.7), PatchIndex(0, 0, 0, 0), 10.0, g)
        np.testing.assert_allclose(fv.values[:144], 0.0, atol=1e-15)
        assert fv.source_mean == pytest.approx(0.7)

    def test_origin_patch_position_entries(self):
        fv = make_lr_feature(np.zeros(144), PatchIndex(0, 0, 0, 0), 10.0, geom())
        assert tuple(fv.values[-2:]) == (0.0, 0.0)

    def test_bottom_right_patch_position_entries(self):
        fv = make_lr_feature(np.zeros(144), PatchIndex(13, 11, 108, 88), 10.0, geom())
        np.testing.assert_allclose(fv.values[-2:], [10.0, 10.0], atol=1e-12)

    def test_mean_removal_sums_to_zero(self):
        rng = np.random.default_rng(21)
        g = geom()
        for _ in range(25):
            pix = rng.uniform(size=144)
            fv = make_lr_feature(pix, PatchIndex(1, 1, 8, 8), 10.0, g)
            assert abs(fv.values[:144].sum()) < 1e-9

    def test_hr_residual_identity_and_shift(self):
        patch = np.random.default_rng(22).uniform(size=(12, 12))
        np.testing.assert_array_equal(make_hr_residual(patch, patch), np.zeros((12, 12)))
        np.testing.assert_allclose(make_hr_residual(patch + 0.1, patch), 0.1, atol=1e-12)

    def test_hr_residual_matches_elementwise_oracle(self):
        rng = np.random.default_rng(23)
        hr, lr = rng.uniform(size=(2, 12, 12))
        ref = np.array([[hr[i, j] - lr[i, j] for j in range(12)] for i in range(12)])
        np.testing.assert_array_equal(make_hr_residual(hr, lr), ref)


def make_stacks(count, height, width, seed=0, scale=4):
    rng = np.random.default_rng(seed)
    hr = rng.uniform(size=(count, height, width))
    lr_up = np.stack([bicubic_upscale(degrade(img, scale), scale) for img in hr])
    return lr_up, hr - lr_up


class TestGatherCandidates:
    def test_degenerate_window_reproduces_position_patches(self):
        g = geom(w=12, width=48, height=48)
        lr_up, res = make_stacks(6, 48, 48)
        index = PatchIndex(1, 1, 8, 8)
        feature = make_lr_feature(extract_patch(lr_up[0], index, 12), index, 10.0, g)
        cands = gather_candidates(feature, index, lr_up, res, g, 10.0)
        assert len(cands) == 6
        assert (cands.positions == [8, 8]).all()
        np.testing.assert_array_equal(cands.position_patch_indices(), np.arange(6))

    def test_interior_count_matches_formula(self):
        g = geom(width=60, height=60)
        lr_up, res = make_stacks(4, 60, 60)
        index = PatchIndex(3, 3, 24, 24)
        feature = make_lr_feature(extract_patch(lr_up[0], index, 12), index, 10.0, g)
        cands = gather_candidates(feature, index, lr_up, res, g, 10.0)
        assert len(cands) == candidate_count(4, g) == 100

    def test_self_candidate_has_zero_distance(self):
        g = geom(width=48, height=48)
        lr_up, res = make_stacks(3, 48, 48)
        index = PatchIndex(1, 1, 8, 8)
        feature = make_lr_feature(extract_patch(lr_up[1], index, 12), index, 10.0, g)
        cands = gather_candidates(feature, index, lr_up, res, g, 10.0)
        self_rows = (cands.source_ids[:, 0] == 1) & (cands.source_ids[:, 1] == 0) & (
            cands.source_ids[:, 2] == 0
        )
        assert self_rows.sum() == 1
        assert cands.distances[self_rows][0] == 0.0
        assert (cands.distances >= 0).all()

    def test_border_window_shifts_inward_keeping_count(self):
        g = geom(width=48, height=48)
        corner = PatchIndex(0, 0, 0, 0)
        tops, lefts = candidate_positions(corner, g)
        assert tops.min() == 0 and lefts.min() == 0
        assert tops.size == lefts.size == g.offsets_per_axis
        assert tops.max() + 12 <= 48 and lefts.max() + 12 <= 48
        lr_up, res = make_stacks(2, 48, 48)
        feature = make_lr_feature(extract_patch(lr_up[0], corner, 12), corner, 10.0, g)
        cands = gather_candidates(feature, corner, lr_up, res, g, 10.0)
        assert len(cands) == candidate_count(2, g)

    def test_candidate_features_use_own_coordinates(self):
        g = geom(width=48, height=48)
        lr_up, res = make_stacks(1, 48, 48)
        index = PatchIndex(1, 1, 8, 8)
        feature = make_lr_feature(extract_patch(lr_up[0], index, 12), index, 10.0, g)
        cands = gather_candidates(feature, index, lr_up, res, g, 10.0)
        for row in range(len(cands)):
            top, left = cands.positions[row]
            expected = make_lr_feature(
                lr_up[0, top : top + 12, left : left + 12],
                PatchIndex(0, 0, int(top), int(left)),
                10.0,
                g,
            )
            np.testing.assert_allclose(cands.features[row], expected.values, atol=1e-12)
            assert cands.distances[row] == pytest.approx(
                np.linalg.norm(feature.values - expected.values), abs=1e-12
            )

    def test_empty_corpus_rejected(self):
        g = geom(width=48, height=48)
        with pytest.raises(ValueError, match="empty"):
            gather_candidates(
                make_lr_feature(np.zeros(144), PatchIndex(0, 0, 0, 0), 10.0, g),
                PatchIndex(0, 0, 0, 0),
                np.empty((0, 48, 48)),
                np.empty((0, 48, 48)),
                g,
                10.0,
            )


class TestAssemble:
    def test_constant_patches(self):
        g = geom(width=48, height=48)
        grid = enumerate_grid(g)
        out = assemble([(idx, np.full((12, 12), 0.25)) for idx in grid], g)
        np.testing.assert_allclose(out, 0.25, atol=1e-15)

    def test_two_overlapping_patches_average(self):
        g = geom(p=12, o=4, w=12, width=20, height=12)
        patches = [
            (PatchIndex(0, 0, 0, 0), np.full((12, 12), 0.2)),
            (PatchIndex(0, 1, 0, 8), np.full((12, 12), 0.6)),
        ]
        out = assemble(patches, g)
        np.testing.assert_allclose(out[:, :8], 0.2)
        np.testing.assert_allclose(out[:, 8:12], 0.4)
        np.testing.assert_allclose(out[:, 12:], 0.6)

    def test_matches_accumulate_count_oracle(self):
        g = geom(width=52, height=44)
        grid = enumerate_grid(g)
        rng = np.random.default_rng(24)
        patches = [(idx, rng.normal(size=(12, 12))) for idx in grid]
        acc = np.zeros((44, 52))
        cnt = np.zeros((44, 52))
        for idx, vals in patches:
            for i in range(12):
                for j in range(12):
                    acc[idx.top + i, idx.left + j] += vals[i, j]
                    cnt[idx.top + i, idx.left + j] += 1
        np.testing.assert_allclose(assemble(patches, g), acc / cnt, atol=1e-12)

    @pytest.mark.parametrize("overlap", [0, 4])
    def test_assemble_extract_identity_from_one_source(self, overlap):
        g = geom(o=overlap, width=52, height=44)
        img = np.random.default_rng(25).uniform(size=(44, 52))
        patches = [(idx, extract_patch(img, idx, 12)) for idx in enumerate_grid(g)]
        np.testing.assert_allclose(assemble(patches, g), img, atol=1e-12)

    def test_uncovered_pixels_raise(self):
        g = geom(p=12, o=0, w=12, width=24, height=24)
        with pytest.raises(RuntimeError, match="uncovered"):
            assemble([(PatchIndex(0, 0, 0, 0), np.zeros((12, 12)))], g)


class TestGeometryValidation:
    def test_invalid_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            geom(o=12)

    def test_window_smaller_than_patch(self):
        with pytest.raises(ValueError, match="window_size"):
            geom(w=10)

    def test_step_not_dividing_span(self):
        with pytest.raises(ValueError, match="divisible"):
            geom(w=17, s=2)

    def test_window_must_fit_image(self):
        with pytest.raises(ValueError, match="fit"):
            geom(width=16, height=120)
