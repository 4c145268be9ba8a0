import numpy as np
import pytest

from facehall.imagecore import bicubic_upscale, degrade, rgb_to_yuv
from facehall.metrics import psnr
from facehall.pipeline import (
    HallucinationConfig,
    hallucinate,
    hallucinate_color,
    hallucinate_once,
    prepare_corpus,
    with_reproduced,
)
from facehall.synth import synth_faces

SMALL = HallucinationConfig(k=80, rl_iterations=0)


@pytest.fixture(scope="module")
def small_faces():
    return synth_faces(8, seed=123, height=48, width=40)


@pytest.fixture(scope="module")
def small_corpus(small_faces):
    return prepare_corpus(small_faces[:6], SMALL)


class TestPrepareCorpus:
    def test_constant_image_has_zero_residual(self):
        cfg = HallucinationConfig(window_size=12, rl_iterations=0)
        corpus = prepare_corpus(np.full((1, 24, 24), 0.5), cfg)
        np.testing.assert_allclose(corpus.hr_residuals, 0.0, atol=1e-12)

    def test_all_entries_tagged_original(self, small_corpus):
        assert small_corpus.provenance == ("original",) * 6

    def test_lr_counterparts_rederivable(self, small_faces, small_corpus):
        for m in range(6):
            redone = bicubic_upscale(degrade(small_faces[m], SMALL.scale), SMALL.scale)
            np.testing.assert_array_equal(small_corpus.upscaled_lr[m], redone)
            np.testing.assert_array_equal(
                small_corpus.hr_residuals[m], small_faces[m] - redone
            )

    def test_rejects_mismatched_dims(self):
        with pytest.raises(ValueError, match="divisible"):
            prepare_corpus(np.zeros((2, 25, 40)), SMALL)


class TestHallucinateOnce:
    def test_exact_match_saturates(self, small_faces):
        truth = small_faces[6]
        corpus = prepare_corpus(truth[None], SMALL)
        lr = degrade(truth, SMALL.scale)
        out = hallucinate_once(lr, corpus, SMALL)
        assert psnr(out, truth) >= 40.0

    def test_beats_bicubic_with_truth_in_corpus(self, small_faces):
        cfg = SMALL
        corpus = prepare_corpus(small_faces[:6], cfg)
        for truth in small_faces[:6]:
            lr = degrade(truth, cfg.scale)
            out = hallucinate_once(lr, corpus, cfg)
            assert psnr(out, truth) >= psnr(bicubic_upscale(lr, cfg.scale), truth)

    def test_k_clamped_on_tiny_corpus(self, small_faces):
        cfg = HallucinationConfig(k=10_000, rl_iterations=0)
        corpus = prepare_corpus(small_faces[:2], cfg)
        out = hallucinate_once(degrade(small_faces[7], cfg.scale), corpus, cfg)
        assert np.isfinite(out).all()
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_position_patch_configuration_runs(self, small_faces):
        cfg = HallucinationConfig(window_size=12, context_step=1, k=80, rl_iterations=0)
        corpus = prepare_corpus(small_faces[:6], cfg)
        out = hallucinate_once(degrade(small_faces[7], cfg.scale), corpus, cfg)
        assert out.shape == small_faces[7].shape

    def test_wrong_input_dims_rejected(self, small_corpus):
        with pytest.raises(ValueError, match="does not match"):
            hallucinate_once(np.zeros((10, 10)), small_corpus, SMALL)

    def test_deterministic(self, small_faces, small_corpus):
        lr = degrade(small_faces[7], SMALL.scale)
        a = hallucinate_once(lr, small_corpus, SMALL)
        b = hallucinate_once(lr, small_corpus, SMALL)
        np.testing.assert_array_equal(a, b)


class TestReproducingLearning:
    def test_zero_iterations_equals_single_pass(self, small_faces, small_corpus):
        lr = degrade(small_faces[7], SMALL.scale)
        final, trace = hallucinate(lr, small_corpus, SMALL)
        np.testing.assert_array_equal(final, hallucinate_once(lr, small_corpus, SMALL))
        assert len(trace) == 1

    def test_trace_length_and_range(self, small_faces, small_corpus):
        cfg = HallucinationConfig(k=80, rl_iterations=2)
        lr = degrade(small_faces[7], cfg.scale)
        final, trace = hallucinate(lr, small_corpus, cfg)
        assert len(trace) == 3
        np.testing.assert_array_equal(final, trace[-1])
        for est in trace:
            assert est.min() >= 0.0 and est.max() <= 1.0

    def test_reproduced_slot_is_replaced_not_accumulated(self, small_faces, small_corpus):
        cfg = HallucinationConfig(k=80, rl_iterations=0)
        est1 = small_faces[6]
        est2 = small_faces[7]
        step1 = with_reproduced(small_corpus, est1, cfg)
        step2 = with_reproduced(step1, est2, cfg)
        assert step1.size == step2.size == small_corpus.size + 1
        assert step1.provenance.count("reproduced") == 1
        assert step2.provenance.count("reproduced") == 1
        np.testing.assert_array_equal(step2.hr_images[-1], est2)
        # the first estimate is gone after replacement
        assert not any(
            np.array_equal(step2.hr_images[m], est1) for m in range(step2.size)
        )

    def test_accumulation_mode_grows_corpus(self, small_faces, small_corpus):
        cfg = HallucinationConfig(k=80, rl_iterations=0, rl_accumulate=True)
        step1 = with_reproduced(small_corpus, small_faces[6], cfg)
        step2 = with_reproduced(step1, small_faces[7], cfg)
        assert step2.size == small_corpus.size + 2
        assert step2.provenance.count("reproduced") == 2

    def test_reproduced_pair_is_consistent(self, small_faces, small_corpus):
        cfg = HallucinationConfig(k=80, rl_iterations=0)
        est = small_faces[6]
        extended = with_reproduced(small_corpus, est, cfg)
        redone = bicubic_upscale(degrade(est, cfg.scale), cfg.scale)
        np.testing.assert_array_equal(extended.upscaled_lr[-1], redone)
        np.testing.assert_array_equal(extended.hr_residuals[-1], est - redone)


class TestContributionAnalysis:
    def test_dominant_coefficient_is_usually_positional(self, small_faces):
        # the single largest coefficient should sit on a same-position patch
        # far more often than position patches' share of the deep tail
        from facehall.patches import enumerate_grid, extract_patch, gather_candidates, make_lr_feature
        from facehall.tlcr import contribution_ratio, solve_weights_full

        cfg = HallucinationConfig(rl_iterations=0)
        corpus = prepare_corpus(
            synth_faces(30, seed=77, height=48, width=40), cfg
        )
        upscaled = bicubic_upscale(degrade(small_faces[7], cfg.scale), cfg.scale)
        geom = corpus.geometry
        top1, top500 = [], []
        for index in enumerate_grid(geom):
            feat = make_lr_feature(extract_patch(upscaled, index, 12), index, 10.0, geom)
            cands = gather_candidates(
                feat, index, corpus.upscaled_lr, corpus.hr_residuals, geom, 10.0
            )
            coeffs = solve_weights_full(feat.values, cands.features, cands.distances, 0.04)
            positions = cands.position_patch_indices()
            top1.append(contribution_ratio(coeffs, positions, 1)[0])
            top500.append(contribution_ratio(coeffs, positions, 500)[0])
        assert np.mean(top1) > np.mean(top500)


class TestColorPath:
    def test_gray_content_rgb_stays_gray(self, small_faces, small_corpus):
        truth = np.repeat(small_faces[7][:, :, None], 3, axis=2)
        lr = degrade(truth, SMALL.scale)
        out = hallucinate_color(lr, small_corpus, SMALL)
        assert np.abs(out[..., 0] - out[..., 1]).max() < 1e-3
        assert np.abs(out[..., 0] - out[..., 2]).max() < 1e-3

    def test_luminance_matches_gray_pipeline(self, small_faces, small_corpus):
        truth = np.repeat(small_faces[7][:, :, None], 3, axis=2)
        lr_color = degrade(truth, SMALL.scale)
        out = hallucinate_color(lr_color, small_corpus, SMALL)
        gray, _ = hallucinate(rgb_to_yuv(lr_color)[..., 0], small_corpus, SMALL)
        np.testing.assert_allclose(rgb_to_yuv(out)[..., 0], gray, atol=1e-6)

    def test_chroma_is_bicubic_passthrough(self, small_faces, small_corpus):
        # mid-gamut chroma so the final RGB clamp never bites
        rng = np.random.default_rng(70)
        yuv = np.stack(
            [
                small_faces[7] * 0.5 + 0.25,
                0.5 + 0.05 * rng.uniform(-1, 1, size=small_faces[7].shape),
                0.5 + 0.05 * rng.uniform(-1, 1, size=small_faces[7].shape),
            ],
            axis=-1,
        )
        from facehall.imagecore import yuv_to_rgb

        truth = yuv_to_rgb(yuv)
        lr = degrade(truth, SMALL.scale)
        out = hallucinate_color(lr, small_corpus, SMALL)
        expected_chroma = bicubic_upscale(rgb_to_yuv(lr)[..., 1], SMALL.scale)
        np.testing.assert_allclose(rgb_to_yuv(out)[..., 1], expected_chroma, atol=1e-9)

    def test_rejects_gray_input(self, small_faces, small_corpus):
        with pytest.raises(ValueError, match="color"):
            hallucinate_color(degrade(small_faces[7], 4), small_corpus, SMALL)
