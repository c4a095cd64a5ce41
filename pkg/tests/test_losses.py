import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scene
from derender.coarse import CoarseEstimate
from derender.losses import (
    LightSampleConfig,
    LossWeights,
    coarse_loss,
    lsgan_losses,
    metric_dia,
    metric_mse_l1,
    metric_report,
    metric_sie,
    reconstruction_loss,
    reconstruction_loss_with_grad,
    sample_random_light,
    ssim,
    ssim_with_grad,
)
from derender.raster import RasterError
from derender.rendering import LightParams


# Brute-force oracles: straight loops over pixels, no shared code with the
# library implementations.

def ssim_brute(a, b):
    size, sigma = 11, 1.5
    ax = np.arange(size) - 5.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = 0.01**2, 0.03**2

    def channel(x, y):
        H, W = x.shape
        vals = []
        for i in range(H - size + 1):
            for j in range(W - size + 1):
                px = x[i : i + size, j : j + size]
                py = y[i : i + size, j : j + size]
                mx = (w * px).sum()
                my = (w * py).sum()
                vx = (w * px * px).sum() - mx * mx
                vy = (w * py * py).sum() - my * my
                cxy = (w * px * py).sum() - mx * my
                vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
        return np.mean(vals)

    if a.ndim == 2:
        return channel(a, b)
    return np.mean([channel(a[..., c], b[..., c]) for c in range(a.shape[2])])


def dia_brute(np_, ng, mask):
    angles = []
    for i in range(np_.shape[0]):
        for j in range(np_.shape[1]):
            if mask[i, j]:
                d = min(1.0, max(-1.0, float(np.dot(np_[i, j], ng[i, j]))))
                angles.append(np.degrees(np.arccos(d)))
    return np.mean(angles)


def sie_brute(ap, ag, mask):
    ps = [ap[i, j] for i in range(ap.shape[0]) for j in range(ap.shape[1]) if mask[i, j]]
    gs = [ag[i, j] for i in range(ap.shape[0]) for j in range(ap.shape[1]) if mask[i, j]]
    pm = np.mean(ps, axis=0)
    gm = np.mean(gs, axis=0)
    errs = [np.sum(((g - gm) - (p - pm)) ** 2) for p, g in zip(ps, gs)]
    return np.mean(errs)


def unit_field(rng, shape):
    v = rng.normal(size=shape + (3,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class TestSSIM:
    def test_identical_images(self, rng):
        a = rng.random((16, 16, 3))
        assert ssim(a, a) == pytest.approx(1.0)

    def test_constant_limit(self):
        # Two constants 0 and 1: variances vanish, the contrast factor
        # cancels, and SSIM collapses to c1 / (1 + c1).
        a = np.zeros((12, 12))
        b = np.ones((12, 12))
        c1 = 0.01**2
        expect = c1 / (1.0 + c1)
        assert ssim(a, b) == pytest.approx(expect, rel=1e-10)

    def test_matches_brute_force(self, rng):
        for _ in range(5):
            a = rng.random((14, 15, 3))
            b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
            assert ssim(a, b) == pytest.approx(ssim_brute(a, b), abs=1e-10)

    def test_too_small(self):
        with pytest.raises(RasterError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_gradient_matches_finite_differences(self, rng):
        a = rng.random((12, 12))
        b = rng.random((12, 12))
        _, g = ssim_with_grad(a, b)
        for _ in range(10):
            i, j = rng.integers(0, 12, 2)
            eps = 1e-6
            ap = a.copy()
            ap[i, j] += eps
            am = a.copy()
            am[i, j] -= eps
            fd = (ssim(ap, b) - ssim(am, b)) / (2 * eps)
            assert g[i, j] == pytest.approx(fd, abs=1e-7)


class TestReconstructionLoss:
    def test_identical_zero(self, rng):
        a = rng.random((16, 16, 3))
        assert reconstruction_loss(a, a) == pytest.approx(0.0)

    def test_uniform_offset_l1(self, rng):
        a = rng.random((16, 16, 3)) * 0.8
        b = a + 0.1
        loss = reconstruction_loss(a, b)
        l1 = np.mean(np.abs(a - b))
        assert l1 == pytest.approx(0.1)
        assert loss == pytest.approx(0.1 + 0.5 * (1.0 - ssim_brute(a, b)), abs=1e-10)

    def test_grad_matches_finite_differences(self, rng):
        a = rng.random((12, 12, 3))
        b = rng.random((12, 12, 3))
        _, g = reconstruction_loss_with_grad(a, b)
        for _ in range(8):
            i, j, c = rng.integers(0, 12), rng.integers(0, 12), rng.integers(0, 3)
            eps = 1e-6
            bp = b.copy()
            bp[i, j, c] += eps
            bm = b.copy()
            bm[i, j, c] -= eps
            fd = (reconstruction_loss(a, bp) - reconstruction_loss(a, bm)) / (2 * eps)
            assert g[i, j, c] == pytest.approx(fd, abs=1e-6)


class TestCoarseLoss:
    def _pair(self):
        _, dec, _ = make_scene(size=16)
        coarse = CoarseEstimate(
            n_c=np.asarray(dec.normals).copy(),
            a_c=np.asarray(dec.material.albedo).copy(),
            l_c=dec.light,
            d_c=np.asarray(dec.depth).copy(),
            valid=np.ones((16, 16), bool),
        )
        return dec, coarse

    def test_exact_match_is_minus_lambda_n(self):
        dec, coarse = self._pair()
        w = LossWeights()
        assert coarse_loss(dec, coarse, w) == pytest.approx(-w.lambda_n)

    def test_flipped_normals_cost_two_lambda_n(self):
        dec, coarse = self._pair()
        w = LossWeights()
        base = coarse_loss(dec, coarse, w)
        dec.normals = -np.asarray(dec.normals)
        assert coarse_loss(dec, coarse, w) == pytest.approx(base + 2.0 * w.lambda_n)

    def test_zero_weights(self):
        dec, coarse = self._pair()
        w = LossWeights(lambda_d=0, lambda_n=0, lambda_a=0, lambda_l=0)
        assert coarse_loss(dec, coarse, w) == 0.0

    def test_missing_field_raises(self):
        dec, coarse = self._pair()
        coarse.a_c = None
        with pytest.raises(RasterError):
            coarse_loss(dec, coarse, LossWeights())

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_d=-0.1)


class TestLsgan:
    def test_example(self):
        d_loss, g_loss = lsgan_losses([0.5], [0.5])
        assert d_loss == pytest.approx(0.5)
        assert g_loss == pytest.approx(0.25)

    def test_perfect_discriminator(self):
        d_loss, g_loss = lsgan_losses([1.0, 1.0], [0.0])
        assert d_loss == pytest.approx(0.0)
        assert g_loss == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            lsgan_losses([], [1.0])


class TestSampleRandomLight:
    def test_deterministic_given_seed(self):
        batch = [LightParams.from_xy(0.1, 0.2, 0.4, 0.5)]
        cfg = LightSampleConfig(rng_seed=7)
        a = sample_random_light(batch, cfg)
        b = sample_random_light(batch, cfg)
        assert a == b

    def test_unit_direction_and_strength_ranges(self, rng):
        batch = [LightParams.from_xy(0.0, 0.0, 0.5, 0.5)]
        for seed in range(50):
            lp = sample_random_light(batch, LightSampleConfig(rng_seed=seed))
            assert np.linalg.norm(lp.l) == pytest.approx(1.0)
            assert 0.0 <= lp.s_amb <= 1.0 and 0.0 <= lp.s_dir <= 1.0

    def test_strength_std(self):
        batch = [LightParams.from_xy(0.0, 0.0, 0.5, 0.5)]
        cfg = LightSampleConfig()
        rng = np.random.default_rng(0)
        draws = [sample_random_light(batch, cfg, rng).s_amb for _ in range(100000)]
        assert np.std(draws) == pytest.approx(0.1, abs=0.01)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            sample_random_light([], LightSampleConfig())


class TestMetrics:
    def test_dia_identities(self, rng):
        n = unit_field(rng, (8, 8))
        # arccos near 1.0 loses precision, so allow a microdegree.
        assert metric_dia(n, n) == pytest.approx(0.0, abs=1e-5)
        assert metric_dia(n, -n) == pytest.approx(180.0, abs=1e-5)

    def test_dia_half_aligned_half_orthogonal(self):
        n1 = np.zeros((2, 1, 3))
        n1[..., 2] = 1.0
        n2 = n1.copy()
        n2[1, 0] = [1.0, 0.0, 0.0]
        assert metric_dia(n1, n2) == pytest.approx(45.0)

    def test_sie_identity_and_shift_invariance(self, rng):
        a = rng.random((8, 8, 3))
        assert metric_sie(a, a) == 0.0
        assert metric_sie(a + 0.1, a) == pytest.approx(0.0, abs=1e-24)

    def test_sie_two_pixel_example(self):
        gt = np.zeros((1, 2, 3))
        gt[0, 1] = 1.0
        pred = 1.0 - gt
        assert metric_sie(pred, gt) == pytest.approx(3.0)

    def test_mse_l1_uniform_offset(self, rng):
        a = rng.random((8, 8, 3))
        mse, l1 = metric_mse_l1(a + 0.5, a)
        assert mse == pytest.approx(0.25)
        assert l1 == pytest.approx(0.5)

    def test_match_brute_force(self, rng):
        for _ in range(5):
            ap = rng.random((16, 16, 3))
            ag = rng.random((16, 16, 3))
            n1 = unit_field(rng, (16, 16))
            n2 = unit_field(rng, (16, 16))
            mask = rng.random((16, 16)) < 0.7
            if not mask.any():
                mask[0, 0] = True
            assert metric_dia(n1, n2, mask) == pytest.approx(dia_brute(n1, n2, mask), abs=1e-10)
            assert metric_sie(ap, ag, mask) == pytest.approx(sie_brute(ap, ag, mask), abs=1e-10)

    def test_report_identity(self, rng):
        a = rng.random((16, 16, 3))
        n = unit_field(rng, (16, 16))
        report = metric_report(a, a, n, n)
        assert report.dia_degrees == pytest.approx(0.0, abs=1e-5)
        assert report.sie == 0.0
        assert report.ssim == pytest.approx(1.0)
        assert report.pixel_count == 256
        d = report.to_json_dict()
        assert set(d) == {"mse", "l1", "dia_degrees", "sie", "ssim", "pixel_count"}

    def test_empty_mask(self, rng):
        a = rng.random((4, 4, 3))
        with pytest.raises(RasterError):
            metric_sie(a, a, np.zeros((4, 4), bool))


@given(st.floats(-0.3, 0.3), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_sie_shift_invariance_property(offset, seed):
    rng = np.random.default_rng(seed)
    a = rng.random((6, 6, 3)) * 0.5 + 0.2
    b = rng.random((6, 6, 3))
    assert metric_sie(a + offset, b) == pytest.approx(metric_sie(a, b), abs=1e-12)


@given(st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_ssim_symmetry_property(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((12, 12))
    b = rng.random((12, 12))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
