import numpy as np
import pytest

from leafgraph.explain import Heatmap, color_ramp, eigen_cam, grad_cam, render
from leafgraph.images import RawImage, decode_ppm, resize_bilinear
from leafgraph.rng import Rng


class TestEigenCam:
    def test_rank_one_recovery(self):
        u = np.abs(Rng(1).normal(6 * 5)).reshape(30)
        v = Rng(2).normal(8)
        m = np.outer(u, v).reshape(6, 5, 8)
        hm = eigen_cam(m)
        assert not hm.degenerate
        flat = hm.grid.ravel()
        u_scaled = (u - u.min()) / (u.max() - u.min())
        cos = float(flat @ u_scaled) / (
            np.linalg.norm(flat) * np.linalg.norm(u_scaled)
        )
        assert cos >= 0.999

    def test_dominant_channel(self):
        rng = Rng(3)
        chan = np.abs(rng.normal(16)).reshape(4, 4)
        fm = np.zeros((4, 4, 3))
        fm[:, :, 1] = chan * 100.0
        fm[:, :, 0] = rng.normal(16).reshape(4, 4) * 1e-4
        hm = eigen_cam(fm)
        expected = (chan - chan.min()) / (chan.max() - chan.min())
        assert np.abs(hm.grid - expected).max() < 1e-3

    def test_constant_map_degenerate(self):
        hm = eigen_cam(np.ones((3, 3, 2)))
        assert hm.degenerate and (hm.grid == 0.0).all()

    def test_zero_map_degenerate(self):
        hm = eigen_cam(np.zeros((3, 3, 2)))
        assert hm.degenerate and (hm.grid == 0.0).all()

    def test_positive_rescaling_invariance(self):
        fm = np.abs(Rng(4).normal(5 * 4 * 6)).reshape(5, 4, 6)
        a = eigen_cam(fm)
        b = eigen_cam(fm * 37.5)
        assert np.abs(a.grid - b.grid).max() < 1e-9


class LinearHeadHook:
    """Test double: logit = w . pooled, so the gradient is w itself."""

    def __init__(self, w):
        self.w = np.asarray(w, dtype=np.float64)

    def pooled_logit_grad(self, pooled, class_index):
        return float(self.w @ pooled), self.w.copy()


class TestGradCam:
    def test_linear_head_closed_form(self):
        rng = Rng(5)
        for seed in range(20):
            w = Rng(seed).normal(6)
            fm = Rng(seed + 100).normal(4 * 3 * 6).reshape(4, 3, 6)
            hm = grad_cam(LinearHeadHook(w), fm, 0)
            raw = np.maximum(fm @ (w / 12.0), 0.0)
            if raw.max() > raw.min():
                expected = (raw - raw.min()) / (raw.max() - raw.min())
                assert np.abs(hm.grid - expected).max() < 1e-6
            else:
                assert hm.degenerate

    def test_all_negative_map_degenerate(self):
        w = np.array([1.0])
        fm = -np.ones((3, 3, 1))
        hm = grad_cam(LinearHeadHook(w), fm, 0)
        assert hm.degenerate and (hm.grid == 0.0).all()

    def test_trained_model_gradient_consistency(self, small_dataset):
        from leafgraph.models import build, pooled_logit_grad, train
        from test_models import tiny_config

        manifest, store = small_dataset
        model = build(tiny_config(epochs=2), store, manifest)
        train(model, store, manifest)
        d = model.train_features.shape[1]
        fm = Rng(6).normal(3 * 2 * d).reshape(3, 2, d)
        hm = grad_cam(model, fm, 1)
        assert hm.grid.shape == (3, 2)
        score, grad = pooled_logit_grad(model, fm.mean(axis=(0, 1)), 1)
        raw = np.maximum(fm @ (grad / 6.0), 0.0)
        if raw.max() > raw.min():
            expected = (raw - raw.min()) / (raw.max() - raw.min())
            assert np.abs(hm.grid - expected).max() < 1e-9


class TestRender:
    def test_zero_heatmap_black_pgm(self, tmp_path):
        hm = Heatmap(np.zeros((4, 4)), "eigencam")
        path = tmp_path / "out.pgm"
        render(hm, None, path)
        img = decode_ppm(path.read_bytes())
        assert (img.data == 0).all()

    def test_unit_value_maps_to_255(self, tmp_path):
        grid = np.zeros((2, 2))
        grid[0, 0] = 1.0
        path = tmp_path / "out.pgm"
        render(Heatmap(grid, "gradcam"), None, path)
        img = decode_ppm(path.read_bytes())
        assert img.data[0, 0, 0] == 255

    def test_upsampling_matches_resize_oracle(self, tmp_path):
        grid = np.array([[0.0, 1.0], [0.5, 0.25]])
        base = RawImage(4, 4, 1, np.zeros((4, 4, 1), dtype=np.uint8))
        path = tmp_path / "out.pgm"
        render(Heatmap(grid, "eigencam"), base, path)
        img = decode_ppm(path.read_bytes())
        expected = np.round(
            np.clip(resize_bilinear(grid, 4, 4)[:, :, 0], 0.0, 1.0) * 255.0
        ).astype(np.uint8)
        assert (img.data[:, :, 0] == expected).all()

    def test_roundtrip_within_one_level(self, tmp_path):
        grid = Rng(7).uniform(25).reshape(5, 5)
        grid = (grid - grid.min()) / (grid.max() - grid.min())
        path = tmp_path / "out.pgm"
        render(Heatmap(grid, "eigencam"), None, path)
        img = decode_ppm(path.read_bytes())
        diff = np.abs(img.data[:, :, 0].astype(int) - np.round(grid * 255.0))
        assert diff.max() <= 1

    def test_montage_side_by_side(self, tmp_path):
        rng = Rng(8)
        base = RawImage(
            6, 6, 3, (rng.uniform(6 * 6 * 3) * 255).astype(np.uint8).reshape(6, 6, 3)
        )
        grid = rng.uniform(9).reshape(3, 3)
        pgm = tmp_path / "h.pgm"
        ppm = tmp_path / "m.ppm"
        render(Heatmap(grid, "gradcam"), base, pgm, ppm)
        montage = decode_ppm(ppm.read_bytes())
        assert (montage.height, montage.width) == (6, 12)
        assert (montage.data[:, :6, :] == base.data).all()

    def test_ramp_is_stable(self):
        ramp = color_ramp()
        assert ramp.shape == (256, 3)
        assert ramp[0].tolist() == [0, 0, 128]
        assert ramp[255].tolist() == [128, 0, 0]
