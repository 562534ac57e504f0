import numpy as np
import pytest
import torch

from smg.errors import DivergenceError, StateError
from smg.imageio import ImageGrid
from smg.sketch import (
    SketchTrainConfig,
    build_sketch_module,
    gaussian_kernel,
    generate_sketchy_structure,
    naive_sketch,
    sigma_for,
    sketch_losses,
    smooth,
    smooth_array,
    train_sketch,
)
from smg.toy import make_toy_dataset, make_toy_structure

from oracles import dense_smooth_oracle


class TestGaussianKernel:
    def test_sigma_endpoints(self):
        assert sigma_for(0.0) == 8.0
        assert sigma_for(1.0) == 24.0

    @pytest.mark.parametrize("l", [0.0, 0.1, 0.33, 0.5, 0.77, 1.0])
    def test_normalized_symmetric_positive(self, l):
        k = gaussian_kernel(l)
        assert abs(k.sum() - 1.0) < 1e-6
        assert np.array_equal(k, k[::-1])
        assert (k > 0).all()

    def test_radius_is_two_sigma(self):
        assert len(gaussian_kernel(0.0)) == 2 * 16 + 1
        assert len(gaussian_kernel(1.0)) == 2 * 48 + 1

    def test_sigma_strictly_increasing(self):
        sigmas = [sigma_for(l) for l in np.linspace(0, 1, 11)]
        assert all(b > a for a, b in zip(sigmas, sigmas[1:]))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            gaussian_kernel(1.2)


class TestSmooth:
    def test_constant_preserved(self):
        grid = ImageGrid(np.full((12, 12, 1), 0.375, dtype=np.float32), "text")
        out = smooth(grid, 0.6)
        assert np.allclose(out.values, 0.375, atol=1e-6)

    @pytest.mark.parametrize("l", [0.0, 0.3, 1.0])
    def test_matches_dense_oracle(self, l, rng):
        arr = rng.uniform(-1, 1, (16, 16)).astype(np.float32)
        got = smooth_array(arr, l)
        expected = dense_smooth_oracle(arr, l)
        assert np.abs(got - expected).max() < 1e-5

    def test_linearity(self, rng):
        x = rng.uniform(-1, 1, (16, 16))
        y = rng.uniform(-1, 1, (16, 16))
        a, b = 0.7, -0.4
        combined = smooth_array(a * x + b * y, 0.4)
        separate = a * smooth_array(x, 0.4) + b * smooth_array(y, 0.4)
        assert np.abs(combined - separate).max() < 1e-5

    def test_variance_decreases_with_scale(self, rng):
        arr = rng.uniform(-1, 1, (32, 32)).astype(np.float32)
        assert smooth_array(arr, 0.9).var() <= smooth_array(arr, 0.1).var()

    def test_multichannel_rejected(self, rng):
        grid = ImageGrid(rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32), "style")
        with pytest.raises(ValueError):
            smooth(grid, 0.5)


class TestNaiveSketch:
    def test_saturated_interior(self):
        grid = ImageGrid(np.ones((24, 24, 1), dtype=np.float32), "structure")
        out = naive_sketch(grid, 0.2)
        center = out.values[12, 12, 0]
        assert abs(center - 1.0) < 1e-3

    def test_zero_grid_maps_to_zero(self):
        grid = ImageGrid(np.zeros((16, 16, 1), dtype=np.float32), "structure")
        out = naive_sketch(grid, 0.5)
        assert np.abs(out.values).max() < 1e-6


class TestSketchLosses:
    def setup_method(self):
        self.cfg = SketchTrainConfig(steps=0, base_width=4, n_resblocks=1,
                                     disc_layers=2, seed=3)
        self.module = build_sketch_module(self.cfg)
        from smg.backbone import DiscriminatorConfig, build_discriminator

        self.disc = build_discriminator(
            DiscriminatorConfig(in_channels=3, n_layers=2, base_width=4), seed=4)
        self.module.eval()
        self.disc.eval()

    def test_rec_matches_hand_computed(self, rng):
        t = torch.from_numpy(rng.uniform(-1, 1, (2, 1, 16, 16)).astype(np.float32))
        ls = np.array([0.2, 0.9])
        terms, fake = sketch_losses(self.module, self.disc, t, ls)
        expected = np.abs(fake.detach().numpy() - t.numpy()).mean()
        assert terms["rec"].item() == pytest.approx(expected, rel=1e-6)

    def test_zero_rec_iff_equal(self, rng):
        t = torch.from_numpy(rng.uniform(-1, 1, (1, 1, 16, 16)).astype(np.float32))
        rec = (t - t).abs().mean()
        assert rec.item() == 0.0
        perturbed = t.clone()
        perturbed[0, 0, 3, 3] += 0.5
        assert (perturbed - t).abs().mean().item() > 0.0

    def test_batch_mismatch(self, rng):
        t = torch.zeros(2, 1, 16, 16)
        with pytest.raises(ValueError):
            sketch_losses(self.module, self.disc, t, np.array([0.5]))

    def test_lambda_defaults(self):
        cfg = SketchTrainConfig()
        assert cfg.lambda_rec == 100.0
        assert cfg.lambda_adv == 1.0
        assert cfg.lr == 2e-4


class TestTrainSketch:
    def test_zero_steps_keeps_init(self):
        ds = make_toy_dataset(count=3, seed=0)
        cfg = SketchTrainConfig(steps=0, base_width=4, n_resblocks=1, disc_layers=2, seed=5)
        module, history = train_sketch(ds, cfg)
        from smg.backbone import store_from_module

        reference = build_sketch_module(cfg)
        assert store_from_module(module.transform) == store_from_module(reference.transform)
        assert history == []
        assert module.trained

    def test_empty_dataset(self):
        from smg.imageio import TextDataset

        with pytest.raises(ValueError):
            train_sketch(TextDataset(samples=[]), SketchTrainConfig(steps=1))

    def test_divergence_guard(self):
        ds = make_toy_dataset(count=2, seed=1)
        cfg = SketchTrainConfig(steps=8, base_width=4, n_resblocks=1, disc_layers=2,
                                lr=1e12, seed=0)
        with pytest.raises(DivergenceError):
            train_sketch(ds, cfg)

    def test_few_steps_run_and_logged(self):
        ds = make_toy_dataset(count=2, seed=2)
        cfg = SketchTrainConfig(steps=2, base_width=4, n_resblocks=1, disc_layers=2, seed=0)
        module, history = train_sketch(ds, cfg)
        assert len(history) == 2
        assert {"step", "rec", "adv_g", "adv_d"} <= set(history[0])


class TestSketchyStructure:
    def test_untrained_rejected(self):
        module = build_sketch_module(SketchTrainConfig(base_width=4, n_resblocks=1))
        x = make_toy_structure()
        with pytest.raises(StateError):
            generate_sketchy_structure(module, x, 0.5)

    def test_dims_and_determinism(self):
        ds = make_toy_dataset(count=2, seed=3)
        cfg = SketchTrainConfig(steps=1, base_width=4, n_resblocks=1, disc_layers=2, seed=0)
        module, _ = train_sketch(ds, cfg)
        x = make_toy_structure()
        a = generate_sketchy_structure(module, x, 0.7)
        b = generate_sketchy_structure(module, x, 0.7)
        assert a.values.shape == x.values.shape
        assert np.array_equal(a.values, b.values)


def test_checkpoint_roundtrip(tmp_path):
    ds = make_toy_dataset(count=2, seed=4)
    cfg = SketchTrainConfig(steps=1, base_width=4, n_resblocks=1, disc_layers=2, seed=0)
    module, _ = train_sketch(ds, cfg)
    from smg.sketch import load_sketch, save_sketch

    save_sketch(module, tmp_path / "s.smg1")
    back = load_sketch(tmp_path / "s.smg1")
    x = make_toy_structure()
    assert np.array_equal(generate_sketchy_structure(module, x, 0.3).values,
                          generate_sketchy_structure(back, x, 0.3).values)
