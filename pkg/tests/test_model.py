import numpy as np
import pytest

from aerosurrogate.model import (ModelConfig, init_model, forward,
                                 predict_denormalized, save_checkpoint,
                                 load_checkpoint, CheckpointError)
from aerosurrogate.pointcloud import PointCloud, compute_stats, normalize
from aerosurrogate.datagen import ShapeSpec, generate_sample
from tests.test_physatt import oracle_layer, oracle_layer_norm, oracle_gelu


def tiny_config(**kw):
    defaults = dict(layers=1, channels=4, slices=2, heads=1, seed=3,
                    precision="f64", geom_width=6)
    defaults.update(kw)
    return ModelConfig(**defaults)


def tiny_clouds(n_s=3, n_v=2, seed=0):
    rng = np.random.default_rng(seed)
    normals = rng.normal(size=(n_s, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    surface = PointCloud(rng.normal(size=(n_s, 3)), normals,
                         np.zeros((n_s, 0)), "surface")
    volume = PointCloud(rng.normal(size=(n_v, 3)), None,
                        np.zeros((n_v, 0)), "volume")
    return surface, volume


class TestInit:
    def test_deterministic(self):
        a = init_model(tiny_config())
        b = init_model(tiny_config())
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_per_head_width(self):
        cfg = ModelConfig(layers=1, channels=256, slices=4, heads=8)
        assert cfg.channels // cfg.heads == 32

    def test_divisibility_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(layers=1, channels=10, slices=2, heads=3)

    def test_full_scale_defaults(self):
        cfg = ModelConfig()
        assert (cfg.layers, cfg.channels, cfg.slices) == (6, 256, 64)


class TestForward:
    def test_output_shapes(self):
        state = init_model(tiny_config())
        surface, volume = tiny_clouds(5, 4)
        pred = forward(state, surface, volume)
        assert np.isscalar(pred.drag)
        assert pred.pressure.shape == (5,)
        assert pred.velocity.shape == (4, 3)

    def test_empty_volume(self):
        state = init_model(tiny_config())
        surface, _ = tiny_clouds(5, 2)
        pred = forward(state, surface, None)
        assert pred.velocity.shape == (0, 3)
        assert np.isfinite(pred.drag)
        assert np.all(np.isfinite(pred.pressure))

    def test_surface_permutation(self):
        state = init_model(tiny_config(precision="f32"))
        surface, volume = tiny_clouds(12, 6)
        perm = np.random.default_rng(1).permutation(12)
        base = forward(state, surface, volume)
        permuted = forward(state, surface.select(perm), volume)
        assert abs(base.drag - permuted.drag) <= 1e-5
        np.testing.assert_allclose(permuted.pressure, base.pressure[perm],
                                   atol=1e-5)

    def test_volume_permutation(self):
        state = init_model(tiny_config())
        surface, volume = tiny_clouds(6, 9)
        perm = np.random.default_rng(2).permutation(9)
        base = forward(state, surface, volume)
        permuted = forward(state, surface, volume.select(perm))
        np.testing.assert_allclose(permuted.velocity, base.velocity[perm],
                                   atol=1e-10)

    def test_deterministic(self):
        state = init_model(tiny_config())
        surface, volume = tiny_clouds(4, 3)
        a = forward(state, surface, volume)
        b = forward(state, surface, volume)
        assert a.drag == b.drag
        np.testing.assert_array_equal(a.pressure, b.pressure)

    def test_matches_composed_oracle(self):
        """End-to-end tiny model against brute-force layer oracles."""
        cfg = tiny_config(layers=1, channels=4, slices=2, heads=1)
        state = init_model(cfg)
        surface, volume = tiny_clouds(3, 2)
        pred = forward(state, surface, volume)

        feats_s = np.hstack([surface.positions, surface.normals,
                             np.ones((3, 1))])
        feats_v = np.hstack([volume.positions, np.zeros((2, 3)),
                             np.zeros((2, 1))])
        x = np.vstack([feats_s, feats_v])
        x = x @ state.params["embedding.w"] + state.params["embedding.b"]
        x = oracle_layer(x, state.layer_params(0))

        def head(prefix, feats):
            h = oracle_gelu(feats @ state.params[f"{prefix}.w1"]
                            + state.params[f"{prefix}.b1"])
            return h @ state.params[f"{prefix}.w2"] + state.params[f"{prefix}.b2"]

        drag = head("head.drag", x[:3].mean(axis=0, keepdims=True))[0, 0]
        pressure = head("head.pressure", x[:3])[:, 0]
        velocity = head("head.velocity", x[3:])
        assert abs(pred.drag - drag) < 1e-10
        np.testing.assert_allclose(pred.pressure, pressure, atol=1e-10)
        np.testing.assert_allclose(pred.velocity, velocity, atol=1e-10)


class TestPredictDenormalized:
    def test_round_trips_through_stats(self):
        rec = generate_sample(ShapeSpec(1.4, 1.0, 0.8, n_surface=16,
                                        n_volume=8, seed=5))
        stats = compute_stats([rec])
        state = init_model(tiny_config(), stats)
        pred = predict_denormalized(state, rec.surface, rec.volume)
        normed = normalize(rec, stats)
        raw = forward(state, normed.surface, normed.volume)
        assert pred.drag == pytest.approx(raw.drag * stats.drag_std
                                          + stats.drag_mean)
        np.testing.assert_allclose(
            pred.pressure, raw.pressure * stats.pressure_std + stats.pressure_mean)


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path):
        state = init_model(tiny_config(precision="f32"))
        p1 = tmp_path / "a.bin"
        p2 = tmp_path / "b.bin"
        save_checkpoint(state, p1)
        loaded = load_checkpoint(p1)
        for name in state.params:
            np.testing.assert_array_equal(loaded.params[name], state.params[name])
        save_checkpoint(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_forward_identical_after_reload(self, tmp_path):
        state = init_model(tiny_config())
        surface, volume = tiny_clouds(4, 3)
        save_checkpoint(state, tmp_path / "m.bin")
        loaded = load_checkpoint(tmp_path / "m.bin")
        a = forward(state, surface, volume)
        b = forward(loaded, surface, volume)
        assert a.drag == b.drag
        np.testing.assert_array_equal(a.pressure, b.pressure)
        np.testing.assert_array_equal(a.velocity, b.velocity)

    def test_bad_magic(self, tmp_path):
        state = init_model(tiny_config())
        path = tmp_path / "m.bin"
        save_checkpoint(state, path)
        data = bytearray(path.read_bytes())
        data[:8] = b"NOTMAGIC"
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        state = init_model(tiny_config())
        path = tmp_path / "m.bin"
        save_checkpoint(state, path)
        path.write_bytes(path.read_bytes()[:-40])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_stats_preserved(self, tmp_path):
        rec = generate_sample(ShapeSpec(2.0, 1.0, 0.7, n_surface=16,
                                        n_volume=8, seed=1))
        stats = compute_stats([rec])
        state = init_model(tiny_config(), stats)
        save_checkpoint(state, tmp_path / "m.bin")
        loaded = load_checkpoint(tmp_path / "m.bin")
        assert loaded.stats.drag_mean == stats.drag_mean
        np.testing.assert_array_equal(loaded.stats.position_center,
                                      stats.position_center)
