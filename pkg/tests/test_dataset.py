import json

import numpy as np
import pytest
from scipy import stats

from radarsim.dataset import (
    AugmentConfig,
    GenerationConfig,
    MANIFEST_NAME,
    PoseSampler,
    augment,
    augment_directory,
    generate_dataset,
    sample_parameters,
)
from radarsim.formats import load_pair
from radarsim.imaging import RadarImagePair, VoxelGrid
from radarsim.sampledata import demo_mesh, write_obj


def desk_config(tmp_path, labels="AB", samples=3, seed=77, rays=800):
    mesh_dir = tmp_path / "meshes"
    mesh_dir.mkdir(exist_ok=True)
    classes = []
    for label in labels:
        p = mesh_dir / f"{label}.obj"
        write_obj(demo_mesh(label), p)
        classes.append({"label": label, "mesh": str(p)})
    raw = {
        "classes": classes,
        "samples_per_class": samples,
        "base_seed": seed,
        "alpha_range": [0.1, 0.5],
        "pose": {"standoff_m": 0.30},
        "array": {
            "builtin": "grid", "rows": 2, "cols": 2, "pitch": 0.04,
            "center": [-0.03, -0.03, 0.0], "rx_offset": [0.02, 0.02, 0.0],
        },
        "trace": {"rays_per_tx": rays, "max_bounces": 2, "perception_radius": 0.015},
        "sfcw": {"f0": 72e9, "delta_f": 10e9 / 127.0, "n_steps": 64},
        "grid": {"counts": [24, 24, 12], "spacing": [0.0075, 0.0075, 0.0075]},
    }
    return GenerationConfig.from_dict(raw, base_dir=tmp_path)


def tree_bytes(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()}


class TestGenerationConfig:
    def test_duplicate_labels_rejected(self, tmp_path):
        cfg = desk_config(tmp_path)
        with pytest.raises(ValueError, match="unique"):
            GenerationConfig(
                classes=(("A", "x.obj"), ("A", "y.obj")),
                samples_per_class=1,
                base_seed=0,
                alpha_range=(0.1, 0.5),
                pose=PoseSampler(),
                array=cfg.array,
                trace_template=cfg.trace_template,
                sfcw=cfg.sfcw,
                grid=cfg.grid,
            )

    def test_label_outside_a_to_h_rejected(self, tmp_path):
        cfg = desk_config(tmp_path)
        with pytest.raises(ValueError, match="labels"):
            GenerationConfig(
                classes=(("Z", "x.obj"),),
                samples_per_class=1,
                base_seed=0,
                alpha_range=(0.1, 0.5),
                pose=PoseSampler(),
                array=cfg.array,
                trace_template=cfg.trace_template,
                sfcw=cfg.sfcw,
                grid=cfg.grid,
            )

    def test_alpha_range_validated(self, tmp_path):
        raw_cfg = desk_config(tmp_path)
        with pytest.raises(ValueError, match="alpha_range"):
            GenerationConfig(
                classes=raw_cfg.classes,
                samples_per_class=1,
                base_seed=0,
                alpha_range=(0.5, 1.5),
                pose=PoseSampler(),
                array=raw_cfg.array,
                trace_template=raw_cfg.trace_template,
                sfcw=raw_cfg.sfcw,
                grid=raw_cfg.grid,
            )

    def test_full_scale_request_accepted(self, tmp_path):
        # 8 classes x 875 samples = a full 7000-image corpus; the config
        # validates without running
        mesh_dir = tmp_path / "meshes"
        mesh_dir.mkdir()
        classes = []
        for label in "ABCDEFGH":
            p = mesh_dir / f"{label}.obj"
            write_obj(demo_mesh(label), p)
            classes.append({"label": label, "mesh": str(p)})
        cfg = GenerationConfig.from_dict(
            {"classes": classes, "samples_per_class": 875, "base_seed": 1},
            base_dir=tmp_path,
        )
        assert len(cfg.classes) * cfg.samples_per_class == 7000

    def test_alpha_draws_uniform_in_range(self, tmp_path):
        cfg = desk_config(tmp_path)
        alphas = np.array(
            [sample_parameters(cfg, 0, i)[2] for i in range(10_000)]
        )
        assert alphas.min() >= 0.1 and alphas.max() <= 0.5
        stat = stats.kstest(alphas, stats.uniform(loc=0.1, scale=0.4).cdf)
        assert stat.pvalue > 0.01

    def test_pose_draws_in_range(self, tmp_path):
        cfg = desk_config(tmp_path)
        for i in range(200):
            _, pose, _, _ = sample_parameters(cfg, 1, i)
            assert -20.0 <= pose["azimuth_deg"] <= 20.0
            assert -20.0 <= pose["elevation_deg"] <= 20.0
            assert -10.0 <= pose["roll_deg"] <= 10.0
            assert pose["standoff_m"] == 0.30


class TestGenerateDataset:
    def test_counting_contract(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=3)
        out = tmp_path / "out"
        stats_ = generate_dataset(cfg, out)
        files = sorted(p.name for p in out.glob("*.rsi"))
        assert len(files) == 6
        assert stats_["n_samples"] == 6
        lines = (out / MANIFEST_NAME).read_text().splitlines()
        assert len(lines) == 6
        listed = [json.loads(l)["file"] for l in lines]
        assert sorted(listed) == files

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=2)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        generate_dataset(cfg, out_a)
        generate_dataset(cfg, out_b)
        assert tree_bytes(out_a) == tree_bytes(out_b)

    def test_resume_skips_matching_files(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=2)
        out = tmp_path / "out"
        generate_dataset(cfg, out)
        before = tree_bytes(out)
        removed = out / "B_00001.rsi"
        removed.unlink()
        stats_ = generate_dataset(cfg, out, resume=True)
        assert stats_["n_skipped"] == 3
        assert stats_["n_written"] == 1
        assert tree_bytes(out) == before

    def test_resume_recomputes_on_seed_mismatch(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=2)
        out = tmp_path / "out"
        generate_dataset(cfg, out)
        before = tree_bytes(out)
        cfg2 = desk_config(tmp_path, labels="AB", samples=2, seed=78)
        stats_ = generate_dataset(cfg2, out, resume=True)
        assert stats_["n_skipped"] == 0
        assert tree_bytes(out) != before

    def test_zero_path_sample_flagged_and_written(self, tmp_path):
        # a plate seen edge-on: every ray misses, the sample still materializes
        mesh_dir = tmp_path / "meshes"
        mesh_dir.mkdir()
        edge_on = mesh_dir / "edge.obj"
        edge_on.write_text(
            "v 0 -0.01 0.29\nv 0 0.01 0.29\nv 0 0.0 0.31\nf 1 2 3\n"
        )
        raw = {
            "classes": [{"label": "A", "mesh": str(edge_on)}],
            "samples_per_class": 1,
            "base_seed": 5,
            "pose": {"azimuth_deg": [0, 0], "elevation_deg": [0, 0], "roll_deg": [0, 0],
                     "standoff_m": 0.30},
            "array": {"builtin": "grid", "rows": 1, "cols": 1, "pitch": 0.01,
                      "center": [0, 0.05, 0], "rx_offset": [0.0, -0.1, 0.0]},
            "trace": {"rays_per_tx": 500, "max_bounces": 1, "perception_radius": 0.004},
            "sfcw": {"f0": 72e9, "delta_f": 10e9 / 127.0, "n_steps": 32},
            "grid": {"counts": [8, 8, 8], "spacing": [0.01, 0.01, 0.01]},
        }
        cfg = GenerationConfig.from_dict(raw, base_dir=tmp_path)
        out = tmp_path / "out"
        with pytest.warns(UserWarning, match="zero paths"):
            stats_ = generate_dataset(cfg, out)
        assert stats_["n_zero_paths"] == 1
        line = json.loads((out / MANIFEST_NAME).read_text().splitlines()[0])
        assert line["zero_paths"] is True
        pair, prov = load_pair(out / line["file"])
        assert np.all(pair.intensity == 0.0)
        assert prov["zero_paths"] is True

    def test_mesh_load_failure_aborts(self, tmp_path):
        raw = {
            "classes": [{"label": "A", "mesh": "missing.obj"}],
            "samples_per_class": 1,
            "base_seed": 5,
        }
        cfg = GenerationConfig.from_dict(raw, base_dir=tmp_path)
        with pytest.raises(ValueError, match="not found"):
            generate_dataset(cfg, tmp_path / "out")

    def test_labels_and_headers_recorded(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=1)
        out = tmp_path / "out"
        generate_dataset(cfg, out)
        for line in (out / MANIFEST_NAME).read_text().splitlines():
            rec = json.loads(line)
            pair, prov = load_pair(out / rec["file"])
            assert pair.label == rec["label"]
            assert prov["seed"] == rec["seed"]
            assert prov["alpha"] == rec["alpha"]
            assert pair.normalized
            assert pair.intensity.shape == (24, 24)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

def one_hot_pair(shape=(16, 16), hot=(3, 5)):
    intensity = np.zeros(shape)
    intensity[hot] = 1.0
    depth = np.zeros(shape)
    depth[hot] = 0.7
    grid = VoxelGrid((0, 0, 0.2), (0.005, 0.005, 0.005), (*shape, 4))
    return RadarImagePair(intensity, depth, grid, label="A", normalized=True)


def geometry_only(**overrides) -> AugmentConfig:
    base = dict(
        flip_horizontal=False,
        flip_vertical=False,
        rotation_deg=(0.0, 0.0),
        scale_range=(1.0, 1.0),
        blur_sigma=0.0,
    )
    base.update(overrides)
    return AugmentConfig(**base)


def find_flipping_seed(cfg, pair, axis):
    """Smallest seed whose first enabled-flip draw fires."""
    for seed in range(64):
        out = augment(pair, cfg, seed)
        if not np.array_equal(out.intensity, pair.intensity):
            return seed
    raise AssertionError("no flipping seed found in 64 tries")


class TestAugment:
    def test_identity_limit(self):
        pair = one_hot_pair()
        out = augment(pair, geometry_only(), seed=123)
        np.testing.assert_array_equal(out.intensity, pair.intensity)
        np.testing.assert_array_equal(out.depth, pair.depth)

    def test_horizontal_flip_reflects_one_hot_pixel(self):
        pair = one_hot_pair(hot=(3, 5))
        cfg = geometry_only(flip_horizontal=True)
        seed = find_flipping_seed(cfg, pair, axis=1)
        out = augment(pair, cfg, seed)
        w = pair.intensity.shape[1]
        assert out.intensity[3, w - 1 - 5] == 1.0
        assert out.depth[3, w - 1 - 5] == pytest.approx(0.7)
        assert np.count_nonzero(out.intensity) == 1

    def test_double_flip_is_identity(self):
        pair = one_hot_pair()
        cfg = geometry_only(flip_horizontal=True, flip_vertical=True)
        for seed in range(8):
            once = augment(pair, cfg, seed)
            twice = augment(once, cfg, seed)  # same seed repeats the same flips
            np.testing.assert_array_equal(twice.intensity, pair.intensity)
            np.testing.assert_array_equal(twice.depth, pair.depth)

    def test_both_planes_share_the_geometric_transform(self, rng):
        # coordinate-encoding pattern: identical planes must stay identical
        # under any drawn rotation/scale/flip combination
        pattern = np.add.outer(np.arange(20) * 0.05, np.arange(20) * 0.001)
        grid = VoxelGrid((0, 0, 0.2), (0.005, 0.005, 0.005), (20, 20, 4))
        pair = RadarImagePair(pattern, pattern.copy(), grid, normalized=True)
        cfg = AugmentConfig(blur_sigma=0.0)  # blur off so the planes stay comparable
        for seed in (1, 7, 42, 1001):
            out = augment(pair, cfg, seed)
            np.testing.assert_array_equal(out.intensity, out.depth)

    def test_blur_touches_only_intensity(self):
        pair = one_hot_pair()
        out = augment(pair, geometry_only(blur_sigma=1.0), seed=3)
        assert not np.array_equal(out.intensity, pair.intensity)  # blurred
        np.testing.assert_array_equal(out.depth, pair.depth)  # depth untouched
        assert out.intensity.min() >= 0.0

    def test_rotation_scale_stay_in_canvas_dims(self):
        pair = one_hot_pair()
        out = augment(pair, AugmentConfig(), seed=5)
        assert out.intensity.shape == pair.intensity.shape
        assert out.depth.shape == pair.depth.shape

    def test_deterministic_in_seed(self):
        pair = one_hot_pair()
        a = augment(pair, AugmentConfig(), seed=9)
        b = augment(pair, AugmentConfig(), seed=9)
        np.testing.assert_array_equal(a.intensity, b.intensity)
        np.testing.assert_array_equal(a.depth, b.depth)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AugmentConfig(blur_sigma=-1.0)
        with pytest.raises(ValueError):
            AugmentConfig(rotation_deg=(30.0, 0.0))
        with pytest.raises(ValueError):
            AugmentConfig(scale_range=(0.0, 1.0))


class TestAugmentDirectory:
    def test_augments_every_manifest_entry(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=2)
        src = tmp_path / "src"
        generate_dataset(cfg, src)
        dst = tmp_path / "dst"
        stats_ = augment_directory(src, dst, seed=11)
        assert stats_["n_images"] == 4
        lines = (dst / MANIFEST_NAME).read_text().splitlines()
        assert len(lines) == 4
        for line in lines:
            rec = json.loads(line)
            assert (dst / rec["file"]).exists()
            assert "augment_seed" in rec

    def test_deterministic_given_seed(self, tmp_path):
        cfg = desk_config(tmp_path, labels="AB", samples=1)
        src = tmp_path / "src"
        generate_dataset(cfg, src)
        d1, d2 = tmp_path / "d1", tmp_path / "d2"
        augment_directory(src, d1, seed=4)
        augment_directory(src, d2, seed=4)
        assert tree_bytes(d1) == tree_bytes(d2)

    def test_empty_directory_rejected(self, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        with pytest.raises(ValueError, match="no .rsi"):
            augment_directory(empty, tmp_path / "out", seed=1)
