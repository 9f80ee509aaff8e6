"""End-to-end dataset generation and image-pair augmentation.

`generate_dataset` sweeps labeled meshes over seeded pose and material draws,
runs trace -> synthesize -> image for every sample and writes image pairs
plus a JSON-Lines manifest.  Runs are deterministic given the base seed and
resumable: existing files whose header seed matches are not recomputed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .formats import read_pair_header, save_pair, save_pair_previews
from .imaging import RadarImagePair, VoxelGrid, matched_filter, max_project, normalize_pair
from .raytracer import MaterialParams, TraceConfig, default_perception_radius, trace_paths
from .scene import (
    AntennaArray,
    RigidPose,
    Scene,
    TriangleMesh,
    apply_pose,
    build_planar_array,
    load_array_layout,
    load_mesh,
    resolve_array,
)
from .signal import SfcwConfig, synthesize_if

MANIFEST_NAME = "manifest.jsonl"
VALID_LABELS = tuple("ABCDEFGH")


@dataclass(frozen=True)
class PoseSampler:
    """Uniform viewing-angle ranges (degrees) and a fixed standoff (meters)."""

    azimuth_deg: tuple[float, float] = (-20.0, 20.0)
    elevation_deg: tuple[float, float] = (-20.0, 20.0)
    roll_deg: tuple[float, float] = (-10.0, 10.0)
    standoff_m: float = 0.30

    def __post_init__(self):
        for name in ("azimuth_deg", "elevation_deg", "roll_deg"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} range is inverted: ({lo}, {hi})")
        if self.standoff_m <= 0.0:
            raise ValueError("standoff_m must be positive")


@dataclass(frozen=True)
class GenerationConfig:
    classes: tuple[tuple[str, Path], ...]  # (label, mesh path)
    samples_per_class: int
    base_seed: int
    alpha_range: tuple[float, float]
    pose: PoseSampler
    array: AntennaArray
    trace_template: TraceConfig  # rng_seed is replaced per sample
    sfcw: SfcwConfig
    grid: VoxelGrid

    def __post_init__(self):
        labels = [label for label, _ in self.classes]
        if len(set(labels)) != len(labels):
            raise ValueError("class labels must be unique")
        bad = [l for l in labels if l not in VALID_LABELS]
        if bad:
            raise ValueError(f"labels must be in {''.join(VALID_LABELS)}, got {bad}")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        lo, hi = self.alpha_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"alpha_range must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})")

    @classmethod
    def from_file(cls, path) -> "GenerationConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"unreadable generation config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "GenerationConfig":
        base_dir = Path(base_dir)
        classes = tuple(
            (spec["label"], (base_dir / spec["mesh"]).resolve())
            for spec in raw["classes"]
        )
        pose = PoseSampler(
            azimuth_deg=tuple(raw.get("pose", {}).get("azimuth_deg", (-20.0, 20.0))),
            elevation_deg=tuple(raw.get("pose", {}).get("elevation_deg", (-20.0, 20.0))),
            roll_deg=tuple(raw.get("pose", {}).get("roll_deg", (-10.0, 10.0))),
            standoff_m=float(raw.get("pose", {}).get("standoff_m", 0.30)),
        )
        array = _resolve_array_spec(raw.get("array", {"builtin": "paper-94"}), base_dir)
        trace_raw = dict(raw.get("trace", {}))
        radius = trace_raw.get("perception_radius")
        trace_template = TraceConfig(
            rays_per_tx=int(trace_raw.get("rays_per_tx", 20000)),
            rng_seed=0,
            max_bounces=int(trace_raw.get("max_bounces", 3)),
            perception_radius=float(radius) if radius else default_perception_radius(array),
            amplitude_spreading=bool(trace_raw.get("amplitude_spreading", False)),
        )
        sfcw_raw = raw.get("sfcw")
        sfcw = SfcwConfig(**sfcw_raw) if sfcw_raw else SfcwConfig.default_band()
        grid_raw = raw.get("grid", {})
        counts = tuple(grid_raw.get("counts", (128, 128, 64)))
        spacing = grid_raw.get("spacing", (0.005, 0.005, 0.005))
        if np.isscalar(spacing):
            spacing = (float(spacing),) * 3
        if "origin" in grid_raw:
            grid = VoxelGrid(tuple(grid_raw["origin"]), tuple(spacing), counts)
        else:
            grid = VoxelGrid.centered((0.0, 0.0, pose.standoff_m), counts, spacing)
        return cls(
            classes=classes,
            samples_per_class=int(raw["samples_per_class"]),
            base_seed=int(raw["base_seed"]),
            alpha_range=tuple(raw.get("alpha_range", (0.1, 0.5))),
            pose=pose,
            array=array,
            trace_template=trace_template,
            sfcw=sfcw,
            grid=grid,
        )


def _resolve_array_spec(spec: dict, base_dir: Path) -> AntennaArray:
    if "layout" in spec:
        return load_array_layout(base_dir / spec["layout"])
    builtin = spec.get("builtin", "paper-94")
    if builtin == "paper-94":
        return resolve_array("paper-94")
    if builtin == "grid":
        return build_planar_array(
            rows=int(spec.get("rows", 2)),
            cols=int(spec.get("cols", 2)),
            pitch=float(spec.get("pitch", 0.02)),
            center=tuple(spec.get("center", (0.0, 0.0, 0.0))),
            rx_offset=tuple(spec.get("rx_offset", (0.01, 0.0, 0.0))),
        )
    raise ValueError(f"unknown array spec {spec!r}")


def sample_parameters(cfg: GenerationConfig, class_idx: int, sample_idx: int):
    """Deterministic per-sample draws: (sample_seed, pose dict, alpha, trace_seed)."""
    seq = np.random.SeedSequence([cfg.base_seed, class_idx, sample_idx])
    sample_seed = int(seq.generate_state(1, np.uint64)[0])
    rng = np.random.Generator(np.random.Philox(key=sample_seed))
    pose = {
        "azimuth_deg": float(rng.uniform(*cfg.pose.azimuth_deg)),
        "elevation_deg": float(rng.uniform(*cfg.pose.elevation_deg)),
        "roll_deg": float(rng.uniform(*cfg.pose.roll_deg)),
        "standoff_m": cfg.pose.standoff_m,
    }
    alpha = float(rng.uniform(*cfg.alpha_range))
    trace_seed = int(rng.integers(0, 2**63, dtype=np.uint64))
    return sample_seed, pose, alpha, trace_seed


def _pose_mesh(mesh: TriangleMesh, pose: dict) -> TriangleMesh:
    """Rotate about the mesh bbox center, then place that center at the standoff."""
    rot = RigidPose.from_euler_deg(
        pose["azimuth_deg"], pose["elevation_deg"], pose["roll_deg"]
    ).rotation
    lo, hi = mesh.bounding_box()
    center = 0.5 * (lo + hi)
    target = np.array([0.0, 0.0, pose["standoff_m"]])
    return apply_pose(mesh, RigidPose(rot, target - rot @ center))


def render_sample(
    mesh: TriangleMesh, cfg: GenerationConfig, pose: dict, alpha: float, trace_seed: int
) -> tuple[RadarImagePair, bool]:
    """Trace, synthesize and image one posed sample; returns (pair, zero_paths)."""
    posed = _pose_mesh(mesh, pose)
    scene = Scene(posed, cfg.array, MaterialParams(alpha))
    trace_cfg = TraceConfig(
        rays_per_tx=cfg.trace_template.rays_per_tx,
        rng_seed=trace_seed,
        max_bounces=cfg.trace_template.max_bounces,
        perception_radius=cfg.trace_template.perception_radius,
        amplitude_spreading=cfg.trace_template.amplitude_spreading,
    )
    paths = trace_paths(scene, trace_cfg)
    cube = synthesize_if(paths, cfg.sfcw)
    volume = matched_filter(cube, cfg.array, cfg.grid)
    pair = max_project(volume)
    return normalize_pair(pair), paths.zero_paths


def generate_dataset(
    cfg: GenerationConfig,
    out_dir,
    resume: bool = False,
    preview_png: bool = False,
    progress=None,
) -> dict:
    """Generate all samples and the manifest; returns run statistics.

    Samples are processed in (class, sample) order and the manifest is
    written by this single writer in that order, so reruns with the same
    base seed produce byte-identical outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meshes = {label: load_mesh(path) for label, path in cfg.classes}

    manifest_path = out_dir / MANIFEST_NAME
    n_written = 0
    n_skipped = 0
    n_zero = 0
    try:
        with open(manifest_path, "w", encoding="utf-8") as manifest:
            for class_idx, (label, _) in enumerate(cfg.classes):
                for sample_idx in range(cfg.samples_per_class):
                    sample_seed, pose, alpha, trace_seed = sample_parameters(
                        cfg, class_idx, sample_idx
                    )
                    fname = f"{label}_{sample_idx:05d}.rsi"
                    fpath = out_dir / fname
                    provenance = {
                        "seed": sample_seed,
                        "alpha": alpha,
                        "pose": pose,
                        "trace_seed": trace_seed,
                    }
                    reused = False
                    if resume and fpath.exists():
                        try:
                            header = read_pair_header(fpath)
                            reused = header.get("provenance", {}).get("seed") == sample_seed
                        except ValueError:
                            reused = False
                    if reused:
                        zero_paths = bool(read_pair_header(fpath)["provenance"].get("zero_paths"))
                        n_skipped += 1
                    else:
                        pair, zero_paths = render_sample(
                            meshes[label], cfg, pose, alpha, trace_seed
                        )
                        pair = RadarImagePair(
                            intensity=pair.intensity,
                            depth=pair.depth,
                            grid=pair.grid,
                            label=label,
                            normalized=pair.normalized,
                        )
                        if zero_paths:
                            warnings.warn(
                                f"sample {fname}: trace captured zero paths", stacklevel=2
                            )
                        provenance["zero_paths"] = zero_paths
                        save_pair(pair, fpath, provenance=provenance)
                        if preview_png:
                            save_pair_previews(pair, str(fpath.with_suffix("")))
                        n_written += 1
                    n_zero += int(zero_paths)
                    line = {
                        "file": fname,
                        "label": label,
                        "seed": sample_seed,
                        "alpha": alpha,
                        "pose": pose,
                        "zero_paths": bool(zero_paths),
                    }
                    manifest.write(json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n")
                    if progress is not None:
                        progress(label, sample_idx)
    except OSError as exc:
        raise RuntimeError(
            f"write failure under {out_dir} (manifest may be partial): {exc}"
        ) from exc
    return {
        "manifest": str(manifest_path),
        "n_samples": len(cfg.classes) * cfg.samples_per_class,
        "n_written": n_written,
        "n_skipped": n_skipped,
        "n_zero_paths": n_zero,
    }


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentConfig:
    """Augmentation ranges; flips fire with probability 0.5 when enabled."""

    flip_horizontal: bool = True
    flip_vertical: bool = True
    rotation_deg: tuple[float, float] = (0.0, 30.0)
    scale_range: tuple[float, float] = (0.70, 1.00)
    blur_sigma: float = 1.0  # px, intensity plane only

    def __post_init__(self):
        if self.blur_sigma < 0.0:
            raise ValueError("blur_sigma must be >= 0")
        if self.rotation_deg[1] < self.rotation_deg[0]:
            raise ValueError("rotation_deg range is inverted")
        if not (0.0 < self.scale_range[0] <= self.scale_range[1]):
            raise ValueError("scale_range must be positive and ordered")


def _geometric_transform(plane: np.ndarray, angle_deg: float, scale: float) -> np.ndarray:
    """Rotate then scale about the image center; bilinear, zero-padded."""
    if angle_deg == 0.0 and scale == 1.0:
        return plane.copy()
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    # output -> input map: undo the scale, then undo the rotation
    matrix = np.array([[c, -s], [s, c]]).T / scale
    center = (np.asarray(plane.shape, dtype=np.float64) - 1.0) / 2.0
    offset = center - matrix @ center
    return ndimage.affine_transform(
        plane, matrix, offset=offset, order=1, mode="constant", cval=0.0
    )


def augment(pair: RadarImagePair, cfg: AugmentConfig, seed: int) -> RadarImagePair:
    """Apply flips, rotation, scaling and intensity blur; deterministic in seed.

    Both planes receive the identical geometric transform; the Gaussian blur
    touches only the intensity plane so depth geometry stays metric.
    """
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2**128 - 1)))
    intensity = pair.intensity
    depth = pair.depth
    if cfg.flip_horizontal and rng.random() < 0.5:
        intensity = np.flip(intensity, axis=1)
        depth = np.flip(depth, axis=1)
    if cfg.flip_vertical and rng.random() < 0.5:
        intensity = np.flip(intensity, axis=0)
        depth = np.flip(depth, axis=0)
    angle = float(rng.uniform(*cfg.rotation_deg))
    scale = float(rng.uniform(*cfg.scale_range))
    intensity = _geometric_transform(np.ascontiguousarray(intensity), angle, scale)
    depth = _geometric_transform(np.ascontiguousarray(depth), angle, scale)
    if cfg.blur_sigma > 0.0:
        intensity = ndimage.gaussian_filter(intensity, cfg.blur_sigma)
    intensity = np.clip(intensity, 0.0, None)
    return RadarImagePair(
        intensity=intensity,
        depth=depth,
        grid=pair.grid,
        label=pair.label,
        normalized=pair.normalized,
    )


def augment_directory(in_dir, out_dir, seed: int, cfg: AugmentConfig | None = None) -> dict:
    """Augment every pair listed in a dataset directory into `out_dir`."""
    from .formats import load_pair  # local import to keep module load light

    cfg = cfg or AugmentConfig()
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_in = in_dir / MANIFEST_NAME
    if manifest_in.exists():
        lines = [json.loads(l) for l in manifest_in.read_text().splitlines() if l.strip()]
        files = [l["file"] for l in lines]
    else:
        files = sorted(p.name for p in in_dir.glob("*.rsi"))
        lines = [{"file": f} for f in files]
    if not files:
        raise ValueError(f"no .rsi pairs found under {in_dir}")
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as manifest:
        for idx, (fname, line) in enumerate(zip(files, lines)):
            pair, provenance = load_pair(in_dir / fname)
            aug_seed = int(np.random.SeedSequence([int(seed), idx]).generate_state(1, np.uint64)[0])
            out_pair = augment(pair, cfg, aug_seed)
            provenance = dict(provenance)
            provenance["augment_seed"] = aug_seed
            save_pair(out_pair, out_dir / fname, provenance=provenance)
            out_line = dict(line)
            out_line["augment_seed"] = aug_seed
            manifest.write(json.dumps(out_line, sort_keys=True, separators=(",", ":")) + "\n")
    return {"n_images": len(files), "manifest": str(out_dir / MANIFEST_NAME)}
