"""Procedural demo meshes and a desk-scale generation config.

Hand meshes are external inputs; these primitives exist so the pipeline can
be exercised end to end (demos, smoke tests, CI) without any asset files.
All shapes are hand-sized (~0.1 m) and distinct enough to be separable in
reconstructed images.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scene import TriangleMesh

DEMO_LABELS = "ABCDEFGH"


def icosphere(radius: float = 0.05, subdivisions: int = 1) -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        faces = [
            f
            for (a, b, c) in faces
            for f in (
                (a, midpoint(a, b), midpoint(a, c)),
                (b, midpoint(b, c), midpoint(a, b)),
                (c, midpoint(a, c), midpoint(b, c)),
                (midpoint(a, b), midpoint(b, c), midpoint(a, c)),
            )
        ]
    return TriangleMesh(np.array(verts) * radius, np.array(faces, dtype=np.int32))


def box(size=(0.08, 0.06, 0.04)) -> TriangleMesh:
    sx, sy, sz = (s / 2 for s in size)
    v = np.array(
        [
            [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
            [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
        ]
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # -z
            [4, 5, 6], [4, 6, 7],  # +z
            [0, 1, 5], [0, 5, 4],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [1, 2, 6], [1, 6, 5],  # +x
            [3, 0, 4], [3, 4, 7],  # -x
        ],
        dtype=np.int32,
    )
    return TriangleMesh(v, f)


def cylinder(radius: float = 0.03, height: float = 0.09, segments: int = 24) -> TriangleMesh:
    ang = 2 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    bottom = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    verts = np.vstack([bottom, top, [[0, 0, -height / 2]], [[0, 0, height / 2]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [
            (i, j, segments + i), (j, segments + j, segments + i),  # wall
            (j, i, cb),  # bottom cap, wound to face -z
            (segments + i, segments + j, ct),  # top cap
        ]
    return TriangleMesh(verts, np.array(faces, dtype=np.int32))


def cone(radius: float = 0.04, height: float = 0.09, segments: int = 24) -> TriangleMesh:
    ang = 2 * np.pi * np.arange(segments) / segments
    base = np.column_stack(
        [radius * np.cos(ang), radius * np.sin(ang), np.full(segments, -height / 3)]
    )
    verts = np.vstack([base, [[0, 0, -height / 3]], [[0, 0, 2 * height / 3]]])
    cb, apex = segments, segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, apex), (j, i, cb)]
    return TriangleMesh(verts, np.array(faces, dtype=np.int32))


def _scaled(mesh: TriangleMesh, factors) -> TriangleMesh:
    return TriangleMesh(mesh.vertices * np.asarray(factors), mesh.triangles.copy())


def demo_mesh(label: str) -> TriangleMesh:
    """One distinct primitive per demo class label."""
    builders = {
        "A": lambda: icosphere(0.045, 1),
        "B": lambda: box((0.09, 0.06, 0.04)),
        "C": lambda: cylinder(0.028, 0.10),
        "D": lambda: cone(0.04, 0.10),
        "E": lambda: _scaled(icosphere(0.05, 1), (1.0, 0.6, 0.8)),
        "F": lambda: box((0.04, 0.04, 0.10)),
        "G": lambda: cylinder(0.045, 0.035),
        "H": lambda: _scaled(cone(0.035, 0.08), (1.0, 1.4, 1.0)),
    }
    if label not in builders:
        raise ValueError(f"no demo mesh for label {label!r} (have {DEMO_LABELS})")
    return builders[label]()


def write_obj(mesh: TriangleMesh, path) -> None:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def write_demo_assets(
    out_dir,
    samples_per_class: int = 2,
    rays_per_tx: int = 3000,
    base_seed: int = 1234,
) -> Path:
    """Write demo meshes plus a desk-scale generation config; returns the config path.

    The config uses a small offset-grid array and a coarse voxel grid so a
    full `generate` run stays in the minutes range on a laptop.
    """
    out_dir = Path(out_dir)
    mesh_dir = out_dir / "meshes"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    classes = []
    for label in DEMO_LABELS:
        path = mesh_dir / f"{label.lower()}.obj"
        write_obj(demo_mesh(label), path)
        classes.append({"label": label, "mesh": str(path.relative_to(out_dir))})
    config = {
        "classes": classes,
        "samples_per_class": samples_per_class,
        "base_seed": base_seed,
        "alpha_range": [0.1, 0.5],
        "pose": {
            "azimuth_deg": [-20.0, 20.0],
            "elevation_deg": [-20.0, 20.0],
            "roll_deg": [-10.0, 10.0],
            "standoff_m": 0.30,
        },
        "array": {"builtin": "grid", "rows": 2, "cols": 2, "pitch": 0.06,
                  "center": [-0.045, -0.045, 0.0], "rx_offset": [0.03, 0.03, 0.0]},
        "trace": {"rays_per_tx": rays_per_tx, "max_bounces": 2,
                  "perception_radius": 0.02, "amplitude_spreading": False},
        "sfcw": {"f0": 72e9, "delta_f": 10e9 / 127.0, "n_steps": 128},
        "grid": {"counts": [48, 48, 24], "spacing": [0.005, 0.005, 0.005]},
    }
    config_path = out_dir / "generation.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")
    return config_path
