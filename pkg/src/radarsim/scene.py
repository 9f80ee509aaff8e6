"""Scene geometry: triangle meshes, rigid poses and antenna arrays.

All coordinates are in meters.  Meshes carry per-facet unit normals derived
from the winding order of each triangle; normals stored in input files are
ignored so that the reflection law always sees the same orientation the
intersection kernel does.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_NORMAL_TOL = 1e-9
_MIN_TRIANGLE_AREA = 1e-12  # m^2
_MIN_ELEMENT_SEPARATION = 1e-9  # m


class MeshError(ValueError):
    """Raised for unreadable, malformed or degenerate mesh input."""


def _as_points(a, name: str) -> np.ndarray:
    pts = np.asarray(a, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _facet_geometry(vertices: np.ndarray, triangles: np.ndarray):
    """Normals (from winding order) and areas for each triangle."""
    a = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - a
    e2 = vertices[triangles[:, 2]] - a
    cross = np.cross(e1, e2)
    norms = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norms
    bad = np.flatnonzero(areas <= _MIN_TRIANGLE_AREA)
    if bad.size:
        raise MeshError(
            f"degenerate triangle {bad[0]} (area {areas[bad[0]]:.3e} m^2 <= {_MIN_TRIANGLE_AREA:g} m^2)"
        )
    normals = cross / norms[:, None]
    return normals, areas


@dataclass(frozen=True)
class TriangleMesh:
    """Posed triangle-mesh surface with derived per-facet unit normals.

    Immutable after construction; the backing arrays are marked read-only so
    a mesh can be shared freely across worker threads.
    """

    vertices: np.ndarray  # (V, 3) float64, meters
    triangles: np.ndarray  # (T, 3) int32 indices into vertices
    normals: np.ndarray = field(init=False)  # (T, 3) unit vectors
    areas: np.ndarray = field(init=False)  # (T,) m^2

    def __post_init__(self):
        vertices = _as_points(self.vertices, "vertices")
        triangles = np.asarray(self.triangles, dtype=np.int32)
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"triangles must have shape (T, 3), got {triangles.shape}")
        if triangles.shape[0] == 0:
            raise MeshError("empty mesh: no triangles")
        if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
            raise MeshError(
                f"triangle vertex index out of range (vertex count {len(vertices)})"
            )
        normals, areas = _facet_geometry(vertices, triangles)
        object.__setattr__(self, "vertices", _freeze(vertices))
        object.__setattr__(self, "triangles", _freeze(triangles))
        object.__setattr__(self, "normals", _freeze(normals))
        object.__setattr__(self, "areas", _freeze(areas))

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """Center and radius of the AABB-midpoint bounding sphere."""
        lo, hi = self.bounding_box()
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(self.vertices - center, axis=1).max())
        return center, radius


@dataclass(frozen=True)
class RigidPose:
    """Proper rigid transform v -> R @ v + t."""

    rotation: np.ndarray  # (3, 3) orthonormal, det +1
    translation: np.ndarray  # (3,) meters

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=_NORMAL_TOL, rtol=0.0):
            raise ValueError("rotation is not orthonormal (R^T R != I within 1e-9)")
        if abs(np.linalg.det(r) - 1.0) > _NORMAL_TOL:
            raise ValueError("rotation must be proper (det R = +1 within 1e-9)")
        object.__setattr__(self, "rotation", _freeze(r))
        object.__setattr__(self, "translation", _freeze(t))

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_euler_deg(
        cls,
        azimuth: float = 0.0,
        elevation: float = 0.0,
        roll: float = 0.0,
        translation=(0.0, 0.0, 0.0),
    ) -> "RigidPose":
        """Pose from viewing angles: R = Ry(azimuth) @ Rx(elevation) @ Rz(roll)."""
        az, el, ro = np.deg2rad([azimuth, elevation, roll])
        ca, sa = np.cos(az), np.sin(az)
        ce, se = np.cos(el), np.sin(el)
        cr, sr = np.cos(ro), np.sin(ro)
        ry = np.array([[ca, 0, sa], [0, 1, 0], [-sa, 0, ca]])
        rx = np.array([[1, 0, 0], [0, ce, -se], [0, se, ce]])
        rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
        return cls(ry @ rx @ rz, np.asarray(translation, dtype=np.float64))

    def compose(self, other: "RigidPose") -> "RigidPose":
        """Pose applying `other` first, then `self`."""
        return RigidPose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T.copy()
        return RigidPose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


@dataclass(frozen=True)
class AntennaArray:
    """TX and RX element positions defining channels and the imaging aperture."""

    tx_positions: np.ndarray  # (T, 3) meters
    rx_positions: np.ndarray  # (R, 3) meters
    name: str = "array"

    def __post_init__(self):
        for attr in ("tx_positions", "rx_positions"):
            pts = _as_points(getattr(self, attr), attr)
            if len(pts) == 0:
                raise ValueError(f"{attr} must not be empty")
            if len(pts) > 1:
                d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
                d[np.diag_indices(len(pts))] = np.inf
                if d.min() <= _MIN_ELEMENT_SEPARATION:
                    raise ValueError(f"{attr} contains coincident elements")
            object.__setattr__(self, attr, _freeze(pts))

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    @property
    def n_channels(self) -> int:
        return self.n_tx * self.n_rx

    def min_rx_pitch(self) -> float:
        """Smallest RX element spacing; inf for a single-element array."""
        pts = self.rx_positions
        if len(pts) < 2:
            return np.inf
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        d[np.diag_indices(len(pts))] = np.inf
        return float(d.min())

    def aperture(self) -> float:
        """Bounding-box diagonal over all elements."""
        pts = np.vstack([self.tx_positions, self.rx_positions])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


@dataclass(frozen=True)
class Scene:
    """A posed mesh observed by an antenna array with one material setting."""

    mesh: TriangleMesh
    array: AntennaArray
    material: "MaterialParams"

    def __post_init__(self):
        lo, hi = self.mesh.bounding_box()
        elements = np.vstack([self.array.tx_positions, self.array.rx_positions])
        inside = np.all((elements >= lo) & (elements <= hi), axis=1)
        if inside.any():
            raise ValueError(
                f"antenna element {int(np.flatnonzero(inside)[0])} lies inside the mesh bounding box"
            )


# ---------------------------------------------------------------------------
# Mesh loading
# ---------------------------------------------------------------------------

def load_mesh(path, fmt: str | None = None) -> TriangleMesh:
    """Load a triangle mesh from Wavefront OBJ or binary STL.

    Positions are interpreted in meters.  Normals are recomputed from the
    winding order; any normals present in the file are ignored.

    Args:
        path: file to read.
        fmt: "obj" or "stl"; inferred from the suffix when omitted.
    """
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    if fmt is None:
        fmt = path.suffix.lower().lstrip(".")
    fmt = fmt.lower()
    if fmt == "obj":
        return _load_obj(path)
    if fmt == "stl":
        return _load_stl_binary(path)
    raise MeshError(f"unsupported mesh format {fmt!r} (expected 'obj' or 'stl')")


def _load_obj(path: Path) -> TriangleMesh:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise MeshError(f"unreadable mesh file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"{path}:{lineno}: malformed vertex record {raw!r}")
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: malformed vertex record {raw!r}") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise MeshError(f"{path}:{lineno}: face needs at least 3 vertices")
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    i = int(head)
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: malformed face token {token!r}") from exc
                if i < 0:  # negative indices are relative to the current vertex list
                    i = len(vertices) + 1 + i
                if i < 1 or i > len(vertices):
                    raise MeshError(f"{path}:{lineno}: face index {token!r} out of range")
                idx.append(i - 1)
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                faces.append([idx[0], idx[k], idx[k + 1]])
        # all other records (vn, vt, o, g, usemtl, ...) are ignored
    if not faces:
        raise MeshError(f"{path}: empty mesh (no faces)")
    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int32))


def _load_stl_binary(path: Path) -> TriangleMesh:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise MeshError(f"unreadable mesh file {path}: {exc}") from exc
    if len(blob) < 84:
        raise MeshError(f"{path}: truncated binary STL (header missing)")
    if blob[:5] == b"solid" and b"facet" in blob[:200]:
        raise MeshError(f"{path}: looks like ASCII STL; only binary STL is supported")
    (count,) = struct.unpack_from("<I", blob, 80)
    expected = 84 + 50 * count
    if len(blob) < expected:
        raise MeshError(f"{path}: truncated binary STL ({len(blob)} bytes, expected {expected})")
    if count == 0:
        raise MeshError(f"{path}: empty mesh (no facets)")
    records = np.frombuffer(blob, dtype=np.uint8, count=50 * count, offset=84)
    records = records.reshape(count, 50)
    # 12 float32 per record: file normal (ignored) + 3 vertices
    floats = records[:, :48].copy().view("<f4").reshape(count, 12)
    tri_vertices = floats[:, 3:12].astype(np.float64).reshape(count * 3, 3)
    triangles = np.arange(count * 3, dtype=np.int32).reshape(count, 3)
    return TriangleMesh(tri_vertices, triangles)


# ---------------------------------------------------------------------------
# Posing
# ---------------------------------------------------------------------------

def apply_pose(mesh: TriangleMesh, pose: RigidPose) -> TriangleMesh:
    """Rigidly transform a mesh; normals are re-derived from the posed vertices."""
    return TriangleMesh(pose.apply(mesh.vertices), mesh.triangles.copy())


# ---------------------------------------------------------------------------
# Antenna array construction
# ---------------------------------------------------------------------------

PAPER94_NAME = "paper-94"
_PAPER94_SIDE = 48  # 48x48 perimeter ring -> 188 slots -> 94 per role
_PAPER94_PITCH = 0.002  # m, element-to-element along the ring


def build_planar_array(
    rows: int,
    cols: int,
    pitch: float,
    center=(0.0, 0.0, 0.0),
    split="rx-offset",
    rx_offset=(0.01, 0.0, 0.0),
    name: str | None = None,
) -> AntennaArray:
    """Build a planar array in the z = center[2] plane (boresight +z).

    With ``split="rx-offset"`` the TX elements form a rows x cols grid anchored
    at `center` (positions center + (col*pitch, row*pitch, 0)) and the RX
    elements form the same grid displaced by `rx_offset`.

    ``split="paper-94"`` ignores rows/cols/rx_offset and returns the default
    94 TX + 94 RX layout: a single rectangular perimeter ring of 188 elements
    at `pitch` spacing with TX and RX alternating along the ring (two
    interleaved rectangular frames).  The true element placement of the
    hardware this approximates is not public; this layout is an artifact
    choice and is recorded in output headers via the array name.
    """
    if pitch <= 0.0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    if split == PAPER94_NAME:
        return _paper94_array(center, pitch, name or PAPER94_NAME)
    if split != "rx-offset":
        raise ValueError(f"unknown layout spec {split!r}")
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
    grid = np.column_stack(
        [jj.ravel() * pitch, ii.ravel() * pitch, np.zeros(rows * cols)]
    )
    tx = grid + center
    rx = grid + center + np.asarray(rx_offset, dtype=np.float64).reshape(3)
    if np.min(np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=2)) <= _MIN_ELEMENT_SEPARATION:
        raise ValueError("TX and RX grids overlap; choose a non-degenerate rx_offset")
    return AntennaArray(tx, rx, name or f"grid-{rows}x{cols}")


def _paper94_array(center: np.ndarray, pitch: float, name: str) -> AntennaArray:
    """Perimeter ring of a 48x48 grid, roles alternating element by element."""
    side = _PAPER94_SIDE
    half = 0.5 * (side - 1) * pitch
    ring = []
    for j in range(side):  # bottom edge, left -> right
        ring.append((j, 0))
    for i in range(1, side):  # right edge, bottom -> top
        ring.append((side - 1, i))
    for j in range(side - 2, -1, -1):  # top edge, right -> left
        ring.append((j, side - 1))
    for i in range(side - 2, 0, -1):  # left edge, top -> bottom
        ring.append((0, i))
    pts = np.array(
        [(j * pitch - half, i * pitch - half, 0.0) for j, i in ring], dtype=np.float64
    )
    pts += center
    tx = pts[0::2]
    rx = pts[1::2]
    assert len(tx) == 94 and len(rx) == 94
    return AntennaArray(tx, rx, name)


def save_array_layout(array: AntennaArray, path) -> None:
    """Write element positions as JSON: {"tx": [[x,y,z],...], "rx": [...]}."""
    payload = {
        "name": array.name,
        "tx": array.tx_positions.tolist(),
        "rx": array.rx_positions.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_array_layout(path) -> AntennaArray:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"unreadable array layout {path}: {exc}") from exc
    if not isinstance(payload, dict) or "tx" not in payload or "rx" not in payload:
        raise ValueError(f"array layout {path} must contain 'tx' and 'rx' position lists")
    return AntennaArray(
        np.asarray(payload["tx"], dtype=np.float64),
        np.asarray(payload["rx"], dtype=np.float64),
        name=str(payload.get("name", path.stem)),
    )


def resolve_array(spec: str) -> AntennaArray:
    """Resolve an array spec: the builtin layout name or a layout JSON path."""
    if spec == PAPER94_NAME:
        return build_planar_array(1, 1, _PAPER94_PITCH, split=PAPER94_NAME)
    return load_array_layout(spec)
