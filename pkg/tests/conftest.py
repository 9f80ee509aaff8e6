import numpy as np
import pytest

from radarsim.scene import AntennaArray, TriangleMesh


def make_plate(half_size=0.01, z=0.5, facing=-1) -> TriangleMesh:
    """Square plate in the z-plane, wound so the normal is (0, 0, facing)."""
    h = half_size
    verts = np.array([[-h, -h, z], [h, -h, z], [h, h, z], [-h, h, z]])
    tris = np.array([[0, 2, 1], [0, 3, 2]]) if facing < 0 else np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(verts, tris)


def monostatic_array(offset=0.0) -> AntennaArray:
    """One TX at the origin, one RX co-located (or offset along x)."""
    return AntennaArray(
        np.array([[0.0, 0.0, 0.0]]), np.array([[offset, 0.0, 0.0]]), name="mono"
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure compute."""
    from radarsim.imaging import VoxelGrid, matched_filter
    from radarsim.raytracer import MaterialParams, TraceConfig, trace_paths
    from radarsim.scene import Scene
    from radarsim.signal import SfcwConfig, synthesize_if

    mesh = make_plate(half_size=0.005, z=0.2)
    scene = Scene(mesh, monostatic_array(0.001), MaterialParams(0.5))
    cfg = TraceConfig(rays_per_tx=64, rng_seed=7, max_bounces=2, perception_radius=0.01)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        paths = trace_paths(scene, cfg)
    cube = synthesize_if(paths, SfcwConfig(f0=72e9, delta_f=1e8, n_steps=4))
    matched_filter(cube, scene.array, VoxelGrid.centered((0, 0, 0.2), (4, 4, 4), 0.01))
