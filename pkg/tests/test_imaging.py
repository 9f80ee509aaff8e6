import numpy as np
import pytest

from radarsim import SPEED_OF_LIGHT
from radarsim.imaging import (
    RadarImagePair,
    VoxelGrid,
    VoxelVolume,
    embed_image,
    matched_filter,
    max_project,
    normalize_pair,
)
from radarsim.scene import AntennaArray
from radarsim.signal import IFDataCube, SfcwConfig


def forward_cube(points, array, cfg, weights=None):
    """Direct Eq.-style forward model for point scatterers (oracle input)."""
    points = np.atleast_2d(points)
    weights = np.ones(len(points)) if weights is None else np.asarray(weights)
    values = np.zeros((array.n_tx, array.n_rx, cfg.n_steps), dtype=np.complex128)
    freqs = cfg.frequencies
    for ti, txp in enumerate(array.tx_positions):
        for ri, rxp in enumerate(array.rx_positions):
            for w, p in zip(weights, points):
                d = np.linalg.norm(p - txp) + np.linalg.norm(p - rxp)
                values[ti, ri] += w * np.exp(-2j * np.pi * freqs * d / cfg.c)
    return IFDataCube(values, cfg)


def brute_force_matched_filter(cube, array, voxels):
    """Reference triple-sum backprojection at arbitrary points (oracle)."""
    cfg = cube.config
    freqs = cfg.frequencies
    out = np.zeros(len(voxels), dtype=np.complex128)
    for ti, txp in enumerate(array.tx_positions):
        for ri, rxp in enumerate(array.rx_positions):
            for vi, p in enumerate(voxels):
                d = np.linalg.norm(p - txp) + np.linalg.norm(p - rxp)
                out[vi] += np.sum(cube.values[ti, ri] * np.exp(2j * np.pi * freqs * d / cfg.c))
    return np.abs(out)


def small_array():
    # 2 cm pitch keeps the sparse-array grating lobes (~6 cm at 0.3 m range)
    # outside the test grids
    xs = (np.arange(2) - 0.5) * 0.02
    tx = np.array([[x, y, 0.0] for x in xs for y in xs])
    rx = tx + np.array([0.01, 0.01, 0.0])
    return AntennaArray(tx, rx, "2x2")


class TestVoxelGrid:
    def test_centered_construction(self):
        grid = VoxelGrid.centered((0, 0, 0.3), (5, 5, 3), 0.01)
        assert grid.origin == (-0.02, -0.02, 0.29)
        assert grid.z_min == pytest.approx(0.29)
        assert grid.z_max == pytest.approx(0.31)

    def test_validation(self):
        with pytest.raises(ValueError):
            VoxelGrid((0, 0, 0), (0.0, 0.01, 0.01), (2, 2, 2))
        with pytest.raises(ValueError):
            VoxelGrid((0, 0, 0), (0.01, 0.01, 0.01), (0, 2, 2))

    def test_voxel_centers_order(self):
        grid = VoxelGrid((0, 0, 0), (1, 1, 1), (2, 2, 2))
        centers = grid.voxel_centers()
        # C order, z fastest
        np.testing.assert_array_equal(centers[0], [0, 0, 0])
        np.testing.assert_array_equal(centers[1], [0, 0, 1])
        np.testing.assert_array_equal(centers[2], [0, 1, 0])


class TestMatchedFilter:
    def test_point_scatterer_peaks_at_true_voxel(self):
        cfg = SfcwConfig.default_band()
        array = small_array()
        p = np.array([0.006, -0.004, 0.297])
        cube = forward_cube(p, array, cfg)
        grid = VoxelGrid.centered((0, 0, 0.30), (24, 24, 24), 0.005)
        vol = matched_filter(cube, array, grid)
        idx = np.unravel_index(np.argmax(vol.values), vol.values.shape)
        true_idx = tuple(
            int(round((p[i] - grid.origin[i]) / grid.spacing[i])) for i in range(3)
        )
        assert idx == true_idx

    def test_matches_brute_force_oracle(self, rng):
        cfg = SfcwConfig(f0=72e9, delta_f=10e9 / 127.0, n_steps=16)
        array = small_array()
        cube = forward_cube(np.array([[0.0, 0.01, 0.31]]), array, cfg)
        grid = VoxelGrid.centered((0, 0, 0.30), (3, 3, 3), 0.01)
        vol = matched_filter(cube, array, grid)
        ref = brute_force_matched_filter(cube, array, grid.voxel_centers())
        np.testing.assert_allclose(vol.values.ravel(), ref, rtol=1e-9)

    def test_zero_cube_gives_zero_volume(self):
        cfg = SfcwConfig.default_band()
        array = small_array()
        cube = IFDataCube(np.zeros((4, 4, 128), dtype=np.complex128), cfg)
        vol = matched_filter(cube, array, VoxelGrid.centered((0, 0, 0.3), (4, 4, 4), 0.01))
        assert np.all(vol.values == 0.0)

    def test_homogeneity_in_the_cube(self):
        # |MF| of a scaled cube scales exactly; complex linearity is checked
        # against the brute-force oracle above
        cfg = SfcwConfig(f0=72e9, delta_f=10e9 / 127.0, n_steps=32)
        array = small_array()
        cube = forward_cube(np.array([[0.0, 0.0, 0.3]]), array, cfg)
        grid = VoxelGrid.centered((0, 0, 0.3), (4, 4, 4), 0.01)
        base = matched_filter(cube, array, grid).values
        scaled = matched_filter(IFDataCube(2.5 * cube.values, cfg), array, grid).values
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-9)

    def test_additivity_through_complex_field(self, rng):
        # linearity of the underlying correlation: MF values of a sum of
        # cubes match the sum computed by the independent oracle
        cfg = SfcwConfig(f0=72e9, delta_f=10e9 / 127.0, n_steps=8)
        array = small_array()
        va = rng.normal(size=(4, 4, 8)) + 1j * rng.normal(size=(4, 4, 8))
        vb = rng.normal(size=(4, 4, 8)) + 1j * rng.normal(size=(4, 4, 8))
        grid = VoxelGrid.centered((0, 0, 0.3), (3, 3, 1), 0.01)
        got = matched_filter(IFDataCube(va + vb, cfg), array, grid).values.ravel()
        ref = brute_force_matched_filter(IFDataCube(va + vb, cfg), array, grid.voxel_centers())
        np.testing.assert_allclose(got, ref, rtol=1e-9)

    def test_dimension_mismatch(self):
        cfg = SfcwConfig.default_band()
        cube = IFDataCube(np.zeros((2, 2, 128), dtype=np.complex128), cfg)
        with pytest.raises(ValueError, match="match"):
            matched_filter(cube, small_array(), VoxelGrid.centered((0, 0, 0.3), (2, 2, 2), 0.01))


class TestMaxProject:
    def test_one_hot_volume(self):
        grid = VoxelGrid((0, 0, 0.2), (0.005, 0.005, 0.004), (4, 5, 8))
        values = np.zeros((4, 5, 8))
        values[2, 3, 5] = 7.0
        pair = max_project(VoxelVolume(grid, values))
        assert pair.intensity[2, 3] == 7.0
        assert np.count_nonzero(pair.intensity) == 1
        assert pair.depth[2, 3] == pytest.approx(0.2 + 5 * 0.004)

    def test_constant_volume_ties_break_to_zmin(self):
        grid = VoxelGrid((0, 0, 0.1), (0.01, 0.01, 0.01), (3, 3, 4))
        pair = max_project(VoxelVolume(grid, np.ones((3, 3, 4))))
        np.testing.assert_array_equal(pair.intensity, np.ones((3, 3)))
        np.testing.assert_allclose(pair.depth, grid.z_min)

    def test_nz1_volume_is_identity(self, rng):
        grid = VoxelGrid((0, 0, 0.5), (0.01, 0.01, 0.01), (6, 7, 1))
        image = rng.uniform(size=(6, 7))
        pair = max_project(embed_image(image, grid))
        np.testing.assert_array_equal(pair.intensity, image)
        np.testing.assert_allclose(pair.depth, 0.5)


class TestNormalizePair:
    def test_scales_intensity_max_to_one(self):
        grid = VoxelGrid((0, 0, 0), (0.01, 0.01, 0.01), (2, 2, 2))
        pair = RadarImagePair(np.array([[10.0, 5.0], [0.0, 2.5]]), np.zeros((2, 2)), grid)
        out = normalize_pair(pair)
        assert out.intensity.max() == 1.0
        np.testing.assert_allclose(out.intensity, [[1.0, 0.5], [0.0, 0.25]])
        assert out.normalized

    def test_all_zero_intensity_stays_zero(self):
        grid = VoxelGrid((0, 0, 0), (0.01, 0.01, 0.01), (2, 2, 2))
        out = normalize_pair(RadarImagePair(np.zeros((2, 2)), np.zeros((2, 2)), grid))
        assert np.all(out.intensity == 0.0)
        assert np.all(np.isfinite(out.intensity))

    def test_depth_affine_endpoints(self):
        grid = VoxelGrid((0, 0, 0.2), (0.01, 0.01, 0.01), (2, 2, 5))
        depth = np.full((2, 2), grid.z_min)
        out = normalize_pair(RadarImagePair(np.ones((2, 2)), depth, grid))
        np.testing.assert_array_equal(out.depth, np.zeros((2, 2)))
        depth_max = np.full((2, 2), grid.z_max)
        out2 = normalize_pair(RadarImagePair(np.ones((2, 2)), depth_max, grid))
        np.testing.assert_allclose(out2.depth, 1.0)

    def test_degenerate_z_span_maps_to_zero(self):
        grid = VoxelGrid((0, 0, 0.2), (0.01, 0.01, 0.01), (2, 2, 1))
        out = normalize_pair(RadarImagePair(np.ones((2, 2)), np.full((2, 2), 0.2), grid))
        np.testing.assert_array_equal(out.depth, np.zeros((2, 2)))


class TestValidation:
    def test_negative_volume_rejected(self):
        grid = VoxelGrid((0, 0, 0), (0.01, 0.01, 0.01), (2, 2, 2))
        with pytest.raises(ValueError, match="non-negative"):
            VoxelVolume(grid, -np.ones((2, 2, 2)))

    def test_pair_shape_mismatch(self):
        grid = VoxelGrid((0, 0, 0), (0.01, 0.01, 0.01), (2, 2, 2))
        with pytest.raises(ValueError, match="equal shape"):
            RadarImagePair(np.zeros((2, 2)), np.zeros((3, 2)), grid)
