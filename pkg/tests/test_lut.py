"""Lookup table construction, interpolation, inversion, and persistence."""

import numpy as np
import pytest

from sfdoptics import build_lut, load_lut, lut_forward, lut_invert, save_lut
from sfdoptics.errors import InvalidConfigError, NonMonotonicError, OutOfGridError

# forward model of the reference phantom frozen from a separate
# 1e7-photon run (seed 12345); the session table must agree within 1%
PHANTOM = (0.0239, 0.957)
PHANTOM_RD_DC = 0.48313916883219404
PHANTOM_RD_AC = 0.09283690017088696


class TestBuildLut:
    def test_default_grid_shape(self, default_lut):
        assert default_lut.mua_grid.shape == (128,)
        assert default_lut.musp_grid.shape == (128,)
        assert default_lut.rd_dc.shape == (128, 128)
        assert default_lut.rd_ac.shape == (128, 128)
        assert default_lut.fx_ac == 0.2

    def test_grids_strictly_positive_and_increasing(self, default_lut):
        for grid in (default_lut.mua_grid, default_lut.musp_grid):
            assert grid[0] > 0.0
            assert np.all(np.diff(grid) > 0.0)

    def test_reflectances_within_physical_range(self, default_lut):
        for table in (default_lut.rd_dc, default_lut.rd_ac):
            assert table.min() > 0.0
            assert table.max() < 1.0

    def test_dc_monotone_in_both_properties(self, default_lut):
        rd = default_lut.rd_dc
        assert np.all(np.diff(rd, axis=0) < 0.0)  # more absorption, less signal
        assert np.all(np.diff(rd, axis=1) > 0.0)  # more scattering, more signal

    def test_custom_grid(self, white):
        mua = np.geomspace(0.005, 0.1, 6)
        musp = np.geomspace(0.5, 2.0, 5)
        lut = build_lut(None, mua, musp, fx_ac=0.15, white=white)
        assert lut.rd_dc.shape == (6, 5)
        assert lut.fx_ac == 0.15
        np.testing.assert_array_equal(lut.mua_grid, mua)

    def test_rejects_nonpositive_grid(self, white):
        with pytest.raises(InvalidConfigError):
            build_lut(None, np.array([0.0, 0.01]), np.array([1.0, 2.0]), white=white)

    def test_rejects_unsorted_grid(self, white):
        with pytest.raises(NonMonotonicError):
            build_lut(None, np.array([0.02, 0.01]), np.array([1.0, 2.0]), white=white)


class TestForward:
    def test_matches_frozen_phantom_reference(self, default_lut):
        rd_dc, rd_ac = lut_forward(default_lut, *PHANTOM)
        assert rd_dc == pytest.approx(PHANTOM_RD_DC, rel=0.01)
        assert rd_ac == pytest.approx(PHANTOM_RD_AC, rel=0.01)

    def test_exact_at_grid_nodes(self, default_lut):
        i, j = 40, 90
        mua = float(default_lut.mua_grid[i])
        musp = float(default_lut.musp_grid[j])
        rd_dc, rd_ac = lut_forward(default_lut, mua, musp)
        assert rd_dc == pytest.approx(float(default_lut.rd_dc[i, j]), rel=1e-12)
        assert rd_ac == pytest.approx(float(default_lut.rd_ac[i, j]), rel=1e-12)

    def test_outside_grid_rejected(self, default_lut):
        with pytest.raises(OutOfGridError):
            lut_forward(default_lut, 1e-6, 1.0)


class TestInvert:
    def test_round_trip_on_random_interior_points(self, default_lut):
        rng = np.random.default_rng(17)
        mua_lo, mua_hi = default_lut.mua_grid[2], default_lut.mua_grid[-3]
        musp_lo, musp_hi = default_lut.musp_grid[2], default_lut.musp_grid[-3]
        worst = 0.0
        for _ in range(200):
            mua = float(rng.uniform(mua_lo, mua_hi))
            musp = float(rng.uniform(musp_lo, musp_hi))
            rd_dc, rd_ac = lut_forward(default_lut, mua, musp)
            mua_r, musp_r, ok = lut_invert(default_lut, rd_dc, rd_ac)
            assert ok
            worst = max(worst, abs(mua_r - mua) / mua, abs(musp_r - musp) / musp)
        assert worst <= 0.01

    def test_phantom_round_trip_tight(self, default_lut):
        rd_dc, rd_ac = lut_forward(default_lut, *PHANTOM)
        mua, musp, ok = lut_invert(default_lut, rd_dc, rd_ac)
        assert ok
        assert mua == pytest.approx(PHANTOM[0], rel=0.005)
        assert musp == pytest.approx(PHANTOM[1], rel=0.005)

    def test_unreachable_reflectance_flagged_invalid(self, default_lut):
        mua, musp, ok = lut_invert(default_lut, 0.99, 0.9)
        assert not ok


class TestPersistence:
    def test_save_load_round_trip(self, default_lut, tmp_path):
        p = save_lut(default_lut, tmp_path / "table.npz")
        back = load_lut(p)
        np.testing.assert_array_equal(back.mua_grid, default_lut.mua_grid)
        np.testing.assert_array_equal(back.musp_grid, default_lut.musp_grid)
        np.testing.assert_array_equal(back.rd_dc, default_lut.rd_dc)
        np.testing.assert_array_equal(back.rd_ac, default_lut.rd_ac)
        assert back.fx_ac == default_lut.fx_ac
        assert back.photon_count == default_lut.photon_count
        assert back.rng_seed == default_lut.rng_seed
        assert back.anisotropy_g == default_lut.anisotropy_g
