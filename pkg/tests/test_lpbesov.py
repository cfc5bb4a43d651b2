import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracwave import lpbesov as lp
from fracwave import spectral as sp
from fracwave.errors import BandUnresolvable, TailDominates


class TestWindows:
    def test_cutoff_values(self):
        r = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 7.0])
        assert np.array_equal(lp.lp_cutoff(r), [1, 1, 1, 0.5, 0, 0])

    def test_cutoff_monotone(self):
        r = np.linspace(0, 3, 3001)
        assert np.all(np.diff(lp.lp_cutoff(r)) <= 0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6))
    def test_partition_of_unity(self, r):
        total = sum(lp.lp_window(r, 2.0**j) for j in range(-30, 30))
        assert abs(total - 1) < 1e-14

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6))
    def test_square_sum_bounds(self, r):
        sq = sum(lp.lp_window(r, 2.0**j) ** 2 for j in range(-30, 30))
        assert 0.5 - 1e-14 <= sq <= 1 + 1e-14

    @pytest.mark.parametrize("N", [0.25, 1.0, 8.0])
    def test_support_and_peak(self, N):
        r = np.linspace(0, 4 * N, 4001)
        w = lp.lp_window(r, N)
        assert np.all(w[(r <= N / 2) | (r >= 2 * N)] == 0)
        # exp(-1/x) underflows right at the edges
        assert np.all(w[(r > 0.55 * N) & (r < 1.9 * N)] > 0)
        assert lp.lp_window(N, N) == 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 100), st.integers(-5, 5))
    def test_dilation(self, r, j):
        N = 2.0**j
        assert lp.lp_window(r * N, N) == pytest.approx(lp.lp_window(r), abs=1e-15)

    def test_bad_N(self):
        with pytest.raises(ValueError):
            lp.lp_window(1.0, 0.0)


class TestBands:
    def test_of(self):
        assert lp.DyadicBand.of(0.25).j == -2
        assert lp.DyadicBand.of(8).support == (4.0, 16.0)
        with pytest.raises(ValueError):
            lp.DyadicBand.of(3.0)

    def test_resolvable(self):
        g = sp.Grid(1, 2 * math.pi * 4, 256)
        bands = lp.resolvable_bands(g)
        assert [b.N for b in bands] == [0.5, 1, 2, 4, 8, 16]

    def test_unresolvable(self):
        g = sp.Grid(1, 64.0, 128)
        f = sp.preset("gaussian", g)
        with pytest.raises(BandUnresolvable):
            lp.lp_project(f, lp.DyadicBand.of(64))
        with pytest.raises(BandUnresolvable):
            lp.lp_project(f, lp.DyadicBand.of(2.0**-6))


@pytest.fixture(scope="module")
def field():
    return sp.preset("gaussian", sp.Grid(2, 64.0, 256))


class TestProjection:
    def test_sum_reconstructs(self, field):
        bands = lp.resolvable_bands(field.grid)
        total = sum(lp.lp_project(field, b).samples for b in bands)
        # the windows telescope to eta(xi/N_max) - eta(2 xi/N_min)
        lo, hi = bands[0].N, bands[-1].N
        ref = sp.apply_multiplier(
            field, lambda xi: lp.lp_cutoff(xi / hi) - lp.lp_cutoff(2 * xi / lo))
        assert np.max(np.abs(total - ref.samples)) < 1e-13

    def test_almost_orthogonal(self, field):
        a = lp.lp_project(field, lp.DyadicBand.of(0.5))
        b = lp.lp_project(field, lp.DyadicBand.of(2.0))
        assert abs(np.vdot(a.samples, b.samples)) < 1e-13

    def test_single_band_norm(self):
        g = sp.Grid(1, 256.0, 1024)
        N = 2.0
        fh = sp.Field(g, lp.lp_window(g.xi_magnitude(), N), "frequency")
        f = sp.inverse_transform(fh)
        res = lp.besov_norm(f, lp.BesovSpec(0.5, 2, 2), tail_tolerance=0.2)
        nonzero = {k for k, v in res.terms.items() if v > 1e-12 * res.value}
        assert nonzero == {1.0, 2.0, 4.0}
        proj = lp.lp_project(f, lp.DyadicBand.of(N))
        assert res.terms[N] == pytest.approx(math.sqrt(N) * proj.norm(2), rel=1e-14)


class TestBesov:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            lp.BesovSpec(0.0, p=0.5)

    def test_l2_equivalence(self):
        # B^0_{2,2} is L^2 up to the square-sum bounds of the windows
        g = sp.Grid(1, 512.0, 4096)
        f = sp.preset("gaussian", g)
        res = lp.besov_norm(f, lp.BesovSpec(0.0, 2, 2, homogeneous=False))
        ratio = res.value / f.norm(2)
        assert 1 / math.sqrt(2) <= ratio <= 1 + 1e-12

    def test_tail_dominates(self):
        # on a small box the unresolved low frequencies carry most of the L^2 mass
        g = sp.Grid(1, 64.0, 256)
        with pytest.raises(TailDominates):
            lp.besov_norm(sp.preset("gaussian", g), lp.BesovSpec(0.0, 2, 2))

    def test_homogeneous_negative_exponent(self):
        g = sp.Grid(1, 64.0, 256)
        with pytest.raises(TailDominates):
            lp.besov_norm(sp.preset("gaussian", g), lp.BesovSpec(-1.0, 1, 1))

    def test_window_kernel_norm(self):
        # F^{-1} zeta is real with integral zeta(0) = 0 and L^inf at most ||zeta||_1/(2 pi)
        val = lp.window_kernel_lp(1, np.inf)
        r = np.linspace(0, 2, 20001)
        l1 = 2 * np.trapezoid(lp.lp_window(r), r) / (2 * math.pi)
        assert val == pytest.approx(l1, rel=1e-6)

    @pytest.mark.slow
    def test_annulus_logarithmic_growth(self):
        """The annulus datum is not in B^1_{1,1}: the truncated norm grows like log L."""
        vals = []
        for L in (256.0, 1024.0, 4096.0):
            g = sp.Grid(1, L, int(L) * 4)
            f = sp.preset("annulus_wave", g)
            vals.append(lp.besov_norm(f, lp.BesovSpec(1.0, 1, 1), tail_tolerance=1.0).value)
        steps = np.diff(vals)
        assert np.all(steps > 0)
        assert steps[1] == pytest.approx(steps[0], rel=0.05)

    def test_stable_under_refinement(self):
        vals = []
        for n in (1024, 2048):
            g = sp.Grid(1, 256.0, n)
            f = sp.preset("annulus_wave", g)
            vals.append(lp.besov_norm(f, lp.BesovSpec(1.0, 1, 1), tail_tolerance=1.0).terms[1.0])
        assert vals[1] == pytest.approx(vals[0], rel=5e-3)


class TestKernelSup:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_halfwave_t0_matches_window_kernel(self, d):
        spec = sp.SymbolSpec(1, 1, 1)
        ref = lp.window_kernel_lp(d, np.inf)
        val = lp.band_kernel_sup(spec, 1e-12, lp.DyadicBand(0), dim=d)
        assert val == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize("spec", [sp.SymbolSpec(0.5, 1, 1), sp.SymbolSpec(0.25, 0.5, 0.25)])
    def test_grid_and_radial_agree(self, spec):
        g = sp.Grid(1, 2048.0, 2**14)
        band = lp.DyadicBand(0)
        a = lp.band_kernel_sup(spec, 10.0, band, g)
        b = lp.band_kernel_sup(spec, 10.0, band, dim=1)
        # grid nodes sample the profile at spacing 1/8, close to the continuous maximum
        assert b >= a * (1 - 1e-12)
        assert a == pytest.approx(b, rel=2e-3)

    def test_radial_matches_direct_quadrature(self):
        spec = sp.SymbolSpec(0.5, 1, 1)
        band = lp.DyadicBand(1)

        def g_fn(rho):
            from fracwave.mlf import ml_symbol

            return lp.lp_window(rho, 2.0) * ml_symbol(spec, 30.0, rho)

        reach = lp._symbol_reach(spec, 30.0, 1.0, 4.0)
        rr, prof = lp.kernel_profile(g_fn, 1.0, 4.0, 2, reach)
        sel = slice(0, np.searchsorted(rr, 80.0), 7)
        direct = lp._radial_inverse(g_fn, 1.0, 4.0, rr[sel], 2, nodes=20000)
        assert np.max(np.abs(direct - prof[sel])) < 1e-12
        assert lp.band_kernel_sup(spec, 30.0, band, dim=2) >= np.max(np.abs(direct)) * (1 - 1e-9)

    def test_grid_needs_oversampling(self):
        g = sp.Grid(1, 64.0, 128)
        with pytest.raises(BandUnresolvable):
            lp.band_kernel_sup(sp.SymbolSpec(1, 1, 1), 1.0, lp.DyadicBand.of(2.0), g)

    def test_bad_dim(self):
        with pytest.raises(Exception):
            lp.band_kernel_sup(sp.SymbolSpec(1, 1, 1), 1.0, lp.DyadicBand(0), dim=4)
