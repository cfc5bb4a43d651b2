import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.special import erfc, gamma

from fracwave import mlf
from fracwave.errors import NonConvergence, NotTempered, Overflow, RegionViolation
from fracwave.spectral import SymbolSpec

# extended-precision references (mpmath series or real-line integral, 40 digits)
E_HALF_MINUS_ONE = 0.4275835761558070044  # e * erfc(1)
E_QUARTER_RAY5 = -4.105177343337968 - 0.784444847124488j  # alpha=1/4, z = i^-1/4 * 5
E_QUARTER_RAY10 = -3.8881105361974253 + 1.18698656374963j  # alpha=1/4, z = i^-1/4 * 10
E_QUARTER_RAY1E4 = -2.504748189613109 - 3.1187832592584916j  # alpha=1/4, z = i^-1/4 * 1e4


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestParams:
    def test_valid(self):
        p = mlf.MLParams(0.5, 2.0)
        assert p.alpha == 0.5 and p.beta_ml == 2.0

    @pytest.mark.parametrize("a,b", [(0, 1), (-1, 1), (0.5, 0), (math.nan, 1), (0.5, math.inf)])
    def test_invalid(self, a, b):
        with pytest.raises(ValueError):
            mlf.MLParams(a, b)


class TestSeries:
    def test_exponential(self):
        assert mlf.ml_series(1.0, 1.0) == pytest.approx(math.e, rel=1e-15)

    def test_origin(self):
        assert mlf.ml_series(0.0, 0.5) == 1.0

    def test_erfc_point(self):
        assert rel(mlf.ml_series(-1.0, 0.5), E_HALF_MINUS_ONE) < 1e-14

    def test_reports_terms(self):
        val, n = mlf.ml_series(0.5, 0.8, return_terms=True)
        assert n > 5 and np.isfinite(val)

    def test_region(self):
        with pytest.raises(RegionViolation):
            mlf.ml_series(10.0, 0.5)

    def test_nonconvergence(self):
        with pytest.raises(NonConvergence):
            mlf.ml_series(2.0, 1.0, max_terms=3)

    def test_overflow(self):
        with pytest.raises(Overflow), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mlf.ml_series(800.0, 1.0, check_region=False)

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            mlf.ml_series(0.1, 0.5, tol=0)


class TestAsymptotic:
    def test_region(self):
        with pytest.raises(RegionViolation):
            mlf.ml_asymptotic(5.0, 0.5)

    def test_quarter_far_ray(self):
        z = 1e4 * np.exp(-1j * np.pi / 8)
        assert rel(mlf.ml_asymptotic(z, 0.25, k_terms=2), E_QUARTER_RAY1E4) < 1e-6

    def test_no_exponential_past_sector(self):
        # alpha=1/2, z = -i r: leading term -i/Gamma(1/2) / r
        r = 1e6
        val = mlf.ml_ray(r, -0.5, 0.5)
        lead = -1 / (gamma(0.5) * (-1j * r))
        assert rel(val, lead) < 1e-6

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_half_wave_modulus(self, alpha):
        # gamma = alpha: modulus tends to 1/alpha
        r = 1e6 ** alpha
        val = mlf.ml_ray(r, -alpha / 2, alpha)
        assert abs(abs(val) - 1 / alpha) < 5 / r

    def test_k_terms_validation(self):
        with pytest.raises(ValueError):
            mlf.ml_asymptotic(-100.0, 0.5, k_terms=0)


class TestDispatch:
    def test_unit_exponential_on_imaginary_axis(self):
        t = np.linspace(0, 50, 11)
        val = mlf.ml_ray(t, -0.5, 1.0)
        assert np.all(np.abs(np.abs(val) - 1) < 1e-15)
        assert np.allclose(val, np.exp(-1j * t), atol=1e-13)

    def test_origin(self):
        assert mlf.mittag_leffler(0.0, 0.5) == 1.0

    def test_quarter_ray(self):
        assert rel(mlf.ml_ray(5.0, -0.125, 0.25), E_QUARTER_RAY5) < 1e-10

    def test_alias(self):
        assert mlf.ml_eval is mlf.mittag_leffler

    def test_scalar_shape(self):
        assert np.ndim(mlf.mittag_leffler(1.0 + 1j, 0.7)) == 0
        assert mlf.mittag_leffler(np.ones((2, 3)), 0.7).shape == (2, 3)

    def test_boundary_check_quiet(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            mlf.mittag_leffler(np.array([10.2, 10.5j]), 0.6, check_boundary=True)


class TestSymbol:
    def test_t_zero(self):
        assert mlf.ml_symbol(SymbolSpec(0.3, 1.2, 0.9), 0.0, 5.0) == 1.0

    def test_half_wave(self):
        xi = np.linspace(0, 20, 9)
        val = mlf.ml_symbol(SymbolSpec(1, 1, 1), 3.0, xi)
        assert np.allclose(val, np.exp(-3j * xi), atol=1e-13)

    def test_quarter_point(self):
        val = mlf.ml_symbol(SymbolSpec(0.25, 0.5, 0.25), 1.0, 100.0)
        assert rel(val, E_QUARTER_RAY10) < 1e-10
        assert abs(abs(val) - 4) < 0.2

    def test_not_tempered(self):
        with pytest.raises(NotTempered):
            mlf.ml_symbol(SymbolSpec(0.5, 1, 0.2), 1.0, 1.0)
        mlf.ml_symbol(SymbolSpec(0.5, 1, 0.2), 0.1, 0.5, allow_nontempered=True)

    def test_negative_inputs(self):
        with pytest.raises(ValueError):
            mlf.ml_symbol(SymbolSpec(0.5, 1, 1), -1.0, 1.0)
        with pytest.raises(ValueError):
            mlf.ml_symbol(SymbolSpec(0.5, 1, 1), 1.0, -1.0)


# {{{ identities


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20))
def test_exp_identity(x, y):
    z = complex(x, y)
    if abs(z) > 20:
        return
    assert rel(mlf.mittag_leffler(z, 1.0), np.exp(z)) < 1e-12


@settings(max_examples=80, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.2, 2.5), st.floats(0, 30), st.floats(-1, 1))
def test_recurrence(alpha, beta, r, angle):
    # keep |z|**(1/alpha) representable
    r = min(r, 600.0**alpha)
    z = r * np.exp(1j * np.pi * angle)
    lhs = mlf.mittag_leffler(z, alpha, beta)
    tail = z * mlf.mittag_leffler(z, alpha, alpha + beta)
    rhs = 1 / gamma(beta) + tail
    scale = max(abs(lhs), abs(tail), 1 / gamma(beta))
    assert abs(lhs - rhs) / scale < 1e-9


def test_erfc_identity():
    x = np.linspace(-3, 3, 121)
    val = mlf.mittag_leffler(x.astype(complex), 0.5)
    ref = np.exp(x**2) * erfc(-x)
    assert np.max(np.abs(val - ref) / np.abs(ref)) < 1e-9


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4, 0.5, 0.64, 0.75, 0.9, 1.0])
@pytest.mark.parametrize("which", ["alpha", "mid", "one"])
def test_region_overlap(alpha, which):
    gam = {"alpha": alpha, "mid": (alpha + 1) / 2, "one": 1.0}[which]
    z_dir = np.exp(-0.5j * np.pi * gam)
    r0, r1 = mlf.series_radius(alpha), mlf.asymptotic_radius(alpha)
    inner = np.linspace(0.8 * r0, r0, 5) * z_dir
    outer = np.linspace(r1 * (1 + 1e-9), 1.2 * r1, 5) * z_dir
    c_in = mlf.ml_contour(inner, alpha)
    c_out = mlf.ml_contour(outer, alpha)
    s_in = mlf.ml_series(inner, alpha)
    a_out = mlf.ml_asymptotic(outer, alpha)
    assert np.max(np.abs(s_in - c_in) / np.abs(s_in)) < 1e-6
    # the phase |z|**(1/alpha) turns one ulp in z into eps*|z|**(1/alpha) radians
    cond = np.finfo(float).eps * (1.2 * r1) ** (1 / alpha) / alpha
    assert np.max(np.abs(a_out - c_out) / np.abs(a_out)) < 1e-6 + 10 * cond


@settings(max_examples=150, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.2, 3.0), st.floats(-1, 1))
def test_asymptotic_matches_contour(alpha, beta, angle):
    """Just past the switch radius, for any beta (truncation must not stop early)."""
    r1 = mlf.asymptotic_radius(alpha)
    growth = (1.1 * r1) ** (1 / alpha) * math.cos(math.pi * min(abs(angle) / alpha, 1.0))
    assume(growth < 600)
    z = 1.1 * r1 * np.exp(1j * np.pi * angle)
    a = mlf.ml_asymptotic(z, alpha, beta)
    c = mlf.ml_contour(z, alpha, beta)
    cond = np.finfo(float).eps * (1.1 * r1) ** (1 / alpha) / alpha
    assert abs(a - c) <= (1e-6 + 10 * cond) * max(abs(a), abs(c), 1e-3)


def test_caputo_l1_scheme():
    """y = E_alpha(lam t^alpha) solves the Caputo ODE D^alpha y = lam y (L1 discretisation)."""
    alpha, lam = 0.6, -1.3
    n = 10_000
    t = np.linspace(0, 1, n + 1)
    h = t[1]
    y = np.real(mlf.mittag_leffler(lam * t.astype(complex) ** alpha, alpha))
    k = np.arange(n)
    b = (k + 1) ** (1 - alpha) - k ** (1 - alpha)
    dy = np.diff(y)
    # D^alpha y(t_n) ~ h^-alpha/Gamma(2-alpha) sum_k b_k (y_{n-k} - y_{n-k-1})
    caputo = h**-alpha / gamma(2 - alpha) * np.dot(b, dy[::-1])
    assert abs(caputo - lam * y[-1]) / abs(lam * y[-1]) < 1e-3


# }}}
