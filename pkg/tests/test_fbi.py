import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracwave import fbi
from fracwave.errors import InsufficientData
from fracwave.spectral import DispersionTable

# w = xi^2, t = 1, x = 0, xi = 2, lambda = 3 (closed Gaussian integral)
SQUARE_I = 3.833574163806374e-05 - 6.260074037272692e-05j


def square_closed(x, t, xi, lam):
    """Closed form for w = xi^2: a Gaussian integral in z."""
    a = 0.25 + 1j * t * lam**2
    b = 1j * lam * (2 * t * lam**2 * xi - x)
    c = -1j * t * lam**4 * xi**2
    return cmath.sqrt(math.pi / a) * cmath.exp(b * b / (4 * a) + c)


def cfg(w, x0=0.0, t=1.0, xi=2.0, **kw):
    return fbi.FBIConfig(w, x0, t, xi, **kw)


class TestConfig:
    def test_tabulated_rejected(self):
        with pytest.raises(ValueError):
            cfg(DispersionTable.tabulated(np.zeros(8)))

    @pytest.mark.parametrize("lams", [(0.5, 1.0), (2.0, 1.5), (1.0, 1.0)])
    def test_lambdas(self, lams):
        with pytest.raises(ValueError):
            cfg(DispersionTable.square(), lambdas=lams)

    def test_quad_order(self):
        with pytest.raises(ValueError):
            cfg(DispersionTable.square(), quad_order=32)

    def test_as_dict(self):
        d = cfg(DispersionTable.power(1.5)).as_dict()
        assert d["w"] == {"kind": "power", "params": [1.5]} and d["quad_order"] == 128

    def test_lambda_below_one(self):
        with pytest.raises(ValueError):
            fbi.fbi_integral(cfg(DispersionTable.square()), 0.5)


class TestIntegral:
    def test_frozen_square(self):
        val = fbi.fbi_integral(cfg(DispersionTable.square()), 3.0)
        assert abs(val - SQUARE_I) / abs(SQUARE_I) < 1e-7

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-2, 2), st.floats(0, 2), st.floats(-2, 2), st.floats(1, 3))
    def test_square_closed_form(self, x, t, xi, lam):
        ref = square_closed(x, t, xi, lam)
        val = fbi.fbi_integral(cfg(DispersionTable.square(), x, t, xi), lam)
        assert abs(val - ref) <= 1e-7 * abs(ref) + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3, 3), st.floats(0, 3), st.floats(-1, 1), st.floats(1, 4))
    def test_linear_closed_form(self, x, t, c, lam):
        val = fbi.fbi_integral(cfg(DispersionTable.linear(c), x, t, 1.0), lam)
        ref = 2 * math.sqrt(math.pi) * math.exp(-(lam**2) * (x - t * c) ** 2)
        assert abs(abs(val) - ref) <= 1e-9 + 1e-7 * ref

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from(["abs", "square", "indicator", "power"]), st.floats(-3, 3),
           st.floats(0, 3), st.floats(-3, 3), st.floats(1, 5))
    def test_modulus_bound(self, kind, x, t, xi, lam):
        w = {"abs": DispersionTable.absolute(), "square": DispersionTable.square(),
             "indicator": DispersionTable.indicator(1.0), "power": DispersionTable.power(0.5)}[kind]
        val = fbi.fbi_integral(cfg(w, x, t, xi), lam)
        assert abs(val) <= 2 * math.sqrt(math.pi) * (1 + 1e-12)

    @pytest.mark.parametrize("kind", ["abs", "square", "indicator", "power"])
    def test_order_doubling(self, kind):
        w = {"abs": DispersionTable.absolute(), "square": DispersionTable.square(),
             "indicator": DispersionTable.indicator(1.0), "power": DispersionTable.power(0.5)}[kind]
        a = fbi.fbi_integral(cfg(w, 0.5, 1.0, 1.5, quad_order=128), 4.0)
        b = fbi.fbi_integral(cfg(w, 0.5, 1.0, 1.5, quad_order=256), 4.0)
        assert abs(a - b) <= 1e-9 * max(abs(b), 1e-3)


class TestFit:
    def test_free_gaussian(self):
        # t = 0: |I| = 2 sqrt(pi) exp(-lambda^2 x^2), sigma = x^2
        res = fbi.fbi_decay_exponent(cfg(DispersionTable.square(), 0.5, 0.0, 1.0))
        assert res.sigma == pytest.approx(0.25, abs=1e-10)
        assert res.verdict == "decay"

    @pytest.mark.parametrize("xi", [2.0, 3.0])
    def test_square_tracks_xi(self, xi):
        lams = tuple(np.arange(1.0, 6.01, 0.25))
        res = fbi.fbi_decay_exponent(cfg(DispersionTable.square(), 0.0, 1.0, xi, lambdas=lams))
        assert res.verdict == "decay"
        assert res.sigma == pytest.approx(xi**2 / 4, rel=0.2)

    def test_light_cone_no_decay(self):
        res = fbi.fbi_decay_exponent(cfg(DispersionTable.absolute(), 1.0, 1.0, 1.0))
        assert res.verdict == "no_decay"

    def test_off_cone_decay(self):
        res = fbi.fbi_decay_exponent(cfg(DispersionTable.absolute(), 3.0, 1.0, 1.0))
        assert res.verdict == "decay" and res.sigma > 0.1

    def test_floor(self):
        # everything sits below a huge floor
        with pytest.raises(InsufficientData):
            fbi.fbi_decay_exponent(cfg(DispersionTable.square(), 2.0, 0.0, 1.0), floor=10.0)

    def test_outputs(self, tmp_path):
        c = cfg(DispersionTable.square(), 0.5, 0.0, 1.0)
        res = fbi.fbi_decay_exponent(c)
        fbi.write_fbi(c, res, tmp_path / "f.csv", tmp_path / "f.json")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[1] == "lambda,abs_I,log_abs_I" and len(lines) == 2 + len(c.lambdas)
        body = (tmp_path / "f.json").read_text()
        assert '"verdict":"decay"' in body
