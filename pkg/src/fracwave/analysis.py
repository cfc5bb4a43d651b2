"""Decay scans, power-law fits, residual-operator checks and envelope sweeps."""

from __future__ import annotations

import io
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lpbesov
from ._io import atomic_write, canonical_json, fingerprint, format_float
from .errors import InsufficientData, TruncationRisk
from .spectral import (
    Field,
    SymbolSpec,
    apply_residual,
    boundary_mass,
    propagate_ml,
    required_extent,
    residual_multiplier,
)

OBSERVABLES = (
    "linf_u",
    "linf_u_squared",
    "l2_residual",
    "tail_mass",
    "band_sup",
    "pairing",
    "linf_besov_ratio",
)

SERIES_COLUMNS = ("t", "value", "observable", "alpha", "beta", "gamma", "d", "n", "L")
ENVELOPE_COLUMNS = ("N", "t", "band_sup", "envelope", "ratio")


def thread_count() -> int:
    """Worker cap from FRACWAVE_THREADS (default: CPU count)."""
    raw = os.environ.get("FRACWAVE_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"FRACWAVE_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError("FRACWAVE_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _pmap(fn, items, workers=None):
    items = list(items)
    workers = thread_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# {{{ series and fits


@dataclass(frozen=True, eq=False)
class DecaySeries:
    times: np.ndarray
    values: np.ndarray
    observable: str
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if self.observable not in OBSERVABLES:
            raise ValueError(f"unknown observable {self.observable!r}")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.config)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    rms_residual: float
    window: tuple
    count: int

    def as_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "rms_residual": self.rms_residual,
            "window": list(self.window),
            "count": self.count,
        }


def fit_power_law(x, y, window=None, *, min_samples=8) -> FitResult:
    """Least squares of ln y against ln x over ``window``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = (x.min(), x.max()) if window is None else window
    m = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12)) & (y > 0)
    if m.sum() < min_samples:
        raise InsufficientData(f"{int(m.sum())} positive samples in [{lo:g}, {hi:g}]; need {min_samples}")
    lx, ly = np.log(x[m]), np.log(y[m])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + intercept)
    return FitResult(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))),
                     (float(lo), float(hi)), int(m.sum()))


def fit_slope(series: DecaySeries, window=(10.0, math.inf)) -> FitResult:
    """Log-log slope of ``series`` over ``window`` (needs 8 samples or more)."""
    lo, hi = window
    hi = min(hi, float(series.times.max()))
    return fit_power_law(series.times, series.values, (lo, hi))


# }}}

# {{{ scans


def _spec_config(phi: Field, spec: SymbolSpec | None, observable: str, extra=None):
    g = phi.grid
    cfg = {
        "observable": observable,
        "d": g.dim,
        "n": g.points,
        "L": g.extent,
        "alpha": None if spec is None else spec.alpha,
        "beta": None if spec is None else spec.beta,
        "gamma": None if spec is None else spec.gamma,
    }
    if extra:
        cfg.update(extra)
    return cfg


def tail_mass(u: Field, radius: float, center=None) -> float:
    """Share of the discrete L^2 mass of ``u`` outside the ball of ``radius``."""
    g = u.grid
    if not radius < g.extent / 2:
        raise ValueError("radius must be below L/2")
    coords = g.coords()
    c = np.zeros(g.dim) if center is None else np.broadcast_to(np.asarray(center, float), (g.dim,))
    r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
    a = np.abs(u.samples) ** 2
    total = a.sum()
    if total == 0:
        return 0.0
    return float(a[r2 > radius**2].sum() / total)


def decay_scan(
    phi: Field,
    spec: SymbolSpec,
    times,
    observable: str = "linf_u",
    *,
    band: float = 1.0,
    radius: float | None = None,
    support_radius: float | None = None,
    allow_nontempered: bool = False,
    workers: int | None = None,
) -> DecaySeries:
    """Propagate ``phi`` to each time and record ``observable``.

    ``band`` is the dyadic N for ``band_sup``; ``radius`` the ball for
    ``tail_mass``.  A :class:`TruncationRisk` warning is issued when more
    than 1e-6 of the mass sits in the outer tenth of the box at the last time.
    """
    if observable not in OBSERVABLES[:5]:
        raise ValueError(f"decay_scan observable must be one of {OBSERVABLES[:5]}")
    times = np.asarray(times, dtype=float)
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")
    if observable == "l2_residual" and not (spec.alpha == spec.beta == spec.gamma):
        raise ValueError("l2_residual needs alpha == beta == gamma")
    if observable == "tail_mass" and radius is None:
        raise ValueError("tail_mass needs a radius")
    b = lpbesov.DyadicBand.of(band) if observable == "band_sup" else None

    def one(t):
        if observable == "l2_residual":
            u = apply_residual(phi, spec.alpha, t)
            return u.norm(2), u
        u = propagate_ml(phi, spec, t, allow_nontempered=allow_nontempered)
        if observable == "linf_u":
            val = u.norm(np.inf)
        elif observable == "linf_u_squared":
            val = u.norm(np.inf) ** 2
        elif observable == "tail_mass":
            val = tail_mass(u, radius)
        else:
            val = lpbesov.lp_project(u, b).norm(np.inf)
        return val, u

    out = _pmap(one, times, workers)
    values = [v for v, _ in out]
    last = out[-1][1]
    edge = boundary_mass(last)
    if edge > 1e-6:
        warnings.warn(
            f"{edge:.2e} of the L2 mass is near the box edge at t={times[-1]:g}; "
            "periodic wrap-around may contaminate the series",
            TruncationRisk,
            stacklevel=2,
        )
    extra = {"times": [float(t) for t in times], "boundary_mass": edge}
    if support_radius is not None:
        need = required_extent(spec, float(times[-1]), support_radius)
        extra["required_extent"] = need
    if observable == "band_sup":
        extra["band"] = band
    if observable == "tail_mass":
        extra["radius"] = radius
    return DecaySeries(times, values, observable, _spec_config(phi, spec, observable, extra))


def residual_norm_profile(alpha: float, t: float, *, count: int = 4000):
    """``|m_{t,alpha}|`` on a radial sample: 0, then log-spaced |xi| refined near 0."""
    lo = 1e-10 / max(t, 1e-300)
    hi = 1e8 / max(t, 1e-300)
    xi = np.concatenate([[0.0], np.geomspace(lo, hi, count)])
    return xi, np.abs(residual_multiplier(alpha, t, xi))


def residual_operator_norm(alpha: float, t: float) -> float:
    """``sup |m_{t,alpha}|``, the L^2 operator norm of the remainder flow."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    _, m = residual_norm_profile(alpha, t)
    return float(m.max())


def strong_convergence_scan(phi: Field, alpha: float, times, *, workers=None) -> DecaySeries:
    """``||R_{t,alpha} * phi||_2`` per time."""
    spec = SymbolSpec(alpha, alpha, alpha)
    return decay_scan(phi, spec, times, "l2_residual", workers=workers)


def pairing_scan(phi: Field, psi: Field, alpha: float, times, *, workers=None) -> DecaySeries:
    """``|<R_{t,alpha} * phi, psi>|`` with the discrete inner product."""
    times = np.asarray(times, dtype=float)
    w = phi.grid.cell_volume()

    def one(t):
        u = apply_residual(phi, alpha, t)
        return abs(np.vdot(psi.samples, u.samples) * w)

    vals = _pmap(one, times, workers)
    spec = SymbolSpec(alpha, alpha, alpha)
    cfg = _spec_config(phi, spec, "pairing", {"times": [float(t) for t in times]})
    return DecaySeries(times, vals, "pairing", cfg)


def linf_besov_ratio_scan(
    phi: Field, spec: SymbolSpec, times, *, tail_tolerance: float = 0.01, workers=None
) -> DecaySeries:
    """``||K_t * phi||_inf`` over its Besov-norm envelope.

    The envelope is ``t**(-min((d-1)/2, alpha))`` times the sum of the
    homogeneous ``B^{(d+1)/2}_{1,1}`` and inhomogeneous ``B^{d-beta}_{1,1}``
    norms of ``phi``.
    """
    d = phi.grid.dim
    hom = lpbesov.besov_norm(
        phi, lpbesov.BesovSpec((d + 1) / 2, 1, 1, True), tail_tolerance=tail_tolerance
    ).value
    inh = lpbesov.besov_norm(
        phi, lpbesov.BesovSpec(d - spec.beta, 1, 1, False), tail_tolerance=tail_tolerance
    ).value
    rate = min((d - 1) / 2, spec.alpha)
    times = np.asarray(times, dtype=float)

    def one(t):
        u = propagate_ml(phi, spec, t)
        return u.norm(np.inf) / (t**-rate * (hom + inh))

    vals = _pmap(one, times, workers)
    cfg = _spec_config(phi, spec, "linf_besov_ratio",
                       {"times": [float(t) for t in times], "besov_hom": hom, "besov_inhom": inh})
    return DecaySeries(times, vals, "linf_besov_ratio", cfg)


# }}}

# {{{ envelopes


def dispersive_envelope(spec: SymbolSpec, N: float, t: float, d: int) -> float:
    """Envelope for ``||P_N K_t||_inf``.

    For ``gamma == alpha``: ``N^d (1/(1+t^a N^b) + 1/(1+t^{d/2} N^{d b/(2a)}))``.
    For ``alpha < gamma <= 1``: ``N^d / (1 + t^a N^b)``.
    """
    a, b, g = spec.alpha, spec.beta, spec.gamma
    base = N**d / (1 + t**a * N**b)
    if g == a:
        return base + N**d / (1 + t ** (d / 2) * N ** (d * b / (2 * a)))
    if a < g <= 1:
        return base
    raise ValueError("envelope defined for gamma == alpha or alpha < gamma <= 1")


@dataclass(frozen=True)
class EnvelopeTable:
    rows: tuple  # (N, t, band_sup, envelope, ratio), sorted by (N, t)
    config: dict

    @property
    def ratios(self):
        return np.array([r[4] for r in self.rows])

    def summary(self, quadrant=None):
        """Min, max and spread of the ratios, optionally over ``N >= N0, t >= t0``."""
        rows = self.rows
        if quadrant is not None:
            n0, t0 = quadrant
            rows = [r for r in rows if r[0] >= n0 and r[1] >= t0]
        rat = np.array([r[4] for r in rows])
        return {"min": float(rat.min()), "max": float(rat.max()),
                "spread": float(rat.max() / rat.min()), "cells": len(rows)}

    @property
    def fingerprint(self):
        return fingerprint(self.config)


def envelope_sweep(spec: SymbolSpec, bands, times, *, dim: int = 1, workers=None) -> EnvelopeTable:
    """Ratio of the band-limited kernel sup to its envelope on every (N, t) cell."""
    cells = sorted((float(N), float(t)) for N in bands for t in times)

    def one(cell):
        N, t = cell
        v = lpbesov.band_kernel_sup(spec, t, lpbesov.DyadicBand.of(N), dim=dim)
        e = dispersive_envelope(spec, N, t, dim)
        return (N, t, v, e, v / e)

    rows = tuple(_pmap(one, cells, workers))
    cfg = {"alpha": spec.alpha, "beta": spec.beta, "gamma": spec.gamma, "d": dim,
           "bands": sorted(float(b) for b in bands), "times": sorted(float(t) for t in times)}
    return EnvelopeTable(rows, cfg)


# }}}

# {{{ output


def _csv(header, rows, fp):
    buf = io.StringIO()
    buf.write(f"# fingerprint={fp}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(x if isinstance(x, str) else format_float(x) if isinstance(x, float) else str(x)
                           for x in row) + "\n")
    return buf.getvalue()


def series_csv(series: DecaySeries, squared: bool = False) -> str:
    c = series.config
    tag = series.observable
    vals = series.values
    if squared:
        tag = "linf_u_squared"
        vals = vals**2
    rows = [
        (float(t), float(v), tag, _num(c.get("alpha")), _num(c.get("beta")), _num(c.get("gamma")),
         c.get("d", ""), c.get("n", ""), _num(c.get("L")))
        for t, v in zip(series.times, vals)
    ]
    return _csv(SERIES_COLUMNS, rows, series.fingerprint)


def _num(x):
    return "" if x is None else float(x)


def write_series_csv(series: DecaySeries, path, *, squared: bool = False):
    atomic_write(path, series_csv(series, squared))


def envelope_csv(table: EnvelopeTable) -> str:
    return _csv(ENVELOPE_COLUMNS, table.rows, table.fingerprint)


def write_envelope_csv(table: EnvelopeTable, path):
    atomic_write(path, envelope_csv(table))


def json_text(payload: dict, config: dict) -> str:
    """Canonical JSON with sorted keys and the config fingerprint embedded."""
    body = dict(payload)
    body["fingerprint"] = fingerprint(config)
    body["config"] = config
    return canonical_json(body) + "\n"


def write_json(payload: dict, config: dict, path):
    atomic_write(path, json_text(payload, config))


# }}}
