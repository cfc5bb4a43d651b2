"""Littlewood-Paley projections, Besov norms and band-limited kernel norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import integrate, optimize, special

from . import mlf
from .errors import BandUnresolvable, ShapeMismatch, TailDominates
from .spectral import Field, Grid, SymbolSpec, apply_multiplier, radial_multiplier

__all__ = [
    "BesovResult",
    "BesovSpec",
    "DyadicBand",
    "band_kernel_sup",
    "besov_norm",
    "kernel_profile",
    "lp_cutoff",
    "lp_project",
    "lp_window",
    "resolvable_bands",
    "window_kernel_lp",
]


# {{{ windows


def _glue(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def lp_cutoff(r):
    """Smooth radial cutoff: 1 on [0, 1], 0 on [2, inf), monotone in between."""
    r = np.asarray(r, dtype=float)
    a = _glue(2.0 - r)
    b = _glue(r - 1.0)
    return a / (a + b)


def lp_window(r, N: float = 1.0):
    """Dyadic window ``zeta(r/N)`` with ``zeta(r) = eta(r) - eta(2r)``.

    Supported in ``(N/2, 2N)``, equal to 1 at ``r = N``; the dilates over
    ``N = 2**j`` sum to exactly 1 on ``r > 0``.
    """
    if not N > 0:
        raise ValueError("N must be positive")
    s = np.asarray(r, dtype=float) / N
    return lp_cutoff(s) - lp_cutoff(2.0 * s)


@dataclass(frozen=True, order=True)
class DyadicBand:
    """Frequency band around ``N = 2**j``."""

    j: int

    @classmethod
    def of(cls, N: float) -> "DyadicBand":
        j = math.log2(N)
        if abs(j - round(j)) > 1e-12:
            raise ValueError(f"N={N} is not a power of two")
        return cls(int(round(j)))

    @property
    def N(self) -> float:
        return 2.0**self.j

    @property
    def support(self):
        return (self.N / 2, 2 * self.N)


def resolvable_bands(grid: Grid) -> list[DyadicBand]:
    """Bands with ``N >= 2 * (2 pi / L)`` and ``2N`` at or below the Nyquist frequency."""
    lo = 2.0 * grid.freq_spacing
    hi = grid.nyquist / 2.0
    j0 = math.ceil(math.log2(lo) - 1e-12)
    j1 = math.floor(math.log2(hi) + 1e-12)
    return [DyadicBand(j) for j in range(j0, j1 + 1)]


def _check_band(grid: Grid, band: DyadicBand):
    if band.N < 2.0 * grid.freq_spacing * (1 - 1e-12) or band.N > grid.nyquist / 2.0 * (1 + 1e-12):
        raise BandUnresolvable(
            f"band N={band.N:g} outside the resolvable range "
            f"[{2 * grid.freq_spacing:g}, {grid.nyquist / 2:g}] of this grid"
        )


def lp_project(f: Field, band: DyadicBand) -> Field:
    """``P_N f``: multiply the transform by ``zeta(|xi|/N)``."""
    _check_band(f.grid, band)
    return apply_multiplier(f, lambda xi: lp_window(xi, band.N))


def _low_project(f: Field) -> Field:
    return apply_multiplier(f, lambda xi: lp_cutoff(xi))


# }}}

# {{{ Besov norms


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float = 1.0
    q: float = 1.0
    homogeneous: bool = True

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise ValueError("p and q must lie in [1, inf]")


@dataclass(frozen=True)
class BesovResult:
    """Truncated dyadic sum with an estimate of what the truncation left out."""

    value: float
    tail: float
    terms: dict = field(default_factory=dict, repr=False)

    def __float__(self):
        return self.value


def _lq(vals, q):
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0:
        return 0.0
    if q == np.inf:
        return float(vals.max())
    return float(np.sum(vals**q) ** (1.0 / q))


_WINDOW_LP_CACHE: dict = {}


def window_kernel_lp(d: int, p: float) -> float:
    """``||F^{-1} zeta||_{L^p(R^d)}`` by radial quadrature (cached)."""
    key = (int(d), float(p))
    if key in _WINDOW_LP_CACHE:
        return _WINDOW_LP_CACHE[key]
    r = np.linspace(0.0, 400.0, 40001)
    k = np.abs(_radial_inverse(lambda rho: lp_window(rho), 0.5, 2.0, r, d, nodes=4000))
    if p == np.inf:
        val = float(k.max())
    else:
        surf = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}[d]
        val = float(integrate.trapezoid(k**p * surf * r ** (d - 1), r) ** (1.0 / p))
    _WINDOW_LP_CACHE[key] = val
    return val


def besov_norm(f: Field, spec: BesovSpec, *, tail_tolerance: float = 0.01) -> BesovResult:
    """Dyadic Besov norm over the bands the grid resolves.

    The homogeneous norm sums ``N**s ||P_N f||_p`` over resolvable bands and
    bounds the dropped low bands by ``||F^{-1}zeta||_p ||f||_1 N**(s+d(1-1/p))``.
    The inhomogeneous norm uses the low block ``F^{-1}[eta f^]`` plus the
    bands ``N >= 2`` weighted by ``(1+N**2)**(s/2)``.
    """
    g = f.grid
    d = g.dim
    bands = resolvable_bands(g)
    if not bands:
        raise BandUnresolvable("grid resolves no dyadic band")

    def lp(u: Field):
        return u.norm(spec.p)

    terms = {}
    if spec.homogeneous:
        for b in bands:
            terms[b.N] = b.N**spec.s * lp(lp_project(f, b))
        expo = spec.s + d * (1.0 - 1.0 / spec.p)
        n_low = bands[0].N / 2.0
        if expo <= 0:
            low_tail = math.inf
        else:
            l1 = f.norm(1)
            c = window_kernel_lp(d, spec.p)
            low = [c * l1 * (n_low * 2.0**-k) ** expo for k in range(200)]
            low_tail = _lq(low, spec.q)
    else:
        terms[1.0] = lp(_low_project(f))
        for b in bands:
            if b.N >= 2.0:
                terms[b.N] = (1.0 + b.N**2) ** (spec.s / 2) * lp(lp_project(f, b))
        low_tail = 0.0
        if bands[0].N > 2.0:
            low_tail = math.inf
    # bands above the grid: extrapolate the geometric decay of the last two terms
    keys = sorted(terms)
    last = terms[keys[-1]]
    prev = terms[keys[-2]] if len(keys) > 1 else math.inf
    ratio = last / prev if prev > 0 else math.inf
    high_tail = last * ratio / (1 - ratio) if ratio < 1 else (0.0 if last == 0 else math.inf)
    value = _lq(list(terms.values()), spec.q)
    tail = _lq([low_tail, high_tail], spec.q) if math.isfinite(low_tail + high_tail) else math.inf
    if not tail <= tail_tolerance * value:
        raise TailDominates(
            f"truncation estimate {tail:.3g} exceeds {tail_tolerance:.0%} of the sum {value:.3g}"
        )
    return BesovResult(value, tail, terms)


# }}}

# {{{ band-limited kernels


def _quad_nodes(g_fn, lo, hi, nodes):
    """Trapezoid nodes and weighted samples of ``g`` on [lo, hi]."""
    rho = np.linspace(lo, hi, nodes + 1)
    gv = np.asarray(g_fn(rho), dtype=complex) * ((hi - lo) / nodes)
    return rho, gv


def _radial_sum(rho, gv, r, d):
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape, dtype=complex)
    flat = out.reshape(-1)
    rf = r.reshape(-1)
    for sl in _chunks(rf.size, max(1, 4_000_000 // rho.size)):
        x = np.outer(rf[sl], rho)
        if d == 1:
            ker = np.cos(x) / math.pi
        elif d == 2:
            ker = special.j0(x) * (rho / (2 * math.pi))
        else:
            ker = np.sinc(x / math.pi) * (rho**2 / (2 * math.pi**2))
        flat[sl] = ker @ gv
    return out


def _radial_inverse(g_fn, lo, hi, r, d, nodes=2000):
    """Inverse transform of the radial function ``g(|xi|)`` supported in [lo, hi], at radii ``r``.

    Direct trapezoid quadrature (the integrand vanishes smoothly at both ends).
    """
    rho, gv = _quad_nodes(g_fn, lo, hi, nodes)
    return _radial_sum(rho, gv, r, d)


def _chunks(n, size):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def _symbol_reach(spec: SymbolSpec, t: float, lo: float, hi: float) -> float:
    """Largest group velocity times t of the oscillatory part of the symbol on [lo, hi]."""
    if t == 0:
        return 0.0
    a, b, g = spec.alpha, spec.beta, spec.gamma
    if g >= 2 * a:
        return 0.0
    e = b / a
    speed = e * max(lo ** (e - 1), hi ** (e - 1))
    return t * speed * abs(math.sin(math.pi * g / (2 * a)))


# Hankel expansion H0(x) ~ sqrt(2/(pi x)) e^{i(x - pi/4)} sum_k c_k (i/x)^k
_HANKEL_TERMS = 7
_HANKEL_COEF = [1.0]
for _k in range(1, _HANKEL_TERMS):
    _HANKEL_COEF.append(_HANKEL_COEF[-1] * (-((2 * _k - 1) ** 2)) / (8.0 * _k))
_HANKEL_X0 = 40.0


def kernel_profile(g_fn, lo, hi, d, reach, *, oversample=8, max_size=2**23):
    """Radial profile of ``F^{-1}[g(|xi|)]`` for ``g`` supported in [lo, hi].

    Returns radii and values on a uniform grid covering ``[0, reach + margin]``.
    The frequency interval is sampled uniformly (trapezoid rule, spectrally
    accurate since ``g`` vanishes smoothly at both ends) with spacing small
    enough that the implied period exceeds twice the covered range, so there
    is no wrap-around.  Values come from zero-padded FFTs: exactly for d = 1
    and d = 3, through the Hankel expansion of J0 for d = 2 at ``r*xi >= 40``
    and by direct quadrature below that.
    """
    width = hi - lo
    margin = 400.0 / lo
    period = 2.0 * (reach + margin)
    m = 1
    while m * 2 * math.pi / period < oversample * 2 * hi:
        m *= 2
    # coarser radius sampling is acceptable: the caller polishes the maximum
    while m > max_size and m * math.pi / period >= 2 * 2 * hi:
        m //= 2
    # the radius step is 2 pi / (m * drho) = period / m
    n_rho = int(math.ceil(width * period / (2 * math.pi))) + 1
    if m < 2 * n_rho:
        m = 1 << int(math.ceil(math.log2(2 * n_rho)))
    if m > max_size:
        raise BandUnresolvable(f"kernel profile would need {m} samples (cap {max_size})")
    drho = 2 * math.pi / period
    rho = lo + drho * np.arange(n_rho)
    inside = rho < hi
    gv = np.zeros(n_rho, dtype=complex)
    gv[inside] = g_fn(rho[inside])
    dr = period / m
    keep = int(math.ceil((reach + margin) / dr)) + 1
    r = dr * np.arange(keep)
    phase = np.exp(1j * r * lo)  # rho starts at lo

    def fsum(weights):
        # sum_k weights_k e^{i r rho_k} drho
        buf = np.zeros(m, dtype=complex)
        buf[:n_rho] = weights
        return sfft.ifft(buf)[:keep] * m * drho * phase

    if d == 1:
        a = fsum(gv)
        b = np.conj(fsum(np.conj(gv)))  # sum g e^{-i r rho}
        return r, (a + b) / (2 * math.pi)
    if d == 3:
        s = (fsum(gv * rho) - np.conj(fsum(np.conj(gv * rho)))) / 2j
        out = np.empty(keep, dtype=complex)
        out[1:] = s[1:] / (2 * math.pi**2 * r[1:])
        out[0] = np.sum(gv * rho**2) * drho / (2 * math.pi**2)
        return r, out
    # d == 2: K(r) = (1/2pi) int g J0(r rho) rho drho
    near = r * lo < _HANKEL_X0
    out = np.zeros(keep, dtype=complex)
    if np.any(near):
        out[near] = _radial_inverse(g_fn, lo, hi, r[near], 2, nodes=max(2000, 4 * n_rho))
    far = ~near
    rf = r[far]
    acc_p = np.zeros(rf.size, dtype=complex)
    acc_m = np.zeros(rf.size, dtype=complex)
    for k, c in enumerate(_HANKEL_COEF):
        w = gv * rho ** (0.5 - k)
        # J0 = (H0^(1) + H0^(2)) / 2; H0^(2) is the conjugate expansion
        acc_p += c * (1j / rf) ** k * fsum(w)[far]
        acc_m += c * (-1j / rf) ** k * np.conj(fsum(np.conj(w)))[far]
    pref = math.sqrt(2 / math.pi) / np.sqrt(rf)
    j0 = 0.5 * pref * (np.exp(-1j * math.pi / 4) * acc_p + np.exp(1j * math.pi / 4) * acc_m)
    out[far] = j0 / (2 * math.pi)
    return r, out


def _refine_sup(g_fn, lo, hi, d, r, vals, nodes, candidates=5):
    """Polish the discrete maximum of |K| by bounded scalar search around top samples."""
    mag = np.abs(vals)
    order = np.argsort(mag)[::-1]
    picked = []
    for i in order:
        if all(abs(int(i) - j) > 2 for j in picked):
            picked.append(int(i))
        if len(picked) == candidates:
            break
    best = float(mag.max())
    dr = r[1] - r[0] if r.size > 1 else 1.0
    rho, gv = _quad_nodes(g_fn, lo, hi, nodes)

    def neg(x):
        return -abs(_radial_sum(rho, gv, np.array([x]), d)[0])

    for i in picked:
        a, b = max(0.0, r[i] - dr), r[i] + dr
        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded", options={"xatol": dr * 1e-3})
        best = max(best, -float(res.fun))
    return best


def band_kernel_sup(
    spec: SymbolSpec,
    t: float,
    band: DyadicBand,
    grid: Grid | None = None,
    *,
    dim: int | None = None,
    allow_nontempered: bool = False,
) -> float:
    """``||P_N K_t||_inf`` for the Mittag-Leffler kernel of ``spec``.

    With a ``grid`` this is the maximum over grid nodes of the inverse
    transform of ``zeta_N * symbol`` sampled on the grid.  Without one the
    radial profile is computed on a frequency sampling sized from the
    symbol's group velocity (see :func:`kernel_profile`), so large ``t`` does
    not wrap around, and the maximum is polished by local search.
    """
    N = band.N
    lo, hi = N / 2, 2 * N

    def g_fn(rho):
        return lp_window(rho, N) * mlf.ml_symbol(spec, t, rho, allow_nontempered=allow_nontempered)

    if grid is not None:
        _check_band(grid, band)
        if grid.nyquist < 4 * N * (1 - 1e-12):
            raise BandUnresolvable(f"grid needs pi*n/L >= 4N = {4 * N:g}")
        mult = radial_multiplier(grid, g_fn, mask=lambda xi: (xi > lo) & (xi < hi))
        k = sfft.ifftn(mult) / grid.cell_volume()
        return float(np.abs(k).max())
    d = 1 if dim is None else int(dim)
    if d not in (1, 2, 3):
        raise ShapeMismatch("dim must be 1, 2 or 3")
    reach = _symbol_reach(spec, t, lo, hi)
    r, vals = kernel_profile(g_fn, lo, hi, d, reach)
    nodes = max(2000, int(4 * (hi - lo) * (r[-1] + reach) / (2 * math.pi)))
    return _refine_sup(g_fn, lo, hi, d, r, vals, nodes)


# }}}
