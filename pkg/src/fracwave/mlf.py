r"""Two-parameter Mittag-Leffler function.

.. math::

    E_{\alpha,\beta}(z) = \sum_{k=0}^\infty \frac{z^k}{\Gamma(\alpha k + \beta)}

Evaluation is split by :math:`|z|`:

* a Taylor sum near the origin,
* numerical inversion of the Laplace transform
  :math:`s^{\alpha-\beta}/(s^\alpha - z)` along an optimal parabolic contour
  in the intermediate annulus,
* the large-argument expansion
  :math:`\frac{1}{\alpha} z^{(1-\beta)/\alpha} e^{z^{1/\alpha}}
  - \sum_j z^{-j}/\Gamma(\beta - \alpha j)` outside it.

Internally arguments are carried in polar form ``z = rho * exp(i*pi*frac)``.
On the rays used by the fractional propagator the ratio ``frac / alpha`` is
often exactly a half-integer; keeping it symbolic avoids the catastrophic
phase error that ``z ** (1 / alpha)`` suffers when ``|z|**(1/alpha)`` is huge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import AccuracyLoss, NonConvergence, NotTempered, Overflow, RegionViolation

__all__ = [
    "MLParams",
    "asymptotic_radius",
    "mittag_leffler",
    "ml_asymptotic",
    "ml_contour",
    "ml_eval",
    "ml_ray",
    "ml_series",
    "ml_symbol",
    "series_radius",
    "sincospi",
]

_LOG_EPS = math.log(np.finfo(float).eps)  # -36.04
_LOG_MAX = math.log(np.finfo(float).max)  # 709.78
_TARGET_LOG_EPS = math.log(1e-15)


@dataclass(frozen=True)
class MLParams:
    """Order parameters of :math:`E_{\\alpha,\\beta}`.

    ``beta_ml`` is the second Mittag-Leffler parameter, unrelated to the
    spatial order of the Riesz derivative.
    """

    alpha: float
    beta_ml: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (self.beta_ml > 0 and math.isfinite(self.beta_ml)):
            raise ValueError(f"beta_ml must be positive, got {self.beta_ml}")


def series_radius(alpha: float) -> float:
    """Largest ``|z|`` handed to the Taylor sum by the dispatcher.

    ``5**alpha`` keeps ``|z|**(1/alpha) <= 5``, which bounds the cancellation
    loss to roughly ``exp(5) / alpha`` relative to unit-size results.
    """
    return 5.0**alpha


def asymptotic_radius(alpha: float) -> float:
    """Smallest ``|z|`` handed to the large-argument expansion."""
    return max(10.0, (-_LOG_EPS) ** alpha)


def sincospi(x):
    """Return ``(sin(pi*x), cos(pi*x))``, exact at multiples of 1/2."""
    x = np.asarray(x, dtype=float)
    r = np.remainder(x, 2.0)
    s = np.sin(np.pi * r)
    c = np.cos(np.pi * r)
    s = np.where((r == 0.0) | (r == 1.0), 0.0, s)
    c = np.where((r == 0.5) | (r == 1.5), 0.0, c)
    s = np.where(r == 0.5, 1.0, np.where(r == 1.5, -1.0, s))
    c = np.where(r == 0.0, 1.0, np.where(r == 1.0, -1.0, c))
    return s, c


def _cis_pi(x):
    s, c = sincospi(x)
    return c + 1j * s


def _to_polar(z):
    z = np.asarray(z, dtype=complex)
    return np.abs(z), np.angle(z) / np.pi


def _check_params(alpha, beta):
    MLParams(float(alpha), float(beta))


# {{{ Taylor series


def _series_polar(rho, frac, alpha, beta, max_terms, tol):
    rho, frac = np.broadcast_arrays(np.asarray(rho, float), np.asarray(frac, float))
    shape = rho.shape
    rho = rho.ravel()
    frac = frac.ravel()
    total = np.zeros(rho.shape, dtype=complex)
    nterms = np.zeros(rho.shape, dtype=int)
    active = np.ones(rho.shape, dtype=bool)
    with np.errstate(divide="ignore"):
        logrho = np.log(rho)
    prev = np.full(rho.shape, -np.inf)
    for k in range(max_terms):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        if k == 0:
            logmag = np.full(idx.size, -gammaln(beta))
        else:
            logmag = k * logrho[idx] - gammaln(alpha * k + beta)
        if np.any(logmag > _LOG_MAX):
            raise Overflow(f"series term {k} exceeds the floating-point range")
        term = np.exp(logmag) * _cis_pi(frac[idx] * k)
        total[idx] += term
        nterms[idx] = k + 1
        mag = np.exp(logmag)
        done = (mag <= tol * np.abs(total[idx])) & (logmag < prev[idx])
        done |= mag == 0.0
        prev[idx] = logmag
        active[idx[done]] = False
    if active.any():
        raise NonConvergence(
            f"Taylor series did not reach tol={tol:g} within {max_terms} terms"
        )
    return total.reshape(shape), nterms.reshape(shape)


def ml_series(
    z,
    alpha: float,
    beta: float = 1.0,
    *,
    max_terms: int = 5000,
    tol: float = 1e-17,
    return_terms: bool = False,
    check_region: bool = True,
):
    """Sum the defining power series.

    The sum stops once the running term falls below ``tol`` times the
    partial sum and the terms are decreasing. With ``check_region`` the
    argument must satisfy ``|z| <= series_radius(alpha)``; outside that disc
    the terms cancel catastrophically in double precision.

    Returns the value, or ``(value, n_terms)`` when ``return_terms`` is set.
    """
    _check_params(alpha, beta)
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho, frac = _to_polar(z)
    if check_region and np.any(rho > series_radius(alpha) * (1 + 1e-12)):
        raise RegionViolation(
            f"|z| = {rho.max():g} exceeds the series radius {series_radius(alpha):g}"
        )
    val, nterms = _series_polar(rho, frac, alpha, beta, max_terms, tol)
    if return_terms:
        return val, nterms
    return val


# }}}

# {{{ large-argument expansion


def _asym_polar(rho, frac, alpha, beta, k_terms=None, exp_term=True):
    rho, frac = np.broadcast_arrays(np.asarray(rho, float), np.asarray(frac, float))
    shape = rho.shape
    rho, frac = rho.ravel(), frac.ravel()
    out = np.zeros(rho.shape, dtype=complex)

    # exponential term, present inside the sector |arg z| <= 3*pi*alpha/4
    inside = (np.abs(frac) <= 0.75 * alpha) & exp_term
    if np.any(inside):
        r_in = rho[inside]
        f_in = frac[inside]
        big = r_in ** (1.0 / alpha)
        s, c = sincospi(f_in / alpha)
        logmod = big * c + (1.0 - beta) / alpha * np.log(r_in)
        if np.any(logmod > _LOG_MAX - 1.0):
            raise Overflow("exp(z**(1/alpha)) exceeds the floating-point range")
        phase = np.exp(1j * (big * s)) * _cis_pi(f_in * (1.0 - beta) / alpha)
        out[inside] = np.exp(logmod) * phase / alpha

    jmax = 100 if k_terms is None else int(k_terms)
    if jmax < 1:
        raise ValueError("k_terms must be >= 1")
    tail = np.zeros(rho.shape, dtype=complex)
    active = np.ones(rho.shape, dtype=bool)
    best = np.full(rho.shape, np.inf)
    logrho = np.log(rho)
    for j in range(1, jmax + 1):
        coef = rgamma(beta - alpha * j)
        if coef == 0.0:
            continue
        if k_terms is None:
            if not active.any():
                break
            idx = np.flatnonzero(active)
        else:
            idx = slice(None)
        term = -np.exp(-j * logrho[idx]) * coef * _cis_pi(-frac[idx] * j)
        if k_terms is None:
            # Optimal truncation on the smooth envelope Gamma(1-beta+alpha*j)/pi;
            # |1/Gamma(beta-alpha*j)| itself oscillates with sin(pi*(beta-alpha*j)).
            # Below x = 2 the envelope has a pole at 0 and a minimum near 1.46,
            # so terms there are always kept and never end the sum.
            x = 1.0 - beta + alpha * j
            if x < 2.0:
                tail[idx] += term
                continue
            env_coef = math.exp(gammaln(x)) / math.pi
            mag = np.exp(-j * logrho[idx]) * max(env_coef, abs(coef))
            grow = mag > best[idx]
            keep = ~grow
            tail[idx[keep]] += term[keep]
            best[idx[keep]] = mag[keep]
            small = mag < 1e-17 * np.abs(out[idx] + tail[idx])
            active[idx[grow | small]] = False
        else:
            tail += term
    return (out + tail).reshape(shape)


def ml_asymptotic(z, alpha: float, beta: float = 1.0, k_terms: int | None = None,
                  *, check_region: bool = True):
    """Large-``|z|`` expansion with ``k_terms`` algebraic terms.

    ``k_terms=None`` truncates each point optimally (smallest term). The
    exponential contribution is included when ``|arg z| <= 3*pi*alpha/4``.
    """
    _check_params(alpha, beta)
    rho, frac = _to_polar(z)
    if check_region and np.any(rho < asymptotic_radius(alpha)):
        raise RegionViolation(
            f"|z| = {rho.min():g} is below the asymptotic radius "
            f"{asymptotic_radius(alpha):g}"
        )
    return _asym_polar(rho, frac, alpha, beta, k_terms)


# }}}

# {{{ parabolic contour


def _opc_bounded(phi_j, phi_j1, pj, qj, log_epsilon):
    """Contour parameters for the strip between two singularities."""
    fac = 1.01
    f_max = math.exp(log_epsilon - _LOG_EPS)
    sq_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt(log_epsilon - _LOG_EPS)
    sq_j1 = min(math.sqrt(phi_j1), threshold - sq_j)
    if sq_j1 <= sq_j:
        return None
    f_bar = 1.0
    if pj < 1e-14 and qj < 1e-14:
        bar_j, bar_j1 = sq_j, sq_j1
    elif pj < 1e-14:
        bar_j = sq_j
        f_min = fac * (sq_j / (sq_j1 - sq_j)) ** qj if sq_j > 0 else fac
        if f_min >= f_max:
            return None
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fq = f_bar ** (-1.0 / qj)
        bar_j1 = (2 * sq_j1 - fq * sq_j) / (2 + fq)
    elif qj < 1e-14:
        bar_j1 = sq_j1
        f_min = fac * (sq_j1 / (sq_j1 - sq_j)) ** pj
        if f_min >= f_max:
            return None
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / pj)
        bar_j = (2 * sq_j + fp * sq_j1) / (2 - fp)
    else:
        f_min = fac * (sq_j + sq_j1) / (sq_j1 - sq_j) ** max(pj, qj)
        if f_min >= f_max:
            return None
        f_min = max(f_min, 1.5)
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / pj)
        fq = f_bar ** (-1.0 / qj)
        w = -phi_j1 / log_epsilon
        den = 2 + w - (1 + w) * fp + fq
        bar_j = ((2 + w + fq) * sq_j + fp * sq_j1) / den
        bar_j1 = (-(1 + w) * fq * sq_j + (2 + w - (1 + w) * fp) * sq_j1) / den
    log_epsilon = log_epsilon - math.log(f_bar)
    w = -(bar_j1**2) / log_epsilon
    mu = (((1 + w) * bar_j + bar_j1) / (2 + w)) ** 2
    h = -2 * math.pi / log_epsilon * (bar_j1 - bar_j) / ((1 + w) * bar_j + bar_j1)
    if not (mu > 0 and h > 0):
        return None
    n = math.ceil(math.sqrt(1 - log_epsilon / mu) / h)
    return mu, h, n


def _opc_unbounded(phi_j, pj, log_epsilon):
    """Contour parameters for the half-plane right of every singularity."""
    sq_phi_j = math.sqrt(phi_j)
    bar_phi = phi_j * 1.01 if phi_j > 0 else 0.01
    sq_bar = math.sqrt(bar_phi)
    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    for _ in range(100):
        log_eps_phi = log_epsilon / bar_phi
        n = math.ceil(bar_phi / math.pi * (1 - 1.5 * log_eps_phi + math.sqrt(1 - 2 * log_eps_phi)))
        a = math.pi * n / bar_phi
        sq_mu = sq_bar * abs(4 - a) / abs(7 - math.sqrt(1 + 12 * a))
        if pj < 1e-14:
            break
        fbar = ((sq_bar - sq_phi_j) / sq_mu) ** (-pj)
        if f_min < fbar < f_max:
            break
        sq_bar = f_tar ** (-1.0 / pj) * sq_mu + sq_phi_j
        bar_phi = sq_bar**2
    mu = sq_mu**2
    h = (-3 * a - 2 + 2 * math.sqrt(1 + 12 * a)) / (4 - a) / n
    threshold = log_epsilon - _LOG_EPS
    if mu > threshold:
        q = 0.0 if abs(pj) < 1e-14 else f_tar ** (-1.0 / pj) * math.sqrt(mu)
        bar_phi = (q + sq_phi_j) ** 2
        if bar_phi < threshold:
            w = math.sqrt(_LOG_EPS / (_LOG_EPS - log_epsilon))
            u = math.sqrt(-bar_phi / _LOG_EPS)
            mu = threshold
            n = math.ceil(w * log_epsilon / 2 / math.pi / (u * w - 1))
            h = w / n
        else:
            return None
    return mu, h, n


def _opc_plan(rho, frac, alpha, beta):
    """Choose (mu, h, N, residue poles) for one argument ``rho*e^{i pi frac}``."""
    theta_frac = frac  # arg z / pi
    kmin = math.ceil(-alpha / 2 - theta_frac / 2)
    kmax = math.floor(alpha / 2 - theta_frac / 2)
    big = rho ** (1.0 / alpha)
    poles = []
    for k in range(kmin, kmax + 1):
        ang = (theta_frac + 2 * k) / alpha
        s, c = sincospi(ang)
        s, c = float(s), float(c)
        re, im = big * c, big * s
        phi = (re + big) / 2
        if phi > 1e-15:
            poles.append((phi, big, ang))
    poles.sort(key=lambda p: p[0])
    phis = [0.0] + [p[0] for p in poles] + [math.inf]
    n_regions = len(poles) + 1
    p = [max(0.0, -2 * (alpha - beta + 1))] + [1.0] * len(poles)
    q = [1.0] * len(poles) + [math.inf]

    log_epsilon = _TARGET_LOG_EPS
    for _ in range(20):
        best = None
        for j in range(n_regions):
            if not (phis[j] < log_epsilon - _LOG_EPS and phis[j] < phis[j + 1]):
                continue
            if j < n_regions - 1:
                plan = _opc_bounded(phis[j], phis[j + 1], p[j], q[j], log_epsilon)
            else:
                plan = _opc_unbounded(phis[j], p[j], log_epsilon)
            if plan is not None and (best is None or plan[2] < best[0][2]):
                best = (plan, j)
        if best is not None and best[0][2] <= 200:
            break
        log_epsilon += math.log(10.0)
    if best is None:
        raise NonConvergence(f"no admissible contour for |z|={rho:g}, arg/pi={frac:g}")
    (mu, h, n), j = best
    return mu, h, n, poles[j:]


def _contour_polar(rho, frac, alpha, beta):
    rho, frac = np.broadcast_arrays(np.asarray(rho, float), np.asarray(frac, float))
    shape = rho.shape
    rho = rho.ravel()
    frac = frac.ravel()
    out = np.empty(rho.shape, dtype=complex)
    plans = [_opc_plan(float(r), float(f), alpha, beta) for r, f in zip(rho, frac)]
    ns = np.array([pl[2] for pl in plans], dtype=int)
    z = rho * _cis_pi(frac)
    for n in np.unique(ns):
        idx = np.flatnonzero(ns == n)
        k = np.arange(-n, n + 1, dtype=float)
        for chunk in np.array_split(idx, max(1, idx.size * (2 * n + 1) // 400_000 + 1)):
            if chunk.size == 0:
                continue
            mu = np.array([plans[i][0] for i in chunk])[:, None]
            h = np.array([plans[i][1] for i in chunk])[:, None]
            u = h * k[None, :]
            s = mu * (1j * u + 1) ** 2
            ds = 2 * mu * (1j - u)
            sa = s**alpha
            f = np.exp(s) * s ** (alpha - beta) / (sa - z[chunk, None]) * ds
            out[chunk] = h[:, 0] * f.sum(axis=1) / (2j * np.pi)
    for i, plan in enumerate(plans):
        for _, big, ang in plan[3]:
            s_, c_ = sincospi(ang)
            logmod = big * float(c_) + (1 - beta) * math.log(big)
            if logmod > _LOG_MAX - 1.0:
                raise Overflow("pole residue exceeds the floating-point range")
            phase = complex(np.exp(1j * big * float(s_))) * complex(_cis_pi(ang * (1 - beta)))
            out[i] += math.exp(logmod) * phase / alpha
    return out.reshape(shape)


def ml_contour(z, alpha: float, beta: float = 1.0):
    """Evaluate by trapezoidal quadrature on an optimal parabolic contour.

    Poles of ``s**(alpha-beta) / (s**alpha - z)`` to the right of the chosen
    contour are accounted for by their residues.
    """
    _check_params(alpha, beta)
    rho, frac = _to_polar(z)
    out = np.full(rho.shape, rgamma(beta), dtype=complex)
    nz = rho > 0
    if np.any(nz):
        out[nz] = _contour_polar(rho[nz], frac[nz], alpha, beta)
    return out


# }}}

# {{{ dispatch


def _ml_polar(rho, frac, alpha, beta, check_boundary=False):
    rho, frac = np.broadcast_arrays(np.asarray(rho, float), np.asarray(frac, float))
    out = np.empty(rho.shape, dtype=complex)
    if alpha == 1.0 and beta == 1.0:
        z = rho * _cis_pi(frac)
        re = z.real
        if np.any(re > _LOG_MAX - 1.0):
            raise Overflow("exp(z) exceeds the floating-point range")
        # exp with exact polar phase
        out[...] = np.exp(re) * np.exp(1j * (rho * sincospi(frac)[0]))
        return out
    r0 = series_radius(alpha)
    r1 = asymptotic_radius(alpha)
    zero = rho == 0
    ser = (rho <= r0) & ~zero
    asy = rho >= r1
    mid = ~(zero | ser | asy)
    out[zero] = rgamma(beta)
    if np.any(ser):
        out[ser] = _series_polar(rho[ser], frac[ser], alpha, beta, 5000, 1e-17)[0]
    if np.any(asy):
        out[asy] = _asym_polar(rho[asy], frac[asy], alpha, beta)
        if check_boundary:
            edge = asy & (rho <= 1.1 * r1)
            if np.any(edge):
                ref = _contour_polar(rho[edge], frac[edge], alpha, beta)
                err = np.max(np.abs(out[edge] - ref) / np.maximum(np.abs(ref), 1e-300))
                if err > 1e-8:
                    warnings.warn(
                        f"series/asymptotic regions disagree by {err:.2e} near |z|={r1:g}",
                        AccuracyLoss,
                        stacklevel=3,
                    )
    if np.any(mid):
        out[mid] = _contour_polar(rho[mid], frac[mid], alpha, beta)
    return out


def mittag_leffler(z, alpha: float, beta: float = 1.0, *, check_boundary: bool = False):
    """Evaluate :math:`E_{\\alpha,\\beta}(z)` elementwise for complex ``z``.

    Relative accuracy is about 1e-12 for ``0.1 <= alpha <= 1`` on the rays
    ``arg z = -pi*gamma/2`` with ``alpha <= gamma <= 1``.
    """
    _check_params(alpha, beta)
    rho, frac = _to_polar(z)
    out = _ml_polar(rho, frac, float(alpha), float(beta), check_boundary)
    return out if out.ndim else out[()]


ml_eval = mittag_leffler


def ml_ray(r, angle: float, alpha: float, beta: float = 1.0):
    """Evaluate :math:`E_{\\alpha,\\beta}(r e^{i\\pi\\,\\mathrm{angle}})` for ``r >= 0``.

    ``angle`` is the argument in units of pi and is kept exact, so rays such
    as ``angle = -alpha/2`` give an exactly unimodular exponential part.
    """
    _check_params(alpha, beta)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("ray radius must be non-negative")
    out = _ml_polar(r, np.full(r.shape, float(angle)), float(alpha), float(beta))
    return out if out.ndim else out[()]


def ml_symbol(spec, t, xi_mag, *, allow_nontempered: bool = False):
    """Propagator symbol :math:`E_\\alpha(i^{-\\gamma} t^\\alpha |\\xi|^\\beta)`.

    ``spec`` is any object with ``alpha``, ``beta`` and ``gamma`` attributes.
    ``i**(-gamma)`` is taken as ``exp(-i*pi*gamma/2)``.
    """
    alpha, beta, gamma = float(spec.alpha), float(spec.beta), float(spec.gamma)
    if gamma < alpha and not allow_nontempered:
        raise NotTempered(
            f"gamma={gamma:g} < alpha={alpha:g}: the kernel is not a tempered distribution"
        )
    t = float(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    xi_mag = np.asarray(xi_mag, dtype=float)
    if np.any(xi_mag < 0):
        raise ValueError("xi_mag must be non-negative")
    r = t**alpha * xi_mag**beta
    return ml_ray(r, -gamma / 2.0, alpha, 1.0)


# }}}
