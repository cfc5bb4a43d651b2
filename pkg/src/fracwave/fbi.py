r"""FBI-transform probe of real-analyticity for unitary kernels.

For a dispersion relation ``w``, base point ``x``, time ``t`` and frequency
``xi`` the integral

.. math::

    I(\lambda) = \int e^{-i(t\,w(\lambda^2\xi - \lambda z) + \lambda x z)}
                 e^{-z^2/4}\,dz

decays like :math:`e^{-\sigma\lambda^2}` with :math:`\sigma > 0` when the
kernel is real-analytic at ``x``.  The fit below is numerical evidence for
finitely many ``(x, xi)`` samples, not a proof.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write, canonical_json, fingerprint, format_float
from .analysis import FitResult
from .errors import InsufficientData, QuadratureUnstable
from .spectral import DispersionTable

__all__ = ["FBIConfig", "FBIFit", "fbi_curve", "fbi_decay_exponent", "fbi_integral"]

Z_MAX = 12.0
PANEL = 16
DEFAULT_LAMBDAS = tuple(np.arange(1.0, 6.01, 0.5))


@dataclass(frozen=True)
class FBIConfig:
    w: DispersionTable
    x0: float
    t: float
    xi: float
    lambdas: tuple = DEFAULT_LAMBDAS
    quad_order: int = 128

    def __post_init__(self):
        if not self.w.closed_form:
            raise ValueError("the FBI integral needs a closed-form dispersion relation")
        lam = tuple(float(x) for x in self.lambdas)
        if any(x < 1 for x in lam) or any(b <= a for a, b in zip(lam, lam[1:])):
            raise ValueError("lambdas must be ascending and >= 1")
        if self.quad_order < 64:
            raise ValueError("quad_order must be >= 64")
        object.__setattr__(self, "lambdas", lam)

    def as_dict(self):
        return {
            "w": {"kind": self.w.kind, "params": list(self.w.params)},
            "x0": float(self.x0),
            "t": float(self.t),
            "xi": float(self.xi),
            "lambdas": list(self.lambdas),
            "quad_order": int(self.quad_order),
        }


def _phase(cfg: FBIConfig, lam: float, z):
    return cfg.t * cfg.w(lam * lam * cfg.xi - lam * z) + lam * cfg.x0 * z


def _breakpoints(cfg: FBIConfig, lam: float):
    """Points in (-Z_MAX, Z_MAX) where the phase is not smooth."""
    c = lam * cfg.xi
    pts = []
    if cfg.w.kind in ("abs", "power"):
        pts.append(c)
    elif cfg.w.kind == "indicator":
        r = cfg.w.params[0] / lam
        pts += [c - r, c + r]
    return sorted(p for p in pts if -Z_MAX < p < Z_MAX)


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


_GL = _gl(PANEL)


def _graded(end, other, ratio=0.15, levels=14):
    """Interior breakpoints between ``end`` and ``other`` shrinking geometrically toward ``end``."""
    return end + (other - end) * ratio ** np.arange(levels, 0, -1)


def _nodes(cfg: FBIConfig, lam: float, total: int):
    """Composite Gauss-Legendre nodes on [-Z_MAX, Z_MAX] with panels sized to the oscillation."""
    kinks = _breakpoints(cfg, lam)
    edges = [-Z_MAX, *kinks, Z_MAX]
    algebraic = cfg.w.kind == "power" and cfg.w.params[0] != round(cfg.w.params[0])
    probe = np.linspace(-Z_MAX, Z_MAX, 8193)
    ph = _phase(cfg, lam, probe)
    # radians per unit length, smoothed over the probe spacing
    rate = np.abs(np.diff(ph)) / np.diff(probe)
    mids = 0.5 * (probe[1:] + probe[:-1])
    zs, ws = [], []
    x, w = _GL
    per_panel = total // PANEL
    seg_len = np.diff(edges)
    for a, b, length in zip(edges[:-1], edges[1:], seg_len):
        sel = (mids >= a) & (mids <= b)
        osc = float(np.sum(rate[sel]) * (probe[1] - probe[0])) / (2 * math.pi)
        k = max(int(math.ceil(per_panel * length / (2 * Z_MAX))), int(math.ceil(osc / 2)), 1)
        br = np.linspace(a, b, k + 1)
        if algebraic:
            # |z - c|**a is not smooth at the breakpoint: grade geometrically toward it
            if a in kinks:
                br = np.concatenate([[a], _graded(a, br[1]), br[1:]])
            if b in kinks:
                br = np.concatenate([br[:-1], _graded(b, br[-2])[::-1], [b]])
        h = 0.5 * np.diff(br)
        c = 0.5 * (br[1:] + br[:-1])
        zs.append((c[:, None] + h[:, None] * x).ravel())
        ws.append((h[:, None] * w).ravel())
    return np.concatenate(zs), np.concatenate(ws)


def _integrate(cfg, lam, total):
    z, w = _nodes(cfg, lam, total)
    f = np.exp(-1j * _phase(cfg, lam, z) - 0.25 * z * z)
    return complex(np.sum(w * f)), z.size


def fbi_integral(cfg: FBIConfig, lam: float, *, floor: float = 1e-12) -> complex:
    """``I(lambda)`` by composite Gauss-Legendre quadrature on ``|z| <= 12``.

    At least ``quad_order`` nodes, more when the phase oscillates; the result
    is compared against a run with twice as many panels and
    :class:`QuadratureUnstable` is raised when they differ by more than 1e-4
    relative (differences below ``floor`` absolute are rounding noise).
    """
    lam = float(lam)
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    a, n = _integrate(cfg, lam, cfg.quad_order)
    b, _ = _integrate(cfg, lam, 2 * n)
    if abs(a - b) > max(1e-4 * abs(b), floor):
        raise QuadratureUnstable(f"node doubling moved I({lam:g}) from {a} to {b}")
    return b


def fbi_curve(cfg: FBIConfig):
    return np.array([fbi_integral(cfg, lam) for lam in cfg.lambdas])


@dataclass(frozen=True)
class FBIFit:
    """Gaussian-decay fit ``ln|I| ~ c - sigma*lambda^2 + kappa*ln(lambda)`` and its verdict.

    ``verdict`` is ``"decay"`` (sigma > 0), ``"no_decay"`` (sigma ~ 0) or
    ``"ambiguous"`` when the fit residual is too large to decide.
    """

    sigma: float
    fit: FitResult
    verdict: str
    lambdas: tuple
    abs_I: tuple
    used: tuple = field(default=())

    def as_dict(self):
        return {"sigma": self.sigma, "verdict": self.verdict, "fit": self.fit.as_dict(),
                "lambdas_used": list(self.used)}


def fbi_decay_exponent(
    cfg: FBIConfig,
    *,
    floor: float = 1e-12,
    sigma_zero: float = 0.01,
    rms_max: float = 0.1,
) -> FBIFit:
    """Fit ``ln|I| = c - sigma*lambda**2 + kappa*ln(lambda)`` by least squares.

    Samples with ``|I| <= floor`` sit in cancellation noise and are left
    out; at least 8 usable samples are required.
    """
    vals = np.abs(fbi_curve(cfg))
    lam = np.asarray(cfg.lambdas)
    use = vals > floor
    if use.sum() < 8:
        raise InsufficientData(
            f"only {int(use.sum())} of {lam.size} samples lie above the noise floor {floor:g}"
        )
    x = lam[use] ** 2
    y = np.log(vals[use])
    # algebraic prefactors (e.g. lambda**-1 from the Gaussian width) enter as kappa*ln(lambda)
    A = np.vstack([x, np.ones_like(x), np.log(lam[use])]).T
    (slope, icpt, kappa), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((y - A @ np.array([slope, icpt, kappa])) ** 2)))
    fit = FitResult(float(slope), float(icpt), rms, (float(lam[use][0]), float(lam[use][-1])),
                    int(use.sum()))
    sigma = -float(slope)
    if rms > rms_max:
        verdict = "ambiguous"
    elif abs(sigma) < sigma_zero:
        verdict = "no_decay"
    elif sigma > 0:
        verdict = "decay"
    else:
        verdict = "ambiguous"
    return FBIFit(sigma, fit, verdict, tuple(lam), tuple(float(v) for v in vals),
                  tuple(float(v) for v in lam[use]))


def fbi_csv(cfg: FBIConfig, values) -> str:
    buf = io.StringIO()
    buf.write(f"# fingerprint={fingerprint(cfg.as_dict())}\n")
    buf.write("lambda,abs_I,log_abs_I\n")
    for lam, v in zip(cfg.lambdas, values):
        a = abs(v)
        buf.write(f"{format_float(lam)},{format_float(a)},{format_float(math.log(a)) if a > 0 else '-inf'}\n")
    return buf.getvalue()


def write_fbi(cfg: FBIConfig, fitres: FBIFit | None, csv_path, json_path=None, values=None):
    values = fbi_curve(cfg) if values is None else values
    atomic_write(csv_path, fbi_csv(cfg, values))
    if json_path is not None:
        body = {"config": cfg.as_dict(), "fingerprint": fingerprint(cfg.as_dict())}
        body.update(fitres.as_dict() if fitres is not None else {"verdict": "insufficient_data"})
        atomic_write(json_path, canonical_json(body) + "\n")
