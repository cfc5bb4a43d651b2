r"""Periodic pseudospectral fields and Fourier-multiplier propagators.

The continuum convention is

.. math::

    \hat f(\xi) = \int f(x) e^{-ix\cdot\xi}\,dx, \qquad
    f(x) = (2\pi)^{-d} \int \hat f(\xi) e^{ix\cdot\xi}\,d\xi,

approximated on the box :math:`[-L/2, L/2)^d` with ``n`` nodes per axis.
Space samples are stored with ``x = 0`` at index ``n // 2``; frequency
samples are stored centred, ``xi_k = 2*pi*k/L`` for ``k = -n/2 .. n/2-1``.
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import mlf
from ._io import atomic_write
from .errors import NotTempered, ShapeMismatch

__all__ = [
    "DispersionTable",
    "Field",
    "Grid",
    "SymbolSpec",
    "apply_multiplier",
    "apply_residual",
    "boundary_mass",
    "inverse_transform",
    "load_field",
    "preset",
    "propagate_halfwave",
    "propagate_ml",
    "propagate_unitary",
    "radial_multiplier",
    "required_extent",
    "residual_multiplier",
    "save_field",
    "transform",
]

DOMAINS = ("space", "frequency")


@dataclass(frozen=True)
class SymbolSpec:
    """Orders of :math:`i^\\gamma \\partial_t^\\alpha u = (-\\Delta)^{\\beta/2} u`."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    @property
    def tempered(self) -> bool:
        return self.gamma >= self.alpha


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with the same extent and node count on every axis."""

    dim: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.extent > 0:
            raise ValueError("extent must be positive")
        n = self.points
        if n < 8 or n & (n - 1):
            raise ValueError(f"points must be a power of two >= 8, got {n}")

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def spacing(self) -> float:
        return self.extent / self.points

    @property
    def freq_spacing(self) -> float:
        return 2 * math.pi / self.extent

    @property
    def nyquist(self) -> float:
        return math.pi * self.points / self.extent

    def axis(self):
        return (np.arange(self.points) - self.points // 2) * self.spacing

    def freq_axis(self):
        return (np.arange(self.points) - self.points // 2) * self.freq_spacing

    def coords(self):
        ax = self.axis()
        return np.meshgrid(*([ax] * self.dim), indexing="ij")

    def radius(self):
        return np.sqrt(sum(c**2 for c in self.coords()))

    def xi_magnitude(self):
        """|xi| at every node, centred ordering."""
        ax = self.freq_axis()
        return np.sqrt(sum(c**2 for c in np.meshgrid(*([ax] * self.dim), indexing="ij")))

    def cell_volume(self) -> float:
        return self.spacing**self.dim


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, tagged as living in space or frequency."""

    grid: Grid
    samples: np.ndarray = field(repr=False)
    domain: str = "space"

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}")
        arr = np.array(self.samples, dtype=complex, copy=True)
        if arr.shape != self.grid.shape:
            raise ShapeMismatch(f"samples have shape {arr.shape}, grid expects {self.grid.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def norm(self, p=2) -> float:
        """Riemann-sum L^p norm in whichever domain the field lives."""
        a = np.abs(self.samples)
        if p == np.inf:
            return float(a.max())
        if self.domain == "space":
            w = self.grid.cell_volume()
        else:
            w = (self.grid.freq_spacing / (2 * math.pi)) ** self.grid.dim
        return float((np.sum(a**p) * w) ** (1.0 / p))


# {{{ transforms


def _fft_index(grid: Grid):
    k = np.rint(sfft.fftfreq(grid.points) * grid.points).astype(np.int64)
    return k


@functools.lru_cache(maxsize=32)
def _radial_table(grid: Grid):
    """Distinct |xi| values and the inverse map, fft ordering."""
    k = _fft_index(grid)
    ksq = sum(c**2 for c in np.meshgrid(*([k] * grid.dim), indexing="ij", sparse=True))
    uniq, inv = np.unique(ksq, return_inverse=True)
    xi = grid.freq_spacing * np.sqrt(uniq.astype(float))
    inv = inv.reshape(grid.shape)
    xi.flags.writeable = False
    inv.flags.writeable = False
    return xi, inv


def _fft_frequencies(grid: Grid):
    k = _fft_index(grid) * grid.freq_spacing
    return np.meshgrid(*([k] * grid.dim), indexing="ij")


def transform(f: Field) -> Field:
    """Continuum-scaled forward transform of a space-domain field."""
    if f.domain != "space":
        raise ShapeMismatch("transform expects a space-domain field")
    g = f.grid
    axes = tuple(range(g.dim))
    F = sfft.fftshift(sfft.fftn(sfft.ifftshift(f.samples, axes=axes), axes=axes), axes=axes)
    return Field(g, F * g.cell_volume(), "frequency")


def inverse_transform(f: Field) -> Field:
    """Inverse of :func:`transform`."""
    if f.domain != "frequency":
        raise ShapeMismatch("inverse_transform expects a frequency-domain field")
    g = f.grid
    axes = tuple(range(g.dim))
    u = sfft.fftshift(sfft.ifftn(sfft.ifftshift(f.samples, axes=axes), axes=axes), axes=axes)
    return Field(g, u / g.cell_volume(), "space")


def _spectrum(phi: Field):
    """Unscaled fft of the samples (fft ordering); multipliers act on this."""
    if phi.domain != "space":
        raise ShapeMismatch("propagators expect a space-domain field")
    return sfft.fftn(phi.samples)


def _synthesize(grid: Grid, spec_fft) -> Field:
    return Field(grid, sfft.ifftn(spec_fft), "space")


def radial_multiplier(grid: Grid, fn, mask=None):
    """Evaluate ``fn(|xi|)`` once per distinct |xi| and scatter to fft ordering.

    ``mask(xi)`` may restrict evaluation; other nodes get 0.
    """
    xi, inv = _radial_table(grid)
    vals = np.zeros(xi.shape, dtype=complex)
    sel = np.ones(xi.shape, bool) if mask is None else np.asarray(mask(xi), bool)
    if np.any(sel):
        vals[sel] = fn(xi[sel])
    return vals[inv]


def apply_multiplier(phi: Field, mult) -> Field:
    """Apply a multiplier given in fft ordering (array) or as ``fn(|xi|)``."""
    F = _spectrum(phi)
    if callable(mult):
        mult = radial_multiplier(phi.grid, mult)
    mult = np.asarray(mult)
    if mult.shape != F.shape:
        raise ShapeMismatch(f"multiplier shape {mult.shape} != field shape {F.shape}")
    return _synthesize(phi.grid, F * mult)


# }}}

# {{{ propagators


def propagate_ml(phi: Field, spec: SymbolSpec, t: float, *, allow_nontempered=False) -> Field:
    """Mittag-Leffler flow: multiply by :math:`E_\\alpha(i^{-\\gamma}t^\\alpha|\\xi|^\\beta)`."""
    if not spec.tempered and not allow_nontempered:
        raise NotTempered(f"gamma={spec.gamma} < alpha={spec.alpha}")
    if t < 0:
        raise ValueError("t must be non-negative")
    if phi.domain != "space":
        raise ShapeMismatch("propagate_ml expects a space-domain field")
    if t == 0:
        return phi
    return apply_multiplier(
        phi, lambda xi: mlf.ml_symbol(spec, t, xi, allow_nontempered=allow_nontempered)
    )


def propagate_halfwave(phi: Field, t: float) -> Field:
    """Half-wave flow with multiplier ``exp(-i t |xi|)``."""
    if t == 0:
        return phi
    return apply_multiplier(phi, lambda xi: np.exp(-1j * t * xi))


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """A real dispersion relation ``w(xi)``, closed form or tabulated.

    Closed forms: ``abs`` (|xi|), ``square`` (|xi|^2), ``power`` (|xi|^a),
    ``indicator`` (1 on |xi| <= radius), ``linear`` (c . xi) and
    ``polynomial`` (sum of c_k xi^k, one dimension only).
    """

    kind: str
    params: tuple = ()
    values: np.ndarray | None = field(default=None, repr=False)

    KINDS = ("abs", "square", "power", "indicator", "linear", "polynomial", "tabulated")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown dispersion kind {self.kind!r}")
        if self.kind == "tabulated":
            v = np.asarray(self.values)
            if np.iscomplexobj(v):
                if np.any(v.imag != 0):
                    raise ValueError("tabulated dispersion must be real-valued")
                v = v.real
            v = np.array(v, dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError("tabulated dispersion must be finite at every node")
            v.flags.writeable = False
            object.__setattr__(self, "values", v)

    @classmethod
    def absolute(cls):
        return cls("abs")

    @classmethod
    def square(cls):
        return cls("square")

    @classmethod
    def power(cls, a: float):
        return cls("power", (float(a),))

    @classmethod
    def indicator(cls, radius: float = 1.0):
        return cls("indicator", (float(radius),))

    @classmethod
    def linear(cls, *c: float):
        return cls("linear", tuple(float(x) for x in c))

    @classmethod
    def polynomial(cls, *coeffs: float):
        """Coefficients in increasing degree: ``polynomial(0, 0, 1)`` is xi**2."""
        return cls("polynomial", tuple(float(x) for x in coeffs))

    @classmethod
    def tabulated(cls, values):
        return cls("tabulated", (), values)

    @property
    def closed_form(self) -> bool:
        return self.kind != "tabulated"

    @property
    def degree(self):
        """Polynomial degree, or None when ``w`` is not a polynomial."""
        if self.kind == "square":
            return 2
        if self.kind == "linear":
            return 1 if any(self.params) else 0
        if self.kind == "polynomial":
            nz = [k for k, c in enumerate(self.params) if c != 0]
            return nz[-1] if nz else 0
        return None

    def __call__(self, *xi):
        """Evaluate at frequency components ``xi_1, ..., xi_d`` (broadcast arrays)."""
        if self.kind == "tabulated":
            raise TypeError("tabulated dispersion has no off-grid evaluation")
        xi = [np.asarray(c, dtype=float) for c in xi]
        mag = np.sqrt(sum(c**2 for c in xi))
        if self.kind == "abs":
            return mag
        if self.kind == "square":
            return mag**2
        if self.kind == "power":
            return mag ** self.params[0]
        if self.kind == "indicator":
            return (mag <= self.params[0]).astype(float)
        if self.kind == "linear":
            if len(self.params) != len(xi):
                raise ShapeMismatch(
                    f"linear dispersion has {len(self.params)} coefficients for {len(xi)} axes"
                )
            return sum(c * x for c, x in zip(self.params, xi))
        if len(xi) != 1:
            raise ShapeMismatch("polynomial dispersion is one-dimensional")
        return np.polynomial.polynomial.polyval(xi[0], self.params)

    def on_grid(self, grid: Grid):
        """Values at every frequency node, fft ordering."""
        if self.kind == "tabulated":
            v = self.values
            if v.shape != grid.shape:
                raise ShapeMismatch(f"tabulated shape {v.shape} != grid shape {grid.shape}")
            return sfft.ifftshift(v)
        return self(*_fft_frequencies(grid))


def propagate_unitary(phi: Field, w: DispersionTable, t: float) -> Field:
    """Flow of ``i u_t = L u`` with ``L`` the multiplier ``w(xi)``."""
    if t == 0:
        return phi
    vals = w.on_grid(phi.grid)
    return apply_multiplier(phi, np.exp(-1j * t * vals))


def residual_multiplier(alpha: float, t: float, xi_mag):
    """:math:`E_\\alpha(i^{-\\alpha}t^\\alpha|\\xi|^\\alpha) - e^{-it|\\xi|}/\\alpha`.

    Beyond the asymptotic radius the exponential parts cancel exactly, so
    only the algebraic tail of the expansion is summed there.
    """
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    xi_mag = np.asarray(xi_mag, dtype=float)
    r = float(t) ** alpha * xi_mag**alpha
    out = np.empty(r.shape, dtype=complex)
    far = r >= mlf.asymptotic_radius(alpha)
    near = ~far
    if alpha == 1.0:
        return np.zeros(r.shape, dtype=complex) if r.ndim else complex(0)
    if np.any(far):
        out[far] = mlf._asym_polar(r[far], -alpha / 2, alpha, 1.0, exp_term=False)
    if np.any(near):
        e = mlf.ml_ray(r[near], -alpha / 2, alpha)
        out[near] = e - np.exp(-1j * float(t) * xi_mag[near]) / alpha
    return out if out.ndim else out[()]


def apply_residual(phi: Field, alpha: float, t: float) -> Field:
    """Remainder flow ``R_{t,alpha} * phi`` of the half-wave splitting."""
    return apply_multiplier(phi, lambda xi: residual_multiplier(alpha, t, xi))


# }}}

# {{{ initial data and truncation control


def _bump(r):
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _annulus_wave(x):
    out = np.ones_like(x)  # limit at x = 0 is 2 - 1
    nz = x != 0
    out[nz] = (np.sin(2 * x[nz]) - np.sin(x[nz])) / x[nz]
    return out


PRESETS = ("gaussian", "bump", "annulus_wave")


def preset(name: str, grid: Grid) -> Field:
    """Named initial datum sampled on ``grid``.

    ``gaussian`` exp(-|x|^2/2); ``bump`` exp(-1/(1-|x|^2)) on |x| < 1;
    ``annulus_wave`` (sin 2x - sin x)/x, whose transform is pi on 1 < |xi| < 2
    (one dimension only).
    """
    if name == "gaussian":
        return Field(grid, np.exp(-grid.radius() ** 2 / 2))
    if name == "bump":
        return Field(grid, _bump(grid.radius()))
    if name == "annulus_wave":
        if grid.dim != 1:
            raise ValueError("annulus_wave is defined for dim=1 only")
        return Field(grid, _annulus_wave(grid.axis()))
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


def required_extent(spec: SymbolSpec | None, t_max: float, support_radius: float) -> float:
    """Box length keeping periodic wrap-around negligible up to ``t_max``."""
    if spec is None:
        reach = t_max
    else:
        reach = t_max ** max(spec.alpha / spec.beta, 1.0)
    return 4.0 * (support_radius + reach + 10.0)


def boundary_mass(u: Field, layer: float = 0.1) -> float:
    """Fraction of L^2 mass within ``layer * L / 2`` of the box faces."""
    g = u.grid
    edge = (1 - layer) * g.extent / 2
    near = np.zeros(g.shape, bool)
    for c in g.coords():
        near |= np.abs(c) > edge
    a = np.abs(u.samples) ** 2
    total = a.sum()
    return float(a[near].sum() / total) if total > 0 else 0.0


# }}}

# {{{ binary dump

_MAGIC = b"FWF1"


def save_field(f: Field, path) -> None:
    """Write ``f`` in the FWF1 binary layout.

    Header: magic ``FWF1``, ``dim`` (uint32), ``n`` per axis (uint32), ``L``
    per axis (float64), domain byte (0 space, 1 frequency); then row-major
    little-endian float64 (re, im) pairs.
    """
    g = f.grid
    head = _MAGIC + struct.pack("<I", g.dim)
    head += struct.pack(f"<{g.dim}I", *([g.points] * g.dim))
    head += struct.pack(f"<{g.dim}d", *([g.extent] * g.dim))
    head += struct.pack("<B", DOMAINS.index(f.domain))
    body = np.ascontiguousarray(f.samples).astype("<c16").tobytes()
    atomic_write(path, head + body)


def load_field(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ShapeMismatch(f"{path}: not an FWF1 field dump")
    off = 4
    (dim,) = struct.unpack_from("<I", raw, off)
    off += 4
    if dim not in (1, 2, 3):
        raise ShapeMismatch(f"{path}: invalid dimension {dim}")
    ns = struct.unpack_from(f"<{dim}I", raw, off)
    off += 4 * dim
    ls = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    (tag,) = struct.unpack_from("<B", raw, off)
    off += 1
    if len(set(ns)) != 1 or len(set(ls)) != 1:
        raise ShapeMismatch(f"{path}: anisotropic grids are not supported")
    if tag > 1:
        raise ShapeMismatch(f"{path}: invalid domain tag {tag}")
    grid = Grid(dim, ls[0], ns[0])
    count = ns[0] ** dim
    if len(raw) - off != 16 * count:
        raise ShapeMismatch(f"{path}: expected {count} samples")
    data = np.frombuffer(raw, dtype="<c16", count=count, offset=off).reshape(grid.shape)
    return Field(grid, data, DOMAINS[tag])


# }}}
