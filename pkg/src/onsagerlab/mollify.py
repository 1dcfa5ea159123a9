"""Mollification ``f^eps = f * omega_eps`` on the torus (spectral) and bounded domains (direct sums)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft, integrate, ndimage, signal

from .errors import ParameterError, PositivityError, ResolutionError, ShapeError
from .fields import Field

PROFILES = ("bump", "gaussian")
_GAUSS_SIGMA = 1.0 / 3.0


def _profile(name, r2):
    """Unnormalised radial profile on the unit ball, and d(profile)/d(r^2)."""
    inside = r2 < 1.0
    s = np.where(inside, r2, 0.0)
    if name == "bump":
        v = np.where(inside, np.exp(-1.0 / (1.0 - s)), 0.0)
        dv = np.where(inside, -v / (1.0 - s) ** 2, 0.0)
    elif name == "gaussian":
        v = np.where(inside, np.exp(-s / (2 * _GAUSS_SIGMA**2)), 0.0)
        dv = np.where(inside, -v / (2 * _GAUSS_SIGMA**2), 0.0)
    else:
        raise ParameterError(f"unknown kernel profile {name!r}; choose from {PROFILES}")
    return v, dv


@lru_cache(maxsize=None)
def _unit_mass(name, d):
    if d == 1:
        val = integrate.quad(lambda r: _profile(name, r * r)[0], -1, 1, epsabs=1e-15, epsrel=1e-13)[0]
    else:
        area = 2 * np.pi ** (d / 2) / _gamma_fn(d / 2)
        val = area * integrate.quad(lambda r: r ** (d - 1) * _profile(name, r * r)[0], 0, 1,
                                    epsabs=1e-15, epsrel=1e-13)[0]
    return val


def _gamma_fn(x):
    from math import gamma

    return gamma(x)


@dataclass(frozen=True)
class MollifierKernel:
    """Radial unit-mass kernel of support radius ``epsilon`` in ``d`` dimensions."""

    epsilon: float
    d: int = 1
    profile: str = "bump"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("kernel scale epsilon must be positive")
        if self.profile not in PROFILES:
            raise ParameterError(f"unknown kernel profile {self.profile!r}")

    def with_epsilon(self, eps):
        return MollifierKernel(eps, self.d, self.profile)

    def __call__(self, x):
        """Continuous ``omega_eps(x)`` for points ``x`` of shape ``(..., d)`` (or ``(...)`` in 1D)."""
        x = np.asarray(x, dtype=float)
        r2 = (x**2 if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1) else np.sum(x**2, axis=-1)) / self.epsilon**2
        v, _ = _profile(self.profile, r2)
        return v / (_unit_mass(self.profile, self.d) * self.epsilon**self.d)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x**2, axis=-1) / self.epsilon**2
        _, dv = _profile(self.profile, r2)
        scale = 2.0 / (_unit_mass(self.profile, self.d) * self.epsilon ** (self.d + 2))
        return (scale * dv)[..., None] * x


def _check_resolution(kernel, lattice):
    h = max(lattice.spacing)
    if kernel.epsilon < 2 * h:
        raise ResolutionError(f"epsilon={kernel.epsilon:.4g} is below two lattice spacings ({2 * h:.4g})")
    if kernel.d != lattice.d:
        raise ShapeError(f"kernel dimension {kernel.d} does not match lattice dimension {lattice.d}")


def _offsets(lattice):
    """Minimal-image lattice offsets, shape ``(*lattice.shape, d)``."""
    grids = []
    for n, h in zip(lattice.shape, lattice.spacing):
        j = np.arange(n)
        j = np.where(j > n // 2, j - n, j)
        grids.append(j * h)
    return np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1)


@lru_cache(maxsize=64)
def _periodic_transforms(kernel, lattice):
    """Transforms of the renormalised kernel and of its analytic gradient."""
    y = _offsets(lattice)
    w = kernel(y) * lattice.cell_volume
    mass = w.sum()
    w = w / mass
    g = kernel.gradient(y) * lattice.cell_volume / mass
    axes = tuple(range(lattice.d))
    what = sfft.rfftn(w, axes=axes)
    ghat = np.stack([sfft.rfftn(g[..., i], axes=axes) for i in range(lattice.d)])
    for a in (what, ghat):
        a.setflags(write=False)
    return what, ghat


@lru_cache(maxsize=64)
def _stencils(kernel, spacing):
    """Renormalised kernel and gradient stencils for direct summation (odd-sized, centred)."""
    half = [int(np.ceil(kernel.epsilon / h)) for h in spacing]
    grids = [np.arange(-m, m + 1) * h for m, h in zip(half, spacing)]
    y = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1)
    vol = float(np.prod(spacing))
    w = kernel(y) * vol
    mass = w.sum()
    g = kernel.gradient(y) * vol / mass
    w = w / mass
    for a in (w, g):
        a.setflags(write=False)
    return w, g


def _rfreqs(lattice):
    """Angular wavenumbers broadcastable against an ``rfftn`` spectrum."""
    ks = []
    d = lattice.d
    for ax, (n, h) in enumerate(zip(lattice.shape, lattice.spacing)):
        k = 2 * np.pi * (np.fft.rfftfreq(n, d=h) if ax == d - 1 else np.fft.fftfreq(n, d=h))
        if n % 2 == 0:
            k[n // 2 if ax < d - 1 else -1] = 0.0  # zero the Nyquist derivative
        shp = [1] * d
        shp[ax] = -1
        ks.append(k.reshape(shp))
    return ks


def _split_offset(field):
    """Subtract one sample per component so constant fields are mollified exactly."""
    valid = field.valid
    first = np.argmax(valid.reshape(-1))
    ref = field.data.reshape(field.components, -1)[:, first]
    return field.data - ref.reshape(-1, *([1] * field.lattice.d)), ref


def _eroded(field, stencil):
    foot = np.ones(stencil.shape, dtype=bool)
    return ndimage.binary_erosion(field.valid, structure=foot, border_value=0)


def mollify(field, kernel):
    """Mollified field.  Bounded domains get their validity mask shrunk by ``eps``."""
    lat = field.lattice
    _check_resolution(kernel, lat)
    centred, ref = _split_offset(field)
    ref = ref.reshape(-1, *([1] * lat.d))
    axes = tuple(range(1, lat.d + 1))
    if field.domain.kind == "torus":
        if kernel.epsilon >= 0.5 * min(field.domain.periods):
            raise ParameterError("epsilon must be below half the smallest period")
        what, _ = _periodic_transforms(kernel, lat)
        out = sfft.irfftn(sfft.rfftn(centred, axes=axes) * what, s=lat.shape, axes=axes)
        return Field(field.domain, lat, out + ref, field.mask)
    w, _ = _stencils(kernel, lat.spacing)
    valid = field.valid
    filled = np.where(valid, centred, 0.0)
    out = np.stack([signal.fftconvolve(c, w, mode="same") for c in filled])
    mask = _eroded(field, w)
    return Field(field.domain, lat, np.where(mask, out + ref, 0.0), mask)


def grad_mollified(field, kernel, method="spectral"):
    """Gradient of the mollified scalar field.

    ``method="spectral"`` differentiates ``f^eps`` in Fourier space (torus only);
    ``method="direct"`` convolves with the analytic kernel gradient.
    """
    lat = field.lattice
    _check_resolution(kernel, lat)
    if field.components != 1:
        raise ShapeError("grad_mollified takes a scalar field")
    centred, _ = _split_offset(field)
    c = centred[0]
    if field.domain.kind == "torus":
        if kernel.epsilon >= 0.5 * min(field.domain.periods):
            raise ParameterError("epsilon must be below half the smallest period")
        what, ghat = _periodic_transforms(kernel, lat)
        axes = tuple(range(lat.d))
        fhat = sfft.rfftn(c, axes=axes)
        if method == "spectral":
            comps = [sfft.irfftn(1j * k * what * fhat, s=lat.shape, axes=axes) for k in _rfreqs(lat)]
        elif method == "direct":
            comps = [sfft.irfftn(gh * fhat, s=lat.shape, axes=axes) for gh in ghat]
        else:
            raise ParameterError(f"unknown method {method!r}")
        return Field(field.domain, lat, np.stack(comps), field.mask)
    w, g = _stencils(kernel, lat.spacing)
    filled = np.where(field.valid, c, 0.0)
    comps = [signal.fftconvolve(filled, g[..., i], mode="same") for i in range(lat.d)]
    mask = _eroded(field, w)
    return Field(field.domain, lat, np.where(mask, np.stack(comps), 0.0), mask)


def mollify_power(field, kernel, gamma):
    """``((rho^gamma)^eps, (rho^eps)^gamma)`` on their common validity region."""
    if not gamma > 1:
        raise ParameterError("gamma must exceed 1")
    if field.components != 1 or np.any(field.values[field.valid] <= 0):
        raise PositivityError("mollify_power needs a strictly positive scalar field")
    vals = np.where(field.valid, field.values, 1.0)
    powered = field.replace(vals**gamma)
    a = mollify(powered, kernel)
    b_mol = mollify(field.replace(vals), kernel)
    b = b_mol.replace(np.where(b_mol.valid, np.abs(b_mol.data), 1.0) ** gamma)
    mask = a.mask if a.mask is not None else None
    return a, Field(field.domain, field.lattice, b.data, mask)
