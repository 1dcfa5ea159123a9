"""Synthetic fields with prescribed Hoelder exponent, bounded densities and
divergence-free projection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainKindError, ParameterError, ResolutionError
from .fields import Field


@dataclass(frozen=True)
class RoughSpec:
    alpha: float
    octaves: int = 8
    seed: int = 0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if self.octaves < 0:
            raise ParameterError("octaves must be nonnegative")


def _wavevectors(rng, d, octaves):
    out = []
    for j in range(octaves + 1):
        if d == 1:
            out.append(np.array([2**j]))
            continue
        while True:
            u = rng.normal(size=d)
            m = np.rint(2**j * u / np.linalg.norm(u)).astype(int)
            if np.any(m):
                out.append(m)
                break
    return out


def lacunary_scalar(domain, n, spec, min_octaves=3):
    """Weierstrass-type series ``A sum_j 2^{-alpha j} cos(2 pi m_j.x/L + phase_j)``, ``|m_j| ~ 2^j``.

    Directions and phases are drawn from ``spec.seed``.
    """
    if domain.kind != "torus":
        raise DomainKindError("lacunary synthesis is torus-only")
    if spec.octaves < min_octaves:
        raise ParameterError(f"need at least {min_octaves} octaves")
    lat = domain.lattice(n)
    rng = np.random.default_rng(spec.seed)
    ms = _wavevectors(rng, domain.d, spec.octaves)
    phases = rng.uniform(0, 2 * np.pi, size=len(ms))
    nyq = min(lat.shape) // 2
    if max(int(np.abs(m).max()) for m in ms) >= nyq:
        raise ResolutionError(f"octave 2^{spec.octaves} reaches the Nyquist wavenumber {nyq}")
    X = lat.mesh()
    f = np.zeros(lat.shape)
    for j, (m, ph) in enumerate(zip(ms, phases)):
        arg = ph + sum(2 * np.pi * mi * x / L for mi, x, L in zip(m, X, domain.periods))
        f += 2.0 ** (-spec.alpha * j) * np.cos(arg)
    return Field(domain, lat, spec.amplitude * f)


def lacunary_vector(domain, n, spec, project=True):
    """Component-wise lacunary field (independent seeds), optionally Leray-projected."""
    comps = [lacunary_scalar(domain, n, RoughSpec(spec.alpha, spec.octaves, spec.seed + 7919 * (i + 1),
                                                  spec.amplitude)).values for i in range(domain.d)]
    u = Field(domain, domain.lattice(n), np.stack(comps))
    return leray_project(u, domain) if project else u


def white_noise(domain, n, seed=0, amplitude=1.0):
    lat = domain.lattice(n)
    rng = np.random.default_rng(seed)
    return Field(domain, lat, amplitude * rng.standard_normal(lat.shape))


def bounded_density(base, m, M):
    """Affine squash of ``base`` into ``[m, M]``, centred so zero maps to ``(m+M)/2``."""
    if not (m > 0 and M > m):
        raise ParameterError("need 0 < m < M")
    vals = base.values
    sup = np.abs(vals[base.valid]).max() if base.valid.any() else 0.0
    mid, half = 0.5 * (m + M), 0.5 * (M - m)
    out = mid + (half / sup) * vals if sup > 0 else np.full_like(vals, mid)
    out = np.clip(out, m, M)
    return Field(base.domain, base.lattice, out, base.mask, positive=True)


def _wavenumbers(lattice):
    ks = []
    for ax, (n, h) in enumerate(zip(lattice.shape, lattice.spacing)):
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0  # the Nyquist mode is its own conjugate; keeps the projection real
        shp = [1] * lattice.d
        shp[ax] = -1
        ks.append(k.reshape(shp))
    return ks


def leray_project(u, domain=None):
    """Spectral projection onto divergence-free fields; the mean mode is untouched."""
    domain = domain or u.domain
    if domain.kind != "torus" or domain.d not in (2, 3):
        raise DomainKindError("Leray projection needs a 2D or 3D torus")
    if u.components != domain.d:
        raise ParameterError("Leray projection takes a vector field")
    lat = u.lattice
    axes = tuple(range(1, lat.d + 1))
    uh = np.fft.fftn(u.data, axes=axes)
    ks = _wavenumbers(lat)
    k2 = sum(k**2 for k in ks)
    k2 = np.where(k2 == 0, 1.0, k2)
    kdotu = sum(k * uh[i] for i, k in enumerate(ks))
    out = np.stack([uh[i] - k * kdotu / k2 for i, k in enumerate(ks)])
    return u.replace(np.real(np.fft.ifftn(out, axes=axes)))


def spectral_divergence(u):
    lat = u.lattice
    axes = tuple(range(1, lat.d + 1))
    uh = np.fft.fftn(u.data, axes=axes)
    ks = _wavenumbers(lat)
    return np.real(np.fft.ifftn(sum(1j * k * uh[i] for i, k in enumerate(ks)), axes=tuple(range(lat.d))))
