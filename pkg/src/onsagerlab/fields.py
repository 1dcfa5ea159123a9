"""Lattice fields: shifts, discrete L^p norms, energies and weak-form residuals."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from .errors import (
    DomainKindError,
    EmptyRegionError,
    MarginError,
    ParameterError,
    PositivityError,
    ShapeError,
    SupportError,
    UnsupportedShiftError,
)
from .geometry import Lattice, make_domain


def domain_id(domain):
    return f"torus{domain.d}" if domain.kind == "torus" else domain.name


class Field:
    """Samples of a scalar or vector quantity on a domain's lattice.

    ``data`` is component-major with shape ``(components, *lattice.shape)``.
    ``mask`` marks where the samples are meaningful; ``None`` means the whole
    domain (all of the torus, or ``phi < 0`` on a bounded domain).
    """

    __slots__ = ("domain", "lattice", "data", "mask", "positive")

    def __init__(self, domain, lattice, data, mask=None, positive=False):
        data = np.array(data, dtype=float)
        if data.ndim == lattice.d:
            data = data[None]
        if data.shape[1:] != tuple(lattice.shape):
            raise ShapeError(f"data shape {data.shape} does not match lattice {lattice.shape}")
        if data.shape[0] not in (1, lattice.d):
            raise ShapeError(f"fields carry 1 or {lattice.d} components, got {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field samples must be finite")
        if mask is not None:
            mask = np.array(mask, dtype=bool)
            if mask.shape != tuple(lattice.shape):
                raise ShapeError("mask shape does not match lattice")
            mask.setflags(write=False)
        if positive:
            region = data[0] if mask is None else data[0][mask]
            if data.shape[0] != 1 or region.size == 0 or region.min() <= 0:
                raise PositivityError("positive-flagged field needs strictly positive scalar samples")
        data.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "positive", bool(positive))

    def __setattr__(self, key, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def from_function(cls, domain, n_or_lattice, fn, positive=False, mask=None):
        """Sample ``fn(*coords)``; it may return a scalar array or a sequence of components."""
        lat = n_or_lattice if isinstance(n_or_lattice, Lattice) else domain.lattice(n_or_lattice)
        out = fn(*lat.mesh())
        if isinstance(out, (list, tuple)):
            out = np.stack([np.broadcast_to(np.asarray(c, dtype=float), lat.shape) for c in out])
        else:
            out = np.broadcast_to(np.asarray(out, dtype=float), lat.shape)
        return cls(domain, lat, out, mask=mask, positive=positive)

    @classmethod
    def constant(cls, domain, n_or_lattice, value, components=1, positive=False):
        lat = n_or_lattice if isinstance(n_or_lattice, Lattice) else domain.lattice(n_or_lattice)
        vals = np.broadcast_to(np.asarray(value, dtype=float).reshape(-1, *([1] * lat.d)), (components, *lat.shape))
        return cls(domain, lat, vals, positive=positive)

    @property
    def components(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.lattice.shape

    @property
    def values(self):
        """The scalar sample array (first component)."""
        return self.data[0]

    @property
    def valid(self):
        if self.mask is not None:
            return self.mask
        if self.domain.kind == "torus":
            return np.ones(self.shape, dtype=bool)
        return self.domain.phi_on(self.lattice) < 0

    def magnitude(self):
        return np.abs(self.data[0]) if self.components == 1 else np.sqrt(np.sum(self.data**2, axis=0))

    def replace(self, data=None, mask=None, positive=None, keep_mask=True):
        m = self.mask if (mask is None and keep_mask) else mask
        return Field(self.domain, self.lattice, self.data if data is None else data, m,
                     self.positive if positive is None else positive)

    def component(self, i):
        return Field(self.domain, self.lattice, self.data[i:i + 1], self.mask)

    def _combine_mask(self, other):
        if not isinstance(other, Field):
            return self.mask
        if self.mask is None:
            return other.mask
        if other.mask is None:
            return self.mask
        return self.mask & other.mask

    def _other(self, other):
        if isinstance(other, Field):
            if other.lattice != self.lattice:
                raise ShapeError("fields live on different lattices")
            return other.data
        return other

    def __add__(self, other):
        return Field(self.domain, self.lattice, self.data + self._other(other), self._combine_mask(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.domain, self.lattice, self.data - self._other(other), self._combine_mask(other))

    def __rsub__(self, other):
        return Field(self.domain, self.lattice, self._other(other) - self.data, self._combine_mask(other))

    def __mul__(self, other):
        return Field(self.domain, self.lattice, self.data * self._other(other), self._combine_mask(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.domain, self.lattice, -self.data, self.mask)

    def __repr__(self):
        return f"Field({domain_id(self.domain)}, shape={self.shape}, components={self.components})"


def vector(*components):
    """Stack scalar fields into a vector field."""
    first = components[0]
    data = np.concatenate([c.data for c in components])
    mask = None
    for c in components:
        if c.mask is not None:
            mask = c.mask if mask is None else mask & c.mask
    return Field(first.domain, first.lattice, data, mask)


class TimeSeriesField:
    """Frames of one field at strictly increasing times."""

    def __init__(self, times, frames):
        times = np.asarray(times, dtype=float)
        frames = list(frames)
        if times.ndim != 1 or len(times) != len(frames) or len(frames) == 0:
            raise ShapeError("need one frame per time instant")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("frame times must be strictly increasing")
        f0 = frames[0]
        for f in frames[1:]:
            if f.lattice != f0.lattice or f.components != f0.components or f.domain is not f0.domain:
                raise ShapeError("all frames must share domain, lattice and component count")
        self.times = times
        self.frames = frames

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(zip(self.times, self.frames))

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def domain(self):
        return self.frames[0].domain

    @property
    def lattice(self):
        return self.frames[0].lattice

    @property
    def span(self):
        return float(self.times[-1] - self.times[0])

    def map(self, fn):
        return TimeSeriesField(self.times, [fn(f) for f in self.frames])


def _lattice_steps(lattice, h):
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.size != lattice.d:
        raise ShapeError(f"shift has {h.size} components, lattice is {lattice.d}-dimensional")
    k = h / np.asarray(lattice.spacing)
    ki = np.rint(k)
    return h, ki.astype(int), bool(np.all(np.abs(k - ki) < 1e-9))


def shift(field, h):
    """The field ``x -> f(x + h)``.

    Lattice-commensurate shifts are index rotations.  On the torus other shifts
    use trigonometric interpolation; bounded domains accept lattice shifts only,
    and the result's mask keeps the points whose shifted partner is valid.
    """
    h, k, commensurate = _lattice_steps(field.lattice, h)
    axes = tuple(range(1, field.lattice.d + 1))
    if field.domain.kind == "torus":
        if commensurate:
            return field.replace(np.roll(field.data, tuple(-k), axis=axes))
        spectrum = np.fft.fftn(field.data, axes=axes)
        phase = np.ones(field.shape, dtype=complex)
        for ax, (n, dx, hx) in enumerate(zip(field.shape, field.lattice.spacing, h)):
            kx = 2 * np.pi * np.fft.fftfreq(n, d=dx)
            shp = [1] * field.lattice.d
            shp[ax] = n
            phase = phase * np.exp(1j * kx * hx).reshape(shp)
        return field.replace(np.real(np.fft.ifftn(spectrum * phase, axes=axes)))
    if not commensurate:
        raise UnsupportedShiftError("bounded-domain shifts must be lattice-commensurate")
    valid = field.valid
    depth = ndimage.distance_transform_edt(valid, sampling=field.lattice.spacing)
    if np.linalg.norm(h) >= depth.max():
        raise MarginError(f"|h|={np.linalg.norm(h):.4g} exceeds the validity mask margin {depth.max():.4g}")
    data = np.roll(field.data, tuple(-k), axis=axes)
    inside = np.ones(field.shape, dtype=bool)
    for ax, kk in enumerate(k):
        idx = np.arange(field.shape[ax])
        ok = (idx + kk >= 0) & (idx + kk < field.shape[ax])
        shp = [1] * field.lattice.d
        shp[ax] = -1
        inside &= ok.reshape(shp)
    mask = valid & np.roll(valid, tuple(-k), axis=tuple(range(field.lattice.d))) & inside
    return Field(field.domain, field.lattice, np.where(mask, data, 0.0), mask)


def lp_norm(field, p, region=None):
    """Discrete ``L^p`` norm over ``region`` (midpoint rule); ``p = inf`` gives the max."""
    region = field.valid if region is None else np.asarray(region, dtype=bool)
    if not region.any():
        raise EmptyRegionError("L^p norm over an empty region")
    mag = field.magnitude()[region]
    if np.isinf(p):
        return float(mag.max())
    if p < 1:
        raise ParameterError("p must be >= 1")
    return float((np.sum(mag**p) * field.lattice.cell_volume) ** (1.0 / p))


def integrate(values, lattice, region=None):
    vals = np.asarray(values)
    if region is not None:
        vals = vals[region]
    return float(np.sum(vals) * lattice.cell_volume)


def energy_incompressible(rho, u):
    """Total kinetic energy ``int rho |u|^2`` (no factor 1/2)."""
    if not rho.positive:
        raise PositivityError("density must be positive-flagged")
    if rho.components != 1 or u.components != u.lattice.d or rho.lattice != u.lattice:
        raise ShapeError("need a scalar density and a d-component velocity on one lattice")
    region = rho.valid & u.valid
    return integrate(rho.data[0] * np.sum(u.data**2, axis=0), rho.lattice, region)


def energy_compressible(rho, u, gamma):
    """Total energy ``int (rho|u|^2/2 + rho^gamma/(gamma-1))``."""
    if not gamma > 1:
        raise ParameterError("isentropic exponent gamma must exceed 1")
    if not rho.positive:
        raise PositivityError("density must be positive-flagged")
    if rho.components != 1 or u.components != u.lattice.d or rho.lattice != u.lattice:
        raise ShapeError("need a scalar density and a d-component velocity on one lattice")
    r = rho.data[0]
    dens = 0.5 * r * np.sum(u.data**2, axis=0) + r**gamma / (gamma - 1)
    return integrate(dens, rho.lattice, rho.valid & u.valid)


@dataclass(frozen=True)
class TrigBumpTest:
    """Test function ``bump(t) * cos(2 pi m.x/L + phase)`` (times ``direction`` for vector tests).

    The time factor is the C-infinity bump supported on ``[t0, t1]``.
    """

    wavevector: tuple
    t0: float
    t1: float
    phase: float = 0.0
    direction: Optional[tuple] = None
    amplitude: float = 1.0

    def bump(self, t):
        t = np.asarray(t, dtype=float)
        s = (2 * t - self.t0 - self.t1) / (self.t1 - self.t0)
        inside = np.abs(s) < 1
        ss = np.where(inside, s, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - ss**2)), 0.0) * self.amplitude

    def dbump(self, t):
        t = np.asarray(t, dtype=float)
        s = (2 * t - self.t0 - self.t1) / (self.t1 - self.t0)
        inside = np.abs(s) < 1
        ss = np.where(inside, s, 0.0)
        ds = 2.0 / (self.t1 - self.t0)
        return np.where(inside, self.bump(t) * (-2 * ss / (1 - ss**2) ** 2) * ds, 0.0)

    def _arg(self, lattice, periods):
        arg = np.full(lattice.shape, self.phase)
        for m, x, L in zip(self.wavevector, lattice.mesh(), periods):
            arg = arg + 2 * np.pi * m * x / L
        return arg

    def spatial(self, lattice, periods):
        return np.cos(self._arg(lattice, periods))

    def spatial_grad(self, lattice, periods):
        s = -np.sin(self._arg(lattice, periods))
        return np.stack([s * 2 * np.pi * m / L for m, L in zip(self.wavevector, periods)])

    def unit_direction(self, d):
        e = np.zeros(d)
        if self.direction is None:
            e[0] = 1.0
        else:
            e[:] = self.direction
            e /= np.linalg.norm(e)
        return e


def weak_form_residual(rho, u, P, test):
    """Mass and momentum residuals of the weak Euler formulation against ``test``.

    Spatial midpoint quadrature on the torus lattice, trapezoid rule over the
    frame times.  Returns ``(mass_residual, momentum_residual)``.
    """
    dom = rho.domain
    if dom.kind != "torus":
        raise DomainKindError("weak-form residuals use periodic trig test functions (torus only)")
    times = rho.times
    if test.t0 < times[0] - 1e-14 or test.t1 > times[-1] + 1e-14 or test.t0 >= test.t1:
        raise SupportError(f"test support [{test.t0}, {test.t1}] not inside [{times[0]}, {times[-1]}]")
    lat = rho.lattice
    S = test.spatial(lat, dom.periods)
    gS = test.spatial_grad(lat, dom.periods)
    e = test.unit_direction(lat.d)
    b, db = test.bump(times), test.dbump(times)
    mass_t, mom_t = [], []
    for k in range(len(times)):
        r = rho[k].data[0]
        v = u[k].data
        p = P[k].data[0]
        ru = r * v
        ugs = np.einsum("i...,i...->...", v, gS)
        mass = db[k] * r * S + b[k] * np.einsum("i...,i...->...", ru, gS)
        ue = np.einsum("i,i...->...", e, v)
        mom = db[k] * r * ue * S + b[k] * r * ue * ugs + b[k] * p * np.einsum("i,i...->...", e, gS)
        mass_t.append(np.sum(mass) * lat.cell_volume)
        mom_t.append(np.sum(mom) * lat.cell_volume)
    return float(trapezoid(mass_t, times)), float(trapezoid(mom_t, times))


def save_field(stem, field, time=None):
    """Write ``stem.bin`` (little-endian float64, component-major) plus a JSON header."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    field.data.astype("<f8").tofile(stem.with_suffix(".bin"))
    header = {
        "domain": domain_id(field.domain),
        "domain_params": dict(field.domain.params),
        "shape": list(field.shape),
        "components": field.components,
        "time": time,
        "positive": field.positive,
        "dtype": "<f8",
        "order": "component-major, C order",
        "has_mask": field.mask is not None,
    }
    if field.mask is not None:
        field.mask.astype(np.uint8).tofile(stem.with_suffix(".mask.bin"))
    stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))
    return stem.with_suffix(".bin"), stem.with_suffix(".json")


def load_field(stem, domain=None):
    """Inverse of :func:`save_field`; returns ``(field, time)``."""
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    if domain is None:
        domain = make_domain(header["domain"], **header.get("domain_params", {}))
    lat = domain.lattice(tuple(header["shape"]))
    data = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    comps = header["components"]
    if data.size != comps * lat.size:
        raise ShapeError("binary payload length does not match header")
    mask = None
    if header.get("has_mask"):
        mask = np.fromfile(stem.with_suffix(".mask.bin"), dtype=np.uint8).reshape(lat.shape).astype(bool)
    f = Field(domain, lat, data.reshape(comps, *lat.shape), mask, header.get("positive", False))
    return f, header.get("time")


def export_csv(path, field, index: Sequence[int] = ()):
    """Write a 1D or 2D slice as CSV (coordinates then components).

    ``index`` pins the trailing axes of higher-dimensional fields.
    """
    axes = field.lattice.axes()
    keep = field.lattice.d - len(index)
    if keep not in (1, 2):
        raise ShapeError("CSV export handles 1D or 2D slices")
    sl = (slice(None),) * keep + tuple(index)
    vals = field.data[(slice(None),) + sl]
    names = ["x", "y", "z"][:keep] + [f"f{i}" for i in range(field.components)]
    grids = np.meshgrid(*axes[:keep], indexing="ij")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for idx in np.ndindex(*vals.shape[1:]):
            w.writerow([repr(float(g[idx])) for g in grids] + [repr(float(v)) for v in vals[(slice(None),) + idx]])
