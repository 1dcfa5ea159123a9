"""Periodic and bounded 2D domains, interior sets, collar normals and layer quadrature.

Bounded domains are described by a signed-distance function ``phi`` (negative
inside).  The interior set at depth ``r`` is ``{phi < -r}`` and the boundary
layer of width ``eps`` is ``{-eps <= phi < 0}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from skimage import measure

from .errors import CollarError, EmptyRegionError, ParameterError, ResolutionError


@dataclass(frozen=True)
class Lattice:
    """Uniform lattice.

    Periodic lattices put nodes at ``lower + i*h`` (so ``x = 0`` is a node);
    bounded lattices use cell centres ``lower + (i + 1/2)*h`` for midpoint
    quadrature.
    """

    shape: tuple
    lower: tuple
    spacing: tuple
    periodic: bool

    @property
    def d(self):
        return len(self.shape)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def size(self):
        return int(np.prod(self.shape))

    def axes(self):
        off = 0.0 if self.periodic else 0.5
        return [lo + (np.arange(n) + off) * h for lo, h, n in zip(self.lower, self.spacing, self.shape)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self):
        return np.stack(self.mesh(), axis=-1)


class Domain:
    kind = "abstract"
    d = 0
    name = ""

    def lattice(self, n):
        raise NotImplementedError


@dataclass(frozen=True)
class Torus(Domain):
    periods: tuple = (1.0, 1.0)
    name: str = "torus"

    kind = "torus"

    @property
    def params(self):
        return {"period": self.periods[0]}

    def __post_init__(self):
        if len(self.periods) == 0 or any(p <= 0 for p in self.periods):
            raise ParameterError(f"torus periods must be strictly positive, got {self.periods}")

    @property
    def d(self):
        return len(self.periods)

    @property
    def volume(self):
        return float(np.prod(self.periods))

    def lattice(self, n):
        shape = (n,) * self.d if np.isscalar(n) else tuple(n)
        if len(shape) != self.d:
            raise ParameterError(f"lattice rank {len(shape)} does not match torus dimension {self.d}")
        spacing = tuple(p / m for p, m in zip(self.periods, shape))
        return Lattice(tuple(int(m) for m in shape), (0.0,) * self.d, spacing, True)


@dataclass(frozen=True, eq=False)
class Bounded2D(Domain):
    """Bounded planar domain given by a signed-distance function.

    ``sdf`` maps an array of points ``(..., 2)`` to distances; ``grad`` is an
    optional analytic gradient with the same calling convention (finite
    differences are used otherwise).  ``r0`` is the collar radius inside which
    the nearest-point projection is unique.
    """

    sdf: Callable
    lower: tuple
    upper: tuple
    r0: float
    name: str = "bounded"
    grad: Optional[Callable] = None
    eikonal_tol: float = 1e-6
    check_samples: int = 2000
    params: dict = field(default_factory=dict)

    kind = "bounded"
    d = 2

    def __post_init__(self):
        if not self.r0 > 0:
            raise ParameterError("collar radius r0 must be positive")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ParameterError("bounding box must have positive extent")
        worst = self.eikonal_defect(self.check_samples)
        if worst > self.eikonal_tol:
            raise ParameterError(f"signed-distance gradient deviates from unit length by {worst:.2e} in the collar")

    def phi(self, pts):
        return np.asarray(self.sdf(np.asarray(pts, dtype=float)), dtype=float)

    def fd_gradient(self, pts, step=1e-6):
        pts = np.asarray(pts, dtype=float)
        g = np.empty(pts.shape)
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            g[..., k] = (self.phi(pts + e) - self.phi(pts - e)) / (2 * step)
        return g

    def gradient(self, pts):
        if self.grad is not None:
            return np.asarray(self.grad(np.asarray(pts, dtype=float)), dtype=float)
        return self.fd_gradient(pts)

    def eikonal_defect(self, n):
        """Max ``||grad phi| - 1|`` (finite differences) over seeded collar samples."""
        rng = np.random.default_rng(12345)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        pts = lo + (hi - lo) * rng.random((8 * n, 2))
        ph = self.phi(pts)
        pts = pts[(ph > -self.r0) & (ph < 0)][:n]
        if len(pts) == 0:
            return 0.0
        g = self.fd_gradient(pts, step=1e-5)
        return float(np.max(np.abs(np.linalg.norm(g, axis=-1) - 1.0)))

    def lattice(self, n):
        shape = (n, n) if np.isscalar(n) else tuple(n)
        spacing = tuple((u - l) / m for l, u, m in zip(self.lower, self.upper, shape))
        return Lattice(tuple(int(m) for m in shape), tuple(self.lower), spacing, False)

    def phi_on(self, lattice):
        return self.phi(lattice.points())


def disk(radius=1.0, r0=None, pad=0.0):
    """Disk centred at the origin; default collar radius is half the radius."""

    def sdf(p):
        return np.linalg.norm(p, axis=-1) - radius

    def grad(p):
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(r > 0, p / np.where(r > 0, r, 1.0), 0.0)
        return g

    b = radius + pad
    return Bounded2D(sdf, (-b, -b), (b, b), r0 if r0 is not None else 0.5 * radius, "disk", grad,
                     params={"radius": radius, "pad": pad})


def rounded_square(half_width=1.0, fillet=0.25, pad=0.0):
    """Square with filleted corners (C^1 boundary, curvature jumps only at fillet ends).

    The exact signed distance is used, so the collar radius equals the fillet
    radius: deeper than that, the medial axis (the diagonals) is reached.
    """
    if not 0 < fillet < half_width:
        raise ParameterError("fillet radius must lie in (0, half_width)")
    inner = half_width - fillet

    def sdf(p):
        q = np.abs(p) - inner
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside - fillet

    def grad(p):
        q = np.abs(p) - inner
        s = np.where(p < 0, -1.0, 1.0)
        qp = np.maximum(q, 0.0)
        nq = np.linalg.norm(qp, axis=-1, keepdims=True)
        corner = np.where(nq > 0, qp / np.where(nq > 0, nq, 1.0), 0.0)
        flat = np.zeros_like(q)
        k = np.argmax(q, axis=-1)
        np.put_along_axis(flat, k[..., None], 1.0, axis=-1)
        g = np.where(nq > 0, corner, flat)
        return s * g

    b = half_width + pad
    return Bounded2D(sdf, (-b, -b), (b, b), fillet, "rounded_square", grad,
                     params={"half_width": half_width, "fillet": fillet, "pad": pad})


def make_domain(domain_id, **params):
    """Build a domain from its config id (``torus1/2/3``, ``disk``, ``rounded_square``)."""
    if domain_id.startswith("torus"):
        d = int(domain_id[5:] or 2)
        period = float(params.get("period", 1.0))
        return Torus((period,) * d, name=f"torus{d}")
    if domain_id == "disk":
        return disk(float(params.get("radius", 1.0)), pad=float(params.get("pad", 0.0)))
    if domain_id == "rounded_square":
        return rounded_square(float(params.get("half_width", 1.0)), float(params.get("fillet", 0.25)),
                              pad=float(params.get("pad", 0.0)))
    raise ParameterError(f"unknown domain id {domain_id!r}")


def interior_mask(domain, r, lattice):
    """Boolean mask of lattice points in the interior set at depth ``r``."""
    if r < 0:
        raise ParameterError("interior depth r must be nonnegative")
    if domain.kind == "torus":
        if r != 0:
            raise ParameterError("the torus has no boundary; interior depth must be 0")
        return np.ones(lattice.shape, dtype=bool)
    mask = domain.phi_on(lattice) < -r
    if not mask.any():
        raise EmptyRegionError(f"interior set at depth r={r} contains no lattice points")
    return mask


def normal_field(domain, x):
    """Outward unit normal of the nearest level set at collar point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    if domain.kind != "bounded":
        raise ParameterError("normal field is only defined on bounded domains")
    ph = domain.phi(x)
    inside = (ph > -domain.r0) & (ph < 0)
    if not np.all(inside):
        raise CollarError("point(s) outside the collar -r0 < phi < 0")
    g = domain.gradient(x)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def collar_normals(domain, lattice):
    """Normals on every collar lattice point; zero vectors elsewhere."""
    pts = lattice.points()
    ph = domain.phi(pts)
    inside = (ph > -domain.r0) & (ph < 0)
    out = np.zeros(pts.shape)
    if inside.any():
        out[inside] = normal_field(domain, pts[inside])
    return out


def _sum_uniform_cdf(t, a, b):
    """CDF at ``t`` of U1 + U2 with U1 ~ U[-a/2, a/2], U2 ~ U[-b/2, b/2]."""
    a, b = np.maximum(a, b), np.minimum(a, b)
    x = t + 0.5 * (a + b)
    out = np.zeros(np.broadcast(x, a, b).shape)
    degenerate = a <= 0
    only_a = (~degenerate) & (b <= 0)
    both = (~degenerate) & (b > 0)
    out = np.where(degenerate, (t >= 0).astype(float), out)
    out = np.where(only_a, np.clip(x / np.where(a > 0, a, 1.0), 0.0, 1.0), out)
    ab = np.where(both, 2 * a * b, 1.0)
    aa = np.where(a > 0, a, 1.0)
    r1 = x**2 / ab
    r2 = (x - 0.5 * b) / aa
    r3 = 1.0 - (a + b - x) ** 2 / ab
    piece = np.where(x <= 0, 0.0, np.where(x <= b, r1, np.where(x <= a, r2, np.where(x < a + b, r3, 1.0))))
    return np.where(both, piece, out)


def band_weights(domain, lattice, lo, hi):
    """Fraction of each cell lying in ``{lo <= phi < hi}``.

    The sdf is linearised over each cell, which makes the fraction exact for
    straight level sets and second-order accurate for curved ones.
    """
    pts = lattice.points()
    ph = domain.phi(pts)
    g = domain.gradient(pts)
    h = np.asarray(lattice.spacing)
    a = np.abs(g[..., 0]) * h[0]
    b = np.abs(g[..., 1]) * h[1]
    return np.clip(_sum_uniform_cdf(hi - ph, a, b) - _sum_uniform_cdf(lo - ph, a, b), 0.0, 1.0)


@dataclass(frozen=True)
class LayerSpec:
    """Boundary layer of width ``epsilon``; ``resolution`` (points per unit
    length) is only used when the integrand is given as a callable."""

    epsilon: float
    resolution: Optional[float] = None

    def validate(self, domain):
        if not 0 < self.epsilon < domain.r0:
            raise ParameterError(f"layer width must satisfy 0 < eps < r0={domain.r0}, got {self.epsilon}")


def _sample(domain, f, resolution):
    """Return ``(values, lattice)`` for a Field-like object or a callable."""
    if callable(f) and not hasattr(f, "data"):
        if resolution is None:
            raise ParameterError("a resolution is needed to sample a callable integrand")
        ext = max(u - l for l, u in zip(domain.lower, domain.upper))
        lat = domain.lattice(int(np.ceil(ext * resolution)))
        vals = np.asarray(f(lat.points()), dtype=float)
        return vals, lat
    data = np.asarray(f.data)
    vals = data[0] if data.shape[0] == 1 else np.linalg.norm(data, axis=0)
    return vals, f.lattice


def layer_integral(domain, f, layer, p=1.0):
    """``(integral of |f|^p over the layer, layer area)``."""
    layer.validate(domain)
    if p < 1:
        raise ParameterError("exponent p must be >= 1")
    vals, lat = _sample(domain, f, layer.resolution)
    w = band_weights(domain, lat, -layer.epsilon, 0.0)
    area = float(np.sum(w)) * lat.cell_volume
    if area <= 0:
        raise EmptyRegionError(f"layer of width {layer.epsilon} is empty at this resolution")
    return float(np.sum(w * np.abs(vals) ** p)) * lat.cell_volume, area


def layer_average(domain, f, layer, p=1.0):
    """Mean of ``|f|^p`` over the boundary layer of width ``layer.epsilon``."""
    total, area = layer_integral(domain, f, layer, p)
    return total / area


def _interpolant(f, lattice):
    if callable(f) and not hasattr(f, "data"):
        return lambda pts: np.asarray(f(pts), dtype=float)
    data = np.asarray(f.data)
    vals = data[0] if data.shape[0] == 1 else np.linalg.norm(data, axis=0)
    interp = RegularGridInterpolator(lattice.axes(), vals, bounds_error=False, fill_value=None)
    return interp


def coarea_check(domain, f, r1, r2, lattice=None, n_shells=32):
    """Integrate ``f`` over ``{-r2 <= phi < -r1}`` two ways.

    Returns ``(area_value, shell_value)``: the first is masked midpoint
    quadrature on the lattice, the second integrates ``f`` along extracted
    level curves ``phi = -nu`` and then over ``nu`` with the midpoint rule.
    """
    if not 0 < r1 < r2 < domain.r0:
        raise ParameterError(f"need 0 < r1 < r2 < r0={domain.r0}")
    if n_shells < 4:
        raise ResolutionError("coarea check needs at least 4 shells")
    if lattice is None:
        lattice = f.lattice if hasattr(f, "lattice") else domain.lattice(256)
    if callable(f) and not hasattr(f, "data"):
        vals = np.asarray(f(lattice.points()), dtype=float)
    else:
        vals, _ = _sample(domain, f, None)
    w = band_weights(domain, lattice, -r2, -r1)
    area_value = float(np.sum(w * vals)) * lattice.cell_volume

    g = _interpolant(f, lattice)
    ph = domain.phi_on(lattice)
    h = np.asarray(lattice.spacing)
    origin = np.asarray(lattice.lower) + 0.5 * h
    dnu = (r2 - r1) / n_shells
    shell_value = 0.0
    for k in range(n_shells):
        nu = r1 + (k + 0.5) * dnu
        line = 0.0
        for c in measure.find_contours(ph, -nu):
            xy = origin + c * h
            seg = np.diff(xy, axis=0)
            mid = 0.5 * (xy[1:] + xy[:-1])
            line += float(np.sum(np.linalg.norm(seg, axis=-1) * g(mid)))
        shell_value += line * dnu
    return area_value, shell_value
