"""Finite-shift estimators of the increment seminorm

    sup_{|h| < delta} |h|^{-beta} || f(. + h) - f ||_{L^p(region)}

and of its time-integrated versions.  Every estimate is a lower bound of the
continuum supremum; the shift set used is recorded in the report.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field as dfield

import numpy as np
from scipy.integrate import trapezoid

from .errors import MarginError, ParameterError, ResolutionError
from .fields import lp_norm


@dataclass(frozen=True)
class ShiftSet:
    displacements: np.ndarray
    delta: float
    levels: int = 0
    directions: int = 0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.displacements, dtype=float))
        object.__setattr__(self, "displacements", h)
        mags = np.linalg.norm(h, axis=1)
        if len(h) == 0:
            raise ParameterError("empty shift set")
        if np.any(mags <= 0) or np.any(mags >= self.delta):
            raise ParameterError("every shift must satisfy 0 < |h| < delta")

    @property
    def magnitudes(self):
        return np.linalg.norm(self.displacements, axis=1)

    @property
    def d(self):
        return self.displacements.shape[1]

    def coverage(self):
        """``(distinct magnitudes, distinct directions)``."""
        mags = np.unique(np.round(self.magnitudes, 12))
        units = self.displacements / self.magnitudes[:, None]
        dirs = np.unique(np.round(units, 6), axis=0)
        return len(mags), len(dirs)

    def check_coverage(self):
        nm, nd = self.coverage()
        need = 2 if self.d == 1 else 4
        if nm < 2 or nd < need:
            raise ResolutionError(f"shift set too thin: {nm} magnitudes, {nd} directions")
        return self

    def below(self, delta):
        keep = self.magnitudes < delta
        if not keep.any():
            raise ResolutionError(f"no shift shorter than delta={delta}")
        return ShiftSet(self.displacements[keep], delta, self.levels, self.directions)

    def __len__(self):
        return len(self.displacements)


def _snap_below(vec, spacing, delta):
    m = np.rint(vec / spacing).astype(int)
    while np.linalg.norm(m * spacing) >= delta and np.any(m):
        i = int(np.argmax(np.abs(m) * spacing))
        m[i] -= np.sign(m[i])
    return m


def dyadic_shifts(lattice, delta, levels=None, directions=8):
    """Lattice shifts with magnitudes ``delta/2^j`` and evenly spread directions.

    Each target vector is rounded to the lattice and pulled strictly inside the
    ball of radius ``delta``.  ``levels=None`` descends until one lattice spacing.
    """
    spacing = np.asarray(lattice.spacing)
    d = lattice.d
    if delta <= spacing.max():
        raise ResolutionError(f"delta={delta} does not exceed the lattice spacing")
    if levels is None:
        levels = int(np.floor(np.log2(delta / spacing.min())))
    if d == 1:
        units = np.array([[1.0], [-1.0]])
    else:
        th = 2 * np.pi * np.arange(directions) / directions
        units = np.stack([np.cos(th), np.sin(th)], axis=1)
        if d == 3:
            units = np.concatenate([np.pad(units, ((0, 0), (0, 1))), [[0, 0, 1.0], [0, 0, -1.0]]])
    seen = set()
    out = []
    for j in range(levels + 1):
        r = delta / 2**j
        for u in units:
            m = _snap_below(r * u, spacing, delta)
            key = tuple(m)
            if any(m) and key not in seen:
                seen.add(key)
                out.append(m * spacing)
    return ShiftSet(np.array(out), delta, levels, len(units))


def full_shifts(lattice, delta):
    """Every nonzero lattice shift shorter than ``delta`` (one representative per periodic class)."""
    ranges = []
    for n, h in zip(lattice.shape, lattice.spacing):
        m = int(min(np.ceil(delta / h), n // 2 if lattice.periodic else n - 1))
        lo = -m if not (lattice.periodic and n % 2 == 0 and m == n // 2) else -m + 1
        ranges.append(np.arange(lo, m + 1))
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, lattice.d)
    vecs = grid * np.asarray(lattice.spacing)
    mags = np.linalg.norm(vecs, axis=1)
    keep = (mags > 0) & (mags < delta)
    return ShiftSet(vecs[keep], delta)


def union(*sets):
    vecs = np.concatenate([s.displacements for s in sets])
    _, idx = np.unique(np.round(vecs, 12), axis=0, return_index=True)
    delta = max(s.delta for s in sets)
    return ShiftSet(vecs[np.sort(idx)], delta)


@dataclass
class SeminormReport:
    value: float
    argmax_shift: tuple
    per_shift: list
    beta: float
    p: float
    delta: float
    lower_bound: bool = True
    lipschitz_probe: bool = False
    notes: list = dfield(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["hx", "hy", "|h|", "diff_norm", "ratio"])
            for row in self.per_shift:
                h = list(row["h"]) + [0.0] * (2 - len(row["h"]))
                w.writerow([repr(h[0]), repr(h[1]), repr(row["norm_h"]), repr(row["diff_norm"]), repr(row["ratio"])])

    def summary(self):
        return {
            "value": self.value,
            "argmax_shift": list(self.argmax_shift),
            "beta": self.beta,
            "p": self.p,
            "delta": self.delta,
            "n_shifts": len(self.per_shift),
            "lower_bound": self.lower_bound,
            "lipschitz_probe": self.lipschitz_probe,
        }


def _region_for(field, region, delta):
    if region is None:
        if field.domain.kind == "torus":
            return field.valid
        region = field.domain.phi_on(field.lattice) < -2 * delta
    region = np.asarray(region, dtype=bool)
    if field.domain.kind == "bounded":
        ph = field.domain.phi_on(field.lattice)
        if not region.any():
            raise MarginError("empty seminorm region")
        if -ph[region].max() <= 2 * delta:
            raise MarginError(f"region must stay more than 2*delta={2 * delta:.4g} from the boundary")
    return region


def _increment_norms(field, shifts, p, region):
    """``||f(. + h) - f||_{L^p(region)}`` for every shift (lattice shifts only)."""
    lat = field.lattice
    steps = np.rint(shifts.displacements / np.asarray(lat.spacing)).astype(int)
    if not np.allclose(steps * np.asarray(lat.spacing), shifts.displacements, atol=1e-12):
        raise ParameterError("seminorm shifts must be lattice vectors")
    data = field.data
    axes = tuple(range(1, lat.d + 1))
    valid = field.valid
    vol = lat.cell_volume
    out = np.empty(len(steps))
    for i, m in enumerate(steps):
        moved = np.roll(data, tuple(-m), axis=axes)
        if field.domain.kind == "bounded":
            ok = np.roll(valid, tuple(-m), axis=tuple(range(lat.d)))
            if not ok[region].all():
                raise MarginError("shifted region leaves the field's validity mask")
        diff = moved - data
        mag = np.abs(diff[0]) if field.components == 1 else np.sqrt(np.sum(diff**2, axis=0))
        vals = mag[region]
        out[i] = vals.max() if np.isinf(p) else (np.sum(vals**p) * vol) ** (1.0 / p)
    return out


def seminorm(field, beta, p, shifts, region=None):
    """Max over ``shifts`` of ``|h|^-beta ||f(.+h) - f||_p`` on ``region``."""
    if not 0 < beta <= 1:
        raise ParameterError("beta must lie in (0, 1]")
    if not (np.isinf(p) or p >= 1):
        raise ParameterError("p must be >= 1")
    region = _region_for(field, region, shifts.delta)
    norms = _increment_norms(field, shifts, p, region)
    mags = shifts.magnitudes
    ratios = norms / mags**beta
    k = int(np.argmax(ratios))
    rows = [
        {"h": tuple(float(x) for x in h), "norm_h": float(m), "diff_norm": float(n), "ratio": float(r)}
        for h, m, n, r in zip(shifts.displacements, mags, norms, ratios)
    ]
    rep = SeminormReport(float(ratios[k]), tuple(float(x) for x in shifts.displacements[k]), rows,
                         beta, p, shifts.delta, True, beta == 1)
    if beta == 1:
        rep.notes.append("beta = 1: Lipschitz probe")
    return rep


def time_seminorm(fields, beta, p, q, shifts, region=None):
    """``L^q`` in time (trapezoid rule) of the per-frame seminorm; ``q = inf`` takes the max."""
    vals = np.array([seminorm(f, beta, p, shifts, region).value for f in fields.frames])
    if np.isinf(q):
        return float(vals.max())
    if len(vals) < 2:
        raise ResolutionError("time integration needs at least two frames")
    return float(trapezoid(vals**q, fields.times) ** (1.0 / q))


def probe_shifts(lattice, deltas, directions=8):
    """Union of dyadic shift families anchored at each probe scale."""
    return union(*[dyadic_shifts(lattice, d, directions=directions) for d in deltas])


def vanishing_probe(fields, beta, p, q, deltas, region=None, directions=8):
    """Table ``[(delta, norm)]`` with the sup restricted to ``|h| < delta``.

    All rows draw on one master shift set, so the column is nonincreasing as
    ``delta`` decreases.
    """
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ParameterError("deltas must be strictly decreasing")
    h = max(fields.lattice.spacing)
    if deltas[-1] < 2 * h:
        raise ResolutionError(f"delta={deltas[-1]} is below two lattice spacings")
    master = probe_shifts(fields.lattice, deltas, directions)
    if region is None and fields.domain.kind == "bounded":
        region = fields.domain.phi_on(fields.lattice) < -2 * deltas[0]
    table = []
    for d in deltas:
        table.append((d, time_seminorm(fields, beta, p, q, master.below(d), region)))
    return table
