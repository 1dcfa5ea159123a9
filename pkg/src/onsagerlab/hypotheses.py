"""Evaluate the hypotheses of the energy-conservation theorems on sampled trajectories.

Finite data cannot decide a limit, so every ``o(1)`` condition is judged by the
log-log slope of the measured quantity over a decreasing probe grid:

* interior vanishing conditions: slope >= 0.1 satisfied, |slope| < 0.1
  inconclusive, otherwise violated;
* boundary-layer products: slope >= 0.1 satisfied, otherwise violated
  (a flat layer product is read as bounded away from zero);
* a sequence that is exactly zero is satisfied.

Finiteness of a seminorm is judged from the small-shift behaviour of
``|h|^-beta ||f(.+h) - f||``: a ratio that grows like ``|h|^-s`` with
``s > 0.1`` is reported as violated.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dfield
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .commutators import onsager_alpha
from .errors import DomainKindError, InputError, ParameterError
from .geometry import LayerSpec, band_weights
from .seminorms import dyadic_shifts, seminorm, vanishing_probe

SLOPE_THRESHOLD = 0.1

_INCOMPRESSIBLE = ("rho_Linf", "rho_inv_Linf", "u_L3", "P_L3/2", "rho_V2/3_inf", "u_V1/3_3", "u_vanishing")
_COMPRESSIBLE = ("rho_Linf", "rho_inv_Linf", "u_L3", "rho_Valpha_inf", "u_V1/3_3", "u_vanishing",
                 "rho_alpha_vanishing")

MANIFESTS = {
    "1.3": _INCOMPRESSIBLE,
    "1.4": _INCOMPRESSIBLE + ("u_boundary", "P_boundary"),
    "1.5": _COMPRESSIBLE,
    "1.7": _COMPRESSIBLE + ("u_boundary", "un_L1_boundary"),
}

VERDICTS = ("satisfied", "violated", "inconclusive")


@dataclass
class Condition:
    name: str
    values: list
    grid: list = dfield(default_factory=list)
    slope: Optional[float] = None
    verdict: str = "inconclusive"
    note: str = ""


@dataclass
class HypothesisReport:
    theorem: str
    conditions: list
    gamma: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        names = [c.name for c in self.conditions]
        if sorted(names) != sorted(MANIFESTS[self.theorem]) or len(set(names)) != len(names):
            raise AssertionError(f"report for {self.theorem} does not match its manifest")

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def names(self):
        return [c.name for c in self.conditions]

    @property
    def verdicts(self):
        return {c.name: c.verdict for c in self.conditions}

    def to_dict(self):
        return {"theorem": self.theorem, "gamma": self.gamma, "alpha": self.alpha,
                "conditions": [asdict(c) for c in self.conditions]}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, default=_jsonable)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def table(self):
        lines = [f"Theorem {self.theorem}" + (f"  (gamma={self.gamma:g}, alpha={self.alpha:.6g})" if self.gamma else ""),
                 f"{'condition':<22}{'verdict':<14}{'slope':>10}  values"]
        for c in self.conditions:
            s = "" if c.slope is None else f"{c.slope:10.4f}"
            vals = ", ".join(f"{v:.4g}" for v in c.values[:6])
            lines.append(f"{c.name:<22}{c.verdict:<14}{s:>10}  {vals}{'  ' + c.note if c.note else ''}")
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


@dataclass(frozen=True)
class ProbeGrid:
    """Decreasing scales for the interior (``deltas``) and boundary-layer (``epsilons``) probes."""

    deltas: tuple
    epsilons: tuple = ()
    directions: int = 8

    def __post_init__(self):
        for seq in (self.deltas, self.epsilons):
            if any(b >= a for a, b in zip(seq, seq[1:])):
                raise ParameterError("probe scales must be strictly decreasing")
        if len(self.deltas) < 2:
            raise ParameterError("need at least two probe scales")

    @classmethod
    def default(cls, domain, lattice, n=4):
        h = max(lattice.spacing)
        if domain.kind == "torus":
            top = min(domain.periods) / 8
            deltas = tuple(top / 2**k for k in range(n) if top / 2**k >= 2 * h)
            return cls(deltas)
        ext = min(u - l for l, u in zip(domain.lower, domain.upper))
        top = ext / 32
        deltas = tuple(top / 2**k for k in range(n) if top / 2**k >= 2 * h)
        eps = tuple(domain.r0 / 2 / 2**k for k in range(n) if domain.r0 / 2 / 2**k >= 2 * h)
        return cls(deltas, eps)


def _unpack(traj, need_pressure):
    rho, u = traj.rho, traj.u
    P = getattr(traj, "P", None)
    if rho is None or u is None:
        raise InputError("trajectory needs density and velocity frames")
    if need_pressure and P is None:
        raise InputError("this theorem needs pressure frames")
    return rho, u, P


def _time_norm(vals, times, q):
    vals = np.asarray(vals, dtype=float)
    if np.isinf(q):
        return float(vals.max())
    if len(vals) == 1:
        return float(vals[0] ** (1.0 / q))
    return float(trapezoid(vals, times) ** (1.0 / q))


def _slope(grid, values):
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.all(v == 0):
        return None
    if np.any(v <= 0):
        keep = v > 0
        g, v = g[keep], v[keep]
        if len(v) < 2:
            return None
    return float(np.polyfit(np.log(g), np.log(v), 1)[0])


def _probe_verdict(slope, values):
    if np.all(np.asarray(values) == 0):
        return "satisfied"
    if slope is None:
        return "inconclusive"
    if slope >= SLOPE_THRESHOLD:
        return "satisfied"
    if abs(slope) < SLOPE_THRESHOLD:
        return "inconclusive"
    return "violated"


def _layer_verdict(slope, values):
    if np.all(np.asarray(values) == 0):
        return "satisfied"
    if slope is not None and slope >= SLOPE_THRESHOLD:
        return "satisfied"
    return "violated"


def _region(field, depth):
    if field.domain.kind == "torus":
        return None
    return field.domain.phi_on(field.lattice) < -depth


def _scalar_conditions(rho, u, P, with_pressure):
    out = []
    rmax = max(float(np.abs(f.values[f.valid]).max()) for f in rho.frames)
    rmin = min(float(f.values[f.valid].min()) for f in rho.frames)
    out.append(Condition("rho_Linf", [rmax], verdict="satisfied" if np.isfinite(rmax) else "violated"))
    inv = 1.0 / rmin if rmin > 0 else float("inf")
    out.append(Condition("rho_inv_Linf", [inv], verdict="satisfied" if np.isfinite(inv) else "violated",
                         note="" if rmin > 0 else "density reaches zero"))

    def lpt(ts, p):
        vals = [np.sum(f.magnitude()[f.valid] ** p) * f.lattice.cell_volume for f in ts.frames]
        return _time_norm(vals, ts.times, p)

    uv = lpt(u, 3.0)
    out.append(Condition("u_L3", [uv], verdict="satisfied" if np.isfinite(uv) else "violated"))
    if with_pressure:
        pv = lpt(P, 1.5)
        out.append(Condition("P_L3/2", [pv], verdict="satisfied" if np.isfinite(pv) else "violated"))
    return out


def _finite_seminorm(name, fields, beta, p, q, probes):
    """Per-delta values plus the small-shift growth test for finiteness."""
    d0 = probes.deltas[0]
    region = _region(fields.frames[0], 2 * d0)
    table = vanishing_probe(fields, beta, p, q, probes.deltas, region, probes.directions)
    grid = [d for d, _ in table]
    values = [v for _, v in table]
    shifts = dyadic_shifts(fields.lattice, d0, directions=probes.directions)
    per_frame = [seminorm(f, beta, p, shifts, region) for f in fields.frames]
    mags = np.round(shifts.magnitudes, 12)
    levels = np.unique(mags)
    ratio = np.zeros((len(per_frame), len(levels)))
    for i, rep in enumerate(per_frame):
        r = np.array([row["ratio"] for row in rep.per_shift])
        for j, m in enumerate(levels):
            ratio[i, j] = r[mags == m].max()
    curve = [_time_norm(ratio[:, j] ** (1 if np.isinf(q) else q), fields.times, q) for j in range(len(levels))]
    growth = _slope(levels, curve)
    if np.all(np.asarray(curve) == 0) or growth is None or growth >= -SLOPE_THRESHOLD:
        verdict = "satisfied"
    else:
        verdict = "violated"
    note = f"small-shift slope {growth:.3f}" if growth is not None else "identically zero"
    return Condition(name, values, grid, None, verdict, note)


def _vanishing(name, fields, beta, p, q, deltas, probes):
    region = _region(fields.frames[0], 2 * deltas[0])
    table = vanishing_probe(fields, beta, p, q, deltas, region, probes.directions)
    grid = [d for d, _ in table]
    values = [v for _, v in table]
    s = _slope(grid, values)
    return Condition(name, values, grid, s, _probe_verdict(s, values))


def _normals(domain, lattice):
    g = domain.gradient(lattice.points())
    return np.moveaxis(g / np.linalg.norm(g, axis=-1, keepdims=True), -1, 0)


def _layer_means(ts, eps, p, normal=None):
    """``int_0^T avg_{layer eps} |f|^p dt`` (or of ``|f.n|^p``) per frame set."""
    dom = ts.domain
    lat = ts.lattice
    w = band_weights(dom, lat, -eps, 0.0)
    area = float(np.sum(w))
    vals = []
    for f in ts.frames:
        if normal is None:
            x = f.magnitude()
        else:
            x = np.abs(np.sum(f.data * normal, axis=0))
            # the normal is only known to rounding accuracy; flush u.n at that level
            x = np.where(x <= 8 * np.finfo(float).eps * f.magnitude(), 0.0, x)
        vals.append(float(np.sum(w * x**p)) / area)
    return float(trapezoid(vals, ts.times)) if len(vals) > 1 else vals[0]


def _layer_condition(name, eps_grid, values):
    s = _slope(eps_grid, values)
    return Condition(name, list(values), list(eps_grid), s, _layer_verdict(s, values))


def _boundary_conditions(rho, u, P, probes, kind):
    dom = u.domain
    if not probes.epsilons:
        raise ParameterError("bounded checks need a layer-width grid")
    for e in probes.epsilons:
        LayerSpec(e).validate(dom)
    n = _normals(dom, u.lattice)
    un3 = [_layer_means(u, e, 3.0, n) for e in probes.epsilons]
    u3 = [_layer_means(u, e, 3.0) for e in probes.epsilons]
    out = [_layer_condition("u_boundary", probes.epsilons,
                            [a ** (2 / 3) * b ** (1 / 3) for a, b in zip(u3, un3)])]
    if kind == "incompressible":
        p32 = [_layer_means(P, e, 1.5) for e in probes.epsilons]
        out.append(_layer_condition("P_boundary", probes.epsilons,
                                    [a ** (2 / 3) * b ** (1 / 3) for a, b in zip(p32, un3)]))
    else:
        out.append(_layer_condition("un_L1_boundary", probes.epsilons,
                                    [_layer_means(u, e, 1.0, n) for e in probes.epsilons]))
    return out


def _order(theorem, conds):
    by = {c.name: c for c in conds}
    return [by[k] for k in MANIFESTS[theorem]]


def check_torus_incompressible(traj, probes=None):
    rho, u, P = _unpack(traj, True)
    if rho.domain.kind != "torus":
        raise DomainKindError("use check_bounded_incompressible on bounded domains")
    probes = probes or ProbeGrid.default(rho.domain, rho.lattice)
    conds = _scalar_conditions(rho, u, P, True)
    conds.append(_finite_seminorm("rho_V2/3_inf", rho, 2 / 3, np.inf, np.inf, probes))
    conds.append(_finite_seminorm("u_V1/3_3", u, 1 / 3, 3.0, 3.0, probes))
    conds.append(_vanishing("u_vanishing", u, 1 / 3, 3.0, 3.0, probes.deltas, probes))
    return HypothesisReport("1.3", _order("1.3", conds))


def check_bounded_incompressible(traj, probes=None):
    rho, u, P = _unpack(traj, True)
    if rho.domain.kind != "bounded":
        raise DomainKindError("check_bounded_incompressible needs a bounded domain")
    probes = probes or ProbeGrid.default(rho.domain, rho.lattice)
    conds = _scalar_conditions(rho, u, P, True)
    conds.append(_finite_seminorm("rho_V2/3_inf", rho, 2 / 3, np.inf, np.inf, probes))
    conds.append(_finite_seminorm("u_V1/3_3", u, 1 / 3, 3.0, 3.0, probes))
    conds.append(_vanishing("u_vanishing", u, 1 / 3, 3.0, 3.0, probes.deltas, probes))
    conds += _boundary_conditions(rho, u, P, probes, "incompressible")
    return HypothesisReport("1.4", _order("1.4", conds))


def check_compressible(traj, gamma, probes=None, bounded=False):
    if not gamma > 1:
        raise ParameterError("gamma must exceed 1")
    rho, u, _ = _unpack(traj, False)
    kind = rho.domain.kind
    if bounded != (kind == "bounded"):
        raise DomainKindError(f"bounded={bounded} does not match a {kind} domain")
    theorem = "1.7" if bounded else "1.5"
    alpha = onsager_alpha(gamma)
    probes = probes or ProbeGrid.default(rho.domain, rho.lattice)
    conds = _scalar_conditions(rho, u, None, False)
    conds.append(_finite_seminorm("rho_Valpha_inf", rho, alpha, np.inf, np.inf, probes))
    conds.append(_finite_seminorm("u_V1/3_3", u, 1 / 3, 3.0, 3.0, probes))
    conds.append(_vanishing("u_vanishing", u, 1 / 3, 3.0, 3.0, probes.deltas, probes))
    if gamma < 2:
        conds.append(Condition("rho_alpha_vanishing", [], [], None, "satisfied",
                               "automatically satisfied for gamma < 2"))
    else:
        conds.append(_vanishing("rho_alpha_vanishing", rho, alpha, np.inf, np.inf, probes.deltas, probes))
    if bounded:
        conds += _boundary_conditions(rho, u, None, probes, "compressible")
    return HypothesisReport(theorem, _order(theorem, conds), gamma, alpha)
