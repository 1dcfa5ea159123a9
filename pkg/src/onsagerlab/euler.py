"""Pseudo-spectral solvers for 2D periodic inhomogeneous incompressible Euler and
isentropic compressible Euler, plus the mollified energy-budget terms.

The incompressible scheme evolves the density and the weighted momentum
``w = sqrt(rho) u`` with the skew-symmetric advection operator
``(u.D f + D.(u f)) / 2``.  Because the Fourier differentiation matrix is
antisymmetric, ``sum |w|^2 = sum rho |u|^2``, ``sum rho^2`` and (for discretely
solenoidal ``u``) ``sum rho`` are invariants of the semi-discrete system; only
the time integrator perturbs them.  Dealiasing forms the products on a 3/2
padded grid, which removes aliasing without dissipating energy.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dfield
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy.integrate import trapezoid

from .commutators import fit_power_law
from .errors import (DomainKindError, InputError, ParameterError, PositivityError, SmoothnessLostError,
                     SolverError, StepSizeError)
from .fields import Field, TimeSeriesField
from .mollify import MollifierKernel, _rfreqs, mollify


@dataclass(frozen=True)
class SolverConfig:
    N: int = 128
    dt: float = 2e-3
    T: float = 1.0
    dealias: bool = True
    nu: float = 0.0
    gamma: Optional[float] = None
    pressure_tol: float = 1e-10
    max_iter: int = 500
    sample_every: int = 10
    smooth_limit: float = 0.1

    def __post_init__(self):
        if self.N < 8 or self.N % 2:
            raise ParameterError("N must be an even integer >= 8")
        if not (self.dt > 0 and self.T >= 0):
            raise ParameterError("need dt > 0 and T >= 0")
        if self.nu < 0:
            raise ParameterError("nu must be nonnegative")
        if not 0 < self.pressure_tol <= 1e-10:
            raise ParameterError("pressure_tol must lie in (0, 1e-10]")
        if self.gamma is not None and not self.gamma > 1:
            raise ParameterError("gamma must exceed 1")
        if self.sample_every < 1 or self.max_iter < 1:
            raise ParameterError("sample_every and max_iter must be positive")

    def steps(self):
        """Number of steps and the (possibly shortened) uniform step reaching ``T`` exactly."""
        n = max(int(math.ceil(self.T / self.dt - 1e-9)), 0)
        return n, (self.T / n if n else self.dt)


class Spectral:
    """Fourier differentiation on a periodic lattice (Nyquist derivative zeroed).

    With ``dealias`` the operators also provide 3/2-rule padded products and
    the 2/3-rule low-pass ``filter``.
    """

    def __init__(self, lattice, dealias=False):
        if not lattice.periodic:
            raise DomainKindError("spectral operators need a periodic lattice")
        self.lattice = lattice
        self.shape = lattice.shape
        self.axes = tuple(range(-lattice.d, 0))
        self.k = _rfreqs(lattice)
        k2 = sum(k**2 for k in self.k)
        self._lap = -k2
        self._lapinv = np.where(k2 > 0, -1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
        self.mask = None
        self.padded = None
        if dealias:
            m = np.ones(k2.shape, dtype=bool)
            for ax, (n, h) in enumerate(zip(lattice.shape, lattice.spacing)):
                kmax = 2 * np.pi / h * 0.5
                m &= np.abs(self.k[ax]) < (2.0 / 3.0) * kmax
            self.mask = m
            self.padded = tuple(3 * n // 2 for n in self.shape)
            last = len(self.shape) - 1
            small, big = [], []
            for ax, (n, M) in enumerate(zip(self.shape, self.padded)):
                lo = np.arange(n // 2)
                if ax == last:
                    small.append(lo)
                    big.append(lo)
                else:
                    small.append(np.concatenate([lo, np.arange(n - n // 2 + 1, n)]))
                    big.append(np.concatenate([lo, np.arange(M - n // 2 + 1, M)]))
            self._small = np.ix_(*small)
            self._big = np.ix_(*big)
            self._ratio = float(np.prod(self.padded)) / float(np.prod(self.shape))

    def fft(self, f):
        return sfft.rfftn(f, axes=self.axes)

    def ifft(self, fh):
        return sfft.irfftn(fh, s=self.shape, axes=self.axes)

    def grad(self, f):
        fh = self.fft(f)
        return np.stack([self.ifft(1j * k * fh) for k in self.k])

    def div(self, v):
        return self.ifft(sum(1j * k * self.fft(v[i]) for i, k in enumerate(self.k)))

    def lap(self, f):
        return self.ifft(self._lap * self.fft(f))

    def lapinv(self, f):
        return self.ifft(self._lapinv * self.fft(f))

    def filter(self, f):
        if self.mask is None:
            return f
        return self.ifft(self.fft(f) * self.mask)

    def up(self, fh):
        """Samples on the padded grid of the trigonometric interpolant with spectrum ``fh`` (Nyquist dropped)."""
        big = np.zeros(self.padded[:-1] + (self.padded[-1] // 2 + 1,), dtype=complex)
        big[self._big] = fh[self._small]
        return sfft.irfftn(big, s=self.padded, axes=self.axes) * self._ratio

    def down(self, F):
        """Spectrum, on the base grid, of the low modes of a padded-grid function."""
        Fh = sfft.rfftn(F, axes=self.axes)
        small = np.zeros(self.shape[:-1] + (self.shape[-1] // 2 + 1,), dtype=complex)
        small[self._small] = Fh[self._big]
        return small / self._ratio


def _torus2d(field):
    if field.domain.kind != "torus" or field.lattice.d != 2:
        raise DomainKindError("the Euler solvers run on the 2D torus only")


def solve_pressure(ops, rho, rhs, tol=1e-10, max_iter=500, guess=None):
    """Solve ``D.(D P / rho) = rhs`` by fixed-point iteration preconditioned with
    ``a0 * Laplacian``, ``a0`` the midrange of ``1/rho``.  Returns ``(P, iterations)``."""
    scale = float(np.abs(rhs).max())
    if scale == 0.0:
        return np.zeros_like(rhs), 0
    inv = 1.0 / rho
    a0 = 0.5 * (inv.max() + inv.min())
    P = np.zeros_like(rhs) if guess is None else guess.copy()
    thresh = tol * scale + 1e-14
    for it in range(max_iter + 1):
        r = rhs - ops.div(inv * ops.grad(P))
        if np.abs(r).max() <= thresh:
            return P, it
        P = P + ops.lapinv(r) / a0
    raise SolverError(f"pressure iteration did not reach {tol:g} in {max_iter} iterations")


def _advect_skew(ops, u, w):
    """``(u.D w + D.(u w)) / 2`` for each component of ``w``.

    On dealiased operators every product is formed on the padded grid, so the
    quadratic terms carry no aliasing error and the skew symmetry is exact.
    """
    out = np.empty_like(w)
    if ops.padded is None:
        for i in range(w.shape[0]):
            g = ops.grad(w[i])
            out[i] = 0.5 * (np.sum(u * g, axis=0) + ops.div(u * w[i]))
        return out
    U = [ops.up(ops.fft(c)) for c in u]
    for i in range(w.shape[0]):
        wh = ops.fft(w[i])
        W = ops.up(wh)
        adv = ops.down(sum(Uj * ops.up(1j * k * wh) for Uj, k in zip(U, ops.k)))
        flux = sum(1j * k * ops.down(Uj * W) for Uj, k in zip(U, ops.k))
        out[i] = 0.5 * ops.ifft(adv + flux)
    return out


def _inc_rhs(ops, rho, w, cfg, guess):
    sig = np.sqrt(rho)
    u = w / sig
    drho = -_advect_skew(ops, u, rho[None])[0]
    adv = -_advect_skew(ops, u, w)
    if cfg.nu:
        drho = drho + cfg.nu * ops.lap(rho)
        adv = adv + cfg.nu * np.stack([ops.lap(c) for c in w])
    G = adv / sig - u * drho / (2 * rho)
    P, iters = solve_pressure(ops, rho, ops.div(G), cfg.pressure_tol, cfg.max_iter, guess)
    dw = adv - ops.grad(P) / sig
    return drho, dw, P, iters


def _project(ops, rho, w, cfg):
    """Remove the residual divergence of ``u = w / sqrt(rho)``; orthogonal in the ``|w|^2`` metric."""
    sig = np.sqrt(rho)
    d = ops.div(w / sig)
    phi, _ = solve_pressure(ops, rho, d, cfg.pressure_tol, cfg.max_iter)
    return w - ops.grad(phi) / sig


def _check_cfl(u, dt, h):
    umax = float(np.sqrt(np.sum(u**2, axis=0)).max())
    if umax > 0 and dt > 0.5 * h / umax * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.4g} violates CFL bound {0.5 * h / umax:.4g}")
    return umax


def _rk4(rhs, y, dt):
    k1, aux = rhs(y)
    k2, _ = rhs([a + 0.5 * dt * b for a, b in zip(y, k1)])
    k3, _ = rhs([a + 0.5 * dt * b for a, b in zip(y, k2)])
    k4, _ = rhs([a + dt * b for a, b in zip(y, k3)])
    return [a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)], aux


def _incompressible_state(rho, u):
    _torus2d(rho)
    if not rho.positive or np.any(rho.values <= 0):
        raise PositivityError("density must be strictly positive")
    if u.components != 2 or u.lattice != rho.lattice:
        raise InputError("velocity must be a 2-component field on the density lattice")
    ops = Spectral(rho.lattice)
    r = np.array(rho.values, dtype=float)
    uu = np.array(u.data, dtype=float)
    div = np.abs(ops.div(uu)).max()
    if div > 1e-8 * max(1.0, np.abs(uu).max()):
        raise InputError(f"initial velocity is not divergence-free (max |div u| = {div:.3g})")
    return r, np.sqrt(r) * uu


def step_incompressible(rho, u, config, P_guess=None):
    """Advance ``(rho, u)`` by one RK4 step; returns ``(rho, u, P)`` with ``P`` at the initial time."""
    r, w = _incompressible_state(rho, u)
    ops = Spectral(rho.lattice, config.dealias)
    _check_cfl(u.data, config.dt, max(rho.lattice.spacing))
    (r1, w1), P, _ = _inc_step(ops, r, w, config, config.dt, P_guess)
    dom, lat = rho.domain, rho.lattice
    return (Field(dom, lat, r1, positive=True), Field(dom, lat, w1 / np.sqrt(r1)), Field(dom, lat, P))


def _inc_step(ops, r, w, cfg, dt, guess):
    state = {"guess": guess, "P0": None, "iters": 0}

    def rhs(y):
        dr, dw, P, it = _inc_rhs(ops, y[0], y[1], cfg, state["guess"])
        state["guess"] = P
        state["iters"] = max(state["iters"], it)
        if state["P0"] is None:
            state["P0"] = P
        return [dr, dw], P

    (r1, w1), _ = _rk4(rhs, [r, w], dt)
    if np.any(r1 <= 0):
        raise PositivityError("density lost positivity")
    w1 = _project(ops, r1, w1, cfg)
    return (r1, w1), state["P0"], state["iters"]


@dataclass
class Trajectory:
    """Sampled frames plus per-step diagnostics of one solver run."""

    rho: TimeSeriesField
    u: TimeSeriesField
    P: Optional[TimeSeriesField]
    diagnostics: dict
    config: SolverConfig
    kind: str = "incompressible"
    gamma: Optional[float] = None
    truncated: bool = False

    def drift(self, key):
        v = np.asarray(self.diagnostics[key])
        return float(np.max(np.abs(v - v[0])))

    def relative_energy_drift(self):
        E = np.asarray(self.diagnostics["energy"])
        return float(np.max(np.abs(E - E[0])) / E[0]) if E[0] else float(np.max(np.abs(E)))

    def summary(self):
        d = self.diagnostics
        out = {
            "kind": self.kind,
            "steps": len(d["t"]) - 1,
            "t_final": float(d["t"][-1]),
            "energy_drift_rel": self.relative_energy_drift(),
            "mass_drift": self.drift("mass"),
            "nu": self.config.nu,
            "truncated": self.truncated,
        }
        if "div_max" in d:
            out["div_max"] = float(np.max(d["div_max"]))
            out["rho_min_drift"] = float(max(0.0, d["rho_min"][0] - min(d["rho_min"])))
            out["rho_max_drift"] = float(max(0.0, max(d["rho_max"]) - d["rho_max"][0]))
        if "max_grad_u_dt" in d:
            out["max_grad_u_dt"] = float(np.max(d["max_grad_u_dt"]))
        return out

    def to_csv(self, path):
        d = self.diagnostics
        keys = [k for k in ("t", "energy", "mass", "div_max", "rho_min", "rho_max", "max_grad_u_dt") if k in d]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(keys)
            for row in zip(*(d[k] for k in keys)):
                wr.writerow([repr(float(v)) for v in row])


def _frames(dom, lat, times, arrays, positive=False):
    return TimeSeriesField(times, [Field(dom, lat, a, positive=positive) for a in arrays])


def run_incompressible(rho0, u0, config, callback=None):
    """Integrate to ``config.T``; frames every ``config.sample_every`` steps (and at ``T``)."""
    r, w = _incompressible_state(rho0, u0)
    lat, dom = rho0.lattice, rho0.domain
    ops = Spectral(lat, config.dealias)
    h = max(lat.spacing)
    vol = lat.cell_volume
    n, dt = config.steps()
    diag = {k: [] for k in ("t", "energy", "mass", "div_max", "rho_min", "rho_max", "pressure_iters")}
    frames = {"t": [], "rho": [], "u": [], "P": []}
    guess = None
    t = 0.0
    for step in range(n + 1):
        u = w / np.sqrt(r)
        diag["t"].append(t)
        diag["energy"].append(float(np.sum(w**2) * vol))
        diag["mass"].append(float(np.sum(r) * vol))
        diag["div_max"].append(float(np.abs(ops.div(u)).max()))
        diag["rho_min"].append(float(r.min()))
        diag["rho_max"].append(float(r.max()))
        sample = step % config.sample_every == 0 or step == n
        if step == n:
            if sample:
                _, _, P, _ = _inc_rhs(ops, r, w, config, guess)
                frames["t"].append(t); frames["rho"].append(r); frames["u"].append(u); frames["P"].append(P)
            break
        _check_cfl(u, dt, h)
        (r_new, w_new), P, iters = _inc_step(ops, r, w, config, dt, guess)
        diag["pressure_iters"].append(iters)
        if sample:
            frames["t"].append(t); frames["rho"].append(r); frames["u"].append(u); frames["P"].append(P)
        guess = P
        r, w = r_new, w_new
        t = (step + 1) * dt
        if callback is not None:
            callback(step + 1, t)
    tr = Trajectory(_frames(dom, lat, frames["t"], frames["rho"], True),
                    _frames(dom, lat, frames["t"], frames["u"]),
                    _frames(dom, lat, frames["t"], frames["P"]), diag, config)
    return tr


def _compressible_state(rho, u, gamma):
    _torus2d(rho)
    if gamma is None or not gamma > 1:
        raise ParameterError("compressible runs need gamma > 1")
    if not rho.positive or np.any(rho.values <= 0):
        raise PositivityError("density must be strictly positive")
    if u.components != 2 or u.lattice != rho.lattice:
        raise InputError("velocity must be a 2-component field on the density lattice")
    r = np.array(rho.values, dtype=float)
    return r, r * np.array(u.data, dtype=float)


def _comp_rhs(ops, r, m, cfg):
    g = cfg.gamma
    u = m / r
    dr = -ops.div(m)
    flux = np.stack([ops.div(m[i] * u) for i in range(2)])
    dm = -flux - ops.grad(r**g)
    if cfg.nu:
        dr = dr + cfg.nu * ops.lap(r)
        dm = dm + cfg.nu * np.stack([ops.lap(c) for c in m])
    if ops.mask is not None:
        dr = ops.filter(dr)
        dm = np.stack([ops.filter(c) for c in dm])
    return dr, dm


def _comp_cfl(r, m, gamma, dt, h):
    u = m / r
    speed = float((np.sqrt(np.sum(u**2, axis=0)) + np.sqrt(gamma * r ** (gamma - 1))).max())
    if dt > 0.5 * h / speed * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.4g} violates acoustic CFL bound {0.5 * h / speed:.4g}")


def step_compressible(rho, u, config):
    r, m = _compressible_state(rho, u, config.gamma)
    ops = Spectral(rho.lattice, config.dealias)
    _comp_cfl(r, m, config.gamma, config.dt, max(rho.lattice.spacing))
    (r1, m1), _ = _rk4(lambda y: (list(_comp_rhs(ops, y[0], y[1], config)), None), [r, m], config.dt)
    if np.any(r1 <= 0):
        raise PositivityError("density lost positivity")
    dom, lat = rho.domain, rho.lattice
    return Field(dom, lat, r1, positive=True), Field(dom, lat, m1 / r1)


def run_compressible(rho0, u0, config, callback=None):
    """Integrate the isentropic system; on a smoothness-monitor trip the run is
    truncated and :class:`SmoothnessLostError` carries the partial trajectory."""
    gamma = config.gamma
    r, m = _compressible_state(rho0, u0, gamma)
    lat, dom = rho0.lattice, rho0.domain
    ops = Spectral(lat, config.dealias)
    h = max(lat.spacing)
    vol = lat.cell_volume
    n, dt = config.steps()
    diag = {k: [] for k in ("t", "energy", "mass", "max_grad_u_dt")}
    frames = {"t": [], "rho": [], "u": []}

    def build(truncated):
        P = [rr**gamma for rr in frames["rho"]]
        return Trajectory(_frames(dom, lat, frames["t"], frames["rho"], True),
                          _frames(dom, lat, frames["t"], frames["u"]),
                          _frames(dom, lat, frames["t"], P), diag, config, "compressible", gamma, truncated)

    t = 0.0
    for step in range(n + 1):
        u = m / r
        gu = max(float(np.abs(ops.grad(u[i])).max()) for i in range(2))
        diag["t"].append(t)
        diag["energy"].append(float(np.sum(0.5 * r * np.sum(u**2, axis=0) + r**gamma / (gamma - 1)) * vol))
        diag["mass"].append(float(np.sum(r) * vol))
        diag["max_grad_u_dt"].append(gu * dt)
        if step % config.sample_every == 0 or step == n:
            frames["t"].append(t); frames["rho"].append(r); frames["u"].append(u)
        if gu * dt >= config.smooth_limit:
            raise SmoothnessLostError(f"max|grad u| dt = {gu * dt:.3g} at t={t:.4g}", build(True))
        if step == n:
            break
        _comp_cfl(r, m, gamma, dt, h)
        (r, m), _ = _rk4(lambda y: (list(_comp_rhs(ops, y[0], y[1], config)), None), [r, m], dt)
        if np.any(r <= 0):
            raise SmoothnessLostError(f"density lost positivity at t={t:.4g}", build(True))
        t = (step + 1) * dt
        if callback is not None:
            callback(step + 1, t)
    return build(False)


def acoustic_frequency(gamma, N=32, amplitude=1e-3, dt=None, T=None):
    """Measured temporal frequency of the ``k = 1`` acoustic mode about ``rho = 1``.

    The linear prediction is the sound speed ``sqrt(gamma)`` (unit period).
    Frequency comes from the spacing of zero crossings of the mode amplitude.
    """
    from .geometry import Torus

    dom = Torus((1.0, 1.0))
    c = math.sqrt(gamma)
    dt = dt or 0.25 / (N * (c + amplitude))
    T = T or 2.2 / c
    rho = Field.from_function(dom, N, lambda x, y: 1.0 + amplitude * np.cos(2 * np.pi * x), positive=True)
    u = Field.constant(dom, N, 0.0, components=2)
    cfg = SolverConfig(N=N, dt=dt, T=T, gamma=gamma, sample_every=1)
    tr = run_compressible(rho, u, cfg)
    x = dom.lattice(N).mesh()[0]
    weight = np.cos(2 * np.pi * x) * 2 * dom.lattice(N).cell_volume
    a = np.array([np.sum((f.values - 1.0) * weight) for f in tr.rho.frames])
    t = np.asarray(tr.rho.times)
    s = np.sign(a)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    if len(idx) < 2:
        raise SolverError("fewer than two zero crossings; extend T")
    tz = t[idx] - a[idx] * (t[idx + 1] - t[idx]) / (a[idx + 1] - a[idx])
    half_period = (tz[-1] - tz[0]) / (len(tz) - 1)
    return 1.0 / (2 * half_period)


# ----------------------------------------------------------------- budgets


@dataclass
class EnergyBudget:
    times: np.ndarray
    energy: np.ndarray
    epsilon: float
    defect_A2: Optional[np.ndarray] = None
    defect_B1: Optional[np.ndarray] = None
    defect_C: Optional[np.ndarray] = None
    defect_G2: Optional[np.ndarray] = None
    A3: Optional[np.ndarray] = None
    B2: Optional[np.ndarray] = None
    nu: float = 0.0
    fits: dict = dfield(default_factory=dict)

    def __post_init__(self):
        for name in ("energy", "defect_A2", "defect_B1", "defect_C", "defect_G2"):
            v = getattr(self, name)
            if v is not None and not np.all(np.isfinite(v)):
                raise SolverError(f"non-finite entries in {name}")
        if np.any(np.asarray(self.energy) < 0):
            raise SolverError("negative energy")

    @property
    def defects(self):
        return {k: getattr(self, "defect_" + k) for k in ("A2", "B1", "C", "G2")
                if getattr(self, "defect_" + k) is not None}

    @property
    def cancellation(self):
        """Per-frame ``|A3 + B2| / (|A3| + |B2| + 1)``."""
        if self.A3 is None:
            return None
        return np.abs(self.A3 + self.B2) / (np.abs(self.A3) + np.abs(self.B2) + 1.0)

    def integrated(self, name):
        v = self.defects[name]
        return float(trapezoid(v, self.times)) if len(v) > 1 else float(v[0])

    def to_csv(self, path):
        cols = ["t", "E"] + list(self.defects)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            data = [self.times, self.energy] + list(self.defects.values())
            for row in zip(*data):
                wr.writerow([repr(float(v)) for v in row])

    def summary(self):
        out = {
            "epsilon": self.epsilon,
            "nu": self.nu,
            "energy_drift_rel": float(np.max(np.abs(self.energy - self.energy[0])) / self.energy[0])
            if self.energy[0] else float(np.max(self.energy)),
            "defects_max": {k: float(np.max(v)) for k, v in self.defects.items()},
            "fits": {k: f.summary() for k, f in self.fits.items()},
        }
        if self.A3 is not None:
            out["cancellation_max"] = float(np.max(self.cancellation))
        return out


def _unpack(trajectory, need_pressure):
    if isinstance(trajectory, Trajectory):
        rho, u, P = trajectory.rho, trajectory.u, trajectory.P
    else:
        rho, u, *rest = trajectory
        P = rest[0] if rest else None
    if need_pressure and P is None:
        raise InputError("budget_terms needs pressure frames")
    dom = rho.frames[0].domain
    if dom.kind != "torus":
        raise DomainKindError("energy budgets are computed on the torus")
    if len(rho.frames) != len(u.frames) or (P is not None and len(P.frames) != len(rho.frames)):
        raise InputError("trajectory components have different frame counts")
    return rho, u, P


def _mollified(rho, u, K):
    m = rho.values * u.data
    re = mollify(rho, K).values
    me = mollify(u.replace(m), K).data
    ue = mollify(u, K).data
    return re, me, ue


def incompressible_frame_terms(rho, u, P, K, ops=None):
    """Dict with the per-frame magnitudes ``A2, B1, C`` and the signed ``A3, B2``."""
    ops = ops or Spectral(rho.lattice)
    vol = rho.lattice.cell_volume
    d = u.components
    re, me, ue = _mollified(rho, u, K)
    Pe = mollify(P, K).values
    m = rho.values * u.data
    tens = np.concatenate([mollify(u.replace(m[i] * u.data), K).data for i in range(d)])
    diff = me - re * ue
    q = me / re
    gq = np.stack([ops.grad(q[i]) for i in range(d)])  # gq[i, j] = d_j q_i
    m2 = np.sum(me**2, axis=0)
    A2 = 0.5 * np.sum(np.abs(ops.div(diff)) * m2 / re**2) * vol
    B1 = np.sum(np.abs(sum((tens[i * d + j] - me[i] * ue[j]) * gq[i, j] for i in range(d) for j in range(d)))) * vol
    C = np.sum(np.abs(np.sum(diff * ops.grad(Pe), axis=0) / re)) * vol
    A3 = -0.5 * np.sum(m2 / re**2 * ops.div(re * ue)) * vol
    B2 = -np.sum(sum(me[i] * ue[j] * gq[i, j] for i in range(d) for j in range(d))) * vol
    return {"A2": float(A2), "B1": float(B1), "C": float(C), "A3": float(A3), "B2": float(B2)}


def budget_terms(trajectory, kernel, tol=1e-8, strict=True):
    """Mollified defect terms of the incompressible energy balance along a trajectory.

    With ``strict`` the identity ``A3 + B2 = 0`` is enforced per frame at
    relative level ``tol``.
    """
    rho, u, P = _unpack(trajectory, True)
    ops = Spectral(rho.frames[0].lattice)
    rows = []
    E = []
    for r, v, p in zip(rho.frames, u.frames, P.frames):
        rows.append(incompressible_frame_terms(r, v, p, kernel, ops))
        E.append(float(np.sum(r.values * np.sum(v.data**2, axis=0)) * r.lattice.cell_volume))
    col = lambda k: np.array([row[k] for row in rows])
    nu = trajectory.config.nu if isinstance(trajectory, Trajectory) else 0.0
    b = EnergyBudget(np.asarray(rho.times, dtype=float), np.array(E), kernel.epsilon, col("A2"), col("B1"),
                     col("C"), A3=col("A3"), B2=col("B2"), nu=nu)
    if strict and np.max(b.cancellation) > tol:
        raise SolverError(f"A3 + B2 cancellation failed: relative residual {np.max(b.cancellation):.3g}")
    return b


def compressible_frame_G2(rho, u, gamma, K, ops=None):
    ops = ops or Spectral(rho.lattice)
    re, me, _ = _mollified(rho, u, K)
    pg = mollify(rho.replace(rho.values**gamma), K).values
    return float(np.sum(np.abs(ops.div(me / re) * (pg - re**gamma))) * rho.lattice.cell_volume)


def compressible_budget(trajectory, gamma, kernel, epsilons=None):
    """Energy ``int (rho|u|^2/2 + rho^gamma/(gamma-1))`` and the pressure defect ``G2``.

    With ``epsilons`` the time-integrated defect is also fitted against ``eps``.
    """
    if not gamma > 1:
        raise ParameterError("gamma must exceed 1")
    rho, u, _ = _unpack(trajectory, False)
    ops = Spectral(rho.frames[0].lattice)
    times = np.asarray(rho.times, dtype=float)
    E = np.array([float(np.sum(0.5 * r.values * np.sum(v.data**2, axis=0) + r.values**gamma / (gamma - 1))
                        * r.lattice.cell_volume) for r, v in zip(rho.frames, u.frames)])
    G2 = np.array([compressible_frame_G2(r, v, gamma, kernel, ops) for r, v in zip(rho.frames, u.frames)])
    nu = trajectory.config.nu if isinstance(trajectory, Trajectory) else 0.0
    b = EnergyBudget(times, E, kernel.epsilon, defect_G2=G2, nu=nu)
    if epsilons is not None:
        vals = []
        for e in epsilons:
            K = kernel.with_epsilon(float(e))
            g = [compressible_frame_G2(r, v, gamma, K, ops) for r, v in zip(rho.frames, u.frames)]
            vals.append(float(trapezoid(g, times)) if len(g) > 1 else g[0])
        b.fits["G2"] = fit_power_law(list(epsilons), vals, "defect_G2")
    return b


def budget_scaling(trajectory, epsilons, profile="bump"):
    """Fits of the time-integrated incompressible defects against ``eps``."""
    d = trajectory.rho.frames[0].lattice.d
    budgets = [budget_terms(trajectory, MollifierKernel(float(e), d, profile)) for e in epsilons]
    return {k: fit_power_law(list(epsilons), [b.integrated(k) for b in budgets], "defect_" + k)
            for k in ("A2", "B1", "C")}
