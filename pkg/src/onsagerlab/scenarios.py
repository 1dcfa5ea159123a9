"""Initial states on the unit 2-torus used by the CLI, the tests and the examples."""
from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .fields import Field
from .geometry import Torus
from .roughgen import RoughSpec, lacunary_vector

TWO_PI = 2 * np.pi


def unit_torus2():
    return Torus((1.0, 1.0))


def taylor_green(N, rho_amp=0.0, domain=None):
    """``u = (sin 2pi x cos 2pi y, -cos 2pi x sin 2pi y)``, ``rho = 1 + rho_amp cos 2pi y``."""
    dom = domain or unit_torus2()
    rho = Field.from_function(dom, N, lambda x, y: 1.0 + rho_amp * np.cos(TWO_PI * y) + 0 * x, positive=True)
    u = Field.from_function(dom, N, lambda x, y: (np.sin(TWO_PI * x) * np.cos(TWO_PI * y),
                                                  -np.cos(TWO_PI * x) * np.sin(TWO_PI * y)))
    return rho, u


def taylor_green_pressure(N, domain=None):
    """Pressure of the steady constant-density Taylor-Green flow."""
    dom = domain or unit_torus2()
    return Field.from_function(dom, N, lambda x, y: 0.25 * (np.cos(2 * TWO_PI * x) + np.cos(2 * TWO_PI * y)))


def shear(N, rho_amp=0.3, domain=None):
    """``u = (sin 2pi y, 0)`` with ``rho = 1 + rho_amp cos 2pi y``: a steady state."""
    dom = domain or unit_torus2()
    rho = Field.from_function(dom, N, lambda x, y: 1.0 + rho_amp * np.cos(TWO_PI * y) + 0 * x, positive=True)
    u = Field.from_function(dom, N, lambda x, y: (np.sin(TWO_PI * y) + 0 * x, 0 * x))
    return rho, u


def gaussian_pulse(N, amplitude=0.05, width=0.08, domain=None):
    """Density bump at rest centred in the unit square."""
    dom = domain or unit_torus2()
    rho = Field.from_function(
        dom, N, lambda x, y: 1.0 + amplitude * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / (2 * width**2)),
        positive=True)
    return rho, Field.constant(dom, N, 0.0, components=2)


def acoustic_mode(N, amplitude=1e-3, domain=None):
    dom = domain or unit_torus2()
    rho = Field.from_function(dom, N, lambda x, y: 1.0 + amplitude * np.cos(TWO_PI * x) + 0 * y, positive=True)
    return rho, Field.constant(dom, N, 0.0, components=2)


def rough_velocity(N, alpha, octaves, seed=0, amplitude=0.2, domain=None):
    """Divergence-free lacunary velocity with unit density."""
    dom = domain or unit_torus2()
    u = lacunary_vector(dom, N, RoughSpec(alpha, octaves, seed, amplitude))
    return Field.constant(dom, N, 1.0, positive=True), u


INCOMPRESSIBLE = {"taylor-green": taylor_green, "shear": shear}
COMPRESSIBLE = {"pulse": gaussian_pulse, "acoustic": acoustic_mode}


def initial_state(name, N, **kw):
    table = {**INCOMPRESSIBLE, **COMPRESSIBLE, "rough": rough_velocity}
    if name not in table:
        raise ParameterError(f"unknown initial state {name!r}; choose from {sorted(table)}")
    return table[name](N, **kw)
