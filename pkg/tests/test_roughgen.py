import numpy as np
import pytest

from onsagerlab import (Field, RoughSpec, TimeSeriesField, bounded_density, dyadic_shifts, lacunary_scalar,
                        lacunary_vector, leray_project, seminorm)
from onsagerlab.commutators import fit_power_law
from onsagerlab.roughgen import spectral_divergence
from onsagerlab.seminorms import vanishing_probe

DELTAS = [1 / 8, 1 / 16, 1 / 32, 1 / 64]


def probe_slope(f, beta=1 / 3, p=np.inf):
    ts = TimeSeriesField(np.array([0.0, 1.0]), [f, f])
    d, v = zip(*vanishing_probe(ts, beta, p, 3, DELTAS))
    return fit_power_law(d, v).exponent


def test_single_octave(t1):
    f = lacunary_scalar(t1, 1024, RoughSpec(1 / 3, 0, seed=0), min_octaves=0)
    assert np.isfinite(seminorm(f, 1 / 3, np.inf, dyadic_shifts(f.lattice, 0.25)).value)
    assert abs(probe_slope(f) - 2 / 3) < 0.1


def test_design_exponent_stable(t1):
    f = lacunary_scalar(t1, 1024, RoughSpec(1 / 3, 8, seed=5))
    assert abs(probe_slope(f)) <= 0.1


def test_deterministic(t2):
    a = lacunary_scalar(t2, 64, RoughSpec(0.4, 4, seed=9))
    b = lacunary_scalar(t2, 64, RoughSpec(0.4, 4, seed=9))
    c = lacunary_scalar(t2, 64, RoughSpec(0.4, 4, seed=10))
    assert np.array_equal(a.data, b.data) and not np.array_equal(a.data, c.data)


def test_bounded_density_zero(t1):
    out = bounded_density(Field.constant(t1, 16, 0.0), 0.5, 2.0)
    assert np.all(out.data == 1.25) and out.positive


def test_bounded_density_homogeneity(t1):
    base = lacunary_scalar(t1, 512, RoughSpec(0.5, 6, seed=3))
    S = dyadic_shifts(base.lattice, 0.25)
    s = seminorm(base, 0.5, 2, S).value
    out = bounded_density(base, 0.5, 2.0)
    scale = 0.75 / np.abs(base.data).max()
    assert seminorm(out, 0.5, 2, S).value == pytest.approx(scale * s, rel=1e-12)


def test_bounded_density_two_thirds(t1):
    out = bounded_density(lacunary_scalar(t1, 1024, RoughSpec(2 / 3, 8, seed=1)), 0.5, 2.0)
    assert out.data.min() >= 0.5 and out.data.max() <= 2.0
    rep = seminorm(out, 2 / 3, np.inf, dyadic_shifts(out.lattice, 0.25))
    assert np.isfinite(rep.value) and rep.value < 50
    assert abs(probe_slope(out, 2 / 3)) <= 0.15


def test_leray(t2, rng):
    shear = Field.from_function(t2, 64, lambda x, y: (np.sin(2 * np.pi * y) + 0 * x, 0 * x))
    assert np.max(np.abs(leray_project(shear).data - shear.data)) < 1e-12
    grad = Field.from_function(t2, 64, lambda x, y: (-2 * np.pi * np.sin(2 * np.pi * x), 0 * y))
    assert np.max(np.abs(leray_project(grad).data)) < 1e-12
    u = Field(t2, t2.lattice(64), rng.normal(size=(2, 64, 64)))
    once = leray_project(u)
    assert np.max(np.abs(leray_project(once).data - once.data)) < 1e-12
    assert np.max(np.abs(spectral_divergence(once))) < 1e-10


def test_vector_divergence_free(t2):
    u = lacunary_vector(t2, 128, RoughSpec(1 / 3, 5, seed=2))
    assert u.components == 2
    assert np.max(np.abs(spectral_divergence(u))) < 1e-10
