import numpy as np
import pytest
from scipy import integrate

from onsagerlab import Field, MollifierKernel, grad_mollified, mollify, mollify_power
from onsagerlab.commutators import fit_power_law
from onsagerlab.errors import ParameterError, PositivityError, ResolutionError
from onsagerlab.roughgen import white_noise


def moment(eps, profile="bump"):
    K = MollifierKernel(eps, 1, profile)
    return integrate.quad(lambda y: np.cos(2 * np.pi * y) * K(y), -eps, eps, epsabs=1e-14, epsrel=1e-13)[0]


@pytest.mark.parametrize("profile", ["bump", "gaussian"])
def test_kernel_unit_mass(profile):
    K1 = MollifierKernel(0.2, 1, profile)
    assert integrate.quad(K1, -0.2, 0.2, epsabs=1e-14)[0] == pytest.approx(1.0, abs=1e-10)
    K2 = MollifierKernel(0.3, 2, profile)
    radial = integrate.quad(lambda r: 2 * np.pi * r * K2(np.array([r, 0.0])), 0, 0.3, epsabs=1e-14)[0]
    assert radial == pytest.approx(1.0, abs=1e-10)


def test_constant_is_fixed(t2):
    f = Field.constant(t2, 64, 3.7)
    assert np.array_equal(mollify(f, MollifierKernel(0.1, 2)).data, f.data)
    assert np.all(grad_mollified(f, MollifierKernel(0.1, 2)).data == 0.0)


@pytest.mark.parametrize("eps", [1 / 8, 1 / 16, 1 / 32])
def test_cosine_multiplier(t1, eps):
    f = Field.from_function(t1, 1024, lambda x: np.cos(2 * np.pi * x))
    x = f.lattice.mesh()[0]
    m = moment(eps)
    assert 0 < m <= 1
    K = MollifierKernel(eps, 1)
    assert np.max(np.abs(mollify(f, K).data[0] - m * np.cos(2 * np.pi * x))) < 1e-8
    g = grad_mollified(f, K).data[0]
    assert np.max(np.abs(g + 2 * np.pi * m * np.sin(2 * np.pi * x))) < 1e-6


def test_cosine_multiplier_truncated_gaussian(t1):
    # the truncated profile jumps at |y| = eps, so the lattice kernel converges only at first order in h
    errs = []
    for n in (1024, 4096):
        f = Field.from_function(t1, n, lambda x: np.cos(2 * np.pi * x))
        x = f.lattice.mesh()[0]
        out = mollify(f, MollifierKernel(1 / 8, 1, "gaussian")).data[0]
        errs.append(np.max(np.abs(out - moment(1 / 8, "gaussian") * np.cos(2 * np.pi * x))))
    assert errs[0] < 1e-4 and errs[1] < errs[0] / 3


def test_spike_positive_and_mass_preserving(t2):
    data = np.zeros((1, 64, 64))
    data[0, 5, 9] = 1.0
    out = mollify(Field(t2, t2.lattice(64), data), MollifierKernel(0.1, 2)).data
    assert out.min() >= -1e-12
    assert abs(out.sum() - 1.0) < 1e-8


def test_white_noise_gradient_blowup(t1):
    # E|grad f^eps|^2 ~ h eps^-3 for lattice white noise, hence exponent -3/2
    eps = [2.0**-k for k in range(3, 7)]
    f = white_noise(t1, 2048, seed=4)
    vals = [np.sqrt(np.mean(grad_mollified(f, MollifierKernel(e, 1)).data ** 2)) for e in eps]
    fit = fit_power_law(eps, vals)
    assert fit.exponent <= -0.85
    assert abs(fit.exponent + 1.5) < 0.15


def test_mollify_power_constant(t2):
    rho = Field.constant(t2, 32, 1.7, positive=True)
    a, b = mollify_power(rho, MollifierKernel(0.1, 2), 1.4)
    assert np.allclose(a.data, 1.7**1.4, rtol=1e-14) and np.allclose(b.data, 1.7**1.4, rtol=1e-14)


def test_mollify_power_variance_identity(t1):
    rho = Field.from_function(t1, 512, lambda x: 1 + 0.5 * np.cos(2 * np.pi * x), positive=True)
    K = MollifierKernel(0.1, 1)
    a, b = mollify_power(rho, K, 2.0)
    defect = a.data[0] - b.data[0]
    m1, m2 = moment(0.1), None
    K2 = MollifierKernel(0.1, 1)
    m2 = integrate.quad(lambda y: np.cos(4 * np.pi * y) * K2(y), -0.1, 0.1, epsabs=1e-14)[0]
    x = rho.lattice.mesh()[0]
    # Var_omega(rho)(x) = 0.25 * [(1 + m2 cos 4pi x)/2 - m1^2 cos^2 2pi x]
    var = 0.25 * (0.5 * (1 + m2 * np.cos(4 * np.pi * x)) - m1**2 * np.cos(2 * np.pi * x) ** 2)
    assert np.all(defect >= -1e-14)
    assert np.max(np.abs(defect - var)) < 1e-8


def test_errors(t1, t2):
    f = Field.constant(t1, 32, 1.0)
    with pytest.raises(ResolutionError):
        mollify(f, MollifierKernel(1 / 32, 1))
    with pytest.raises(ParameterError):
        MollifierKernel(0.0)
    with pytest.raises(PositivityError):
        mollify_power(Field.constant(t1, 32, -1.0), MollifierKernel(0.2, 1), 2.0)


def test_bounded_mask_shrinks(unit_disk):
    lat = unit_disk.lattice(128)
    f = Field.from_function(unit_disk, lat, lambda x, y: x * y, mask=unit_disk.phi_on(lat) < 0)
    g = mollify(f, MollifierKernel(0.1, 2))
    assert g.valid.sum() < f.valid.sum()
    assert np.all(unit_disk.phi_on(lat)[g.valid] < -0.1 + 2 * max(lat.spacing))
