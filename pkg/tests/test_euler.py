import numpy as np
import pytest

from onsagerlab import Field, MollifierKernel, TimeSeriesField, scenarios
from onsagerlab.euler import (SolverConfig, acoustic_frequency, budget_scaling, budget_terms, compressible_budget,
                              run_compressible, run_incompressible, step_compressible, step_incompressible)
from onsagerlab.errors import InputError, ParameterError, SmoothnessLostError, StepSizeError


def l2(a, vol):
    return float(np.sqrt(np.sum(a**2) * vol))


@pytest.fixture(scope="module")
def tg_run():
    rho, u = scenarios.taylor_green(128)
    return u, run_incompressible(rho, u, SolverConfig(N=128, dt=2e-3, T=1.0, sample_every=100))


def test_taylor_green_steady(tg_run):
    u0, tr = tg_run
    vol = u0.lattice.cell_volume
    assert l2(tr.u.frames[-1].data - u0.data, vol) <= 1e-6
    assert tr.relative_energy_drift() <= 1e-6


def test_zero_velocity_frozen(t2):
    rho = Field.from_function(t2, 32, lambda x, y: 1 + 0.4 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
                              positive=True)
    u = Field.constant(t2, 32, 0.0, components=2)
    r1, u1, _ = step_incompressible(rho, u, SolverConfig(N=32, dt=0.01))
    assert np.array_equal(r1.data, rho.data) and np.all(u1.data == 0.0)
    tr = run_incompressible(rho, u, SolverConfig(N=32, dt=0.01, T=0.2))
    assert np.array_equal(tr.rho.frames[-1].data, rho.data) and np.all(tr.u.frames[-1].data == 0.0)


def test_shear_steady():
    rho, u = scenarios.shear(64, 0.3)
    tr = run_incompressible(rho, u, SolverConfig(N=64, dt=4e-3, T=0.5, sample_every=125))
    vol = rho.lattice.cell_volume
    assert l2(tr.rho.frames[-1].data - rho.data, vol) <= 1e-6
    assert l2(tr.u.frames[-1].data - u.data, vol) <= 1e-6


def test_rejects_divergent_velocity(t2):
    rho = Field.constant(t2, 32, 1.0, positive=True)
    u = Field.from_function(t2, 32, lambda x, y: (np.sin(2 * np.pi * x), 0 * y))
    with pytest.raises(InputError):
        step_incompressible(rho, u, SolverConfig(N=32, dt=1e-3))


def test_cfl(t2):
    rho, u = scenarios.taylor_green(32)
    with pytest.raises(StepSizeError):
        step_incompressible(rho, u, SolverConfig(N=32, dt=0.05))


def test_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(N=31)
    with pytest.raises(ParameterError):
        SolverConfig(pressure_tol=1e-6)


def test_compressible_constant_frozen(t2):
    rho = Field.constant(t2, 32, 1.0, positive=True)
    u = Field.constant(t2, 32, 0.0, components=2)
    r1, u1 = step_compressible(rho, u, SolverConfig(N=32, dt=1e-3, gamma=1.4))
    assert np.array_equal(r1.data, rho.data) and np.all(u1.data == 0.0)


def test_acoustic_frequency():
    assert abs(acoustic_frequency(1.4) / np.sqrt(1.4) - 1) < 0.01


def test_pulse_mass_gamma_two():
    rho, u = scenarios.gaussian_pulse(64, 0.05, 0.08)
    tr = run_compressible(rho, u, SolverConfig(N=64, dt=2e-3, T=0.2, gamma=2.0))
    assert tr.drift("mass") <= 1e-10


def test_shock_formation_stops_run():
    rho, u = scenarios.gaussian_pulse(64, 2.0, 0.06)
    with pytest.raises(SmoothnessLostError) as info:
        run_compressible(rho, u, SolverConfig(N=64, dt=2e-3, T=1.0, gamma=1.4, sample_every=5))
    part = info.value.partial
    assert part.truncated and 0 < part.rho.times[-1] < 1.0


def _static(frames_rho, frames_u, frames_P, times):
    ts = lambda fs: TimeSeriesField(np.asarray(times, dtype=float), fs)
    return (ts(frames_rho), ts(frames_u), ts(frames_P))


def test_budget_zero_velocity(t2):
    rho = Field.from_function(t2, 64, lambda x, y: 1 + 0.2 * np.cos(2 * np.pi * x) + 0 * y, positive=True)
    u = Field.constant(t2, 64, 0.0, components=2)
    P = Field.constant(t2, 64, 0.3)
    b = budget_terms(_static([rho] * 3, [u] * 3, [P] * 3, [0, 0.5, 1]), MollifierKernel(1 / 16, 2))
    assert all(np.all(v == 0.0) for v in b.defects.values())
    assert np.all(b.energy == 0.0)


def test_budget_constant_density_C(t2):
    rho = Field.constant(t2, 64, 1.0, positive=True)
    _, u = scenarios.taylor_green(64)
    P = scenarios.taylor_green_pressure(64)
    b = budget_terms(_static([rho] * 2, [u] * 2, [P] * 2, [0, 1]), MollifierKernel(1 / 16, 2))
    assert np.all(b.defect_C == 0.0)


def test_budget_scaling_smooth():
    rho, u = scenarios.taylor_green(128, 0.3)
    tr = run_incompressible(rho, u, SolverConfig(N=128, dt=0.4 / 128, T=0.1, sample_every=8))
    fits = budget_scaling(tr, [1 / 16, 1 / 32, 1 / 64])
    for name, fit in fits.items():
        assert fit.exponent >= 1.8, name


def test_compressible_budget_constant(t2):
    rho = Field.constant(t2, 32, 1.2, positive=True)
    u = Field.constant(t2, 32, 0.0, components=2)
    tr = run_compressible(rho, u, SolverConfig(N=32, dt=1e-3, T=0.01, gamma=1.4))
    b = compressible_budget(tr, 1.4, MollifierKernel(1 / 8, 2))
    assert np.all(b.defect_G2 == 0.0)
    assert np.ptp(b.energy) == 0.0


def test_rough_compressible_G2_reported():
    rho, u = scenarios.rough_velocity(64, 0.3, 4, seed=1, amplitude=0.05)
    try:
        tr = run_compressible(rho, u, SolverConfig(N=64, dt=1e-3, T=0.02, gamma=1.4, sample_every=5))
    except SmoothnessLostError as exc:
        tr = exc.partial
    b = compressible_budget(tr, 1.4, MollifierKernel(1 / 8, 2), epsilons=[1 / 4, 1 / 8, 1 / 16])
    fit = b.fits["G2"]
    assert fit.exponent is None or np.isfinite(fit.exponent)
