from dataclasses import replace

import numpy as np
import pytest

from eplab.src import background as bg
from eplab.src.errors import BlowUp, CFLViolated, CrossingDetected, VacuumInitialData
from eplab.src.fields import Field, interpolate, mean, sup_norm
from eplab.src.lagrangian import (
    FieldSettings, init_ensemble, initial_fields, label_momentum, reconstruct_density, record, run_scenario,
    step_coupled, velocity_field,
)
from eplab.src.phaseplane import PhaseState, critical_w0, integrate

from tests.conftest import TWO_PI

@pytest.fixture
def perturbed(grid):
    rho0 = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.cos(TWO_PI * x))
    u0 = Field.from_function(grid, lambda x: 0.05 * np.sin(TWO_PI * x))
    return rho0, u0

def test_initial_fields_are_neutral(scenario, grid):
    rho0, u0 = initial_fields(scenario(), grid)
    assert mean(rho0) == pytest.approx(1.0)
    assert mean(u0) == pytest.approx(0.0, abs=1e-15)
    rho_ion, _ = initial_fields(scenario(background={"kind": "boltzmann"}), grid)
    assert mean(rho_ion) == pytest.approx(1.0)

def test_init_ensemble(perturbed):
    ensemble = init_ensemble(*perturbed, 128)
    assert ensemble.m == 128
    assert ensemble.total_mass == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(ensemble.s * ensemble.rho0, 1.0)
    assert np.max(np.abs(ensemble.w * ensemble.rho0 - 0.05 * TWO_PI * np.cos(TWO_PI * ensemble.x))) < 1e-12

def test_init_ensemble_rejects_vacuum(grid):
    rho0 = Field.from_function(grid, lambda x: 1.0 + 1.5 * np.cos(TWO_PI * x))
    with pytest.raises(VacuumInitialData):
        init_ensemble(rho0, Field.constant(grid, 0.0), 128)

def test_init_ensemble_rejects_odd_count(perturbed):
    with pytest.raises(ValueError):
        init_ensemble(*perturbed, 127)

def test_reconstruction_conserves_mass(perturbed, grid):
    ensemble = init_ensemble(*perturbed, 128)
    rho = reconstruct_density(ensemble, grid)
    assert mean(rho) == pytest.approx(1.0, abs=1e-12)
    assert sup_norm(rho - perturbed[0]) < 2e-3

def test_reconstruction_detects_crossing(perturbed, grid):
    ensemble = init_ensemble(*perturbed, 128)
    x = ensemble.x.copy()
    x[10], x[11] = x[11], x[10]
    with pytest.raises(CrossingDetected) as info:
        reconstruct_density(ensemble, grid, x)
    assert info.value.index == 10

def test_velocity_field(perturbed, grid):
    ensemble = init_ensemble(*perturbed, 128)
    assert sup_norm(velocity_field(ensemble, grid) - perturbed[1]) < 1e-8

def test_equilibrium_stays_at_rest(grid):
    ensemble = init_ensemble(Field.constant(grid, 1.0), Field.constant(grid, 0.0), 128)
    profile = bg.BackgroundProfile.constant(1.0)
    for _ in range(5):
        ensemble = step_coupled(ensemble, profile, 1.0, 0.01, grid)
    assert np.max(np.abs(ensemble.u)) < 1e-12
    assert np.max(np.abs(ensemble.s - 1.0)) < 1e-12
    diag, rho, _, phi = record(ensemble, profile, 1.0, grid)
    assert diag.E < 1e-20
    assert sup_norm(phi) < 1e-12

def test_uniform_drift_momentum_decays_exactly(grid):
    ensemble = init_ensemble(Field.constant(grid, 1.0), Field.constant(grid, 0.1), 128)
    profile = bg.BackgroundProfile.constant(1.0)
    for _ in range(10):
        ensemble = step_coupled(ensemble, profile, 1.0, 0.01, grid)
    assert label_momentum(ensemble) == pytest.approx(0.1 * np.exp(-0.1), abs=1e-10)

def test_step_size_limit(perturbed, grid):
    ensemble = init_ensemble(*perturbed, 128)
    with pytest.raises(CFLViolated):
        step_coupled(ensemble, bg.BackgroundProfile.constant(1.0), 10.0, 0.02, grid)

def test_closing_gap_is_reported_as_blowup(grid):
    ensemble = init_ensemble(Field.constant(grid, 1.0), Field.constant(grid, 0.0), 128)
    u = ensemble.u.copy()
    u[40] = 50.0
    with pytest.raises(BlowUp):
        step_coupled(replace(ensemble, u=u), bg.BackgroundProfile.constant(1.0), 1.0, 0.01, grid, FieldSettings())

def test_run_scenario(scenario):
    result = run_scenario(scenario())
    assert len(result.records) == 11
    assert result.records[0].t == 0.0
    assert result.records[-1].t == pytest.approx(0.5)
    assert result.records[0].energy_dissipation_residual == 0.0
    assert max(r.neutrality_residual for r in result.records) < 1e-10
    assert result.phi is not None and result.rho is not None

def test_momentum_law_with_drift(scenario):
    config = scenario(background={"kind": "constant"}, initial={"u": {"offset": 0.1}}, T=0.2)
    result = run_scenario(config)
    for r in result.records:
        assert r.momentum == pytest.approx(0.1 * np.exp(-r.t), abs=1e-9)

def test_ion_energy_is_non_increasing(scenario):
    result = run_scenario(scenario(background={"kind": "boltzmann"}, T=1.0, diag_every=10))
    energy = np.array([r.E for r in result.records])
    assert np.all(np.diff(energy) <= 1e-6)
    assert max(r.neutrality_residual for r in result.records) < 1e-10

def test_supercritical_data_blows_up(scenario):
    config = scenario(background={"kind": "constant"}, initial={"u": {"amplitude": 1.5}}, dt=1e-3, T=1.0, diag_every=20)
    with pytest.raises(BlowUp) as info:
        run_scenario(config)
    assert 0.0 < info.value.time < 0.5
    assert info.value.records

def test_blowup_time_is_stable_and_matches_characteristic_ode(scenario):
    threshold = critical_w0(1.0, 1.0, 1.0, T=10.0, dt=1e-2, lo=-20.0, hi=0.0, tol=1e-3)
    w0 = threshold - 1.0
    with pytest.raises(BlowUp) as ode:
        integrate(PhaseState(w0, 1.0), lambda t: 1.0, 1.0, 1e-3, 2.0)

    times = []
    for dt in (2e-3, 1e-3):
        # x = -1/2 处 w0 = -2πA
        config = scenario(
            background={"kind": "constant"}, initial={"u": {"amplitude": -w0 / TWO_PI}}, dt=dt, T=2.0, diag_every=100,
        )
        with pytest.raises(BlowUp) as info:
            run_scenario(config)
        times.append(info.value.time)
    assert abs(times[0] - times[1]) <= 0.01 * times[1]
    assert times[1] == pytest.approx(ode.value.time, rel=1e-2)

def test_specific_volume_matches_reconstructed_density(perturbed, grid):
    ensemble = init_ensemble(*perturbed, 128)
    profile = bg.BackgroundProfile.constant(1.0)
    for _ in range(10):
        ensemble = step_coupled(ensemble, profile, 1.0, 0.01, grid)
    rho = reconstruct_density(ensemble, grid)
    assert np.max(np.abs(interpolate(rho, ensemble.x) * ensemble.s - 1.0)) < 5e-3

def test_dissipation_residual_shrinks_with_dt(scenario):
    worst = []
    for dt in (0.08, 0.04):
        config = scenario(
            background={"kind": "constant"}, particles=512, grid=128, dt=dt, T=0.8, diag_every=1,
        )
        result = run_scenario(config)
        worst.append(max(r.energy_dissipation_residual for r in result.records[1:]))
    assert worst[1] < 0.5 * worst[0]
