import numpy as np
import pytest

from eplab.src.diagnostics import (
    SUP_NORM_NAMES, DiagnosticsRecord, attach_dissipation_residuals, boltzmann_deviation_bound_check,
    energy_dissipation_residual, energy_terms, entropy_density, fit_decay_rate, free_energy, ion_checks, ion_constants,
    momentum_check, norm_chain_checks, sup_norm_suite,
)
from eplab.src.errors import DomainError, InsufficientData
from eplab.src.fields import Field

from tests.conftest import TWO_PI

def _record(t: float, E: float, kinetic: float = 0.0, **extra) -> DiagnosticsRecord:
    values = dict(
        t=t,
        sup_norms={name: 0.0 for name in SUP_NORM_NAMES},
        E=E,
        C_cross=0.0,
        momentum=0.0,
        neutrality_residual=0.0,
        energy_dissipation_residual=0.0,
        y_sup=0.0,
        kinetic=kinetic,
    )
    values.update(extra)
    return DiagnosticsRecord(**values)

def test_fit_recovers_exponential():
    t = np.linspace(0.0, 20.0, 201)
    fit = fit_decay_rate(t, 2.0 * np.exp(-0.3 * t))
    assert fit.r == pytest.approx(0.3, rel=1e-10)
    assert fit.C == pytest.approx(2.0, rel=1e-8)
    assert fit.quality == pytest.approx(1.0)
    assert fit.t_start == pytest.approx(2.4)

def test_fit_stops_at_floor():
    t = np.linspace(0.0, 20.0, 201)
    fit = fit_decay_rate(t, 1e-3 * np.exp(-t), floor=1e-6, burn_in=0.0)
    assert fit.r == pytest.approx(1.0, rel=1e-10)
    assert fit.samples == 70

def test_fit_below_floor():
    t = np.linspace(0.0, 1.0, 50)
    with pytest.raises(InsufficientData):
        fit_decay_rate(t, np.full_like(t, 1e-12))
    with pytest.raises(InsufficientData):
        fit_decay_rate([], [])

def test_fit_of_constant_series():
    t = np.linspace(0.0, 1.0, 20)
    fit = fit_decay_rate(t, np.ones_like(t))
    assert fit.r == pytest.approx(0.0, abs=1e-12)
    assert fit.quality == 0.0
    assert fit.low_quality

def test_entropy_density_is_non_negative(grid):
    phi = Field.from_function(grid, lambda x: 2.0 * np.sin(TWO_PI * x))
    assert np.min(entropy_density(phi).values) >= 0.0
    assert np.max(entropy_density(Field.constant(grid, 0.0)).values) == 0.0

def test_free_energy(grid):
    one = Field.constant(grid, 1.0)
    zero = Field.constant(grid, 0.0)
    assert free_energy(one, zero, zero) == 0.0
    u = Field.constant(grid, 0.2)
    assert free_energy(one, u, zero) == pytest.approx(0.02)

def test_energy_terms_use_supplied_kinetic(grid):
    rho = Field.constant(grid, 1.0)
    u = Field.constant(grid, 0.2)
    phi = Field.from_function(grid, lambda x: 0.1 * np.cos(TWO_PI * x))
    terms = energy_terms(rho, u, phi)
    assert terms.kinetic == pytest.approx(0.04)
    assert terms.electric == pytest.approx(0.25 * (0.1 * TWO_PI) ** 2)
    assert terms.entropy > 0
    assert terms.total == pytest.approx(free_energy(rho, u, phi))
    linear = energy_terms(rho, u, phi, entropy=False, kinetic=0.5)
    assert linear.kinetic == 0.5 and linear.entropy == 0.0
    assert linear.total == pytest.approx(0.25 + terms.electric)
    one = Field.constant(grid, 1.0)
    zero = Field.constant(grid, 0.0)
    phi = Field.from_function(grid, lambda x: 0.1 * np.sin(TWO_PI * x))
    assert free_energy(one, zero, phi, entropy=False) == pytest.approx(0.01 * np.pi ** 2, rel=1e-10)

def test_dissipation_residual():
    previous, current = _record(0.0, 1.0, kinetic=0.5), _record(0.1, 0.95, kinetic=0.5)
    assert energy_dissipation_residual(previous, current, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        energy_dissipation_residual(current, previous, 1.0)
    attached = attach_dissipation_residuals([previous, _record(0.1, 1.0, kinetic=0.5)], 1.0)
    assert attached[0].energy_dissipation_residual == 0.0
    assert attached[1].energy_dissipation_residual == pytest.approx(0.5)

def test_record_rejects_non_finite():
    with pytest.raises(ValueError):
        _record(0.0, float("nan"))

def test_record_row_matches_columns():
    record = _record(1.0, 0.5)
    assert len(record.row()) == len(DiagnosticsRecord.columns())
    assert DiagnosticsRecord.columns()[:2] == ["t", "sup_rho_minus_cbar"]

def test_momentum_check():
    t = np.linspace(0.0, 2.0, 11)
    report = momentum_check(t, 0.3 * np.exp(-0.5 * t), 0.5)
    assert report.m0 == 0.3
    assert report.max_deviation < 1e-15
    assert momentum_check([], [], 1.0).max_deviation == 0.0

def test_ion_constants():
    constants = ion_constants(1.0, 0.5, 2.0, 1.0, 0.02)
    assert constants.Lambda == pytest.approx(12.0)
    assert constants.lambda_ion == pytest.approx(1.0 / 12.0)
    assert constants.A == pytest.approx(0.2)
    assert constants.kappa == pytest.approx(np.exp(-0.6) / 12.0)
    assert constants.rate_pred == pytest.approx(2.0 * np.exp(-0.6) / 36.0)
    assert constants.Cstar == pytest.approx(np.sqrt(2.0) * np.exp(0.2))

@pytest.mark.parametrize("rho_minus", [0.0, 1.5])
def test_ion_constants_domain(rho_minus):
    with pytest.raises(DomainError):
        ion_constants(1.0, rho_minus, 2.0, 1.0, 0.02)

def test_sup_norm_suite(grid):
    rho = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.cos(TWO_PI * x))
    u = Field.from_function(grid, lambda x: 0.05 * np.sin(TWO_PI * x))
    zero = Field.constant(grid, 0.0)
    norms = sup_norm_suite(rho, u, zero, Field.constant(grid, 1.0), 1.0)
    assert norms["rho_minus_cbar"] == pytest.approx(0.1)
    assert norms["u"] == pytest.approx(0.05, rel=1e-3)
    assert norms["dx_u"] == pytest.approx(0.05 * TWO_PI)
    assert norms["dxx_phi"] == pytest.approx(0.1)
    assert norms["exp_phi_minus_1"] == 0.0

def test_norm_conversion_chain(grid):
    rho = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.cos(TWO_PI * x))
    u = Field.from_function(grid, lambda x: 0.02 + 0.05 * np.sin(TWO_PI * x))
    phi = Field.from_function(grid, lambda x: 0.1 * np.cos(TWO_PI * x) / TWO_PI ** 2)
    checks = norm_chain_checks(rho, u, phi, Field.constant(grid, 1.0), 1.0, momentum=0.02)
    assert len(checks) == 6
    assert all(check.passed for check in checks), [c for c in checks if not c.passed]

def test_ion_checks_flag_energy_increase():
    constants = ion_constants(1.0, 0.9, 1.1, 0.1, 0.01)
    records = [_record(0.0, 0.01, kinetic=0.01), _record(1.0, 0.02, kinetic=0.01)]
    checks = {check.name: check for check in ion_checks(records, constants)}
    assert not checks["energy_monotone"].passed
    assert checks["phi_sup_bound"].passed
    assert ion_checks([], constants) == []

def test_boltzmann_deviation_bounds(grid):
    phi = Field.from_function(grid, lambda x: 0.1 * np.cos(TWO_PI * x))
    checks = {check.name: check for check in boltzmann_deviation_bound_check(phi, 0.01)}
    assert checks["phi_sup_by_energy"].passed
    assert checks["exp_phi_deviation"].passed

    low = {check.name: check for check in boltzmann_deviation_bound_check(phi, 0.001)}
    assert not low["phi_sup_by_energy"].passed
    assert not low["exp_phi_deviation"].passed
    # 较大的 E0 放宽 C*
    relaxed = {check.name: check for check in boltzmann_deviation_bound_check(phi, 0.001, E0=1.0)}
    assert relaxed["exp_phi_deviation"].passed
