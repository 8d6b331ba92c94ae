import numpy as np
import pytest

from eplab.src.errors import NeutralityViolated, NonPositiveDensity
from eplab.src.fields import Field, Grid, mean, sup_norm
from eplab.src.poisson import (
    boltzmann_residual, newton_jacobian_apply, newton_poisson_boltzmann, solve_linear_poisson, solve_poisson_boltzmann,
)

from tests.conftest import TWO_PI

def test_linear_poisson_single_mode():
    grid = Grid(128)
    rho = Field.from_function(grid, lambda x: 1.0 + TWO_PI ** 2 * np.sin(TWO_PI * x))
    phi = solve_linear_poisson(rho, Field.constant(grid, 1.0))
    assert sup_norm(phi - Field.from_function(grid, lambda x: np.sin(TWO_PI * x))) < 1e-10
    assert mean(phi) == pytest.approx(0.0, abs=1e-14)

def test_linear_poisson_against_varying_background(grid):
    c = Field.from_function(grid, lambda x: 1.0 + 0.2 * np.cos(TWO_PI * x))
    phi = solve_linear_poisson(Field.constant(grid, 1.0), c)
    expected = Field.from_function(grid, lambda x: -0.2 * np.cos(TWO_PI * x) / TWO_PI ** 2)
    assert sup_norm(phi - expected) < 1e-12

def test_linear_poisson_requires_neutrality(grid):
    with pytest.raises(NeutralityViolated) as info:
        solve_linear_poisson(Field.constant(grid, 1.1), Field.constant(grid, 1.0))
    assert info.value.mean == pytest.approx(0.1)

def test_boltzmann_uniform_density_is_fixed_point(grid):
    solution = newton_poisson_boltzmann(Field.constant(grid, 1.0))
    assert solution.iterations == 0
    assert sup_norm(solution.phi) < 1e-13

def test_boltzmann_converges_quadratically():
    grid = Grid(128)
    rho = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.sin(TWO_PI * x))
    solution = newton_poisson_boltzmann(rho)
    assert solution.residuals[-1] <= 1e-12
    assert solution.iterations <= 8
    assert sup_norm(boltzmann_residual(solution.phi, rho)) <= 1e-12
    assert abs(mean(solution.phi.map(np.exp) - rho)) <= 1e-12

def test_boltzmann_warm_start_needs_no_iterations():
    grid = Grid(64)
    rho = Field.from_function(grid, lambda x: 1.0 + 0.2 * np.cos(TWO_PI * x))
    phi = solve_poisson_boltzmann(rho)
    again = newton_poisson_boltzmann(rho, phi)
    assert again.iterations == 0

def test_boltzmann_rejects_non_positive_density(grid):
    rho = Field.from_function(grid, lambda x: 1.0 + 1.5 * np.cos(TWO_PI * x))
    with pytest.raises(NonPositiveDensity):
        newton_poisson_boltzmann(rho)

def test_boltzmann_requires_unit_mass(grid):
    with pytest.raises(NeutralityViolated):
        newton_poisson_boltzmann(Field.constant(grid, 2.0))

def test_jacobian_at_zero_potential(grid):
    v = Field.from_function(grid, lambda x: np.sin(TWO_PI * x))
    result = newton_jacobian_apply(Field.constant(grid, 0.0), v)
    assert sup_norm(result - (1.0 + TWO_PI ** 2) * v) < 1e-10

def test_boltzmann_solution_does_not_depend_on_guess():
    grid = Grid(64)
    rho = Field.from_function(grid, lambda x: 1.0 + 0.2 * np.cos(TWO_PI * x))
    cold = newton_poisson_boltzmann(rho)
    shifted = newton_poisson_boltzmann(rho, Field.from_function(grid, lambda x: 0.3 * np.sin(TWO_PI * x) - 0.1))
    assert shifted.iterations > 0
    assert sup_norm(cold.phi - shifted.phi) < 1e-12

def test_boltzmann_manufactured_solution():
    grid = Grid(64)
    exact = Field.from_function(grid, lambda x: 0.01 * np.cos(TWO_PI * x))
    # 单模态势的谱二阶导数是精确的，mean(ρ) = I₀(0.01) 略大于 1
    rho = TWO_PI ** 2 * exact + exact.map(np.exp)
    solution = newton_poisson_boltzmann(rho, mass_tol=1e-2)
    assert sup_norm(solution.phi - exact) < 1e-10
    assert abs(mean(solution.phi.map(np.exp) - rho)) < 1e-12

def test_boltzmann_residual_decreases_monotonically():
    grid = Grid(128)
    rho = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.sin(TWO_PI * x))
    residuals = newton_poisson_boltzmann(rho).residuals
    assert len(residuals) >= 3
    assert all(later < earlier for earlier, later in zip(residuals, residuals[1:]))

def test_boltzmann_converges_for_peaked_density():
    grid = Grid(64)
    rho = Field.from_function(grid, lambda x: np.exp(3.0 * np.cos(TWO_PI * x)))
    rho = rho / mean(rho)
    solution = newton_poisson_boltzmann(rho)
    assert solution.residuals[-1] <= 1e-8
    assert sup_norm(boltzmann_residual(solution.phi, rho)) == pytest.approx(solution.residuals[-1])

def test_jacobian_matches_residual_difference():
    grid = Grid(128)
    phi = Field.from_function(grid, lambda x: 0.3 * np.cos(TWO_PI * x))
    rho = Field.constant(grid, 1.0)
    v = Field.from_function(grid, lambda x: np.exp(np.sin(TWO_PI * x)))
    eps = 1e-5
    difference = (boltzmann_residual(phi + eps * v, rho) - boltzmann_residual(phi - eps * v, rho)) / (2.0 * eps)
    applied = newton_jacobian_apply(phi, v)
    assert sup_norm(applied - difference) < 1e-6 * sup_norm(applied)

def test_jacobian_on_fine_grid():
    grid = Grid(256)
    phi = Field.from_function(grid, lambda x: 0.3 * np.cos(TWO_PI * x))
    v = Field.from_function(grid, lambda x: np.exp(np.sin(TWO_PI * x)))
    expected = Field.from_function(
        grid,
        lambda x: (
            -TWO_PI ** 2 * (np.cos(TWO_PI * x) ** 2 - np.sin(TWO_PI * x)) * np.exp(np.sin(TWO_PI * x))
            + np.exp(0.3 * np.cos(TWO_PI * x)) * np.exp(np.sin(TWO_PI * x))
        ),
    )
    assert sup_norm(newton_jacobian_apply(phi, v) - expected) < 1e-7
