import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clonelab.dynamics import (Isotopy, energy_drift, flow, flow_jacobian, flow_map, hamiltonian_vector_field,
                               round_trip_error, step_implicit_midpoint, symplecticity_residual, time_grid)
from clonelab.errors import DomainError, IntegrationError
from clonelab.hamiltonians import FourierPoly, Pendulum, Quadratic, hamiltonian_from_dict, random_fourier
from clonelab.phase_space import PhaseSpace, cylinder, euclidean, symplectic_pairing


def harmonic(space):
    return Quadratic.constant(space, np.eye(2))


def rotation(t):
    # exact harmonic flow in (q, p) with X = (p, -q)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]])


def test_pendulum_field_example(cyl):
    assert np.allclose(hamiltonian_vector_field(Pendulum(cyl), [0.0, 1.0], 3.0), [1.0, 0.0], atol=0)


def test_quadratic_identity_field_example(r2):
    X = hamiltonian_vector_field(harmonic(r2), [1.0, 0.0])
    assert np.array_equal(X, [0.0, -1.0])
    # omega(X, v) = dH(v) for every v
    for v in np.eye(2):
        assert symplectic_pairing(r2, X, v) == pytest.approx(np.dot([1.0, 0.0], v))


def test_zero_hamiltonian_field(cyl):
    H = FourierPoly.zero(cyl)
    assert np.array_equal(hamiltonian_vector_field(H, [1.0, 2.0]), [0.0, 0.0])


@pytest.mark.parametrize("space_factors", [(cylinder(),), (euclidean(2), cylinder(-1))])
def test_fourier_gradient_matches_finite_differences(space_factors, rng):
    space = PhaseSpace.of(*space_factors)
    H = random_fourier(space, rng, 2, 2, 3)
    z = rng.uniform(-1, 1, (10, space.dim))
    eps = 1e-6
    fd = np.stack([(H.value(z + eps * e, 0.4) - H.value(z - eps * e, 0.4)) / (2 * eps) for e in np.eye(space.dim)], -1)
    assert np.max(np.abs(H.gradient(z, 0.4) - fd)) < 1e-7


def test_step_zero_hamiltonian_is_identity(cyl):
    z = np.array([1.0, -2.0])
    assert np.array_equal(step_implicit_midpoint(FourierPoly.zero(cyl), z, 0.0, 0.1), z)


@pytest.mark.parametrize("h", [0.5, 0.01, 1e-4])
def test_pendulum_equilibrium_is_fixed(cyl, h):
    assert np.array_equal(step_implicit_midpoint(Pendulum(cyl), [0.0, 0.0], 0.0, h), [0.0, 0.0])


def test_harmonic_period_at_step_one_thousandth(r2):
    end = flow_map(harmonic(r2), [1.0, 0.0], 0.0, 2 * math.pi, 1e-3)
    # midpoint phase error for one period is 2pi h^2/12, about 5.2e-7 here
    assert np.max(np.abs(end - [1.0, 0.0])) < 1e-6


@pytest.mark.xfail(strict=True, reason="implicit midpoint phase error at h=0.01 is about 5.2e-5, above 1e-8")
def test_harmonic_period_example_as_stated(r2):
    z = np.array([1.0, 0.0])
    for _ in range(round(2 * math.pi / 0.01)):
        z = step_implicit_midpoint(harmonic(r2), z, 0.0, 0.01)
    assert np.max(np.abs(z - [1.0, 0.0])) < 1e-8


def test_midpoint_harmonic_matches_cayley_oracle(r2):
    # exact midpoint map of the linear field: rotation by 2 atan(h/2) per step
    h, n = 0.01, 629
    end = flow_map(harmonic(r2), [1.0, 0.0], 0.0, n * h, h)
    assert np.max(np.abs(end - rotation(n * 2 * math.atan(h / 2)) @ [1.0, 0.0])) < 1e-12


def test_flow_of_zero_is_constant(cyl):
    traj = flow(FourierPoly.zero(cyl), [1.0, 2.0], 0.0, 1.0, 0.1)
    assert np.all(traj.points == [1.0, 2.0])
    assert np.allclose(np.diff(traj.times), 0.1)


def test_time_grid_shortens_last_step():
    g = time_grid(0.0, 1.05, 0.1)
    assert g[-1] == 1.05 and len(g) == 12
    assert np.allclose(np.diff(g)[:-1], 0.1)
    with pytest.raises(DomainError):
        time_grid(0.0, 1.0, 0.0)


def test_flow_jacobian_examples(r2, cyl):
    J = flow_jacobian(FourierPoly.zero(cyl), [1.0, 0.0], 0.0, 1.0, 0.1)
    assert np.max(np.abs(J - np.eye(2))) < 1e-10
    J = flow_jacobian(harmonic(r2), [0.3, -0.2], 0.0, math.pi / 2, 1e-3)
    assert np.max(np.abs(J - rotation(math.pi / 2))) < 1e-6


def test_flow_jacobian_batch_matches_single(cyl, rng):
    H = Pendulum(cyl)
    z = rng.uniform(-2, 2, (3, 2))
    batch = flow_jacobian(H, z, 0.0, 1.0, 1e-2)
    assert batch.shape == (3, 2, 2)
    for p, jm in zip(z, batch):
        assert np.max(np.abs(flow_jacobian(H, p, 0.0, 1.0, 1e-2) - jm)) < 1e-9


def test_symplecticity_residual_examples(r2, cyl):
    assert symplecticity_residual(r2, np.eye(2)) == 0.0
    assert symplecticity_residual(r2, 2 * np.eye(2)) == 3.0
    J = flow_jacobian(Pendulum(cyl), [1.0, 0.5], 0.0, 1.0, 1e-3)
    assert symplecticity_residual(cyl, J) < 1e-6
    with pytest.raises(DomainError):
        symplecticity_residual(r2, np.eye(3))


def _specs(space, rng):
    q = rng.normal(size=(2, space.dim, space.dim))
    q = q + q.transpose(0, 2, 1)
    specs = [random_fourier(space, rng, 2, 2, 3)]
    if not space.has_angles:
        specs.append(Quadratic(space, (0.0, 0.5), q))
    return specs


@pytest.mark.parametrize("factors", [(cylinder(),), (euclidean(2),), (cylinder(), euclidean(2, -1))])
def test_symplecticity_property(factors, rng):
    space = PhaseSpace.of(*factors)
    delta = 1e-5
    cases = 0
    for H in _specs(space, rng):
        for _ in range(20 // (1 if space.has_angles else 2)):
            z = rng.uniform(-1, 1, space.dim)
            t0 = rng.uniform(0, 1)
            J = flow_jacobian(H, z, t0, t0 + rng.uniform(0.1, 1.0), 1e-2, delta)
            assert symplecticity_residual(space, J) < max(1e-6, 10 * delta ** 2)
            cases += 1
    assert cases >= 20


def test_pendulum_symplecticity(cyl, rng):
    for _ in range(20):
        J = flow_jacobian(Pendulum(cyl), rng.uniform(-2, 2, 2), 0.0, rng.uniform(0.1, 2.0), 1e-2)
        assert symplecticity_residual(cyl, J) < 1e-6


def test_energy_drift_is_second_order(cyl):
    H = Pendulum(cyl)
    d = [energy_drift(H, [1.0, 0.5], 10.0, h) for h in (1e-2, 5e-3, 2.5e-3)]
    for a, b in zip(d, d[1:]):
        assert abs(a / b - 4.0) < 0.5
    # fitted constant C in |dE| < C h^2 is stable across the three steps
    c = [x / h ** 2 for x, h in zip(d, (1e-2, 5e-3, 2.5e-3))]
    assert max(c) / min(c) < 1.1


def test_constant_quadratic_energy_drift(r2):
    H = Quadratic.constant(r2, [[2.0, 0.3], [0.3, 1.0]])
    # midpoint conserves quadratic invariants exactly
    assert energy_drift(H, [1.0, -0.5], 5.0, 1e-2) < 1e-13


def test_energy_drift_needs_autonomous(r2):
    H = Quadratic(r2, (0.0, 1.0), np.stack([np.eye(2), 2 * np.eye(2)]))
    with pytest.raises(DomainError):
        energy_drift(H, [1.0, 0.0], 1.0, 0.1)


@pytest.mark.parametrize("span", [1.0, 10.0])
def test_reversibility(cyl, rng, span):
    H = random_fourier(cyl, rng, scale=0.2)
    z = rng.uniform(-1, 1, (5, 2))
    assert round_trip_error(H, z, span, 1e-3) < 1e-9


def test_composition_on_shared_grid(cyl, rng):
    H = random_fourier(cyl, rng)
    z = rng.uniform(-1, 1, (4, 2))
    whole = flow_map(H, z, 0.0, 2.0, 0.01)
    halves = flow_map(H, flow_map(H, z, 0.0, 1.0, 0.01), 1.0, 2.0, 0.01)
    assert np.max(np.abs(cyl.displacement(whole, halves))) < 1e-12


def test_angles_stay_wrapped(cyl):
    traj = flow(Quadratic.constant(PhaseSpace.of(euclidean(2)), np.eye(2)), [1.0, 0.0], 0, 1, 0.1)
    assert traj.integrator == "implicit_midpoint"
    traj = flow(Pendulum(cyl), [0.0, 3.0], 0.0, 5.0, 0.01)
    assert np.all((traj.points[:, 0] >= 0) & (traj.points[:, 0] < 2 * math.pi))


def test_non_convergence_raises(r2):
    H = Quadratic.constant(r2, 1e8 * np.eye(2))
    with pytest.raises(IntegrationError) as info:
        step_implicit_midpoint(H, [1.0, 0.0], 0.0, 1.0, max_iter=2)
    assert math.isfinite(info.value.residual) or math.isnan(info.value.residual)


def test_nan_mode_marks_failed_rows(r2):
    H = Quadratic.constant(r2, 1e8 * np.eye(2))
    out = flow_map(H, np.array([[1.0, 0.0]]), 0.0, 1.0, 1.0, max_iter=2, on_fail="nan")
    assert np.all(np.isnan(out))


def test_batched_flow_matches_single_rows(cyl, rng):
    H = random_fourier(cyl, rng)
    z = rng.uniform(-1, 1, (6, 2))
    batch = flow_map(H, z, 0.0, 0.5, 0.01)
    for row, out in zip(z, batch):
        assert np.max(np.abs(cyl.displacement(flow_map(H, row, 0.0, 0.5, 0.01), out))) < 1e-13


def test_trajectory_csv(tmp_path, cyl):
    traj = flow(Pendulum(cyl), [1.0, 0.0], 0.0, 0.05, 0.01)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,coord_0,coord_1"
    assert len(lines) == 7
    row = [float(x) for x in lines[-1].split(",")]
    assert row[0] == 0.05 and np.allclose(row[1:], traj.endpoint)


def test_isotopy_composes_stages(cyl, rng):
    H1, H2 = random_fourier(cyl, rng), random_fourier(cyl, rng)
    iso = Isotopy(((H1, 0.5), (H2, 0.25)))
    z = rng.uniform(-1, 1, (3, 2))
    direct = flow_map(H2, flow_map(H1, z, 0, 0.5, 1e-3), 0, 0.25, 1e-3)
    assert np.max(np.abs(cyl.displacement(iso(z), direct))) < 1e-12
    with pytest.raises(DomainError):
        Isotopy(((H1, 0.0),))
    with pytest.raises(DomainError):
        Isotopy(((H1, 1.0), (Pendulum(cyl), 1.0), (harmonic(PhaseSpace.of(euclidean(2))), 1.0)))
    assert np.array_equal(Isotopy.identity(cyl)(z), cyl.wrap(z))


@given(st.sampled_from(["quadratic", "pendulum", "fourier"]), st.integers(0, 2 ** 32 - 1))
def test_hamiltonian_dict_round_trip(kind, seed):
    rng = np.random.default_rng(seed)
    if kind == "quadratic":
        space = PhaseSpace.of(euclidean(2))
        m = rng.normal(size=(2, 2))
        H = Quadratic.constant(space, m + m.T)
    elif kind == "pendulum":
        space = PhaseSpace.of(cylinder())
        H = Pendulum(space)
    else:
        space = PhaseSpace.of(cylinder(), euclidean(2))
        H = random_fourier(space, rng)
    back = hamiltonian_from_dict(H.to_dict())
    z = rng.uniform(-1, 1, (3, space.dim))
    assert np.array_equal(back.gradient(z, 0.3), H.gradient(z, 0.3))


def test_quadratic_validation(r2, cyl):
    with pytest.raises(DomainError):
        Quadratic.constant(r2, [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DomainError):
        Quadratic.constant(cyl, np.eye(2))
    with pytest.raises(DomainError):
        Quadratic.constant(r2, [[np.inf, 0.0], [0.0, 1.0]])
