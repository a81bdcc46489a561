"""
Unit tests for the Picard solver, its certificate and the residual
Run with: python -m pytest tests/test_solver.py -v
or simply: python tests/test_solver.py
"""

import math
import os
import sys

import numpy as np

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
)

from greenwave.kernels import EquationParams  # noqa: E402
from greenwave.physics import (  # noqa: E402
    JosephsonConfig,
    josephson_problem,
    winding_number,
)
from greenwave.reduction import (  # noqa: E402
    BCKind,
    Dirichlet,
    Neumann,
    ParityViolation,
    Periodic,
    ProblemSpec,
    TimeSignal,
)
from greenwave.reference import (  # noqa: E402
    discretization_estimate,
    reference_solve,
)
from greenwave.solver import (  # noqa: E402
    IterationDiverged,
    IterationRecord,
    NonFiniteSource,
    PicardSolver,
    certify,
    picard_step,
    residual,
    solve,
    weighted_norm,
)
from greenwave.trajectory import Trajectory  # noqa: E402


def constant(level):
    def f(x, t, u, u_x, u_t):
        return np.full(np.broadcast(x, t, u).shape, float(level))

    return f


def sine_gordon_problem():
    cfg = JosephsonConfig(b=1.0, gamma=0.5, a=0.1, eps=0.5)
    return josephson_problem(
        cfg, lambda x: 0.1 * np.cos(x), lambda x: np.zeros_like(x)
    )


def test_certificate_desk_values():
    """Test lambda and factor for b=1, a=0.1, eps=0.5, T=5"""
    print("Testing contraction certificate...")

    params = EquationParams(0.1, 0.5)
    cert = certify(params, BCKind.PERIODIC, mu=1.0, T=5.0)
    assert cert.lam == 260.0
    assert abs(cert.factor - 0.3354) < 2e-3
    assert cert.valid
    assert cert.derivative_weight == 1.0
    summary = cert.to_dict()
    assert summary["bc"] == "periodic"
    assert summary["lambda"] == 260.0

    hinted = certify(params, BCKind.PERIODIC, 1.0, 5.0, lambda_hint=100.0)
    assert hinted.lam == 100.0

    # with a tiny mu only the initial-layer tail matters:
    # (lambda - 4)^(-3/4) * Theta * Gamma(3/4) first drops below 1/2 at 2^5
    easy = certify(params, BCKind.DIRICHLET, 1e-6, 5.0)
    assert easy.lam == 36.0
    assert easy.M_prime < cert.M_prime

    for kwargs in (
        {"lambda_hint": 4.0},
        {"lambda_hint": 1.0},
    ):
        try:
            certify(params, BCKind.PERIODIC, 1.0, 5.0, **kwargs)
            assert False, "Should have raised ValueError"
        except ValueError as e:
            assert "2/eps" in str(e)

    for args in (
        (EquationParams(-0.1, 0.5), BCKind.PERIODIC, 1.0, 5.0),
        (params, BCKind.PERIODIC, -1.0, 5.0),
        (params, BCKind.PERIODIC, 1.0, 0.0),
    ):
        try:
            certify(*args)
            assert False, "Should have raised ValueError"
        except ValueError:
            pass

    # huge mu: the best factor over the schedule is still reported
    hopeless = certify(params, BCKind.PERIODIC, 1e9, 5.0)
    assert not hopeless.valid
    assert hopeless.factor >= 1.0

    print("✅ Contraction certificate test passed")


def test_weighted_norm():
    """Test the exponentially weighted sup norm"""
    print("\nTesting weighted_norm...")

    x = np.linspace(0.0, 1.0, 3)
    times = np.array([0.0, 1.0])
    zeros = np.zeros((2, 3))
    base = Trajectory(x, times, zeros, zeros, zeros)
    du = np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    dx = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    other = Trajectory(x, times, du, dx, zeros)

    assert weighted_norm(base, other, 0.0) == 3.0
    assert abs(weighted_norm(base, other, 1.0) - (2.0 / math.e + 1.0)) < 1e-15
    assert weighted_norm(base, other, 0.0, derivative_weight=0.5) == 2.5

    shifted = Trajectory(x + 1.0, times, zeros, zeros, zeros)
    try:
        weighted_norm(base, shifted, 0.0)
        assert False, "Should have raised ValueError"
    except ValueError:
        pass

    record = IterationRecord(1, 0.5, 0.25)
    assert record.to_row() == (1, 0.5, 0.25, "")

    print("✅ weighted_norm test passed")


def test_constant_forcing():
    """u_tt - (eps u_t + u)_xx = 1 from rest gives u = t^2 / 2"""
    print("\nTesting constant forcing...")

    p = ProblemSpec(
        params=EquationParams(0.0, 1.0),
        bc=Periodic(),
        u0=lambda x: np.zeros_like(x),
        u1=lambda x: np.zeros_like(x),
        f=constant(1.0),
        state_free=True,
    )
    result = solve(p, T=1.0, dt=0.05, N=8)
    traj = result.trajectory
    assert result.converged
    assert len(result.iterations) == 1
    assert traj.closed
    assert len(traj.x) == 33
    t = traj.times[:, None]
    assert np.max(np.abs(traj.u - 0.5 * t * t)) < 1e-12
    assert np.max(np.abs(traj.u_t - t)) < 1e-12
    assert np.max(np.abs(traj.u_x)) < 1e-12
    sup_u, _, sup_ut = traj.sup_norms()
    assert abs(sup_u - 0.5) < 1e-12 and abs(sup_ut - 1.0) < 1e-12

    print("✅ Constant forcing test passed")


def test_manufactured_second_order():
    """Errors against u = exp(-t) cos x shrink four-fold per halved dt"""
    print("\nTesting second-order convergence in time...")

    a = eps = 0.5

    def f(x, t, u, u_x, u_t):
        return (2.0 - a - eps) * np.exp(-t) * np.cos(x) + 0.0 * u

    p = ProblemSpec(
        params=EquationParams(a, eps),
        bc=Periodic(),
        u0=np.cos,
        u1=lambda x: -np.cos(x),
        f=f,
        state_free=True,
    )
    errors = []
    for dt in (0.1, 0.05, 0.025):
        traj = solve(p, T=2.0, dt=dt, N=64).trajectory
        exact = np.exp(-traj.times)[:, None] * np.cos(traj.x)[None, :]
        errors.append(float(np.max(np.abs(traj.u - exact))))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    print(f"   errors {errors}, ratios {ratios}")
    for ratio in ratios:
        assert 3.2 <= ratio <= 4.8, ratios

    print("✅ Second-order convergence test passed")


def test_sine_gordon_ring():
    """Desk problem: certified contraction, small residual, determinism"""
    print("\nTesting sine-Gordon ring...")

    p = sine_gordon_problem()
    T, dt, N = 5.0, 5.0 / 1024, 64
    result = solve(p, T=T, dt=dt, N=N)
    cert = result.certificate
    assert result.converged
    assert cert.valid
    assert cert.lam == 260.0
    assert "certificate_invalid" not in result.flags
    for record in result.iterations[1:]:
        if record.ratio is not None:
            assert record.ratio <= cert.factor + 1e-6, record
    worst = result.max_ratio()
    assert worst is None or worst <= cert.factor + 1e-6
    last = result.iterations[-1]
    assert last.weighted_norm <= 1e-10 and last.plain_norm <= 1e-10

    norms = residual(result.trajectory, p)
    print(f"   residual sup {norms.sup:.3e}, l2 {norms.l2:.3e}")
    assert norms.sup <= 1e-2

    # halving dt cuts the residual about four-fold
    coarse = solve(p, T=T, dt=2.0 * dt, N=N)
    coarse_norms = residual(coarse.trajectory, p)
    print(f"   coarse residual sup {coarse_norms.sup:.3e}")
    assert norms.sup <= 0.35 * coarse_norms.sup

    # the converged iterate is a fixed point of one more step
    v = result.canonical_trajectory
    again = picard_step(v, result.canonical, N=N)
    assert weighted_norm(again, v, 0.0) <= 1e-9

    # without N the step keeps every mode the grid of v resolves
    full = picard_step(v, result.canonical)
    assert len(v.x) == 256
    assert np.array_equal(full.u, picard_step(v, result.canonical, N=127).u)

    repeat = solve(p, T=T, dt=dt, N=N)
    assert np.array_equal(repeat.trajectory.u, result.trajectory.u)
    assert np.array_equal(repeat.trajectory.u_t, result.trajectory.u_t)
    threaded = solve(p, T=T, dt=dt, N=N, threads=2)
    assert np.allclose(
        threaded.trajectory.u, result.trajectory.u, rtol=0, atol=1e-12
    )

    print("✅ Sine-Gordon ring test passed")


def test_divergence():
    """A huge Lipschitz constant on a long window diverges"""
    print("\nTesting divergence detection...")

    def f(x, t, u, u_x, u_t):
        return 200.0 * u

    p = ProblemSpec(
        params=EquationParams(0.5, 1.0),
        bc=Periodic(),
        u0=np.cos,
        u1=lambda x: np.zeros_like(x),
        f=f,
        mu=200.0,
    )
    try:
        solve(p, T=1.0, dt=0.05, N=4, lambda_hint=3.0, k_max=3)
        assert False, "Should have raised IterationDiverged"
    except IterationDiverged as e:
        assert len(e.history) == 3
        assert e.history[-1].weighted_norm >= e.history[0].weighted_norm
        assert "diverged" in str(e)

    print("✅ Divergence detection test passed")


def test_non_finite_source():
    """A source that blows up is reported with its location"""
    print("\nTesting non-finite source...")

    def f(x, t, u, u_x, u_t):
        return np.where(t + 0.0 * u > 0.5, np.inf, 0.0)

    p = ProblemSpec(
        params=EquationParams(0.5, 1.0),
        bc=Periodic(),
        u0=np.cos,
        u1=lambda x: np.zeros_like(x),
        f=f,
        mu=1.0,
    )
    try:
        solve(p, T=1.0, dt=0.05, N=4)
        assert False, "Should have raised NonFiniteSource"
    except NonFiniteSource as e:
        assert e.t > 0.5
        assert math.isinf(e.value)

    try:
        solve(p, T=1.0, dt=0.3, N=4)
        assert False, "Should have raised ValueError"
    except ValueError as e:
        assert "whole multiple" in str(e)

    print("✅ Non-finite source test passed")


def test_dirichlet_data_against_reference():
    """Nonzero boundary data: spectral solution matches finite differences"""
    print("\nTesting Dirichlet data against the reference solver...")

    def f(x, t, u, u_x, u_t):
        return 0.3 * np.sin(u)

    p = ProblemSpec(
        params=EquationParams(0.5, 0.2),
        bc=Dirichlet(
            TimeSignal.from_expression("0.5*sin(t)"), TimeSignal.zero()
        ),
        u0=np.sin,
        u1=lambda x: 0.5 * (1.0 - x / math.pi),
        f=f,
        mu=0.3,
    )
    result = solve(p, T=2.0, dt=0.01, N=32)
    traj = result.trajectory
    assert result.converged
    assert np.allclose(traj.u[:, 0], 0.5 * np.sin(traj.times), atol=1e-12)
    assert np.max(np.abs(traj.u[:, -1])) < 1e-12

    ref = reference_solve(p, traj.times, n_cells=128)
    estimate = discretization_estimate(p, traj.times, n_cells=128)
    error = float(np.max(np.abs(traj.u - ref.u[:, ::2])))
    print(f"   error {error:.3e}, estimate {estimate:.3e}")
    assert error <= max(5e-3, 10.0 * estimate)

    print("✅ Dirichlet data test passed")


def test_negative_damping_against_reference():
    """a < 0 goes through the damping transform and back"""
    print("\nTesting negative damping against the reference solver...")

    def f(x, t, u, u_x, u_t):
        return 0.2 * np.sin(u)

    p = ProblemSpec(
        params=EquationParams(-1.0, 0.5),
        bc=Periodic(),
        u0=lambda x: 0.5 * np.cos(x),
        u1=lambda x: np.zeros_like(x),
        f=f,
        mu=0.2,
    )
    result = solve(p, T=2.0, dt=0.01, N=32)
    traj = result.trajectory
    assert result.converged
    assert abs(result.canonical.params.a) == 0.0
    assert abs(traj.x[-1] - 2.0 * math.pi) < 1e-12

    ref = reference_solve(p, traj.times, n_cells=128)
    error = float(np.max(np.abs(traj.u[:, :128] - ref.u)))
    print(f"   error {error:.3e}")
    assert error <= 5e-3

    print("✅ Negative damping test passed")


def test_winding_ring():
    """A ring with one trapped fluxon keeps its winding number"""
    print("\nTesting ring with winding m=1...")

    cfg = JosephsonConfig(b=1.0, gamma=0.2, a=0.1, eps=0.5, m=1)
    p = josephson_problem(
        cfg, lambda x: x + 0.1 * np.sin(x), lambda x: np.zeros_like(x)
    )
    result = solve(p, T=2.0, dt=0.02, N=32)
    traj = result.trajectory
    assert result.converged

    jump = traj.u[:, -1] - traj.u[:, 0] - 2.0 * math.pi
    assert np.max(np.abs(jump)) <= 1e-12
    assert np.all(winding_number(traj) == 1)

    ref = reference_solve(p, traj.times, n_cells=128)
    error = float(np.max(np.abs(traj.u[:, :-1] - ref.u)))
    print(f"   error {error:.3e}")
    assert error <= 5e-3

    print("✅ Winding ring test passed")


def test_neumann_flat_data_against_reference():
    """Zero-slope polynomial data on an insulated rod"""
    print("\nTesting homogeneous Neumann data against the reference solver...")

    def f(x, t, u, u_x, u_t):
        return 0.3 * np.sin(u)

    p = ProblemSpec(
        params=EquationParams(0.5, 0.2),
        bc=Neumann(),
        u0=lambda x: 0.1 * x * x * (x - math.pi) ** 2,
        u1=lambda x: np.zeros_like(x),
        f=f,
        mu=0.3,
    )
    result = solve(p, T=2.0, dt=0.01, N=32)
    traj = result.trajectory
    assert result.converged
    assert np.max(np.abs(traj.u_x[:, [0, -1]])) < 1e-8

    ref = reference_solve(p, traj.times, n_cells=128)
    estimate = discretization_estimate(p, traj.times, n_cells=128)
    error = float(np.max(np.abs(traj.u - ref.u[:, ::2])))
    print(f"   error {error:.3e}, estimate {estimate:.3e}")
    assert error <= max(5e-3, 10.0 * estimate)

    # sloped data is rejected on its exact end slopes
    sloped = ProblemSpec(
        params=EquationParams(0.5, 0.2),
        bc=Neumann(),
        u0=lambda x: np.zeros_like(x),
        u1=np.sin,
    )
    try:
        PicardSolver(sloped, np.linspace(0.0, 1.0, 11), 8)
        assert False, "Should have raised ParityViolation"
    except ParityViolation as e:
        assert "u1" in str(e)

    print("✅ Homogeneous Neumann test passed")


def test_neumann_data_against_reference():
    """Time-dependent end slopes are lifted and restored exactly"""
    print("\nTesting Neumann data against the reference solver...")

    def f(x, t, u, u_x, u_t):
        return 0.3 * np.sin(u)

    p = ProblemSpec(
        params=EquationParams(0.5, 0.2),
        bc=Neumann(
            TimeSignal.from_expression("0.5*cos(t)"),
            TimeSignal.from_expression("-0.5*cos(t)"),
        ),
        u0=lambda x: 0.5 * np.sin(x),
        u1=lambda x: np.zeros_like(x),
        f=f,
        mu=0.3,
    )
    result = solve(p, T=2.0, dt=0.01, N=32)
    traj = result.trajectory
    assert result.converged
    assert np.allclose(traj.u_x[:, 0], 0.5 * np.cos(traj.times), atol=1e-8)
    assert np.allclose(
        traj.u_x[:, -1], -0.5 * np.cos(traj.times), atol=1e-8
    )

    ref = reference_solve(p, traj.times, n_cells=128)
    estimate = discretization_estimate(p, traj.times, n_cells=128)
    error = float(np.max(np.abs(traj.u - ref.u[:, ::2])))
    print(f"   error {error:.3e}, estimate {estimate:.3e}")
    assert error <= max(5e-3, 10.0 * estimate)

    print("✅ Neumann data test passed")


def run_all_tests():
    """Run all solver tests"""
    print("=" * 60)
    print("Running Picard Solver Tests")
    print("=" * 60)

    test_certificate_desk_values()
    test_weighted_norm()
    test_constant_forcing()
    test_manufactured_second_order()
    test_sine_gordon_ring()
    test_divergence()
    test_non_finite_source()
    test_dirichlet_data_against_reference()
    test_negative_damping_against_reference()
    test_winding_ring()
    test_neumann_flat_data_against_reference()
    test_neumann_data_against_reference()

    print("\n" + "=" * 60)
    print("✅ All solver tests passed!")
    print("=" * 60)


if __name__ == "__main__":
    run_all_tests()
