"""
Greenwave Picard Solver
Fixed-point iteration of the Duhamel integral equation on a space-time
grid, the contraction certificate and the a-posteriori residual
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np

from .kernels import GAMMA_3_4, BoundEnvelope, EquationParams, jacobi_theta3
from .reduction import (
    TOL_MATCH,
    BCKind,
    ParityViolation,
    ProblemSpec,
    reduce_problem,
)
from .spectral import (
    GRID_FOR,
    GridKind,
    SpaceGrid,
    SpectralField,
    analyze,
    basis_for,
    homogeneous_evolution,
    kernel_bank,
    second_derivative,
    spectral_derivative,
    synthesize,
)
from .trajectory import Trajectory
from .workers import chunked_map, resolve_threads, split_indices

logger = logging.getLogger(__name__)

DEFAULT_STOP_TOL = 1e-10
DEFAULT_K_MAX = 200
TARGET_FACTOR = 0.5
LAMBDA_STEPS = 21
# ratios below this multiple of (1 + sup|u|) are round-off
RATIO_FLOOR = 1e-11


class NonFiniteSource(ValueError):
    """The source returned inf or NaN"""

    def __init__(self, t: float, x: float, value: float):
        self.t = t
        self.x = x
        self.value = value
        super().__init__(
            f"Source evaluated to {value} at t={t:.6g}, x={x:.6g}"
        )


@dataclass
class IterationRecord:
    k: int
    weighted_norm: float
    plain_norm: float
    ratio: Optional[float] = None

    def to_row(self) -> tuple:
        ratio = "" if self.ratio is None else self.ratio
        return (self.k, self.weighted_norm, self.plain_norm, ratio)


class IterationDiverged(RuntimeError):
    """Picard differences did not shrink within k_max iterations"""

    def __init__(self, history: List[IterationRecord]):
        self.history = history
        first = history[0].weighted_norm if history else float("nan")
        last = history[-1].weighted_norm if history else float("nan")
        super().__init__(
            f"Picard iteration diverged after {len(history)} iterations "
            f"(first difference {first:.3e}, last {last:.3e})"
        )


# ----------------------------------------------------------------------
# Contraction certificate
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ContractionCertificate:
    """
    Weight lambda and contraction factor of the integral-equation map in
    the norm sup e^{-lambda t}(|u| + |u_x| + |u_t|). valid iff factor < 1.
    """

    lam: float
    mu: float
    factor: float
    M_prime: float
    kappa: float
    Theta: float
    valid: bool
    bc_kind: BCKind = BCKind.PERIODIC
    T: float = 0.0
    scale: float = 1.0

    @property
    def derivative_weight(self) -> float:
        """Weight of (u_x, u_t) differences in the certified norm"""
        return 1.0 / self.scale

    def to_dict(self) -> Dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "factor": self.factor,
            "valid": self.valid,
            "M_prime": self.M_prime,
            "kappa": self.kappa,
            "Theta": self.Theta,
            "bc": self.bc_kind.value,
            "T": self.T,
            "scale": self.scale,
        }


def _theta_constant(eps: float, T: float) -> float:
    eta = math.pi / (2.0 * eps * T)
    return 2.0 * (2.0 * math.pi / eps) ** 0.25 * math.sqrt(jacobi_theta3(eta))


def _m_prime(
    env: BoundEnvelope, a: float, bc_kind: BCKind, lam: float
) -> float:
    if bc_kind is BCKind.DIRICHLET:
        return env.M
    if a > 0:
        return env.M + 1.0 / a
    return env.M + 1.0 / lam


def _factor(
    params: EquationParams,
    bc_kind: BCKind,
    mu: float,
    lam: float,
    env: BoundEnvelope,
    Theta: float,
) -> float:
    eps = params.eps
    m_prime = _m_prime(env, params.a, bc_kind, lam)
    bracket = (
        2.0 * m_prime
        + math.sqrt(2.0 + (12.0 + 2.0 * math.pi**2) / (3.0 * eps))
        + math.sqrt(env.kappa)
    )
    tail = (lam - 2.0 / eps) ** -0.75 * Theta * GAMMA_3_4
    return (mu / lam) * bracket + tail


def certify(
    params: EquationParams,
    bc_kind: BCKind,
    mu: float,
    T: float,
    lambda_hint: Optional[float] = None,
    scale: float = 1.0,
) -> ContractionCertificate:
    """
    Search lambda = 2/eps + 2^j (j = 0..20) for the first factor <= 0.5,
    falling back to the smallest factor seen. A lambda_hint is evaluated
    alone. Domains of length pi/scale are certified through the unit
    domain with time tau = scale * t; lambda is reported per unit t.
    """
    if params.a < 0 or params.c != 1.0:
        raise ValueError("certify needs a canonical problem (a >= 0, c = 1)")
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")

    s = scale
    unit = EquationParams(params.a / s, params.eps * s)
    unit_mu = mu * max(1.0, s) / (s * s)
    unit_T = T * s
    env = BoundEnvelope.from_params(unit)
    Theta = _theta_constant(unit.eps, unit_T)
    floor = 2.0 / unit.eps

    if lambda_hint is not None:
        candidates = [lambda_hint / s]
        if candidates[0] <= floor:
            raise ValueError(
                f"lambda must exceed 2/eps = {floor * s:.6g}, "
                f"got {lambda_hint}"
            )
    else:
        candidates = [floor + 2.0**j for j in range(LAMBDA_STEPS)]

    best_lam, best_factor = None, math.inf
    for lam in candidates:
        factor = _factor(unit, bc_kind, unit_mu, lam, env, Theta)
        if factor < best_factor:
            best_lam, best_factor = lam, factor
        if factor <= TARGET_FACTOR:
            best_lam, best_factor = lam, factor
            break

    cert = ContractionCertificate(
        lam=best_lam * s,
        mu=mu,
        factor=best_factor,
        M_prime=_m_prime(env, unit.a, bc_kind, best_lam),
        kappa=env.kappa,
        Theta=Theta,
        valid=best_factor < 1.0,
        bc_kind=bc_kind,
        T=T,
        scale=s,
    )
    logger.debug("Certificate %s", cert.to_dict())
    return cert


def weighted_norm(
    v1: Trajectory,
    v2: Trajectory,
    lam: float,
    derivative_weight: float = 1.0,
) -> float:
    """
    max e^{-lam t}|du| + w max e^{-lam t}|du_x| + w max e^{-lam t}|du_t|
    over the grid; w is the derivative weight.
    """
    if not v1.same_grid(v2):
        raise ValueError("weighted_norm needs trajectories on the same grid")
    weight = np.exp(-lam * v1.times)[:, None]
    parts = [
        float(np.max(weight * np.abs(a - b)))
        for a, b in (
            (v1.u, v2.u),
            (v1.u_x, v2.u_x),
            (v1.u_t, v2.u_t),
        )
    ]
    return parts[0] + derivative_weight * (parts[1] + parts[2])


# ----------------------------------------------------------------------
# Picard iteration
# ----------------------------------------------------------------------


def _duhamel(kernel: np.ndarray, source: np.ndarray, dt: float) -> np.ndarray:
    """
    Trapezoid rule for sum_l K(t_i - t_l) F(t_l) over levels l <= i,
    for every mode column at once
    """
    out = np.zeros(source.shape, dtype=np.result_type(kernel, source))
    for i in range(1, source.shape[0]):
        total = np.einsum("lm,lm->m", kernel[i::-1], source[: i + 1])
        total -= 0.5 * (kernel[i] * source[0] + kernel[0] * source[i])
        out[i] = total
    return dt * out


def _time_levels(T: float, dt: float) -> np.ndarray:
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not a whole multiple of dt={dt}")
    return np.arange(steps + 1) * dt


def _check_flat_ends(p: ProblemSpec, u0: np.ndarray, u1: np.ndarray):
    """Zero endpoint slopes of the data, needed by the even extension"""
    ends = np.array([0.0, p.length])
    for name, slopes, values in (
        ("u0", p.initial_slope(ends), u0),
        ("u1", p.velocity_slope(ends), u1),
    ):
        worst = float(np.max(np.abs(slopes)))
        amp = float(np.max(np.abs(values)))
        if worst > TOL_MATCH * max(1.0, amp * p.scale):
            raise ParityViolation(
                f"Even extension needs zero endpoint slopes of {name}, "
                f"found {worst:.3e}"
            )


class PicardSolver:
    """
    One canonical problem on a fixed space-time grid. Kernel tables and
    the free evolution of the data are computed once.
    """

    def __init__(
        self,
        problem: ProblemSpec,
        times: np.ndarray,
        N: int,
        threads: int = 1,
    ):
        if not problem.is_canonical():
            raise ValueError(
                "PicardSolver needs a canonical problem; use reduce_problem"
            )
        if N < 1:
            raise ValueError(f"N must be >= 1, got {N}")
        self.problem = problem
        self.times = np.asarray(times, dtype=float)
        self.dt = float(self.times[1] - self.times[0])
        self.N = int(N)
        self.threads = resolve_threads(threads)

        self.basis = basis_for(problem.bc.kind)
        self.grid = SpaceGrid.for_modes(GRID_FOR[self.basis], self.N)
        self.x = self.grid.points / problem.scale
        periodic = problem.bc.kind is BCKind.PERIODIC

        u0 = problem.u0(self.x)
        u1 = problem.u1(self.x)
        self.u0 = np.broadcast_to(u0, self.x.shape) + 0.0
        self.u1 = np.broadcast_to(u1, self.x.shape) + 0.0
        self.u0_x = problem.initial_slope(self.x)

        # slopes of the data are known, so NBC ends are checked on them
        sampled_check = problem.bc.kind is not BCKind.NEUMANN
        if not sampled_check:
            _check_flat_ends(problem, self.u0, self.u1)
        field0 = self.analyze(self.u0, check_parity=sampled_check)
        field1 = self.analyze(self.u1, check_parity=sampled_check)
        self.bank = kernel_bank(field0, problem.params)
        self.H, self.dH, _ = self.bank.evaluate(self.times)
        u_free, ut_free = homogeneous_evolution(
            field0, field1, self.times, problem.params
        )
        self.free_u = u_free.coeffs
        self.free_ut = ut_free.coeffs
        self._template = Trajectory(
            x=self.x,
            times=self.times,
            u=np.zeros((len(self.times), len(self.x))),
            u_x=np.zeros((len(self.times), len(self.x))),
            u_t=np.zeros((len(self.times), len(self.x))),
            periodic=periodic,
        )

    def analyze(self, samples, check_parity: bool = False) -> SpectralField:
        return analyze(
            samples,
            self.grid,
            self.basis,
            N=self.N,
            scale=self.problem.scale,
            check_parity=check_parity,
        )

    def _assemble(self, u_coeffs, ut_coeffs) -> Trajectory:
        u_field = SpectralField(self.basis, u_coeffs, self.problem.scale)
        ut_field = u_field.with_coeffs(ut_coeffs)
        u = synthesize(u_field, self.grid)
        u_x = synthesize(spectral_derivative(u_field), self.grid)
        u_t = synthesize(ut_field, self.grid)
        # data at t = 0 is taken exactly
        u[0], u_x[0], u_t[0] = self.u0, self.u0_x, self.u1
        return self._template.with_fields(u, u_x, u_t)

    def initial_guess(self) -> Trajectory:
        """Free evolution of the initial data"""
        return self._assemble(self.free_u, self.free_ut)

    def evaluate_source(self, v: Trajectory) -> np.ndarray:
        if not v.same_grid(self._template):
            raise ValueError("Trajectory does not match the solver grid")
        f = self.problem.f
        X = self.x[None, :]

        def level_block(rows: np.ndarray) -> np.ndarray:
            T = self.times[rows][:, None]
            values = f(X, T, v.u[rows], v.u_x[rows], v.u_t[rows])
            return np.broadcast_to(values, (len(rows), len(self.x))) + 0.0

        blocks = chunked_map(
            level_block,
            split_indices(len(self.times), self.threads),
            self.threads,
        )
        F = np.concatenate(blocks, axis=0)
        bad = ~np.isfinite(F)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NonFiniteSource(
                float(self.times[i]), float(self.x[j]), float(F[i, j])
            )
        return F

    def step(self, v: Trajectory) -> Trajectory:
        """One application of the integral-equation map"""
        F = self.analyze(self.evaluate_source(v)).coeffs

        def mode_block(cols: np.ndarray):
            return (
                _duhamel(self.H[:, cols], F[:, cols], self.dt),
                _duhamel(self.dH[:, cols], F[:, cols], self.dt),
            )

        chunks = split_indices(F.shape[1], self.threads)
        results = chunked_map(mode_block, chunks, self.threads)
        forced_u = np.concatenate([r[0] for r in results], axis=1)
        forced_ut = np.concatenate([r[1] for r in results], axis=1)
        return self._assemble(
            self.free_u + forced_u, self.free_ut + forced_ut
        )


def picard_step(
    v: Trajectory, p: ProblemSpec, N: Optional[int] = None, threads: int = 1
) -> Trajectory:
    """
    Apply the integral-equation map once on the grid of v. N defaults to
    every mode that grid resolves.
    """
    if N is None:
        kind = GRID_FOR[basis_for(p.bc.kind)]
        size = len(v.x)
        n_x = size // 2 if kind is GridKind.PERIODIC else size - 1
        grid = SpaceGrid(kind, n_x)
        if grid.size != size:
            raise ValueError(
                f"{size} points do not form a {kind.value} grid"
            )
        N = grid.max_modes
    return PicardSolver(p, v.times, N, threads).step(v)


@dataclass
class SolveResult:
    """Solution in user coordinates plus everything needed to audit it"""

    trajectory: Trajectory
    certificate: ContractionCertificate
    iterations: List[IterationRecord]
    flags: Set[str] = field(default_factory=set)
    canonical: Optional[ProblemSpec] = None
    canonical_trajectory: Optional[Trajectory] = None

    @property
    def converged(self) -> bool:
        return "not_converged" not in self.flags

    def max_ratio(self) -> Optional[float]:
        ratios = [r.ratio for r in self.iterations[1:] if r.ratio is not None]
        return max(ratios) if ratios else None


def solve(
    p: ProblemSpec,
    T: float,
    dt: float,
    N: int,
    stop_tol: float = DEFAULT_STOP_TOL,
    k_max: int = DEFAULT_K_MAX,
    lambda_hint: Optional[float] = None,
    threads: int = 1,
) -> SolveResult:
    """
    Reduce p to canonical form, iterate the integral-equation map from
    the free evolution and map the fixed point back to user coordinates
    """
    times = _time_levels(T, dt)
    canonical, chain = reduce_problem(p)
    solver = PicardSolver(canonical, times, N, threads)
    cert = certify(
        canonical.params,
        canonical.bc.kind,
        canonical.mu,
        T,
        lambda_hint=lambda_hint,
        scale=canonical.scale,
    )
    flags: Set[str] = set()
    if not cert.valid:
        flags.add("certificate_invalid")
        logger.warning(
            "No contraction certificate: best factor %.3g at lambda=%.3g",
            cert.factor,
            cert.lam,
        )

    v = solver.initial_guess()
    history: List[IterationRecord] = []
    converged = False
    for k in range(1, k_max + 1):
        new = solver.step(v)
        diff = weighted_norm(new, v, cert.lam, cert.derivative_weight)
        plain = weighted_norm(new, v, 0.0)
        ratio = None
        if history:
            previous = history[-1].weighted_norm
            floor = RATIO_FLOOR * (1.0 + float(np.max(np.abs(new.u))))
            if previous > floor:
                ratio = diff / previous
        history.append(IterationRecord(k, diff, plain, ratio))
        logger.info(
            "iteration %d: weighted %.3e plain %.3e ratio %s",
            k,
            diff,
            plain,
            "-" if ratio is None else f"{ratio:.3g}",
        )
        v = new

        if p.ball is not None and "ball_exceeded" not in flags:
            if not p.ball.contains(chain.restore(v)):
                flags.add("ball_exceeded")
                logger.warning(
                    "Iterate left the ball |u| <= %g, |u_t| <= %g",
                    p.ball.u_max,
                    p.ball.ut_max,
                )

        if canonical.state_free or (diff <= stop_tol and plain <= stop_tol):
            converged = True
            break

    if not converged:
        if history[-1].weighted_norm >= history[0].weighted_norm:
            raise IterationDiverged(history)
        flags.add("not_converged")
        logger.warning(
            "Stopped after %d iterations with difference %.3e",
            k_max,
            history[-1].weighted_norm,
        )

    return SolveResult(
        trajectory=chain.restore(v),
        certificate=cert,
        iterations=history,
        flags=flags,
        canonical=canonical,
        canonical_trajectory=v,
    )


# ----------------------------------------------------------------------
# Residual
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualNorms:
    sup: float
    l2: float


def residual(traj: Trajectory, p: ProblemSpec) -> ResidualNorms:
    """
    Lu - f on interior time levels: u_tt by centred differences of u_t,
    x-derivatives spectrally. Needs homogeneous boundary data (canonical
    variables) and at least 5 time levels.
    """
    if len(traj.times) < 5:
        raise ValueError("residual needs at least 5 time levels")
    if not p.bc.is_homogeneous():
        raise ValueError("residual needs homogeneous boundary data")
    if traj.closed:
        traj = traj.with_fields(
            traj.u[:, :-1], traj.u_x[:, :-1], traj.u_t[:, :-1], traj.x[:-1]
        )

    basis = basis_for(p.bc.kind)
    size = len(traj.x)
    n_x = size // 2 if traj.periodic else size - 1
    grid = SpaceGrid(GRID_FOR[basis], n_x)

    def xx(samples):
        spec = analyze(samples, grid, basis, scale=p.scale, check_parity=False)
        return synthesize(second_derivative(spec), grid)

    a, eps, c = p.params.a, p.params.eps, p.params.c
    dt = traj.dt
    inner = slice(1, -1)
    u_tt = (traj.u_t[2:] - traj.u_t[:-2]) / (2.0 * dt)
    u = traj.u[inner]
    u_t = traj.u_t[inner]
    L_u = u_tt + a * u_t - c * c * (eps * xx(u_t) + xx(u))
    f = p.f(
        traj.x[None, :],
        traj.times[inner][:, None],
        u,
        traj.u_x[inner],
        u_t,
    )
    R = L_u - f
    dx = grid.spacing / p.scale
    return ResidualNorms(
        sup=float(np.max(np.abs(R))),
        l2=float(np.sqrt(np.sum(R * R) * dt * dx)),
    )
