"""
Greenwave Reduction
Boundary specifications, problem assembly and the exact transforms that
bring any admissible problem to canonical form (a >= 0, c = 1, homogeneous
boundary data), together with their inverses
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, ClassVar, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .expressions import Expression, parse_expression
from .kernels import EquationParams
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

TOL_MATCH = 1e-8

Profile = Callable[[np.ndarray], np.ndarray]
Source = Callable[..., np.ndarray]


class MatchingViolation(ValueError):
    """Initial data inconsistent with the boundary conditions"""

    def __init__(self, failures: List[Tuple[str, float]]):
        self.failures = failures
        details = "; ".join(
            f"{name} off by {residual:.3e}" for name, residual in failures
        )
        super().__init__(f"Matching conditions violated: {details}")


class ParityViolation(ValueError):
    """Endpoint conditions required by an odd or even extension fail"""


class Parity(Enum):
    ODD = "odd"
    EVEN = "even"


class BCKind(Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


def _slope(fn: Profile, x: np.ndarray) -> np.ndarray:
    # central difference, truncation and rounding both near 1e-11
    step = 1e-5 * np.maximum(1.0, np.abs(x))
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def _as_array(value, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), shape) + 0.0


# ----------------------------------------------------------------------
# Time signals
# ----------------------------------------------------------------------


class TimeSignal:
    """Boundary datum g(t) with its first and second derivatives"""

    def __init__(
        self,
        value: Callable,
        first: Callable,
        second: Callable,
        description: str = "",
    ):
        self._value = value
        self._first = first
        self._second = second
        self.description = description

    def __call__(self, t):
        return self._value(t), self._first(t), self._second(t)

    def value(self, t):
        return self._value(t)

    def rate(self, t):
        return self._first(t)

    def accel(self, t):
        return self._second(t)

    def is_zero(self) -> bool:
        return self.description == "0"

    @classmethod
    def constant(cls, level: float) -> "TimeSignal":
        level = float(level)

        def const(t):
            return _as_array(level, np.shape(t))

        def zero(t):
            return _as_array(0.0, np.shape(t))

        description = repr(level) if level else "0"
        return cls(const, zero, zero, description=description)

    @classmethod
    def zero(cls) -> "TimeSignal":
        return cls.constant(0.0)

    @classmethod
    def from_expression(cls, text) -> "TimeSignal":
        """Expression in t; derivatives are taken symbolically"""
        expr = parse_expression(text, allowed=("t",))
        if not expr.variables:
            return cls.constant(float(expr.evaluate()))
        first = expr.derivative("t")
        second = first.derivative("t")

        def wrap(e: Expression):
            return lambda t: _as_array(e.evaluate(t=t), np.shape(t))

        return cls(
            wrap(expr), wrap(first), wrap(second), description=expr.text
        )

    @classmethod
    def from_samples(
        cls, times: Sequence[float], values: Sequence[float]
    ) -> "TimeSignal":
        """Cubic spline through samples; second derivative is O(dt^2)"""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("Signal times and values must be 1-D, same size")
        if len(times) < 4:
            raise ValueError("A sampled signal needs at least 4 samples")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Signal times must be strictly increasing")
        spline = CubicSpline(times, values)
        d1 = spline.derivative(1)
        d2 = spline.derivative(2)
        return cls(
            spline,
            d1,
            d2,
            description=f"samples[{times[0]}..{times[-1]}]",
        )

    def modulated(self, rate: float, factor: float) -> "TimeSignal":
        """factor * exp(rate t) * g(t)"""
        if rate == 0.0 and factor == 1.0:
            return self
        if self.is_zero():
            return self

        def value(t):
            return factor * np.exp(rate * t) * self._value(t)

        def first(t):
            g, g1 = self._value(t), self._first(t)
            return factor * np.exp(rate * t) * (g1 + rate * g)

        def second(t):
            g, g1, g2 = self(t)
            return (
                factor
                * np.exp(rate * t)
                * (g2 + 2.0 * rate * g1 + rate * rate * g)
            )

        return TimeSignal(
            value,
            first,
            second,
            description=f"{factor}*exp({rate}*t)*({self.description})",
        )

    def __repr__(self):
        return f"TimeSignal({self.description})"


# ----------------------------------------------------------------------
# Boundary conditions and problems
# ----------------------------------------------------------------------


class BoundarySpec:
    """Base class of the three boundary condition variants"""

    kind: ClassVar[BCKind]

    def is_homogeneous(self) -> bool:
        raise NotImplementedError

    def homogeneous(self) -> "BoundarySpec":
        raise NotImplementedError


@dataclass(frozen=True)
class Periodic(BoundarySpec):
    """u(x + period) = u(x) + 2 pi m"""

    m: int = 0
    kind: ClassVar[BCKind] = BCKind.PERIODIC

    def is_homogeneous(self) -> bool:
        return self.m == 0

    def homogeneous(self) -> "Periodic":
        return Periodic(0)


@dataclass(frozen=True)
class Dirichlet(BoundarySpec):
    """u(0, t) = h0(t), u(L, t) = hpi(t)"""

    h0: TimeSignal = field(default_factory=TimeSignal.zero)
    hpi: TimeSignal = field(default_factory=TimeSignal.zero)
    kind: ClassVar[BCKind] = BCKind.DIRICHLET

    def is_homogeneous(self) -> bool:
        return self.h0.is_zero() and self.hpi.is_zero()

    def homogeneous(self) -> "Dirichlet":
        return Dirichlet()


@dataclass(frozen=True)
class Neumann(BoundarySpec):
    """u_x(0, t) = k0(t), u_x(L, t) = kpi(t)"""

    k0: TimeSignal = field(default_factory=TimeSignal.zero)
    kpi: TimeSignal = field(default_factory=TimeSignal.zero)
    kind: ClassVar[BCKind] = BCKind.NEUMANN

    def is_homogeneous(self) -> bool:
        return self.k0.is_zero() and self.kpi.is_zero()

    def homogeneous(self) -> "Neumann":
        return Neumann()


@dataclass(frozen=True)
class Ball:
    """Region |u| <= u_max, |u_t| <= ut_max where mu is trusted"""

    u_max: float
    ut_max: float

    def contains(self, traj: Trajectory) -> bool:
        return bool(
            np.max(np.abs(traj.u)) <= self.u_max
            and np.max(np.abs(traj.u_t)) <= self.ut_max
        )


def zero_source(x, t, u, u_x, u_t):
    return np.zeros(np.broadcast(x, t, u).shape)


@dataclass
class ProblemSpec:
    """
    u_tt + a u_t - c^2 (eps u_t + u)_xx = f(x, t, u, u_x, u_t)

    The domain is [0, pi / scale] (ring period 2 pi / scale); user
    problems have scale 1. Callables take numpy arrays and broadcast.
    `state_free` marks a source that ignores (u, u_x, u_t).
    """

    params: EquationParams
    bc: BoundarySpec
    u0: Profile
    u1: Profile
    f: Source = zero_source
    mu: float = 0.0
    u0_x: Optional[Profile] = None
    u1_x: Optional[Profile] = None
    scale: float = 1.0
    ball: Optional[Ball] = None
    state_free: bool = False
    label: str = ""

    def __post_init__(self):
        if self.mu < 0 or not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def length(self) -> float:
        """Interval length for DBC/NBC"""
        return math.pi / self.scale

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.scale

    def is_canonical(self) -> bool:
        return self.params.is_canonical() and self.bc.is_homogeneous()

    def initial_slope(self, x: np.ndarray) -> np.ndarray:
        if self.u0_x is not None:
            return _as_array(self.u0_x(x), np.shape(x))
        return _slope(self.u0, x)

    def velocity_slope(self, x: np.ndarray) -> np.ndarray:
        if self.u1_x is not None:
            return _as_array(self.u1_x(x), np.shape(x))
        return _slope(self.u1, x)


# ----------------------------------------------------------------------
# Odd / even extension
# ----------------------------------------------------------------------


def extend(
    samples: np.ndarray,
    parity: Parity,
    tol: float = TOL_MATCH,
    check: bool = True,
    zero_ends: bool = False,
) -> np.ndarray:
    """
    Extend samples on the interval grid [0, pi] (n + 1 points, last axis)
    to the 2n-point periodic grid of [0, 2 pi), which is [-pi, pi) wrapped.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[-1] - 1
    if n < 2:
        raise ValueError("extend needs at least 3 interval samples")
    amp = float(np.max(np.abs(samples))) if samples.size else 0.0
    if check:
        if parity is Parity.ODD:
            ends = np.max(np.abs(samples[..., [0, -1]]))
            if ends > tol * max(1.0, amp):
                raise ParityViolation(
                    f"Odd extension needs zero endpoint values, "
                    f"found {ends:.3e}"
                )
        else:
            dy = math.pi / n
            s = samples
            left = (-3.0 * s[..., 0] + 4.0 * s[..., 1] - s[..., 2]) / (2 * dy)
            right = (3.0 * s[..., -1] - 4.0 * s[..., -2] + s[..., -3]) / (
                2 * dy
            )
            slope = float(np.max(np.abs(np.stack([left, right]))))
            # the one-sided stencil is off by dy^2 u''' / 3
            if n >= 3:
                d3 = np.stack(
                    [
                        s[..., 3] - 3.0 * s[..., 2] + 3.0 * s[..., 1]
                        - s[..., 0],
                        s[..., -1] - 3.0 * s[..., -2] + 3.0 * s[..., -3]
                        - s[..., -4],
                    ]
                )
                stencil_error = float(np.max(np.abs(d3))) / dy
            else:
                stencil_error = dy * dy * amp
            if slope > tol * max(1.0, amp) + stencil_error:
                raise ParityViolation(
                    f"Even extension needs zero endpoint slopes, "
                    f"found {slope:.3e}"
                )

    inner = samples[..., n - 1 : 0 : -1]
    if parity is Parity.ODD:
        head = samples.copy()
        if zero_ends:
            head[..., 0] = 0.0
            head[..., -1] = 0.0
        return np.concatenate([head, -inner], axis=-1)
    return np.concatenate([samples, inner], axis=-1)


def extend_function(fn: Profile, parity: Parity) -> Profile:
    """2 pi periodic odd / even extension of a function given on [0, pi]"""

    def extended(x):
        y = np.mod(np.asarray(x, dtype=float) + math.pi, 2 * math.pi) - math.pi
        values = _as_array(fn(np.abs(y)), np.shape(y))
        if parity is Parity.ODD:
            return np.sign(y) * values
        return values

    return extended


# ----------------------------------------------------------------------
# Matching conditions
# ----------------------------------------------------------------------


def matching_residuals(p: ProblemSpec) -> List[Tuple[str, float]]:
    """Residual of each matching condition at t = 0"""
    zero = np.array(0.0)
    ends = np.array([0.0, p.length])
    if isinstance(p.bc, Dirichlet):
        v0, v1 = p.u0(ends), p.u1(ends)
        h0, dh0, _ = p.bc.h0(zero)
        hp, dhp, _ = p.bc.hpi(zero)
        pairs = [
            ("h0(0) = u0(0)", h0, v0[0]),
            ("h0'(0) = u1(0)", dh0, v1[0]),
            ("hpi(0) = u0(L)", hp, v0[1]),
            ("hpi'(0) = u1(L)", dhp, v1[1]),
        ]
    elif isinstance(p.bc, Neumann):
        s0, s1 = p.initial_slope(ends), p.velocity_slope(ends)
        k0, dk0, _ = p.bc.k0(zero)
        kp, dkp, _ = p.bc.kpi(zero)
        pairs = [
            ("k0(0) = u0'(0)", k0, s0[0]),
            ("k0'(0) = u1'(0)", dk0, s1[0]),
            ("kpi(0) = u0'(L)", kp, s0[1]),
            ("kpi'(0) = u1'(L)", dkp, s1[1]),
        ]
    else:
        return []
    return [(name, float(abs(lhs - rhs))) for name, lhs, rhs in pairs]


def check_periodic_compatibility(
    p: ProblemSpec,
    samples: int = 64,
    tol: float = TOL_MATCH,
    seed: int = 0,
) -> List[Tuple[str, float]]:
    """Sampled check of the pseudoperiodic shift rules; returns failures"""
    if not isinstance(p.bc, Periodic):
        return []
    P = p.period
    jump = 2.0 * math.pi * p.bc.m
    x = np.linspace(0.0, P, samples, endpoint=False)
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, samples)
    u, u_x, u_t = rng.uniform(-2.0, 2.0, (3, samples))

    checks = [
        (
            "u0(x + P) = u0(x) + 2 pi m",
            np.max(np.abs(p.u0(x + P) - p.u0(x) - jump)),
        ),
        ("u1(x + P) = u1(x)", np.max(np.abs(p.u1(x + P) - p.u1(x)))),
        (
            "f shift rule",
            np.max(
                np.abs(
                    p.f(x + P, t, u + jump, u_x, u_t) - p.f(x, t, u, u_x, u_t)
                )
            ),
        ),
    ]
    scale = 1.0 + abs(jump)
    return [
        (name, float(residual))
        for name, residual in checks
        if residual > tol * scale
    ]


# ----------------------------------------------------------------------
# Transforms
# ----------------------------------------------------------------------


def _mesh(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    return traj.x[None, :], traj.times[:, None]


class BoundaryLift:
    """
    Offset q(x, t) with u_hat = u + q. Calling lift(x, t, u_hat) returns
    the original unknown u_hat - q.
    """

    def __init__(
        self,
        q: Callable,
        q_x: Callable,
        q_t: Callable,
        q_tt: Callable,
        curvature: Optional[Callable] = None,
        name: str = "",
    ):
        self.q = q
        self.q_x = q_x
        self.q_t = q_t
        self.q_tt = q_tt
        # (eps q_t + q)_xx as a function of (x, t)
        self.curvature = curvature
        self.name = name

    def __call__(self, x, t, u_hat=0.0):
        return u_hat - self.q(x, t)

    def restore(self, traj: Trajectory) -> Trajectory:
        X, T = _mesh(traj)
        shape = traj.shape
        return traj.with_fields(
            traj.u - _as_array(self.q(X, T), shape),
            traj.u_x - _as_array(self.q_x(X, T), shape),
            traj.u_t - _as_array(self.q_t(X, T), shape),
        )


def _identity_lift() -> BoundaryLift:
    def zero(x, t):
        return np.zeros(np.broadcast(x, t).shape)

    return BoundaryLift(zero, zero, zero, zero, name="identity")


def _periodic_lift(p: ProblemSpec) -> BoundaryLift:
    slope = p.bc.m * p.scale  # phi_m(x) = m s x

    def q(x, t):
        return -slope * np.broadcast_to(x, np.broadcast(x, t).shape)

    def q_x(x, t):
        return np.full(np.broadcast(x, t).shape, -slope)

    def zero(x, t):
        return np.zeros(np.broadcast(x, t).shape)

    return BoundaryLift(q, q_x, zero, zero, name=f"winding m={p.bc.m}")


def _dirichlet_lift(p: ProblemSpec) -> BoundaryLift:
    L = p.length
    h0, hp = p.bc.h0, p.bc.hpi

    def q(x, t):
        return (x / L - 1.0) * h0.value(t) - (x / L) * hp.value(t)

    def q_x(x, t):
        return np.broadcast_to(
            (h0.value(t) - hp.value(t)) / L, np.broadcast(x, t).shape
        )

    def q_t(x, t):
        return (x / L - 1.0) * h0.rate(t) - (x / L) * hp.rate(t)

    def q_tt(x, t):
        return (x / L - 1.0) * h0.accel(t) - (x / L) * hp.accel(t)

    return BoundaryLift(q, q_x, q_t, q_tt, name="dirichlet")


def _neumann_lift(p: ProblemSpec) -> BoundaryLift:
    L = p.length
    eps = p.params.eps
    k0, kp = p.bc.k0, p.bc.kpi

    def q(x, t):
        return (x * x / (2 * L) - x) * k0.value(t) - x * x / (2 * L) * (
            kp.value(t)
        )

    def q_x(x, t):
        return (x / L - 1.0) * k0.value(t) - (x / L) * kp.value(t)

    def q_t(x, t):
        return (x * x / (2 * L) - x) * k0.rate(t) - x * x / (2 * L) * kp.rate(
            t
        )

    def q_tt(x, t):
        return (x * x / (2 * L) - x) * k0.accel(t) - x * x / (
            2 * L
        ) * kp.accel(t)

    def curvature(x, t):
        flux = eps * (k0.rate(t) - kp.rate(t)) + (k0.value(t) - kp.value(t))
        return np.broadcast_to(flux / L, np.broadcast(x, t).shape)

    return BoundaryLift(q, q_x, q_t, q_tt, curvature, name="neumann")


def homogenize(p: ProblemSpec) -> Tuple[ProblemSpec, BoundaryLift]:
    """
    Absorb boundary data (or winding) into the source and initial data.
    Returns the problem for u_hat = u + q and the lift back to u.
    """
    failures = [
        (name, residual)
        for name, residual in matching_residuals(p)
        if residual > TOL_MATCH
    ]
    failures += check_periodic_compatibility(p)
    if failures:
        raise MatchingViolation(failures)

    if p.bc.is_homogeneous():
        return p, _identity_lift()

    if isinstance(p.bc, Periodic):
        lift = _periodic_lift(p)
    elif isinstance(p.bc, Dirichlet):
        lift = _dirichlet_lift(p)
    else:
        lift = _neumann_lift(p)

    a = p.params.a
    c_sq = p.params.c**2
    f = p.f
    curvature = lift.curvature

    def f_hat(x, t, u, u_x, u_t):
        value = f(
            x,
            t,
            u - lift.q(x, t),
            u_x - lift.q_x(x, t),
            u_t - lift.q_t(x, t),
        )
        value = value + lift.q_tt(x, t) + a * lift.q_t(x, t)
        if curvature is not None:
            value = value - c_sq * curvature(x, t)
        return value

    zero = np.array(0.0)

    def u0_hat(x):
        return p.u0(x) + lift.q(x, zero)

    def u1_hat(x):
        return p.u1(x) + lift.q_t(x, zero)

    def u0_x_hat(x):
        return p.initial_slope(x) + lift.q_x(x, zero)

    def u1_x_hat(x):
        return p.velocity_slope(x) + _slope(lambda y: lift.q_t(y, zero), x)

    logger.debug("Homogenized %s boundary data", lift.name)
    canonical = replace(
        p,
        bc=p.bc.homogeneous(),
        u0=u0_hat,
        u1=u1_hat,
        u0_x=u0_x_hat,
        u1_x=u1_x_hat,
        f=f_hat,
    )
    return canonical, lift


class SpeedMap:
    """x = c x_tilde; u unchanged"""

    def __init__(self, c: float):
        self.c = c

    def __call__(self, x_tilde, t, u_tilde):
        return u_tilde

    def restore(self, traj: Trajectory) -> Trajectory:
        return traj.with_fields(
            traj.u, traj.u_x / self.c, traj.u_t, x=traj.x * self.c
        )


def normalize_speed(p: ProblemSpec) -> Tuple[ProblemSpec, SpeedMap]:
    """Rescale x so that the wave speed becomes 1"""
    c = p.params.c
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if c == 1.0:
        return p, SpeedMap(1.0)

    bc = p.bc
    if isinstance(bc, Neumann):
        bc = Neumann(bc.k0.modulated(0.0, c), bc.kpi.modulated(0.0, c))
    f = p.f

    def f_tilde(x, t, u, u_x, u_t):
        return f(c * x, t, u, u_x / c, u_t)

    canonical = replace(
        p,
        params=EquationParams(p.params.a, p.params.eps, 1.0),
        bc=bc,
        u0=lambda x: p.u0(c * x),
        u1=lambda x: p.u1(c * x),
        u0_x=lambda x: c * p.initial_slope(c * x),
        u1_x=lambda x: c * p.velocity_slope(c * x),
        f=f_tilde,
        mu=p.mu * max(1.0, 1.0 / c),
        scale=p.scale * c,
    )
    return canonical, SpeedMap(c)


class DampingMap:
    """x = c_t x_tilde, u = exp(-a t / 2) u_tilde"""

    def __init__(self, a: float, c_tilde: float):
        self.a = a
        self.c_tilde = c_tilde

    def __call__(self, x_tilde, t, u_tilde):
        return np.exp(-0.5 * self.a * t) * u_tilde

    def restore(self, traj: Trajectory) -> Trajectory:
        decay = np.exp(-0.5 * self.a * traj.times)[:, None]
        return traj.with_fields(
            decay * traj.u,
            decay * traj.u_x / self.c_tilde,
            decay * (traj.u_t - 0.5 * self.a * traj.u),
            x=traj.x * self.c_tilde,
        )


def normalize_damping(p: ProblemSpec) -> Tuple[ProblemSpec, DampingMap]:
    """Remove negative damping through u_tilde = exp(a t / 2) u"""
    a, eps, c = p.params.a, p.params.eps, p.params.c
    if a >= 0:
        raise ValueError(f"normalize_damping needs a < 0, got a={a}")
    if isinstance(p.bc, Periodic) and p.bc.m != 0:
        raise ValueError("Homogenize the winding before rescaling damping")

    stretch = 1.0 - 0.5 * a * eps
    ct = c * math.sqrt(stretch)
    half = 0.5 * a

    bc = p.bc
    if isinstance(bc, Dirichlet):
        bc = Dirichlet(bc.h0.modulated(half, 1.0), bc.hpi.modulated(half, 1.0))
    elif isinstance(bc, Neumann):
        bc = Neumann(bc.k0.modulated(half, ct), bc.kpi.modulated(half, ct))

    f = p.f

    def f_tilde(x, t, u, u_x, u_t):
        decay = np.exp(-half * t)
        growth = np.exp(half * t)
        return 0.25 * a * a * u + growth * f(
            ct * x, t, decay * u, decay * u_x / ct, decay * (u_t - half * u)
        )

    canonical = replace(
        p,
        params=EquationParams(0.0, eps / stretch, 1.0),
        bc=bc,
        u0=lambda x: p.u0(ct * x),
        u1=lambda x: p.u1(ct * x) + half * p.u0(ct * x),
        u0_x=lambda x: ct * p.initial_slope(ct * x),
        u1_x=lambda x: ct
        * (p.velocity_slope(ct * x) + half * p.initial_slope(ct * x)),
        f=f_tilde,
        mu=p.mu * max(1.0 + abs(half), 1.0 / ct) + 0.25 * a * a,
        scale=p.scale * ct,
        state_free=False,
    )
    logger.debug("Damping a=%g removed: c~=%g eps~=%g", a, ct, eps / stretch)
    return canonical, DampingMap(a, ct)


class ReductionChain:
    """Maps applied by reduce_problem, restored in reverse order"""

    def __init__(self, user: ProblemSpec):
        self.user = user
        self.maps: List = []

    def restore(self, traj: Trajectory) -> Trajectory:
        for mapping in reversed(self.maps):
            traj = mapping.restore(traj)
        if isinstance(self.user.bc, Periodic):
            traj = traj.close_ring(
                self.user.period, 2.0 * math.pi * self.user.bc.m
            )
        return traj


def reduce_problem(p: ProblemSpec) -> Tuple[ProblemSpec, ReductionChain]:
    """normalize_speed, then homogenize, then normalize_damping (a < 0)"""
    chain = ReductionChain(p)
    current, speed = normalize_speed(p)
    chain.maps.append(speed)
    # winding must be lifted before the exp(a t / 2) rescaling
    current, lift = homogenize(current)
    chain.maps.append(lift)
    if current.params.a < 0:
        current, damping = normalize_damping(current)
        chain.maps.append(damping)
    return current, chain
