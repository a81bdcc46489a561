"""
Greenwave Physics Presets
Problem builders for Josephson junctions (modified sine-Gordon) and
Voigt viscoelastic rods
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .kernels import EquationParams
from .reduction import (
    Ball,
    BoundarySpec,
    Neumann,
    Periodic,
    ProblemSpec,
    TimeSignal,
)
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

WINDING_TOL = 0.1
# u0(2 pi) - u0(0) must match 2 pi m to this relative accuracy
RING_MATCH_TOL = 1e-8

Profile = Callable[[np.ndarray], np.ndarray]


class JosephsonVariant(Enum):
    BASIC = "basic"  # b sin u - gamma
    EXTENDED = "extended"  # + a (1 - cos u) u_t


@dataclass
class JosephsonConfig:
    """
    Junction parameters. A ring closes the strip (periodic, m trapped
    fluxons); an open strip has homogeneous Neumann ends.
    """

    b: float
    gamma: float
    a: float
    eps: float
    c: float = 1.0
    variant: JosephsonVariant = JosephsonVariant.BASIC
    ring: bool = True
    m: int = 0
    u_max: float = 4.0 * math.pi
    ut_max: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.variant, str):
            self.variant = JosephsonVariant(self.variant)
        if not self.ring and self.m != 0:
            raise ValueError("An open strip carries no winding number")
        if self.ut_max is None:
            self.ut_max = 10.0 / self.eps

    @property
    def params(self) -> EquationParams:
        return EquationParams(self.a, self.eps, self.c)

    def lipschitz(self) -> float:
        """
        Global constant |b| for the basic variant; for the extended one a
        bound valid on the monitored ball
        """
        if self.variant is JosephsonVariant.BASIC:
            return abs(self.b)
        return abs(self.b) + 2.0 * abs(self.a) * (1.0 + self.ut_max)


def josephson_source(cfg: JosephsonConfig) -> Callable:
    b, gamma, a = cfg.b, cfg.gamma, cfg.a

    if cfg.variant is JosephsonVariant.BASIC:

        def f(x, t, u, u_x, u_t):
            return b * np.sin(u) - gamma

    else:

        def f(x, t, u, u_x, u_t):
            return b * np.sin(u) - gamma + a * (1.0 - np.cos(u)) * u_t

    return f


def josephson_problem(
    cfg: JosephsonConfig,
    u0: Profile,
    u1: Profile,
    u0_x: Optional[Profile] = None,
    u1_x: Optional[Profile] = None,
) -> ProblemSpec:
    """Assemble the junction problem; a ring checks the data's winding"""
    if cfg.ring:
        period = 2.0 * math.pi
        ends = np.array([0.0, period])
        values = np.broadcast_to(u0(ends), ends.shape)
        jump = float(values[1] - values[0])
        target = period * cfg.m
        if abs(jump - target) > RING_MATCH_TOL * (1.0 + abs(target)):
            raise ValueError(
                f"Initial phase winds by {jump / period:.6g} turns, "
                f"ring is configured with m={cfg.m}"
            )
        bc: BoundarySpec = Periodic(cfg.m)
    else:
        bc = Neumann(TimeSignal.zero(), TimeSignal.zero())

    ball = None
    if cfg.variant is JosephsonVariant.EXTENDED:
        ball = Ball(cfg.u_max, cfg.ut_max)

    mu = cfg.lipschitz()
    logger.debug(
        "Josephson %s problem: mu=%g, bc=%s",
        cfg.variant.value,
        mu,
        bc.kind.value,
    )
    return ProblemSpec(
        params=cfg.params,
        bc=bc,
        u0=u0,
        u1=u1,
        f=josephson_source(cfg),
        mu=mu,
        u0_x=u0_x,
        u1_x=u1_x,
        ball=ball,
        state_free=cfg.b == 0 and cfg.variant is JosephsonVariant.BASIC,
        label=f"josephson-{cfg.variant.value}",
    )


@dataclass
class VoigtConfig:
    """Rod with sigma = E nu + (d nu / dt) / muv, loaded by force(x, t)"""

    E: float
    rho: float
    muv: float
    force: Union[float, Callable] = 0.0

    def __post_init__(self):
        for name in ("E", "rho", "muv"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def params(self) -> EquationParams:
        return EquationParams(
            0.0, 1.0 / (self.rho * self.muv), math.sqrt(self.E / self.rho)
        )


def voigt_problem(
    cfg: VoigtConfig,
    u0: Profile,
    u1: Profile,
    bc: BoundarySpec,
    u0_x: Optional[Profile] = None,
    u1_x: Optional[Profile] = None,
) -> ProblemSpec:
    """Linear rod problem; the source ignores the state"""
    force = cfg.force

    if callable(force):

        def f(x, t, u, u_x, u_t):
            return force(x, t)

    else:
        level = float(force)

        def f(x, t, u, u_x, u_t):
            return np.full(np.broadcast(x, t).shape, level)

    return ProblemSpec(
        params=cfg.params,
        bc=bc,
        u0=u0,
        u1=u1,
        f=f,
        mu=0.0,
        u0_x=u0_x,
        u1_x=u1_x,
        state_free=True,
        label="voigt",
    )


def winding_number(
    u: Union[np.ndarray, Trajectory], tol: float = WINDING_TOL
) -> Union[int, np.ndarray]:
    """
    Nearest integer to (u(2 pi) - u(0)) / 2 pi for samples on a closed
    ring grid (last sample at x = 2 pi). A 2-D array gives one count per
    row.
    """
    if isinstance(u, Trajectory):
        if not u.closed:
            raise ValueError("winding_number needs a closed ring trajectory")
        u = u.u
    u = np.asarray(u, dtype=float)
    turns = (u[..., -1] - u[..., 0]) / (2.0 * math.pi)
    count = np.rint(turns)
    off = np.abs(turns - count)
    if np.any(off > tol):
        raise ValueError(
            f"Winding is ambiguous: {float(np.max(off)):.3f} turns "
            "from the nearest integer"
        )
    if count.ndim == 0:
        return int(count)
    return count.astype(int)
