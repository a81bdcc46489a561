"""
Greenwave Reference Solver
Second-order finite differences in x with implicit time integration,
used as an independent oracle for the spectral solver
"""

import logging
import math
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .reduction import Dirichlet, Periodic, ProblemSpec
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

RTOL = 1e-9
ATOL = 1e-11


class _Stencil:
    """Node layout and ghost values for one boundary condition"""

    def __init__(self, p: ProblemSpec, n_cells: int):
        if n_cells < 4:
            raise ValueError("reference solver needs at least 4 cells")
        self.p = p
        self.bc = p.bc
        if isinstance(p.bc, Periodic):
            self.dx = p.period / n_cells
            self.x = np.arange(n_cells) * self.dx
            self.unknown = slice(None)
            self.jump = 2.0 * math.pi * p.bc.m
        else:
            self.dx = p.length / n_cells
            self.x = np.arange(n_cells + 1) * self.dx
            interior = isinstance(p.bc, Dirichlet)
            self.unknown = slice(1, -1) if interior else slice(None)
        self.x_unknown = self.x[self.unknown]

    @property
    def size(self) -> int:
        return len(self.x_unknown)

    def pad(self, w: np.ndarray, t: float, rate: bool) -> np.ndarray:
        """Unknowns with one boundary or ghost value on each side"""
        bc, dx = self.bc, self.dx
        order = 1 if rate else 0
        if isinstance(bc, Periodic):
            jump = 0.0 if rate else self.jump
            return np.concatenate([[w[-1] - jump], w, [w[0] + jump]])
        if isinstance(bc, Dirichlet):
            left = bc.h0(np.array(t))[order]
            right = bc.hpi(np.array(t))[order]
            return np.concatenate([[left], w, [right]])
        k0 = bc.k0(np.array(t))[order]
        kp = bc.kpi(np.array(t))[order]
        return np.concatenate(
            [[w[1] - 2.0 * dx * k0], w, [w[-2] + 2.0 * dx * kp]]
        )

    def derivatives(
        self, padded: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        dx = self.dx
        first = (padded[2:] - padded[:-2]) / (2.0 * dx)
        second = (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / dx**2
        return first, second

    def sparsity(self) -> sparse.csr_matrix:
        """Nonzeros of d(u, v)/dt with respect to (u, v)"""
        n = self.size
        band = sparse.diags(
            [np.ones(n - 1), np.ones(n), np.ones(n - 1)], [-1, 0, 1]
        ).tolil()
        if isinstance(self.bc, Periodic):
            band[0, n - 1] = 1
            band[n - 1, 0] = 1
        band = band.tocsr()
        eye = sparse.identity(n, format="csr")
        zero = sparse.csr_matrix((n, n))
        return sparse.bmat([[zero, eye], [band, band]], format="csr")


def reference_solve(
    p: ProblemSpec,
    times: np.ndarray,
    n_cells: int = 128,
) -> Trajectory:
    """
    Method of lines for u_tt + a u_t - c^2 (eps u_t + u)_xx = f with
    Dirichlet boundary values, Neumann ghost points or a pseudoperiodic
    wrap; BDF in time. Works directly in user coordinates.
    """
    times = np.asarray(times, dtype=float)
    stencil = _Stencil(p, n_cells)
    a, eps, c = p.params.a, p.params.eps, p.params.c
    c2 = c * c
    n = stencil.size
    x = stencil.x_unknown

    def rhs(t, y):
        u, v = y[:n], y[n:]
        u_x, u_xx = stencil.derivatives(stencil.pad(u, t, rate=False))
        _, v_xx = stencil.derivatives(stencil.pad(v, t, rate=True))
        f = np.broadcast_to(p.f(x, t, u, u_x, v), (n,))
        return np.concatenate([v, -a * v + c2 * (eps * v_xx + u_xx) + f])

    y0 = np.concatenate(
        [
            np.broadcast_to(p.u0(x), (n,)),
            np.broadcast_to(p.u1(x), (n,)),
        ]
    )
    sol = solve_ivp(
        rhs,
        (float(times[0]), float(times[-1])),
        y0,
        method="BDF",
        t_eval=times,
        rtol=RTOL,
        atol=ATOL,
        jac_sparsity=stencil.sparsity(),
    )
    if not sol.success:
        raise RuntimeError(f"Reference integration failed: {sol.message}")
    logger.debug(
        "Reference solve: %d unknowns, %d rhs evaluations", 2 * n, sol.nfev
    )
    return _assemble(stencil, sol.t, sol.y[:n].T, sol.y[n:].T)


def _one_sided_slopes(u: np.ndarray, dx: float) -> Tuple[np.ndarray, ...]:
    left = (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * dx)
    right = (3.0 * u[:, -1] - 4.0 * u[:, -2] + u[:, -3]) / (2.0 * dx)
    return left, right


def _assemble(stencil: _Stencil, times, u_rows, v_rows) -> Trajectory:
    padded_u = np.stack(
        [stencil.pad(row, t, rate=False) for t, row in zip(times, u_rows)]
    )
    padded_v = np.stack(
        [stencil.pad(row, t, rate=True) for t, row in zip(times, v_rows)]
    )
    u_x = (padded_u[:, 2:] - padded_u[:, :-2]) / (2.0 * stencil.dx)
    bc = stencil.bc
    if isinstance(bc, Dirichlet):
        u, u_t = padded_u, padded_v
        left, right = _one_sided_slopes(u, stencil.dx)
        u_x = np.column_stack([left, u_x, right])
    else:
        u, u_t = u_rows, v_rows
    return Trajectory(
        x=stencil.x,
        times=np.asarray(times),
        u=np.array(u),
        u_x=np.array(u_x),
        u_t=np.array(u_t),
        periodic=isinstance(bc, Periodic),
    )


def discretization_estimate(
    p: ProblemSpec, times: np.ndarray, n_cells: int = 128
) -> float:
    """sup |u_h - u_{h/2}| on the shared nodes"""
    coarse = reference_solve(p, times, n_cells)
    fine = reference_solve(p, times, 2 * n_cells)
    return float(np.max(np.abs(coarse.u - fine.u[:, ::2])))


def sample_on(traj: Trajectory, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of u onto x at every time level"""
    return np.stack([np.interp(x, traj.x, row) for row in traj.u])


