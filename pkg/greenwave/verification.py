"""
Greenwave Verification
Executable audits of the mode kernel inequalities, the theta kernel
bounds and the initial-layer limits, collected in a CSV-ready report
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from tabulate import tabulate

from .kernels import (
    EquationParams,
    KernelBank,
    l2_norm_bounds,
    lemma_bound_arrays,
    theta_envelope,
)
from .reduction import BCKind
from .spectral import (
    GRID_FOR,
    Basis,
    GridKind,
    SpaceGrid,
    SpectralField,
    analyze,
    basis_for,
    green_convolve,
    spectral_derivative,
    synthesize,
)
from .workers import chunked_map, resolve_threads, split_indices

logger = logging.getLogger(__name__)

REL_SLACK = 1e-12
ABS_FLOOR = 1e-300
TRACE_TOL = 1e-12
ODE_REL_TOL = 1e-9
ODE_ABS_TOL = 1e-11

CSV_HEADER = ("inequality_id", "n", "t", "lhs", "rhs", "slack")
SUMMARY_HEADER = ("inequality_id", "checked", "failed", "min_slack", "role")

# kernel value read by each inequality and whether it is n^2 weighted
LEMMA_LHS = {
    "derivative_0": ("H", False),
    "derivative_1": ("dH", False),
    "derivative_2": ("ddH", False),
    "dissipative": ("D0", True),
    "dissipative_rate": ("D1", True),
    "decay": ("H", False),
    "short_time": ("H", False),
    "unit_velocity": ("dH", False),
    "delta_rate": ("one_minus_dH", False),
}


def passes(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """lhs <= rhs up to relative rounding of the bound"""
    return lhs <= rhs * (1.0 + REL_SLACK) + ABS_FLOOR


def slack(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Relative margin (rhs - lhs) / rhs; absolute where rhs is 0 or inf"""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = (rhs - lhs) / np.abs(rhs)
    out = np.where((rhs == 0) | ~np.isfinite(rhs), rhs - lhs, relative)
    return np.where(np.isinf(rhs) & np.isfinite(lhs), 1.0, out)


@dataclass
class AuditRecord:
    inequality_id: str
    n: Optional[int]
    t: float
    lhs: float
    rhs: float
    slack: float

    def to_row(self) -> tuple:
        n = "" if self.n is None else self.n
        return (self.inequality_id, n, self.t, self.lhs, self.rhs, self.slack)


@dataclass
class AuditSummary:
    checked: int = 0
    failed: int = 0
    min_slack: float = math.inf
    advisory: bool = False


@dataclass
class AuditReport:
    """
    Failures of every checked inequality plus per-inequality summaries.
    Advisory inequalities are reported but never fail the audit.
    """

    name: str = "audit"
    failures: List[AuditRecord] = field(default_factory=list)
    summary: Dict[str, AuditSummary] = field(default_factory=dict)

    def add_block(
        self,
        inequality_id: str,
        n,
        t,
        lhs,
        rhs,
        advisory: bool = False,
    ):
        """Check lhs <= rhs elementwise; NaN right-hand sides are skipped"""
        lhs, rhs, n_arr, t_arr = np.broadcast_arrays(
            np.asarray(lhs, dtype=float),
            np.asarray(rhs, dtype=float),
            np.asarray(np.nan if n is None else n, dtype=float),
            np.asarray(t, dtype=float),
        )
        applicable = ~np.isnan(rhs)
        entry = self.summary.setdefault(inequality_id, AuditSummary())
        entry.advisory = entry.advisory or advisory
        if not applicable.any():
            return
        lhs, rhs = lhs[applicable], rhs[applicable]
        n_arr, t_arr = n_arr[applicable], t_arr[applicable]
        margin = slack(lhs, rhs)
        ok = passes(lhs, rhs)
        entry.checked += int(lhs.size)
        entry.failed += int(np.count_nonzero(~ok))
        entry.min_slack = min(entry.min_slack, float(np.min(margin)))
        for i in np.flatnonzero(~ok):
            self.failures.append(
                AuditRecord(
                    inequality_id,
                    None if np.isnan(n_arr[i]) else int(n_arr[i]),
                    float(t_arr[i]),
                    float(lhs[i]),
                    float(rhs[i]),
                    float(margin[i]),
                )
            )

    def merge(self, other: "AuditReport") -> "AuditReport":
        self.failures.extend(other.failures)
        for key, theirs in other.summary.items():
            mine = self.summary.setdefault(key, AuditSummary())
            mine.checked += theirs.checked
            mine.failed += theirs.failed
            mine.min_slack = min(mine.min_slack, theirs.min_slack)
            mine.advisory = mine.advisory or theirs.advisory
        return self

    @property
    def checked(self) -> int:
        return sum(entry.checked for entry in self.summary.values())

    @property
    def passed(self) -> bool:
        return all(
            entry.advisory or entry.failed == 0
            for entry in self.summary.values()
        )

    def failure_rows(self) -> List[tuple]:
        return [
            record.to_row()
            for record in self.failures
            if not self.summary[record.inequality_id].advisory
        ]

    def summary_rows(self) -> List[tuple]:
        return [
            (
                key,
                entry.checked,
                entry.failed,
                entry.min_slack,
                "advisory" if entry.advisory else "required",
            )
            for key, entry in sorted(self.summary.items())
        ]

    def summary_table(self) -> str:
        return tabulate(
            self.summary_rows(),
            headers=SUMMARY_HEADER,
            tablefmt="grid",
            floatfmt=".3e",
        )

    def write_csv(self, path: Union[str, Path]):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER)
            writer.writerows(self.failure_rows())

    def write_summary(self, path: Union[str, Path]):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(SUMMARY_HEADER)
            writer.writerows(self.summary_rows())


# ----------------------------------------------------------------------
# Mode kernel inequalities
# ----------------------------------------------------------------------


def _lemma_block(
    params: EquationParams,
    n: np.ndarray,
    t: np.ndarray,
    kernel_scale: float,
) -> AuditReport:
    report = AuditReport()
    bank = KernelBank(params, n.astype(float))
    H, dH, ddH = (kernel_scale * v for v in bank.evaluate(t))
    D0, D1 = (kernel_scale * v for v in bank.dissipative(t))
    values = {
        "H": np.abs(H),
        "dH": np.abs(dH),
        "ddH": np.abs(ddH),
        "D0": np.abs(D0),
        "D1": np.abs(D1),
        "one_minus_dH": np.abs(1.0 - dH),
    }
    n_grid = n[None, :]
    t_grid = t[:, None]
    bounds = lemma_bound_arrays(params, n_grid, t_grid)
    for key, (source, weighted) in LEMMA_LHS.items():
        lhs = values[source]
        if weighted:
            lhs = lhs * (n_grid * n_grid)
        report.add_block(key, n_grid, t_grid, lhs, bounds[key])
    return report


def audit_lemma(
    params: EquationParams,
    n_range: Tuple[int, int],
    t_grid: Sequence[float],
    kernel_scale: float = 1.0,
    threads: int = 1,
) -> AuditReport:
    """
    Check every mode kernel inequality over n in [n_lo, n_hi] and the
    given times. kernel_scale != 1 corrupts the kernels on purpose.
    """
    n_lo, n_hi = n_range
    n = np.arange(int(n_lo), int(n_hi) + 1)
    t = np.asarray(t_grid, dtype=float)
    if n.size == 0 or t.size == 0:
        raise ValueError("Empty lemma sweep")
    if np.any(t < 0):
        raise ValueError("Times must be non-negative")

    workers = resolve_threads(threads)
    blocks = chunked_map(
        lambda idx: _lemma_block(params, n[idx], t, kernel_scale),
        split_indices(n.size, workers),
        workers,
    )
    report = AuditReport(name="lemma")
    for block in blocks:
        report.merge(block)
    logger.info(
        "Kernel bound audit a=%g eps=%g: %d checks, %d failures",
        params.a,
        params.eps,
        report.checked,
        len(report.failures),
    )
    return report


# ----------------------------------------------------------------------
# Theta kernel bounds
# ----------------------------------------------------------------------


def _theta_samples(H: np.ndarray, x: np.ndarray) -> np.ndarray:
    """2 pi theta(x) = H_0 + 2 sum_n H_n cos(n x) for H over n = 0..N"""
    n = np.arange(H.shape[-1])
    phases = np.cos(np.multiply.outer(x, n[1:]))
    return H[..., :1] + 2.0 * (H[..., 1:] @ phases.T)


def audit_prop1(
    params: EquationParams,
    t_grid: Sequence[float],
    N: int,
    x_samples: int = 64,
) -> AuditReport:
    """
    Theta kernel bounds on the modes |n| <= N: the pointwise majorant and
    its envelope, the three L2 bounds, theta(., 0) = 0, evenness and
    periodicity. theta_origin (|theta(x)| <= theta(0)) is advisory.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("Empty theta sweep")
    if N < 1:
        raise ValueError("N must be >= 1")
    report = AuditReport(name="prop1")
    n = np.arange(N + 1)
    bank = KernelBank(params, n.astype(float))
    H, dH, _ = bank.evaluate(t)
    x = np.linspace(0.0, 2.0 * math.pi, x_samples, endpoint=False)

    theta = _theta_samples(H, x)
    majorant = np.abs(H[:, 0]) + 2.0 * np.sum(np.abs(H[:, 1:]), axis=1)
    report.add_block(
        "theta_majorant",
        N,
        t[:, None],
        np.abs(theta),
        majorant[:, None],
    )
    envelope = np.array([theta_envelope(params, float(s)) for s in t])
    report.add_block("theta_envelope", N, t, majorant, envelope)
    report.add_block(
        "theta_origin",
        N,
        t[:, None],
        np.abs(theta),
        np.abs(theta[:, :1]),
        advisory=True,
    )

    mirrored = _theta_samples(H, -x)
    shifted = _theta_samples(H, x + 2.0 * math.pi)
    scale = 1.0 + np.max(np.abs(theta), axis=1, keepdims=True)
    report.add_block(
        "theta_even",
        N,
        t[:, None],
        np.abs(theta - mirrored),
        TRACE_TOL * scale,
    )
    report.add_block(
        "theta_periodic",
        N,
        t[:, None],
        np.abs(theta - shifted),
        TRACE_TOL * scale,
    )

    at_zero = t == 0
    if at_zero.any():
        report.add_block(
            "theta_initial",
            N,
            t[at_zero][:, None],
            np.abs(theta[at_zero]),
            np.zeros((int(at_zero.sum()), 1)),
        )

    k2 = (n * n).astype(float)
    # each n > 0 stands for the pair +-n
    weights = np.where(n == 0, 1.0, 2.0)
    sums = {
        "theta_x_l2": np.sum(weights * k2 * H * H, axis=1),
        "theta_t_l2": np.sum(weights * dH * dH, axis=1),
        "theta_tx_l2": np.sum(weights * k2 * dH * dH, axis=1),
    }
    for i, s in enumerate(t):
        if s <= 0:
            continue
        bounds = l2_norm_bounds(params, float(s))
        for key, bound in zip(sums, bounds):
            report.add_block(key, N, s, sums[key][i], bound)
    logger.info(
        "Theta audit a=%g eps=%g N=%d: %d checks, %d failures",
        params.a,
        params.eps,
        N,
        report.checked,
        len(report.failures),
    )
    return report


# ----------------------------------------------------------------------
# Initial-layer limits
# ----------------------------------------------------------------------


def _sample_field(
    g: Union[Callable, np.ndarray], bc_kind: BCKind, N: int
) -> Tuple[SpectralField, SpaceGrid, np.ndarray]:
    basis = basis_for(bc_kind)
    kind = GRID_FOR[basis]
    if callable(g):
        grid = SpaceGrid.for_modes(kind, N)
        samples = np.broadcast_to(g(grid.points), grid.points.shape) + 0.0
    else:
        samples = np.asarray(g, dtype=float)
        size = samples.shape[-1]
        n_x = size // 2 if kind is GridKind.PERIODIC else size - 1
        grid = SpaceGrid(kind, n_x)
    field_ = analyze(samples, grid, basis, N=min(N, grid.max_modes))
    return field_, grid, synthesize(field_, grid)


def _rate_envelope(bank: KernelBank, g: SpectralField, t: float) -> float:
    """t * sum (2 h_n + |Im omega_n|) |c_n| over the complex coefficients"""
    coeffs = g.complex_coeffs()
    k = np.arange(-g.N, g.N + 1) * g.scale
    h = bank.params.half_damping(k * k)
    imag = np.sqrt(np.clip(-(h - np.abs(k)) * (h + np.abs(k)), 0.0, None))
    return float(t * np.sum((2.0 * h + imag) * np.abs(coeffs)))


@dataclass(frozen=True)
class PairingResult:
    t: float
    value: float
    target: float
    envelope: float

    @property
    def error(self) -> float:
        return abs(self.value - self.target)


def delta_pairing(
    params: EquationParams,
    phi: Union[Callable, np.ndarray],
    t: float,
    N: int = 64,
) -> PairingResult:
    """
    Integral of theta_t(x, t) phi(x) over a period, i.e. sum_n H_n'(t) c_n
    with c_n the coefficients of phi; tends to phi(0) as t -> 0
    """
    field_, _, _ = _sample_field(phi, BCKind.PERIODIC, N)
    coeffs = field_.complex_coeffs()
    bank = KernelBank(params, field_.wavenumbers)
    dH = bank.evaluate(t)[1]
    value = float(np.real(np.sum(dH * coeffs)))
    target = float(np.real(np.sum(coeffs)))
    return PairingResult(
        t=float(t),
        value=value,
        target=target,
        envelope=_rate_envelope(bank, field_, t),
    )


DEFAULT_TEST_FUNCTIONS = (
    lambda x: 0.5 + np.cos(x),
    lambda x: np.sin(x) + np.cos(3 * x),
    lambda x: np.cos(2 * x) ** 2,
)


def audit_prop2(
    g: Union[Callable, np.ndarray],
    bc_kind: BCKind,
    t_sequence: Sequence[float],
    params: EquationParams,
    N: int = 64,
    test_functions: Optional[Sequence[Callable]] = DEFAULT_TEST_FUNCTIONS,
) -> AuditReport:
    """
    w^g(., t) -> 0 and w^g_t(., t) -> g as t -> 0, each under its
    envelope, with the boundary traces of the chosen condition. g that
    breaks the parity of a Dirichlet/Neumann extension is rejected.
    """
    t_seq = np.asarray(t_sequence, dtype=float)
    if t_seq.size == 0 or np.any(t_seq <= 0):
        raise ValueError("t_sequence must be non-empty and positive")
    report = AuditReport(name="prop2")
    g_field, grid, g_samples = _sample_field(g, bc_kind, N)
    bank = KernelBank(params, g_field.wavenumbers)
    g_norm = float(g_field.l2_norm())

    rate_errors = []
    for s in t_seq:
        w = green_convolve(g_field, s, params, order=0)
        w_t = green_convolve(g_field, s, params, order=1)
        w_samples = synthesize(w, grid)
        error = float(np.max(np.abs(synthesize(w_t, grid) - g_samples)))
        rate_errors.append(error)
        report.add_block(
            "initial_value",
            g_field.N,
            s,
            float(np.max(np.abs(w_samples))),
            math.sqrt(s * theta_envelope(params, float(s))) * g_norm,
        )
        report.add_block(
            "initial_rate",
            g_field.N,
            s,
            error,
            _rate_envelope(bank, g_field, s),
        )
        scale = 1.0 + float(np.max(np.abs(g_samples)))
        if g_field.basis is Basis.SINE:
            trace = np.abs(w_samples[[0, -1]])
            report.add_block(
                "dirichlet_trace", g_field.N, s, trace, TRACE_TOL * scale
            )
        elif g_field.basis is Basis.COSINE:
            slope = synthesize(spectral_derivative(w), grid)[[0, -1]]
            report.add_block(
                "neumann_trace",
                g_field.N,
                s,
                np.abs(slope),
                TRACE_TOL * scale * max(1, g_field.N),
            )

    order = np.argsort(-t_seq)
    for earlier, later in zip(order[:-1], order[1:]):
        report.add_block(
            "initial_rate_monotone",
            g_field.N,
            t_seq[later],
            rate_errors[later],
            rate_errors[earlier],
        )

    if bc_kind is BCKind.PERIODIC and test_functions:
        for phi in test_functions:
            for s in t_seq:
                pairing = delta_pairing(params, phi, float(s), N)
                report.add_block(
                    "delta_pairing",
                    g_field.N,
                    s,
                    pairing.error,
                    pairing.envelope,
                )
    return report


# ----------------------------------------------------------------------
# Independent ODE oracle
# ----------------------------------------------------------------------


def _kernel_ode(n: int, a: float, eps: float, t: float) -> Tuple[float, float]:
    k2 = float(n * n)

    def rhs(_, y):
        return [y[1], -(a + eps * k2) * y[1] - k2 * y[0]]

    sol = solve_ivp(
        rhs,
        (0.0, t),
        [0.0, 1.0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-15,
    )
    if not sol.success:
        raise RuntimeError(f"ODE oracle failed for n={n}: {sol.message}")
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def audit_kernel_ode(
    n_samples: int = 50,
    seed: int = 0,
    n_max: int = 20,
    eps_range: Tuple[float, float] = (0.1, 2.0),
    a_range: Tuple[float, float] = (0.0, 2.0),
    t_max: float = 10.0,
) -> AuditReport:
    """
    Closed-form H_n and H_n' against adaptive integration of the mode
    ODE at random (n, a, eps, t)
    """
    rng = np.random.default_rng(seed)
    report = AuditReport(name="kernel_ode")
    for _ in range(n_samples):
        n = int(rng.integers(-n_max, n_max + 1))
        a = float(rng.uniform(*a_range))
        eps = float(rng.uniform(*eps_range))
        t = float(rng.uniform(0.0, t_max))
        if t == 0.0:
            t = t_max
        bank = KernelBank(EquationParams(a, eps), np.array([float(n)]))
        H, dH, _ = bank.evaluate(t)
        y, dy = _kernel_ode(n, a, eps, t)
        report.add_block(
            "kernel_ode",
            n,
            t,
            abs(float(H[0]) - y),
            ODE_REL_TOL * abs(y) + ODE_ABS_TOL,
        )
        report.add_block(
            "kernel_ode_rate",
            n,
            t,
            abs(float(dH[0]) - dy),
            ODE_REL_TOL * abs(dy) + ODE_ABS_TOL,
        )
    return report
