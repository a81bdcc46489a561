"""
Greenwave Mode Kernels
Closed-form mode kernels H_n, the theta kernel and the analytic bound oracles
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

ZETA_2 = 1.6449340668482264  # pi^2 / 6
GAMMA_3_4 = 1.2254167024651776  # Gamma(3/4)

TOL_CRIT = 1e-9
SERIES_BAND = 1e-4
DEFAULT_THETA_TOL = 1e-4

# exp() overflows above this argument
_LOG_MAX = 709.0


class Regime(Enum):
    """Sign of omega_n^2 = h_n^2 - n^2"""

    OVERDAMPED = "overdamped"
    CRITICAL = "critical"
    OSCILLATORY = "oscillatory"


@dataclass(frozen=True)
class EquationParams:
    """Coefficients of u_tt + a u_t - c^2 (eps u_t + u)_xx"""

    a: float
    eps: float
    c: float = 1.0

    def __post_init__(self):
        for name in ("a", "eps", "c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Coefficient '{name}' must be finite")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")

    def is_canonical(self) -> bool:
        return self.a >= 0 and self.c == 1.0

    def half_damping(self, k_sq: ArrayLike) -> ArrayLike:
        """h = (a + eps k^2) / 2"""
        return 0.5 * (self.a + self.eps * k_sq)

    def to_dict(self) -> Dict[str, float]:
        return {"a": self.a, "eps": self.eps, "c": self.c}


@dataclass(frozen=True)
class ModeKernel:
    """Per-mode record evaluating H_n and its time derivatives"""

    n: int
    h: float
    omega_sq: float
    regime: Regime
    params: EquationParams

    @property
    def k_sq(self) -> float:
        return float(self.n * self.n)


@dataclass(frozen=True)
class BoundEnvelope:
    """Constants n_bar, M and kappa of the theta kernel estimates"""

    n_bar: int
    M: float
    kappa: float

    @classmethod
    def from_params(cls, params: EquationParams) -> "BoundEnvelope":
        eps = params.eps
        n_bar = 1 + int(math.floor(2.0 / eps))
        M = 2.0 + 2.0 * math.log(n_bar) + 4.0 * ZETA_2 / eps
        kappa = 3.0 + 4.0 / eps + 4.0 * ZETA_2 / (3.0 * eps * eps)
        return cls(n_bar=n_bar, M=M, kappa=kappa)

    def envelope(self, params: EquationParams, t: float) -> float:
        """N(t) = M + 1/a for a > 0, M + t for a = 0"""
        if params.a > 0:
            return self.M + 1.0 / params.a
        return self.M + t


def theta_envelope(params: EquationParams, t: float) -> float:
    """N(t) bounding sum_n |H_n(t)|"""
    return BoundEnvelope.from_params(params).envelope(params, t)


def _omega_sq(h: ArrayLike, k_abs: ArrayLike) -> ArrayLike:
    # factored form keeps omega_sq accurate near the critical line
    return (h - k_abs) * (h + k_abs)


def classify(h: float, omega_sq: float) -> Regime:
    if abs(omega_sq) <= TOL_CRIT * max(1.0, h * h):
        return Regime.CRITICAL
    if omega_sq > 0:
        return Regime.OVERDAMPED
    return Regime.OSCILLATORY


def _check_canonical_damping(params: EquationParams):
    if params.a < 0:
        raise ValueError(
            f"Mode kernels need a >= 0, got a={params.a}; "
            "reduce the problem with normalize_damping first"
        )


def make_mode_kernel(params: EquationParams, n: int) -> ModeKernel:
    """Build the kernel record of mode n"""
    _check_canonical_damping(params)
    n = int(n)
    k_sq = float(n * n)
    h = params.half_damping(k_sq)
    omega_sq = _omega_sq(h, float(abs(n)))
    return ModeKernel(
        n=n,
        h=h,
        omega_sq=omega_sq,
        regime=classify(h, omega_sq),
        params=params,
    )


def _check_times(t: np.ndarray):
    if np.any(t < 0) or np.any(~np.isfinite(t)):
        raise ValueError("Kernel times must be finite and non-negative")


def _triplet(
    a: float,
    eps: float,
    h: np.ndarray,
    w2: np.ndarray,
    k2: np.ndarray,
    t: np.ndarray,
    dissipative: bool = False,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluate (H, H', H'') on broadcast arrays, or with dissipative=True
    the pair (eps H' + H, eps H'' + H') and a dummy third entry.

    Three evaluation paths:
      series band  |omega^2| t^2 <= SERIES_BAND (covers the critical line)
      overdamped   exponents (omega - h) t and -(omega + h) t, both <= 0
      oscillatory  exp(-h t) times sin / cos of theta t
    """
    h, w2, k2, t = np.broadcast_arrays(
        np.asarray(h, dtype=float),
        np.asarray(w2, dtype=float),
        np.asarray(k2, dtype=float),
        np.asarray(t, dtype=float),
    )
    shape = h.shape
    h, w2, k2, t = (arr.ravel() for arr in (h, w2, k2, t))
    H = np.empty(h.size)
    dH = np.empty(h.size)
    ddH = np.empty(h.size)

    z = w2 * t * t
    band = np.abs(z) <= SERIES_BAND
    over = ~band & (w2 > 0)
    osc = ~band & (w2 < 0)

    if band.any():
        hb, tb, zb, wb = h[band], t[band], z[band], w2[band]
        S = tb * (1.0 + zb / 6.0 + zb * zb / 120.0)
        C = 1.0 + zb / 2.0 + zb * zb / 24.0 + zb * zb * zb / 720.0
        eh = np.exp(-hb * tb)
        H[band] = eh * S
        dH[band] = eh * (C - hb * S)
        ddH[band] = eh * ((wb + hb * hb) * S - 2.0 * hb * C)

    if over.any():
        ho, to, ko = h[over], t[over], k2[over]
        w = np.sqrt(w2[over])
        wph = w + ho
        wmh = -ko / wph
        E1 = np.exp(wmh * to)
        E2 = np.exp(-wph * to)
        two_w = 2.0 * w
        if dissipative:
            f1 = (a - ko / wph) / wph  # 1 + eps (omega - h)
            f2 = eps * wph - 1.0
            H[over] = (f1 * E1 + f2 * E2) / two_w
            dH[over] = (f1 * wmh * E1 - f2 * wph * E2) / two_w
        else:
            H[over] = -E1 * np.expm1(-two_w * to) / two_w
            dH[over] = (wmh * E1 + wph * E2) / two_w
            ddH[over] = (wmh * wmh * E1 - wph * wph * E2) / two_w

    if osc.any():
        hs, ts = h[osc], t[osc]
        th = np.sqrt(-w2[osc])
        s = np.sin(th * ts)
        co = np.cos(th * ts)
        eh = np.exp(-hs * ts)
        H[osc] = eh * s / th
        dH[osc] = eh * (co - hs * s / th)
        ddH[osc] = eh * ((hs * hs - th * th) * s / th - 2.0 * hs * co)

    if dissipative:
        rest = ~over
        eps_dH = eps * dH[rest] + H[rest]
        eps_ddH = eps * ddH[rest] + dH[rest]
        H[rest] = eps_dH
        dH[rest] = eps_ddH
        ddH[:] = np.nan
    return H.reshape(shape), dH.reshape(shape), ddH.reshape(shape)


def kernel_triplet(
    h: ArrayLike, omega_sq: ArrayLike, t: ArrayLike
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(H, H', H'') for explicit half-damping and omega^2 values"""
    t = np.asarray(t, dtype=float)
    _check_times(t)
    h = np.asarray(h, dtype=float)
    k2 = h * h - np.asarray(omega_sq, dtype=float)
    return _triplet(0.0, 1.0, h, omega_sq, k2, t)


def eval_H(k: ModeKernel, t: ArrayLike, order: int = 0) -> ArrayLike:
    """d^order H_n / dt^order at time(s) t"""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    t_arr = np.asarray(t, dtype=float)
    _check_times(t_arr)
    values = _triplet(
        k.params.a, k.params.eps, k.h, k.omega_sq, k.k_sq, t_arr
    )[order]
    return float(values) if values.ndim == 0 else values


def eval_dissipative(
    k: ModeKernel, t: ArrayLike, order: int = 0
) -> ArrayLike:
    """eps H' + H (order 0) or eps H'' + H' (order 1), cancellation free"""
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    t_arr = np.asarray(t, dtype=float)
    _check_times(t_arr)
    values = _triplet(
        k.params.a,
        k.params.eps,
        k.h,
        k.omega_sq,
        k.k_sq,
        t_arr,
        dissipative=True,
    )[order]
    return float(values) if values.ndim == 0 else values


class KernelBank:
    """
    Mode kernels for a whole vector of wavenumbers.

    Wavenumbers may be non-integer (k = s n on a rescaled domain).
    Evaluation at a time array returns arrays of shape t.shape + k.shape.
    """

    def __init__(self, params: EquationParams, wavenumbers: np.ndarray):
        _check_canonical_damping(params)
        self.params = params
        self.k = np.asarray(wavenumbers, dtype=float)
        self.k_sq = self.k * self.k
        self.h = params.half_damping(self.k_sq)
        self.omega_sq = _omega_sq(self.h, np.abs(self.k))

    def __len__(self):
        return self.k.size

    def regimes(self) -> list:
        return [
            classify(float(h), float(w))
            for h, w in zip(self.h.ravel(), self.omega_sq.ravel())
        ]

    def _at(self, t: ArrayLike) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        _check_times(t_arr)
        return t_arr[..., None] if self.k.ndim else t_arr

    def evaluate(
        self, t: ArrayLike
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(H, H', H'') for every (t, k) pair"""
        p = self.params
        return _triplet(
            p.a, p.eps, self.h, self.omega_sq, self.k_sq, self._at(t)
        )

    def dissipative(self, t: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """(eps H' + H, eps H'' + H') for every (t, k) pair"""
        p = self.params
        values = _triplet(
            p.a,
            p.eps,
            self.h,
            self.omega_sq,
            self.k_sq,
            self._at(t),
            dissipative=True,
        )
        return values[0], values[1]

    def imag_omega(self) -> np.ndarray:
        """|Im omega_n|, zero outside the oscillatory regime"""
        return np.sqrt(np.clip(-self.omega_sq, 0.0, None))


def truncation_floor(
    params: EquationParams, tol: float = DEFAULT_THETA_TOL
) -> int:
    """Smallest N >= n_bar whose tail bound 4 / (eps N) is below tol"""
    if tol <= 0:
        raise ValueError("tol must be positive")
    n_bar = BoundEnvelope.from_params(params).n_bar
    return max(n_bar, int(math.ceil(4.0 / (params.eps * tol))))


def theta_kernel(
    params: EquationParams,
    x: ArrayLike,
    t: float,
    n_max: int,
    tol: float = DEFAULT_THETA_TOL,
) -> ArrayLike:
    """Theta kernel (1/2pi)[H_0 + 2 sum_{n=1}^{n_max} H_n cos(n x)]"""
    if t < 0:
        raise ValueError("t must be non-negative")
    x_arr = np.asarray(x, dtype=float)
    if t == 0:
        zero = np.zeros_like(x_arr)
        return float(zero) if zero.ndim == 0 else zero

    floor = truncation_floor(params, tol)
    if n_max < floor:
        raise ValueError(
            f"n_max={n_max} is below the truncation floor {floor} "
            f"for tol={tol}"
        )
    bank = KernelBank(params, np.arange(n_max + 1))
    H = bank.evaluate(t)[0]
    # cos(n x) for each n against each x
    phases = np.cos(np.multiply.outer(x_arr, bank.k))
    total = H[0] + 2.0 * (phases[..., 1:] @ H[1:])
    value = total / (2.0 * math.pi)
    return float(value) if np.ndim(value) == 0 else value


def _theta3_direct(eta: float) -> float:
    # eta >= 1: terms beyond n = 6 are below 1e-40
    n = np.arange(1, 7, dtype=float)
    return float(1.0 + 2.0 * np.sum(np.exp(-math.pi * n * n * eta)))


def _theta3_prime_direct(eta: float) -> float:
    n = np.arange(1, 7, dtype=float)
    n_sq = n * n
    return float(-2.0 * math.pi * np.sum(n_sq * np.exp(-math.pi * n_sq * eta)))


def jacobi_theta3(eta: float) -> float:
    """theta_3(eta) = sum over integers n of exp(-pi n^2 eta)"""
    if eta <= 0 or not math.isfinite(eta):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    if eta >= 1.0:
        return _theta3_direct(eta)
    # modular identity theta3(eta) = eta^(-1/2) theta3(1/eta)
    return _theta3_direct(1.0 / eta) / math.sqrt(eta)


def jacobi_theta3_prime(eta: float) -> float:
    """Derivative of jacobi_theta3 with respect to eta"""
    if eta <= 0 or not math.isfinite(eta):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    if eta >= 1.0:
        return _theta3_prime_direct(eta)
    inv = 1.0 / eta
    return (
        -0.5 * eta**-1.5 * _theta3_direct(inv)
        - eta**-2.5 * _theta3_prime_direct(inv)
    )


def _log_abs_theta3_prime(eta: float) -> float:
    if eta >= 1.0:
        n = np.arange(1, 7, dtype=float)
        n_sq = n * n
        series = np.sum(n_sq * np.exp(-math.pi * (n_sq - 1.0) * eta))
        return -math.pi * eta + math.log(2.0 * math.pi * series)
    return math.log(-jacobi_theta3_prime(eta))


def _exp_or_inf(x: float) -> float:
    return math.inf if x > _LOG_MAX else math.exp(x)


def theta_x_bound(params: EquationParams) -> float:
    """Bound on 4 pi^2 ||theta_x||^2, uniform in t"""
    eps = params.eps
    return 2.0 + 4.0 / eps + 8.0 * ZETA_2 / (eps * eps)


def l2_norm_bounds(
    params: EquationParams, t: float
) -> Tuple[float, float, float]:
    """
    Bounds on 4 pi^2 times the squared L2 norms of theta_x, theta_t and
    theta_tx at time t > 0. Exponential factors are combined in log
    space; a bound that exceeds double range is returned as inf.
    """
    if t <= 0:
        raise ValueError("The time-derivative bounds need t > 0")
    eps = params.eps
    env = BoundEnvelope.from_params(params)
    eta = 2.0 * eps * t / math.pi
    growth = 4.0 * t / eps

    bound_x = theta_x_bound(params)
    bound_t = env.kappa + 8.0 * _exp_or_inf(
        growth + math.log(jacobi_theta3(eta))
    )
    base = (2.0 / eps + 1.0) ** 4
    bound_tx = (
        base * (base + 1.0)
        + 12.0 / (eps * eps)
        + (16.0 / math.pi) * _exp_or_inf(growth + _log_abs_theta3_prime(eta))
    )
    return bound_x, bound_t, bound_tx


@dataclass
class BoundOracles:
    """
    Right-hand sides of the mode kernel inequalities at one (n, t).
    None marks a bound that does not apply to this mode.
    """

    n: int
    t: float
    derivative: Tuple[Optional[float], Optional[float], Optional[float]]
    dissipative: Optional[float]
    dissipative_rate: Optional[float]
    decay: Optional[float]
    short_time: float
    unit_velocity: float
    delta_rate: float


def lemma_bound_arrays(
    params: EquationParams, n: np.ndarray, t: np.ndarray
) -> Dict[str, np.ndarray]:
    """
    Vectorised bound right-hand sides over broadcast (n, t) arrays.
    Entries are NaN where a bound does not apply.
    """
    _check_canonical_damping(params)
    a, eps = params.a, params.eps
    n, t = np.broadcast_arrays(
        np.asarray(n, dtype=float), np.asarray(t, dtype=float)
    )
    n_abs = np.abs(n)
    k2 = n * n
    h = params.half_damping(k2)
    w2 = _omega_sq(h, n_abs)
    n_bar = BoundEnvelope.from_params(params).n_bar
    high = n_abs >= n_bar

    nan = np.full(n.shape, np.nan)
    bounds = {
        "derivative_0": nan.copy(),
        "derivative_1": nan.copy(),
        "derivative_2": nan.copy(),
        "dissipative": nan.copy(),
        "dissipative_rate": nan.copy(),
    }
    if high.any():
        w = np.sqrt(w2[high])
        kh = k2[high]
        decay = np.exp(-t[high] * (eps * kh - 2.0 / eps))
        rate = a + eps * kh
        inv = 1.0 / (2.0 * w)
        for order in range(3):
            bounds[f"derivative_{order}"][high] = inv * (
                (2.0 / eps) ** order + rate**order * decay
            )
        mixed = kh * (a * eps + eps * eps * kh + 1.0)
        bounds["dissipative"][high] = inv * (
            (a * eps + 4.0) / (eps * eps) + mixed * decay
        )
        bounds["dissipative_rate"][high] = inv * (
            (8.0 + 2.0 * a * eps) / eps**3 + mixed * rate * decay
        )

    decay_bound = nan.copy()
    low = (n_abs > 0) & ~high
    decay_bound[low] = 1.0 / n_abs[low]
    decay_bound[high] = 2.0 / (eps * k2[high])
    bounds["decay"] = decay_bound
    bounds["short_time"] = t.copy()
    bounds["unit_velocity"] = np.ones(n.shape)
    imag_w = np.sqrt(np.clip(-w2, 0.0, None))
    bounds["delta_rate"] = (2.0 * h + imag_w) * t
    return bounds


def bound_oracles(params: EquationParams, n: int, t: float) -> BoundOracles:
    """Bound values for mode n at time t"""
    if t < 0:
        raise ValueError("t must be non-negative")
    arrays = lemma_bound_arrays(params, np.array(n), np.array(t))

    def pick(key: str) -> Optional[float]:
        value = float(arrays[key])
        return None if math.isnan(value) else value

    return BoundOracles(
        n=int(n),
        t=float(t),
        derivative=(
            pick("derivative_0"),
            pick("derivative_1"),
            pick("derivative_2"),
        ),
        dissipative=pick("dissipative"),
        dissipative_rate=pick("dissipative_rate"),
        decay=pick("decay"),
        short_time=float(t),
        unit_velocity=1.0,
        delta_rate=float(arrays["delta_rate"]),
    )
