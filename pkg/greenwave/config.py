"""
Greenwave Run Configuration
JSON run files validated section by section, plus environment defaults
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv
from scipy.interpolate import CubicSpline

from .expressions import ExpressionError, parse_expression
from .kernels import EquationParams
from .physics import (
    JosephsonConfig,
    VoigtConfig,
    josephson_problem,
    voigt_problem,
)
from .reduction import (
    BCKind,
    BoundarySpec,
    Dirichlet,
    Neumann,
    Periodic,
    ProblemSpec,
    TimeSignal,
)
from .schema import DataType, Field, FieldConstraint, Section

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = os.getenv("GREENWAVE_OUTPUT_DIR", "output")
DEFAULT_THREADS = int(os.getenv("GREENWAVE_THREADS", "1"))

REQUIRED = [FieldConstraint.REQUIRED]
POSITIVE = [FieldConstraint.POSITIVE]
REQUIRED_POSITIVE = [FieldConstraint.REQUIRED, FieldConstraint.POSITIVE]


class ConfigError(ValueError):
    """Invalid run configuration; errors name section.field"""

    def __init__(
        self,
        errors: Union[str, List[str]],
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line else ""
        super().__init__("; ".join(self.errors) + where)


SECTIONS: Dict[str, Section] = {
    "equation": Section(
        "equation",
        [
            Field("a", DataType.FLOAT, default=0.0),
            Field("eps", DataType.FLOAT, POSITIVE),
            Field("c", DataType.FLOAT, POSITIVE, default=1.0),
        ],
    ),
    "bc": Section(
        "bc",
        [
            Field(
                "kind",
                DataType.STRING,
                REQUIRED,
                choices=[kind.value for kind in BCKind],
            ),
            Field("m", DataType.INTEGER, default=0),
            Field("h0", DataType.SIGNAL, default="0"),
            Field("hpi", DataType.SIGNAL, default="0"),
            Field("k0", DataType.SIGNAL, default="0"),
            Field("kpi", DataType.SIGNAL, default="0"),
        ],
    ),
    "initial": Section(
        "initial",
        [
            Field("u0", DataType.SIGNAL, REQUIRED),
            Field("u1", DataType.SIGNAL, default="0"),
        ],
    ),
    "source": Section(
        "source",
        [
            Field(
                "preset",
                DataType.STRING,
                default="expression",
                choices=["expression", "josephson", "voigt"],
            ),
            Field("expression", DataType.SIGNAL, default="0"),
            Field("mu", DataType.FLOAT, [FieldConstraint.NON_NEGATIVE]),
            Field("b", DataType.FLOAT, default=0.0),
            Field("gamma", DataType.FLOAT, default=0.0),
            Field(
                "variant",
                DataType.STRING,
                default="basic",
                choices=["basic", "extended"],
            ),
            Field("E", DataType.FLOAT, POSITIVE, default=1.0),
            Field("rho", DataType.FLOAT, POSITIVE, default=1.0),
            Field("muv", DataType.FLOAT, POSITIVE, default=1.0),
        ],
    ),
    "solver": Section(
        "solver",
        [
            Field("T", DataType.FLOAT, REQUIRED_POSITIVE),
            Field("dt", DataType.FLOAT, REQUIRED_POSITIVE),
            Field("N", DataType.INTEGER, POSITIVE, default=64),
            Field("stop_tol", DataType.FLOAT, POSITIVE, default=1e-10),
            Field("k_max", DataType.INTEGER, POSITIVE, default=200),
            Field("lambda", DataType.FLOAT, POSITIVE),
        ],
    ),
    "output": Section(
        "output",
        [
            Field("dir", DataType.STRING, default=None),
            Field(
                "snapshot_stride", DataType.INTEGER, POSITIVE, default=1
            ),
        ],
    ),
    "audit": Section(
        "audit",
        [
            Field("a_values", DataType.FLOAT_LIST, default=[0.0, 0.5, 2.0]),
            Field(
                "eps_values",
                DataType.FLOAT_LIST,
                POSITIVE,
                default=[0.1, 1.0, 5.0],
            ),
            Field(
                "n_range", DataType.INTEGER_LIST, default=[-200, 200], length=2
            ),
            Field("t_min", DataType.FLOAT, POSITIVE, default=1e-6),
            Field("t_max", DataType.FLOAT, POSITIVE, default=50.0),
            Field("t_count", DataType.INTEGER, default=200),
            Field("theta_t_count", DataType.INTEGER, default=20),
            Field("theta_N", DataType.INTEGER, POSITIVE, default=200),
            Field(
                "initial_g", DataType.SIGNAL, default="cos(x) + 0.3*sin(2*x)"
            ),
            Field(
                "initial_bc",
                DataType.STRING,
                default="periodic",
                choices=[kind.value for kind in BCKind],
            ),
            Field(
                "initial_t",
                DataType.FLOAT_LIST,
                POSITIVE,
                default=[1e-2, 1e-3, 1e-4],
            ),
            Field("initial_N", DataType.INTEGER, POSITIVE, default=64),
            Field("ode_samples", DataType.INTEGER, default=50),
            Field("kernel_scale", DataType.FLOAT, POSITIVE, default=1.0),
        ],
    ),
}


MODE_SECTIONS = {
    "solve": ("bc", "initial", "solver"),
    "audit": ("audit",),
}


def parse_config(text: str) -> Dict[str, Dict[str, Any]]:
    """Validate a JSON document and return converted sections"""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON: {e.msg}", e.lineno, e.colno)
    if not isinstance(raw, dict):
        raise ConfigError("Config must be a JSON object of sections")

    errors = [
        f"{name}: unknown section" for name in raw if name not in SECTIONS
    ]
    sections = {}
    for name, section in SECTIONS.items():
        if name not in raw:
            continue
        is_valid, problems = section.validate(raw[name])
        if is_valid:
            sections[name] = section.convert(raw[name])
        errors.extend(problems)
    if errors:
        raise ConfigError(errors)
    return sections


@dataclass
class RunConfig:
    """A validated run file"""

    sections: Dict[str, Dict[str, Any]]
    path: Optional[Path] = None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e.strerror}")
        return cls(parse_config(text), path)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        return cls(parse_config(json.dumps(data)))

    def section(self, name: str) -> Dict[str, Any]:
        if name in self.sections:
            return self.sections[name]
        return SECTIONS[name].convert({})

    def require(self, mode: str):
        missing = [
            name for name in MODE_SECTIONS[mode] if name not in self.sections
        ]
        if missing:
            raise ConfigError(
                [
                    f"{name}: section required for --mode {mode}"
                    for name in missing
                ]
            )

    # ------------------------------------------------------------------
    # solve mode
    # ------------------------------------------------------------------

    def output_dir(self) -> Path:
        return Path(self.section("output")["dir"] or DEFAULT_OUTPUT_DIR)

    def solver_settings(self) -> Dict[str, Any]:
        s = self.section("solver")
        steps = s["T"] / s["dt"]
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("solver.dt: T must be a whole multiple of dt")
        return {
            "T": s["T"],
            "dt": s["dt"],
            "N": s["N"],
            "stop_tol": s["stop_tol"],
            "k_max": s["k_max"],
            "lambda_hint": s["lambda"],
        }

    def build_problem(self) -> ProblemSpec:
        self.require("solve")
        try:
            return self._build_problem()
        except ExpressionError as e:
            raise ConfigError(str(e))

    def _build_problem(self) -> ProblemSpec:
        src = self.section("source")
        initial = self.section("initial")
        u0, u0_x = build_profile(initial["u0"], "initial.u0")
        u1, u1_x = build_profile(initial["u1"], "initial.u1")
        bc = build_boundary(self.section("bc"))
        preset = src["preset"]

        if preset == "voigt":
            force = parse_expression(src["expression"], allowed=("x", "t"))
            cfg = VoigtConfig(
                src["E"],
                src["rho"],
                src["muv"],
                force=lambda x, t: force.evaluate(x=x, t=t),
            )
            return voigt_problem(cfg, u0, u1, bc, u0_x, u1_x)

        eq = self.section("equation")
        if "equation" not in self.sections or eq["eps"] is None:
            raise ConfigError("equation.eps: Field 'eps' is required")

        if preset == "josephson":
            strip = isinstance(bc, Neumann) and bc.is_homogeneous()
            if not (isinstance(bc, Periodic) or strip):
                raise ConfigError(
                    "bc.kind: josephson runs on a ring (periodic) or an "
                    "open strip (homogeneous neumann)"
                )
            ring = isinstance(bc, Periodic)
            try:
                cfg = JosephsonConfig(
                    b=src["b"],
                    gamma=src["gamma"],
                    a=eq["a"],
                    eps=eq["eps"],
                    c=eq["c"],
                    variant=src["variant"],
                    ring=ring,
                    m=bc.m if ring else 0,
                )
                return josephson_problem(cfg, u0, u1, u0_x, u1_x)
            except ValueError as e:
                raise ConfigError(f"initial.u0: {e}")

        f_expr = parse_expression(src["expression"])
        state_free = not f_expr.depends_on("u", "ux", "ut")
        mu = src["mu"]
        if mu is None:
            if not state_free:
                raise ConfigError(
                    "source.mu: a Lipschitz constant is required for "
                    "sources depending on u, ux or ut"
                )
            mu = 0.0

        def f(x, t, u, u_x, u_t):
            shape = np.broadcast(x, t, u).shape
            value = f_expr.evaluate(x=x, t=t, u=u, ux=u_x, ut=u_t)
            return np.broadcast_to(value, shape) + 0.0

        return ProblemSpec(
            params=EquationParams(eq["a"], eq["eps"], eq["c"]),
            bc=bc,
            u0=u0,
            u1=u1,
            f=f,
            mu=mu,
            u0_x=u0_x,
            u1_x=u1_x,
            state_free=state_free,
            label="expression",
        )

    # ------------------------------------------------------------------
    # audit mode
    # ------------------------------------------------------------------

    def audit_settings(self) -> Dict[str, Any]:
        self.require("audit")
        s = self.section("audit")
        n_lo, n_hi = s["n_range"]
        empty = []
        if not s["a_values"]:
            empty.append("audit.a_values: empty sweep")
        if not s["eps_values"]:
            empty.append("audit.eps_values: empty sweep")
        if n_lo > n_hi:
            empty.append("audit.n_range: empty sweep")
        if s["t_count"] < 1 or s["t_min"] > s["t_max"]:
            empty.append("audit.t_count: empty sweep")
        if empty:
            raise ConfigError(empty)
        if any(a < 0 for a in s["a_values"]):
            raise ConfigError("audit.a_values: damping must be >= 0")

        t_grid = np.logspace(
            np.log10(s["t_min"]), np.log10(s["t_max"]), s["t_count"]
        )
        theta_count = min(s["theta_t_count"], s["t_count"])
        theta_idx = np.unique(
            np.linspace(0, s["t_count"] - 1, max(theta_count, 1)).astype(int)
        )
        try:
            g, _ = build_profile(s["initial_g"], "audit.initial_g")
        except ExpressionError as e:
            raise ConfigError(str(e))
        return {
            "params": [
                EquationParams(a, eps)
                for a in s["a_values"]
                for eps in s["eps_values"]
            ],
            "n_range": (n_lo, n_hi),
            "t_grid": t_grid,
            "theta_t": np.concatenate([[0.0], t_grid[theta_idx]]),
            "theta_N": s["theta_N"],
            "initial_g": g,
            "initial_bc": BCKind(s["initial_bc"]),
            "initial_t": s["initial_t"],
            "initial_N": s["initial_N"],
            "ode_samples": s["ode_samples"],
            "kernel_scale": s["kernel_scale"],
        }


def build_profile(
    value: Any, where: str
) -> Tuple[Callable, Optional[Callable]]:
    """Callable of x and its derivative from an expression or a table"""
    if isinstance(value, dict):
        grid = np.asarray(value["grid"])
        if np.any(np.diff(grid) <= 0):
            raise ConfigError(f"{where}: grid must be strictly increasing")
        spline = CubicSpline(grid, np.asarray(value["values"]))
        slope = spline.derivative()
        return spline, slope

    try:
        expr = parse_expression(value, allowed=("x",))
    except ExpressionError as e:
        raise ConfigError(f"{where}: {e}")
    slope = expr.derivative("x")

    def profile(x):
        return np.broadcast_to(expr.evaluate(x=x), np.shape(x)) + 0.0

    def profile_x(x):
        return np.broadcast_to(slope.evaluate(x=x), np.shape(x)) + 0.0

    return profile, profile_x


def build_signal(value: Any, where: str) -> TimeSignal:
    try:
        if isinstance(value, dict):
            return TimeSignal.from_samples(value["grid"], value["values"])
        return TimeSignal.from_expression(value)
    except (ExpressionError, ValueError) as e:
        raise ConfigError(f"{where}: {e}")


def build_boundary(bc: Dict[str, Any]) -> BoundarySpec:
    kind = BCKind(bc["kind"])
    if kind is BCKind.PERIODIC:
        return Periodic(bc["m"])
    if kind is BCKind.DIRICHLET:
        return Dirichlet(
            build_signal(bc["h0"], "bc.h0"), build_signal(bc["hpi"], "bc.hpi")
        )
    return Neumann(
        build_signal(bc["k0"], "bc.k0"), build_signal(bc["kpi"], "bc.kpi")
    )
