"""
Unit tests for the config schema and run-file loading
Run with: python -m pytest tests/test_config.py -v
or simply: python tests/test_config.py
"""

import math
import os
import sys

import numpy as np

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
)

from greenwave.config import (  # noqa: E402
    ConfigError,
    RunConfig,
    build_profile,
    parse_config,
)
from greenwave.kernels import EquationParams  # noqa: E402
from greenwave.reduction import BCKind, Dirichlet, Periodic  # noqa: E402
from greenwave.schema import (  # noqa: E402
    DataType,
    Field,
    FieldConstraint,
    Section,
)

SOLVE_BASE = {
    "equation": {"a": 0.5, "eps": 1.0},
    "bc": {"kind": "periodic"},
    "initial": {"u0": "cos(x)"},
    "solver": {"T": 1.0, "dt": 0.1},
}


def with_sections(**sections):
    data = {name: dict(values) for name, values in SOLVE_BASE.items()}
    data.update(sections)
    return data


def test_field_conversion():
    """Test type conversion of single fields"""
    print("Testing Field conversion...")

    count = Field("count", DataType.INTEGER)
    assert count.convert_value(3.0) == 3
    assert count.convert_value(None) is None
    for bad, error in ((3.5, ValueError), (True, TypeError), ("3", TypeError)):
        try:
            count.convert_value(bad)
            assert False, f"Should have raised {error.__name__}"
        except error:
            pass

    ratio = Field("ratio", DataType.FLOAT)
    assert ratio.convert_value(2) == 2.0
    assert isinstance(ratio.convert_value(2), float)

    values = Field("values", DataType.FLOAT_LIST)
    assert values.convert_value([1, 2.5]) == [1.0, 2.5]
    modes = Field("modes", DataType.INTEGER_LIST)
    assert modes.convert_value([-3.0, 4]) == [-3, 4]

    signal = Field("u0", DataType.SIGNAL)
    assert signal.convert_value("sin(x)") == "sin(x)"
    assert signal.convert_value(2) == 2
    table = signal.convert_value(
        {"grid": [0, 1, 2, 3], "values": [0, 1, 0, 1]}
    )
    assert table["grid"] == [0.0, 1.0, 2.0, 3.0]
    try:
        signal.convert_value({"grid": [0, 1, 2], "values": [0, 1, 2]})
        assert False, "Should have raised ValueError"
    except ValueError as e:
        assert "at least 4" in str(e)

    try:
        Field("kind", DataType.FLOAT, choices=["a"])
        assert False, "Should have raised ValueError"
    except ValueError:
        pass

    print("✅ Field conversion test passed")


def test_field_validation():
    """Test constraints, choices and fixed lengths"""
    print("\nTesting Field validation...")

    step = Field(
        "dt",
        DataType.FLOAT,
        [FieldConstraint.REQUIRED, FieldConstraint.POSITIVE],
    )
    assert step.validate_value(0.1) == (True, None)
    is_valid, error = step.validate_value(None)
    assert not is_valid and "required" in error
    is_valid, error = step.validate_value(0.0)
    assert not is_valid and "positive" in error

    mu = Field("mu", DataType.FLOAT, [FieldConstraint.NON_NEGATIVE])
    assert mu.validate_value(0.0)[0]
    assert not mu.validate_value(-1.0)[0]

    kind = Field("kind", DataType.STRING, choices=["periodic", "neumann"])
    is_valid, error = kind.validate_value("robin")
    assert not is_valid and "periodic, neumann" in error

    window = Field("n_range", DataType.INTEGER_LIST, length=2)
    assert window.validate_value([-5, 5])[0]
    is_valid, error = window.validate_value([1, 2, 3])
    assert not is_valid and "2 entries" in error

    print("✅ Field validation test passed")


def test_section_validation():
    """Test unknown fields, defaults and duplicate names"""
    print("\nTesting Section...")

    section = Section(
        "solver",
        [
            Field("T", DataType.FLOAT, [FieldConstraint.REQUIRED]),
            Field("N", DataType.INTEGER, default=64),
        ],
    )
    is_valid, errors = section.validate({"T": 1.0, "steps": 5})
    assert not is_valid
    assert errors == ["solver.steps: unknown field"]
    is_valid, errors = section.validate({})
    assert errors == ["solver.T: Field 'T' is required"]
    assert section.convert({"T": 2}) == {"T": 2.0, "N": 64}
    assert section.validate([1, 2]) == (False, ["solver: expected an object"])

    try:
        Section(
            "dup", [Field("a", DataType.FLOAT), Field("a", DataType.FLOAT)]
        )
        assert False, "Should have raised ValueError"
    except ValueError:
        pass

    print("✅ Section test passed")


def test_parse_config():
    """Test JSON errors, unknown sections and error aggregation"""
    print("\nTesting parse_config...")

    text = '{\n  "solver": {\n    "T": 1,,\n  }\n}'
    try:
        parse_config(text)
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert e.line == 3
        assert "line 3" in str(e)

    try:
        parse_config("[1, 2]")
        assert False, "Should have raised ConfigError"
    except ConfigError:
        pass

    try:
        parse_config(
            '{"solvers": {}, "solver": {"T": -1, "dt": 0.1},'
            ' "source": {"mu": -2}}'
        )
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "solvers: unknown section" in e.errors
        assert "solver.T: Field 'T' must be positive" in e.errors
        assert "source.mu: Field 'mu' must be non-negative" in e.errors

    sections = parse_config('{"solver": {"T": 2, "dt": 0.5}}')
    assert sections["solver"]["N"] == 64
    assert sections["solver"]["lambda"] is None

    print("✅ parse_config test passed")


def test_run_config_solve():
    """Test problem assembly for the expression source"""
    print("\nTesting RunConfig solve mode...")

    config = RunConfig.from_dict(
        with_sections(source={"expression": "sin(u) + t", "mu": 1.0})
    )
    config.require("solve")
    p = config.build_problem()
    assert p.params == EquationParams(0.5, 1.0)
    assert p.bc == Periodic(0)
    assert p.mu == 1.0
    assert not p.state_free
    value = p.f(
        np.array([0.0]), 2.0, np.array([math.pi / 2]), np.zeros(1), np.zeros(1)
    )
    assert np.allclose(value, 3.0)
    assert np.allclose(p.u0_x(np.array([math.pi / 2])), -1.0)

    settings = config.solver_settings()
    assert settings["T"] == 1.0 and settings["N"] == 64
    assert settings["lambda_hint"] is None

    free = RunConfig.from_dict(with_sections(source={"expression": "x*t"}))
    p = free.build_problem()
    assert p.state_free and p.mu == 0.0

    try:
        RunConfig.from_dict(
            with_sections(source={"expression": "u^2"})
        ).build_problem()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "source.mu" in str(e)

    no_eq = with_sections()
    del no_eq["equation"]
    try:
        RunConfig.from_dict(no_eq).build_problem()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "equation.eps" in str(e)

    try:
        RunConfig.from_dict(
            with_sections(solver={"T": 1.0, "dt": 0.3})
        ).solver_settings()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "whole multiple" in str(e)

    try:
        RunConfig.from_dict({"audit": {}}).require("solve")
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert len(e.errors) == 3

    print("✅ RunConfig solve mode test passed")


def test_run_config_presets():
    """Test the Josephson and Voigt presets and boundary signals"""
    print("\nTesting RunConfig presets...")

    config = RunConfig.from_dict(
        with_sections(
            bc={"kind": "periodic", "m": 1},
            initial={"u0": "x"},
            source={"preset": "josephson", "b": 1.0, "gamma": 0.2},
        )
    )
    p = config.build_problem()
    assert p.bc == Periodic(1)
    assert p.mu == 1.0

    try:
        RunConfig.from_dict(
            with_sections(
                bc={"kind": "periodic", "m": 1},
                source={"preset": "josephson", "b": 1.0},
            )
        ).build_problem()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "initial.u0" in str(e)

    try:
        RunConfig.from_dict(
            with_sections(
                bc={"kind": "dirichlet"},
                initial={"u0": "sin(x)"},
                source={"preset": "josephson", "b": 1.0},
            )
        ).build_problem()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "bc.kind" in str(e)

    voigt = with_sections(
        bc={"kind": "dirichlet", "h0": "0", "hpi": "sin(t)"},
        initial={"u0": "sin(x)", "u1": "x / pi"},
        source={"preset": "voigt", "E": 4.0, "rho": 1.0, "muv": 2.0},
    )
    del voigt["equation"]
    p = RunConfig.from_dict(voigt).build_problem()
    assert p.params == EquationParams(0.0, 0.5, 2.0)
    assert p.state_free
    assert isinstance(p.bc, Dirichlet)
    value, rate, accel = p.bc.hpi(np.array([0.0, 1.0]))
    assert np.allclose(value, [0.0, math.sin(1.0)])
    assert np.allclose(rate, [1.0, math.cos(1.0)])
    assert np.allclose(accel, [0.0, -math.sin(1.0)])

    try:
        RunConfig.from_dict(
            with_sections(initial={"u0": "cos(y)"})
        ).build_problem()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "initial.u0" in str(e)

    print("✅ RunConfig presets test passed")


def test_profiles():
    """Test expression and table profiles"""
    print("\nTesting build_profile...")

    profile, slope = build_profile("x^2", "initial.u0")
    x = np.array([0.0, 1.5, 3.0])
    assert np.allclose(profile(x), x**2)
    assert np.allclose(slope(x), 2.0 * x)
    assert profile(x).shape == x.shape

    constant, flat = build_profile(2, "initial.u1")
    assert np.allclose(constant(x), 2.0)
    assert np.allclose(flat(x), 0.0)
    assert flat(x).shape == x.shape

    table = {"grid": [0.0, 1.0, 2.0, 3.0, 4.0], "values": [0, 1, 4, 9, 16]}
    spline, spline_x = build_profile(table, "initial.u0")
    assert abs(spline(2.5) - 6.25) < 1e-10
    assert abs(spline_x(2.5) - 5.0) < 1e-10

    try:
        build_profile(
            {"grid": [0.0, 2.0, 1.0, 3.0], "values": [0, 1, 2, 3]},
            "initial.u0",
        )
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "strictly increasing" in str(e)

    print("✅ build_profile test passed")


def test_audit_settings():
    """Test audit defaults and empty sweeps"""
    print("\nTesting audit settings...")

    settings = RunConfig.from_dict({"audit": {}}).audit_settings()
    assert len(settings["params"]) == 9
    assert settings["n_range"] == (-200, 200)
    assert len(settings["t_grid"]) == 200
    assert settings["theta_t"][0] == 0.0
    assert len(settings["theta_t"]) == 21
    assert settings["initial_bc"] is BCKind.PERIODIC

    for audit, message in (
        ({"a_values": []}, "audit.a_values: empty sweep"),
        ({"n_range": [5, 1]}, "audit.n_range: empty sweep"),
        ({"t_min": 2.0, "t_max": 1.0}, "audit.t_count: empty sweep"),
        ({"a_values": [-1.0]}, "audit.a_values: damping must be >= 0"),
    ):
        try:
            RunConfig.from_dict({"audit": audit}).audit_settings()
            assert False, "Should have raised ConfigError"
        except ConfigError as e:
            assert message in e.errors, e.errors

    try:
        RunConfig.from_dict({"solver": {"T": 1, "dt": 1}}).audit_settings()
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "audit: section required" in str(e)

    try:
        RunConfig.from_file("/nonexistent/run.json")
        assert False, "Should have raised ConfigError"
    except ConfigError as e:
        assert "Cannot read config" in str(e)

    print("✅ Audit settings test passed")


def run_all_tests():
    """Run all config tests"""
    print("=" * 60)
    print("Running Config Tests")
    print("=" * 60)

    test_field_conversion()
    test_field_validation()
    test_section_validation()
    test_parse_config()
    test_run_config_solve()
    test_run_config_presets()
    test_profiles()
    test_audit_settings()

    print("\n" + "=" * 60)
    print("✅ All config tests passed!")
    print("=" * 60)


if __name__ == "__main__":
    run_all_tests()
