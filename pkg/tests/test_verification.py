"""
Unit tests for the kernel, theta and initial-layer audits
Run with: python -m pytest tests/test_verification.py -v
or simply: python tests/test_verification.py
"""

import csv
import os
import sys
import tempfile

import numpy as np

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
)

from greenwave.kernels import EquationParams  # noqa: E402
from greenwave.reduction import BCKind, ParityViolation  # noqa: E402
from greenwave.verification import (  # noqa: E402
    CSV_HEADER,
    SUMMARY_HEADER,
    AuditReport,
    audit_kernel_ode,
    audit_lemma,
    audit_prop1,
    audit_prop2,
    delta_pairing,
    passes,
    slack,
)

PARAMS = EquationParams(0.5, 1.0)
T_GRID = np.concatenate([[0.0], np.geomspace(1e-3, 10.0, 25)])


def test_report_bookkeeping():
    """Test pass/fail accounting, advisory entries and merging"""
    print("Testing AuditReport...")

    assert passes(np.array(1.0), np.array(1.0))
    assert not passes(np.array(1.1), np.array(1.0))
    assert slack(np.array(0.5), np.array(1.0)) == 0.5
    assert slack(np.array(0.0), np.array(np.inf)) == 1.0

    report = AuditReport()
    report.add_block("required", [1, 2, 3], 0.5, [0.1, 2.0, 0.3], 1.0)
    report.add_block("soft", None, 0.5, 2.0, 1.0, advisory=True)
    report.add_block("skipped", 4, 0.5, 1.0, np.nan)
    assert report.checked == 4
    assert not report.passed
    rows = report.failure_rows()
    assert rows == [("required", 2, 0.5, 2.0, 1.0, -1.0)]

    other = AuditReport()
    other.add_block("required", 5, 1.0, 0.0, 1.0)
    report.merge(other)
    assert report.summary["required"].checked == 4
    assert report.summary["required"].failed == 1
    assert report.summary["skipped"].checked == 0

    clean = AuditReport()
    clean.add_block("soft", None, 0.5, 2.0, 1.0, advisory=True)
    assert clean.passed
    assert clean.failure_rows() == []

    print("✅ AuditReport test passed")


def test_lemma_audit():
    """The kernel inequalities hold; corrupted kernels are caught"""
    print("\nTesting kernel bound audit...")

    for params in (PARAMS, EquationParams(0.0, 0.3), EquationParams(2.0, 2.0)):
        report = audit_lemma(params, (-30, 30), T_GRID)
        assert report.passed, report.failure_rows()[:5]
        assert report.summary["unit_velocity"].checked == 61 * len(T_GRID)
        # the high-mode bounds apply only from n_bar on
        assert 0 < report.summary["dissipative"].checked
        assert report.summary["dissipative"].checked < 61 * len(T_GRID)

    corrupted = audit_lemma(PARAMS, (-30, 30), T_GRID, kernel_scale=1.5)
    assert not corrupted.passed
    failed = {row[0] for row in corrupted.failure_rows()}
    assert "unit_velocity" in failed

    try:
        audit_lemma(PARAMS, (5, 4), T_GRID)
        assert False, "Should have raised ValueError"
    except ValueError:
        pass
    try:
        audit_lemma(PARAMS, (0, 4), [-1.0])
        assert False, "Should have raised ValueError"
    except ValueError:
        pass

    print("✅ Kernel bound audit test passed")


def test_lemma_audit_threads():
    """Splitting the mode sweep across workers changes nothing"""
    print("\nTesting kernel bound audit with workers...")

    single = audit_lemma(PARAMS, (-30, 30), T_GRID, threads=1)
    pooled = audit_lemma(PARAMS, (-30, 30), T_GRID, threads=3)
    assert single.summary_rows() == pooled.summary_rows()

    print("✅ Kernel bound audit workers test passed")


def test_theta_audit():
    """Theta kernel bounds on a truncated mode range"""
    print("\nTesting theta audit...")

    for params in (PARAMS, EquationParams(0.0, 0.5)):
        report = audit_prop1(params, [0.0, 0.01, 0.1, 1.0, 5.0], N=64)
        assert report.passed, report.failure_rows()[:5]
        assert report.summary["theta_initial"].checked == 64
        assert report.summary["theta_origin"].advisory
        for key in ("theta_x_l2", "theta_t_l2", "theta_tx_l2"):
            assert report.summary[key].checked == 4

    try:
        audit_prop1(PARAMS, [], N=8)
        assert False, "Should have raised ValueError"
    except ValueError:
        pass

    print("✅ Theta audit test passed")


def test_initial_layer_periodic():
    """w -> 0 and w_t -> g at the rate of the envelope"""
    print("\nTesting initial-layer audit (periodic)...")

    def g(x):
        return np.cos(x) + 0.5 * np.sin(2 * x)

    t_seq = [1e-1, 1e-2, 1e-3, 1e-4]
    report = audit_prop2(g, BCKind.PERIODIC, t_seq, PARAMS, N=32)
    assert report.passed, report.failure_rows()[:5]
    assert report.summary["initial_rate_monotone"].checked == 3
    assert report.summary["delta_pairing"].checked == 3 * len(t_seq)

    coarse = delta_pairing(PARAMS, lambda x: 0.5 + np.cos(x), 1e-3)
    fine = delta_pairing(PARAMS, lambda x: 0.5 + np.cos(x), 1e-4)
    assert abs(coarse.target - 1.5) < 1e-12
    assert fine.error <= fine.envelope
    assert coarse.error >= 8.0 * fine.error

    try:
        audit_prop2(g, BCKind.PERIODIC, [0.0], PARAMS)
        assert False, "Should have raised ValueError"
    except ValueError:
        pass

    print("✅ Initial-layer periodic audit test passed")


def test_initial_layer_interval():
    """Boundary traces of the Dirichlet and Neumann convolutions"""
    print("\nTesting initial-layer audit (interval)...")

    t_seq = [1e-1, 1e-2, 1e-3]
    report = audit_prop2(np.sin, BCKind.DIRICHLET, t_seq, PARAMS, N=32)
    assert report.passed, report.failure_rows()[:5]
    assert report.summary["dirichlet_trace"].checked == 2 * len(t_seq)
    assert "delta_pairing" not in report.summary

    report = audit_prop2(np.cos, BCKind.NEUMANN, t_seq, PARAMS, N=32)
    assert report.passed, report.failure_rows()[:5]
    assert report.summary["neumann_trace"].checked == 2 * len(t_seq)

    try:
        audit_prop2(np.cos, BCKind.DIRICHLET, t_seq, PARAMS, N=32)
        assert False, "Should have raised ParityViolation"
    except ParityViolation:
        pass

    print("✅ Initial-layer interval audit test passed")


def test_kernel_ode_oracle():
    """Closed forms agree with adaptive integration of the mode ODE"""
    print("\nTesting kernel ODE oracle...")

    report = audit_kernel_ode(n_samples=12, seed=0)
    assert report.passed, report.failure_rows()
    assert report.summary["kernel_ode"].checked == 12
    assert report.summary["kernel_ode_rate"].checked == 12

    print("✅ Kernel ODE oracle test passed")


def test_report_files():
    """Failures and summaries are written as CSV"""
    print("\nTesting report files...")

    report = audit_lemma(PARAMS, (0, 8), [0.0, 1.0], kernel_scale=1.5)
    with tempfile.TemporaryDirectory() as tmp:
        failures = os.path.join(tmp, "audit.csv")
        summary = os.path.join(tmp, "audit_summary.csv")
        report.write_csv(failures)
        report.write_summary(summary)

        with open(failures, newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) == 1 + len(report.failure_rows())
        assert any(row[0] == "unit_velocity" for row in rows[1:])

        with open(summary, newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == SUMMARY_HEADER
        assert [row[0] for row in rows[1:]] == sorted(report.summary)

    assert "unit_velocity" in report.summary_table()

    print("✅ Report files test passed")


def run_all_tests():
    """Run all verification tests"""
    print("=" * 60)
    print("Running Verification Tests")
    print("=" * 60)

    test_report_bookkeeping()
    test_lemma_audit()
    test_lemma_audit_threads()
    test_theta_audit()
    test_initial_layer_periodic()
    test_initial_layer_interval()
    test_kernel_ode_oracle()
    test_report_files()

    print("\n" + "=" * 60)
    print("✅ All verification tests passed!")
    print("=" * 60)


if __name__ == "__main__":
    run_all_tests()
