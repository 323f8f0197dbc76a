"""Print the worst oracle disagreement per quantity over the full seeded suite."""

from septq.suites import THRESHOLDS, oracle_suite

if __name__ == "__main__":
    reports = oracle_suite()
    for q, tol in THRESHOLDS.items():
        errs = [r.rel_err for r in reports if r.quantity == q]
        worst = max(errs)
        print(f"{q:<12} n={len(errs):<4} max rel_err {worst:.3e}  tol {tol:g}  {'PASS' if worst < tol else 'FAIL'}")
