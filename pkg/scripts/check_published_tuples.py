"""
Manual check of the correlation statistics against published (r, n, p, BF10) values.
Prints p and the Bayes factor under every method so calibration drift is easy to spot.
"""

import sys
from typing import get_args

from cogplay.models.stats import BayesFactorMethod
from cogplay.services.stats_service import jzs_bf, p_two_tailed

# r, n, p, bf10 (None where a value was not reported)
PUBLISHED = [
    (0.58, 20, 7.3e-3, 8.0),
    (0.66, 19, None, 22.0),
    (0.93, 16, 2.5e-7, 5.2e4),
]
BF_TOLERANCE = 0.15


def check_p_values():
    """p must fall inside the interval implied by r rounded to two decimals"""
    print("Checking p-values...")
    failures = 0
    for r, n, published, _ in PUBLISHED:
        if published is None:
            continue
        low, high = p_two_tailed(r + 0.005, n), p_two_tailed(r - 0.005, n)
        ok = low <= published <= high
        failures += not ok
        print(f"  {'✓' if ok else '✗'} r={r} n={n}: published {published:.2g}, interval [{low:.2g}, {high:.2g}]")
    return failures


def check_bayes_factors():
    """The default method must match within BF_TOLERANCE; the others are reported only"""
    print("Checking Bayes factors...")
    failures = 0
    for r, n, _, published in PUBLISHED:
        values = {method: jzs_bf(r, n, method=method) for method in get_args(BayesFactorMethod)}
        ok = abs(values["jeffreys"] / published - 1.0) <= BF_TOLERANCE
        failures += not ok
        shown = ", ".join(f"{method}={value:.4g}" for method, value in values.items())
        print(f"  {'✓' if ok else '✗'} r={r} n={n}: published {published:.3g}; {shown}")
    return failures


def main():
    print("\n" + "=" * 60)
    print("PUBLISHED STATISTICS CHECK")
    print("=" * 60 + "\n")

    try:
        failures = check_p_values() + check_bayes_factors()
    except Exception as e:
        print(f"\n❌ CHECK FAILED: {e}")
        import traceback
        traceback.print_exc()
        return 1

    print("\n" + "=" * 60)
    print("ALL VALUES MATCH ✓" if not failures else f"{failures} VALUE(S) OUT OF TOLERANCE ✗")
    print("=" * 60 + "\n")
    return 0 if not failures else 1


if __name__ == "__main__":
    sys.exit(main())
