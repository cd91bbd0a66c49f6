"""How many linear pieces a saturating curve needs at different accuracies."""

import numpy as np

from tourplan import CurveSpec, approximate
from tourplan.curves import fit_breakpoints, validate_pwl_error


def main():
    spec = CurveSpec.exponential(1.0)
    print(f"{'eps':>6} {'flavor':>6} {'method':>10} {'pieces':>6} {'max rel err':>12}")
    for eps in (0.2, 0.1, 0.05, 0.01):
        for flavor, method in (("band", "greedy"), ("band", "construct"), ("upper", "construct")):
            pwl = approximate(spec, eps, flavor=flavor, method=method)
            err = validate_pwl_error(spec, pwl)
            print(f"{eps:6.2f} {flavor:>6} {method:>10} {len(pwl.breakpoints) - 1:6d} {err:12.4f}")

    pwl, err = fit_breakpoints(spec, 4)
    print(f"\nbest 4-piece fit of 1 - exp(-t): error {err:.4f}")
    for t, v in pwl.breakpoints:
        print(f"  ({t:7.4f}, {v:.4f})")
    ts = np.array([0.5, 1.0, 2.0, 4.0])
    print("  f(t)   :", np.round(1 - np.exp(-ts), 4))
    print("  pwl(t) :", np.round(pwl(ts), 4))


if __name__ == "__main__":
    main()
