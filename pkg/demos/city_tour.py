"""Plan an afternoon in a synthetic 20-POI city and report the anytime gap.

The instance lives in docs/golden/istanbul20.json (regenerate it with
make_golden.py). Budgets are in minutes.
"""

import argparse
from pathlib import Path

from tourplan import PlanConfig, Problem, plan
from tourplan.instances import load_instance

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", default=str(HERE.parent / "docs" / "golden" / "istanbul20.json"))
    ap.add_argument("--budget", type=float, default=120.0)
    ap.add_argument("--time-limit", type=float, default=30.0)
    args = ap.parse_args()

    inst = load_instance(args.instance).with_problem(Problem.rmt(args.budget))
    crossed = []
    res = plan(inst, PlanConfig(time_limit=args.time_limit),
               lambda ev: crossed.append(ev) if ev.kind == "threshold_crossed" else None)
    for ev in crossed:
        print(f"gap <= {ev.threshold:4.0%} at {ev.elapsed:6.2f}s")
    it = res.itinerary
    print(f"\n{res.status}: reward {it.true_reward:.1f} (bound {res.mip.bound:.1f}, gap {res.mip.gap:.1%})")
    print(f"start at base {it.start_base}, {it.total_time:.0f} of {args.budget:.0f} minutes used")
    for poi, t in it.stays:
        print(f"  POI {poi:2d}: {t:5.1f} min")


if __name__ == "__main__":
    main()
