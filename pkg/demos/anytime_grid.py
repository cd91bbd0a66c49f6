"""Watch the gap close on a 4x5 grid instance.

Every solver event is printed as it happens; thresholds are the gap levels
the anytime report tracks. Takes about two minutes on one core.
"""

import argparse

from tourplan import PlanConfig, plan
from tourplan.instances import GridSpec, gen_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--time-limit", type=float, default=600.0)
    args = ap.parse_args()

    inst = gen_grid(GridSpec(4, 5, seed=args.seed))

    def on_event(ev):
        thr = f" crossed {ev.threshold:.0%}" if ev.threshold is not None else ""
        inc = f"{ev.incumbent:9.4f}" if ev.incumbent is not None else "        -"
        bnd = f"{ev.bound:9.4f}" if ev.bound is not None else "        -"
        print(f"{ev.elapsed:8.2f}s  {ev.kind:18s} inc {inc}  bound {bnd}  gap {ev.gap:7.2%}{thr}")

    res = plan(inst, PlanConfig(time_limit=args.time_limit), on_event)
    print(f"\n{res.status} after {res.mip.nodes} nodes, reward {res.objective:.6f}")
    print("walk:", " -> ".join(map(str, res.itinerary.walk)))


if __name__ == "__main__":
    main()
