"""Split a visit into two tours that each fit a per-tour time limit.

``shared`` tours all leave from one base; ``disjoint`` tours each use a
base of their own.
"""

from tourplan import PlanConfig, Problem, plan
from tourplan.instances import t1


def main():
    inst = t1(Problem.rmt(8.0), second_base=True)
    single = plan(inst)
    print(f"one tour, 8 time units: reward {single.objective:.3f}")
    for kind, label in (("shared", "from one base"), ("disjoint", "from different bases")):
        res = plan(inst, PlanConfig(tours=kind, m=2, tour_limit=4.0))
        print(f"\ntwo tours {label}, at most 4 units each: reward {res.objective:.3f} ({res.status})")
        for k, it in enumerate(res.itineraries, 1):
            stays = ", ".join(f"{p}:{t:.2f}" for p, t in it.stays if t > 1e-9) or "none"
            print(f"  tour {k}: base {it.start_base}, walk {it.walk}, stays {stays}, time {it.total_time:.2f}")


if __name__ == "__main__":
    main()
