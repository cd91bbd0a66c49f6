"""Plan a tour on the three-POI example and compare it with brute force."""

from tourplan import Problem, oracle_bmt, oracle_rmt, plan
from tourplan.instances import t1


def show(title, it):
    print(title)
    print(f"  start at {it.start_base}, walk {' -> '.join(map(str, it.walk))}")
    for poi, t in it.stays:
        if t > 1e-9:
            print(f"  stay {t:6.3f} at POI {poi}")
    print(f"  total time {it.total_time:.3f}, reward {it.true_reward:.3f}")


def main():
    inst = t1(Problem.rmt(6.0))
    res = plan(inst)
    show(f"max reward within 6 time units ({res.status}):", res.itinerary)
    print(f"  brute force agrees: {oracle_rmt(inst).value:.3f}\n")

    inst = t1(Problem.bmt(11.0))
    res = plan(inst)
    show(f"fastest tour collecting 11 ({res.status}):", res.itinerary)
    print(f"  brute force agrees: {oracle_bmt(inst).value:.3f}")


if __name__ == "__main__":
    main()
