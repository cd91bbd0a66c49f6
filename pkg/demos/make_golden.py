"""Regenerate the golden instance documents under docs/golden.

The 20-POI city table is synthetic: seeded review counts and walking times
between random points in a 6 km x 6 km box (12 minutes per km, pairs closer
than 2.5 km are connected).
"""

import argparse
import csv
import os

import numpy as np

from tourplan.core import Problem
from tourplan.instances import GridSpec, PoiRecord, gen_grid, ingest_poi_table, save_instance, t1


def city_table(n=20, seed=2024):
    rng = np.random.default_rng(seed)
    reviews = np.sort(rng.integers(200, 40_000, n))[::-1]
    records = [PoiRecord(f"site{k + 1:02d}", k + 1, int(reviews[k])) for k in range(n)]
    xy = rng.uniform(0.0, 6.0, (n, 2))
    km = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
    minutes = np.where(km <= 2.5, np.round(12.0 * km, 2), np.inf)
    np.fill_diagonal(minutes, 0.0)
    return records, minutes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "docs", "golden"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    save_instance(t1(Problem.rmt(6.0)), os.path.join(args.out, "t1.json"))
    save_instance(gen_grid(GridSpec(4, 5, 7)), os.path.join(args.out, "grid_4x5.json"))

    records, minutes = city_table()
    with open(os.path.join(args.out, "istanbul20_table.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "rank", "n_review"])
        for r in records:
            w.writerow([r.name, r.rank, r.n_review])
    np.savetxt(os.path.join(args.out, "istanbul20_minutes.csv"), minutes, delimiter=",", fmt="%.2f")
    inst = ingest_poi_table(records, minutes, mode="rmt", budget=480.0)
    save_instance(inst, os.path.join(args.out, "istanbul20.json"))
    for name in ("t1.json", "grid_4x5.json", "istanbul20.json"):
        print(os.path.normpath(os.path.join(args.out, name)))


if __name__ == "__main__":
    main()
