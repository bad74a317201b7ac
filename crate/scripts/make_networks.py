#!/usr/bin/env python3
"""Writes the bundled network fixtures, or converts RTS-GMLC CSV tables.

    python3 scripts/make_networks.py                 # regenerate crates/core/data/*.json
    python3 scripts/make_networks.py --gmlc DIR -T 24 -o rts_gmlc.json

The GMLC converter reads bus.csv, branch.csv and gen.csv from the
SourceData folder of the RTS-GMLC repository. Loads become one load per bus
with the bus MW scaled by a flat daily profile.
"""

import argparse
import csv
import json
import math
import os

DATA = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")

DAILY = [0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95,
         0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00, 0.96, 0.91, 0.83, 0.73, 0.63]


def profile(peak, horizon):
    step = len(DAILY) / horizon
    return [round(peak * DAILY[int(k * step)], 3) for k in range(horizon)]


def case14(horizon=6):
    branches = [
        (1, 2, 0.05917, 200), (1, 5, 0.22304, 120), (2, 3, 0.19797, 120), (2, 4, 0.17632, 100),
        (2, 5, 0.17388, 100), (3, 4, 0.17103, 100), (4, 5, 0.04211, 100), (4, 7, 0.20912, 80),
        (4, 9, 0.55618, 60), (5, 6, 0.25202, 100), (6, 11, 0.19890, 60), (6, 12, 0.25581, 60),
        (6, 13, 0.13027, 60), (7, 8, 0.17615, 100), (7, 9, 0.11001, 80), (9, 10, 0.08450, 60),
        (9, 14, 0.27038, 60), (10, 11, 0.19207, 60), (12, 13, 0.19988, 60), (13, 14, 0.34802, 60),
    ]
    loads = {2: 21.7, 3: 94.2, 4: 47.8, 5: 7.6, 6: 11.2, 9: 29.5, 10: 9.0, 11: 3.5, 12: 6.1, 13: 13.5, 14: 14.9}
    priorities = {3: 200.0, 9: 100.0, 13: 400.0}
    gens = [(1, 332.4, "thermal"), (2, 140.0, "thermal"), (3, 100.0, "hydro"), (6, 100.0, "wind"), (8, 100.0, "thermal")]
    net = {
        "horizon_T": horizon,
        "buses": [{"id": str(b), "is_reference": b == 1} for b in range(1, 15)],
        "generators": [
            {"id": f"g{b}", "bus": str(b), "p_min": 0.0, "p_max": p, "fuel": fuel} for b, p, fuel in gens
        ],
        "lines": [
            {"id": f"l{f}-{t}", "from_bus": str(f), "to_bus": str(t), "susceptance_mag": round(1.0 / x, 4),
             "thermal_limit": float(w), "length": round(400.0 * x, 2)}
            for f, t, x, w in branches
        ],
        "loads": [],
    }
    for b, mw in loads.items():
        load = {"id": f"d{b}", "bus": str(b), "demand_by_period": profile(mw, horizon)}
        if b in priorities:
            load["priority"] = priorities[b]
        net["loads"].append(load)
    return net


# One area of the 24-bus reliability test system: (from, to, x, MVA rating).
RTS_BRANCHES = [
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175), (2, 4, 0.1267, 175),
    (2, 6, 0.1920, 175), (3, 9, 0.1190, 175), (3, 24, 0.0839, 400), (4, 9, 0.1037, 175),
    (5, 10, 0.0883, 175), (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400), (10, 11, 0.0839, 400),
    (10, 12, 0.0839, 400), (11, 13, 0.0476, 500), (11, 14, 0.0418, 500), (12, 13, 0.0476, 500),
    (12, 23, 0.0966, 500), (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
    (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500), (16, 17, 0.0259, 500),
    (16, 19, 0.0231, 500), (17, 18, 0.0144, 500), (17, 22, 0.1053, 500), (18, 21, 0.0259, 500),
    (18, 21, 0.0259, 500), (19, 20, 0.0396, 500), (19, 20, 0.0396, 500), (20, 23, 0.0216, 500),
    (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
]
RTS_LOADS = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175, 10: 195,
             13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128}
RTS_UNITS = {
    1: [(20, "thermal")] * 2 + [(76, "thermal")] * 2,
    2: [(20, "thermal")] * 2 + [(76, "thermal")] * 2,
    7: [(100, "thermal")] * 3,
    13: [(197, "thermal")] * 3,
    15: [(12, "thermal")] * 5 + [(155, "thermal")],
    16: [(155, "thermal")],
    18: [(400, "nuclear")],
    21: [(400, "nuclear")],
    22: [(50, "hydro")] * 6,
    23: [(155, "thermal")] * 2 + [(350, "thermal")],
}
RTS_INTERTIES = [(107, 203, 0.161), (113, 215, 0.075), (123, 217, 0.074), (223, 318, 0.104),
                 (121, 325, 0.097), (221, 325, 0.097), (321, 325, 0.097)]


def rts73(horizon=24):
    """Three copies of the 24-bus area joined by interties and a hub bus 325."""
    net = {"horizon_T": horizon, "buses": [], "generators": [], "lines": [], "loads": []}
    for area in (1, 2, 3):
        base = 100 * area
        for b in range(1, 25):
            net["buses"].append({"id": str(base + b), "is_reference": base + b == 113})
        seen = {}
        for f, t, x, w in RTS_BRANCHES:
            key = (f, t)
            seen[key] = seen.get(key, 0) + 1
            suffix = "" if seen[key] == 1 else "b"
            net["lines"].append({
                "id": f"l{base + f}-{base + t}{suffix}", "from_bus": str(base + f), "to_bus": str(base + t),
                "susceptance_mag": round(1.0 / x, 4), "thermal_limit": float(w), "length": round(400.0 * x, 2),
            })
        for b, mw in RTS_LOADS.items():
            net["loads"].append({"id": f"d{base + b}", "bus": str(base + b), "demand_by_period": profile(mw, horizon)})
        for b, units in RTS_UNITS.items():
            for k, (p, fuel) in enumerate(units):
                net["generators"].append({
                    "id": f"g{base + b}-{k + 1}", "bus": str(base + b), "p_min": 0.0, "p_max": float(p), "fuel": fuel,
                })
    net["buses"].append({"id": "325"})
    for f, t, x in RTS_INTERTIES:
        net["lines"].append({
            "id": f"l{f}-{t}", "from_bus": str(f), "to_bus": str(t), "susceptance_mag": round(1.0 / x, 4),
            "thermal_limit": 500.0, "length": round(400.0 * x, 2),
        })
    return net


def gmlc(folder, horizon):
    """Network from RTS-GMLC SourceData CSVs."""
    def rows(name):
        with open(os.path.join(folder, name), newline="") as fh:
            return list(csv.DictReader(fh))

    buses = rows("bus.csv")
    net = {"horizon_T": horizon, "buses": [], "generators": [], "lines": [], "loads": []}
    for r in buses:
        bid = r["Bus ID"]
        net["buses"].append({"id": bid, "is_reference": r["Bus Type"].strip().lower() == "ref"})
        mw = float(r["MW Load"])
        if mw > 0:
            net["loads"].append({"id": f"d{bid}", "bus": bid, "demand_by_period": profile(mw, horizon)})
    for r in rows("branch.csv"):
        x = float(r["X"])
        net["lines"].append({
            "id": r["UID"], "from_bus": r["From Bus"], "to_bus": r["To Bus"],
            "susceptance_mag": round(1.0 / x, 4), "thermal_limit": float(r["Cont Rating"]),
            "length": round(float(r["Length"]) * 1.609344, 2),
        })
    fuels = {"wind": "wind", "solar": "solar", "hydro": "hydro", "nuclear": "nuclear"}
    for r in rows("gen.csv"):
        fuel = fuels.get(r["Fuel"].strip().lower(), "thermal")
        net["generators"].append({
            "id": r["GEN UID"], "bus": r["Bus ID"], "p_min": 0.0, "p_max": float(r["PMax MW"]), "fuel": fuel,
        })
    return net


def write(net, path):
    with open(path, "w") as fh:
        json.dump(net, fh, indent=1)
        fh.write("\n")
    n = len(net["buses"]) + len(net["generators"]) + len(net["lines"])
    print(f"{path}: {len(net['buses'])} buses, {len(net['lines'])} lines, "
          f"{len(net['generators'])} generators, {n} components")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--gmlc", help="RTS-GMLC SourceData folder to convert")
    ap.add_argument("-T", type=int, default=24, help="horizon for --gmlc")
    ap.add_argument("-o", default="rts_gmlc.json", help="output for --gmlc")
    args = ap.parse_args()
    if args.gmlc:
        write(gmlc(args.gmlc, args.T), args.o)
        return
    write(case14(), os.path.join(DATA, "case14.json"))
    write(rts73(), os.path.join(DATA, "rts73.json"))
    assert math.isclose(sum(DAILY) / len(DAILY), 0.839, abs_tol=0.01)


if __name__ == "__main__":
    main()
