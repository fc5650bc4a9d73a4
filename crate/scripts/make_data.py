#!/usr/bin/env python3
"""Generate the bundled example data: feeders, coupling maps and the
synthetic transmission cases used by the benchmarks and PV-curve examples.

Everything is seeded, so rerunning reproduces the committed files.
"""

import argparse
import json
import math
import random
from pathlib import Path

# Kron-reduced phase impedances in ohm/mile of common overhead configurations.
Z_ABC = [
    [[0.3465, 1.0179], [0.1560, 0.5017], [0.1580, 0.4236]],
    [[0.1560, 0.5017], [0.3375, 1.0478], [0.1535, 0.3849]],
    [[0.1580, 0.4236], [0.1535, 0.3849], [0.3414, 1.0348]],
]
Z_TWO = [
    [[1.3294, 1.3471], [0.2066, 0.4591]],
    [[0.2066, 0.4591], [1.3238, 1.3569]],
]
Z_ONE = [[[1.3292, 1.3475]]]


def z_for(phases):
    return {3: Z_ABC, 2: Z_TWO, 1: Z_ONE}[len(phases)]


def small_feeder():
    """Eight-node feeder with a two-phase and a single-phase lateral."""
    nodes = [
        {"id": 1, "phases": "abc", "kv": 12.47},
        {"id": 2, "phases": "abc", "kv": 12.47},
        {"id": 3, "phases": "abc", "kv": 12.47},
        {"id": 4, "phases": "abc", "kv": 12.47},
        {"id": 5, "phases": "bc", "kv": 12.47},
        {"id": 6, "phases": "c", "kv": 12.47},
        {"id": 7, "phases": "abc", "kv": 12.47},
        {"id": 8, "phases": "abc", "kv": 0.48},
    ]
    lines = [
        {"from": 1, "to": 2, "phases": "abc", "z": Z_ABC, "length": 0.4},
        {"from": 2, "to": 3, "phases": "abc", "z": Z_ABC, "length": 0.3},
        {"from": 3, "to": 4, "phases": "abc", "z": Z_ABC, "length": 0.3},
        {"from": 3, "to": 5, "phases": "bc", "z": Z_TWO, "length": 0.2},
        {"from": 5, "to": 6, "phases": "c", "z": Z_ONE, "length": 0.1},
        {"from": 4, "to": 7, "phases": "abc", "z": Z_ABC, "length": 0.2},
    ]
    transformers = [{"from": 7, "to": 8, "connection": "delta-wye", "z": [0.0023, 0.0092]}]
    loads = [
        {"node": 2, "connection": "Wye", "kw": [160, 120, 140], "kvar": [60, 50, 55]},
        {"node": 4, "connection": "Delta", "kw": [120, 120, 120], "kvar": [50, 50, 50]},
        {"node": 5, "connection": "Wye", "kw": [0, 90, 80], "kvar": [0, 40, 35],
         "zip": {"z": 0.2, "i": 0.3, "p": 0.5}},
        {"node": 6, "connection": "Wye", "kw": [0, 0, 60], "kvar": [0, 0, 25]},
        {"node": 8, "connection": "Wye", "kw": [70, 70, 70], "kvar": [20, 20, 20]},
    ]
    capacitors = [{"node": 4, "kvar": [100, 100, 100]}]
    ders = [{"node": 2, "kw": [40, 40, 40], "kvar": [0, 0, 0], "group": "pv"}]
    return {
        "schema": 1, "name": "small", "head": 1, "nodes": nodes, "lines": lines,
        "transformers": transformers, "loads": loads, "capacitors": capacitors, "ders": ders,
    }


def synthetic_feeder(n_nodes, seed, der_share):
    """Radial feeder: a three-phase trunk with three-, two- and single-phase laterals."""
    rng = random.Random(seed)
    trunk_len = max(4, n_nodes // 5)
    nodes = [{"id": 1, "phases": "abc", "kv": 12.47}]
    lines = []
    phases_of = {1: "abc"}
    for k in range(2, trunk_len + 1):
        nodes.append({"id": k, "phases": "abc", "kv": 12.47})
        phases_of[k] = "abc"
        lines.append({"from": k - 1, "to": k, "phases": "abc", "z": Z_ABC,
                      "length": round(rng.uniform(0.03, 0.08), 4)})
    next_id = trunk_len + 1
    while next_id <= n_nodes:
        parent = rng.randint(2, next_id - 1)
        parent_phases = phases_of[parent]
        options = [p for p in ("abc", "ab", "bc", "ca", "a", "b", "c")
                   if set(p) <= set(parent_phases)]
        weights = [6 if len(p) == 3 else 2 if len(p) == 2 else 3 for p in options]
        ph = rng.choices(options, weights)[0]
        ph = "".join(c for c in "abc" if c in ph)
        nodes.append({"id": next_id, "phases": ph, "kv": 12.47})
        phases_of[next_id] = ph
        lines.append({"from": parent, "to": next_id, "phases": ph, "z": z_for(ph),
                      "length": round(rng.uniform(0.02, 0.06), 4)})
        next_id += 1

    loads, ders = [], []
    load_nodes = [n["id"] for n in nodes[1:] if rng.random() < 0.6]
    for node in load_nodes:
        ph = phases_of[node]
        kw = [0.0, 0.0, 0.0]
        kvar = [0.0, 0.0, 0.0]
        delta = len(ph) == 3 and rng.random() < 0.15
        pf = rng.uniform(0.88, 0.97)
        for slot, p in enumerate("abc"):
            if delta or p in ph:
                kw[slot] = round(rng.uniform(8.0, 30.0), 2)
                kvar[slot] = round(kw[slot] * math.tan(math.acos(pf)), 2)
        rec = {"node": node, "connection": "Delta" if delta else "Wye", "kw": kw, "kvar": kvar}
        if rng.random() < 0.2:
            z = round(rng.uniform(0.0, 0.3), 2)
            i = round(rng.uniform(0.0, 0.3), 2)
            rec["zip"] = {"z": z, "i": i, "p": round(1.0 - z - i, 2)}
        loads.append(rec)
        if rng.random() < der_share:
            ders.append({
                "node": node,
                "kw": [round(0.8 * x, 2) for x in kw] if not delta else [0.0, 0.0, 0.0],
                "kvar": [0.0, 0.0, 0.0],
                "group": "pv",
            })
    ders = [d for d in ders if any(d["kw"])]
    capacitors = [{"node": trunk_len // 2, "kvar": [150, 150, 150]}]
    return {
        "schema": 1, "name": f"synth{n_nodes}", "head": 1, "nodes": nodes, "lines": lines,
        "transformers": [], "loads": loads, "capacitors": capacitors, "ders": ders,
    }


def matpower(name, comment, buses, gens, branches):
    out = [f"function mpc = {name}", f"% {comment}", "mpc.version = '2';", "mpc.baseMVA = 100;", ""]
    out.append("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
    out.append("mpc.bus = [")
    for b in buses:
        out.append("\t" + "\t".join(str(v) for v in b) + ";")
    out += ["];", "", "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin", "mpc.gen = ["]
    for g in gens:
        out.append("\t" + "\t".join(str(v) for v in g) + ";")
    out += ["];", "", "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
            "mpc.branch = ["]
    for br in branches:
        out.append("\t" + "\t".join(str(v) for v in br) + ";")
    out += ["];", ""]
    return "\n".join(out)


def bus_row(i, kind, pd, qd, kv=230):
    return [i, kind, pd, qd, 0, 0, 1, 1, 0, kv, 1, 1.1, 0.9]


def gen_row(bus, pg, vg, qmax=300, qmin=-300):
    return [bus, pg, 0, qmax, qmin, vg, 100, 1, 9999, 0]


def line_row(f, t, r, x, b):
    return [f, t, r, x, b, 0, 0, 0, 0, 0, 1, -360, 360]


def bench_case(seed):
    """Meshed 24-bus grid with four generators and twenty load buses."""
    rng = random.Random(seed)
    n = 24
    gens = {1: None, 7: 120, 13: 140, 19: 110}
    buses, branches = [], []
    for i in range(1, n + 1):
        if i == 1:
            buses.append(bus_row(i, 3, 0, 0))
        elif i in gens:
            buses.append(bus_row(i, 2, 0, 0))
        else:
            pd = round(rng.uniform(15, 35), 1)
            buses.append(bus_row(i, 1, pd, round(pd * 0.35, 1)))
    for i in range(1, n + 1):
        j = i % n + 1
        branches.append(line_row(i, j, 0.01, 0.06, 0.05))
    for i in range(1, n + 1, 4):
        j = (i + 11) % n + 1
        branches.append(line_row(i, j, 0.015, 0.09, 0.08))
    gen_rows = [gen_row(1, 0, 1.02)] + [gen_row(b, p, 1.01) for b, p in gens.items() if p]
    return matpower("bench24", "Synthetic meshed 24-bus grid for scaling runs.", buses, gen_rows, branches)


def stressed_case():
    """Four buses with a small load pocket: the POI (bus 3) hangs off the slack
    through a long tie and leans on a nearby generator whose outage is the
    contingency of interest. Sized so the attached feeder and its DERs move
    the nose visibly."""
    buses = [
        bus_row(1, 3, 0, 0),
        bus_row(2, 2, 0, 0),
        bus_row(3, 1, 0, 0),
        bus_row(4, 1, 8, 3),
    ]
    gens = [gen_row(1, 0, 1.0), gen_row(2, 4, 1.0, qmax=3, qmin=-3)]
    branches = [
        line_row(1, 3, 0.15, 1.5, 0.0),
        line_row(3, 4, 0.03, 0.3, 0.0),
        line_row(2, 3, 0.08, 0.8, 0.0),
        line_row(1, 2, 0.2, 2.0, 0.0),
    ]
    return matpower("stressed", "Small load pocket behind a long tie with a nearby generator.", buses, gens, branches)


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=1) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="output directory")
    ap.add_argument("--nodes", type=int, default=200, help="synthetic feeder size")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--der-share", type=float, default=0.2, help="share of load nodes with a DER")
    args = ap.parse_args()

    out = Path(args.out)
    (out / "feeders").mkdir(parents=True, exist_ok=True)
    write_json(out / "feeders" / "small.json", small_feeder())
    synth = synthetic_feeder(args.nodes, args.seed, args.der_share)
    write_json(out / "feeders" / f"synth{args.nodes}.json", synth)
    feeder = f"feeders/synth{args.nodes}.json"

    write_json(out / "case9_one_feeder.json", {"schema": 1, "pairs": [{"feeder": feeder, "bus": 5}]})
    write_json(out / "case9_four_feeders.json", {
        "schema": 1,
        "pairs": [{"feeder": feeder, "bus": b} for b in (5, 6, 7, 9)],
    })
    write_json(out / "case9_small.json", {"schema": 1, "pairs": [{"feeder": "feeders/small.json", "bus": 5}]})
    (out / "bench24.m").write_text(bench_case(args.seed))
    (out / "stressed.m").write_text(stressed_case())
    write_json(out / "stressed_map.json", {"schema": 1, "pairs": [{"feeder": feeder, "bus": 3, "der_scale": 6.0}]})

    n_loads = len(synth["loads"])
    print(f"synthetic feeder: {len(synth['nodes'])} nodes, {n_loads} loads, {len(synth['ders'])} DERs "
          f"({len(synth['ders']) / max(n_loads, 1):.0%} of load nodes)")


if __name__ == "__main__":
    main()
