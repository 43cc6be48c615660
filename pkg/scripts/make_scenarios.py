"""Regenerate the bundled scenario files.

    python3 scripts/make_scenarios.py [OUTDIR]

Writes ``conceptual-iun.json`` (43 processes) and ``synthetic-iun.json`` (121
processes) into OUTDIR, by default ``src/hfrobust/scenarios``.  Dependency weights
are synthetic.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

from hfrobust.builder import build, load_scenario

# Route sharing is a secondary dependency: a derived parent carries a quarter of the
# raw weight of a declared one before renormalisation.
DERIVED_WEIGHT = 0.25
# Plants and repair facilities keep running on 30% of their normal output.
FACILITY_QOF = 0.3

OUT = Path(__file__).resolve().parents[1] / "src" / "hfrobust" / "scenarios"


class Scenario:
    def __init__(self, name, description):
        self.doc = {"name": name, "description": description, "defaults": {
            "qof_fraction": 0.5, "partial_step": 0.2, "derived_weight": DERIVED_WEIGHT},
            "topologies": {}, "facilities": {}, "processes": [], "dependencies": []}
        self.ids = {}

    def network(self, sector, edges, facilities, extra_nodes=()):
        nodes = sorted({v for e in edges for v in e} | set(facilities.values()) | set(extra_nodes))
        self.doc["topologies"][sector] = {"nodes": nodes, "edges": [list(e) for e in edges]}
        self.doc["facilities"][sector] = facilities

    def process(self, key, label, sector, kind="production", **extra):
        pid = len(self.doc["processes"]) + 1
        self.doc["processes"].append({"id": pid, "label": label, "sector": sector, "kind": kind, **extra})
        self.ids[key] = pid
        return pid

    def delivery(self, sector, src, dst, verb="Deliver", what=None, **extra):
        what = what or {"power": "power", "water": "water", "gas": "gas", "heat": "heat",
                        "transport": "repair crews"}[sector]
        key = (sector, src, dst)
        self.process(key, f"{verb} {what} from {src} to {dst}", sector, "delivery",
                     source=src, destination=dst, **extra)
        return key

    def depends(self, target, parents: dict):
        """Declare ``target``'s parents with relative shares (normalised exactly)."""
        total = sum(Fraction(s).limit_denominator(1000) for s in parents.values())
        for p, share in parents.items():
            w = Fraction(share).limit_denominator(1000) / total
            self.doc["dependencies"].append(
                {"source": self.ids[p], "target": self.ids[target], "weight": float(w)})

    def write(self, path):
        path.write_text(json.dumps(self.doc, indent=1) + "\n", encoding="utf-8")


def synthetic() -> Scenario:
    s = Scenario("synthetic-iun", "Five-sector urban network with the facility placement of the "
                 "reference test system; 121 processes, synthetic dependency weights.")
    s.network("power", [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (5, 9), (8, 9),
                        (9, 10), (10, 11), (11, 17), (10, 12), (12, 13), (13, 14), (14, 15),
                        (15, 16), (16, 18), (18, 19), (19, 20), (18, 23), (23, 24), (23, 22),
                        (22, 21)],
              {"WIRF": 1, "WTP1": 3, "IP1": 4, "GPP": 5, "IP2": 6, "GS1": 7, "PIRF": 8, "CZ1": 9,
               "WTP2": 11, "CZ2": 12, "RZ1": 13, "GIRF": 14, "SPP": 15, "CZ3": 16, "RZ2": 17,
               "RZ3": 19, "RZ4": 20, "GS2": 21, "RZ5": 22, "CHP1": 23, "RZ6": 24})
    s.network("water", [(3, 2), (2, 1), (3, 4), (4, 5), (4, 9), (9, 12), (12, 13), (13, 16),
                        (5, 6), (6, 7), (7, 8), (8, 14), (11, 10), (10, 9), (11, 17), (17, 18),
                        (18, 19), (19, 20), (20, 21), (11, 15), (15, 22), (22, 24), (16, 17)],
              {"WIRF": 1, "HPL1": 2, "WTP1": 3, "IP1": 4, "GPP": 5, "IP2": 6, "GS1": 7, "PIRF": 8,
               "CZ1": 9, "HPL2": 10, "WTP2": 11, "CZ2": 12, "RZ1": 13, "GIRF": 14, "SPP": 15,
               "CZ3": 16, "RZ2": 17, "HPL3": 18, "RZ3": 19, "RZ4": 20, "GS2": 21, "RZ5": 22,
               "RZ6": 24})
    s.network("gas", [(1, 2), (2, 3), (3, 4), (4, 5), (3, 6), (4, 9), (9, 10), (9, 11), (11, 12),
                      (12, 13), (11, 14), (14, 15), (10, 16), (16, 17), (16, 18), (18, 19),
                      (18, 20), (20, 7), (7, 8)],
              {"GS1": 1, "HPL1": 2, "GPP": 5, "HPL2": 6, "HPL3": 8, "CHP1": 10, "RZ1": 12,
               "RZ2": 13, "RZ3": 14, "RZ4": 15, "RZ5": 17, "RZ6": 19, "GS2": 20})
    s.network("heat", [(2, 1), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (10, 9),
                       (10, 11), (11, 12), (12, 13), (13, 14), (11, 15), (15, 16), (16, 17),
                       (18, 17), (18, 19), (19, 20), (20, 21), (21, 22), (22, 23), (23, 24)],
              {"WIRF": 1, "HPL1": 2, "IP1": 4, "IP2": 6, "PIRF": 8, "CZ1": 9, "HPL2": 10,
               "CZ2": 12, "RZ1": 13, "GIRF": 14, "CZ3": 16, "RZ2": 17, "HPL3": 18, "RZ3": 19,
               "RZ4": 20, "RZ5": 22, "CHP1": 23, "RZ6": 24})
    s.network("transport", [(i, i + 1) for i in range(1, 23)] + [(4, 12), (16, 22)],
              {"WIRF": 1, "HPL1": 2, "WTP1": 3, "GPP": 5, "GS1": 7, "PIRF": 8, "HPL2": 10,
               "WTP2": 11, "GIRF": 14, "SPP": 15, "HPL3": 18, "GS2": 21, "CHP1": 23})

    # facility operations first so that WTP1 gets id 3
    ops = [("GPP", "Gas-fired power plant GPP generates power", "power"),
           ("SPP", "Solar power plant SPP generates power", "power"),
           ("WTP1", "Water treatment facility WTP1 is working properly", "water"),
           ("WTP2", "Water treatment facility WTP2 is working properly", "water"),
           ("CHP1", "CHP1 co-generates power and heat", "power"),
           ("GS1", "Gas station GS1 supplies gas", "gas"),
           ("GS2", "Gas station GS2 supplies gas", "gas"),
           ("HPL1", "Heating plant HPL1 produces heat", "heat"),
           ("HPL2", "Heating plant HPL2 produces heat", "heat"),
           ("HPL3", "Heating plant HPL3 produces heat", "heat"),
           ("WIRF", "Water repair facility WIRF is staffed", "service"),
           ("PIRF", "Power repair facility PIRF is staffed", "service"),
           ("GIRF", "Gas repair facility GIRF is staffed", "service")]
    for fac, label, sector in ops:
        s.process(fac, label, sector, facility=fac, qof_fraction=FACILITY_QOF)
    for key, label, sector in [("import-GS1", "Receive natural gas at the GS1 city gate", "gas"),
                               ("import-GS2", "Receive natural gas at the GS2 city gate", "gas"),
                               ("intake-WTP2", "Draw raw water into WTP2", "water"),
                               ("sun-SPP", "Solar resource reaches SPP", "power"),
                               ("crew-WIRF", "Water repair crews are on duty", "service"),
                               ("crew-PIRF", "Power repair crews are on duty", "service"),
                               ("crew-GIRF", "Gas repair crews are on duty", "service")]:
        s.process(key, label, sector, resources=[key.split("-")[1]])
    zones = ["IP1", "IP2", "CZ1", "CZ2", "CZ3", "RZ1", "RZ2", "RZ3", "RZ4", "RZ5", "RZ6"]
    for z in zones:
        s.process(("zone", z), f"Demand of {z} is served", "service", "service", facility=z)

    multi = ["IP1", "IP2", "CZ1", "CZ2", "CZ3", "RZ1"]
    power = [("GPP", "GS1"), ("CHP1", "GS2"), ("GPP", "WIRF"), ("GPP", "WTP1"), ("SPP", "WTP1"),
             ("GPP", "PIRF"), ("CHP1", "PIRF"), ("SPP", "GIRF"), ("GPP", "WTP2"), ("SPP", "WTP2")]
    power += [(src, z) for z in multi for src in ("GPP", "CHP1", "SPP") if (src, z) not in power]
    power += [(src, z) for z in zones if z not in multi for src in ("GPP", "CHP1")]
    for src, dst in power:
        s.delivery("power", src, dst, "Transit", "power")
    assert s.ids[("power", "GPP", "WTP1")] == 35 and s.ids[("power", "SPP", "WTP1")] == 36

    water = [("WTP1", "GPP"), ("WTP1", "HPL1"), ("WTP2", "HPL2"), ("WTP2", "HPL3"),
             ("WTP1", "IP1"), ("WTP2", "IP1"), ("WTP1", "IP2"), ("WTP2", "IP2"), ("WTP1", "CZ1"),
             ("WTP2", "CZ2"), ("WTP2", "CZ3"), ("WTP2", "RZ1"), ("WTP2", "RZ2"), ("WTP2", "RZ3"),
             ("WTP2", "RZ4"), ("WTP2", "RZ5"), ("WTP2", "RZ6")]
    gas = [("GS1", "GPP"), ("GS1", "CHP1"), ("GS2", "CHP1"), ("GS1", "HPL1"), ("GS1", "HPL2"),
           ("GS2", "HPL3"), ("GS1", "RZ1"), ("GS1", "RZ2"), ("GS1", "RZ3"), ("GS1", "RZ4"),
           ("GS2", "RZ5"), ("GS2", "RZ6")]
    heat = [("HPL1", "WIRF"), ("HPL1", "PIRF"), ("HPL2", "GIRF"), ("HPL1", "IP1"), ("HPL1", "IP2"),
            ("HPL2", "CZ1"), ("HPL2", "CZ2"), ("HPL2", "CZ3"), ("HPL2", "RZ1"), ("HPL3", "RZ2"),
            ("HPL3", "RZ3"), ("HPL3", "RZ4"), ("HPL3", "RZ5"), ("HPL3", "RZ6")]
    transport = [("WIRF", "WTP1"), ("WIRF", "WTP2"), ("PIRF", "GPP"), ("PIRF", "SPP"),
                 ("PIRF", "CHP1"), ("GIRF", "GS1"), ("GIRF", "GS2"), ("GIRF", "GPP"),
                 ("GIRF", "CHP1")]
    for src, dst in water:
        s.delivery("water", src, dst, "Supply")
    for src, dst in gas:
        s.delivery("gas", src, dst, "Supply")
    for src, dst in heat:
        s.delivery("heat", src, dst, "Supply")
    for src, dst in transport:
        s.delivery("transport", src, dst, "Dispatch")
    assert len(s.doc["processes"]) == 121, len(s.doc["processes"])

    # every delivery needs its source facility running
    for p in s.doc["processes"]:
        if p["kind"] == "delivery":
            s.depends((p["sector"], p["source"], p["destination"]), {p["source"]: 1})

    P, W, G, H, T = "power", "water", "gas", "heat", "transport"
    s.depends("GPP", {(G, "GS1", "GPP"): 6, (W, "WTP1", "GPP"): 2, (T, "PIRF", "GPP"): 1,
                      (T, "GIRF", "GPP"): 1})
    s.depends("SPP", {"sun-SPP": 7, (T, "PIRF", "SPP"): 3})
    s.depends("WTP1", {(P, "GPP", "WTP1"): 1, (P, "SPP", "WTP1"): 1})
    s.depends("WTP2", {"intake-WTP2": 4, (P, "GPP", "WTP2"): 2, (P, "SPP", "WTP2"): 2,
                       (T, "WIRF", "WTP2"): 2})
    s.depends("CHP1", {(G, "GS1", "CHP1"): 7, (G, "GS2", "CHP1"): 7, (T, "PIRF", "CHP1"): 3,
                       (T, "GIRF", "CHP1"): 3})
    s.depends("GS1", {"import-GS1": 5, (P, "GPP", "GS1"): 3, (T, "GIRF", "GS1"): 2})
    s.depends("GS2", {"import-GS2": 5, (P, "CHP1", "GS2"): 3, (T, "GIRF", "GS2"): 2})
    s.depends("HPL1", {(G, "GS1", "HPL1"): 6, (W, "WTP1", "HPL1"): 4})
    s.depends("HPL2", {(G, "GS1", "HPL2"): 6, (W, "WTP2", "HPL2"): 4})
    s.depends("HPL3", {(G, "GS2", "HPL3"): 6, (W, "WTP2", "HPL3"): 4})
    s.depends("WIRF", {"crew-WIRF": 5, (P, "GPP", "WIRF"): 3, (H, "HPL1", "WIRF"): 2})
    s.depends("PIRF", {"crew-PIRF": 5, (P, "GPP", "PIRF"): 2, (P, "CHP1", "PIRF"): 2,
                       (H, "HPL1", "PIRF"): 1})
    s.depends("GIRF", {"crew-GIRF": 5, (P, "SPP", "GIRF"): 3, (H, "HPL2", "GIRF"): 2})

    shares = {P: 4, W: 3, H: 2, G: 1}
    for z in zones:
        feeds = {}
        for sector, pairs in ((P, power), (W, water), (H, heat), (G, gas)):
            srcs = [a for a, b in pairs if b == z]
            for a in srcs:
                feeds[(sector, a, z)] = Fraction(shares[sector], len(srcs))
        s.depends(("zone", z), feeds)
    return s


def conceptual() -> Scenario:
    s = Scenario("conceptual-iun", "Conceptual interdependent urban network: gas-fired power "
                 "plant, CHP, water treatment, gas source, heating plant, power repair and two "
                 "customer areas, fed by gas import, raw water and repair crews; 43 processes, "
                 "synthetic dependency weights.")
    s.network("power", [(1, 2), (2, 3), (3, 4), (4, 8), (5, 3), (2, 6), (1, 7)],
              {"PP1": 1, "GS": 2, "WTP": 3, "CD1": 4, "CHP": 5, "HPL": 6, "RP": 7, "CD2": 8})
    s.network("gas", [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6)],
              {"GS": 1, "PP1": 2, "CHP": 3, "HPL": 4, "CD1": 5, "CD2": 6})
    s.network("water", [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6)],
              {"WTP": 1, "PP1": 2, "CHP": 3, "HPL": 4, "CD1": 5, "CD2": 6})
    s.network("heat", [(1, 2), (1, 3), (1, 4), (1, 5), (2, 6)],
              {"HPL": 1, "CD1": 2, "WTP": 3, "RP": 4, "CHP": 5, "CD2": 6})
    s.network("transport", [(1, 2), (1, 3), (1, 4), (1, 5)],
              {"RP": 1, "PP1": 2, "CHP": 3, "GS": 4, "WTP": 5})

    for fac, label, sector in [("PP1", "Power plant PP1 generates power", "power"),
                               ("CHP", "CHP co-generates power and heat", "power"),
                               ("WTP", "Water treatment plant WTP operates", "water"),
                               ("GS", "Gas source GS supplies gas", "gas"),
                               ("HPL", "Heating plant HPL produces heat", "heat"),
                               ("RP", "Power repair facility RP is staffed", "service")]:
        s.process(fac, label, sector, facility=fac, qof_fraction=FACILITY_QOF)
    # outside inputs; without them the facilities only feed each other and any loss
    # around that loop has no steady state except total collapse
    for key, label, sector in [("import-GS", "Receive natural gas at the GS city gate", "gas"),
                               ("intake-WTP", "Draw raw water into WTP", "water"),
                               ("crew-RP", "Power repair crews are on duty", "service")]:
        s.process(key, label, sector, resources=[key.split("-")[1]])
    P, W, G, H, T = "power", "water", "gas", "heat", "transport"
    flows = {P: [("PP1", "GS"), ("PP1", "WTP"), ("PP1", "RP"), ("PP1", "CD1"),
                 ("CHP", "CD1"), ("CHP", "WTP"), ("CHP", "GS"), ("PP1", "CD2"), ("CHP", "CD2")],
             G: [("GS", "PP1"), ("GS", "CHP"), ("GS", "HPL"), ("GS", "CD1"), ("GS", "CD2")],
             W: [("WTP", "PP1"), ("WTP", "CHP"), ("WTP", "HPL"), ("WTP", "CD1"), ("WTP", "CD2")],
             H: [("HPL", "CD1"), ("CHP", "CD1"), ("HPL", "WTP"), ("HPL", "CD2")],
             T: [("RP", "PP1"), ("RP", "CHP"), ("RP", "WTP")]}
    for sector, pairs in flows.items():
        for a, b in pairs:
            s.delivery(sector, a, b, "Dispatch" if sector == T else "Supply")
    for cd in ("CD1", "CD2"):
        for sector in (P, G, W, H):
            s.process((cd, sector), f"{sector.capitalize()} demand of {cd} is met", "service",
                      "service", facility=cd)
    assert len(s.doc["processes"]) == 43, len(s.doc["processes"])

    for p in s.doc["processes"]:
        if p["kind"] == "delivery":
            s.depends((p["sector"], p["source"], p["destination"]), {p["source"]: 1})
    s.depends("PP1", {(G, "GS", "PP1"): 6, (W, "WTP", "PP1"): 2, (T, "RP", "PP1"): 2})
    s.depends("CHP", {(G, "GS", "CHP"): 6, (W, "WTP", "CHP"): 2, (T, "RP", "CHP"): 2})
    s.depends("WTP", {"intake-WTP": 4, (P, "PP1", "WTP"): 2, (P, "CHP", "WTP"): 2,
                      (H, "HPL", "WTP"): 1, (T, "RP", "WTP"): 1})
    s.depends("GS", {"import-GS": 5, (P, "PP1", "GS"): 2, (P, "CHP", "GS"): 3})
    s.depends("HPL", {(G, "GS", "HPL"): 7, (W, "WTP", "HPL"): 3})
    s.depends("RP", {"crew-RP": 5, (P, "PP1", "RP"): 5})
    for cd in ("CD1", "CD2"):
        for sector in (P, G, W, H):
            srcs = [a for a, b in flows[sector] if b == cd]
            s.depends((cd, sector), {(sector, a, cd): 1 for a in srcs})
    return s


def main(argv=None):
    out = Path(argv[0]) if argv else OUT
    out.mkdir(parents=True, exist_ok=True)
    for make in (conceptual, synthetic):
        sc = make()
        path = out / f"{sc.doc['name']}.json"
        sc.write(path)
        res = build(load_scenario(path))
        g = res.graph
        print(f"{path.name}: {g.n_original} processes, {len(g.original_edges())} dependencies, "
              f"{len(res.derived)} derived from shared routes")


if __name__ == "__main__":
    main(sys.argv[1:])
