"""Compare the numba and numpy kernel backends on the bundled synthetic scenario.

    python3 benchmarks/bench_backends.py [--trials N] [--repeat R]

Both backends must agree: integer metrics exactly, FR/SR to 1e-9 (their cascade
fixed points differ by a few ulps).  The script exits 1 otherwise.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from hfrobust import kernels
from hfrobust.builder import build_graph, scenario_path
from hfrobust.centrality import CentralityBasis, score_array
from hfrobust.experiments import CampaignSpec, run_campaign
from hfrobust.percolation import AttackPlan


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    g = build_graph(scenario_path("synthetic-iun"))
    cases = {
        "campaign complete-random": lambda: run_campaign(
            g, CampaignSpec(AttackPlan(), trials=args.trials), jobs=1).values,
        "campaign partial-random": lambda: run_campaign(
            g, CampaignSpec(AttackPlan(strength="partial"), trials=args.trials // 5), jobs=1).values,
        "betweenness": lambda: score_array(g, CentralityBasis.BETWEENNESS),
    }
    backends = kernels.available_backends()
    print(f"graph: {g.n_original} nodes; backends: {', '.join(backends)}")
    ok = True
    for name, fn in cases.items():
        results = {}
        for b in backends:
            with kernels.use_backend(b):
                fn()  # warm-up (JIT compilation for numba)
                results[b] = _best(fn, args.repeat)
        line = "  ".join(f"{b} {t * 1e3:9.1f} ms" for b, (t, _) in results.items())
        if len(results) == 2:
            (tn, vn), (tp, vp) = results["numba"], results["numpy"]
            same = np.allclose(vn, vp, rtol=0, atol=1e-9)
            if name.startswith("campaign"):
                same &= np.array_equal(vn[..., :2], vp[..., :2])
            ok &= same
            line += f"  speedup {tp / tn:6.1f}x  {'match' if same else 'MISMATCH'}"
        print(f"{name:26s} {line}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
