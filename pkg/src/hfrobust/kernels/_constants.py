"""Shared numeric settings for both kernel backends."""

TOL = 1e-12  # cascade convergence on per-node scale factors
MAX_PASSES = 100_000
QUANT = 1e9  # centrality scores are compared after rounding to 1e-9
MAX_POWER_ITER = 1000
POWER_TOL = 1e-9
DAMPING = 0.85

WOD, BETWEENNESS, DEGREE, IN_DEGREE, OUT_DEGREE, EIGENVECTOR, PAGERANK = range(7)
