"""Hot-loop kernels with two interchangeable backends.

``numba`` (default) compiles the loop kernels in :mod:`._nb`; ``numpy`` runs the
vectorised fallbacks in :mod:`._np`.  Pick one with the ``HFROBUST_BACKEND``
environment variable or temporarily with :func:`use_backend`.  If numba cannot
be imported the numpy backend is used.
"""

from __future__ import annotations

import contextlib
import os
import warnings
from typing import NamedTuple

import numpy as np

from . import _np
from ._constants import (BETWEENNESS, DEGREE, EIGENVECTOR, IN_DEGREE, OUT_DEGREE, PAGERANK,
                         QUANT, WOD)

BACKEND_ENV = "HFROBUST_BACKEND"

try:
    from . import _nb
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None

__all__ = [
    "BETWEENNESS", "DEGREE", "EIGENVECTOR", "IN_DEGREE", "OUT_DEGREE", "PAGERANK", "WOD", "QUANT",
    "RunParams", "active_backend", "available_backends", "use_backend",
    "descendants", "cascade", "component_sizes", "snapshot", "centrality", "run", "run_many",
]


def available_backends() -> list[str]:
    return ["numba", "numpy"] if _nb is not None else ["numpy"]


def _initial_backend() -> str:
    want = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {want!r}")
    if want == "numba" and _nb is None:
        warnings.warn("numba is not importable; falling back to the numpy backend")
        return "numpy"
    return want


_backend = _initial_backend()


def active_backend() -> str:
    return _backend


@contextlib.contextmanager
def use_backend(name: str):
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available")
    old, _backend = _backend, name
    try:
        yield
    finally:
        _backend = old


class RunParams(NamedTuple):
    qof: np.ndarray
    accept: np.ndarray
    partial: bool
    fixed_step: bool
    step: float
    select_mode: int  # 0 random, 1 static ranking, 2 adaptive
    ranking: np.ndarray
    basis: int
    stop_at: int


def descendants(topo, alive, src):
    if _backend == "numba":
        return _nb.descendants(src, topo.out_ptr, topo.out_idx, alive)
    return _np.descendants(topo, alive, src)


def cascade(topo, qof, alive, scale, degr, att, remove_attacked):
    """Mutates the state vectors; returns removed indices (attacked node excluded)."""
    if _backend == "numba":
        buf = np.empty(topo.n, dtype=np.int64)
        k = _nb.cascade(att, remove_attacked, topo.out_ptr, topo.out_idx, topo.out_w,
                        topo.in_ptr, topo.in_idx, topo.in_w, topo.in0, topo.out0, qof,
                        alive, scale, degr, buf)
        return buf[:k].copy()
    return _np.cascade(topo, qof, alive, scale, degr, att, remove_attacked)


def component_sizes(topo, alive):
    if _backend == "numba":
        return _nb.component_sizes(topo.out_ptr, topo.out_idx, alive)
    return _np.component_sizes(topo, alive)


def snapshot(topo, alive, scale):
    """(lcc, ncc, fr, sr) of the residual graph."""
    if _backend == "numba":
        out = np.empty(4)
        _nb.snapshot(topo.out_ptr, topo.out_idx, topo.out_w, topo.total_out0, alive, scale, out)
        return int(out[0]), int(out[1]), float(out[2]), float(out[3])
    return _np.snapshot(topo, alive, scale)


def centrality(topo, code, alive, scale):
    if _backend == "numba":
        return _nb.centrality(code, topo.out_ptr, topo.out_idx, topo.out_w,
                              topo.in_ptr, topo.in_idx, alive, scale)
    return _np.centrality(topo, code, alive, scale)


def run(topo, p: RunParams, alive, scale, degr, hits, steps, uniforms, max_stages):
    """One staged attack from the given state.

    Returns (metrics[stages+1, 4], attacked[stages], removed_stage[n],
    removal_order[removals], status).
    """
    n = topo.n
    metrics = np.zeros((max_stages + 1, 4))
    attacked = np.empty(max(max_stages, 1), dtype=np.int64)
    removed_stage = np.full(n, -1, dtype=np.int64)
    removal_order = np.empty(n, dtype=np.int64)
    if _backend == "numba":
        stages, nrem, status = _nb.run(
            topo.out_ptr, topo.out_idx, topo.out_w, topo.in_ptr, topo.in_idx, topo.in_w,
            topo.in0, topo.out0, p.qof, p.accept, topo.total_out0,
            alive, scale, degr, hits, p.partial, p.fixed_step, p.step, steps,
            p.select_mode, p.ranking, p.basis, uniforms, p.stop_at, max_stages,
            metrics, attacked, removed_stage, removal_order)
    else:
        stages, nrem, status = _np.run(topo, p, alive, scale, degr, hits, steps, uniforms,
                                       max_stages, metrics, attacked, removed_stage, removal_order)
    return (metrics[:stages + 1], attacked[:stages], removed_stage,
            removal_order[:nrem], status)


def run_many(topo, p: RunParams, steps2d, uniforms2d, max_stages):
    """Independent runs from the intact graph, one per row of ``uniforms2d``.

    Returns (metrics[trials, max_stages+1, 4], lengths[trials], status[trials]).
    """
    trials = uniforms2d.shape[0]
    metrics = np.zeros((trials, max_stages + 1, 4))
    lengths = np.zeros(trials, dtype=np.int64)
    status = np.zeros(trials, dtype=np.int64)
    if _backend == "numba":
        _nb.run_many(topo.out_ptr, topo.out_idx, topo.out_w, topo.in_ptr, topo.in_idx, topo.in_w,
                     topo.in0, topo.out0, p.qof, p.accept, topo.total_out0,
                     p.partial, p.fixed_step, p.step, steps2d,
                     p.select_mode, p.ranking, p.basis, uniforms2d,
                     p.stop_at, max_stages, metrics, lengths, status)
    else:
        _np.run_many(topo, p, steps2d, uniforms2d, max_stages, metrics, lengths, status)
    return metrics, lengths, status
