"""Brute-force distance oracle on a lattice reachability graph.

Edges are single-field midpoint steps of time h (unit control), snapped to
the nearest lattice node; Dijkstra from the base node then bounds the
sub-Riemannian distance from above.  This is deliberately independent of the
Hamiltonian shooting machinery and serves as its cross-check.  The error
bound c * sqrt(h) is an empirical calibration fitted on Euclidean frames of
the same dimension, with a 2x margin; staircase (single-field) paths do not
converge to mixed-control lengths, so the bound is loose by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .errors import ConfigurationError, ConnectivityError
from .frames import SubRiemannianSystem, builtin_system


@dataclass(eq=False)
class ReachGraph:
    system: SubRiemannianSystem
    h: float
    box: np.ndarray            # (n, 2)
    shape: tuple               # nodes per axis
    matrix: sparse.csr_matrix  # edge costs
    base_index: int
    _dist: np.ndarray = None   # lazy Dijkstra distances from base

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def node_coords(self, index):
        idx = np.unravel_index(index, self.shape)
        return self.box[:, 0] + np.asarray(idx, dtype=float).T * self.h

    def snap_index(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.round((x - self.box[:, 0]) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            raise ConfigurationError(f"target {x} snaps outside the oracle box")
        return int(np.ravel_multi_index(tuple(idx.T), self.shape))

    def distances(self) -> np.ndarray:
        if self._dist is None:
            self._dist = dijkstra(self.matrix, directed=True,
                                  indices=self.base_index)
        return self._dist


def _snap_displacement(delta, h):
    """Round displacements to lattice multiples, ties away from zero."""
    return np.sign(delta) * np.floor(np.abs(delta) / h + 0.5)


def build_graph(system: SubRiemannianSystem, h: float, box=None) -> ReachGraph:
    """Lattice graph with +-h single-field midpoint-step edges."""
    if h <= 0:
        raise ConfigurationError("grid spacing h must be positive")
    frame = system.frame
    n = frame.dim
    if box is None:
        box = frame.chart_box
    box = np.asarray(box, dtype=float)
    if box.shape != (n, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ConfigurationError("oracle box must be a nonempty (n, 2) table")

    counts = np.round((box[:, 1] - box[:, 0]) / h).astype(int) + 1
    if np.any(counts < 2):
        raise ConfigurationError("box too small for spacing h")
    shape = tuple(int(c) for c in counts)
    axes = [box[k, 0] + h * np.arange(shape[k]) for k in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)   # (N, n)
    N = X.shape[0]
    node_idx = np.stack([g.ravel() for g in np.meshgrid(
        *[np.arange(s) for s in shape], indexing="ij")], axis=-1)

    rows, cols, costs = [], [], []
    F = frame.fields(X)                                  # (N, m, n)
    for i in range(frame.rank):
        for sgn in (1.0, -1.0):
            mid = X + 0.5 * h * sgn * F[:, i, :]
            Fm = frame.fields(mid)[:, i, :]
            delta = h * sgn * Fm
            steps = _snap_displacement(delta, h).astype(int)
            tgt = node_idx + steps
            ok = np.all((tgt >= 0) & (tgt < counts), axis=1)
            moved = np.any(steps != 0, axis=1)
            ok &= moved
            src = np.nonzero(ok)[0]
            dst = np.ravel_multi_index(tuple(tgt[ok].T), shape)
            rows.append(src)
            cols.append(dst)
            costs.append(np.full(src.shape, h))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    costs = np.concatenate(costs)
    mat = sparse.coo_matrix((costs, (rows, cols)), shape=(N, N)).tocsr()
    # duplicate edges collapse by summation in coo->csr; rebuild with min cost
    mat.data = np.minimum(mat.data, h)

    base_idx = np.round((np.asarray(system.base) - box[:, 0]) / h).astype(int)
    base_index = int(np.ravel_multi_index(tuple(base_idx), shape))
    return ReachGraph(system=system, h=h, box=box, shape=shape, matrix=mat,
                      base_index=base_index)


_CALIBRATION_CACHE = {}


def calibrate_error_constant(n: int, h: float, box=None, n_targets=50,
                             seed=20240717) -> float:
    """Fit c so that |d_hat - d| <= c sqrt(h) holds with 2x margin on Euclidean."""
    key = (n, float(h), None if box is None else tuple(map(tuple, box)))
    if key in _CALIBRATION_CACHE:
        return _CALIBRATION_CACHE[key]
    system = builtin_system(f"euclidean-{n}")
    if box is None:
        box = np.array([[-1.0, 1.0]] * n)
    graph = build_graph(system, h, box)
    dist = graph.distances()
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n_targets):
        x = rng.uniform(box[:, 0], box[:, 1])
        k = graph.snap_index(x)
        xk = graph.node_coords(k)
        errs.append(abs(dist[k] - np.linalg.norm(xk)))
    c = 2.0 * float(np.max(errs)) / np.sqrt(h)
    _CALIBRATION_CACHE[key] = c
    return c


def oracle_distance(graph: ReachGraph, target):
    """(d_hat, error_bound) for the snapped target node."""
    k = graph.snap_index(target)
    d = float(graph.distances()[k])
    if not np.isfinite(d):
        raise ConnectivityError(
            f"target {np.asarray(target)} unreachable on the h={graph.h} graph; "
            "h is too coarse")
    c = calibrate_error_constant(graph.system.frame.dim, graph.h, graph.box)
    return d, c * np.sqrt(graph.h)


def oracle_value(graph: ReachGraph, target) -> float:
    """Squared oracle distance (value-function estimate)."""
    d, _ = oracle_distance(graph, target)
    return d * d


def hj_residual(system: SubRiemannianSystem, V, x, fd_step: float = 1e-4):
    """r(x) = -V(x)/2 + H(x, grad V(x)/2) with a central-difference gradient.

    Meaningful only where V is differentiable (single minimizer cluster).
    ``V`` is a callable accepting a point.
    """
    x = np.asarray(x, dtype=float)
    n = system.frame.dim
    grad = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = fd_step
        grad[k] = (V(x + e) - V(x - e)) / (2 * fd_step)
    from .frames import hamiltonian
    return -0.5 * V(x) + hamiltonian(system.frame, x, 0.5 * grad)


def grid_values(graph: ReachGraph):
    """All node coordinates with squared distances (inf where unreachable)."""
    dist = graph.distances()
    coords = graph.node_coords(np.arange(graph.n_nodes))
    return coords, dist ** 2


def write_value_grid_csv(path, graph: ReachGraph, provenance="oracle"):
    """CSV export x1..xn,V,provenance for every reachable node."""
    coords, vals = grid_values(graph)
    n = graph.system.frame.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i+1}" for i in range(n)] + ["V", "provenance"])
        for x, v in zip(coords, vals):
            if not np.isfinite(v):
                continue
            w.writerow([f"{c:.17g}" for c in x] + [f"{v:.17g}", provenance])
