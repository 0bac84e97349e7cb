"""Multi-start shooting for exp_{xbar}(p0) = x.

Solves the boundary problem with damped Gauss-Newton iterations, batched with
numpy over (targets x starts), and reduces the solutions to clusters of
initial covectors.  The cluster structure carries the value function, the
minimizer multiplicity (singular-set evidence), and conjugate-point flags.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import UnresolvedTargetError
from .flow import exp_map_batch
from .frames import SubRiemannianSystem, hamiltonian_batch

RESIDUAL_TOL = 1e-6
CONVERGE_TOL = 1e-10
CLUSTER_RADIUS = 1e-3
COST_TIE_TOL = 1e-5
START_RADIUS_FACTORS = (0.5, 1.0, 2.0, 4.0)
DEFAULT_STARTS = 32
DEFAULT_STEPS = 200
MAX_ITER = 200
_FD_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class MinimizerCandidate:
    p0: np.ndarray
    residual: float
    cost: float
    conjugate_sigma: float
    terminal_p: np.ndarray
    weight: int = 1          # number of starts that landed in this cluster


@dataclass(frozen=True, eq=False)
class MinimizerSet:
    target: np.ndarray
    candidates: list          # cluster representatives, sorted by cost
    value: float
    multiplicity: int

    def best(self) -> MinimizerCandidate:
        return self.candidates[0]

    def optimal_candidates(self):
        tol = COST_TIE_TOL * max(1.0, self.value)
        return [c for c in self.candidates if c.cost <= self.value + tol]

    def selected(self) -> MinimizerCandidate:
        """Cost-optimal candidate, ties broken by lexicographically smallest p0."""
        opt = self.optimal_candidates()
        return min(opt, key=lambda c: tuple(c.p0))


# ---------------------------------------------------------------------------
# batched damped Gauss-Newton core
# ---------------------------------------------------------------------------


def _endpoints(system, P, steps, box_scale=2.0):
    X1, P1, valid = exp_map_batch(system.frame, system.base, P, steps=steps,
                                  box_scale=box_scale)
    return X1, P1, valid


def _fd_jacobian_endpoints(system, P, steps, box_scale=2.0):
    """Endpoint map and its forward-difference Jacobian, one batch pass."""
    B, n = P.shape
    block = np.repeat(P[:, None, :], n + 1, axis=1)
    for j in range(n):
        block[:, j + 1, j] += _FD_EPS
    X1, P1, valid = _endpoints(system, block.reshape(-1, n), steps, box_scale)
    X1 = X1.reshape(B, n + 1, n)
    P1 = P1.reshape(B, n + 1, n)
    valid = valid.reshape(B, n + 1)
    E0 = X1[:, 0, :]
    J = np.transpose(X1[:, 1:, :] - X1[:, 0:1, :], (0, 2, 1)) / _FD_EPS
    return E0, P1[:, 0, :], J, np.all(valid, axis=1)


def _lm_solve(system, targets, P0, steps, max_iter=MAX_ITER, tol=CONVERGE_TOL):
    """Damped least-squares on a flat batch; returns solution data per index.

    targets, P0: (B, n).  Returns dict of arrays: p0, residual, J, terminal_p,
    valid.
    """
    B, n = P0.shape
    P = P0.copy()
    lam = np.full(B, 1e-3)
    res = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)

    E0, P1, J, valid = _fd_jacobian_endpoints(system, P, steps)
    R = E0 - targets
    res = np.linalg.norm(R, axis=1)
    res[~valid] = np.inf
    active &= valid
    stale = np.zeros(B, dtype=bool)

    for it in range(max_iter):
        active &= (res >= tol) & (lam <= 1e10) & np.isfinite(res)
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        JtJ = np.einsum("bij,bik->bjk", J[idx], J[idx])
        JtR = np.einsum("bij,bi->bj", J[idx], R[idx])
        A = JtJ + lam[idx][:, None, None] * np.eye(n)
        try:
            d = -np.linalg.solve(A, JtR[..., None])[..., 0]
        except np.linalg.LinAlgError:
            d = -np.stack([np.linalg.lstsq(A[b], JtR[b], rcond=None)[0]
                           for b in range(len(idx))])
        Ptry = P[idx] + d
        Etry, P1try, vtry = _endpoints(system, Ptry, steps)
        rtry = np.linalg.norm(Etry - targets[idx], axis=1)
        rtry[~vtry] = np.inf
        better = rtry < res[idx]
        acc = idx[better]
        P[acc] = Ptry[better]
        R[acc] = Etry[better] - targets[acc]
        res[acc] = rtry[better]
        P1[acc] = P1try[better]
        lam[acc] = np.maximum(lam[acc] * 0.3, 1e-14)
        stale[acc] = True
        rej = idx[~better]
        lam[rej] *= 6.0

        # refresh Jacobians lazily: rejected steps and every other acceptance
        need = np.zeros(B, dtype=bool)
        need[rej] = True
        if it % 2 == 1:
            need[acc] = True
        need &= active & (res >= tol)
        ridx = np.nonzero(need)[0]
        if ridx.size:
            _, _, Jr, vr = _fd_jacobian_endpoints(system, P[ridx], steps)
            J[ridx] = Jr
            stale[ridx] = False
            active[ridx] &= vr

    # ensure reported Jacobians (conjugate sigmas) match the final covectors
    fin = np.nonzero(stale & np.isfinite(res) & (res <= 10 * RESIDUAL_TOL))[0]
    if fin.size:
        _, _, Jf, _ = _fd_jacobian_endpoints(system, P[fin], steps)
        J[fin] = Jf
    return {"p0": P, "residual": res, "J": J, "terminal_p": P1,
            "valid": np.isfinite(res)}


def _draw_starts(rng, n, starts, scale):
    """Uniform directions on the covector sphere at radii {0.5,1,2,4} x scale."""
    dirs = rng.normal(size=(starts, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.array([START_RADIUS_FACTORS[k % len(START_RADIUS_FACTORS)]
                      for k in range(starts)]) * scale
    return dirs * radii[:, None]


def _cluster(cands, radius=CLUSTER_RADIUS):
    """Greedy agglomeration; representatives keep min (cost, lexicographic p0)."""
    order = sorted(range(len(cands)),
                   key=lambda i: (cands[i]["cost"], tuple(cands[i]["p0"])))
    reps = []
    for i in order:
        c = cands[i]
        for rep in reps:
            if np.linalg.norm(c["p0"] - rep["p0"]) <= radius:
                rep["weight"] += 1
                break
        else:
            reps.append(dict(c, weight=1))
    return reps


def shoot_batch(system: SubRiemannianSystem, targets, starts=DEFAULT_STARTS,
                seed=0, steps=DEFAULT_STEPS, residual_tol=RESIDUAL_TOL,
                cluster_radius=CLUSTER_RADIUS, extra_starts=None):
    """Shoot at many targets at once; returns a list of MinimizerSet or None.

    ``extra_starts`` (T, k, n) prepends deterministic initial covectors per
    target (a doubled chart-displacement guess is always included).
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    T, n = targets.shape
    rng = np.random.default_rng(seed)
    widths = system.frame.chart_box[:, 1] - system.frame.chart_box[:, 0]
    scale = 0.5 * float(np.min(widths))

    P0 = np.empty((T, 0, n))
    guess = 2.0 * (targets - system.base)          # exact for Euclidean frames
    P0 = np.concatenate([P0, guess[:, None, :]], axis=1)
    if extra_starts is not None:
        P0 = np.concatenate([P0, np.asarray(extra_starts, dtype=float)], axis=1)
    rand = np.stack([_draw_starts(rng, n, starts, scale) for _ in range(T)])
    P0 = np.concatenate([P0, rand], axis=1)
    S = P0.shape[1]

    flat_targets = np.repeat(targets, S, axis=0)
    sol = _lm_solve(system, flat_targets, P0.reshape(-1, n), steps)

    base = np.asarray(system.base, dtype=float)
    out = []
    for t in range(T):
        sl = slice(t * S, (t + 1) * S)
        p0s = sol["p0"][sl]
        res = sol["residual"][sl]
        Js = sol["J"][sl]
        p1s = sol["terminal_p"][sl]
        ok = np.isfinite(res) & (res <= residual_tol) & sol["valid"][sl]
        if not np.any(ok):
            out.append(None)
            continue
        cost = 2.0 * hamiltonian_batch(system.frame, np.broadcast_to(
            base, p0s[ok].shape), p0s[ok])
        sigmas = np.linalg.svd(Js[ok], compute_uv=False)[:, -1]
        raw = [{"p0": p0s[ok][k], "residual": float(res[ok][k]),
                "cost": float(cost[k]), "sigma": float(sigmas[k]),
                "terminal_p": p1s[ok][k]}
               for k in range(int(np.sum(ok)))]
        reps = _cluster(raw, cluster_radius)
        cands = [MinimizerCandidate(p0=r["p0"], residual=r["residual"],
                                    cost=r["cost"], conjugate_sigma=r["sigma"],
                                    terminal_p=r["terminal_p"],
                                    weight=r["weight"])
                 for r in reps]
        cands.sort(key=lambda c: (c.cost, tuple(c.p0)))
        value = cands[0].cost
        tol = COST_TIE_TOL * max(1.0, value)
        mult = sum(1 for c in cands if c.cost <= value + tol)
        out.append(MinimizerSet(target=targets[t], candidates=cands,
                                value=value, multiplicity=mult))
    return out


def shoot(system: SubRiemannianSystem, x_target, starts=DEFAULT_STARTS, seed=0,
          **kw) -> MinimizerSet:
    """Solve exp_{xbar}(p0) = x_target; raises UnresolvedTargetError on failure."""
    x_target = np.asarray(x_target, dtype=float)
    if np.allclose(x_target, system.base):
        raise ValueError("target coincides with the base point")
    mset = shoot_batch(system, x_target[None, :], starts=starts, seed=seed,
                       **kw)[0]
    if mset is None:
        raise UnresolvedTargetError(
            f"no feasible shooting candidate for target {x_target} "
            f"({starts} starts); raise the start count")
    return mset


def value_function(system: SubRiemannianSystem, x, **kw) -> float:
    """V(x) = d_SR(xbar, x)^2, the minimal feasible Bolza cost; V(xbar) = 0."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x - system.base) == 0.0:
        return 0.0
    return shoot(system, x, **kw).value


def gradient_from_shooting(system: SubRiemannianSystem, x, sigma_ratio=1e-6,
                           **kw):
    """zeta = 2 p(1) at a differentiability point, else the covector list.

    Returns an n-vector when the target has a unique minimizer cluster away
    from conjugacy, otherwise the list of 2 p(1) over cost-optimal clusters
    (elements of the limiting subdifferential).
    """
    mset = shoot(system, x, **kw)
    opt = mset.optimal_candidates()
    best = mset.best()
    Jnorm = np.linalg.norm(best.terminal_p) + 1.0
    if mset.multiplicity == 1 and best.conjugate_sigma > sigma_ratio * Jnorm:
        return 2.0 * best.terminal_p
    return [2.0 * c.terminal_p for c in opt]


def zeta_at(system: SubRiemannianSystem, x, **kw) -> np.ndarray:
    """Single selected subdifferential element 2 p(1) (tie-break rule)."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x - system.base) == 0.0:
        return np.zeros(system.frame.dim)
    return 2.0 * shoot(system, x, **kw).selected().terminal_p


def first_conjugate_time(system: SubRiemannianSystem, p0, Tmax: float, **kw):
    from . import flow
    p0 = np.asarray(p0, dtype=float)
    H = hamiltonian_batch(system.frame, np.asarray(system.base)[None, :],
                          p0[None, :])[0]
    if H == 0.0:
        raise ValueError("need H(xbar, p0) != 0")
    return flow.first_conjugate_time(system.frame, system.base, p0, Tmax, **kw)


# ---------------------------------------------------------------------------
# warm-started refinement (used by the feedback integrator)
# ---------------------------------------------------------------------------


def refine_batch(system, targets, P0, steps=60, tol=1e-8, max_iter=10,
                 J=None):
    """Newton-polish a batch of shooting solutions from warm starts.

    A cached endpoint Jacobian ``J`` (B, n, n) may be supplied and is only
    recomputed when progress stalls.  Returns (P, res, J, P1, converged).
    """
    targets = np.asarray(targets, dtype=float)
    P = np.array(P0, dtype=float)
    B, n = P.shape
    E0, P1, valid = _endpoints(system, P, steps)
    R = E0 - targets
    res = np.linalg.norm(R, axis=1)
    res[~valid] = np.inf
    if J is None:
        _, _, J, _ = _fd_jacobian_endpoints(system, P, steps)
        J = J.copy()
    else:
        J = np.array(J)

    for it in range(max_iter):
        idx = np.nonzero(res > tol)[0]
        if idx.size == 0:
            break
        JtJ = np.einsum("bij,bik->bjk", J[idx], J[idx])
        JtR = np.einsum("bij,bi->bj", J[idx], R[idx])
        A = JtJ + 1e-12 * np.eye(n)
        d = -np.linalg.solve(A, JtR[..., None])[..., 0]
        Ptry = P[idx] + d
        Etry, P1try, vtry = _endpoints(system, Ptry, steps)
        rtry = np.linalg.norm(Etry - targets[idx], axis=1)
        rtry[~vtry] = np.inf
        better = rtry < res[idx]
        acc = idx[better]
        P[acc] = Ptry[better]
        R[acc] = Etry[better] - targets[acc]
        res[acc] = rtry[better]
        P1[acc] = P1try[better]
        stalled = idx[~better]
        if stalled.size:
            # stale Jacobian: refresh it for the stalled subset
            _, P1s, Js, vs = _fd_jacobian_endpoints(system, P[stalled], steps)
            J[stalled] = Js
            P1[stalled] = P1s
    return P, res, J, P1, res <= tol


# ---------------------------------------------------------------------------
# batch-mode CSV interface
# ---------------------------------------------------------------------------


def run_batch_csv(system, targets_path, out_path, starts=DEFAULT_STARTS,
                  seed=0, **kw):
    """Read target points (x1..xn rows), write x1..xn,V,multiplicity,sigma_min,zeta1..zetan."""
    n = system.frame.dim
    targets = []
    with open(targets_path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith(("#", "x")):
                continue
            targets.append([float(v) for v in row[:n]])
    targets = np.asarray(targets, dtype=float)
    msets = shoot_batch(system, targets, starts=starts, seed=seed, **kw)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i+1}" for i in range(n)]
                   + ["V", "multiplicity", "sigma_min"]
                   + [f"zeta{i+1}" for i in range(n)])
        for tgt, mset in zip(targets, msets):
            if mset is None:
                w.writerow([f"{v:.17g}" for v in tgt]
                           + ["nan", "0", "nan"] + ["nan"] * n)
                continue
            zeta = 2.0 * mset.selected().terminal_p
            w.writerow([f"{v:.17g}" for v in tgt]
                       + [f"{mset.value:.17g}", str(mset.multiplicity),
                          f"{mset.best().conjugate_sigma:.17g}"]
                       + [f"{v:.17g}" for v in zeta])
    return msets
