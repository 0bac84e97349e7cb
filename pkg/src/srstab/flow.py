"""Normal-extremal Hamiltonian flow, exponential map, and local optimality.

The Hamiltonian system integrated here is

    xdot = sum_i <p, f_i(x)> f_i(x)
    pdot = -sum_i <p, f_i(x)> df_i(x)^T p

with the classical fourth-order one-step method on a fixed grid.  Batched
integration over many initial covectors is the workhorse for the shooting
solver, grid sweeps, and closed-loop feedback simulation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EscapeError
from .frames import Frame, hamiltonian_batch

DEFAULT_STEPS = 1000
CONJUGATE_SIGMA_RATIO = 1e-6
_RHS_JAC_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class Extremal:
    """A time-sampled normal extremal psi(t) = (x(t), p(t))."""

    times: np.ndarray      # (K+1,)
    states: np.ndarray     # (K+1, 2n)
    energy0: float
    dim: int

    @property
    def x(self):
        return self.states[:, : self.dim]

    @property
    def p(self):
        return self.states[:, self.dim:]

    def state_at(self, k: int):
        return self.states[k]


def hamiltonian_rhs_batch(frame: Frame, Y: np.ndarray) -> np.ndarray:
    """Batched right-hand side; Y has shape (..., 2n)."""
    if frame.rhs is not None:
        return frame.rhs(Y)
    n = frame.dim
    X = Y[..., :n]
    P = Y[..., n:]
    F = frame.fields(X)
    DF = frame.jacobians(X)
    U = np.einsum("...k,...ik->...i", P, F)
    dX = np.einsum("...i,...ik->...k", U, F)
    dP = -np.einsum("...i,...ijk,...j->...k", U, DF, P)
    return np.concatenate([dX, dP], axis=-1)


def hamiltonian_rhs(frame: Frame, x, p):
    """(xdot, pdot) at a single state; raises outside the chart."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    frame.require_inside(x)
    d = hamiltonian_rhs_batch(frame, np.concatenate([x, p])[None, :])[0]
    return d[: frame.dim], d[frame.dim:]


def _rk4_step(frame: Frame, Y: np.ndarray, h: float) -> np.ndarray:
    k1 = hamiltonian_rhs_batch(frame, Y)
    k2 = hamiltonian_rhs_batch(frame, Y + 0.5 * h * k1)
    k3 = hamiltonian_rhs_batch(frame, Y + 0.5 * h * k2)
    k4 = hamiltonian_rhs_batch(frame, Y + h * k3)
    return Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_batch(frame: Frame, Y0: np.ndarray, T: float, steps: int,
                    box_scale: float = 2.0):
    """Integrate a batch of extremals; returns (Y_final, valid, exit_step).

    No error is raised: trajectories whose base point leaves the chart box
    scaled by ``box_scale`` (or blows up) are flagged invalid and frozen.
    """
    n = frame.dim
    lo = frame.chart_box[:, 0] * box_scale
    hi = frame.chart_box[:, 1] * box_scale
    Y = np.array(Y0, dtype=float)
    h = T / steps
    valid = np.ones(Y.shape[:-1], dtype=bool)
    exit_step = np.full(Y.shape[:-1], steps + 1, dtype=int)
    for k in range(steps):
        Ynew = _rk4_step(frame, Y, h)
        X = Ynew[..., :n]
        ok = np.all(np.isfinite(Ynew), axis=-1)
        ok &= np.all((X >= lo) & (X <= hi), axis=-1)
        newly_bad = valid & ~ok
        exit_step[newly_bad] = k + 1
        valid &= ok
        Y = np.where(valid[..., None], Ynew, Y)
    return Y, valid, exit_step


def integrate_extremal(frame: Frame, x0, p0, T: float, steps: int = DEFAULT_STEPS,
                       clip_to_exit: bool = False,
                       box_scale: float = 1.0) -> Extremal:
    """Integrate one normal extremal on a uniform grid over [0, T].

    Raises EscapeError (with the exit time) if the trajectory leaves the
    chart box (scaled by ``box_scale``), unless ``clip_to_exit`` is set, in
    which case the portion up to the last inside-chart node is returned.
    """
    if T <= 0 or steps < 1:
        raise ValueError("need T > 0 and steps >= 1")
    n = frame.dim
    x0 = np.asarray(x0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    frame.require_inside(x0)
    lo = frame.chart_box[:, 0] * box_scale
    hi = frame.chart_box[:, 1] * box_scale
    Y = np.concatenate([x0, p0])[None, :]
    h = T / steps
    states = np.empty((steps + 1, 2 * n))
    states[0] = Y[0]
    exit_k = None
    for k in range(steps):
        Y = _rk4_step(frame, Y, h)
        states[k + 1] = Y[0]
        if not np.all((Y[0, :n] >= lo) & (Y[0, :n] <= hi)):
            exit_k = k + 1
            break
    times = np.linspace(0.0, T, steps + 1)
    energy0 = float(hamiltonian_batch(frame, x0[None, :], p0[None, :])[0])
    if exit_k is not None:
        if not clip_to_exit:
            raise EscapeError(f"extremal left chart box at t={times[exit_k]:.6g}",
                              exit_time=float(times[exit_k]))
        return Extremal(times[:exit_k], states[:exit_k], energy0, n)
    return Extremal(times, states, energy0, n)


def energy_drift(frame: Frame, e: Extremal) -> float:
    """max_k |H(psi(t_k)) - H(psi(0))| along the stored extremal."""
    H = hamiltonian_batch(frame, e.x, e.p)
    return float(np.max(np.abs(H - e.energy0)))


def exp_map(frame: Frame, xbar, p0, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """exp_{xbar}(p0): base-point projection of the extremal at time 1."""
    e = integrate_extremal(frame, xbar, p0, T=1.0, steps=steps)
    return e.x[-1]


def exp_map_batch(frame: Frame, xbar, P0: np.ndarray, steps: int,
                  box_scale: float = 2.0):
    """Endpoints (positions and covectors) for a batch of initial covectors."""
    n = frame.dim
    xbar = np.asarray(xbar, dtype=float)
    Y0 = np.concatenate([np.broadcast_to(xbar, P0.shape), P0], axis=-1)
    Y, valid, _ = integrate_batch(frame, Y0, T=1.0, steps=steps,
                                  box_scale=box_scale)
    return Y[..., :n], Y[..., n:], valid


def _rhs_jacobian(frame: Frame, Y: np.ndarray) -> np.ndarray:
    """d(rhs)/d(x,p) at one state, by central differences of the RHS."""
    d = Y.shape[-1]
    pert = np.zeros((2 * d, d))
    for k in range(d):
        pert[2 * k, k] = _RHS_JAC_STEP
        pert[2 * k + 1, k] = -_RHS_JAC_STEP
    vals = hamiltonian_rhs_batch(frame, Y[None, :] + pert)
    J = (vals[0::2] - vals[1::2]).T / (2 * _RHS_JAC_STEP)
    return J


def integrate_variational(frame: Frame, xbar, p0, T: float, steps: int = 400,
                          sample_times=None):
    """Integrate the extremal with its sensitivity S(t) = d(x,p)/dp0.

    Returns (times, states, sensitivities) where sensitivities[k] is the
    (2n, n) matrix at times[k].  The variational equation Sdot = J_rhs S uses
    finite-difference Jacobians of the Hamiltonian RHS.
    """
    n = frame.dim
    xbar = np.asarray(xbar, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    Y = np.concatenate([xbar, p0])
    S = np.zeros((2 * n, n))
    S[n:, :] = np.eye(n)
    h = T / steps
    if sample_times is None:
        sample_idx = set(range(steps + 1))
    else:
        sample_idx = set(int(round(t / h)) for t in sample_times)
    times, states, sens = [], [], []

    def record(k):
        if k in sample_idx:
            times.append(k * h)
            states.append(Y.copy())
            sens.append(S.copy())

    record(0)
    for k in range(steps):
        # RK4 on the coupled (state, sensitivity) system
        k1 = hamiltonian_rhs_batch(frame, Y[None, :])[0]
        J1 = _rhs_jacobian(frame, Y)
        s1 = J1 @ S
        Y2 = Y + 0.5 * h * k1
        k2 = hamiltonian_rhs_batch(frame, Y2[None, :])[0]
        J2 = _rhs_jacobian(frame, Y2)
        s2 = J2 @ (S + 0.5 * h * s1)
        Y3 = Y + 0.5 * h * k2
        k3 = hamiltonian_rhs_batch(frame, Y3[None, :])[0]
        J3 = _rhs_jacobian(frame, Y3)
        s3 = J3 @ (S + 0.5 * h * s2)
        Y4 = Y + h * k3
        k4 = hamiltonian_rhs_batch(frame, Y4[None, :])[0]
        J4 = _rhs_jacobian(frame, Y4)
        s4 = J4 @ (S + h * s3)
        Y = Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        S = S + (h / 6.0) * (s1 + 2 * s2 + 2 * s3 + s4)
        record(k + 1)
    return np.array(times), np.array(states), np.array(sens)


def exp_differential(frame: Frame, xbar, p0, t: float = 1.0, steps: int = 400):
    """d(p -> pi(psi_t(p)))/dp at p0, with its smallest singular value.

    Returns (matrix, sigma_min).
    """
    n = frame.dim
    _, _, sens = integrate_variational(frame, xbar, p0, T=t, steps=steps,
                                       sample_times=[t])
    M = sens[-1][:n, :]
    svals = np.linalg.svd(M, compute_uv=False)
    return M, float(svals[-1])


def path_energy_and_length(frame: Frame, e: Extremal):
    """(J, L) by the trapezoid rule on |u|^2 and |u| along the extremal."""
    F = frame.fields(e.x)
    U = np.einsum("tk,tik->ti", e.p, F)
    sq = np.einsum("ti,ti->t", U, U)
    J = float(np.trapezoid(sq, e.times))
    L = float(np.trapezoid(np.sqrt(sq), e.times))
    return J, L


def det_dexp_samples(frame: Frame, xbar, p0, Tmax: float, n_samples: int = 200,
                     steps: int = 800):
    """det of the exp differential at n_samples times in (0, Tmax]."""
    n = frame.dim
    ts = np.linspace(Tmax / n_samples, Tmax, n_samples)
    times, _, sens = integrate_variational(frame, xbar, p0, T=Tmax, steps=steps,
                                          sample_times=ts)
    dets = np.array([np.linalg.det(S[:n, :]) for S in sens])
    return times, dets


def first_conjugate_time(frame: Frame, xbar, p0, Tmax: float,
                         n_samples: int = 200, tol: float = 1e-6):
    """Smallest t in (0, Tmax] where det d exp_t changes sign, or None.

    Sign changes are located on a uniform sample grid and refined by
    bisection (each evaluation re-integrates the variational system).
    """
    ts, dets = det_dexp_samples(frame, xbar, p0, Tmax, n_samples=n_samples)
    sign = np.sign(dets)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if idx.size == 0:
        return None
    a, b = ts[idx[0]], ts[idx[0] + 1]
    fa = dets[idx[0]]

    def det_at(t):
        n = frame.dim
        _, _, sens = integrate_variational(frame, xbar, p0, T=t, steps=300,
                                           sample_times=[t])
        return np.linalg.det(sens[-1][:n, :])

    while b - a > tol:
        m = 0.5 * (a + b)
        fm = det_at(m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def local_optimality_check(frame: Frame, xbar, p0, eps: float, oracle,
                           steps: int = 400):
    """Compare the extremal's energy on [0, eps] with an oracle lower bound.

    ``oracle`` maps a target point to (distance_estimate, error_bound).  The
    minimal energy to reach y in time eps is d(y)^2 / eps; the check passes
    when the extremal cost does not exceed that estimate plus the propagated
    oracle error.  Returns a dict report.
    """
    e = integrate_extremal(frame, xbar, p0, T=eps, steps=steps)
    J, _ = path_energy_and_length(frame, e)
    d_hat, bound = oracle(e.x[-1])
    oracle_value = d_hat ** 2 / eps
    oracle_error = (bound * (2 * d_hat + bound)) / eps
    passes = J <= oracle_value + oracle_error + 1e-9
    return {
        "extremal_cost": J,
        "oracle_value": oracle_value,
        "oracle_error": oracle_error,
        "endpoint": e.x[-1],
        "pass": bool(passes),
    }


def write_trajectory_csv(path, frame: Frame, e: Extremal):
    """CSV export with header t,x1..xn,p1..pn,H."""
    n = frame.dim
    H = hamiltonian_batch(frame, e.x, e.p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i+1}" for i in range(n)]
                   + [f"p{i+1}" for i in range(n)] + ["H"])
        for k in range(len(e.times)):
            w.writerow([f"{e.times[k]:.17g}"]
                       + [f"{v:.17g}" for v in e.states[k]]
                       + [f"{H[k]:.17g}"])
