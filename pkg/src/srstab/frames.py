"""Orthonormal frames for nonholonomic distributions on a single global chart.

A frame is a tuple of m smooth vector fields f_1..f_m on an open box in R^n,
orthonormal for the metric they induce on the distribution they span.  All
evaluators are vectorized: they accept arrays of shape (..., n).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ChartDomainError, ConfigurationError

DEFAULT_BOX_HALFWIDTH = 3.0
FD_JACOBIAN_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class Frame:
    """m vector fields with Jacobians on an axis-aligned chart box.

    fields(x): (..., n) -> (..., m, n)
    jacobians(x): (..., n) -> (..., m, n, n) with [i, j, k] = d(f_i)_j / dx_k
    chart_box: (n, 2) array of [lo, hi] per coordinate
    rhs: optional fused evaluator of the normal Hamiltonian system,
         (..., 2n) -> (..., 2n); built-ins supply one for speed, the generic
         einsum path is used otherwise
    """

    dim: int
    rank: int
    fields: Callable[[np.ndarray], np.ndarray]
    jacobians: Callable[[np.ndarray], np.ndarray]
    chart_box: np.ndarray
    rhs: Callable[[np.ndarray], np.ndarray] = None

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = self.chart_box[:, 0]
        hi = self.chart_box[:, 1]
        return np.all((x >= lo) & (x <= hi), axis=-1)

    def require_inside(self, x):
        if not np.all(self.contains(x)):
            raise ChartDomainError(f"point outside chart box: {np.asarray(x)}")


@dataclass(frozen=True, eq=False)
class SubRiemannianSystem:
    frame: Frame
    base: np.ndarray
    name: str

    def __post_init__(self):
        box = self.frame.chart_box
        inside = np.all((self.base > box[:, 0]) & (self.base < box[:, 1]))
        if not inside:
            raise ConfigurationError("base point must lie in the chart box interior")


def _default_box(n: int) -> np.ndarray:
    return np.array([[-DEFAULT_BOX_HALFWIDTH, DEFAULT_BOX_HALFWIDTH]] * n)


def eval_frame(frame: Frame, x) -> np.ndarray:
    """Return the m frame vectors at x as an (m, n) array."""
    x = np.asarray(x, dtype=float)
    frame.require_inside(x)
    return frame.fields(x)


def hamiltonian(frame: Frame, x, p) -> float:
    """H(x, p) = 1/2 sum_i <p, f_i(x)>^2, the normal Hamiltonian of the frame."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    frame.require_inside(x)
    return float(hamiltonian_batch(frame, x[None, :], p[None, :])[0])


def hamiltonian_batch(frame: Frame, X, P) -> np.ndarray:
    """Vectorized Hamiltonian; no chart check."""
    F = frame.fields(np.asarray(X, dtype=float))
    U = np.einsum("...k,...ik->...i", np.asarray(P, dtype=float), F)
    return 0.5 * np.einsum("...i,...i->...", U, U)


def normal_control(frame: Frame, x, p) -> np.ndarray:
    """u_i = <p, f_i(x)>; satisfies H(x, p) = |u|^2 / 2."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    frame.require_inside(x)
    F = frame.fields(x)
    return F @ p


def lie_bracket(frame: Frame, i: int, j: int, x) -> np.ndarray:
    """[f_i, f_j](x) = df_j(x) f_i(x) - df_i(x) f_j(x), from analytic Jacobians."""
    x = np.asarray(x, dtype=float)
    F = frame.fields(x)
    DF = frame.jacobians(x)
    return DF[..., j, :, :] @ F[..., i, :] - DF[..., i, :, :] @ F[..., j, :]


# ---------------------------------------------------------------------------
# built-in systems
# ---------------------------------------------------------------------------


def _euclidean_frame(n: int) -> Frame:
    eye = np.eye(n)

    def fields(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] + (n, n)
        return np.broadcast_to(eye, shape).copy()

    def jacobians(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] + (n, n, n)
        return np.zeros(shape)

    def rhs(y):
        out = np.zeros_like(y)
        out[..., :n] = y[..., n:]
        return out

    return Frame(dim=n, rank=n, fields=fields, jacobians=jacobians,
                 chart_box=_default_box(n), rhs=rhs)


def _heisenberg_frame() -> Frame:
    # f1 = dx - (y/2) dz, f2 = dy + (x/2) dz; [f1, f2] = dz.
    def fields(x):
        x = np.asarray(x, dtype=float)
        F = np.zeros(x.shape[:-1] + (2, 3))
        F[..., 0, 0] = 1.0
        F[..., 0, 2] = -0.5 * x[..., 1]
        F[..., 1, 1] = 1.0
        F[..., 1, 2] = 0.5 * x[..., 0]
        return F

    def jacobians(x):
        x = np.asarray(x, dtype=float)
        DF = np.zeros(x.shape[:-1] + (2, 3, 3))
        DF[..., 0, 2, 1] = -0.5
        DF[..., 1, 2, 0] = 0.5
        return DF

    def rhs(y):
        x, yy = y[..., 0], y[..., 1]
        px, py, pz = y[..., 3], y[..., 4], y[..., 5]
        u1 = px - 0.5 * yy * pz
        u2 = py + 0.5 * x * pz
        out = np.empty_like(y)
        out[..., 0] = u1
        out[..., 1] = u2
        out[..., 2] = 0.5 * (x * u2 - yy * u1)
        out[..., 3] = -0.5 * u2 * pz
        out[..., 4] = 0.5 * u1 * pz
        out[..., 5] = 0.0
        return out

    return Frame(dim=3, rank=2, fields=fields, jacobians=jacobians,
                 chart_box=_default_box(3), rhs=rhs)


def _martinet_frame() -> Frame:
    # f1 = dx1 + x2^2 dx3, f2 = dx2; Martinet surface is {x2 = 0}.
    def fields(x):
        x = np.asarray(x, dtype=float)
        F = np.zeros(x.shape[:-1] + (2, 3))
        F[..., 0, 0] = 1.0
        F[..., 0, 2] = x[..., 1] ** 2
        F[..., 1, 1] = 1.0
        return F

    def jacobians(x):
        x = np.asarray(x, dtype=float)
        DF = np.zeros(x.shape[:-1] + (2, 3, 3))
        DF[..., 0, 2, 1] = 2.0 * x[..., 1]
        return DF

    def rhs(y):
        x2 = y[..., 1]
        p1, p2, p3 = y[..., 3], y[..., 4], y[..., 5]
        s = x2 * x2
        u1 = p1 + s * p3
        out = np.empty_like(y)
        out[..., 0] = u1
        out[..., 1] = p2
        out[..., 2] = u1 * s
        out[..., 3] = 0.0
        out[..., 4] = -2.0 * u1 * x2 * p3
        out[..., 5] = 0.0
        return out

    return Frame(dim=3, rank=2, fields=fields, jacobians=jacobians,
                 chart_box=_default_box(3), rhs=rhs)


def _martinet_modified_frame() -> Frame:
    # g1 = beta * f1 with beta = x2^2, so g1 = (x2^2, 0, x2^4); f2 unchanged.
    # g1 vanishes exactly on the Martinet surface, leaving span{f2} transversal.
    def fields(x):
        x = np.asarray(x, dtype=float)
        y = x[..., 1]
        F = np.zeros(x.shape[:-1] + (2, 3))
        F[..., 0, 0] = y ** 2
        F[..., 0, 2] = y ** 4
        F[..., 1, 1] = 1.0
        return F

    def jacobians(x):
        x = np.asarray(x, dtype=float)
        y = x[..., 1]
        DF = np.zeros(x.shape[:-1] + (2, 3, 3))
        DF[..., 0, 0, 1] = 2.0 * y
        DF[..., 0, 2, 1] = 4.0 * y ** 3
        return DF

    def rhs(y):
        x2 = y[..., 1]
        p1, p2, p3 = y[..., 3], y[..., 4], y[..., 5]
        s = x2 * x2
        q = s * s
        u1 = s * p1 + q * p3
        out = np.empty_like(y)
        out[..., 0] = u1 * s
        out[..., 1] = p2
        out[..., 2] = u1 * q
        out[..., 3] = 0.0
        out[..., 4] = -u1 * (2.0 * x2 * p1 + 4.0 * x2 * s * p3)
        out[..., 5] = 0.0
        return out

    return Frame(dim=3, rank=2, fields=fields, jacobians=jacobians,
                 chart_box=_default_box(3), rhs=rhs)


def builtin_system(name: str) -> SubRiemannianSystem:
    """Construct one of the built-in systems.

    Accepted names: ``euclidean-N`` (N >= 1), ``heisenberg``, ``martinet``,
    ``martinet-modified``.  The base point is the origin for all of them.
    """
    if name.startswith("euclidean-"):
        try:
            n = int(name.split("-", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad euclidean dimension in {name!r}") from None
        if n < 1:
            raise ConfigurationError("euclidean dimension must be >= 1")
        return SubRiemannianSystem(_euclidean_frame(n), np.zeros(n), name)
    if name == "heisenberg":
        return SubRiemannianSystem(_heisenberg_frame(), np.zeros(3), name)
    if name == "martinet":
        return SubRiemannianSystem(_martinet_frame(), np.zeros(3), name)
    if name == "martinet-modified":
        return SubRiemannianSystem(_martinet_modified_frame(), np.zeros(3), name)
    raise ConfigurationError(f"unknown system name: {name!r}")


# ---------------------------------------------------------------------------
# user-defined polynomial frames
# ---------------------------------------------------------------------------


def _polynomial_evaluators(terms, n: int, m: int):
    """Build vectorized field/Jacobian evaluators from coefficient tables.

    terms[i][j] is a list of [coef, e_1, ..., e_n] monomials for component j
    of field i.  Jacobians are differentiated analytically term by term.
    """
    parsed = []
    for i in range(m):
        comps = []
        for j in range(n):
            mono = []
            for t in terms[i][j]:
                coef = float(t[0])
                powers = np.asarray(t[1:], dtype=float)
                if powers.shape != (n,):
                    raise ConfigurationError(
                        f"field {i} component {j}: expected {n} exponents")
                mono.append((coef, powers))
            comps.append(mono)
        parsed.append(comps)

    def fields(x):
        x = np.asarray(x, dtype=float)
        F = np.zeros(x.shape[:-1] + (m, n))
        for i in range(m):
            for j in range(n):
                for coef, powers in parsed[i][j]:
                    F[..., i, j] += coef * np.prod(x ** powers, axis=-1)
        return F

    def jacobians(x):
        x = np.asarray(x, dtype=float)
        DF = np.zeros(x.shape[:-1] + (m, n, n))
        for i in range(m):
            for j in range(n):
                for coef, powers in parsed[i][j]:
                    for k in range(n):
                        if powers[k] == 0:
                            continue
                        dp = powers.copy()
                        dp[k] -= 1
                        DF[..., i, j, k] += coef * powers[k] * np.prod(
                            x ** dp, axis=-1)
        return DF

    return fields, jacobians


def load_system(source) -> SubRiemannianSystem:
    """Read a system definition (JSON file path, file object, or dict).

    Keys: name, dim, rank, base, chart_box, and for user frames ``fields``
    given as polynomial coefficient tables per component.  Without ``fields``
    the name must be a built-in.
    """
    if isinstance(source, dict):
        spec = source
    elif hasattr(source, "read"):
        spec = json.load(source)
    else:
        with open(source) as fh:
            spec = json.load(fh)

    if "fields" not in spec:
        return builtin_system(spec["name"])

    try:
        n = int(spec["dim"])
        m = int(spec["rank"])
        base = np.asarray(spec["base"], dtype=float)
        terms = spec["fields"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed system definition: {exc}") from exc
    if m > n or base.shape != (n,):
        raise ConfigurationError("inconsistent dim/rank/base in system definition")

    box = np.asarray(spec.get("chart_box", _default_box(n)), dtype=float)
    if box.shape != (n, 2):
        raise ConfigurationError("chart_box must be an (n, 2) table")

    fields, jacobians = _polynomial_evaluators(terms, n, m)
    frame = Frame(dim=n, rank=m, fields=fields, jacobians=jacobians, chart_box=box)
    return SubRiemannianSystem(frame, base, str(spec.get("name", "user")))


def fd_jacobians(frame: Frame, x, step: float = FD_JACOBIAN_STEP) -> np.ndarray:
    """Central finite differences of the frame fields; consistency reference."""
    x = np.asarray(x, dtype=float)
    n = frame.dim
    DF = np.zeros(x.shape[:-1] + (frame.rank, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        DF[..., :, :, k] = (frame.fields(x + e) - frame.fields(x - e)) / (2 * step)
    return DF
