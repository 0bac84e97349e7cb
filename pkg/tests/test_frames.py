import json

import numpy as np
import pytest

from srstab import builtin_system, eval_frame, hamiltonian, load_system
from srstab.errors import ChartDomainError
from srstab.flow import hamiltonian_rhs_batch
from srstab.frames import fd_jacobians, lie_bracket, normal_control


def test_builtin_names():
    for name in ("euclidean-2", "euclidean-3", "heisenberg", "martinet",
                 "martinet-modified"):
        s = builtin_system(name)
        assert s.frame.rank == 2 or name.startswith("euclidean")
        assert np.allclose(s.base, 0.0)
    with pytest.raises(Exception):
        builtin_system("nope")


def test_heisenberg_fields():
    s = builtin_system("heisenberg")
    F = eval_frame(s.frame, np.array([1.0, 2.0, 0.0]))
    assert np.allclose(F[0], [1.0, 0.0, -1.0])
    assert np.allclose(F[1], [0.0, 1.0, 0.5])


def test_heisenberg_bracket_spans_vertical():
    s = builtin_system("heisenberg")
    br = lie_bracket(s.frame, 0, 1, np.array([0.3, -0.7, 0.2]))
    assert np.allclose(br, [0.0, 0.0, 1.0], atol=1e-12)


def test_martinet_bracket_degenerates_on_surface():
    s = builtin_system("martinet")
    br_off = lie_bracket(s.frame, 0, 1, np.array([0.0, 0.5, 0.0]))
    br_on = lie_bracket(s.frame, 0, 1, np.array([0.0, 0.0, 0.0]))
    assert abs(br_off[2]) > 0.1
    assert np.allclose(br_on, 0.0, atol=1e-12)


def test_analytic_jacobians_match_fd():
    for name in ("heisenberg", "martinet", "martinet-modified"):
        s = builtin_system(name)
        x = np.array([[0.4, -0.8, 0.3], [1.1, 0.6, -0.2]])
        assert np.allclose(s.frame.jacobians(x), fd_jacobians(s.frame, x),
                           atol=1e-9)


def test_fused_rhs_matches_generic():
    # the per-builtin fused evaluator must agree with the einsum route
    rng = np.random.default_rng(3)
    for name in ("euclidean-2", "heisenberg", "martinet",
                 "martinet-modified"):
        frame = builtin_system(name).frame
        Y = rng.normal(size=(40, 2 * frame.dim))
        generic = frame.__class__(
            dim=frame.dim, rank=frame.rank, fields=frame.fields,
            jacobians=frame.jacobians, chart_box=frame.chart_box)
        assert np.allclose(hamiltonian_rhs_batch(frame, Y),
                           hamiltonian_rhs_batch(generic, Y),
                           atol=1e-12)


def test_hamiltonian_and_control():
    s = builtin_system("heisenberg")
    x = np.array([0.0, 0.0, 0.0])
    p = np.array([1.0, 2.0, 5.0])
    assert hamiltonian(s.frame, x, p) == pytest.approx(0.5 * (1 + 4))
    assert np.allclose(normal_control(s.frame, x, p), [1.0, 2.0])


def test_chart_box_enforced():
    s = builtin_system("euclidean-2")
    with pytest.raises(ChartDomainError):
        s.frame.require_inside(np.array([10.0, 0.0]))


def test_load_system_polynomial(tmp_path):
    spec = {
        "name": "heis-json",
        "dim": 3,
        "rank": 2,
        "base": [0.0, 0.0, 0.0],
        "fields": [
            [[[1.0, 0, 0, 0]], [], [[-0.5, 0, 1, 0]]],
            [[], [[1.0, 0, 0, 0]], [[0.5, 1, 0, 0]]],
        ],
    }
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(spec))
    s = load_system(str(path))
    ref = builtin_system("heisenberg")
    x = np.array([[0.7, -0.2, 0.1]])
    assert np.allclose(s.frame.fields(x), ref.frame.fields(x), atol=1e-12)
    assert np.allclose(s.frame.jacobians(x), ref.frame.jacobians(x),
                       atol=1e-12)
