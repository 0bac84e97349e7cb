import numpy as np
import pytest

from srstab import builtin_system
from srstab.acceptance import load_baselines
from srstab.errors import EscapeError
from srstab.flow import (energy_drift, exp_differential, exp_map,
                         first_conjugate_time, integrate_extremal,
                         path_energy_and_length, write_trajectory_csv)


def test_euclidean_extremal_is_a_line():
    s = builtin_system("euclidean-2")
    e = integrate_extremal(s.frame, s.base, np.array([1.0, 2.0]), T=1.0,
                           steps=200)
    assert np.allclose(e.x[-1], [1.0, 2.0], atol=1e-12)
    assert np.allclose(e.p[-1], [1.0, 2.0], atol=1e-12)


def test_energy_drift_small():
    rng = np.random.default_rng(0)
    for name in ("heisenberg", "martinet"):
        s = builtin_system(name)
        for _ in range(5):
            p0 = rng.normal(size=3)
            e = integrate_extremal(s.frame, s.base, p0, T=1.0, steps=1000,
                                   clip_to_exit=True)
            assert energy_drift(s.frame, e) < 1e-9


def test_heisenberg_axis_endpoint_baseline():
    # full turn of the horizontal circle: endpoint on the vertical axis
    s = builtin_system("heisenberg")
    z_ref = load_baselines()["heisenberg_axis_z"]["value"]
    x1 = exp_map(s.frame, s.base, np.array([1.0, 0.0, 2 * np.pi]),
                 steps=4000)
    assert np.allclose(x1, [0.0, 0.0, z_ref], atol=1e-9)
    assert z_ref == pytest.approx(1.0 / (4 * np.pi))


def test_length_equals_sqrt_2H():
    s = builtin_system("heisenberg")
    e = integrate_extremal(s.frame, s.base, np.array([0.8, -0.3, 1.5]),
                           T=1.0, steps=2000)
    E, L = path_energy_and_length(s.frame, e)
    assert L == pytest.approx(np.sqrt(2 * e.energy0), abs=1e-7)
    assert E == pytest.approx(2 * e.energy0, abs=1e-7)


def test_escape_raises_with_exit_time():
    s = builtin_system("euclidean-2")
    with pytest.raises(EscapeError) as exc:
        integrate_extremal(s.frame, s.base, np.array([10.0, 0.0]), T=1.0,
                           steps=100)
    assert 0.0 < exc.value.exit_time <= 1.0


def test_first_conjugate_time_heisenberg():
    # covector (1, 0, 2*pi) closes its circle at t = 1, which is conjugate
    s = builtin_system("heisenberg")
    t_star = first_conjugate_time(s.frame, s.base,
                                  np.array([1.0, 0.0, 2 * np.pi]),
                                  Tmax=1.2, n_samples=600)
    assert t_star == pytest.approx(1.0, abs=1e-3)


def test_exp_differential_nonsingular_generic():
    s = builtin_system("heisenberg")
    M, sigma = exp_differential(s.frame, s.base, np.array([1.0, 0.5, 0.7]))
    assert M.shape == (3, 3)
    assert sigma > 1e-3


def test_trajectory_csv_roundtrip(tmp_path):
    s = builtin_system("euclidean-2")
    e = integrate_extremal(s.frame, s.base, np.array([3.0, 4.0]), T=1.0,
                           steps=50, box_scale=2.0)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, s.frame, e)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "t,x1,x2,p1,p2,H"
    assert len(rows) == 52
    last = [float(v) for v in rows[-1].split(",")]
    assert last[1] == pytest.approx(3.0)
    assert last[2] == pytest.approx(4.0)
