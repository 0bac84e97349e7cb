import numpy as np
import pytest

from srstab import builtin_system, decay_check, integrate_closed_loop, \
    martinet_modified_system
from srstab.errors import ConfigurationError
from srstab.feedback import (FeedbackField, integrate_closed_loop_batch,
                             optimal_flow_residual, repulsion_check,
                             section_residual, write_closed_loop_csv)
from srstab.nonsmooth import LocusEstimate


@pytest.fixture(scope="module")
def euclid_fb():
    return FeedbackField(builtin_system("euclidean-2"), starts=4)


def test_euclidean_control_and_vector(euclid_fb):
    x = np.array([1.0, -0.5])
    assert np.allclose(euclid_fb.control(x), x, atol=1e-8)
    assert np.allclose(euclid_fb.vector(x), -x, atol=1e-8)
    assert np.allclose(euclid_fb.zeta(np.zeros(2)), 0.0)


def test_euclidean_closed_loop_decay(euclid_fb):
    traj = integrate_closed_loop(euclid_fb, [1.0, 0.0], T=3.0,
                                 record_every=10)
    assert decay_check(traj) < 1e-5
    assert np.allclose(traj.points[-1],
                       [np.exp(-3.0), 0.0], atol=1e-4)
    # V_along nonincreasing
    assert np.all(np.diff(traj.V_along) <= 1e-12)


def test_constant_trajectory_at_base(euclid_fb):
    traj = integrate_closed_loop(euclid_fb, [0.0, 0.0], T=1.0)
    assert np.allclose(traj.points, 0.0)
    assert np.allclose(traj.V_along, 0.0)


def test_section_property():
    s = builtin_system("heisenberg")
    fb = FeedbackField(s, starts=8)
    assert section_residual(fb, np.array([1.0, 0.0, 0.0])) <= 1e-10


def test_optimal_flow_consistency():
    s = builtin_system("heisenberg")
    fb = FeedbackField(s, starts=8)
    res = optimal_flow_residual(fb, np.array([0.7, 0.3, 2.0]), n_samples=50)
    assert res <= 1e-3


def test_repulsion_from_axis_seed():
    s = builtin_system("heisenberg")
    z = np.arange(-1.5, 1.5, 0.05)
    S = LocusEstimate(kind="singular_set",
                      points=np.stack([0 * z, 0 * z, z], axis=-1),
                      detection_radius=0.02)
    fb = FeedbackField(s, S_estimate=S, starts=16)
    traj = integrate_closed_loop(fb, [0.0, 0.0, 0.5], T=1.0,
                                 record_every=10)
    dmin, ok = repulsion_check(traj, S, t_min=0.05)
    assert ok and dmin > S.detection_radius
    assert decay_check(traj) < 1e-2


def test_batch_matches_single():
    s = builtin_system("heisenberg")
    fb = FeedbackField(s, starts=8)
    x0 = np.array([0.5, 0.3, 0.1])
    single = integrate_closed_loop(fb, x0, T=0.5, record_every=10)
    batch = integrate_closed_loop_batch(fb, x0[None, :], T=0.5,
                                        record_every=10)[0]
    assert np.allclose(single.points, batch.points, atol=1e-12)


def test_martinet_modified_construction():
    base = builtin_system("martinet")
    mod = martinet_modified_system(base)
    F = mod.frame.fields(np.array([0.0, 0.5, 0.0]))
    assert np.allclose(F[0], [0.25, 0.0, 0.0625])
    assert np.allclose(F[1], [0.0, 1.0, 0.0])
    # the first field vanishes on the surface x2 = 0
    F0 = mod.frame.fields(np.array([0.7, 0.0, 0.1]))
    assert np.allclose(F0[0], 0.0)
    with pytest.raises(ConfigurationError):
        martinet_modified_system(builtin_system("heisenberg"))


def test_closed_loop_csv(tmp_path, euclid_fb):
    traj = integrate_closed_loop(euclid_fb, [1.0, 0.0], T=0.2,
                                 record_every=10)
    path = tmp_path / "cl.csv"
    write_closed_loop_csv(path, euclid_fb, traj)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "t,x1,x2,u1,u2,V,dist_to_S"
    assert len(rows) == 1 + len(traj.times)
