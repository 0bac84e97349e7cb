import numpy as np
import pytest

from srstab import builtin_system
from srstab.nonsmooth import (box_counting_dimension, inclusion_within,
                              limiting_subdifferential, semiconcavity_probe,
                              upper_lower_paraboloid_probe, write_locus_csv,
                              LocusEstimate)


def _quadratic_sampler():
    return lambda pts: np.sum(np.asarray(pts) ** 2, axis=-1)


def test_semiconcavity_quadratic_reference():
    # V = |x|^2 satisfies the midpoint inequality with C = 1 exactly
    region = {"center": np.zeros(2), "r_min": 0.3, "r_max": 1.5}
    rep = semiconcavity_probe(_quadratic_sampler(), region, samples=3000,
                              seed=0, user_C=1.0 + 1e-7)
    assert rep["fitted_C"] == pytest.approx(1.0, abs=1e-7)
    assert rep["n_violations"] == 0


def test_semiconcavity_rejects_tight_region():
    region = {"center": np.zeros(2), "r_min": 0.05, "r_max": 1.0}
    with pytest.raises(ValueError):
        semiconcavity_probe(_quadratic_sampler(), region)


def test_paraboloid_probe_quadratic():
    V = _quadratic_sampler()
    x = np.array([0.5, 0.5])
    upper, lower = upper_lower_paraboloid_probe(V, x, 2 * x, radius=0.1,
                                                sigma=1.5)
    assert upper and lower


def test_limiting_subdifferential_smooth_point():
    s = builtin_system("heisenberg")
    est = limiting_subdifferential(s, np.array([0.8, 0.3, 0.05]), starts=8,
                                   steps=120)
    assert est.differentiable
    assert len(est.clusters) == 1


def test_limiting_subdifferential_on_axis():
    # vertical axis points carry a circle of covectors: >= 2 clusters
    s = builtin_system("heisenberg")
    est = limiting_subdifferential(s, np.array([0.0, 0.0, 0.5]), starts=32,
                                   steps=120)
    assert not est.differentiable
    assert len(est.clusters) >= 2


def test_limiting_subdifferential_excludes_base():
    s = builtin_system("heisenberg")
    with pytest.raises(ValueError):
        limiting_subdifferential(s, np.zeros(3))


def test_inclusion_within():
    cloud = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert inclusion_within(np.array([[0.05, 0.0]]), cloud, 0.1)
    assert not inclusion_within(np.array([[0.5, 0.5]]), cloud, 0.1)
    assert inclusion_within(np.empty((0, 2)), cloud, 0.1)


def test_box_counting_line_and_plane():
    t = np.linspace(0.0, 1.0, 2000)
    line = np.stack([t, np.zeros_like(t), np.zeros_like(t)], axis=-1)
    assert box_counting_dimension(line, 0.2) == pytest.approx(1.0, abs=0.1)
    rng = np.random.default_rng(0)
    plane = rng.uniform(0, 1, size=(20000, 2))
    plane = np.concatenate([plane, np.zeros((len(plane), 1))], axis=1)
    assert box_counting_dimension(plane, 0.2) == pytest.approx(2.0, abs=0.15)


def test_locus_csv(tmp_path):
    est = LocusEstimate(kind="singular_set",
                        points=np.array([[0.0, 0.0, 0.5], [0.0, 0.0, 0.6]]),
                        detection_radius=0.2)
    path = tmp_path / "loci.csv"
    write_locus_csv(path, [est])
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "kind,x1,x2,x3"
    assert len(rows) == 3
    assert rows[1].startswith("singular_set,")
