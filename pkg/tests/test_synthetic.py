import numpy as np
import pytest

from ggmdl.glasso import extract_graph
from ggmdl.graph import Graph
from ggmdl.numerics import cholesky, sample_covariance
from ggmdl.synthetic import StructureKind, make_structure, rng_for, sample_mvn

KINDS = list(StructureKind)


def test_cycle_p4():
    expected = [[1, .5, 0, .4], [.5, 1, .5, 0], [0, .5, 1, .5], [.4, 0, .5, 1]]
    np.testing.assert_array_equal(make_structure("cycle", 4).omega, expected)


def test_ar1_tridiagonal():
    gt = make_structure("ar1", 6)
    np.testing.assert_array_equal(np.diag(gt.omega), 1.0)
    np.testing.assert_array_equal(np.diag(gt.omega, 1), 0.5)
    assert gt.graph == Graph.path(6)


def test_ar2_p5():
    gt = make_structure("ar2", 5)
    np.testing.assert_array_equal(np.diag(gt.omega, 1), 0.5)
    np.testing.assert_array_equal(np.diag(gt.omega, 2), 0.25)
    assert np.all(np.triu(gt.omega, 3) == 0)
    assert gt.graph.n_edges == 7


def test_er_min_eigenvalue():
    gt = make_structure("er", 50, seed=3)
    cholesky(gt.omega - 0.05 * np.eye(50) + 1e-9 * np.eye(50))
    assert np.linalg.eigvalsh(gt.omega)[0] >= 0.05 - 1e-9
    off = gt.omega[~np.eye(50, dtype=bool)]
    nz = off[off != 0]
    assert np.all((nz >= 0.4) & (nz <= 0.8))


def test_hub_weights_and_hubs():
    gt = make_structure("hub", 40, seed=1)
    deg = gt.graph.degrees()
    assert np.sort(deg)[-2:].min() >= 15
    off = gt.omega[~np.eye(40, dtype=bool)]
    nz = np.abs(off[off != 0])
    # (A + A')/2 halves one-sided weights and can sum or cancel two-sided ones.
    assert nz.max() <= 0.75 + 1e-12
    assert np.linalg.eigvalsh(gt.omega)[0] >= 0.05 - 1e-9


@pytest.mark.parametrize("kind", ["cycle", "ar1", "ar2", "er", "hub"])
def test_small_p_rejected(kind):
    with pytest.raises(ValueError):
        make_structure(kind, 2)


@pytest.mark.parametrize("kind", KINDS)
def test_fifty_seeds_spd_and_consistent(kind):
    for seed in range(50):
        gt = make_structure(kind, 15, seed=seed)
        cholesky(gt.omega)
        assert np.array_equal(gt.omega, gt.omega.T)
        assert extract_graph(gt.omega, 1e-12) == gt.graph


def test_parse_labels():
    assert StructureKind.parse("AR(1)") is StructureKind.AR1
    assert StructureKind.parse("ar2") is StructureKind.AR2
    assert StructureKind.AR1.label == "AR(1)"
    with pytest.raises(ValueError):
        StructureKind.parse("grid")


def test_identity_samples():
    x = sample_mvn(np.eye(5), 10_000, seed=0)
    assert np.abs(sample_covariance(x) - np.eye(5)).max() <= 5 / np.sqrt(10_000)


def test_diag4_variance():
    x = sample_mvn(np.array([[4.0]]), 10_000, seed=1)
    assert x.var() == pytest.approx(0.25, abs=0.02)


def test_sampling_deterministic():
    gt = make_structure("er", 12, seed=4)
    np.testing.assert_array_equal(sample_mvn(gt, 30, seed=4), sample_mvn(gt, 30, seed=4))
    assert not np.array_equal(sample_mvn(gt, 30, seed=4), sample_mvn(gt, 30, seed=4, trial=1))
    np.testing.assert_array_equal(make_structure("hub", 20, seed=8).omega,
                                  make_structure("hub", 20, seed=8).omega)


def test_streams_are_distinct():
    a = rng_for(1, 0, 3, 20, 0, 0).standard_normal(5)
    b = rng_for(1, 1, 3, 20, 0, 0).standard_normal(5)
    c = rng_for(2, 0, 3, 20, 0, 0).standard_normal(5)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    np.testing.assert_array_equal(a, rng_for(1, 0, 3, 20, 0, 0).standard_normal(5))


def test_rng_is_pcg64():
    assert isinstance(rng_for(0).bit_generator, np.random.PCG64)


@pytest.mark.slow
@pytest.mark.parametrize("kind", KINDS)
def test_large_sample_precision_recovery(kind):
    gt = make_structure(kind, 10, seed=2)
    x = sample_mvn(gt, 100_000, seed=2)
    assert np.abs(np.linalg.inv(sample_covariance(x)) - gt.omega).max() <= 0.1
