import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from poremine.analytics import (
    FeatureMatrix,
    correlogram_order,
    density_grid,
    drop_feature,
    elbow_k,
    kde_density,
    kmeans,
    kmeans_pp_init,
    lloyd,
    pca,
    pearson_matrix,
    select_k,
    silverman_bandwidth,
    standardize,
)
from poremine.errors import BadK, ConstantFeature, DegenerateSample, MatrixEmpty, UnknownFeature
from poremine.morphology import FEATURE_NAMES
from poremine.synth import generate_feature_blobs, simplex_centers

from oracles import eig2_char_poly, exhaustive_two_means, trapezoid


def fm(rows, names=None):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    names = names or tuple(f"c{i}" for i in range(rows.shape[1]))
    return FeatureMatrix(rows, names)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = arrays(float, st.tuples(st.integers(3, 12), st.integers(1, 4)), elements=finite).filter(
    lambda a: all(np.ptp(a[:, j]) > 1e-3 for j in range(a.shape[1]))
)


def test_standardize_symmetric_column():
    z = standardize(fm([1, 2, 3]))
    assert z.values[:, 0].tolist() == [-1.0, 0.0, 1.0]


def test_standardize_constant_column_named():
    with pytest.raises(ConstantFeature) as err:
        standardize(fm([[1, 5], [2, 5], [3, 5]], ("a", "b")))
    assert err.value.name == "b"


def test_standardize_random_remeasured():
    x = np.random.default_rng(3).normal(5, 3, (20, 3))
    z = standardize(fm(x)).values
    assert np.allclose(z.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(z.std(axis=0, ddof=1), 1, atol=1e-9)


@given(matrices)
def test_standardize_idempotent(x):
    z1 = standardize(fm(x))
    z2 = standardize(z1)
    assert np.allclose(z1.values, z2.values, atol=1e-9)


def test_pearson_examples():
    assert pearson_matrix(fm([[1, 3], [2, 2], [3, 1]]))[0, 1] == pytest.approx(-1.0, abs=1e-12)
    # means 2, 2; deviations (-1,0,1) and (-1,1,0): sum of products 1, sums of squares 2 and 2
    assert pearson_matrix(fm([[1, 1], [2, 3], [3, 2]]))[0, 1] == pytest.approx(0.5, abs=1e-12)
    assert pearson_matrix(fm([1, 2, 4]))[0, 0] == 1.0


@given(matrices, st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_properties(x, a, b):
    c = pearson_matrix(fm(x))
    assert np.array_equal(c, c.T)
    assert np.all(np.diag(c) == 1.0)
    assert np.all(np.abs(c) <= 1.0)
    y = x.copy()
    y[:, 0] = a * y[:, 0] + b
    if np.ptp(y[:, 0]) > 0:
        assert np.allclose(pearson_matrix(fm(y)), c, atol=1e-9)


def test_correlogram_order_examples():
    assert correlogram_order(np.eye(2)) == [0, 1]
    c = np.array([[1.0, 0.1, 0.9], [0.1, 1.0, 0.0], [0.9, 0.0, 1.0]])
    # row distances: d(0,2) = sqrt(0.01+0.01+0.01)*... smallest, d(0,1), d(1,2) larger
    d = lambda i, j: math.dist(c[i], c[j])
    assert d(0, 2) < d(0, 1) and d(0, 2) < d(1, 2)
    order = correlogram_order(c)
    assert abs(order.index(0) - order.index(2)) == 1
    assert correlogram_order(np.eye(5)) == [0, 1, 2, 3, 4]


def test_correlogram_order_blocks():
    c = np.eye(4)
    c[0, 3] = c[3, 0] = 0.95
    c[1, 2] = c[2, 1] = 0.9
    assert correlogram_order(c) == [0, 3, 1, 2]


def test_drop_feature():
    m = fm(np.arange(27.0).reshape(3, 9) ** 1.5, FEATURE_NAMES)
    out = drop_feature(m, "angle")
    assert out.n_cols == 8
    assert out.columns == tuple(n for n in FEATURE_NAMES if n != "angle")
    assert np.array_equal(out.values[:, 4:], m.values[:, 5:])
    with pytest.raises(UnknownFeature):
        drop_feature(m, "colour")
    with pytest.raises(MatrixEmpty):
        drop_feature(fm([1, 2, 3], ("only",)), "only")


def test_kmeans_k_equals_n():
    x = np.random.default_rng(0).normal(size=(7, 2))
    model = kmeans(x, 7, seed=1)
    assert model.wss == 0.0
    assert sorted(model.assignments.tolist()) == list(range(7))


def test_kmeans_k1():
    model = kmeans(fm([0, 1, 2]), 1, seed=0)
    assert model.centroids.tolist() == [[1.0]]
    assert model.wss == pytest.approx(2.0)


def test_kmeans_bad_k():
    with pytest.raises(BadK):
        kmeans(fm([0, 1, 2]), 4)
    with pytest.raises(BadK):
        kmeans(fm([0, 1, 2]), 0)


def test_kmeans_two_blobs_match_exhaustive():
    rng = np.random.default_rng(11)
    x = np.vstack([rng.normal(0, 1, (20, 2)), rng.normal(10, 1, (20, 2))])
    sub = x[rng.choice(40, 10, replace=False)]
    model = kmeans(sub, 2, seed=5)
    assert model.wss == pytest.approx(exhaustive_two_means(sub), abs=1e-9)
    full = kmeans(x, 2, seed=5)
    truth = np.array([0] * 20 + [1] * 20)
    assert len(set(zip(full.assignments.tolist(), truth.tolist()))) == 2


def test_kmeans_deterministic():
    x = np.random.default_rng(2).normal(size=(40, 3))
    a, b = kmeans(x, 4, seed=9), kmeans(x, 4, seed=9)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.wss == b.wss


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_lloyd_wss_non_increasing_and_nearest(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(25, 3))
    model = lloyd(x, kmeans_pp_init(x, k, rng))
    assert all(b <= a + 1e-9 for a, b in zip(model.wss_trace, model.wss_trace[1:]))
    d2 = ((x[:, None, :] - model.centroids[None]) ** 2).sum(axis=2)
    assert np.allclose(d2[np.arange(len(x)), model.assignments], d2.min(axis=1))
    assert model.wss == pytest.approx(d2.min(axis=1).sum())
    assert model.wss >= 0


def test_lloyd_reseeds_empty_cluster():
    x = np.array([[0.0], [1.0], [2.0], [10.0]])
    model = lloyd(x, np.array([[0.0], [100.0], [200.0]]))
    assert sorted(np.bincount(model.assignments, minlength=3).tolist()) == [1, 1, 2]


def test_elbow_rule_examples():
    # second differences (-10, 35, 3)
    assert elbow_k([100, 70, 30, 25, 23]) == 3
    # second differences (35, 23, 1)
    assert elbow_k([100, 40, 15, 13, 12]) == 2
    assert elbow_k([10, 5, 0, -5]) == 2  # all ties -> smallest k


def test_select_k_three_blobs_8d():
    centers = simplex_centers(3, 8, 6.0)
    m, _ = generate_feature_blobs(50, centers, 1.0, seed=4)
    result = select_k(m, 10, seed=4)
    assert result.k == 3
    k, curve = result
    assert len(curve) == 10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_select_k_curve_monotone(seed):
    x = np.random.default_rng(seed).normal(size=(30, 2))
    curve = select_k(x, 8, seed=seed).wss
    assert all(b <= a for a, b in zip(curve, curve[1:]))


def test_select_k_bad_kmax():
    with pytest.raises(BadK):
        select_k(np.zeros((5, 2)) + np.arange(5)[:, None], 2)
    with pytest.raises(BadK):
        select_k(np.arange(5.0)[:, None], 6)


def test_pca_rank_one():
    t = np.linspace(-3, 5, 17)
    model, proj = pca(np.column_stack([t, 2 * t]), 2)
    assert model.explained_fraction[0] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(np.abs(model.components[0]), np.array([1, 2]) / math.sqrt(5))


def test_pca_isotropic_against_char_poly():
    x = np.random.default_rng(123).normal(size=(400, 2))
    model, _ = pca(x, 2)
    cov = np.cov(x, rowvar=False)
    l1, l2 = eig2_char_poly(cov[0, 0], cov[0, 1], cov[1, 1])
    assert model.eigenvalues == pytest.approx([l1, l2], rel=1e-9)
    assert model.explained_fraction == pytest.approx([0.5, 0.5], abs=0.1)


def test_pca_full_reconstruction():
    x = standardize(fm(np.random.default_rng(5).normal(size=(30, 4)))).values
    model, proj = pca(x, 4)
    assert np.allclose(model.inverse_transform(proj), x, atol=1e-6)
    assert model.explained_fraction.sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (15, 4), elements=st.floats(-10, 10).map(lambda v: round(v, 3))))
def test_pca_properties(x):
    if np.var(x, axis=0, ddof=1).sum() < 1e-3:
        return
    model, proj = pca(x, 4)
    assert np.allclose(model.components @ model.components.T, np.eye(4), atol=1e-9)
    fr = model.explained_fraction
    assert np.all(np.diff(fr) <= 1e-12)
    assert fr.sum() == pytest.approx(1.0, abs=1e-9)
    total = np.var(x, axis=0, ddof=1).sum()
    assert np.allclose(np.var(proj, axis=0, ddof=1) / total, fr, atol=1e-9)
    for v in model.components:
        assert v[np.argmax(np.abs(v))] > 0


def test_cluster_assignment_in_pc_space_ignores_sign_flips():
    x = np.random.default_rng(8).normal(size=(50, 3)) + np.repeat([[0, 0, 0], [6, 6, 0]], 25, axis=0)
    _, proj = pca(x, 2)
    a = kmeans(proj, 2, seed=0).assignments
    flipped = proj * np.array([-1, 1])
    b = kmeans(flipped, 2, seed=0).assignments
    assert len(set(zip(a.tolist(), b.tolist()))) == 2


def test_kde_degenerate():
    with pytest.raises(DegenerateSample):
        kde_density([0.0, 0.0], [0.0])
    with pytest.raises(DegenerateSample):
        kde_density([1.0], [0.0])


def test_kde_standard_normal_integrates_to_one():
    v = np.random.default_rng(1000).standard_normal(1000)
    grid = density_grid(v, 2001)
    d = kde_density(v, grid)
    assert abs(grid[np.argmax(d)]) < 0.3
    assert 0.99 <= trapezoid(d, grid) <= 1.01


def test_kde_symmetric_pair():
    grid = np.linspace(-4, 4, 81)
    d = kde_density([-1.0, 1.0], grid)
    assert np.allclose(d, d[::-1], atol=1e-9)


def test_silverman_bandwidth():
    v = np.arange(1.0, 11.0)
    sd = v.std(ddof=1)
    iqr = np.percentile(v, 75) - np.percentile(v, 25)
    assert silverman_bandwidth(v) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 10 ** -0.2)
