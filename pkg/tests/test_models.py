import warnings

import numpy as np
import pytest

from splinesel.errors import ConditioningWarning, PreconditionError
from splinesel.models import (
    CvGrid,
    LinearModel,
    RbfnModel,
    cv_select_components,
    cv_select_meta,
    fit_latent,
    fit_linear,
    fit_rbfn,
    important_wavelengths_linear,
    kmeans,
    load_model,
    nmse,
    predict_rbfn,
    save_model,
    union_variance,
)


def literal_rbfn(model, X):
    """Direct evaluation of the weighted Gaussian kernel sum, point by point."""
    out = []
    for x in np.atleast_2d(X):
        z = x if model.input_mean is None else (x - model.input_mean) / model.input_scale
        total = model.bias
        for c, s, lam in zip(model.centers, model.widths, model.weights):
            total += lam * np.exp(-(np.linalg.norm(z - c) / (model.width_scale * s)) ** 2)
        out.append(total)
    return np.array(out)


def ols_oracle(X, y):
    A = np.column_stack([np.ones(len(y)), X])
    return np.linalg.solve(A.T @ A, A.T @ y)


# k-means

def test_kmeans_single_cluster(rng):
    X = rng.normal(size=(50, 3))
    km = kmeans(X, 1)
    np.testing.assert_allclose(km.centers[0], X.mean(0), atol=1e-12)
    assert km.variances[0] == pytest.approx(((X - X.mean(0)) ** 2).sum(1).mean())


def test_kmeans_every_point_its_own_center(rng):
    X = rng.normal(size=(15, 2))
    km = kmeans(X, 15)
    assert km.distortions[-1] == 0.0
    assert sorted(map(tuple, km.centers)) == sorted(map(tuple, X))
    assert (km.variances > 0).all()


def test_kmeans_two_blobs(rng):
    X = np.concatenate([rng.normal(-5, 1, (200, 1)), rng.normal(5, 1, (200, 1))])
    km = kmeans(X, 2, seed=3)
    c = np.sort(km.centers.ravel())
    # sample-mean oracle per generating cluster
    assert abs(c[0] - X[:200].mean()) < 0.5 and abs(c[1] - X[200:].mean()) < 0.5
    assert abs(c[0] + 5) < 0.5 and abs(c[1] - 5) < 0.5


def test_kmeans_distortion_non_increasing(rng):
    X = rng.normal(size=(300, 4))
    for seed in range(5):
        d = kmeans(X, 7, seed=seed).distortions
        assert all(b <= a + 1e-12 for a, b in zip(d, d[1:]))


def test_kmeans_preconditions(rng):
    with pytest.raises(PreconditionError):
        kmeans(rng.normal(size=(3, 2)), 4)


# RBFN

def test_rbfn_constant_target(rng):
    X = rng.normal(size=(40, 2))
    for M in (1, 4, 10):
        m = fit_rbfn(X, np.full(40, 3.25), M)
        np.testing.assert_allclose(m.predict(X), 3.25, atol=1e-9)


def test_rbfn_interpolates_with_narrow_kernels(rng):
    X = rng.uniform(size=(30, 2))
    y = rng.normal(size=30)
    m = fit_rbfn(X, y, 30, width_scale=1.0)
    # singleton clusters take the variance floor, so kernels are ~indicators
    K = np.exp(-((X[:, None] - m.centers[None]) ** 2).sum(-1) / (m.width_scale * m.widths) ** 2)
    second = np.sort(K, axis=1)[:, -2]
    assert np.allclose(K.max(axis=1), 1.0) and second.max() < 1e-12
    assert np.abs(m.predict(X) - y).max() < 1e-6


def test_rbfn_far_point_returns_bias(rng):
    X = rng.normal(size=(30, 2))
    m = fit_rbfn(X, X[:, 0] ** 2, 5)
    assert predict_rbfn(m, np.array([[1e6, 1e6]]))[0] == m.bias


def test_rbfn_single_center_at_center():
    m = RbfnModel(np.array([[1.0, 2.0]]), np.array([0.7]), np.array([1.5]), 0.25, 2.0)
    assert m.predict(np.array([[1.0, 2.0]]))[0] == pytest.approx(1.75, abs=1e-15)


def test_rbfn_matches_literal_formula(rng):
    X = rng.normal(size=(60, 3))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2
    for standardize in (False, True):
        m = fit_rbfn(X * 5 + 2, y, 8, 1.7, seed=4, standardize=standardize)
        Xt = rng.normal(size=(20, 3)) * 5 + 2
        np.testing.assert_allclose(m.predict(Xt), literal_rbfn(m, Xt), atol=1e-12, rtol=0)


def test_rbfn_dimension_mismatch(rng):
    m = fit_rbfn(rng.normal(size=(20, 3)), rng.normal(size=20), 3)
    with pytest.raises(PreconditionError):
        m.predict(rng.normal(size=(5, 2)))


def test_rbfn_warns_on_degenerate_kernels():
    X = np.array([[0.0], [0.0], [0.0], [1000.0]])
    with pytest.warns(ConditioningWarning):
        m = fit_rbfn(np.vstack([X, [[0.0]]]), np.arange(5.0), 1, width_scale=1e-3)
    assert m.degenerate_kernels


def test_rbfn_residual_non_increasing_with_nested_kernels(rng):
    X = rng.normal(size=(80, 2))
    y = np.sin(2 * X[:, 0]) * X[:, 1]
    centers = X[rng.choice(80, 20, replace=False)]
    prev = np.inf
    for M in (2, 5, 10, 20):
        K = np.exp(-((X[:, None] - centers[None, :M]) ** 2).sum(-1))
        A = np.column_stack([K, np.ones(80)])
        r = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
        assert r @ r <= prev + 1e-10
        prev = r @ r


# linear models

def test_linear_simple_slope(rng):
    x = rng.normal(size=30)
    m = fit_linear(x[:, None], 2 * x + 1)
    slopes, b = m.raw_coefficients()
    assert slopes[0] == pytest.approx(2, abs=1e-10) and b == pytest.approx(1, abs=1e-10)


def test_linear_orthogonal_target():
    x = np.array([-1.0, 1.0, -1.0, 1.0])
    y = np.array([1.0, 1.0, 3.0, 3.0])
    m = fit_linear(x[:, None], y)
    assert abs(m.coefficients[0]) < 1e-12 and m.intercept == pytest.approx(2.0)


def test_linear_matches_normal_equations(rng):
    X = rng.normal(size=(50, 4)) * [1, 10, 0.1, 3] + [0, 5, -2, 1]
    y = X @ [1, -0.5, 3, 0.2] + 0.1 * rng.normal(size=50)
    m = fit_linear(X, y)
    oracle = ols_oracle(X, y)
    slopes, b = m.raw_coefficients()
    np.testing.assert_allclose(slopes, oracle[1:], atol=1e-8)
    assert b == pytest.approx(oracle[0], abs=1e-8)
    np.testing.assert_allclose(m.predict(X), np.column_stack([np.ones(50), X]) @ oracle, atol=1e-10)


def test_linear_drops_constant_columns(rng):
    X = np.column_stack([rng.normal(size=20), np.full(20, 4.0)])
    m = fit_linear(X, X[:, 0])
    assert m.columns.tolist() == [0] and m.full_coefficients()[1] == 0
    with pytest.raises(PreconditionError):
        fit_linear(rng.normal(size=(3, 3)), rng.normal(size=3))


def test_linear_rank_deficient_flag(rng):
    a = rng.normal(size=20)
    X = np.column_stack([a, 2 * a + 1, rng.normal(size=20)])
    m = fit_linear(X, a)
    assert m.rank_deficient
    np.testing.assert_allclose(m.predict(X), a, atol=1e-10)


def test_latent_single_feature():
    x = np.arange(10.0)
    for kind in ("pcr", "plsr"):
        slopes, _ = fit_latent(x[:, None], 2 * x, kind, 1).as_linear().raw_coefficients()
        assert slopes[0] == pytest.approx(2, abs=1e-12)


def test_full_component_models_equal_ols(rng):
    for _ in range(20):
        P, q = int(rng.integers(15, 40)), int(rng.integers(2, 8))
        X = rng.normal(size=(P, q))
        y = rng.normal(size=P)
        ref = fit_linear(X, y).predict(X)
        for kind in ("pcr", "plsr"):
            np.testing.assert_allclose(fit_latent(X, y, kind, q).predict(X), ref, atol=1e-6)


def test_latent_bounds_and_truncation(rng):
    X = rng.normal(size=(10, 3))
    with pytest.raises(PreconditionError):
        fit_latent(X, rng.normal(size=10), "pcr", 4)
    a = rng.normal(size=10)
    Xr = np.column_stack([a, -a, rng.normal(size=10)])
    with pytest.warns(ConditioningWarning):
        m = fit_latent(Xr, a, "plsr", 3)
    assert m.n_components == 2


def test_linear_round_trip_in_standardized_space(rng):
    X = rng.normal(size=(40, 3)) * 7 + 3
    m = fit_linear(X, rng.normal(size=40))
    Z = (X - m.input_means) / m.input_stds
    np.testing.assert_allclose(Z @ m.coefficients + m.intercept, m.predict(X), atol=1e-10)


def test_important_wavelengths():
    w = np.arange(5.0)
    eq = LinearModel(np.ones(5), 0.0, np.zeros(5), np.ones(5), np.arange(5), 5)
    assert important_wavelengths_linear(eq, w, 0.9) == [(0.0, 4.0)]
    dom = LinearModel(np.array([0.1, 0.1, 1.0, 0.1, 0.1]), 0.0, np.zeros(5), np.ones(5),
                      np.arange(5), 5)
    assert important_wavelengths_linear(dom, w, 0.5) == [(2.0, 2.0)]
    gaps = LinearModel(np.array([1.0, 0.0, 1.0, 1.0, 0.0]), 0.0, np.zeros(5), np.ones(5),
                       np.arange(5), 5)
    assert important_wavelengths_linear(gaps, w, 0.5) == [(0.0, 0.0), (2.0, 3.0)]


# evaluation and CV

def test_nmse_definitions(rng):
    y = rng.normal(size=30)
    assert nmse(y, y, 1.0) == 0.0
    assert nmse(y, np.full(30, y.mean()), union_variance(y)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(PreconditionError):
        nmse(y, y, 0.0)


def test_nmse_shift_invariant(rng):
    tr, te, pred = rng.normal(size=20), rng.normal(size=10), rng.normal(size=10)
    base = nmse(te, pred, union_variance(tr, te))
    shifted = nmse(te + 50, pred + 50, union_variance(tr + 50, te + 50))
    assert shifted == pytest.approx(base, rel=1e-10)


def test_cv_single_candidate(rng):
    X = rng.normal(size=(30, 2))
    res = cv_select_meta(X, X[:, 0], CvGrid([3], [2.0]))
    assert res.best == (3, 2.0) and len(res.table) == 1


def test_cv_returns_argmin(rng):
    x = rng.uniform(-1, 1, size=(60, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = cv_select_meta(x, 3 * x[:, 0] + 1, CvGrid([1, 20], [4.0, 8.0]))
    chosen = [r for r in res.table if (r["neurons"], r["width_scale"]) == res.best][0]
    assert chosen["cv_mse"] == res.best_mse


def test_cv_selection_close_to_best_on_holdout():
    rng = np.random.default_rng(7)
    x = rng.uniform(-2, 2, size=(300, 1))
    y = np.sin(3 * x[:, 0]) + 0.1 * rng.normal(size=300)
    xt = rng.uniform(-2, 2, size=(500, 1))
    yt = np.sin(3 * xt[:, 0]) + 0.1 * rng.normal(size=500)
    grid = CvGrid([2, 5, 8, 12, 20], [0.5, 1.0, 2.0, 4.0])
    res = cv_select_meta(x, y, grid)
    test_mse = {}
    for M in grid.neuron_counts:
        for s in grid.width_scales:
            m = fit_rbfn(x, y, M, s, seed=grid.seed, standardize=True)
            test_mse[(M, s)] = np.mean((yt - m.predict(xt)) ** 2)
    assert test_mse[res.best] <= 1.2 * min(test_mse.values())


def test_cv_grid_validation():
    with pytest.raises(PreconditionError):
        CvGrid([], [1.0])


def test_cv_components_argmin(rng):
    T = rng.normal(size=(90, 2))
    X = T @ rng.normal(size=(2, 12)) + 0.01 * rng.normal(size=(90, 12))
    y = T @ [1.0, -2.0] + 0.3 * rng.normal(size=90)
    for kind in ("pcr", "plsr"):
        res = cv_select_components(X, y, kind, 8)
        assert [r["components"] for r in res.table] == list(range(1, 9))
        assert res.table[res.best[0] - 1]["cv_mse"] == res.best_mse
        # one component cannot carry a two-factor signal
        assert res.best[0] >= 2


def test_model_json_round_trip(tmp_path, rng):
    X = rng.normal(size=(40, 3))
    y = X[:, 0] - X[:, 2] ** 2
    for model in (fit_rbfn(X, y, 4, 2.0, standardize=True), fit_linear(X, y),
                  fit_latent(X, y, "plsr", 2)):
        save_model(model, tmp_path / "m.json", {"columns": [0, 1, 2]})
        back, meta = load_model(tmp_path / "m.json")
        np.testing.assert_allclose(back.predict(X), model.predict(X), atol=1e-12)
        assert meta == {"columns": [0, 1, 2]}
