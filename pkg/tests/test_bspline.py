import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import BSpline

from splinesel import bspline as bs
from splinesel.errors import (
    DomainError,
    IllPosedLooError,
    PreconditionError,
    SingularDesignError,
)
from splinesel.spectra import SpectraSet


def scipy_design(basis, w):
    """Independent evaluation through scipy's clamped B-spline design matrix."""
    t = basis.extended_knots
    return BSpline.design_matrix(np.asarray(w, float), t, basis.order - 1).toarray()


def refit_loo(basis, w, s):
    """Leave-one-out error by refitting N times on the dense design."""
    B = bs.design_matrix(basis, w)
    errs = []
    for k in range(len(w)):
        keep = np.arange(len(w)) != k
        coef = np.linalg.lstsq(B[keep], s[keep], rcond=None)[0]
        errs.append((s[k] - B[k] @ coef) ** 2)
    return float(np.mean(errs))


def scan_range(row, w, eps):
    """Bounds read literally off the row: first and last |entry| >= eps * max."""
    a = np.abs(row)
    thr = eps * a.max()
    lo = 0
    while a[lo] < thr:
        lo += 1
    hi = len(a) - 1
    while a[hi] < thr:
        hi -= 1
    return w[lo], w[hi]


def test_build_basis_counts():
    assert bs.build_basis(400, 2498, 151, 5).n_functions == 155
    b = bs.build_basis(0, 1, 4, 1)
    assert b.n_functions == 4
    np.testing.assert_allclose(b.knots, [0, 0.25, 0.5, 0.75, 1])
    with pytest.raises(PreconditionError):
        bs.build_basis(0, 1, 0, 3)
    with pytest.raises(PreconditionError):
        bs.build_basis(1, 1, 3, 3)


def test_basis_for_size():
    b = bs.basis_for_size(155, 5, 400, 2498)
    assert (b.intervals, b.order) == (151, 5)


def test_order_one_is_indicator():
    b = bs.build_basis(0, 1, 4, 1)
    np.testing.assert_array_equal(bs.evaluate_basis(b, 0.6), [0, 0, 1, 0])
    np.testing.assert_array_equal(bs.evaluate_basis(b, 1.0), [0, 0, 0, 1])
    np.testing.assert_array_equal(bs.evaluate_basis(b, 0.5), [0, 0, 1, 0])


def test_single_interval_cubic_is_bernstein():
    b = bs.build_basis(0, 1, 1, 4)
    w = np.linspace(0, 1, 201)
    bern = np.stack([math.comb(3, i) * w**i * (1 - w) ** (3 - i) for i in range(4)], axis=1)
    assert np.abs(bs.design_matrix(b, w) - bern).max() < 1e-12


def test_hat_functions_at_midpoint():
    b = bs.build_basis(0, 4, 4, 2)
    v = bs.evaluate_basis(b, 1.5)
    np.testing.assert_allclose(v, [0, 0.5, 0.5, 0, 0], atol=1e-15)


def test_evaluate_outside_domain():
    b = bs.build_basis(0, 1, 3, 3)
    with pytest.raises(DomainError):
        bs.evaluate_basis(b, 1.0001)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
def test_matches_scipy_design(d, rng):
    b = bs.build_basis(-2.0, 3.0, 7, d)
    w = np.sort(rng.uniform(-2.0, 3.0, 300))
    w = np.concatenate([w, [-2.0, 3.0]])
    # scipy puts w_max in the last interval as well
    assert np.abs(bs.design_matrix(b, w) - scipy_design(b, w)).max() < 1e-13


@settings(max_examples=40, deadline=None)
@given(p=st.integers(1, 40), d=st.integers(1, 6), lo=st.floats(-1e3, 1e3),
       span=st.floats(1e-2, 1e3), seed=st.integers(0, 2**31))
def test_partition_of_unity_and_local_support(p, d, lo, span, seed):
    b = bs.build_basis(lo, lo + span, p, d)
    w = np.clip(np.random.default_rng(seed).uniform(lo, lo + span, 200), lo, lo + span)
    B = bs.design_matrix(b, w)
    assert np.abs(B.sum(axis=1) - 1).max() < 1e-12
    assert ((B > 0).sum(axis=1) <= d).all()
    assert (B >= 0).all()


def test_support_spans_at_most_d_intervals():
    b = bs.build_basis(0, 10, 10, 4)
    w = np.linspace(0, 10, 1001)
    B = bs.design_matrix(b, w)
    for i in range(b.n_functions):
        nz = w[B[:, i] > 0]
        assert nz.max() - nz.min() <= 4 * 1.0 + 1e-12


def test_identity_projection_for_one_point_per_interval():
    w = np.arange(10) + 0.5
    b = bs.build_basis(0, 10, 10, 1)
    # the evaluation grid must lie within the basis domain
    R = bs.projection_matrix(b, w)
    np.testing.assert_allclose(R.entries, np.eye(10), atol=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_polynomial_reproduction(d, rng):
    w = np.linspace(400, 1000, 137)
    b = bs.build_basis(400, 1000, 9, d)
    R = bs.projection_matrix(b, w)
    x = (w - 700) / 300
    s = np.polyval(rng.normal(size=d), x)
    rec = bs.design_matrix(b, w) @ (R.entries @ s)
    assert np.linalg.norm(rec - s) / np.linalg.norm(s) < 1e-9


def test_projection_matches_dense_least_squares(rng):
    w = np.sort(rng.uniform(0, 1, 50))
    w[0], w[-1] = 0.0, 1.0
    b = bs.basis_for_size(12, 4, 0, 1)
    s = rng.normal(size=50)
    R = bs.projection_matrix(b, w)
    dense = np.linalg.lstsq(bs.design_matrix(b, w), s, rcond=None)[0]
    np.testing.assert_allclose(R.entries @ s, dense, atol=1e-8)
    B = bs.design_matrix(b, w)
    np.testing.assert_allclose(R.entries, np.linalg.solve(B.T @ B, B.T), atol=1e-9)


def test_projection_band_structure():
    w = np.linspace(0, 1, 200)
    R = bs.projection_matrix(bs.basis_for_size(20, 4, 0, 1), w)
    for row in R.entries:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        assert nz.size > 0
    assert R.entries.shape == (20, 200)


def test_least_squares_optimality(rng):
    w = np.linspace(0, 1, 80)
    b = bs.basis_for_size(10, 4, 0, 1)
    s = np.sin(7 * w) + 0.1 * rng.normal(size=80)
    B = bs.design_matrix(b, w)
    a = bs.projection_matrix(b, w).entries @ s
    base = np.sum((s - B @ a) ** 2)
    for i in range(b.n_functions):
        for delta in (1e-4, -1e-4):
            e = a.copy()
            e[i] += delta
            assert np.sum((s - B @ e) ** 2) >= base


def test_empty_interval_is_singular():
    w = np.array([0.0, 0.1, 0.2, 0.9, 1.0])
    with pytest.raises(SingularDesignError, match="interval"):
        bs.projection_matrix(bs.build_basis(0, 1, 4, 1), w)


def test_too_many_functions():
    with pytest.raises((SingularDesignError, PreconditionError)):
        bs.projection_matrix(bs.basis_for_size(12, 4, 0, 1), np.linspace(0, 1, 10))


def test_compress_constant_and_zero(rng):
    w = np.linspace(400, 500, 60)
    b = bs.basis_for_size(15, 4, 400, 500)
    R = bs.projection_matrix(b, w)
    sp = SpectraSet(w, np.vstack([np.full(60, 2.5), np.zeros(60), rng.normal(size=60)]))
    c = bs.compress(R, sp)
    assert c.coefficients.shape == (3, 15)
    np.testing.assert_allclose(bs.reconstruct(c, w)[0], 2.5, atol=1e-10)
    np.testing.assert_array_equal(c.coefficients[1], 0)
    dense = np.linalg.lstsq(bs.design_matrix(b, w), sp.responses.T, rcond=None)[0].T
    np.testing.assert_allclose(c.coefficients, dense, atol=1e-10)


def test_compress_wavelength_mismatch():
    w = np.linspace(0, 1, 20)
    R = bs.projection_matrix(bs.basis_for_size(5, 2, 0, 1), w)
    with pytest.raises(PreconditionError):
        bs.compress(R, SpectraSet(w + 0.01, np.zeros((2, 20))))


def test_reconstruction_error_shrinks_on_nested_knots(rng):
    w = np.linspace(0, 1, 300)
    s = np.sin(9 * w) + np.exp(-((w - 0.3) / 0.05) ** 2) + 0.01 * rng.normal(size=300)
    errs = []
    for p in (4, 8, 16, 32):
        b = bs.build_basis(0, 1, p, 4)
        a = bs.projection_matrix(b, w).entries @ s
        errs.append(np.sum((s - bs.design_matrix(b, w) @ a) ** 2))
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))


def test_loo_hand_computed():
    b = bs.build_basis(0, 2, 1, 1)
    assert bs.loo_error_spectrum(b, np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.0, 3.0])) == pytest.approx(4.5, rel=1e-12)


def test_loo_polynomial_is_zero():
    w = np.linspace(0, 1, 40)
    s = 3 * w**3 - w + 2
    assert bs.loo_error_spectrum(bs.basis_for_size(8, 4, 0, 1), w, s) < 1e-16 * 4


def test_loo_matches_refit(rng):
    w = np.linspace(0, 1, 12)
    b = bs.basis_for_size(4, 3, 0, 1)
    s = rng.normal(size=12)
    assert bs.loo_error_spectrum(b, w, s) == pytest.approx(refit_loo(b, w, s), rel=1e-8)


def test_loo_ill_posed():
    w = np.linspace(0, 1, 5)
    with pytest.raises(IllPosedLooError):
        bs.loo_error_spectrum(bs.build_basis(0, 1, 4, 1), w, np.arange(5.0))


def test_total_loo_additive(rng):
    w = np.linspace(0, 1, 30)
    b = bs.basis_for_size(7, 4, 0, 1)
    s = rng.normal(size=30)
    single = bs.loo_error_spectrum(b, w, s)
    assert bs.total_loo(b, SpectraSet(w, np.tile(s, (4, 1)))) == pytest.approx(4 * single, rel=1e-12)
    assert bs.total_loo(b, SpectraSet(w, np.empty((0, 30)))) == 0.0
    X = rng.normal(size=(5, 30))
    oracle = sum(refit_loo(b, w, x) for x in X)
    assert bs.total_loo(b, SpectraSet(w, X)) == pytest.approx(oracle, rel=1e-8)


def test_select_polynomial_picks_smallest_n():
    w = np.linspace(0, 1, 60)
    X = np.stack([np.polyval(c, w) for c in np.random.default_rng(0).normal(size=(4, 4))])
    sel = bs.select_basis_size(SpectraSet(w, X), (5, 20), orders=(4,))
    assert (sel.n_functions, sel.order) == (5, 4)


def test_exhaustive_not_worse_than_coarse(rng):
    w = np.linspace(0, 1, 200)
    X = np.stack([np.sin(6 * w + ph) + np.exp(-((w - 0.5) / 0.03) ** 2) for ph in rng.uniform(0, 3, 6)])
    X += 0.02 * rng.normal(size=X.shape)
    sp = SpectraSet(w, X)
    ex = bs.select_basis_size(sp, (10, 100), orders=(3, 4), strategy="exhaustive")
    cf = bs.select_basis_size(sp, (10, 100), orders=(3, 4), strategy="coarse_to_fine")
    assert ex.loo <= cf.loo
    assert ex.loo == min(c[2] for c in ex.loo_curve)
    curve = {(n, d): v for n, d, v in ex.loo_curve}
    assert curve[(cf.n_functions, cf.order)] == cf.loo


def test_select_errors():
    sp = SpectraSet(np.linspace(0, 1, 20), np.zeros((2, 20)))
    with pytest.raises(PreconditionError):
        bs.select_basis_size(sp, (12, 8))
    assert bs.default_n_range(1050) == (52, 525)


def test_wavelength_range_single_entry():
    b = bs.build_basis(0, 1, 10, 1)
    R = bs.projection_matrix(b, np.linspace(0.05, 0.95, 10))
    r = bs.wavelength_range(R, 3, 0.3)
    assert r.lower == r.upper == R.wavelengths[3]


def test_wavelength_range_matches_scan_and_nests(rng):
    w = np.linspace(400, 2498, 1050)
    R = bs.projection_matrix(bs.build_basis(400, 2498, 151, 5), w)
    for i in rng.choice(155, 15, replace=False):
        wide = bs.wavelength_range(R, int(i), 0.01)
        narrow = bs.wavelength_range(R, int(i), 0.05)
        assert (wide.lower, wide.upper) == scan_range(R.entries[i], w, 0.01)
        assert wide.lower <= narrow.lower <= narrow.upper <= wide.upper
    with pytest.raises(PreconditionError):
        bs.wavelength_range(R, 0, 1.0)


def test_merge_ranges():
    assert bs.merge_ranges([(400, 816), (500, 700)]) == [(400, 816)]
    assert bs.merge_ranges([]) == []
    assert bs.merge_ranges([(5, 6), (1, 2), (2, 3)]) == [(1, 3), (5, 6)]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 10)), max_size=12))
def test_merge_ranges_is_union(pairs):
    ivs = [(a, a + l) for a, l in pairs]
    merged = bs.merge_ranges(ivs)
    grid = np.arange(0, 61, 0.5)
    inside = lambda x, s: any(a <= x <= b for a, b in s)
    assert all(inside(x, ivs) == inside(x, merged) for x in grid)
    assert all(b1 < a2 for (_, b1), (a2, _) in zip(merged, merged[1:]))


def test_csv_exports(tmp_path):
    w = np.linspace(0, 1, 30)
    R = bs.projection_matrix(bs.basis_for_size(6, 3, 0, 1), w)
    bs.projection_to_csv(R, tmp_path / "r.csv", rows=[0, 2])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 31
    c = bs.compress(R, SpectraSet(w, np.ones((2, 30)), np.array([1.0, 2.0])))
    bs.compressed_to_csv(c, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0].startswith("target,1")
