import numpy as np
import pytest

from fsir.cv import CvGrid, select_tuning
from fsir.fpca import estimate_eigenbasis
from fsir.index import fit_single_index, predict
from fsir.multi_index import (
    MultiIndexFitError,
    MultiIndexModel,
    backfit,
    fit_recursive,
    loo_error,
    predict_multi,
)
from fsir.simulation import SimScenario, generate_predictors, generate_response

from conftest import sim_data

GRID = CvGrid((0.3, 0.6), (2, 4), folds=4, seed=1)


@pytest.fixture(scope="module")
def vi():
    d = sim_data("vi", 120, 0.1, 21)
    basis = estimate_eigenbasis(d, 4)
    return d, basis, fit_recursive(d, basis, 3, GRID)


def unit_and_sign(b):
    return abs(np.linalg.norm(b) - 1) < 1e-9 and b[np.flatnonzero(b)[0]] > 0


def test_p1_reduces_to_single_index(vi):
    d, basis, _ = vi
    m = fit_recursive(d, basis, 1, GRID)
    sel = select_tuning(d, basis, GRID)
    single, _ = fit_single_index(d, basis, sel.h, sel.r)
    np.testing.assert_array_equal(m.components[0].coefficients, single.coefficients)
    assert m.components[0].bandwidth == single.bandwidth


def test_recursive_residual_identity(vi):
    d, _, m = vi
    res = m.diagnostics["residuals"]
    np.testing.assert_array_equal(res[0], d.responses)
    for k, comp in enumerate(m.components):
        np.testing.assert_allclose(res[k + 1], res[k] - comp.fitted_loo(), atol=1e-12, rtol=0)
        np.testing.assert_array_equal(comp.targets, res[k])
        assert abs(res[k + 1].mean() - (res[k].mean() - comp.fitted_loo().mean())) < 1e-9


def test_tuning_recorded(vi):
    _, _, m = vi
    assert len(m.diagnostics["tuning"]) == 3
    for (r, h), c in zip(m.diagnostics["tuning"], m.components):
        assert c.r == r and c.bandwidth == h


def test_callable_grid_sees_current_residuals(vi):
    d, basis, _ = vi
    seen = []

    def make(data, b):
        seen.append(data.responses.copy())
        return CvGrid((0.5,), (3,))

    m = fit_recursive(d, basis, 2, make)
    np.testing.assert_array_equal(seen[1], d.responses - m.components[0].fitted_loo())


def test_backfit_contract(vi):
    d, basis, rec = vi
    bf = backfit(d, basis, rec.truncated(2))
    assert 1 <= bf.iterations_used <= 10
    assert bf.converged == (bf.final_delta < bf.tol)
    assert len(bf.diagnostics["deltas"]) == bf.iterations_used
    assert all(unit_and_sign(c.coefficients) for c in bf.components)
    for c0, c1 in zip(rec.components, bf.components):
        assert (c0.r, c0.bandwidth) == (c1.r, c1.bandwidth)


def test_backfit_cap(vi):
    d, basis, rec = vi
    bf = backfit(d, basis, rec, tol=0.0, max_iter=3)
    assert bf.iterations_used == 3 and not bf.converged


def test_backfit_zero_iterations(vi):
    d, basis, rec = vi
    assert backfit(d, basis, rec, max_iter=0) is rec


def test_backfit_single_component_at_optimum(vi):
    d, basis, _ = vi
    m = fit_recursive(d, basis, 1, CvGrid((0.5,), (3,)))
    bf = backfit(d, basis, m)
    assert bf.iterations_used == 1 and bf.converged
    assert bf.final_delta < 0.01


def test_backfit_partial_residual_targets(vi):
    # after the last pass, component k was fitted to Y minus the other
    # components' current leave-one-out fits (Gauss-Seidel order)
    d, basis, rec = vi
    bf = backfit(d, basis, rec.truncated(2), tol=0.0, max_iter=2)
    c1, c2 = bf.components
    np.testing.assert_allclose(c2.targets, d.responses - c1.fitted_loo(), atol=1e-12)


def test_predict_multi(vi):
    d, basis, rec = vi
    one = rec.truncated(1)
    np.testing.assert_array_equal(predict_multi(one, d), predict(one.components[0], d))
    np.testing.assert_allclose(predict_multi(rec, d), sum(predict(c, d) for c in rec.components))


def test_zero_targets_predict_zero(vi):
    d, basis, _ = vi
    m = fit_recursive(d.with_responses(np.zeros(d.n)), basis, 2, CvGrid((0.5,), (2,)))
    np.testing.assert_array_equal(predict_multi(m, d), 0.0)


def test_loo_error(vi):
    d, _, rec = vi
    fitted = sum(c.fitted_loo() for c in rec.components)
    assert loo_error(rec, d.responses) == pytest.approx(np.mean((d.responses - fitted) ** 2))


def test_failure_carries_partial(vi):
    d, basis, _ = vi
    grids = iter([CvGrid((0.5,), (2,)), CvGrid((1e-9,), (2,))])
    with pytest.raises(MultiIndexFitError) as exc:
        fit_recursive(d, basis, 2, lambda data, b: next(grids))
    assert exc.value.partial.p == 1


def test_truncated():
    with pytest.raises(ValueError):
        MultiIndexModel([]).truncated(1)


def test_two_indices_beat_one_out_of_sample():
    # model (viii): additive in two indices, judged on fresh curves
    grid = CvGrid((0.3, 0.6), (4,), folds=5)
    errs = []
    for rep in range(20):
        train = sim_data("viii", 200, 0.1, 900 + rep)
        test = generate_predictors(SimScenario("viii", 200, 0.1, seed=5000 + rep))
        yt = generate_response("viii", test, 0.1, 7000 + rep)
        basis = estimate_eigenbasis(train, 4)
        m = fit_recursive(train, basis, 2, grid)
        e1 = np.mean((yt - predict_multi(m.truncated(1), test)) ** 2)
        e2 = np.mean((yt - predict_multi(m, test)) ** 2)
        errs.append((e1, e2))
    e = np.mean(errs, axis=0)
    assert e[1] < e[0]
