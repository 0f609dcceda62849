import numpy as np
import pytest

from conftest import TRUE_THETA, LinearModel, linear_problem, rotatable_ccd, simulate
from ipmboot import gauss_newton as gn
from ipmboot import doe, ipm
from ipmboot.errors import InvalidArgumentError, NearSingularMeanError, SingularJacobianError


class FragileModel(LinearModel):
    """Linear mean that is undefined away from the start vector."""

    def __init__(self, C, start):
        super().__init__(C)
        self.start = np.asarray(start, dtype=float)

    def predict(self, theta, data):
        if not np.array_equal(np.asarray(theta, dtype=float), self.start):
            raise NearSingularMeanError(0, 0.0)
        return super().predict(theta, data)


def test_sse_examples(full_spec, noiseless13):
    assert gn.sse(full_spec, TRUE_THETA, noiseless13) == pytest.approx(0.0, abs=1e-28)
    one = LinearModel([[1.0]])
    assert gn.sse(one, [1.0], ipm.Dataset([2.0], [1.0], [1.0])) == 1.0


def test_sse_homogeneous():
    model, data = linear_problem()
    theta = np.zeros(3)
    r = data.y - model.predict(theta, data)
    doubled = data.with_response(model.predict(theta, data) + 2 * r)
    assert gn.sse(model, theta, doubled) == pytest.approx(4 * gn.sse(model, theta, data), rel=1e-14)


def test_solver_config_validation():
    for bad in ({"max_iter": 0}, {"delta": 0.0}, {"delta": -1}, {"max_halvings": -1}, {"sse_rel_tol": -1}):
        with pytest.raises(InvalidArgumentError):
            gn.SolverConfig(**bad)


def test_gn_step_scalar_closed_form():
    c = np.array([1.0, 2.0, 3.0])
    y = np.array([2.0, 3.5, 7.0])
    model = LinearModel(c[:, None])
    data = ipm.Dataset(y, np.ones(3), np.ones(3))
    theta = 0.7
    step = gn.gn_step(model, [theta], data)
    assert step.beta_hat[0] == pytest.approx(np.sum(c * (y - theta * c)) / np.sum(c * c), rel=1e-14)


def test_gn_step_stationary():
    model, data = linear_problem()
    ols = np.linalg.lstsq(model.C, data.y, rcond=None)[0]
    assert np.max(np.abs(gn.gn_step(model, ols, data).beta_hat)) < 1e-12


def test_gn_step_at_truth(full_spec, noiseless13):
    assert np.max(np.abs(gn.gn_step(full_spec, TRUE_THETA, noiseless13).beta_hat)) <= 1e-10


def test_gn_step_singular():
    C = np.column_stack([np.ones(5), np.ones(5)])
    data = ipm.Dataset(np.arange(1.0, 6.0), np.ones(5), np.ones(5))
    with pytest.raises(SingularJacobianError):
        gn.gn_step(LinearModel(C), [0.0, 0.0], data)


@pytest.mark.parametrize("backend", ["python", "auto"])
def test_noiseless_recovery(full_spec, noiseless13, backend):
    res = gn.fit(full_spec, noiseless13, backend=backend)
    assert res.converged
    assert np.max(np.abs(res.theta_hat - TRUE_THETA)) <= 1e-8
    assert res.sse <= 1e-16
    assert res.iterations <= 3


def test_unit_range_design_recovery(full_spec):
    # axial runs land on 1 and 10 in natural units
    h = 4.5 / np.sqrt(2)
    d = rotatable_ccd(ranges=((5.5 - h, 5.5 + h),) * 2)
    assert ipm.Dataset(np.ones(13), *doe.decode(d).T).x1.min() == pytest.approx(1.0)
    data = simulate(full_spec, TRUE_THETA, d)
    res = gn.fit(full_spec, data)
    assert res.converged and np.max(np.abs(res.theta_hat - TRUE_THETA)) <= 1e-8


def test_start_at_minimizer(full_spec, noiseless13):
    res = gn.fit(full_spec, noiseless13, TRUE_THETA)
    assert res.converged and res.iterations == 1 and res.accepted_steps == 0
    np.testing.assert_array_equal(res.theta_hat, TRUE_THETA)


@pytest.mark.parametrize("seed", range(5))
def test_linear_model_one_step(seed):
    model, data = linear_problem(seed=seed)
    rng = np.random.default_rng(100 + seed)
    res = gn.fit(model, data, rng.uniform(-10, 10, 3))
    assert res.converged and res.accepted_steps == 1
    np.testing.assert_allclose(res.theta_hat, np.linalg.lstsq(model.C, data.y, rcond=None)[0], atol=1e-12)


def noisy13(seed=1, sigma=0.05):
    spec = ipm.ModelSpec("second_order_2f_full")
    return spec, simulate(spec, TRUE_THETA, rotatable_ccd(), sigma, np.random.default_rng(seed))


@pytest.mark.parametrize("backend", ["python", "auto"])
def test_fit_invariants(backend):
    spec, data = noisy13()
    res = gn.fit(spec, data, backend=backend)
    assert res.converged
    assert np.all(np.diff(res.sse_trace) <= 0)
    assert res.sse == pytest.approx(float(np.sum(res.residuals**2)), rel=1e-10)
    np.testing.assert_array_equal(res.residuals, data.y - res.fitted)
    np.testing.assert_allclose(res.fitted + res.residuals, data.y, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(res.jacobian, spec.jacobian(res.theta_hat, data))
    if res.criterion == "param":
        if res.iterations > res.accepted_steps:
            # stopped on a computed step too small to apply
            move = gn.gn_step(spec, res.theta_hat, data).beta_hat
        else:
            prev = gn.fit(spec, data, cfg=gn.SolverConfig(max_iter=res.iterations - 1), backend=backend)
            move = res.theta_hat - prev.theta_hat
        assert gn._rel_change(move, res.theta_hat) < gn.SolverConfig().delta


def test_fit_deterministic():
    spec, data = noisy13()
    a, b = gn.fit(spec, data), gn.fit(spec, data)
    assert a.theta_hat.tobytes() == b.theta_hat.tobytes()
    assert a.sse_trace == b.sse_trace and a.iterations == b.iterations


def test_max_iter_not_converged():
    spec, data = noisy13()
    res = gn.fit(spec, data, TRUE_THETA * 1.3, gn.SolverConfig(max_iter=1))
    assert not res.converged and res.status == "max_iter" and res.criterion is None


def test_singular_is_result_state():
    C = np.column_stack([np.ones(5), np.ones(5)])
    data = ipm.Dataset(np.arange(1.0, 6.0), np.ones(5), np.ones(5))
    res = gn.fit(LinearModel(C), data, [0.0, 0.0])
    assert not res.converged and res.status == "singular_jacobian"


def test_damping_exhausted():
    model, data = linear_problem()
    res = gn.fit(FragileModel(model.C, np.zeros(3)), data, np.zeros(3), gn.SolverConfig(max_halvings=3))
    assert not res.converged and res.status == "damping_exhausted"
    assert res.sse_trace == (res.sse,)


def test_bad_start_raises(full_spec, noiseless13):
    with pytest.raises(NearSingularMeanError):
        gn.fit(full_spec, noiseless13, np.zeros(6))


def test_start_shape_checked(full_spec, noiseless13):
    with pytest.raises(InvalidArgumentError):
        gn.fit(full_spec, noiseless13, [1.0, 2.0])


def test_to_dict_fields():
    spec, data = noisy13()
    d = gn.fit(spec, data).to_dict()
    assert {"theta", "sse", "iterations", "converged", "criterion", "sse_trace"} <= set(d)
    assert list(d["theta"]) == list(spec.param_names)


def test_verify_global_stable(full_spec, noiseless13):
    res = gn.fit(full_spec, noiseless13)
    chk = gn.verify_global(full_spec, noiseless13, res)
    assert chk.stable and chk.refit_agrees
    assert len(chk.multistart_sse) == 2 * full_spec.p + 1


def test_verify_global_stable_noisy():
    spec, data = noisy13()
    assert gn.verify_global(spec, data, gn.fit(spec, data)).stable


def test_verify_global_truncated(full_spec, noiseless13):
    res = gn.fit(full_spec, noiseless13, TRUE_THETA * 1.3, gn.SolverConfig(max_iter=1))
    chk = gn.verify_global(full_spec, noiseless13, res)
    assert not chk.stable
    assert chk.multistart_best.sse < res.sse


def test_verify_global_scalar_toy():
    c = np.array([1.0, 2.0, 3.0, 4.0])
    data = ipm.Dataset(np.array([1.1, 1.9, 3.2, 3.9]), np.ones(4), np.ones(4))
    model = LinearModel(c[:, None])
    chk = gn.verify_global(model, data, gn.fit(model, data, [0.5]))
    assert chk.stable
    finite = [s for s in chk.multistart_sse if np.isfinite(s)]
    assert np.ptp(finite) <= 1e-14


def test_multistart_points(full_spec, noiseless13):
    pts = gn.multistart_points(full_spec, noiseless13, TRUE_THETA)
    assert len(pts) == 13
    np.testing.assert_allclose(pts[0], TRUE_THETA, atol=1e-10)
    np.testing.assert_allclose(pts[1][0], 0.8 * TRUE_THETA[0])
    np.testing.assert_allclose(pts[2][0], 1.2 * TRUE_THETA[0])


@pytest.mark.parametrize("backend", ["python", "auto"])
def test_rounding_floor_counts_as_converged(backend):
    # with this noise draw the last Gauss-Newton step, just above delta,
    # cannot lower the SSE at any damping factor
    from ipmboot.rng import gaussian_generator

    spec = ipm.ModelSpec("second_order_2f_full")
    nat = doe.decode(rotatable_ccd())
    y = ipm.mean(spec, TRUE_THETA, nat[:, 0], nat[:, 1]) + 0.05 * gaussian_generator(8).standard_normal(13)
    res = gn.fit(spec, ipm.Dataset(y, nat[:, 0], nat[:, 1]), backend=backend)
    assert res.converged and res.status == "converged"
