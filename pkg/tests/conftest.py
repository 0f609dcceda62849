import numpy as np
import pytest

from ipmboot import doe, ipm

TRUE_THETA = np.array([0.35, -0.01, -0.22, 0.20, 0.05, 0.01])
RANGES = ((2.5, 8.5), (2.5, 8.5))


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="skip tests marked slow")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-slow"):
        return
    skip = pytest.mark.skip(reason="--skip-slow given")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def rotatable_ccd(k=2, n0=5, ranges=RANGES):
    d = doe.augment_ccd(doe.generate_factorial(k), n0, doe.ROTATABLE)
    return d.with_ranges(ranges) if ranges is not None else d


def simulate(spec, theta, design, sigma=0.0, rng=None):
    nat = doe.decode(design)
    y = ipm.mean(spec, theta, nat[:, 0], nat[:, 1])
    if sigma:
        y = y + sigma * rng.standard_normal(y.size)
    return ipm.Dataset(y, nat[:, 0], nat[:, 1])


@pytest.fixture
def full_spec():
    return ipm.ModelSpec("second_order_2f_full")


@pytest.fixture
def ccd13():
    return rotatable_ccd()


@pytest.fixture
def noiseless13(full_spec, ccd13):
    return simulate(full_spec, TRUE_THETA, ccd13)


def fd_jacobian(spec, theta, x1, x2):
    """Central finite differences of the mean, h = 1e-6 * max(1, |theta_k|)."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(spec.p)
    for k in range(spec.p):
        h = 1e-6 * max(1.0, abs(theta[k]))
        up, dn = theta.copy(), theta.copy()
        up[k] += h
        dn[k] -= h
        out[k] = (ipm.mean(spec, up, x1, x2) - ipm.mean(spec, dn, x1, x2)) / (2 * h)
    return out


def admissible_draws(spec, rng, count, phi_floor=0.2):
    """Random (theta, x1, x2) with |phi| >= phi_floor, x in [1, 10]."""
    draws = []
    while len(draws) < count:
        theta = rng.uniform(-1, 1, spec.p)
        x1, x2 = rng.uniform(1, 10, 2)
        if abs(ipm.phi(spec, theta, x1, x2)) >= phi_floor:
            draws.append((theta, x1, x2))
    return draws


class LinearModel:
    """Mean ``C @ theta`` with fixed columns; exact under linearization."""

    def __init__(self, C, names=None):
        self.C = np.asarray(C, dtype=float)
        self.param_names = tuple(names or (f"t{j}" for j in range(self.C.shape[1])))

    def predict(self, theta, data):
        return self.C @ np.asarray(theta, dtype=float)

    def jacobian(self, theta, data):
        return self.C.copy()


def linear_problem(n=12, p=3, seed=0, sigma=0.1):
    rng = np.random.default_rng(seed)
    C = np.column_stack([np.ones(n), rng.uniform(-1, 1, (n, p - 1))])
    theta = rng.uniform(-2, 2, p)
    y = C @ theta + sigma * rng.standard_normal(n)
    data = ipm.Dataset(y, np.ones(n), np.ones(n))
    return LinearModel(C), data
