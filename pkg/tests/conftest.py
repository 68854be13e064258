import numpy as np
import pytest

from ogmkit import Metric, SmoothOracle


def diag_quadratic(d, mu_extra=0.0, mu_reported=None, x_star_known=True):
    """Smooth oracle f(x) = 0.5 x^T diag(d) x + (mu_extra/2)|x|^2."""
    d = np.asarray(d, dtype=float)
    n = d.size

    def f(x):
        return 0.5 * float(x @ (d * x)) + 0.5 * mu_extra * float(x @ x)

    def grad(x):
        return d * x + mu_extra * x

    L = float(d.max()) + mu_extra
    mu = float(d.min()) + mu_extra if mu_reported is None else mu_reported
    return SmoothOracle(
        dim=n, f=f, grad=grad, L=L, mu=mu,
        x_star=np.zeros(n) if x_star_known else None,
        f_star=0.0 if x_star_known else None, name="diag-quad")


def random_quadratic(rng, n, mu, L):
    """Random diagonal quadratic with spectrum spanning [mu, L] exactly."""
    d = rng.uniform(mu, L, n)
    d[0], d[-1] = L, mu
    return diag_quadratic(d, mu_reported=mu)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def metric():
    return Metric.identity()
