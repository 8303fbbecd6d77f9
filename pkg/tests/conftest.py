import numpy as np
import pytest

from models.config import EstimatorConfig
from models.discrete_model import DiscreteModel
from models.gaussian_dgp import GaussianLinearDGP


@pytest.fixture
def small_model():
    """Well-conditioned 2x2x2x2 model, complete on both sides at both treatment levels"""
    return DiscreteModel(
        p_w=np.array([0.4, 0.6]),
        p_xz_given_w=np.array(
            [
                [[0.4, 0.2], [0.1, 0.3]],
                [[0.1, 0.2], [0.3, 0.4]],
            ]
        ),
        p_v_given_w=np.array([[0.8, 0.2], [0.25, 0.75]]),
        mu=np.array([[0.0, 2.0], [1.0, 4.0]]),
    )


def identity_channel_model(p_w, p_x_given_w, mu):
    """Z = V = W*: both proxies reveal the latent value exactly"""
    p_w = np.asarray(p_w, dtype=float)
    p_x_given_w = np.asarray(p_x_given_w, dtype=float)
    nw, nx = p_x_given_w.shape
    p_xz = np.zeros((nw, nx, nw))
    for w in range(nw):
        p_xz[w, :, w] = p_x_given_w[w]
    return DiscreteModel(p_w=p_w, p_xz_given_w=p_xz, p_v_given_w=np.eye(nw), mu=np.asarray(mu, dtype=float))


@pytest.fixture
def perfect_proxy_model():
    return identity_channel_model(
        p_w=[0.3, 0.7],
        p_x_given_w=[[0.6, 0.4], [0.2, 0.8]],
        mu=[[1.0, 3.0], [2.0, -1.0]],
    )


@pytest.fixture
def gaussian_dgp():
    return GaussianLinearDGP(b0=1.0, b1=1.0, b2=1.0, alpha=1.0, sigma_v=0.5, sigma_z=0.5, sigma_y=1.0)


@pytest.fixture
def quadratic_config():
    """Degree-2 power series on every block with fixed penalties (no GCV search)"""
    return EstimatorConfig.default(
        1, 1, 1, degree=2, lambda0=1e-3, lambda1=1e-4, lambda2=1e-4, lambda3=1e-4, penalty_rule="fixed"
    )


@pytest.fixture
def saturated_config():
    return EstimatorConfig.saturated(1, 1, 1, lam=1e-10)
