import numpy as np
import pytest

from minreveal.data_io import FeatureSpace
from minreveal.models import HIDDEN_WIDTH, LinearModel, MlpModel


@pytest.fixture
def loan_feature_space():
    """Three-feature loan example: Job public, Loc and Inc sensitive."""
    return FeatureSpace(("Job", "Loc", "Inc"), (0,), (1, 2), ((-1.0, 1.0),) * 3)


@pytest.fixture
def loan_model():
    """Binary linear scorer 1.0*Job - 0.5*Loc + 0.5*Inc."""
    return LinearModel(np.array([[1.0, -0.5, 0.5]]), np.array([0.0]), 2)


def embed_linear_in_mlp(theta, bias=0.0, shift=10.0) -> MlpModel:
    """MLP that reproduces theta' x + bias exactly for |x_i| < shift.

    Both hidden layers stay in the positive (pass-through) ReLU region, so the
    network is identically the linear map there, gradients included.
    """
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    if d > HIDDEN_WIDTH:
        raise ValueError("embedding supports at most HIDDEN_WIDTH inputs")
    w1 = np.zeros((HIDDEN_WIDTH, d))
    w1[:d, :] = np.eye(d)
    b1 = np.full(HIDDEN_WIDTH, shift)
    w2 = np.eye(HIDDEN_WIDTH)
    b2 = np.zeros(HIDDEN_WIDTH)
    w3 = np.zeros((1, HIDDEN_WIDTH))
    w3[0, :d] = theta
    b3 = np.array([bias - shift * theta.sum()])
    return MlpModel((w1, w2, w3), (b1, b2, b3), 2)


def random_psd(rng, d, scale=1.0):
    a = rng.normal(size=(d, d))
    cov = a @ a.T / d * scale
    return (cov + cov.T) / 2.0
