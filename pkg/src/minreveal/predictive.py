"""Distributions of model predictions when part of the input stays unrevealed.

For a binary linear scorer and a Gaussian posterior over the unrevealed
block, the pre-threshold score is exactly Gaussian; thresholding at zero
turns it into a Bernoulli with p = Phi(mean / std). Nonlinear scorers get a
first-order (gradient-based) Gaussian approximation, and multi-class hard
labels fall back to Monte Carlo frequencies. Entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, xlogy

from . import gaussian, models

_SQRT2 = math.sqrt(2.0)
_VAR_FLOOR = -1e-10


def std_normal_cdf(z: np.ndarray) -> np.ndarray:
    """Phi(z) via the error function; accepts scalars or arrays."""
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=float) / _SQRT2))


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """Entropy of Bern(p) in nats with the 0 log 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


@dataclass(frozen=True)
class ScoreDistribution:
    """Gaussian law of the pre-threshold score: mean and variance."""

    mean: float
    var: float

    def __post_init__(self) -> None:
        if self.var < _VAR_FLOOR:
            raise ValueError(f"score variance {self.var} is negative beyond round-off")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "var", float(max(self.var, 0.0)))

    @property
    def std(self) -> float:
        return math.sqrt(self.var)


@dataclass(frozen=True)
class LabelDistribution:
    """Probabilities over the label set; binary is Bern(p) with p = probs[1]."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if probs.min(initial=0.0) < -1e-12:
            raise ValueError("negative label probability")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"label probabilities sum to {probs.sum()}, not 1")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p: float) -> "LabelDistribution":
        return cls(np.array([1.0 - p, p]))

    @property
    def p(self) -> float:
        """Probability of label 1 (binary only)."""
        if self.probs.size != 2:
            raise ValueError("p is only defined for binary distributions")
        return float(self.probs[1])

    @property
    def top_label(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def confidence(self) -> float:
        return float(self.probs.max())


def linear_score_dist(
    model: models.LinearModel,
    cond: gaussian.ConditionalGaussian,
    revealed_affine: float,
) -> ScoreDistribution:
    """Exact score law for a binary linear model: the revealed affine part
    plus the Gaussian contribution of the unrevealed weights."""
    if model.classes != 2:
        raise ValueError("linear_score_dist is defined for binary models")
    if cond.target_idx and max(cond.target_idx) >= model.n_features:
        raise ValueError("conditional target indices exceed the model's features")
    theta_u = model.weights[0, list(cond.target_idx)]
    mean = float(revealed_affine + theta_u @ cond.mean)
    var = float(theta_u @ cond.cov @ theta_u) if cond.dim else 0.0
    return ScoreDistribution(mean, max(var, 0.0))


def taylor_score_dist(
    model: models.Model,
    cond: gaussian.ConditionalGaussian,
    x_fixed: np.ndarray,
) -> ScoreDistribution:
    """First-order score approximation for a binary model.

    The score is evaluated with the unrevealed block set to the posterior
    mean; the variance is g' cov g with g the input gradient restricted to
    the unrevealed coordinates at that point. Exact for linear models.
    """
    if model.classes != 2:
        raise ValueError("taylor_score_dist is defined for binary models")
    u = list(cond.target_idx)
    x_eval = np.array(x_fixed, dtype=float)
    x_eval[u] = cond.mean
    mean = float(models.score(model, x_eval))
    g = models.input_gradient(model, x_eval)[0, u]
    var = float(g @ cond.cov @ g) if cond.dim else 0.0
    return ScoreDistribution(mean, max(var, 0.0))


def threshold_dist(sd: ScoreDistribution) -> LabelDistribution:
    """Bernoulli law of the thresholded score; a degenerate score collapses
    to a point mass on the sign (score zero counts as label 1)."""
    if sd.std == 0.0:
        return LabelDistribution.bernoulli(1.0 if sd.mean >= 0.0 else 0.0)
    return LabelDistribution.bernoulli(float(std_normal_cdf(sd.mean / sd.std)))


def mc_label_dist(
    model: models.Model,
    cond: gaussian.ConditionalGaussian,
    x_fixed: np.ndarray,
    n_samples: int = 1000,
    seed: int = 0,
) -> LabelDistribution:
    """Label frequencies over completions drawn from the posterior."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    draws = gaussian.sample(cond, n_samples, seed)
    x = np.repeat(np.asarray(x_fixed, dtype=float)[None, :], n_samples, axis=0)
    x[:, list(cond.target_idx)] = draws
    labels = models.predict(model, x)
    counts = np.bincount(labels, minlength=model.classes)
    return LabelDistribution(counts / n_samples)


def entropy(ld: LabelDistribution) -> float:
    """Shannon entropy of the label distribution in nats."""
    return float(-xlogy(ld.probs, ld.probs).sum())


def epsilon_bound(delta: float) -> float:
    """Largest possible prediction entropy of a core set certified at
    failure probability delta: the binary entropy at 1 - delta."""
    if not 0.0 <= delta < 0.5:
        raise ValueError(f"delta must be in [0, 0.5), got {delta}")
    return float(binary_entropy(1.0 - delta))
