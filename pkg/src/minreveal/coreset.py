"""Core-feature-set verification and the brute-force minimum (`opt`).

A revealed set R is a core set when the classifier output is a single label
with probability at least 1 - delta over the unrevealed features. The pure
(delta = 0) case is decided exactly: in closed form for linear models (the
score interval over the box [-1, 1]^U cannot straddle zero) and by an evenly
spaced grid sweep for robust nonlinear models.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gaussian, models, predictive

METHOD_PURE_LINEAR = "pure-linear"
METHOD_DELTA_LINEAR = "delta-linear"
METHOD_PURE_GRID = "pure-grid"
METHOD_DELTA_TAYLOR = "delta-taylor"
METHOD_DELTA_MC = "delta-mc"

DEFAULT_GRID_CAP = 6
OPT_MAX_SENSITIVE = 20


@dataclass(frozen=True)
class CoreSetResult:
    """Outcome of one verification: the set tested, whether it certifies, the
    representative label, and which test produced the verdict.

    ``confidence`` is the certified probability of the representative label
    (1.0 for pure tests). ``inconclusive`` marks a grid test skipped because
    the unrevealed block exceeded the cap; the caller decides the fallback.
    """

    revealed: tuple[int, ...]
    repr_label: int | None
    delta: float
    is_core: bool
    method: str
    confidence: float | None = None
    inconclusive: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta {self.delta} outside [0, 1)")
        if self.is_core and self.repr_label is None:
            raise ValueError("a certified core set needs a representative label")


def _not_core(method: str, delta: float = 0.0, inconclusive: bool = False) -> CoreSetResult:
    return CoreSetResult((), None, delta, False, method, None, inconclusive)


def test_pure_linear(
    model: models.LinearModel,
    revealed_affine: float,
    theta_u: np.ndarray,
) -> CoreSetResult:
    """Exact pure test for a binary linear model.

    Over the box, the score ranges over revealed_affine +- ||theta_u||_1;
    the set certifies iff that interval does not straddle zero. Runs in time
    linear in the feature count.
    """
    if model.classes != 2:
        raise ValueError("test_pure_linear applies to binary models")
    theta_u = np.atleast_1d(np.asarray(theta_u, dtype=float))
    reach = float(np.abs(theta_u).sum())
    lo = revealed_affine - reach
    hi = revealed_affine + reach
    if lo >= 0.0:
        return CoreSetResult((), 1, 0.0, True, METHOD_PURE_LINEAR, 1.0)
    if hi < 0.0:
        return CoreSetResult((), 0, 0.0, True, METHOD_PURE_LINEAR, 1.0)
    return _not_core(METHOD_PURE_LINEAR)


def pure_linear_multiclass(
    model: models.LinearModel,
    x_fixed: np.ndarray,
    unrevealed_idx: Sequence[int],
) -> CoreSetResult:
    """Pure test for a multi-class linear model via pairwise score margins.

    The candidate label is the prediction at an arbitrary in-box completion
    (zeros); it certifies iff it beats every other class across the whole box,
    with the tie broken toward the lower class index.
    """
    u = [int(i) for i in unrevealed_idx]
    x0 = np.array(x_fixed, dtype=float)
    x0[u] = 0.0
    c = int(models.predict(model, x0))
    obs = [i for i in range(model.n_features) if i not in set(u)]
    for other in range(model.classes):
        if other == c:
            continue
        diff = model.weights[c] - model.weights[other]
        affine = float(model.bias[c] - model.bias[other] + diff[obs] @ x0[obs])
        lo = affine - float(np.abs(diff[u]).sum())
        needs_strict = other < c
        if (lo <= 0.0) if needs_strict else (lo < 0.0):
            return _not_core(METHOD_PURE_LINEAR)
    return CoreSetResult((), c, 0.0, True, METHOD_PURE_LINEAR, 1.0)


def _delta_verdict(ld: predictive.LabelDistribution, delta: float, method: str) -> CoreSetResult:
    label = ld.top_label
    conf = ld.confidence
    if conf >= 1.0 - delta:
        return CoreSetResult((), label, delta, True, method, conf)
    return CoreSetResult((), None, delta, False, method, conf)


def test_delta_linear(
    model: models.LinearModel,
    cond: gaussian.ConditionalGaussian,
    revealed_affine: float,
    delta: float,
) -> CoreSetResult:
    """Gaussian-analytic core test for a binary linear model at delta > 0."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must be in (0, 0.5), got {delta}")
    ld = predictive.threshold_dist(predictive.linear_score_dist(model, cond, revealed_affine))
    return _delta_verdict(ld, delta, METHOD_DELTA_LINEAR)


def grid_points(delta_robust: float) -> np.ndarray:
    """Per-dimension grid over [-1, 1] whose spacing is at most 2 * Delta, so
    every box point sits within Delta (inf-norm) of some grid point."""
    if delta_robust <= 0.0:
        raise ValueError("delta_robust must be positive")
    g = math.ceil(1.0 / delta_robust - 1e-12) + 1
    return np.linspace(-1.0, 1.0, g)


def test_pure_grid(
    model: models.Model,
    x_fixed: np.ndarray,
    unrevealed_idx: Sequence[int],
    delta_robust: float,
    grid_cap: int = DEFAULT_GRID_CAP,
) -> CoreSetResult:
    """Pure test for a Delta-robust classifier: sweep a grid over the
    unrevealed cube and require a constant prediction. Inconclusive when the
    unrevealed block is larger than ``grid_cap`` (the sweep is exponential)."""
    u = [int(i) for i in unrevealed_idx]
    if len(u) > grid_cap:
        return _not_core(METHOD_PURE_GRID, inconclusive=True)
    if not u:
        label = int(models.predict(model, np.asarray(x_fixed, dtype=float)))
        return CoreSetResult((), label, 0.0, True, METHOD_PURE_GRID, 1.0)
    pts = grid_points(delta_robust)
    combos = np.array(list(itertools.product(pts, repeat=len(u))))
    x = np.repeat(np.asarray(x_fixed, dtype=float)[None, :], combos.shape[0], axis=0)
    x[:, u] = combos
    labels = models.predict(model, x)
    if np.all(labels == labels[0]):
        return CoreSetResult((), int(labels[0]), 0.0, True, METHOD_PURE_GRID, 1.0)
    return _not_core(METHOD_PURE_GRID)


def test_delta_nonlinear(
    model: models.Model,
    cond: gaussian.ConditionalGaussian,
    x_fixed: np.ndarray,
    delta: float,
    n_samples: int = 1000,
    seed: int = 0,
) -> CoreSetResult:
    """Approximate core test at delta > 0: gradient-based Gaussian score
    propagation for binary models, Monte Carlo label frequencies otherwise."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must be in (0, 0.5), got {delta}")
    if model.classes == 2:
        ld = predictive.threshold_dist(predictive.taylor_score_dist(model, cond, x_fixed))
        return _delta_verdict(ld, delta, METHOD_DELTA_TAYLOR)
    ld = predictive.mc_label_dist(model, cond, x_fixed, n_samples, seed)
    return _delta_verdict(ld, delta, METHOD_DELTA_MC)


def _pure_test_for(
    model: models.Model,
    x: np.ndarray,
    unrevealed: Sequence[int],
    delta_robust: float,
    grid_cap: int,
) -> CoreSetResult:
    u = list(unrevealed)
    if isinstance(model, models.LinearModel):
        if model.classes == 2:
            obs = [i for i in range(model.n_features) if i not in set(u)]
            affine = float(model.bias[0] + model.weights[0, obs] @ np.asarray(x)[obs])
            return test_pure_linear(model, affine, model.weights[0, u])
        return pure_linear_multiclass(model, x, u)
    return test_pure_grid(model, x, u, delta_robust, grid_cap)


def opt_min_core(
    model: models.Model,
    x: np.ndarray,
    sensitive_idx: Sequence[int],
    delta: float = 0.0,
    delta_robust: float = 0.2,
    grid_cap: int = DEFAULT_GRID_CAP,
) -> CoreSetResult:
    """Brute-force minimum pure core set: enumerate subsets of the sensitive
    features by increasing cardinality (lexicographic within a cardinality)
    and return the first that passes the pure test. Needs the full sample, so
    it is a benchmark lower bound rather than a disclosure protocol.

    Grid tests that exceed ``grid_cap`` unrevealed dimensions are treated as
    failures, which can only make the returned set conservative (larger).
    """
    s = sorted(int(i) for i in sensitive_idx)
    if len(s) > OPT_MAX_SENSITIVE:
        raise ValueError(
            f"{len(s)} sensitive features exceed the enumeration bound {OPT_MAX_SENSITIVE}"
        )
    if delta != 0.0:
        raise ValueError("opt_min_core enumerates pure core sets only (delta = 0)")
    x = np.asarray(x, dtype=float)
    for size in range(len(s) + 1):
        for combo in itertools.combinations(s, size):
            unrevealed = [i for i in s if i not in combo]
            res = _pure_test_for(model, x, unrevealed, delta_robust, grid_cap)
            if res.is_core:
                return CoreSetResult(
                    combo, res.repr_label, 0.0, True, res.method, res.confidence
                )
    # unreachable: the full sensitive set leaves nothing unrevealed and the
    # single remaining grid/linear point always certifies
    raise AssertionError("subset enumeration exhausted without a core set")
