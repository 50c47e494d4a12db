"""Sequential minimal-disclosure engine.

Per sample, the engine alternates certify and reveal: it first checks whether
the features revealed so far already form a core set (so the prediction is
determined, exactly or with probability 1 - delta); if not, it asks for the
unrevealed sensitive feature with the highest expected negative entropy of
the resulting prediction, averaged over that feature's posterior. The loop
ends with a certified representative label after at most |S| reveals, since
the fully revealed sample is always a pure core set.

All randomness is derived from (root seed, sample key, step, feature), so a
run is reproducible per sample and the reveal path does not depend on delta.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from . import coreset, gaussian, models, predictive
from .data_io import FeatureSpace


class OracleError(RuntimeError):
    """The value source for sensitive features failed mid-run."""


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (order-sensitive)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(int(p).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class EngineConfig:
    """Disclosure parameters.

    delta: certification failure probability in [0, 0.5); 0 demands a pure set.
    n_samples: Monte Carlo draws per scoring/certification estimate.
    grid_delta: robustness radius of the nonlinear pure grid test.
    grid_cap: unrevealed dimensions beyond which the grid test is skipped and
        delta_fallback is certified with the Gaussian approximation instead.
    jitter: ridge added to the revealed covariance block before inversion.
    """

    delta: float = 0.0
    n_samples: int = 1000
    seed: int = 0
    grid_delta: float = 0.2
    jitter: float = 1e-6
    grid_cap: int = coreset.DEFAULT_GRID_CAP
    delta_fallback: float = 1e-3

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta < 0.5:
            raise ValueError(f"delta must be in [0, 0.5), got {self.delta}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.grid_delta <= 0.0:
            raise ValueError("grid_delta must be positive")
        if self.jitter < 0.0:
            raise ValueError("jitter must be non-negative")
        if not 0.0 < self.delta_fallback < 0.5:
            raise ValueError("delta_fallback must be in (0, 0.5)")


@dataclass
class RevealState:
    """Per-sample disclosure state: the ordered reveals with their values,
    the remaining unrevealed sensitive set, and the per-step score trace."""

    feature_space: FeatureSpace
    values: np.ndarray                       # full length; NaN where unrevealed
    revealed: list[int] = field(default_factory=list)
    trace: list[tuple[int, dict[int, float]]] = field(default_factory=list)

    @property
    def unrevealed(self) -> tuple[int, ...]:
        taken = set(self.revealed)
        return tuple(i for i in self.feature_space.sensitive_idx if i not in taken)

    @property
    def observed_idx(self) -> tuple[int, ...]:
        """Public plus revealed-sensitive indices, sorted."""
        return tuple(sorted(set(self.feature_space.public_idx) | set(self.revealed)))

    def reveal(self, j: int, value: float, scores: dict[int, float]) -> None:
        if j not in self.unrevealed:
            raise ValueError(f"feature {j} is not an unrevealed sensitive feature")
        self.values[j] = value
        self.revealed.append(j)
        self.trace.append((j, scores))


def init_state(feature_space: FeatureSpace, public_values: np.ndarray) -> RevealState:
    """Fresh state from the public feature values (aligned with public_idx)."""
    public_values = np.atleast_1d(np.asarray(public_values, dtype=float))
    if public_values.size != len(feature_space.public_idx):
        raise ValueError("public values do not match the public index set")
    values = np.full(feature_space.n_features, np.nan)
    values[list(feature_space.public_idx)] = public_values
    return RevealState(feature_space, values)


def leakage(state: RevealState) -> int:
    """Number of sensitive features disclosed."""
    return len(state.revealed)


def _revealed_affine(model: models.LinearModel, state: RevealState) -> np.ndarray:
    obs = list(state.observed_idx)
    return model.bias + model.weights[:, obs] @ state.values[obs]


def _posterior(prior: gaussian.GaussianPrior, state: RevealState,
               target: tuple[int, ...], jitter: float) -> gaussian.ConditionalGaussian:
    obs = list(state.observed_idx)
    return gaussian.condition(prior, obs, state.values[obs], target, jitter)


def certify(
    model: models.Model,
    prior: gaussian.GaussianPrior,
    state: RevealState,
    cfg: EngineConfig,
    sample_key: int = 0,
) -> coreset.CoreSetResult:
    """Test whether the currently revealed set is a core set.

    The test matches the model kind and delta. A pure certificate is always
    accepted first when it is cheap (linear models): a pure core set is a
    core set at every delta, and accepting it keeps per-sample leakage
    monotone in delta. Nonlinear delta = 0 uses the grid sweep, falling back
    to certifying delta_fallback with the Gaussian approximation when the
    unrevealed block exceeds the grid cap.
    """
    u = state.unrevealed
    if isinstance(model, models.LinearModel):
        if model.classes == 2:
            affine = float(_revealed_affine(model, state)[0])
            pure = coreset.test_pure_linear(model, affine, model.weights[0, list(u)])
            if cfg.delta == 0.0 or pure.is_core:
                return pure
            cond = _posterior(prior, state, u, cfg.jitter)
            return coreset.test_delta_linear(model, cond, affine, cfg.delta)
        pure = coreset.pure_linear_multiclass(model, state.values, u)
        if cfg.delta == 0.0 or pure.is_core:
            return pure
        cond = _posterior(prior, state, u, cfg.jitter)
        seed = derive_seed(cfg.seed, sample_key, len(state.revealed), -1, 2)
        return coreset.test_delta_nonlinear(
            model, cond, state.values, cfg.delta, cfg.n_samples, seed)

    if cfg.delta == 0.0:
        res = coreset.test_pure_grid(model, state.values, u, cfg.grid_delta, cfg.grid_cap)
        if not res.inconclusive:
            return res
        delta_eff = cfg.delta_fallback
    else:
        delta_eff = cfg.delta
    cond = _posterior(prior, state, u, cfg.jitter)
    seed = derive_seed(cfg.seed, sample_key, len(state.revealed), -1, 2)
    return coreset.test_delta_nonlinear(
        model, cond, state.values, delta_eff, cfg.n_samples, seed)


def label_distribution(
    model: models.Model,
    prior: gaussian.GaussianPrior,
    state: RevealState,
    cfg: EngineConfig,
    sample_key: int = 0,
) -> predictive.LabelDistribution:
    """Current belief over the prediction given what has been revealed."""
    cond = _posterior(prior, state, state.unrevealed, cfg.jitter)
    if model.classes == 2:
        if isinstance(model, models.LinearModel):
            affine = float(_revealed_affine(model, state)[0])
            sd = predictive.linear_score_dist(model, cond, affine)
        else:
            sd = predictive.taylor_score_dist(model, cond, state.values)
        return predictive.threshold_dist(sd)
    seed = derive_seed(cfg.seed, sample_key, len(state.revealed), -1, 3)
    return predictive.mc_label_dist(model, cond, state.values, cfg.n_samples, seed)


def _entropy_rows(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Entropies of per-row label frequencies; labels shaped (rows, draws)."""
    counts = (labels[:, :, None] == np.arange(n_classes)).sum(axis=1)
    freqs = counts / labels.shape[1]
    return -xlogy(freqs, freqs).sum(axis=1)


def score_feature(
    j: int,
    state: RevealState,
    model: models.Model,
    prior: gaussian.GaussianPrior,
    cfg: EngineConfig,
    sample_key: int = 0,
) -> float:
    """Expected negative entropy of the prediction after revealing feature j.

    Draws n_samples hypothetical values of feature j from its posterior given
    everything observed; for each, forms the posterior of the remaining
    unrevealed features and the induced label distribution, then averages the
    negated entropies. Higher is better (0 means certainty).
    """
    if j not in state.unrevealed:
        raise ValueError(f"feature {j} is not unrevealed")
    obs = list(state.observed_idx)
    obs_vals = state.values[obs]
    step = len(state.revealed)

    cond_j = gaussian.condition(prior, obs, obs_vals, (j,), cfg.jitter)
    z = gaussian.sample(cond_j, cfg.n_samples, derive_seed(cfg.seed, sample_key, step, j, 0))[:, 0]

    rest = tuple(i for i in state.unrevealed if i != j)
    if not rest:
        return 0.0  # the last reveal leaves a point-mass prediction

    cmap = gaussian.conditional_map(prior, tuple(obs) + (j,), rest, cfg.jitter)
    # posterior mean of the rest is affine in z; the covariance is fixed
    base = cmap.mean_for(np.append(obs_vals, prior.mean[j]))
    slope = cmap.gain[:, -1]
    means = base[None, :] + np.outer(z - prior.mean[j], slope)

    if model.classes == 2 and isinstance(model, models.LinearModel):
        theta_rest = model.weights[0, list(rest)]
        affine = float(_revealed_affine(model, state)[0])
        m = affine + model.weights[0, j] * z + means @ theta_rest
        var = float(theta_rest @ cmap.cov @ theta_rest)
        p = _gaussian_exceed(m, var)
        return float(-predictive.binary_entropy(p).mean())

    if model.classes == 2:
        x = np.repeat(state.values[None, :], cfg.n_samples, axis=0)
        x[:, j] = z
        x[:, list(rest)] = means
        scores = models.score(model, x)
        g = models.input_gradient(model, x)[:, 0, list(rest)]
        var = np.einsum("ij,jk,ik->i", g, cmap.cov, g)
        p = _gaussian_exceed(scores, var)
        return float(-predictive.binary_entropy(p).mean())

    # multi-class: Monte Carlo over completions, common noise across z draws
    noise = gaussian.sample(
        gaussian.ConditionalGaussian(rest, np.zeros(len(rest)), cmap.cov),
        cfg.n_samples,
        derive_seed(cfg.seed, sample_key, step, j, 1),
    )
    total = 0.0
    chunk = max(1, 200_000 // cfg.n_samples)
    for start in range(0, z.size, chunk):
        zc = z[start:start + chunk]
        mc = means[start:start + chunk]
        x = np.empty((zc.size, cfg.n_samples, state.values.size))
        x[:] = state.values
        x[:, :, j] = zc[:, None]
        x[:, :, list(rest)] = mc[:, None, :] + noise[None, :, :]
        labels = models.predict(model, x.reshape(-1, x.shape[-1])).reshape(zc.size, -1)
        total += _entropy_rows(labels, model.classes).sum()
    return float(-total / z.size)


def _gaussian_exceed(mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    """P(N(mean, var) >= 0) elementwise, treating var = 0 as a point mass."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.clip(var, 0.0, None))
    sigma_b = np.broadcast_to(sigma, mean.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sigma_b > 0.0, mean / np.where(sigma_b > 0.0, sigma_b, 1.0), 0.0)
    return np.where(sigma_b > 0.0, predictive.std_normal_cdf(ratio),
                    (mean >= 0.0).astype(float))


def choose_feature(
    state: RevealState,
    model: models.Model,
    prior: gaussian.GaussianPrior,
    cfg: EngineConfig,
    sample_key: int = 0,
) -> tuple[int, dict[int, float]]:
    """Score every unrevealed feature and pick the argmax (ties: lowest index)."""
    scores: dict[int, float] = {}
    best_j, best_f = -1, -np.inf
    for j in sorted(state.unrevealed):
        f = score_feature(j, state, model, prior, cfg, sample_key)
        scores[j] = f
        if f > best_f:
            best_j, best_f = j, f
    return best_j, scores


def run(
    feature_space: FeatureSpace,
    public_values: np.ndarray,
    oracle,
    model: models.Model,
    prior: gaussian.GaussianPrior,
    cfg: EngineConfig,
    sample_key: int = 0,
) -> tuple[coreset.CoreSetResult, RevealState]:
    """Run the certify-or-reveal loop for one sample.

    ``oracle`` maps a sensitive feature index to its value and is only called
    for features the engine decides to reveal. Returns the certified result
    (with ``revealed`` in reveal order) and the final state with its trace.
    """
    state = init_state(feature_space, public_values)
    for _ in range(len(feature_space.sensitive_idx) + 1):
        res = certify(model, prior, state, cfg, sample_key)
        if res.is_core:
            return (
                coreset.CoreSetResult(
                    tuple(state.revealed), res.repr_label, res.delta,
                    True, res.method, res.confidence,
                ),
                state,
            )
        j, scores = choose_feature(state, model, prior, cfg, sample_key)
        try:
            value = float(oracle(j))
            if not np.isfinite(value):
                raise ValueError(f"non-finite value for feature {j}")
        except Exception as exc:
            err = OracleError(
                f"oracle failed for feature {j} after {len(state.revealed)} reveals: {exc}"
            )
            err.state = state  # partial trace for the caller
            raise err from exc
        state.reveal(j, float(np.clip(value, -1.0, 1.0)), scores)
    raise AssertionError("disclosure loop failed to terminate")  # pragma: no cover


def oracle_from_row(row: np.ndarray):
    """Batch-mode oracle: look sensitive values up in a dataset row."""
    row = np.asarray(row, dtype=float)
    return lambda j: float(row[j])


def worker_count() -> int:
    """Worker-pool size for batch audits, capped by MINREVEAL_THREADS."""
    raw = os.environ.get("MINREVEAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def audit_rows(
    model: models.Model,
    prior: gaussian.GaussianPrior,
    dataset,
    cfg: EngineConfig,
) -> list[tuple[coreset.CoreSetResult, RevealState]]:
    """Run the engine over every row of a dataset (each row is one sample;
    its public entries seed the state and its sensitive entries back the
    oracle). Output order follows the row order regardless of the pool."""
    fs = dataset.feature_space
    pub = list(fs.public_idx)

    def one(i: int):
        row = dataset.rows[i]
        return run(fs, row[pub], oracle_from_row(row), model, prior, cfg, sample_key=i)

    workers = worker_count()
    indices = range(len(dataset))
    if workers == 1:
        return [one(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, indices))
