"""Joint Gaussian prior over input features and conditioning on revealed values.

The conditional of the unrevealed block given revealed values is the usual
Schur-complement form: with revealed indices R and target indices T,

    mean = mu_T + S_TR (S_RR + lam I)^-1 (x_R - mu_R)
    cov  = S_TT - S_TR (S_RR + lam I)^-1 S_RT

A small jitter lam keeps rank-deficient revealed blocks invertible; it
escalates tenfold on failure up to 1e-2 before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_JITTER = 1e-2
_SYM_TOL = 1e-9


class NumericalError(RuntimeError):
    """Conditioning failed even after jitter escalation."""


@dataclass(frozen=True)
class GaussianPrior:
    """Mean vector and covariance matrix of the joint feature distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match the mean")
        if np.abs(cov - cov.T).max(initial=0.0) > _SYM_TOL:
            raise ValueError("covariance is not symmetric")
        for arr, field in ((mean, "mean"), (cov, "cov")):
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "GaussianPrior":
        return cls(np.array(payload["mean"], dtype=float),
                   np.array(payload["cov"], dtype=float))


@dataclass(frozen=True)
class ConditionalGaussian:
    """Posterior of the features at ``target_idx`` given the revealed values."""

    target_idx: tuple[int, ...]
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float).reshape(mean.size, mean.size)
        if mean.size != len(self.target_idx):
            raise ValueError("conditional dimension does not match target_idx")
        for arr, field in ((mean, "mean"), (cov, "cov")):
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class ConditionalMap:
    """Value-independent part of a conditioning: posterior covariance plus the
    affine map from revealed values to the posterior mean. Reusable across many
    revealed-value vectors for the same (revealed, target) index pair."""

    revealed_idx: tuple[int, ...]
    target_idx: tuple[int, ...]
    mu_revealed: np.ndarray
    mu_target: np.ndarray
    gain: np.ndarray  # (|target| x |revealed|)
    cov: np.ndarray

    def mean_for(self, revealed_vals: np.ndarray) -> np.ndarray:
        vals = np.atleast_1d(np.asarray(revealed_vals, dtype=float))
        return self.mu_target + self.gain @ (vals - self.mu_revealed)

    def conditional(self, revealed_vals: np.ndarray) -> ConditionalGaussian:
        return ConditionalGaussian(self.target_idx, self.mean_for(revealed_vals), self.cov)


def fit_prior(train) -> GaussianPrior:
    """Sample mean and population (1/N) covariance of the training rows."""
    rows = np.asarray(train.rows, dtype=float)
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 rows to fit a prior")
    mu = rows.mean(axis=0)
    centered = rows - mu
    cov = centered.T @ centered / rows.shape[0]
    return GaussianPrior(mu, (cov + cov.T) / 2.0)


def conditional_map(
    prior: GaussianPrior,
    revealed_idx: Sequence[int],
    target_idx: Sequence[int],
    jitter: float = 1e-6,
) -> ConditionalMap:
    """Precompute the Schur-complement pieces for one (revealed, target) pair."""
    rev = tuple(int(i) for i in revealed_idx)
    tgt = tuple(int(i) for i in target_idx)
    if set(rev) & set(tgt):
        raise ValueError("revealed and target index sets overlap")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")

    mu_r = prior.mean[list(rev)]
    mu_t = prior.mean[list(tgt)]
    cov_tt = prior.cov[np.ix_(tgt, tgt)]
    if not rev or not tgt:
        gain = np.zeros((len(tgt), len(rev)))
        return ConditionalMap(rev, tgt, mu_r, mu_t, gain, cov_tt.copy())

    cov_rr = prior.cov[np.ix_(rev, rev)]
    cov_rt = prior.cov[np.ix_(rev, tgt)]
    lam = jitter
    while True:
        try:
            solved = np.linalg.solve(cov_rr + lam * np.eye(len(rev)), cov_rt)
            if not np.all(np.isfinite(solved)):
                raise np.linalg.LinAlgError("non-finite solve")
            gain = solved.T  # S_TR (S_RR + lam I)^-1
            cov = cov_tt - gain @ cov_rt
            cov = (cov + cov.T) / 2.0
            return ConditionalMap(rev, tgt, mu_r, mu_t, gain, cov)
        except np.linalg.LinAlgError:
            lam = 1e-6 if lam == 0.0 else lam * 10.0
            if lam > MAX_JITTER:
                est = np.linalg.cond(cov_rr + MAX_JITTER * np.eye(len(rev)))
                raise NumericalError(
                    f"conditioning failed for revealed block of size {len(rev)} "
                    f"(condition estimate {est:.3e} at jitter {MAX_JITTER})"
                ) from None


def condition(
    prior: GaussianPrior,
    revealed_idx: Sequence[int],
    revealed_vals: np.ndarray,
    target_idx: Sequence[int],
    jitter: float = 1e-6,
) -> ConditionalGaussian:
    """Posterior of ``target_idx`` given observed values at ``revealed_idx``.

    With an empty revealed set this is just the prior marginal (pure slicing).
    """
    return conditional_map(prior, revealed_idx, target_idx, jitter).conditional(revealed_vals)


def sample(cond: ConditionalGaussian, n: int, seed: int) -> np.ndarray:
    """Draw n rows from the conditional, deterministically under ``seed``.

    The covariance is factored by eigendecomposition with negative
    eigenvalues (floating-point PSD violations) clipped to zero.
    """
    if n < 1:
        raise ValueError("need at least one draw")
    k = cond.dim
    rng = np.random.default_rng(seed)
    if k == 0:
        return np.zeros((n, 0))
    w, v = np.linalg.eigh(cond.cov)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    return cond.mean + rng.standard_normal((n, k)) @ root.T
