"""Photon-number inference from z = x3**2 + p4**2 records.

Three routes are provided: moment estimators of the mean, variance and
g2(0); maximum-likelihood reconstruction of p(n) by expectation-maximization
over the Gamma(n + 1, 1) mixture; and the single-shot posterior over n under
a flat prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from photonz.errors import InvalidArgumentError, NumericalFailure
from photonz.measurement import ZBatch, make_rng
from photonz.states import PhotonDistribution, make_coherent

DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITERATIONS = 1000
NMAX_CAP = 200
G2_GUARD_SIGMAS = 3.0
G2_GUARD_FLOOR = 1e-9
POSTERIOR_TRUNCATION_TOL = 1e-6

# cells (samples x components) above which log-likelihood blocks are recomputed
# each iteration instead of being cached
_CACHE_LIMIT = 1 << 24
_CHUNK_ROWS = 1 << 15


@dataclass(frozen=True)
class MomentSummary:
    """Moment estimates from a z record. ``g2`` is None when undefined."""

    mean_n: float
    var_n: float
    g2: float | None
    mean_z: float
    mean_z2: float
    sample_count: int

    @property
    def g2_defined(self) -> bool:
        return self.g2 is not None

    def to_dict(self) -> dict:
        return {
            "mean_n": self.mean_n,
            "var_n": self.var_n,
            "g2": self.g2,
            "g2_defined": self.g2_defined,
            "mean_z": self.mean_z,
            "mean_z2": self.mean_z2,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> MomentSummary:
        return cls(
            mean_n=float(data["mean_n"]),
            var_n=float(data["var_n"]),
            g2=None if data.get("g2") is None else float(data["g2"]),
            mean_z=float(data["mean_z"]),
            mean_z2=float(data["mean_z2"]),
            sample_count=int(data["sample_count"]),
        )


def g2_from_moments(mean_z: float, mean_z2: float) -> float:
    """g2(0) = (<Z^2> - 4<Z> + 2) / (<Z> - 1)^2."""
    return (mean_z2 - 4.0 * mean_z + 2.0) / (mean_z - 1.0) ** 2


def moment_estimates(batch: ZBatch, guard_sigmas: float = G2_GUARD_SIGMAS) -> MomentSummary:
    """Mean, variance and g2(0) of the photon number from sample moments of z.

    <n> = <z> - 1 and Var(n) = Var(z) - <n> - 1. g2 is reported as undefined
    when the estimated mean photon number is within ``guard_sigmas`` standard
    errors of zero, where the ratio is dominated by noise.
    """
    z = batch.values
    if z.size < 2:
        raise InvalidArgumentError("moment estimates need at least 2 samples")
    mean_z = float(z.mean())
    mean_z2 = float(np.mean(z * z))
    var_z = float(z.var(ddof=1))
    mean_n = mean_z - 1.0
    guard = max(G2_GUARD_FLOOR, guard_sigmas * math.sqrt(var_z / z.size))
    g2 = None if abs(mean_n) < guard else g2_from_moments(mean_z, mean_z2)
    return MomentSummary(
        mean_n=mean_n,
        var_n=var_z - mean_n - 1.0,
        g2=g2,
        mean_z=mean_z,
        mean_z2=mean_z2,
        sample_count=int(z.size),
    )


def bootstrap(values, statistic, n_resamples: int = 200, seed: int = 0) -> np.ndarray:
    """Values of ``statistic`` on ``n_resamples`` with-replacement resamples."""
    values = np.asarray(values)
    rng = make_rng(seed)
    out = np.empty(n_resamples)
    for i in range(n_resamples):
        out[i] = statistic(values[rng.integers(0, values.size, values.size)])
    return out


def default_nmax(values) -> int:
    """Mixture size covering the data: ceil(zmax + 5 sqrt(zmax)), at most 200."""
    zmax = float(np.max(values))
    return min(NMAX_CAP, math.ceil(zmax + 5.0 * math.sqrt(zmax)))


def uniform_prior(n_max: int) -> PhotonDistribution:
    return PhotonDistribution(np.full(n_max + 1, 1.0 / (n_max + 1)))


@dataclass(frozen=True)
class EMConfig:
    """EM settings. ``prior`` defaults to uniform over 0..n_max.

    convergence_tol is the threshold on the per-sample mean log-likelihood
    gain between iterations.
    """

    n_max: int
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    convergence_tol: float = DEFAULT_TOL
    prior: PhotonDistribution | None = None

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise InvalidArgumentError(f"n_max must be a nonnegative integer, got {self.n_max!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be a positive integer")
        if not (np.isfinite(self.convergence_tol) and self.convergence_tol > 0):
            raise InvalidArgumentError("convergence_tol must be > 0")
        prior = self.prior if self.prior is not None else uniform_prior(int(self.n_max))
        if prior.n_max != self.n_max:
            raise InvalidArgumentError(
                f"prior has n_max={prior.n_max}, config has n_max={self.n_max}"
            )
        if np.any(prior.probs <= 0):
            raise InvalidArgumentError("EM prior must be strictly positive")
        object.__setattr__(self, "prior", prior)


@dataclass(frozen=True)
class EMResult:
    distribution: PhotonDistribution
    loglik_trace: tuple = field(default_factory=tuple)
    iterations: int = 0
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "distribution": self.distribution.to_dict(),
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EMResult:
        return cls(
            distribution=PhotonDistribution.from_dict(data["distribution"]),
            loglik_trace=tuple(float(v) for v in data["loglik_trace"]),
            iterations=int(data["iterations"]),
            converged=bool(data["converged"]),
        )


def _log_gamma_block(z, n_max):
    """log Gamma(n+1, 1) density at each z: rows are samples, columns n."""
    n = np.arange(n_max + 1)
    return -z[:, None] + xlogy(n[None, :], z[:, None]) - gammaln(n + 1.0)[None, :]


class _MixtureLikelihood:
    """Component log-likelihoods of a z record, blocked over samples."""

    def __init__(self, z, n_max):
        self.z = z
        self.n_max = n_max
        self.bounds = [(i, min(i + _CHUNK_ROWS, z.size)) for i in range(0, z.size, _CHUNK_ROWS)]
        self.cache = None
        if z.size * (n_max + 1) <= _CACHE_LIMIT:
            self.cache = [_log_gamma_block(z[a:b], n_max) for a, b in self.bounds]

    def blocks(self):
        if self.cache is not None:
            yield from self.cache
        else:
            for a, b in self.bounds:
                yield _log_gamma_block(self.z[a:b], self.n_max)

    def evaluate(self, probs):
        """Return (mean log-likelihood, summed responsibilities or None).

        Responsibilities are computed in log space with the per-sample
        maximum subtracted. The log-likelihood is -inf when some sample has
        zero density under ``probs``.
        """
        with np.errstate(divide="ignore"):
            log_p = np.log(probs)
        total = 0.0
        resp_sum = np.zeros(self.n_max + 1)
        for block in self.blocks():
            log_w = block + log_p[None, :]
            peak = log_w.max(axis=1)
            if not np.all(np.isfinite(peak)):
                return -math.inf, None
            w = np.exp(log_w - peak[:, None])
            norm = w.sum(axis=1)
            total += float(np.sum(peak + np.log(norm)))
            resp_sum += (w / norm[:, None]).sum(axis=0)
        return total / self.z.size, resp_sum


def loglikelihood(batch: ZBatch, dist: PhotonDistribution) -> float:
    """Per-sample mean log marginal likelihood of ``batch`` under ``dist``.

    Returns ``-inf`` when some sample has zero density (e.g. z = 0 with
    p(0) = 0).
    """
    ll, _ = _MixtureLikelihood(batch.values, dist.n_max).evaluate(dist.probs)
    return ll


def em_reconstruct(batch: ZBatch, config: EMConfig | None = None) -> EMResult:
    """Maximum-likelihood p(n) by EM on the Gamma(n + 1, 1) mixture.

    Starting from ``config.prior``, each iteration replaces p(n) by the mean
    posterior responsibility of component n over the record. Iteration stops
    once the mean log-likelihood gain drops below ``config.convergence_tol``
    or after ``config.max_iterations`` updates. The returned distribution is
    the one whose log-likelihood closes the trace.
    """
    z = batch.values
    if np.any(z < 0):
        raise InvalidArgumentError("z values must be nonnegative")
    if config is None:
        config = EMConfig(n_max=default_nmax(z))
    model = _MixtureLikelihood(z, config.n_max)
    probs = config.prior.probs.copy()
    trace = []
    iterations = 0
    converged = False
    while True:
        ll, resp_sum = model.evaluate(probs)
        if not np.isfinite(ll):
            raise NumericalFailure(
                f"non-finite log-likelihood {ll} at iteration {iterations}", iteration=iterations
            )
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < config.convergence_tol:
            converged = True
            break
        if iterations >= config.max_iterations:
            break
        probs = resp_sum / resp_sum.sum()
        iterations += 1
    return EMResult(
        distribution=PhotonDistribution(probs),
        loglik_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
    )


def single_shot_posterior(
    z: float, n_max: int | None = None, tol: float = POSTERIOR_TRUNCATION_TOL
) -> PhotonDistribution:
    """Posterior over n after one outcome z under a flat prior: Poisson(z).

    Its mean and variance both equal z up to truncation. ``n_max=None``
    chooses the smallest bound with tail mass at most ``tol``.
    """
    if not (np.isfinite(z) and z >= 0):
        raise InvalidArgumentError(f"z must be finite and >= 0, got {z!r}")
    return make_coherent(z, n_max, tol=tol)
