"""Truncated photon-number distributions and the efficiency (Bernoulli) maps.

A :class:`PhotonDistribution` holds the diagonal p(n) of a single-mode
density matrix for n = 0..n_max. Constructors for the standard sources fail
loudly when the analytic tail beyond ``n_max`` exceeds the truncation
tolerance instead of silently renormalising it away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy
from scipy.stats import poisson

from photonz.errors import IllConditionedError, InvalidArgumentError, TruncationError

TRUNCATION_TOL = 1e-8
NORMALIZATION_TOL = 1e-9
NEGATIVITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Photon-number probabilities ``probs[n]`` for n = 0..n_max.

    ``truncated_mass`` is the analytic probability beyond ``n_max`` that was
    discarded at construction (0 for empirical distributions).
    """

    probs: np.ndarray
    truncated_mass: float = 0.0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).ravel()
        if probs.size == 0:
            raise InvalidArgumentError("distribution needs at least one entry")
        if not np.all(np.isfinite(probs)):
            raise InvalidArgumentError("probabilities must be finite")
        if np.any(probs < 0):
            raise InvalidArgumentError(f"negative probability {probs.min():.3g}")
        total = probs.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidArgumentError(f"probabilities sum to {total!r}, not 1")
        if not self.truncated_mass >= 0:
            raise InvalidArgumentError("truncated_mass must be nonnegative")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "truncated_mass", float(self.truncated_mass))

    @classmethod
    def from_weights(cls, weights, truncated_mass=0.0) -> PhotonDistribution:
        """Normalise nonnegative ``weights`` into a distribution."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgumentError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise InvalidArgumentError("weights sum to zero")
        return cls(w / total, truncated_mass)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "probs": [float(p) for p in self.probs],
            "truncated_mass": self.truncated_mass,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PhotonDistribution:
        try:
            probs = data["probs"]
            n_max = int(data["n_max"])
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"bad distribution record: {exc}") from exc
        if len(probs) != n_max + 1:
            raise InvalidArgumentError(
                f"n_max={n_max} does not match {len(probs)} probabilities"
            )
        return cls(probs, data.get("truncated_mass", 0.0))

    def padded(self, n_max: int) -> np.ndarray:
        """Probabilities zero-padded (never cut) to length ``n_max + 1``."""
        if n_max < self.n_max:
            raise InvalidArgumentError("cannot pad to a smaller n_max")
        out = np.zeros(n_max + 1)
        out[: self.probs.size] = self.probs
        return out


def _check_nmax(n_max):
    if int(n_max) != n_max or n_max < 0:
        raise InvalidArgumentError(f"n_max must be a nonnegative integer, got {n_max!r}")
    return int(n_max)


def _check_mean(mean_photons):
    if not (np.isfinite(mean_photons) and mean_photons >= 0):
        raise InvalidArgumentError(f"mean photon number must be >= 0, got {mean_photons!r}")
    return float(mean_photons)


def make_fock(n: int, n_max: int | None = None) -> PhotonDistribution:
    """Fock state |n>; ``n_max`` defaults to ``n``."""
    if int(n) != n or n < 0:
        raise InvalidArgumentError(f"photon number must be a nonnegative integer, got {n!r}")
    n = int(n)
    n_max = n if n_max is None else _check_nmax(n_max)
    if n > n_max:
        raise InvalidArgumentError(f"Fock state |{n}> does not fit below n_max={n_max}")
    probs = np.zeros(n_max + 1)
    probs[n] = 1.0
    return PhotonDistribution(probs)


def coherent_required_nmax(mean_photons: float, tol: float = TRUNCATION_TOL) -> int:
    """Smallest n_max whose Poisson tail mass is at most ``tol``."""
    mu = _check_mean(mean_photons)
    if mu == 0:
        return 0
    n = max(int(poisson.isf(tol, mu)), 0)
    while poisson.sf(n, mu) > tol:
        n += 1
    while n > 0 and poisson.sf(n - 1, mu) <= tol:
        n -= 1
    return n


def thermal_required_nmax(mean_photons: float, tol: float = TRUNCATION_TOL) -> int:
    """Smallest n_max whose Bose-Einstein tail mass is at most ``tol``."""
    nbar = _check_mean(mean_photons)
    if nbar == 0:
        return 0
    # tail beyond n_max is r**(n_max + 1)
    log_r = math.log(nbar) - math.log1p(nbar)
    n = max(math.ceil(math.log(tol) / log_r) - 1, 0)
    while (n + 1) * log_r > math.log(tol):
        n += 1
    while n > 0 and n * log_r <= math.log(tol):
        n -= 1
    return n


def make_coherent(
    mean_photons: float, n_max: int | None = None, tol: float = TRUNCATION_TOL
) -> PhotonDistribution:
    """Poisson photon statistics of a coherent state |alpha>, mean |alpha|^2.

    ``n_max=None`` picks the smallest bound meeting ``tol``.
    """
    mu = _check_mean(mean_photons)
    if n_max is None:
        n_max = coherent_required_nmax(mu, tol)
    n_max = _check_nmax(n_max)
    tail = float(poisson.sf(n_max, mu)) if mu > 0 else 0.0
    if tail > tol:
        need = coherent_required_nmax(mu, tol)
        raise TruncationError(
            f"Poisson({mu:g}) tail beyond n_max={n_max} is {tail:.3g} > {tol:g}; "
            f"use n_max >= {need}",
            required_nmax=need,
        )
    probs = poisson.pmf(np.arange(n_max + 1), mu)
    return PhotonDistribution(probs / probs.sum(), tail)


def make_thermal(
    mean_photons: float, n_max: int | None = None, tol: float = TRUNCATION_TOL
) -> PhotonDistribution:
    """Bose-Einstein statistics nbar^n / (nbar+1)^(n+1) of a thermal mode."""
    nbar = _check_mean(mean_photons)
    if n_max is None:
        n_max = thermal_required_nmax(nbar, tol)
    n_max = _check_nmax(n_max)
    n = np.arange(n_max + 1)
    log_probs = xlogy(n, nbar) - (n + 1) * math.log1p(nbar)
    tail = math.exp((n_max + 1) * (math.log(nbar) - math.log1p(nbar))) if nbar > 0 else 0.0
    if tail > tol:
        need = thermal_required_nmax(nbar, tol)
        raise TruncationError(
            f"thermal({nbar:g}) tail beyond n_max={n_max} is {tail:.3g} > {tol:g}; "
            f"use n_max >= {need}",
            required_nmax=need,
        )
    probs = np.exp(log_probs)
    return PhotonDistribution(probs / probs.sum(), tail)


def moments(dist: PhotonDistribution) -> tuple[float, float]:
    """Mean and variance of the photon number."""
    n = dist.support
    mean = float(np.dot(n, dist.probs))
    var = float(np.dot(n * n, dist.probs) - mean * mean)
    return mean, var


def total_variation(p, q) -> float:
    """Half the L1 distance; shorter vectors are zero-padded."""
    p = p.probs if isinstance(p, PhotonDistribution) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, PhotonDistribution) else np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(p - q).sum())


def _log_binom(n_max):
    k = np.arange(n_max + 1)
    # rows: output n, columns: input m
    return gammaln(k[None, :] + 1) - gammaln(k[:, None] + 1) - gammaln(k[None, :] - k[:, None] + 1)


@lru_cache(maxsize=32)
def _thinning_matrix(n_max: int, eta: float) -> np.ndarray:
    k = np.arange(n_max + 1)
    n, m = k[:, None], k[None, :]
    upper = m >= n
    with np.errstate(invalid="ignore"):
        log_t = _log_binom(n_max) + xlogy(n, eta) + xlogy(m - n, 1.0 - eta)
    mat = np.where(upper, np.exp(np.where(upper, log_t, -np.inf)), 0.0)
    mat.setflags(write=False)
    return mat


def _check_eta(eta):
    if not (np.isfinite(eta) and 0.0 < eta <= 1.0):
        raise InvalidArgumentError(f"efficiency must lie in (0, 1], got {eta!r}")
    return float(eta)


def bernoulli_transform(dist: PhotonDistribution, eta: float) -> PhotonDistribution:
    """Binomial thinning: each photon survives independently with probability eta."""
    eta = _check_eta(eta)
    if eta == 1.0:
        return dist
    out = _thinning_matrix(dist.n_max, eta) @ dist.probs
    return PhotonDistribution.from_weights(np.clip(out, 0.0, None), dist.truncated_mass)


@dataclass(frozen=True)
class InversionReport:
    """Conditioning diagnostics of :func:`inverse_bernoulli`.

    max_negative is the largest negative excursion (as a positive number)
    before clipping; clipped_mass is the total negative mass removed;
    error_bound estimates the rounding error amplified by the alternating sum.
    """

    max_negative: float
    clipped_mass: float
    error_bound: float

    def to_dict(self) -> dict:
        return {
            "max_negative": self.max_negative,
            "clipped_mass": self.clipped_mass,
            "error_bound": self.error_bound,
        }


def inverse_bernoulli(
    dist: PhotonDistribution, eta: float, neg_tol: float = NEGATIVITY_TOL
) -> tuple[PhotonDistribution, InversionReport]:
    """Undo binomial thinning with efficiency ``eta``.

    The inverse is thinning with survival probability 1/eta, an alternating
    sum. Entries that come out negative by at most ``neg_tol`` are clipped to
    zero and the result renormalised; larger excursions raise
    :class:`IllConditionedError`, as does a rounding-error bound above
    ``neg_tol``.
    """
    eta = _check_eta(eta)
    if eta == 1.0:
        return dist, InversionReport(0.0, 0.0, 0.0)
    n_max = dist.n_max
    k = np.arange(n_max + 1)
    growth = math.log(2.0 / eta - 1.0)
    with np.errstate(divide="ignore"):
        log_amp = logsumexp(k * growth + np.log(dist.probs))
    error_bound = np.finfo(float).eps * math.exp(log_amp) if log_amp < 700 else math.inf
    if not error_bound <= neg_tol:
        raise IllConditionedError(
            f"inverse Bernoulli at eta={eta:g}, n_max={n_max} amplifies rounding "
            f"error to {error_bound:.3g} (> {neg_tol:g})"
        )

    n, m = k[:, None], k[None, :]
    upper = m >= n
    log_mag = _log_binom(n_max) - n * math.log(eta) + (m - n) * math.log(1.0 / eta - 1.0)
    sign = np.where((m - n) % 2 == 0, 1.0, -1.0)
    mat = np.where(upper, sign * np.exp(np.where(upper, log_mag, -np.inf)), 0.0)
    raw = mat @ dist.probs

    deficit = np.clip(-raw, 0.0, None)
    max_negative = float(deficit.max())
    if max_negative > neg_tol:
        raise IllConditionedError(
            f"inverse Bernoulli produced a negative probability {-max_negative:.3g} "
            f"at n={int(np.argmin(raw))} (tolerance {neg_tol:g})"
        )
    report = InversionReport(max_negative, float(deficit.sum()), float(error_bound))
    return PhotonDistribution.from_weights(np.clip(raw, 0.0, None), dist.truncated_mass), report
