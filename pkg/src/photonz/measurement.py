"""Conjugate homodyne measurement: samplers, outcome densities, loss models.

Quadratures are in shot-noise units where a vacuum quadrature has variance
1/2, so that z = x3**2 + p4**2 has mean <n> + 1. Detector efficiency is
applied as a single loss in front of the first beam splitter; the
equivalence of that model with per-detector losses is checked by
:func:`loss_equivalence_report`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy
from scipy.stats import ks_2samp

from photonz.errors import CalibrationError, InvalidArgumentError
from photonz.states import PhotonDistribution

VACUUM_VARIANCE = 0.5
KS_ALPHA = 0.01


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_check_seed(seed))))


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent child streams derived from one seed."""
    children = np.random.SeedSequence(_check_seed(seed)).spawn(count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _check_seed(seed):
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise InvalidArgumentError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)


def _check_count(count):
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise InvalidArgumentError(f"count must be a positive integer, got {count!r}")
    return int(count)


def _readonly(values):
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ZBatch:
    """Nonnegative outcomes z = x3**2 + p4**2."""

    values: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        values = _readonly(self.values)
        if values.size == 0:
            raise InvalidArgumentError("ZBatch is empty")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("ZBatch contains non-finite values")
        if np.any(values < 0):
            raise InvalidArgumentError(f"ZBatch contains negative value {values.min()!r}")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class QuadratureBatch:
    """Paired homodyne outcomes (x3, p4), one pair per pulse.

    ``phases`` optionally records the per-pulse LO phase theta relative to
    the signal. ``calibrated`` marks data known to be in vacuum-normalised
    units.
    """

    x3: np.ndarray
    p4: np.ndarray
    phases: np.ndarray | None = None
    calibrated: bool = False
    source_tag: str = ""

    def __post_init__(self):
        x3, p4 = _readonly(self.x3), _readonly(self.p4)
        if x3.size == 0:
            raise InvalidArgumentError("QuadratureBatch is empty")
        if x3.size != p4.size:
            raise InvalidArgumentError("x3 and p4 differ in length")
        if not (np.all(np.isfinite(x3)) and np.all(np.isfinite(p4))):
            raise InvalidArgumentError("QuadratureBatch contains non-finite values")
        object.__setattr__(self, "x3", x3)
        object.__setattr__(self, "p4", p4)
        if self.phases is not None:
            phases = _readonly(self.phases)
            if phases.size != x3.size:
                raise InvalidArgumentError("phases and samples differ in length")
            object.__setattr__(self, "phases", phases)

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.x3, self.p4])

    def __len__(self):
        return self.x3.size


@dataclass(frozen=True)
class DetectorModel:
    """Efficiency and additive Gaussian noise variances on X3 and P4."""

    eta: float = 1.0
    sigma2_x: float = 0.0
    sigma2_p: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eta) and 0.0 < self.eta <= 1.0):
            raise InvalidArgumentError(f"efficiency must lie in (0, 1], got {self.eta!r}")
        for name in ("sigma2_x", "sigma2_p"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class GaussianSourceSpec:
    """Coherent or thermal single-mode source.

    ``phase`` is the signal phase relative to the LO (phi - theta). ``None``
    draws it uniformly per pulse; a number holds it fixed.
    """

    kind: str
    mean_photons: float
    phase: float | None = None

    def __post_init__(self):
        if self.kind not in ("coherent", "thermal"):
            raise InvalidArgumentError(f"unknown Gaussian source kind {self.kind!r}")
        if not (np.isfinite(self.mean_photons) and self.mean_photons >= 0):
            raise InvalidArgumentError("mean photon number must be >= 0")
        if self.phase is not None and not np.isfinite(self.phase):
            raise InvalidArgumentError("phase must be finite")

    @property
    def phase_mode(self) -> str:
        return "random_uniform" if self.phase is None else "fixed"


def sample_z(dist: PhotonDistribution, count: int, seed: int) -> ZBatch:
    """Draw z from the Gamma mixture: n ~ dist, then z | n ~ Gamma(n + 1, 1)."""
    count = _check_count(count)
    rng = make_rng(seed)
    n = rng.choice(dist.probs.size, size=count, p=dist.probs)
    z = rng.standard_gamma(n + 1.0)
    return ZBatch(z, f"sample_z(n_max={dist.n_max}, seed={seed})")


def sample_quadratures(
    spec: GaussianSourceSpec, det: DetectorModel, count: int, seed: int
) -> QuadratureBatch:
    """Simulate (x3, p4) pairs for a Gaussian source seen through ``det``."""
    count = _check_count(count)
    rng = make_rng(seed)
    mean_photons = det.eta * spec.mean_photons
    if spec.kind == "coherent":
        var = VACUUM_VARIANCE
        if spec.phase is None:
            delta = rng.uniform(0.0, 2.0 * np.pi, size=count)
        else:
            delta = np.full(count, float(spec.phase))
        amp = math.sqrt(mean_photons)
        mean_x, mean_p = amp * np.cos(delta), amp * np.sin(delta)
        phases = np.mod(-delta, 2.0 * np.pi)
    else:
        var = (mean_photons + 1.0) / 2.0
        mean_x = mean_p = 0.0
        phases = None
    x3 = mean_x + math.sqrt(var + det.sigma2_x) * rng.standard_normal(count)
    p4 = mean_p + math.sqrt(var + det.sigma2_p) * rng.standard_normal(count)
    tag = (
        f"{spec.kind}(mean={spec.mean_photons:g}, phase={spec.phase_mode}) "
        f"eta={det.eta:g} noise=({det.sigma2_x:g},{det.sigma2_p:g}) seed={seed}"
    )
    return QuadratureBatch(x3, p4, phases, calibrated=True, source_tag=tag)


def to_z(batch: QuadratureBatch) -> ZBatch:
    return ZBatch(batch.x3**2 + batch.p4**2, batch.source_tag)


MIN_VACUUM_ROWS = 1000


def calibrate(batch: QuadratureBatch, vacuum: QuadratureBatch) -> tuple[QuadratureBatch, dict]:
    """Express ``batch`` in vacuum units using a signal-blocked record.

    Each quadrature has the vacuum record's mean removed and is scaled so
    that the vacuum record's sample variance becomes exactly 1/2.
    """
    if len(vacuum) < MIN_VACUUM_ROWS:
        raise CalibrationError(
            f"vacuum record has {len(vacuum)} rows, need at least {MIN_VACUUM_ROWS}"
        )
    params = {}
    scaled = []
    for name in ("x3", "p4"):
        ref = getattr(vacuum, name)
        offset, var = float(ref.mean()), float(ref.var())
        if not (np.isfinite(var) and var > 0):
            raise CalibrationError(f"vacuum variance of {name} is {var!r}")
        scale = math.sqrt(VACUUM_VARIANCE / var)
        params[name] = {"offset": offset, "vacuum_variance": var, "scale": scale}
        scaled.append((getattr(batch, name) - offset) * scale)
    out = QuadratureBatch(
        scaled[0], scaled[1], batch.phases, calibrated=True, source_tag=batch.source_tag
    )
    return out, params


def _log_components(dist, z):
    """log[p(n) e^-z z^n / n!] for every (z, n) with p(n) > 0."""
    keep = dist.probs > 0
    n = dist.support[keep]
    return (
        -z[:, None]
        + xlogy(n[None, :], z[:, None])
        - gammaln(n + 1.0)[None, :]
        + np.log(dist.probs[keep])[None, :]
    )


def _as_nonneg(values, name):
    arr = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgumentError(f"{name} must be finite and >= 0")
    return arr


def pz_density(dist: PhotonDistribution, z):
    """Density of z: e^-z sum_n p(n) z^n / n!. Accepts scalars or arrays."""
    arr = _as_nonneg(z, "z")
    out = np.exp(logsumexp(_log_components(dist, arr.ravel()), axis=1))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def pr_density(dist: PhotonDistribution, r):
    """Density of the radius r = sqrt(z); equals 2 r pz_density(dist, r**2)."""
    arr = _as_nonneg(r, "r")
    flat = arr.ravel()
    with np.errstate(divide="ignore"):
        log_r = np.log(2.0 * flat)
    log_terms = _log_components(dist, flat * flat) + log_r[:, None]
    out = np.exp(logsumexp(log_terms, axis=1))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Loss-model equivalence
# ---------------------------------------------------------------------------

# Each model maps input-mode quadratures (Wigner variables) linearly onto
# (X3, P4). Columns follow the *_INPUTS orderings.
PORT_LOSS_INPUTS = ("X1", "P1", "X2", "P2", "X5", "P5", "X6", "P6")
INPUT_LOSS_INPUTS = ("X1", "P1", "X2", "P2", "X5", "P5")


def port_loss_matrix(eta: float) -> np.ndarray:
    """Model (a): lossy beam splitters on both outputs of the 50:50 splitter."""
    c, s = math.sqrt(eta), math.sqrt(1.0 - eta)
    h = c / math.sqrt(2.0)
    return np.array(
        [
            [h, 0.0, h, 0.0, s, 0.0, 0.0, 0.0],
            [0.0, h, 0.0, -h, 0.0, 0.0, 0.0, s],
        ]
    )


def input_loss_matrix(eta: float) -> np.ndarray:
    """Model (b): one lossy beam splitter in front of the 50:50 splitter."""
    c, s = math.sqrt(eta), math.sqrt(1.0 - eta)
    r = 1.0 / math.sqrt(2.0)
    return np.array(
        [
            [c * r, 0.0, r, 0.0, s * r, 0.0],
            [0.0, c * r, 0.0, -r, 0.0, s * r],
        ]
    )


def _signal_moments(spec: GaussianSourceSpec):
    """Mean and covariance of the signal-mode Wigner variables (X1, P1)."""
    if spec.kind == "thermal":
        return np.zeros(2), np.eye(2) * (spec.mean_photons + 0.5)
    if spec.phase is None:
        return np.zeros(2), np.eye(2) * (0.5 + spec.mean_photons)
    amp = math.sqrt(2.0 * spec.mean_photons)
    mean = amp * np.array([math.cos(spec.phase), math.sin(spec.phase)])
    return mean, np.eye(2) * 0.5


def _input_moments(spec, n_inputs):
    mean = np.zeros(n_inputs)
    cov = np.eye(n_inputs) * VACUUM_VARIANCE
    mean[:2], cov[:2, :2] = _signal_moments(spec)
    return mean, cov


def _sample_inputs(spec, n_inputs, count, rng):
    draws = math.sqrt(VACUUM_VARIANCE) * rng.standard_normal((count, n_inputs))
    if spec.kind == "thermal":
        draws[:, :2] *= math.sqrt((spec.mean_photons + 0.5) / VACUUM_VARIANCE)
        return draws
    if spec.phase is None:
        delta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    else:
        delta = np.full(count, float(spec.phase))
    amp = math.sqrt(2.0 * spec.mean_photons)
    draws[:, 0] += amp * np.cos(delta)
    draws[:, 1] += amp * np.sin(delta)
    return draws


def sampler_moments(spec: GaussianSourceSpec, eta: float):
    """Closed-form (X3, P4) mean and covariance used by :func:`sample_quadratures`."""
    mu = eta * spec.mean_photons
    if spec.kind == "thermal":
        return np.zeros(2), np.eye(2) * (mu + 1.0) / 2.0
    if spec.phase is None:
        return np.zeros(2), np.eye(2) * (0.5 + mu / 2.0)
    amp = math.sqrt(mu)
    return amp * np.array([math.cos(spec.phase), math.sin(spec.phase)]), np.eye(2) * 0.5


@dataclass(frozen=True)
class EquivalenceReport:
    """Analytic and Monte Carlo comparison of the two loss models."""

    kind: str
    mean_photons: float
    phase: float | None
    eta: float
    count: int
    seed: int
    mean_a: np.ndarray
    mean_b: np.ndarray
    cov_a: np.ndarray
    cov_b: np.ndarray
    analytic_discrepancy: float
    sampler_discrepancy: float
    ks_statistic: dict = field(default_factory=dict)
    ks_pvalue: dict = field(default_factory=dict)
    ks_critical: float = 0.0

    @property
    def analytic_ok(self) -> bool:
        return self.analytic_discrepancy <= 1e-12

    @property
    def ks_ok(self) -> bool:
        return all(stat < self.ks_critical for stat in self.ks_statistic.values())

    @property
    def passed(self) -> bool:
        return self.analytic_ok and self.ks_ok

    def to_dict(self) -> dict:
        return {
            "source": {"kind": self.kind, "mean_photons": self.mean_photons, "phase": self.phase},
            "eta": self.eta,
            "count": self.count,
            "seed": self.seed,
            "model_a": {"mean": self.mean_a.tolist(), "cov": self.cov_a.tolist()},
            "model_b": {"mean": self.mean_b.tolist(), "cov": self.cov_b.tolist()},
            "analytic_discrepancy": self.analytic_discrepancy,
            "sampler_discrepancy": self.sampler_discrepancy,
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
            "ks_critical": self.ks_critical,
            "ks_alpha": KS_ALPHA,
            "passed": self.passed,
        }


def ks_critical_value(n: int, m: int, alpha: float = KS_ALPHA) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) * math.sqrt((n + m) / (n * m))


def loss_equivalence_report(
    spec: GaussianSourceSpec, eta: float, count: int, seed: int
) -> EquivalenceReport:
    """Compare per-port losses (a) with a single input loss (b) at efficiency ``eta``.

    Gaussian inputs have positive Wigner functions, so both models are
    propagated exactly as linear maps of Gaussian variables: analytically
    for mean and covariance, and by sampling for the KS comparison.
    """
    if not (np.isfinite(eta) and 0.0 < eta <= 1.0):
        raise InvalidArgumentError(f"efficiency must lie in (0, 1], got {eta!r}")
    count = _check_count(count)
    if count < 10_000:
        raise InvalidArgumentError("the Monte Carlo arm needs count >= 10000")

    moments = {}
    for label, mat in (("a", port_loss_matrix(eta)), ("b", input_loss_matrix(eta))):
        mean_in, cov_in = _input_moments(spec, mat.shape[1])
        moments[label] = (mat @ mean_in, mat @ cov_in @ mat.T)
    (mean_a, cov_a), (mean_b, cov_b) = moments["a"], moments["b"]
    analytic = max(np.abs(mean_a - mean_b).max(), np.abs(cov_a - cov_b).max())
    ref_mean, ref_cov = sampler_moments(spec, eta)
    sampler = max(np.abs(mean_b - ref_mean).max(), np.abs(cov_b - ref_cov).max())

    rng_a, rng_b = spawn_rngs(seed, 2)
    out_a = _sample_inputs(spec, len(PORT_LOSS_INPUTS), count, rng_a) @ port_loss_matrix(eta).T
    out_b = _sample_inputs(spec, len(INPUT_LOSS_INPUTS), count, rng_b) @ input_loss_matrix(eta).T
    stats, pvalues = {}, {}
    for col, name in enumerate(("x3", "p4")):
        res = ks_2samp(out_a[:, col], out_b[:, col])
        stats[name], pvalues[name] = float(res.statistic), float(res.pvalue)

    return EquivalenceReport(
        kind=spec.kind,
        mean_photons=float(spec.mean_photons),
        phase=spec.phase,
        eta=float(eta),
        count=count,
        seed=int(seed),
        mean_a=mean_a,
        mean_b=mean_b,
        cov_a=cov_a,
        cov_b=cov_b,
        analytic_discrepancy=float(analytic),
        sampler_discrepancy=float(sampler),
        ks_statistic=stats,
        ks_pvalue=pvalues,
        ks_critical=ks_critical_value(count, count),
    )
