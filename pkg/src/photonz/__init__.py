"""Photon-number statistics from conjugate optical homodyne detection."""

__version__ = "0.1.0"

from photonz.errors import (  # noqa: E402
    CalibrationError,
    IllConditionedError,
    InvalidArgumentError,
    NumericalFailure,
    ParseError,
    PhotonzError,
    TruncationError,
)
from photonz.estimation import (  # noqa: E402
    EMConfig,
    EMResult,
    MomentSummary,
    em_reconstruct,
    loglikelihood,
    moment_estimates,
    single_shot_posterior,
)
from photonz.measurement import (  # noqa: E402
    DetectorModel,
    EquivalenceReport,
    GaussianSourceSpec,
    QuadratureBatch,
    ZBatch,
    calibrate,
    loss_equivalence_report,
    pr_density,
    pz_density,
    sample_quadratures,
    sample_z,
    to_z,
)
from photonz.spd import ThresholdCurvePoint, spd_curve, spd_point  # noqa: E402
from photonz.states import (  # noqa: E402
    PhotonDistribution,
    bernoulli_transform,
    inverse_bernoulli,
    make_coherent,
    make_fock,
    make_thermal,
    moments,
    total_variation,
)
