"""Completely positive maps, matrix tests, saturated polars and bipolar verdicts."""

from .cpmaps import (
    CPMap,
    CStarCoefficients,
    apply,
    choi_from_kraus,
    choi_tomography,
    cstar_combine,
    depolarizing,
    identity_map,
    kraus_from_choi,
    random_cp,
    transpose_map,
)
from .errors import (
    CPBipolarError,
    InconsistentOracle,
    InvalidCoefficients,
    InvalidInput,
    NotCompletelyPositive,
    NumericalFailure,
    ParseError,
    ValidationError,
)
from .mtests import MatrixTest, abs_via_sup, canonical_choi_test, fold_linear, fold_max, pairing, realify
from .polar import (
    BipolarParams,
    SeparationCertificate,
    Verdict,
    in_double_polar,
    in_saturated_polar,
    sat_sup,
    scalar_double_polar,
    scalar_polar_interval,
    separation_hunt,
    validate_certificate,
)
from .sdp import PolarSdpInstance, min_norm_point, solve_polar_sdp
from .serialize import deserialize, serialize

__version__ = "0.1.0"
