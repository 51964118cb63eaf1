"""Multifractal spectral width of audio signals, and grouping of string
instruments by playing mode."""

__version__ = "0.1.0"

from .audio import AudioClip, extract_segment, load_wav, mixdown_mono, normalize_peak, write_wav
from .classify import (
    DEFAULT_RANGES,
    ConfusionMatrix,
    GroupRange,
    WidthRecord,
    assign_mode,
    cluster_widths,
    confusion_matrix,
    group_report,
)
from .estimators import MFDFA, WidthKMeans, WidthRangeClassifier
from .mfdfa import (
    MfdfaConfig,
    Signal,
    compute_profile,
    fit_hurst,
    fit_quadratic_width,
    fluctuation_surface,
    local_fluctuation,
    mfdfa,
    qth_order_fluctuation,
    segment_bounds,
    shuffle_surrogate,
    singularity_spectrum,
    tau_from_hurst,
)
