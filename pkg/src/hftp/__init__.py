"""Frequency-tagging probe toolkit.

Detects sentence- and phrase-rate spectral signatures in per-unit activation
time series and trial-structured recordings, classifies units and channels,
and quantifies representational alignment between the two systems.
"""

from ._kernels import NUMBA_ENABLED, active_backend
from .ingest import (
    ActivationTensor,
    ChannelMeta,
    ConditionLabel,
    CONDITION_ORDER,
    Plant,
    RoiMap,
    SynthSpec,
    TrialRecording,
    UnitId,
    default_roi_map,
    load_roi_map,
    read_activation_file,
    read_trial_recording,
    slice_last,
    synth_generate,
    write_activation_file,
    write_trial_recording,
)
from .spectral import (
    PeakTestResult,
    Spectrum,
    amp_stat,
    dft,
    fdr_correct,
    normalize01,
    peak_test,
)
from .probe_model import (
    NeuronClassification,
    PermutationResult,
    ZScoreTable,
    bilingual_sets,
    classify_neurons,
    covariance_trend,
    layer_distribution,
    permutation_ci,
    significant_neurons,
    zscore_deviation,
)
from .probe_brain import (
    ChannelClassification,
    ItpcSpectrum,
    channel_permutation_ci,
    classify_channels,
    itpc,
    roi_correlation,
    roi_distribution,
)
from .alignment import (
    SRDM,
    ConditionFeatures,
    TopKSelection,
    brain_condition_features,
    contribution_ratio,
    layer_srdm,
    model_brain_similarity,
    model_condition_features,
    model_region_similarity,
    one_way_anova,
    overlap_chi_square,
    rsa_spearman,
    srdm,
    top_k_channels,
)
from .encoding import (
    EncodingDesign,
    PredictiveScore,
    RidgeFit,
    TargetVector,
    aggregate_predictive,
    build_brain_targets,
    build_model_features,
    predictive_score,
    ridge_cv_alpha,
    ridge_fit,
)

__version__ = "0.1.0"
