"""Predictive encoding control: ridge regression from layer spectra to
channel phase coherence.

For each (layer, channel) pair, the layer's significant-unit average is
transformed to complex coefficients in the 0.5-2 Hz band; each (block,
frequency) pair contributes one design row holding the real and imaginary
parts. Targets are the channel's per-block ITPC amplitudes at the nearest
matching frequencies. Scores are held-out Spearman correlations averaged
over five random 70/30 splits, with the ridge penalty chosen by inner
cross-validation on each training split only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import ValidationError
from .ingest import ActivationTensor, TrialRecording, UnitId, slice_last
from .probe_brain import itpc
from .alignment import (
    ANALYSIS_SYLLABLES,
    TRIAL_SYLLABLES,
    TopKSelection,
    model_brain_similarity,
    model_region_similarity,
    rank_channels,
    trial_matrix,
)

ENCODING_BAND_HZ = (0.5, 2.0)  # both edges inclusive
N_SPLITS_DEFAULT = 5
TEST_FRAC_DEFAULT = 0.3
INNER_FOLDS = 5
ALPHA_GRID = np.logspace(-3.0, 3.0, 13)


@dataclass(frozen=True, eq=False)
class EncodingDesign:
    """Raw (unstandardized) N x 2 design over (block, frequency) rows."""

    X: np.ndarray
    freq_bins: np.ndarray
    n_blocks: int
    block_of_row: np.ndarray
    freq_of_row: np.ndarray

    def __post_init__(self):
        if self.X.shape != (self.n_blocks * self.freq_bins.size, 2):
            raise ValidationError("design must be (n_blocks * K, 2)")


@dataclass(frozen=True, eq=False)
class TargetVector:
    """Per-row ITPC amplitudes aligned to a design's (block, frequency) rows."""

    y: np.ndarray
    matched_freqs: np.ndarray
    alignment_warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class RidgeFit:
    beta: tuple[float, float]
    intercept: float
    alpha: float


@dataclass(frozen=True, eq=False)
class PredictiveScore:
    """Held-out Spearman, averaged over splits, for one (layer, channel)."""

    layer: object
    channel: object
    p_score: float
    split_scores: np.ndarray
    split_alphas: np.ndarray
    split_means: np.ndarray
    split_stds: np.ndarray
    degenerate_splits: tuple[int, ...] = ()


def _band_bins(n: int, rate_hz: float, band=ENCODING_BAND_HZ) -> np.ndarray:
    freqs = np.arange(n // 2 + 1) * (rate_hz / n)
    lo, hi = band
    return np.flatnonzero((freqs >= lo - 1e-9) & (freqs <= hi + 1e-9))


def build_model_features(
    blocks: Sequence[ActivationTensor],
    layer: int,
    members: Sequence[UnitId],
    trial_len: int = TRIAL_SYLLABLES,
    last_n: int = ANALYSIS_SYLLABLES,
    band=ENCODING_BAND_HZ,
) -> EncodingDesign | None:
    """Design matrix from a layer's significant-unit average, or None when
    the layer holds no members (caller records the skip)."""
    layer_members = [u for u in members if u.layer == layer]
    if not layer_members:
        return None
    rows = []
    freq_bins = None
    blocks_of = []
    freqs_of = []
    for b, tensor in enumerate(blocks):
        seqs = []
        for u in layer_members:
            seqs.append(trial_matrix(tensor, u, trial_len)[:, -last_n:].mean(axis=0))
        avg = np.mean(seqs, axis=0)
        coeffs = np.fft.rfft(avg)
        bins = _band_bins(last_n, tensor.rate_hz, band)
        freqs = bins * tensor.rate_hz / last_n
        if freq_bins is None:
            freq_bins = freqs
        elif not np.array_equal(freqs, freq_bins):
            raise ValidationError("blocks disagree on the frequency grid")
        kept = coeffs[bins]
        rows.append(np.column_stack([kept.real, kept.imag]))
        blocks_of.extend([b] * bins.size)
        freqs_of.extend(freqs.tolist())
    X = np.vstack(rows)
    return EncodingDesign(
        X=X,
        freq_bins=freq_bins,
        n_blocks=len(blocks),
        block_of_row=np.array(blocks_of),
        freq_of_row=np.array(freqs_of),
    )


def build_brain_targets(
    blocks: Sequence[TrialRecording],
    channel: int,
    design: EncodingDesign,
    last_n: int = ANALYSIS_SYLLABLES,
) -> TargetVector:
    """Per-block ITPC amplitudes at the recording bins nearest each design
    frequency, concatenated in the design's row order."""
    y = np.empty(design.X.shape[0])
    matched = np.empty_like(y)
    warnings_out: list[str] = []
    model_spacing = float(np.min(np.diff(design.freq_bins))) if design.freq_bins.size > 1 else np.inf
    for b, rec in enumerate(blocks):
        spectrum = itpc(slice_last(rec, last_n), channel)
        sel = design.block_of_row == b
        for i in np.flatnonzero(sel):
            f = design.freq_of_row[i]
            j = int(np.argmin(np.abs(spectrum.freqs - f)))
            dist = abs(float(spectrum.freqs[j]) - f)
            if dist > model_spacing / 2:
                warnings_out.append(
                    f"block {b}: {f:.4g} Hz matched to {spectrum.freqs[j]:.4g} Hz "
                    f"(off by {dist:.4g} Hz)"
                )
            y[i] = spectrum.itpc[j]
            matched[i] = spectrum.freqs[j]
    return TargetVector(y=y, matched_freqs=matched, alignment_warnings=tuple(warnings_out))


# ---------------------------------------------------------------------------
# ridge machinery
# ---------------------------------------------------------------------------


def ridge_fit(X, y, alpha: float) -> RidgeFit:
    """Closed-form penalized normal equations on a standardized design.

    The intercept is unpenalized: slopes are solved on centered features and
    centered targets, and the intercept recovered from the training means.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("ridge_fit requires finite inputs")
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    xbar = X.mean(axis=0)
    ybar = float(y.mean())
    Xc = X - xbar
    gram = Xc.T @ Xc + alpha * np.eye(X.shape[1])
    beta = np.linalg.solve(gram, Xc.T @ (y - ybar))
    intercept = ybar - float(xbar @ beta)
    return RidgeFit(beta=(float(beta[0]), float(beta[1])), intercept=intercept, alpha=float(alpha))


def ridge_predict(fit: RidgeFit, X) -> np.ndarray:
    return np.asarray(X, dtype=np.float64) @ np.array(fit.beta) + fit.intercept


def ridge_cv_alpha(X_train, y_train, grid=None) -> float:
    """Penalty minimizing inner k-fold MSE on the training rows only.

    Folds are contiguous in the given row order; ties prefer the smaller
    penalty (the grid is scanned ascending with strict improvement).
    """
    grid = ALPHA_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValidationError("alpha grid must be nonempty")
    if grid.size == 1:
        return float(grid[0])
    X = np.asarray(X_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.float64)
    folds = np.array_split(np.arange(X.shape[0]), min(INNER_FOLDS, X.shape[0]))
    best_alpha, best_mse = None, np.inf
    for alpha in np.sort(grid):
        sse, count = 0.0, 0
        for fold in folds:
            if fold.size == 0:
                continue
            mask = np.ones(X.shape[0], dtype=bool)
            mask[fold] = False
            if not mask.any():
                continue
            fit = ridge_fit(X[mask], y[mask], alpha)
            resid = y[fold] - ridge_predict(fit, X[fold])
            sse += float(resid @ resid)
            count += fold.size
        mse = sse / count
        if mse < best_mse:
            best_alpha, best_mse = float(alpha), mse
    return best_alpha


def draw_splits(n: int, n_splits: int, test_frac: float, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic random train/test index pairs; test size ceil(frac * n)."""
    rng = np.random.default_rng(seed)
    n_test = int(np.ceil(test_frac * n))
    out = []
    for _ in range(n_splits):
        order = rng.permutation(n)
        out.append((np.sort(order[n_test:]), np.sort(order[:n_test])))
    return out


def _standardize_train(X, train_idx):
    mu = X[train_idx].mean(axis=0)
    sd = X[train_idx].std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    return mu, sd


def _fit_split(X, y, train_idx, test_idx, grid=None):
    """Standardize on train, pick alpha on train, fit, score the test rows.

    Returns (spearman, alpha, mu, sd, degenerate). Test rows never touch the
    standardization statistics or the penalty search.
    """
    mu, sd = _standardize_train(X, train_idx)
    Z = (X - mu) / sd
    alpha = ridge_cv_alpha(Z[train_idx], y[train_idx], grid)
    fit = ridge_fit(Z[train_idx], y[train_idx], alpha)
    pred = ridge_predict(fit, Z[test_idx])
    actual = y[test_idx]
    if np.unique(pred).size < 2 or np.unique(actual).size < 2:
        return 0.0, alpha, mu, sd, True
    rho = sps.spearmanr(pred, actual).statistic
    return float(rho), alpha, mu, sd, False


def predictive_score(
    X,
    y,
    n_splits: int = N_SPLITS_DEFAULT,
    test_frac: float = TEST_FRAC_DEFAULT,
    seed=0,
    grid=None,
    layer: object = None,
    channel: object = None,
) -> PredictiveScore:
    """Mean held-out Spearman over random 70/30 splits."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 10:
        raise ValidationError("predictive_score needs at least 10 rows")
    scores, alphas, mus, sds, degenerate = [], [], [], [], []
    for i, (train_idx, test_idx) in enumerate(draw_splits(n, n_splits, test_frac, seed)):
        rho, alpha, mu, sd, degen = _fit_split(X, y, train_idx, test_idx, grid)
        scores.append(rho)
        alphas.append(alpha)
        mus.append(mu)
        sds.append(sd)
        if degen:
            degenerate.append(i)
    scores = np.array(scores)
    return PredictiveScore(
        layer=layer,
        channel=channel,
        p_score=float(scores.mean()),
        split_scores=scores,
        split_alphas=np.array(alphas),
        split_means=np.array(mus),
        split_stds=np.array(sds),
        degenerate_splits=tuple(degenerate),
    )


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictiveAggregate:
    s_mb: float
    s_mbr: dict
    selections: tuple[TopKSelection, ...]


def aggregate_predictive(
    scores: Mapping[object, Mapping[int, float]],
    k: int,
    roi_of: Mapping[int, str] | None = None,
) -> PredictiveAggregate:
    """Apply the top-k / layer-mean aggregation to a predictive score table.

    Identical machinery to the correlation-based summary: rank channels per
    layer, average the kept scores per layer, then across layers; region
    scores restrict to each region's members.
    """
    if not scores:
        raise ValidationError("empty score table")
    selections = tuple(
        rank_channels(dict(per_channel), k, layer=layer)
        for layer, per_channel in sorted(scores.items(), key=lambda kv: str(kv[0]))
    )
    s_mb = model_brain_similarity(selections)
    s_mbr = {}
    if roi_of:
        for roi in sorted(set(roi_of.values())):
            s_mbr[roi] = model_region_similarity(selections, roi_of, roi)
    return PredictiveAggregate(s_mb=s_mb, s_mbr=s_mbr, selections=selections)
