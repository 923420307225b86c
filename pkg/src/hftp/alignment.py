"""Condition-feature dissimilarity matrices and model-recording alignment.

Each unit or channel gets a 6x6 dissimilarity matrix over the experimental
conditions (1 - cosine similarity of its band-limited spectral features).
Layer matrices are entrywise means over a layer's classified units. Rank
correlation between a layer matrix and every channel matrix drives top-k
channel selection, the overall and per-region similarity summaries, and the
per-region contribution ratios.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import (
    DegenerateFeatureError,
    IncompleteDesignError,
    UndefinedRatioError,
    UndefinedTestError,
    ValidationError,
)
from .ingest import (
    CONDITION_ORDER,
    ActivationTensor,
    ConditionLabel,
    TrialRecording,
    UnitId,
    slice_last,
)
from .probe_brain import ChannelClassification, itpc

TOP_K_DEFAULT = 100
TRIAL_SYLLABLES = 36
ANALYSIS_SYLLABLES = 32
FEATURE_BAND_HZ = (0.0, 2.0)  # lower edge exclusive, upper inclusive
F_CAP = 1e300


@dataclass(frozen=True, eq=False)
class ConditionFeatures:
    """Per-condition spectral feature vectors of one unit or channel.

    Rows follow :data:`hftp.ingest.CONDITION_ORDER`.
    """

    owner: object
    freqs: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.shape != (len(CONDITION_ORDER), self.freqs.size):
            raise ValidationError("feature matrix must be (6, n_bins)")


def _require_conditions(data: Mapping[ConditionLabel, object]) -> None:
    missing = [c.key for c in CONDITION_ORDER if c not in data]
    if missing:
        raise IncompleteDesignError(f"missing conditions: {missing}")


def _band_mask(freqs: np.ndarray, band=FEATURE_BAND_HZ) -> np.ndarray:
    lo, hi = band
    return (freqs > lo + 1e-12) & (freqs <= hi + 1e-9)


def trial_matrix(t: ActivationTensor, unit: UnitId, trial_len: int) -> np.ndarray:
    """Reshape one unit's series into (n_trials, trial_len)."""
    x = t.series(unit)
    if x.size % trial_len:
        raise ValidationError(f"{x.size} timepoints not divisible by trial length {trial_len}")
    return x.reshape(-1, trial_len)


def model_condition_features(
    tensors: Mapping[ConditionLabel, ActivationTensor],
    unit: UnitId,
    trial_len: int = TRIAL_SYLLABLES,
    last_n: int = ANALYSIS_SYLLABLES,
    band=FEATURE_BAND_HZ,
    average: str = "magnitude",
) -> ConditionFeatures:
    """Band-limited amplitude features per condition for one unit.

    Each condition's series is cut into trials, the trailing ``last_n``
    syllables kept, and per-trial DFT magnitudes averaged across trials
    (``average="complex"`` averages coefficients before the magnitude).
    """
    _require_conditions(tensors)
    vectors = []
    freqs_out = None
    for cond in CONDITION_ORDER:
        t = tensors[cond]
        trials = trial_matrix(t, unit, trial_len)[:, -last_n:]
        coeffs = np.fft.rfft(trials, axis=1)
        if average == "magnitude":
            spec = np.abs(coeffs).mean(axis=0)
        elif average == "complex":
            spec = np.abs(coeffs.mean(axis=0))
        else:
            raise ValidationError(f"unknown averaging mode {average!r}")
        freqs = np.arange(coeffs.shape[1]) * (t.rate_hz / last_n)
        mask = _band_mask(freqs, band)
        if freqs_out is None:
            freqs_out = freqs[mask]
        elif freqs[mask].shape != freqs_out.shape or not np.allclose(freqs[mask], freqs_out):
            raise ValidationError("condition tensors produce different bin grids")
        vectors.append(spec[mask])
    return ConditionFeatures(owner=unit, freqs=freqs_out, vectors=np.array(vectors))


def brain_condition_features(
    recordings: Mapping[ConditionLabel, TrialRecording],
    channel: int,
    last_n: int = ANALYSIS_SYLLABLES,
    band=FEATURE_BAND_HZ,
) -> ConditionFeatures:
    """Band-limited ITPC features per condition split for one channel."""
    _require_conditions(recordings)
    vectors = []
    freqs_out = None
    for cond in CONDITION_ORDER:
        spectrum = itpc(slice_last(recordings[cond], last_n), channel)
        mask = _band_mask(spectrum.freqs, band)
        if freqs_out is None:
            freqs_out = spectrum.freqs[mask]
        elif spectrum.freqs[mask].shape != freqs_out.shape or not np.allclose(
            spectrum.freqs[mask], freqs_out
        ):
            raise ValidationError("condition recordings produce different bin grids")
        vectors.append(spectrum.itpc[mask])
    return ConditionFeatures(owner=channel, freqs=freqs_out, vectors=np.array(vectors))


# ---------------------------------------------------------------------------
# dissimilarity matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SRDM:
    """Symmetric zero-diagonal dissimilarity matrix over the 6 conditions."""

    owner: object
    d: np.ndarray


def srdm(f: ConditionFeatures) -> SRDM:
    """Pairwise 1 - cosine similarity between condition feature vectors."""
    v = np.asarray(f.vectors, dtype=np.float64)
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0):
        bad = [CONDITION_ORDER[i].key for i in np.flatnonzero(norms == 0)]
        raise DegenerateFeatureError(f"zero-norm feature vector for {bad} (owner {f.owner})")
    unit = v / norms[:, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    d = 1.0 - sim
    np.fill_diagonal(d, 0.0)
    d = (d + d.T) / 2.0
    return SRDM(owner=f.owner, d=d)


def layer_srdm(srdms: Sequence[SRDM], owner: object = None) -> SRDM:
    """Entrywise mean matrix over a layer's unit matrices.

    Averaging similarity (1 - d) and converting back equals averaging the
    dissimilarities directly.
    """
    mats = [s.d for s in srdms]
    if not mats:
        raise ValidationError("layer_srdm needs at least one unit SRDM")
    return SRDM(owner=owner, d=np.mean(mats, axis=0))


def upper_triangle(d: np.ndarray) -> np.ndarray:
    """The 15 unique off-diagonal entries, row-major upper triangle."""
    iu = np.triu_indices(d.shape[0], k=1)
    return np.asarray(d, dtype=np.float64)[iu]


def rsa_spearman(a: SRDM, b: SRDM) -> float:
    """Spearman rank correlation between two matrices' unique entries.

    Average ranks break ties; a zero-variance rank vector is degenerate and
    reported as 0 with a RuntimeWarning.
    """
    if a.d.shape != b.d.shape:
        raise ValidationError("SRDMs must share dimensions")
    va, vb = upper_triangle(a.d), upper_triangle(b.d)
    ra, rb = sps.rankdata(va), sps.rankdata(vb)
    if np.std(ra) == 0 or np.std(rb) == 0:
        warnings.warn("degenerate rank vector in RSA; rho reported as 0", RuntimeWarning)
        return 0.0
    return float(np.corrcoef(ra, rb)[0, 1])


# ---------------------------------------------------------------------------
# channel selection and summary metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopKSelection:
    """Channels most rank-correlated with one layer, best first."""

    layer: object
    channel_ids: tuple[int, ...]
    rhos: tuple[float, ...]
    clipped: bool = False

    def mean_rho(self) -> float:
        return float(np.mean(self.rhos))


def rank_channels(scores: Mapping[int, float], k: int, layer: object = None) -> TopKSelection:
    """Top ``k`` channel ids by score, ties broken by ascending id."""
    if not scores:
        raise ValidationError("no channel scores to rank")
    clipped = k > len(scores)
    if clipped:
        warnings.warn(
            f"k={k} exceeds {len(scores)} available channels; using all", RuntimeWarning
        )
        k = len(scores)
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return TopKSelection(
        layer=layer,
        channel_ids=tuple(cid for cid, _ in ordered),
        rhos=tuple(float(r) for _, r in ordered),
        clipped=clipped,
    )


def top_k_channels(
    layer: SRDM, channel_srdms: Sequence[SRDM], k: int = TOP_K_DEFAULT
) -> TopKSelection:
    """Rank channels by Spearman correlation with a layer SRDM."""
    scores = {int(c.owner): rsa_spearman(layer, c) for c in channel_srdms}
    return rank_channels(scores, k, layer=layer.owner)


def overlap_chi_square(
    selection: TopKSelection,
    c: ChannelClassification,
    universe: Sequence[int] | None = None,
) -> tuple[float, float]:
    """Pearson chi-square (1 dof, no continuity correction) of the 2x2 table
    in-top-k x is-significant-channel."""
    ids = set(universe if universe is not None else (m.channel_id for m in c.channels))
    top = set(selection.channel_ids) & ids
    sig = c.significant_ids() & ids
    a = len(top & sig)
    b = len(top - sig)
    cc = len(sig - top)
    dd = len(ids - top - sig)
    n = a + b + cc + dd
    margins = [a + b, cc + dd, a + cc, b + dd]
    if any(m == 0 for m in margins):
        raise UndefinedTestError(
            "chi-square undefined: a margin of the 2x2 table is zero "
            f"(top {a + b}/{n}, significant {a + cc}/{n})"
        )
    chi2 = n * (a * dd - b * cc) ** 2 / (margins[0] * margins[1] * margins[2] * margins[3])
    return float(chi2), float(sps.chi2.sf(chi2, df=1))


def model_brain_similarity(selections: Sequence[TopKSelection]) -> float:
    """Mean over layers of each layer's mean top-k correlation."""
    if not selections:
        raise ValidationError("no layer selections")
    return float(np.mean([s.mean_rho() for s in selections]))


def model_region_similarity(
    selections: Sequence[TopKSelection],
    roi_of: Mapping[int, str],
    roi: str,
) -> float | None:
    """Mean correlation over top-k channels inside one region.

    Layers whose selection contains no channel of the region are skipped and
    the outer mean runs over contributing layers; None when no layer
    contributes (rendered as '/' in tables).
    """
    layer_means = []
    for sel in selections:
        rhos = [r for cid, r in zip(sel.channel_ids, sel.rhos) if roi_of.get(cid) == roi]
        if rhos:
            layer_means.append(float(np.mean(rhos)))
    if not layer_means:
        return None
    return float(np.mean(layer_means))


def contribution_ratio(
    selection: TopKSelection,
    roi_of: Mapping[int, str],
    roi: str,
) -> float:
    """Region's share of the top-k normalized by its share of all channels."""
    n_total = len(roi_of)
    n_r_total = sum(1 for r in roi_of.values() if r == roi)
    if n_r_total == 0:
        raise UndefinedRatioError(f"region {roi!r} has no channels")
    n_top = len(selection.channel_ids)
    n_r_top = sum(1 for cid in selection.channel_ids if roi_of.get(cid) == roi)
    return (n_r_top / n_top) / (n_r_total / n_total)


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    p_value: float
    eta_squared: float


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """Standard between/within decomposition with eta-squared effect size.

    Zero within-group variance with a real between-group effect caps F at a
    large finite value with p = 0.
    """
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2 or any(a.size < 2 for a in arrays):
        raise ValidationError("ANOVA needs >= 2 groups with >= 2 values each")
    grand = np.mean(np.concatenate(arrays))
    ss_between = sum(a.size * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(float(np.sum((a - a.mean()) ** 2)) for a in arrays)
    ss_total = ss_between + ss_within
    df_between = len(arrays) - 1
    df_within = sum(a.size for a in arrays) - len(arrays)
    eta = ss_between / ss_total if ss_total > 0 else 0.0
    if ss_within == 0:
        if ss_between == 0:
            return AnovaResult(0.0, 1.0, 0.0)
        return AnovaResult(F_CAP, 0.0, eta)
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(float(f_stat), float(sps.f.sf(f_stat, df_between, df_within)), float(eta))


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

NEURON_CLASSES = ("sentence", "phrase", "both")


@dataclass(frozen=True)
class HemisphereBlock:
    """Alignment summary for one hemisphere and one neuron pool."""

    hemisphere: str
    selections: tuple[TopKSelection, ...]
    s_mb: float
    s_mbr: dict
    cr: dict
    per_layer_mean_rho: dict

    def to_json(self) -> dict:
        return {
            "s_mb": self.s_mb,
            "s_mbr": self.s_mbr,
            "cr": self.cr,
            "per_layer_mean_rho": self.per_layer_mean_rho,
            "top": {
                str(sel.layer): [[int(c), r] for c, r in zip(sel.channel_ids, sel.rhos)]
                for sel in self.selections
            },
        }


def _hemisphere_block(
    hemisphere: str,
    layer_srdms: Mapping[int, SRDM],
    channel_srdms: Mapping[int, SRDM],
    roi_of: Mapping[int, str],
    k: int,
) -> HemisphereBlock | None:
    ids = sorted(channel_srdms)
    if not ids or not layer_srdms:
        return None
    selections = []
    for layer in sorted(layer_srdms):
        scores = {cid: rsa_spearman(layer_srdms[layer], channel_srdms[cid]) for cid in ids}
        selections.append(rank_channels(scores, k, layer=layer))
    rois = sorted(set(roi_of.values()))
    s_mbr = {roi: model_region_similarity(selections, roi_of, roi) for roi in rois}
    cr = {
        roi: {str(sel.layer): contribution_ratio(sel, roi_of, roi) for sel in selections}
        for roi in rois
    }
    return HemisphereBlock(
        hemisphere=hemisphere,
        selections=tuple(selections),
        s_mb=model_brain_similarity(selections),
        s_mbr=s_mbr,
        cr=cr,
        per_layer_mean_rho={str(sel.layer): sel.mean_rho() for sel in selections},
    )


def build_alignment_report(
    model_tensors: Mapping[ConditionLabel, ActivationTensor],
    recordings: Mapping[ConditionLabel, TrialRecording],
    unit_classes: Mapping[str, Sequence[UnitId]],
    channel_classification: ChannelClassification | None,
    k: int = TOP_K_DEFAULT,
    trial_len: int = TRIAL_SYLLABLES,
    last_n: int = ANALYSIS_SYLLABLES,
    average: str = "magnitude",
) -> dict:
    """Full alignment summary as a JSON-ready dict.

    ``unit_classes`` maps class name (sentence/phrase/both) to unit lists;
    a "pooled" pool (their union) is always added and drives the chi-square
    overlap test. Channels are partitioned by hemisphere before ranking.
    """
    _require_conditions(model_tensors)
    _require_conditions(recordings)
    metas = next(iter(recordings.values())).channels
    for rec in recordings.values():
        if rec.channels != metas:
            raise ValidationError("condition recordings disagree on channel metadata")

    channel_srdms = {}
    for meta in metas:
        feats = brain_condition_features(recordings, meta.channel_id, last_n=last_n)
        channel_srdms[meta.channel_id] = srdm(feats)

    pools = {name: list(units) for name, units in unit_classes.items()}
    pools["pooled"] = sorted({u for units in pools.values() for u in units})

    unit_srdm_cache: dict[UnitId, SRDM] = {}

    def unit_srdm(u: UnitId) -> SRDM:
        if u not in unit_srdm_cache:
            feats = model_condition_features(
                model_tensors, u, trial_len=trial_len, last_n=last_n, average=average
            )
            unit_srdm_cache[u] = srdm(feats)
        return unit_srdm_cache[u]

    def pool_layer_srdms(units: Sequence[UnitId]) -> dict[int, SRDM]:
        by_layer: dict[int, list[SRDM]] = {}
        for u in units:
            by_layer.setdefault(u.layer, []).append(unit_srdm(u))
        return {layer: layer_srdm(mats, owner=layer) for layer, mats in by_layer.items()}

    hemis = {
        "L": {m.channel_id: channel_srdms[m.channel_id] for m in metas if m.hemisphere == "L"},
        "R": {m.channel_id: channel_srdms[m.channel_id] for m in metas if m.hemisphere == "R"},
    }
    roi_of_all = {m.channel_id: m.roi for m in metas}

    report: dict = {"k": k, "classes": {}, "chi_square": {}, "mean_across_classes": {}}
    blocks: dict[str, dict[str, HemisphereBlock | None]] = {}
    for name, units in pools.items():
        if not units:
            report["classes"][name] = None
            blocks[name] = {"L": None, "R": None}
            continue
        lsrdms = pool_layer_srdms(units)
        per_hemi = {}
        jsons = {}
        for hemi, chans in hemis.items():
            roi_of = {cid: roi_of_all[cid] for cid in chans}
            block = _hemisphere_block(hemi, lsrdms, chans, roi_of, k)
            per_hemi[hemi] = block
            jsons[hemi] = block.to_json() if block else None
        blocks[name] = per_hemi
        report["classes"][name] = jsons

    # arithmetic mean across the three neuron classes (pool "pooled" excluded)
    for hemi in ("L", "R"):
        s_vals = [
            blocks[c][hemi].s_mb
            for c in NEURON_CLASSES
            if blocks.get(c) and blocks[c][hemi] is not None
        ]
        rois = sorted({m.roi for m in metas})
        mbr = {}
        for roi in rois:
            vals = [
                blocks[c][hemi].s_mbr.get(roi)
                for c in NEURON_CLASSES
                if blocks.get(c) and blocks[c][hemi] is not None
            ]
            vals = [v for v in vals if v is not None]
            mbr[roi] = float(np.mean(vals)) if vals else None
        report["mean_across_classes"][hemi] = {
            "s_mb": float(np.mean(s_vals)) if s_vals else None,
            "s_mbr": mbr,
        }

    if channel_classification is not None:
        for hemi in ("L", "R"):
            block = blocks["pooled"][hemi]
            if block is None:
                report["chi_square"][hemi] = None
                continue
            per_layer = {}
            for sel in block.selections:
                try:
                    chi2, p = overlap_chi_square(
                        sel, channel_classification, universe=sorted(hemis[hemi])
                    )
                    per_layer[str(sel.layer)] = {"chi2": chi2, "p": p}
                except UndefinedTestError as exc:
                    per_layer[str(sel.layer)] = {"error": str(exc)}
            report["chi_square"][hemi] = per_layer
    else:
        report["chi_square"] = None
    return report
