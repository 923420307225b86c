"""Channel-level probing of trial recordings via inter-trial phase coherence.

ITPC at a bin is the resultant length of the mean unit phasor across trials:
1 when every trial locks to the same phase, near ``sqrt(pi)/(2 sqrt(T))``
for random phases. Channel significance mirrors the unit probe: the observed
ITPC is compared with the 95% CI of ITPC values recomputed after shuffling
sample order independently within each trial.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import _kernels
from .errors import ValidationError
from .ingest import ChannelMeta, RoiMap, TrialRecording, ROI_NAMES, HEMISPHERES
from .probe_model import (
    ALPHA_DEFAULT,
    empirical_ci,
    N_PERM_DEFAULT,
    PHRASE_HZ,
    SENTENCE_HZ,
    PermutationResult,
    _check_perm_config,
    _grid_bin,
)


@dataclass(frozen=True, eq=False)
class ItpcSpectrum:
    """Phase-coherence spectrum of one channel.

    ``complex_mean`` keeps the mean phasor per bin (the encoding stage needs
    it); ``n_excluded`` counts trials dropped per bin because their
    coefficient was exactly zero (undefined phase).
    """

    channel_id: int
    freqs: np.ndarray
    itpc: np.ndarray
    complex_mean: np.ndarray
    n_trials: int
    n_excluded: np.ndarray

    def quality_flags(self) -> np.ndarray:
        """Bins where at least one trial was excluded."""
        return np.flatnonzero(self.n_excluded > 0)


def itpc(r: TrialRecording, channel: int) -> ItpcSpectrum:
    """ITPC across trials for every non-negative frequency bin."""
    if r.n_trials < 2:
        raise ValidationError("ITPC needs at least 2 trials")
    trials = r.trials(channel)
    coeffs = np.fft.rfft(trials, axis=1)
    mags = np.abs(coeffs)
    ok = mags > 0.0
    phasors = np.where(ok, coeffs / np.where(ok, mags, 1.0), 0.0)
    counts = ok.sum(axis=0)
    complex_mean = phasors.sum(axis=0) / np.maximum(counts, 1)
    freqs = np.arange(coeffs.shape[1]) * (r.rate_hz / r.n_samples)
    return ItpcSpectrum(
        channel_id=channel,
        freqs=freqs,
        itpc=np.abs(complex_mean),
        complex_mean=complex_mean,
        n_trials=r.n_trials,
        n_excluded=(r.n_trials - counts).astype(int),
    )


def channel_rng(seed: int, channel: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(channel)])


def _observed_itpc(trials, cosb, sinb) -> float:
    """Observed ITPC at one bin through the identity permutation of the
    resampling kernel, keeping the observed/permuted comparison exact for
    permutation-invariant inputs."""
    n_trials, n = trials.shape
    identity = np.broadcast_to(np.arange(n, dtype=np.int64), (1, n_trials, n))
    return float(_kernels.perm_itpc(trials, identity, cosb, sinb)[0])


def _permuted_itpc_at(trials, ks_bases, n_perm, rng):
    """Permuted ITPC values at each requested bin, sharing one permutation
    stream. Permutations are drawn in fixed chunks so the stream does not
    depend on backend or bin count."""
    n_trials, n = trials.shape
    out = [np.empty(n_perm) for _ in ks_bases]
    done = 0
    while done < n_perm:
        take = min(_kernels.PERM_CHUNK, n_perm - done)
        perms = np.argsort(rng.random((take, n_trials, n)), axis=-1)
        for j, (cosb, sinb) in enumerate(ks_bases):
            out[j][done : done + take] = _kernels.perm_itpc(trials, perms, cosb, sinb)
        done += take
    return out


def channel_permutation_ci(
    r: TrialRecording,
    channel: int,
    f: float,
    n_perm: int = N_PERM_DEFAULT,
    alpha: float = ALPHA_DEFAULT,
    seed: int = 0,
) -> PermutationResult:
    """Permutation CI for one channel's ITPC at frequency ``f``."""
    _check_perm_config(n_perm, alpha)
    if r.n_trials < 2:
        raise ValidationError("ITPC needs at least 2 trials")
    k = _grid_bin(r.n_samples, r.rate_hz, f)
    trials = r.trials(channel)
    cosb, sinb = _kernels.bin_basis(r.n_samples, k)
    observed = _observed_itpc(trials, cosb, sinb)
    (stats,) = _permuted_itpc_at(trials, [(cosb, sinb)], n_perm, channel_rng(seed, channel))
    ci_low, ci_high = empirical_ci(stats, alpha)
    return PermutationResult(
        unit=channel,
        freq_hz=k * r.rate_hz / r.n_samples,
        observed=observed,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        n_perm=n_perm,
        significant=bool(observed < ci_low or observed > ci_high),
    )


@dataclass(frozen=True)
class ChannelClassification:
    """Per-channel class plus anatomy, mirroring the unit classification."""

    channels: tuple[ChannelMeta, ...]
    classes: tuple[str, ...]

    def class_of(self, channel: int) -> str:
        return self.classes[channel]

    def significant_ids(self) -> frozenset[int]:
        return frozenset(
            m.channel_id for m, c in zip(self.channels, self.classes) if c != "none"
        )

    def ids_of(self, name: str) -> frozenset[int]:
        return frozenset(
            m.channel_id for m, c in zip(self.channels, self.classes) if c == name
        )


def classify_channels(
    r: TrialRecording,
    n_perm: int = N_PERM_DEFAULT,
    alpha: float = ALPHA_DEFAULT,
    seed: int = 0,
    sentence_hz: float = SENTENCE_HZ,
    phrase_hz: float = PHRASE_HZ,
    workers: int = 1,
) -> ChannelClassification:
    """Classify every channel by its ITPC significance at the two rates.

    Both frequencies reuse the channel's permutation stream, which is keyed
    by (seed, channel); this matches two independent calls to
    :func:`channel_permutation_ci` exactly.
    """
    _check_perm_config(n_perm, alpha)
    if r.n_trials < 2:
        raise ValidationError("ITPC needs at least 2 trials")
    k1 = _grid_bin(r.n_samples, r.rate_hz, sentence_hz)
    k2 = _grid_bin(r.n_samples, r.rate_hz, phrase_hz)
    bases = [_kernels.bin_basis(r.n_samples, k) for k in (k1, k2)]

    def work(channel: int) -> str:
        trials = r.trials(channel)
        perm1, perm2 = _permuted_itpc_at(trials, bases, n_perm, channel_rng(seed, channel))
        hits = []
        for (cosb, sinb), stats in ((bases[0], perm1), (bases[1], perm2)):
            lo, hi = empirical_ci(stats, alpha)
            obs = _observed_itpc(trials, cosb, sinb)
            hits.append(obs < lo or obs > hi)
        if all(hits):
            return "both"
        if hits[0]:
            return "sentence"
        if hits[1]:
            return "phrase"
        return "none"

    ids = list(range(r.n_channels))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            classes = tuple(pool.map(work, ids))
    else:
        classes = tuple(work(c) for c in ids)
    return ChannelClassification(channels=r.channels, classes=classes)


# ---------------------------------------------------------------------------
# regional statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RoiDistribution:
    """Counts of classified channels per (ROI, hemisphere) cell.

    Count arrays are indexed [roi, hemisphere] following ``ROI_NAMES`` and
    ``HEMISPHERES`` order; ``n_channels`` holds the per-cell channel totals
    used for proportions.
    """

    n_sentence: np.ndarray
    n_phrase: np.ndarray
    n_both: np.ndarray
    n_channels: np.ndarray

    def proportions(self) -> np.ndarray:
        """(roi, hemisphere, 3) class proportions of each cell's channels."""
        counts = np.stack([self.n_sentence, self.n_phrase, self.n_both], axis=-1).astype(float)
        denom = np.maximum(self.n_channels, 1)[..., None]
        return counts / denom

    def total_significant(self) -> int:
        return int(self.n_sentence.sum() + self.n_phrase.sum() + self.n_both.sum())


def roi_distribution(c: ChannelClassification, m: RoiMap) -> RoiDistribution:
    """Regional distribution of significant channels, re-resolved via ``m``."""
    roi_idx = {name: i for i, name in enumerate(ROI_NAMES)}
    hemi_idx = {h: i for i, h in enumerate(HEMISPHERES)}
    shape = (len(ROI_NAMES), len(HEMISPHERES))
    n_sentence = np.zeros(shape, dtype=int)
    n_phrase = np.zeros(shape, dtype=int)
    n_both = np.zeros(shape, dtype=int)
    n_channels = np.zeros(shape, dtype=int)
    for meta, cls in zip(c.channels, c.classes):
        cell = (roi_idx[m.resolve(meta.aal_label)], hemi_idx[meta.hemisphere])
        n_channels[cell] += 1
        if cls == "sentence":
            n_sentence[cell] += 1
        elif cls == "phrase":
            n_phrase[cell] += 1
        elif cls == "both":
            n_both[cell] += 1
    return RoiDistribution(
        n_sentence=n_sentence, n_phrase=n_phrase, n_both=n_both, n_channels=n_channels
    )


def roi_correlation(d: RoiDistribution, hemisphere: str) -> tuple[float, float]:
    """Pearson r (and p) between sentence and phrase counts across ROIs."""
    if hemisphere not in HEMISPHERES:
        raise ValidationError(f"hemisphere must be one of {HEMISPHERES}")
    h = HEMISPHERES.index(hemisphere)
    x = d.n_sentence[:, h].astype(float)
    y = d.n_phrase[:, h].astype(float)
    if np.std(x) == 0 or np.std(y) == 0:
        return float("nan"), float("nan")
    r, p = sps.pearsonr(x, y)
    return float(r), float(p)
