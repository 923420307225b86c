"""Unit-level probing of activation tensors.

Stage one flags units whose real spectral amplitude at a target frequency
falls outside the 95% CI of a time-order permutation distribution. Stage two
z-scores amplitudes of the structured-corpus run against the shuffled-control
run and keeps units whose deviation clears the population mean by two
standard deviations, splitting them into sentence-rate (1 Hz), phrase-rate
(2 Hz) and dual-rate units.

Per-unit permutation streams are keyed by (seed, layer, neuron), so results
do not depend on scheduling or worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import stats as sps

from . import _kernels
from .errors import ConfigError, DegeneratePopulationError, ValidationError
from .ingest import ActivationTensor, UnitId

N_PERM_DEFAULT = 1000
ALPHA_DEFAULT = 0.05
SENTENCE_HZ = 1.0
PHRASE_HZ = 2.0
#: targets snap to the nearest bin within this tolerance (naturalistic
#: sequence lengths put the unit rate at non-round fractions).
BIN_SNAP_TOL_HZ = 1e-6

CLASS_NAMES = ("sentence", "phrase", "both", "none")


@dataclass(frozen=True)
class PermutationResult:
    """Observed statistic against the permuted 95% CI for one unit/channel."""

    unit: object
    freq_hz: float
    observed: float
    ci_low: float
    ci_high: float
    n_perm: int
    significant: bool


def _finite_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("need a 1-D series of at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite values")
    return x


def _grid_bin(n: int, rate_hz: float, f: float) -> int:
    freqs = np.arange(n // 2 + 1) * (rate_hz / n)
    k = int(np.argmin(np.abs(freqs - f)))
    if abs(freqs[k] - f) > BIN_SNAP_TOL_HZ:
        raise ValidationError(
            f"{f} Hz is not within {BIN_SNAP_TOL_HZ} Hz of any bin (nearest {freqs[k]:.6g})"
        )
    return k


def _check_perm_config(n_perm: int, alpha: float) -> None:
    if n_perm < 100:
        raise ConfigError("n_perm below 100 gives unstable CI quantiles")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must be in (0, 1)")


def unit_rng(seed: int, unit: UnitId) -> np.random.Generator:
    """Independent, reproducible stream for one unit."""
    return np.random.default_rng([int(seed), int(unit.layer), int(unit.neuron)])


def empirical_ci(stats: np.ndarray, alpha: float) -> tuple[float, float]:
    """Outward-rounded order-statistic quantiles [alpha/2, 1 - alpha/2].

    Interpolation-free so the band consists of actual permuted values; a
    degenerate (all-equal) distribution collapses to that exact value.
    """
    ordered = np.sort(stats)
    n = ordered.size
    lo = int(np.floor(alpha / 2 * (n - 1)))
    hi = int(np.ceil((1 - alpha / 2) * (n - 1)))
    return float(ordered[lo]), float(ordered[hi])


def _observed_stat(series, cosb, sinb, mode) -> float:
    """The statistic through the identity permutation of the resampling
    kernel, so a permutation-invariant series matches its permuted
    distribution bit for bit."""
    identity = np.arange(series.size, dtype=np.int64)[None, :]
    return float(
        _kernels.perm_bin_stats(series, identity, cosb, sinb, mode == "magnitude")[0]
    )


def permutation_ci(
    series,
    rate_hz: float,
    f: float,
    n_perm: int = N_PERM_DEFAULT,
    alpha: float = ALPHA_DEFAULT,
    seed: int = 0,
    mode: str = "real",
    unit: UnitId | None = None,
    rng: np.random.Generator | None = None,
) -> PermutationResult:
    """Permutation CI for the spectral statistic of one series at ``f``.

    The series' time order is permuted ``n_perm`` times and the statistic
    recomputed each time; the CI is the empirical [alpha/2, 1-alpha/2]
    quantile band and the unit is significant when the observed value falls
    outside it.
    """
    _check_perm_config(n_perm, alpha)
    x = _finite_series(series)
    k = _grid_bin(x.size, rate_hz, f)
    cosb, sinb = _kernels.bin_basis(x.size, k)
    observed = _observed_stat(x, cosb, sinb, mode)
    if rng is None:
        rng = np.random.default_rng(seed) if unit is None else unit_rng(seed, unit)
    perms = _kernels.draw_permutations(rng, n_perm, x.size)
    stats = _kernels.perm_bin_stats(x, perms, cosb, sinb, mode == "magnitude")
    ci_low, ci_high = empirical_ci(stats, alpha)
    return PermutationResult(
        unit=unit,
        freq_hz=k * rate_hz / x.size,
        observed=observed,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        n_perm=n_perm,
        significant=bool(observed < ci_low or observed > ci_high),
    )


def permutation_scan(
    t: ActivationTensor,
    freqs: Iterable[float],
    n_perm: int = N_PERM_DEFAULT,
    alpha: float = ALPHA_DEFAULT,
    seed: int = 0,
    mode: str = "real",
    workers: int = 1,
) -> dict[float, dict[UnitId, PermutationResult]]:
    """Permutation CIs for every unit at each target frequency.

    One permutation set per unit is shared across frequencies; this equals
    running :func:`permutation_ci` per frequency because the per-unit stream
    is keyed by (seed, layer, neuron) alone.
    """
    _check_perm_config(n_perm, alpha)
    n = t.n_timepoints
    ks = [_grid_bin(n, t.rate_hz, f) for f in freqs]
    bin_hz = [k * t.rate_hz / n for k in ks]
    bases = [_kernels.bin_basis(n, k) for k in ks]
    units = list(t.units())

    def work(unit: UnitId):
        x = t.series(unit)
        rng = unit_rng(seed, unit)
        perms = _kernels.draw_permutations(rng, n_perm, n)
        per_freq = []
        for (cosb, sinb), hz in zip(bases, bin_hz):
            observed = _observed_stat(x, cosb, sinb, mode)
            stats = _kernels.perm_bin_stats(x, perms, cosb, sinb, mode == "magnitude")
            ci_low, ci_high = empirical_ci(stats, alpha)
            per_freq.append(
                PermutationResult(
                    unit=unit,
                    freq_hz=hz,
                    observed=observed,
                    ci_low=float(ci_low),
                    ci_high=float(ci_high),
                    n_perm=n_perm,
                    significant=bool(observed < ci_low or observed > ci_high),
                )
            )
        return unit, per_freq

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, units))
    else:
        results = [work(u) for u in units]

    out: dict[float, dict[UnitId, PermutationResult]] = {hz: {} for hz in bin_hz}
    for unit, per_freq in results:
        for res in per_freq:
            out[res.freq_hz][unit] = res
    return out


def significant_neurons(
    t: ActivationTensor,
    f: float,
    n_perm: int = N_PERM_DEFAULT,
    alpha: float = ALPHA_DEFAULT,
    seed: int = 0,
    mode: str = "real",
    workers: int = 1,
) -> frozenset[UnitId]:
    """Units whose statistic at ``f`` escapes the permutation CI."""
    scan = permutation_scan(t, [f], n_perm=n_perm, alpha=alpha, seed=seed, mode=mode, workers=workers)
    (results,) = scan.values()
    return frozenset(u for u, r in results.items() if r.significant)


# ---------------------------------------------------------------------------
# z-score deviation and classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ZScoreTable:
    """Experiment-vs-control z deviations at one frequency.

    Rows cover the significant set; the population mean/sd that feed the
    classification threshold are taken over all units of the tensor pair
    (pooled across layers unless built per-layer).
    """

    freq_hz: float
    n_layers: int
    n_neurons: int
    units: tuple[UnitId, ...]
    z_exp: np.ndarray
    z_ctrl: np.ndarray
    z_dev: np.ndarray
    mu_z: float
    sigma_z: float

    @property
    def threshold(self) -> float:
        return self.mu_z + 2.0 * self.sigma_z

    def passing(self) -> frozenset[UnitId]:
        """Members at or above the two-sigma deviation threshold."""
        if self.sigma_z == 0.0:
            raise DegeneratePopulationError(
                "all z deviations are equal; the two-sigma threshold is undefined"
            )
        mask = self.z_dev >= self.threshold
        return frozenset(u for u, hit in zip(self.units, mask) if hit)


def _amps_at(t: ActivationTensor, f: float, mode: str) -> np.ndarray:
    n = t.n_timepoints
    k = _grid_bin(n, t.rate_hz, f)
    flat = np.asarray(t.values, dtype=np.float64).reshape(-1, n)
    coeffs = np.fft.rfft(flat, axis=1)[:, k]
    vals = np.abs(coeffs) if mode == "magnitude" else coeffs.real
    return vals.reshape(t.n_layers, t.n_neurons)


def _zscore(amps: np.ndarray, per_layer: bool) -> np.ndarray:
    if per_layer:
        mu = amps.mean(axis=1, keepdims=True)
        sd = amps.std(axis=1, keepdims=True)
    else:
        mu = amps.mean()
        sd = amps.std()
    if np.any(sd == 0):
        raise DegeneratePopulationError("zero amplitude variance within a group")
    return (amps - mu) / sd


def zscore_deviation(
    exp: ActivationTensor,
    ctrl: ActivationTensor,
    s: Iterable[UnitId],
    f: float,
    mode: str = "real",
    per_layer: bool = False,
) -> ZScoreTable:
    """z-score deviation between structured and control runs at ``f``.

    Amplitudes of every unit are z-scored within each group; the deviation is
    the difference of the two z-scores. The population mean and sd cover all
    units, so a small significant set still gets a meaningful threshold.
    """
    if exp.values.shape != ctrl.values.shape:
        raise ValidationError("experiment and control tensors must share a shape")
    members = sorted(set(s))
    if not members:
        raise DegeneratePopulationError("significant set is empty")
    if exp.n_layers * exp.n_neurons < 3:
        raise DegeneratePopulationError("population of fewer than 3 units")
    z_exp = _zscore(_amps_at(exp, f, mode), per_layer)
    z_ctrl = _zscore(_amps_at(ctrl, f, mode), per_layer)
    z_dev = z_exp - z_ctrl
    rows = np.array([[u.layer, u.neuron] for u in members])
    return ZScoreTable(
        freq_hz=f,
        n_layers=exp.n_layers,
        n_neurons=exp.n_neurons,
        units=tuple(members),
        z_exp=z_exp[rows[:, 0], rows[:, 1]],
        z_ctrl=z_ctrl[rows[:, 0], rows[:, 1]],
        z_dev=z_dev[rows[:, 0], rows[:, 1]],
        mu_z=float(z_dev.mean()),
        sigma_z=float(z_dev.std()),
    )


@dataclass(frozen=True)
class NeuronClassification:
    """Partition of all units into sentence / phrase / both / none."""

    n_layers: int
    n_neurons: int
    sentence: frozenset[UnitId]
    phrase: frozenset[UnitId]
    both: frozenset[UnitId]

    def class_of(self, unit: UnitId) -> str:
        if unit in self.both:
            return "both"
        if unit in self.sentence:
            return "sentence"
        if unit in self.phrase:
            return "phrase"
        return "none"

    def syntactic(self) -> frozenset[UnitId]:
        return self.sentence | self.phrase | self.both

    def members(self, name: str) -> frozenset[UnitId]:
        if name == "pooled":
            return self.syntactic()
        if name not in ("sentence", "phrase", "both"):
            raise ValidationError(f"unknown class {name!r}")
        return getattr(self, name)


def classify_neurons(z1: ZScoreTable, z2: ZScoreTable) -> NeuronClassification:
    """Split units by which frequency thresholds they clear (inclusive >=)."""
    if (z1.n_layers, z1.n_neurons) != (z2.n_layers, z2.n_neurons):
        raise ValidationError("z tables built from different tensor shapes")
    hit1 = z1.passing()
    hit2 = z2.passing()
    return NeuronClassification(
        n_layers=z1.n_layers,
        n_neurons=z1.n_neurons,
        sentence=frozenset(hit1 - hit2),
        phrase=frozenset(hit2 - hit1),
        both=frozenset(hit1 & hit2),
    )


# ---------------------------------------------------------------------------
# aggregate statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LayerDistribution:
    """Per-layer counts of exclusive sentence, exclusive phrase and dual units."""

    n_neurons: int
    n_sentence: np.ndarray
    n_phrase: np.ndarray
    n_both: np.ndarray

    @property
    def n_layers(self) -> int:
        return self.n_sentence.size

    def proportions(self, relative_to: str = "layer") -> np.ndarray:
        """(layers, 3) proportions, relative to layer width or to the total
        syntactic-unit count."""
        counts = np.stack([self.n_sentence, self.n_phrase, self.n_both], axis=1).astype(float)
        if relative_to == "layer":
            return counts / self.n_neurons
        if relative_to == "total":
            total = counts.sum()
            return counts / total if total else counts
        raise ValidationError(f"unknown normalization {relative_to!r}")


def layer_distribution(c: NeuronClassification) -> LayerDistribution:
    n_sentence = np.zeros(c.n_layers, dtype=int)
    n_phrase = np.zeros(c.n_layers, dtype=int)
    n_both = np.zeros(c.n_layers, dtype=int)
    for u in c.sentence:
        n_sentence[u.layer] += 1
    for u in c.phrase:
        n_phrase[u.layer] += 1
    for u in c.both:
        n_both[u.layer] += 1
    return LayerDistribution(
        n_neurons=c.n_neurons, n_sentence=n_sentence, n_phrase=n_phrase, n_both=n_both
    )


def covariance_trend(d: LayerDistribution) -> tuple[float, float]:
    """Pearson r (and p) between per-layer sentence and phrase counts.

    Degenerate (constant) count vectors give (nan, nan).
    """
    x = d.n_sentence.astype(float)
    y = d.n_phrase.astype(float)
    if x.size < 2 or np.std(x) == 0 or np.std(y) == 0:
        return float("nan"), float("nan")
    r, p = sps.pearsonr(x, y)
    return float(r), float(p)


def bilingual_sets(
    c_a: NeuronClassification, c_b: NeuronClassification
) -> Mapping[str, np.ndarray]:
    """Per-layer counts of units syntactic in only one language or in both."""
    if (c_a.n_layers, c_a.n_neurons) != (c_b.n_layers, c_b.n_neurons):
        raise ValidationError("classifications cover different tensor shapes")
    syn_a = c_a.syntactic()
    syn_b = c_b.syntactic()
    out = {
        "a_only": np.zeros(c_a.n_layers, dtype=int),
        "b_only": np.zeros(c_a.n_layers, dtype=int),
        "shared": np.zeros(c_a.n_layers, dtype=int),
    }
    for u in syn_a - syn_b:
        out["a_only"][u.layer] += 1
    for u in syn_b - syn_a:
        out["b_only"][u.layer] += 1
    for u in syn_a & syn_b:
        out["shared"][u.layer] += 1
    return out
