"""Frequency-domain core.

Convention: unnormalized forward DFT, non-negative frequency bins only
(``freqs[k] = k * rate / n``). A zero-phase cosine of amplitude ``a`` sampled
on the grid therefore lands ``a * n / 2`` in the real part of its bin, which
keeps the closed forms used by the probing statistics stable. Arbitrary input
lengths are supported, including the non-power-of-two lengths produced by
8- and 9-unit naturalistic sequences.
"""

from __future__ import annotations

import xml.sax.saxutils
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import FrequencyGridError, GridTooCoarseError, ValidationError

NEIGHBOR_HALF_WIDTH_HZ = 0.5
FDR_Q = 0.05


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DFT coefficients of one real series at non-negative frequencies."""

    freqs: np.ndarray
    coeffs: np.ndarray
    n_input: int
    rate_hz: float

    def __post_init__(self):
        if len(self.freqs) != len(self.coeffs):
            raise ValidationError("freqs and coeffs must align")

    def magnitude(self) -> np.ndarray:
        return np.abs(self.coeffs)


def _check_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("need a 1-D series of at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite values")
    return x


def dft(series, rate_hz: float) -> Spectrum:
    """Unnormalized forward DFT, bins 0 .. floor(n/2)."""
    x = _check_series(series)
    n = x.size
    coeffs = np.fft.rfft(x)
    freqs = np.arange(coeffs.size) * (rate_hz / n)
    return Spectrum(freqs=freqs, coeffs=coeffs, n_input=n, rate_hz=rate_hz)


def dft_full(series) -> np.ndarray:
    """All-bin unnormalized DFT; internal, used for Parseval-style checks."""
    return np.fft.fft(_check_series(series))


def bin_index(s: Spectrum, f: float, tol: float = 1e-9) -> int:
    """Index of the bin whose center matches ``f`` within ``tol`` Hz."""
    k = int(np.argmin(np.abs(s.freqs - f)))
    if abs(s.freqs[k] - f) > tol:
        raise FrequencyGridError(
            f"{f} Hz is not on the bin grid (nearest center {s.freqs[k]:.6g} Hz)"
        )
    return k


def amp_stat(s: Spectrum, f: float, mode: str = "real") -> float:
    """Amplitude statistic at a bin center: Re(coeff) or |coeff|."""
    k = bin_index(s, f)
    if mode == "real":
        return float(s.coeffs[k].real)
    if mode == "magnitude":
        return float(np.abs(s.coeffs[k]))
    raise ValidationError(f"unknown amp_stat mode {mode!r}")


def neighbor_bins(s: Spectrum, target_hz: float, half_width: float = NEIGHBOR_HALF_WIDTH_HZ) -> np.ndarray:
    """Bins with 0 < |f - target| <= half_width."""
    d = np.abs(s.freqs - target_hz)
    return np.flatnonzero((d > 1e-12) & (d <= half_width + 1e-12))


@dataclass(frozen=True, eq=False)
class PeakTestResult:
    target_hz: float
    statistic: float
    p_value: float
    neighbor_bins: np.ndarray


def peak_test(
    replicate_spectra,
    target_hz: float,
    mode: str = "magnitude",
    half_width: float = NEIGHBOR_HALF_WIDTH_HZ,
) -> PeakTestResult:
    """One-sided paired test: is the target bin stronger than its neighbors?

    For each replicate spectrum, the difference between the amplitude at the
    target and the mean amplitude over bins within ``half_width`` Hz is
    formed; a one-sample t statistic over the replicate differences gives the
    p-value. Zero differences across all replicates yield p = 0.5.
    """
    replicates = list(replicate_spectra)
    if len(replicates) < 3:
        raise ValidationError("peak_test needs at least 3 replicate spectra")
    grid = replicates[0].freqs
    for s in replicates[1:]:
        if s.freqs.shape != grid.shape or not np.allclose(s.freqs, grid, atol=1e-12):
            raise ValidationError("replicate spectra must share one frequency grid")
    k = bin_index(replicates[0], target_hz)
    nb = neighbor_bins(replicates[0], target_hz, half_width)
    if nb.size == 0:
        raise GridTooCoarseError(
            f"no bins within {half_width} Hz of {target_hz} Hz on this grid"
        )

    def amp(s: Spectrum, idx):
        vals = s.coeffs[idx]
        return vals.real if mode == "real" else np.abs(vals)

    diffs = np.array([float(np.mean(amp(s, np.array([k]))) - np.mean(amp(s, nb))) for s in replicates])
    n = diffs.size
    sd = float(np.std(diffs, ddof=1))
    mean = float(np.mean(diffs))
    if sd == 0.0:
        if mean == 0.0:
            stat, p = 0.0, 0.5
        else:
            stat = np.inf if mean > 0 else -np.inf
            p = 0.0 if mean > 0 else 1.0
    else:
        stat = mean / (sd / np.sqrt(n))
        p = float(sps.t.sf(stat, df=n - 1))
    return PeakTestResult(target_hz=target_hz, statistic=float(stat), p_value=p, neighbor_bins=nb)


def fdr_correct(pvals, q: float = FDR_Q) -> np.ndarray:
    """Benjamini-Hochberg step-up; returns a boolean rejection mask."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1) | ~np.isfinite(p)):
        raise ValidationError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    thresholds = q * (np.arange(1, m + 1) / m)
    passing = np.flatnonzero(ranked <= thresholds)
    mask = np.zeros(m, dtype=bool)
    if passing.size:
        mask[order[: passing[-1] + 1]] = True
    return mask


def normalize01(curve) -> np.ndarray:
    """Scale to [0, 1]; a constant curve maps to all zeros."""
    x = np.asarray(curve, dtype=np.float64)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValidationError("normalize01 needs at least one finite value")
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def write_spectrum_csv(s: Spectrum, path) -> None:
    """CSV with columns freq_hz, re, im, magnitude."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("freq_hz,re,im,magnitude\n")
        for f, c in zip(s.freqs, s.coeffs):
            fh.write(f"{float(f)!r},{float(c.real)!r},{float(c.imag)!r},{float(abs(c))!r}\n")


def _svg_path(xs, ys) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return pts


def render_spectra_svg(
    path,
    freqs,
    curves,
    title: str = "",
    significant_hz=(),
    width: int = 640,
    height: int = 360,
) -> None:
    """Minimal SVG line plot: normalized curves with +/- 1 s.e.m. bands.

    ``curves`` is a sequence of (label, mean, sem, css_color); every curve is
    scaled to [0, 1] jointly with its band. Output is deterministic.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    ml, mr, mt, mb = 48, 16, 28, 36
    pw, ph = width - ml - mr, height - mt - mb
    fmin, fmax = float(freqs.min()), float(freqs.max())
    span = (fmax - fmin) or 1.0

    def xpix(f):
        return ml + (np.asarray(f) - fmin) / span * pw

    def ypix(v):
        return mt + (1.0 - np.clip(np.asarray(v), -0.05, 1.05)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="13" '
            f'font-family="sans-serif">{xml.sax.saxutils.escape(title)}</text>'
        )
    # axes
    parts.append(
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>'
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>'
    )
    for tick in np.linspace(fmin, fmax, 5):
        tx = float(xpix(tick))
        parts.append(
            f'<line x1="{tx:.2f}" y1="{mt + ph}" x2="{tx:.2f}" y2="{mt + ph + 4}" stroke="black"/>'
            f'<text x="{tx:.2f}" y="{mt + ph + 16}" text-anchor="middle" font-size="10" '
            f'font-family="sans-serif">{tick:.2g}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2:.0f}" y="{height - 6}" text-anchor="middle" font-size="11" '
        f'font-family="sans-serif">frequency (Hz)</text>'
    )

    for slot, (label, mean, sem, color) in enumerate(curves):
        mean = np.asarray(mean, dtype=np.float64)
        sem = np.zeros_like(mean) if sem is None else np.asarray(sem, dtype=np.float64)
        lo, hi = float(np.min(mean - sem)), float(np.max(mean + sem))
        rng = (hi - lo) or 1.0
        norm = lambda v: (np.asarray(v) - lo) / rng  # noqa: E731 - tiny local scaler
        xs = xpix(freqs)
        upper = ypix(norm(mean + sem))
        lower = ypix(norm(mean - sem))
        band = _svg_path(xs, upper) + " " + _svg_path(xs[::-1], lower[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" opacity="0.2"/>')
        parts.append(
            f'<polyline points="{_svg_path(xs, ypix(norm(mean)))}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{ml + pw - 4}" y="{mt + 14 + 14 * slot}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif" fill="{color}">'
            f"{xml.sax.saxutils.escape(str(label))}</text>"
        )

    for f_sig in significant_hz:
        tx = float(xpix(f_sig))
        parts.append(
            f'<text x="{tx:.2f}" y="{mt + 10}" text-anchor="middle" font-size="13" '
            f'font-family="sans-serif">*</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts) + "\n")
