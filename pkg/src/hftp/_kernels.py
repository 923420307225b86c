"""Hot numeric kernels: permutation-resampled spectral statistics.

Two interchangeable backends compute every kernel:

* a numba ``@njit`` implementation (default when numba imports cleanly), and
* a pure-numpy fallback, selected by setting ``HFTP_NO_NUMBA=1`` in the
  environment or automatically when numba is unavailable.

Both backends consume the same permutation index arrays, so they agree to
floating-point roundoff and every run is deterministic for a fixed backend.
``benchmarks/bench_kernels.py`` times them against each other.
"""

from __future__ import annotations

import os

import numpy as np

_TRUTHY = {"1", "true", "yes", "on"}


def _numpy_forced() -> bool:
    return os.environ.get("HFTP_NO_NUMBA", "").strip().lower() in _TRUTHY


if not _numpy_forced():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def active_backend() -> str:
    """Name of the backend the public kernels dispatch to."""
    return "numba" if NUMBA_ENABLED else "numpy"


# Permutation chunking bounds the gathered-array working set for the ITPC
# kernel fallback (chunk * n_trials * n_samples doubles). The chunk size is a
# constant so the permutation stream is identical for any backend.
PERM_CHUNK = 64


def draw_permutations(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """(count, n) independent uniform-random permutations of range(n).

    Implemented as argsort of iid uniforms so the stream depends only on the
    generator state, never on the backend.
    """
    return np.argsort(rng.random((count, n)), axis=-1)


def bin_basis(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Cosine/sine basis rows of the DFT matrix for bin ``k`` of length ``n``.

    For a real series x, the unnormalized forward coefficient at bin k is
    ``dot(x, cos) - 1j * dot(x, sin)``.
    """
    ang = 2.0 * np.pi * k * np.arange(n) / n
    return np.cos(ang), np.sin(ang)


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _row_dot(gathered, basis):
    # Sequential left-to-right accumulation (cumsum) instead of BLAS: the
    # result is then independent of the batch shape and matches the numba
    # loop bit for bit, so observed statistics computed through an identity
    # permutation equal their permuted counterparts exactly on degenerate
    # (permutation-invariant) inputs.
    return np.cumsum(gathered * basis, axis=-1)[..., -1]


def _perm_bin_stats_numpy(x, perms, cosb, sinb, magnitude):
    gathered = x[perms]  # (P, n)
    re = _row_dot(gathered, cosb)
    if not magnitude:
        return re
    im = -_row_dot(gathered, sinb)
    return np.hypot(re, im)


def _perm_itpc_numpy(trials, perms, cosb, sinb):
    # perms: (P, T, n); permute samples independently within each trial.
    p, t, n = perms.shape
    gathered = np.take_along_axis(np.broadcast_to(trials, (p, t, n)), perms, axis=2)
    re = _row_dot(gathered, cosb)
    im = -_row_dot(gathered, sinb)
    mag = np.hypot(re, im)  # (P, T)
    ok = mag > 0.0
    safe = np.where(ok, mag, 1.0)
    ure = np.where(ok, re / safe, 0.0)
    uim = np.where(ok, im / safe, 0.0)
    counts = ok.sum(axis=1)
    counts = np.maximum(counts, 1)
    return np.hypot(ure.sum(axis=1), uim.sum(axis=1)) / counts


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(nogil=True, cache=True)
    def _perm_bin_stats_numba(x, perms, cosb, sinb, magnitude):  # pragma: no cover
        n_perm, n = perms.shape
        out = np.empty(n_perm)
        for p in range(n_perm):
            re = 0.0
            im = 0.0
            for i in range(n):
                v = x[perms[p, i]]
                re += v * cosb[i]
                if magnitude:
                    im -= v * sinb[i]
            out[p] = np.hypot(re, im) if magnitude else re
        return out

    @njit(nogil=True, cache=True)
    def _perm_itpc_numba(trials, perms, cosb, sinb):  # pragma: no cover
        n_perm, n_trials, n = perms.shape
        out = np.empty(n_perm)
        for p in range(n_perm):
            sre = 0.0
            sim = 0.0
            used = 0
            for t in range(n_trials):
                re = 0.0
                im = 0.0
                for i in range(n):
                    v = trials[t, perms[p, t, i]]
                    re += v * cosb[i]
                    im -= v * sinb[i]
                mag = np.hypot(re, im)
                if mag > 0.0:
                    sre += re / mag
                    sim += im / mag
                    used += 1
            if used == 0:
                used = 1
            out[p] = np.hypot(sre, sim) / used
        return out


# ---------------------------------------------------------------------------
# dispatching surface
# ---------------------------------------------------------------------------


def perm_bin_stats(x, perms, cosb, sinb, magnitude=False):
    """Spectral statistic at one bin for each row-permutation of ``x``.

    Returns dot(x[perm], cos) per permutation, or the coefficient magnitude
    when ``magnitude`` is set.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    if NUMBA_ENABLED:
        return _perm_bin_stats_numba(x, perms, cosb, sinb, magnitude)
    return _perm_bin_stats_numpy(x, perms, cosb, sinb, magnitude)


def perm_itpc(trials, perms, cosb, sinb):
    """Inter-trial phase coherence at one bin under within-trial permutations.

    ``perms`` holds one sample-order permutation per (permutation, trial).
    Trials whose permuted coefficient is exactly zero are excluded from the
    phasor mean, mirroring the observed-ITPC convention.
    """
    trials = np.ascontiguousarray(trials, dtype=np.float64)
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    if NUMBA_ENABLED:
        return _perm_itpc_numba(trials, perms, cosb, sinb)
    return _perm_itpc_numpy(trials, perms, cosb, sinb)
