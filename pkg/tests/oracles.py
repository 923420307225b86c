"""Independent brute-force reference implementations.

Everything here is deliberately naive (loops, direct formulas) and imports
nothing from the package under test, so each oracle stays an independent
route to the same quantity.
"""

import numpy as np


def naive_dft(x):
    """O(N^2) forward DFT, non-negative frequency bins only."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    out = []
    for k in range(n // 2 + 1):
        acc = 0.0 + 0.0j
        for i in range(n):
            acc += x[i] * np.exp(-2j * np.pi * k * i / n)
        out.append(acc)
    return np.array(out)


def naive_dft_full(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    return np.array(
        [sum(x[i] * np.exp(-2j * np.pi * k * i / n) for i in range(n)) for k in range(n)]
    )


def rank_average(v):
    """Average ranks (1-based) with midrank ties."""
    v = np.asarray(v, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    return float(np.sum(xc * yc) / np.sqrt(np.sum(xc**2) * np.sum(yc**2)))


def spearman(x, y):
    return pearson(rank_average(x), rank_average(y))


def chi_square_2x2(a, b, c, d):
    n = a + b + c + d
    return n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d))


def anova_oneway(groups):
    """(F, eta_squared) by direct sums of squares."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    allv = np.concatenate(groups)
    grand = allv.mean()
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ssw = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups)
    dfb = len(groups) - 1
    dfw = allv.size - len(groups)
    f = (ssb / dfb) / (ssw / dfw)
    return f, ssb / (ssb + ssw)


def cosine_dissimilarity_matrix(vectors):
    v = np.asarray(vectors, dtype=np.float64)
    n = v.shape[0]
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                cos = np.dot(v[i], v[j]) / (np.linalg.norm(v[i]) * np.linalg.norm(v[j]))
                d[i, j] = 1.0 - cos
    return d


def ridge_normal_equations(X, y, alpha):
    """(beta, intercept): penalized slopes on centered data, intercept free."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xbar = X.mean(axis=0)
    Xc = X - xbar
    yc = y - y.mean()
    beta = np.linalg.inv(Xc.T @ Xc + alpha * np.eye(X.shape[1])) @ Xc.T @ yc
    return beta, float(y.mean() - xbar @ beta)


def nearest_neighbor(value, grid):
    best, best_d = None, np.inf
    for g in grid:
        d = abs(g - value)
        if d < best_d:
            best, best_d = g, d
    return best


def top_k_by_score(scores, k):
    """Channel ids sorted by descending score, ascending id on ties."""
    items = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [cid for cid, _ in items[:k]]


def s_model_brain(per_layer_rhos):
    """Double mean: layers, then each layer's kept correlations."""
    return float(np.mean([np.mean(rhos) for rhos in per_layer_rhos]))


def s_model_region(selections, roi_of, roi):
    """selections: list of (ids, rhos) per layer; skip layers without the
    region, None when nothing contributes."""
    means = []
    for ids, rhos in selections:
        vals = [r for cid, r in zip(ids, rhos) if roi_of[cid] == roi]
        if vals:
            means.append(np.mean(vals))
    return float(np.mean(means)) if means else None


def contribution_ratio(ids_top, roi_of, roi):
    n_top = len(ids_top)
    n_total = len(roi_of)
    n_r_total = sum(1 for r in roi_of.values() if r == roi)
    n_r_top = sum(1 for c in ids_top if roi_of[c] == roi)
    return (n_r_top / n_top) / (n_r_total / n_total)
