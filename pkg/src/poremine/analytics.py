"""Numerical kernels: standardization, correlation, k-means with elbow selection, PCA, KDE.

All sample statistics use n-1 denominators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadK, ConstantFeature, DegenerateSample, MatrixEmpty, UnknownFeature


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (n_rows, n_cols)
    columns: tuple[str, ...]

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if v.shape[1] == 0:
            raise MatrixEmpty("feature matrix has no columns")
        if v.shape[0] < 2:
            raise ValueError("feature matrix needs at least 2 rows")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix contains NaN or infinite entries")
        cols = tuple(self.columns)
        if len(cols) != v.shape[1]:
            raise ValueError("column names do not match matrix width")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", cols)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


def _as_array(m) -> np.ndarray:
    return m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)


def _columns(m, n):
    return m.columns if isinstance(m, FeatureMatrix) else tuple(f"x{i}" for i in range(n))


def standardize(m: FeatureMatrix) -> FeatureMatrix:
    """Centre each column and scale it to unit sample standard deviation."""
    x = m.values
    for j, name in enumerate(m.columns):
        if np.all(x[:, j] == x[0, j]):
            raise ConstantFeature(name)
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    return FeatureMatrix((x - mu) / sd, m.columns)


def pearson_matrix(m: FeatureMatrix) -> np.ndarray:
    z = standardize(m).values
    c = z.T @ z / (z.shape[0] - 1)
    c = 0.5 * (c + c.T)
    np.clip(c, -1.0, 1.0, out=c)
    np.fill_diagonal(c, 1.0)
    return c


def correlogram_order(c) -> list[int]:
    """Leaf order of an average-linkage dendrogram over correlation rows.

    Distances are Euclidean between rows of ``c``. At each merge the closest
    pair of clusters is joined, ties going to the pair with the smallest
    member indices; the merged cluster lists the one holding the smaller
    original index first.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))
    clusters = [[i] for i in range(n)]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                ca, cb = clusters[a], clusters[b]
                dist = float(d[np.ix_(ca, cb)].mean())
                key = (dist, min(ca), min(cb))
                if best is None or key < best[0]:
                    best = (key, a, b)
        _, a, b = best
        ca, cb = clusters[a], clusters[b]
        merged = ca + cb if min(ca) < min(cb) else cb + ca
        clusters = [cl for i, cl in enumerate(clusters) if i not in (a, b)]
        clusters.append(merged)
        clusters.sort(key=min)
    return clusters[0]


def drop_feature(m: FeatureMatrix, name: str) -> FeatureMatrix:
    if name not in m.columns:
        raise UnknownFeature(f"no feature named {name!r}")
    if m.n_cols == 1:
        raise MatrixEmpty(f"dropping {name!r} would leave no columns")
    j = m.columns.index(name)
    keep = [i for i in range(m.n_cols) if i != j]
    return FeatureMatrix(m.values[:, keep], tuple(m.columns[i] for i in keep))


# --- k-means ------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    wss: float
    seed: int | None = None
    n_iter: int = 0
    wss_trace: tuple[float, ...] = field(default=(), repr=False)


def _sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _wss(x, centroids, assign) -> float:
    return float(((x - centroids[assign]) ** 2).sum())


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    idx = [int(rng.integers(n))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            nxt = int(rng.integers(n))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[idx].copy()


def _transfer_pass(x: np.ndarray, c: np.ndarray, assign: np.ndarray) -> bool:
    """One sweep of single-point transfers (Hartigan); True if any point moved.

    Moving x from cluster a to b changes wss by
    n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2, so a point moves only when that
    is negative. Lloyd fixed points are not always transfer-stable, so this
    escapes some of their local minima.
    """
    k = len(c)
    counts = np.bincount(assign, minlength=k).astype(float)
    moved = False
    for i in range(len(x)):
        a = assign[i]
        if counts[a] <= 1:
            continue
        d = ((x[i] - c) ** 2).sum(axis=1)
        out_cost = counts[a] / (counts[a] - 1) * d[a]
        in_cost = counts / (counts + 1) * d
        in_cost[a] = np.inf
        b = int(in_cost.argmin())
        if in_cost[b] < out_cost - 1e-12 * max(1.0, out_cost):
            c[a] = (c[a] * counts[a] - x[i]) / (counts[a] - 1)
            c[b] = (c[b] * counts[b] + x[i]) / (counts[b] + 1)
            counts[a] -= 1
            counts[b] += 1
            assign[i] = b
            moved = True
    return moved


def lloyd(
    x: np.ndarray, centroids: np.ndarray, max_iter: int = 300, seed=None, transfers: bool = False
) -> ClusterModel:
    """Lloyd iterations until assignments stop changing or ``max_iter`` rounds.

    A centroid that loses all its points is moved onto the point currently
    farthest from its own centroid. With ``transfers`` a transfer sweep is
    tried after convergence; if it improves the partition, Lloyd rounds
    resume from there.
    """
    c = np.array(centroids, dtype=float)
    k = len(c)
    assign = None
    trace = []
    it = 0
    while it < max_iter:
        it += 1
        d2 = _sqdist(x, c)
        new = d2.argmin(axis=1)
        counts = np.bincount(new, minlength=k)
        while np.any(counts == 0):
            empty = int(np.flatnonzero(counts == 0)[0])
            resid = d2[np.arange(len(x)), new]
            far = int(resid.argmax())
            c[empty] = x[far]
            d2 = _sqdist(x, c)
            new = d2.argmin(axis=1)
            counts = np.bincount(new, minlength=k)
            if resid[far] == 0:
                break
        trace.append(float(d2[np.arange(len(x)), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            if transfers and k > 1 and _transfer_pass(x, c, assign):
                trace.append(_wss(x, c, assign))
                continue
            break
        assign = new
        for j in range(k):
            members = x[assign == j]
            if len(members):
                c[j] = members.mean(axis=0)
    d2 = _sqdist(x, c)
    assign = d2.argmin(axis=1)
    wss = _wss(x, c, assign)
    return ClusterModel(k, c, assign, wss, seed, it, tuple(trace))


def kmeans(m, k: int, seed: int = 0, restarts: int = 20, max_iter: int = 300) -> ClusterModel:
    """Best-of-``restarts`` Lloyd runs from seeded k-means++ starts.

    Restarts draw sequentially from one generator; the lowest wss wins and
    ties keep the earliest restart.
    """
    x = _as_array(m)
    n = len(x)
    if not 1 <= k <= n:
        raise BadK(f"k must be in [1, {n}], got {k}")
    if restarts < 1:
        raise BadK("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        model = lloyd(x, kmeans_pp_init(x, k, rng), max_iter, seed)
        if best is None or model.wss < best.wss:
            best = model
    return polish(x, best, max_iter)


def polish(x: np.ndarray, model: ClusterModel, max_iter: int = 300) -> ClusterModel:
    """Continue ``model`` with transfer sweeps between Lloyd rounds; never worse."""
    out = lloyd(x, model.centroids, max_iter, model.seed, transfers=True)
    if out.wss >= model.wss:
        return model
    return replace(out, n_iter=model.n_iter + out.n_iter, wss_trace=model.wss_trace + out.wss_trace[1:])


@dataclass(frozen=True)
class Elbow:
    k: int
    wss: tuple[float, ...]  # wss[i] is the curve value at k = i + 1
    models: tuple[ClusterModel, ...] = field(repr=False, default=())

    def __iter__(self):
        return iter((self.k, self.wss))


def elbow_k(wss) -> int:
    """k maximising wss(k-1) - 2 wss(k) + wss(k+1) over k in [2, len-1]; ties -> smallest."""
    wss = list(wss)
    if len(wss) < 3:
        raise BadK("elbow needs a curve over at least k = 1..3")
    best_k, best = None, None
    for k in range(2, len(wss)):
        d = wss[k - 2] - 2 * wss[k - 1] + wss[k]
        if best is None or d > best:
            best_k, best = k, d
    return best_k


def select_k(m, k_max: int = 10, seed: int = 0, restarts: int = 20) -> Elbow:
    """WSS curve for k = 1..k_max and its elbow.

    The curve is nested-monotone: for each k > 1 the fresh k-means result
    competes with a Lloyd run warm-started from the (k-1)-solution plus the
    point with the largest residual, so wss(k) <= wss(k-1) always holds.
    """
    x = _as_array(m)
    n = len(x)
    if k_max < 3 or k_max > n:
        raise BadK(f"k_max must be in [3, {n}], got {k_max}")
    models = []
    prev = None
    for k in range(1, k_max + 1):
        model = kmeans(x, k, seed=seed, restarts=restarts)
        if prev is not None:
            resid = ((x - prev.centroids[prev.assignments]) ** 2).sum(axis=1)
            init = np.vstack([prev.centroids, x[int(resid.argmax())]])
            warm = lloyd(x, init, seed=seed)
            if warm.wss < model.wss:
                model = warm
        models.append(model)
        prev = model
    wss = tuple(mod.wss for mod in models)
    return Elbow(elbow_k(wss), wss, tuple(models))


# --- PCA ----------------------------------------------------------------------

@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, n_cols), rows orthonormal
    explained_fraction: np.ndarray  # (n_components,)
    eigenvalues: np.ndarray  # all n_cols, descending

    @property
    def n_components(self) -> int:
        return len(self.components)

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components.T

    def inverse_transform(self, scores) -> np.ndarray:
        return np.asarray(scores) @ self.components + self.mean


def pca(m, n_components: int = 2) -> tuple[PCAModel, np.ndarray]:
    """Eigendecomposition of the sample covariance; largest |entry| of each component is positive."""
    x = _as_array(m)
    n_cols = x.shape[1]
    if not 1 <= n_components <= n_cols:
        raise ValueError(f"n_components must be in [1, {n_cols}]")
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1).reshape(n_cols, n_cols)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    for i, v in enumerate(vecs):
        if v[np.argmax(np.abs(v))] < 0:
            vecs[i] = -v
    total = vals.sum()
    if total <= 0:
        raise DegenerateSample("data has zero total variance")
    model = PCAModel(mean, vecs[:n_components].copy(), vals[:n_components] / total, vals)
    return model, model.transform(x)


# --- kernel density -----------------------------------------------------------

def silverman_bandwidth(values) -> float:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise DegenerateSample("density needs at least 2 values")
    if np.ptp(v) == 0:
        raise DegenerateSample("density needs values with nonzero spread")
    sd = float(v.std(ddof=1))
    q75, q25 = np.percentile(v, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * len(v) ** (-0.2)


def density_grid(values, n_points: int = 256, bandwidth: float | None = None) -> np.ndarray:
    """Evenly spaced grid covering the data plus three bandwidths each side."""
    v = np.asarray(values, dtype=float)
    h = silverman_bandwidth(v) if bandwidth is None else bandwidth
    return np.linspace(v.min() - 3 * h, v.max() + 3 * h, n_points)


def kde_density(values, grid) -> np.ndarray:
    """Gaussian kernel density with Silverman's bandwidth, evaluated on ``grid``."""
    v = np.asarray(values, dtype=float)
    h = silverman_bandwidth(v)
    g = np.asarray(grid, dtype=float)
    u = (g[:, None] - v[None, :]) / h
    return np.exp(-0.5 * u * u).sum(axis=1) / (len(v) * h * math.sqrt(2 * math.pi))
