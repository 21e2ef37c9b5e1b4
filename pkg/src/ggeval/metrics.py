"""Distribution-level comparison of two embedding sets.

All functions take (rows, dim) float arrays where each row is one graph
embedding. The reference (real) set comes first, the generated set second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DegenerateSetError,
    DimensionMismatchError,
    KTooLargeError,
    TooFewRowsError,
)

DEFAULT_KNN_K = 5


def _check_sets(a: np.ndarray, b: np.ndarray, min_rows: int = 2,
                too_few=TooFewRowsError):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatchError("embedding sets must be 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"embedding dims differ: {a.shape[1]} vs {b.shape[1]}"
        )
    if a.shape[0] < min_rows or b.shape[0] < min_rows:
        raise too_few(
            f"need at least {min_rows} rows per set, got {a.shape[0]} and {b.shape[0]}"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DegenerateSetError("embedding sets must be finite")
    return a, b


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(c)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance_detailed(real: np.ndarray, gen: np.ndarray):
    """Frechet distance plus the magnitude of clamped negative eigenvalues.

    ||mu_r - mu_g||^2 + Tr(C_r + C_g - 2 (C_r C_g)^{1/2}), with the cross
    term evaluated through the symmetric product sqrt(C_r) C_g sqrt(C_r)
    so only real eigenvalues of a symmetric matrix are involved.
    Covariances use ddof=1. Identical sets give 0 up to float error.
    The second return value diagnoses how much negative eigenvalue mass
    the PSD clamp removed (float noise at healthy inputs).
    """
    real, gen = _check_sets(real, gen)
    mu_r = real.mean(axis=0)
    mu_g = gen.mean(axis=0)
    c_r = np.atleast_2d(np.cov(real, rowvar=False, ddof=1))
    c_g = np.atleast_2d(np.cov(gen, rowvar=False, ddof=1))
    s = _psd_sqrt(c_r)
    cross_vals = np.linalg.eigvalsh(s @ c_g @ s)
    clamp = float(-np.sum(cross_vals[cross_vals < 0.0]))
    cross = 2.0 * np.sum(np.sqrt(np.clip(cross_vals, 0.0, None)))
    fd = float(np.sum((mu_r - mu_g) ** 2) + np.trace(c_r) + np.trace(c_g) - cross)
    return max(fd, 0.0), clamp


def frechet_distance(real: np.ndarray, gen: np.ndarray) -> float:
    return frechet_distance_detailed(real, gen)[0]


def _knn_radii(dist_self: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point."""
    n = dist_self.shape[0]
    if k < 1:
        raise KTooLargeError("k must be >= 1")
    if k > n - 1:
        raise KTooLargeError(f"k={k} needs at least {k + 1} rows, got {n}")
    d = dist_self.copy()
    np.fill_diagonal(d, np.inf)
    return np.partition(d, k - 1, axis=1)[:, k - 1]


def prdc(real: np.ndarray, gen: np.ndarray, k: int = DEFAULT_KNN_K) -> dict:
    """Precision, recall, density and coverage from k-NN balls.

    precision  fraction of generated points inside some real point's ball
    recall     fraction of real points inside some generated point's ball
    density    mean over generated points of (real balls containing it)/k
    coverage   fraction of real balls containing a generated point

    Balls use Euclidean distance to the k-th nearest neighbor within the
    point's own set, self excluded.
    """
    real, gen = _check_sets(real, gen)
    rad_real = _knn_radii(cdist(real, real), k)
    rad_gen = _knn_radii(cdist(gen, gen), k)
    cross = cdist(real, gen)  # (num_real, num_gen)

    in_real_ball = cross <= rad_real[:, None]
    in_gen_ball = cross <= rad_gen[None, :]
    precision = float(in_real_ball.any(axis=0).mean())
    recall = float(in_gen_ball.any(axis=1).mean())
    density = float(in_real_ball.sum(axis=0).mean() / k)
    coverage = float(in_real_ball.any(axis=1).mean())
    return {
        "precision": precision,
        "recall": recall,
        "density": density,
        "coverage": coverage,
    }


def precision_recall(real, gen, k: int = DEFAULT_KNN_K):
    out = prdc(real, gen, k)
    return out["precision"], out["recall"]


def density_coverage(real, gen, k: int = DEFAULT_KNN_K):
    out = prdc(real, gen, k)
    return out["density"], out["coverage"]


def f1_score(x: float, y: float) -> float:
    """Harmonic mean, defined as 0 when both inputs are 0."""
    if x < 0 or y < 0:
        raise ValueError("f1_score expects nonnegative inputs")
    if x + y == 0:
        return 0.0
    return 2.0 * x * y / (x + y)


MMD_KERNELS = ("linear", "rbf", "poly")


def median_heuristic_sigma(real: np.ndarray, gen: np.ndarray) -> float:
    """Median pairwise distance over the pooled sample; 1.0 if degenerate."""
    pooled = np.vstack([real, gen])
    d = cdist(pooled, pooled)
    vals = d[np.triu_indices_from(d, k=1)]
    med = float(np.median(vals)) if vals.size else 0.0
    if not np.isfinite(med) or med <= 0.0:
        return 1.0
    return med


def _kernel_matrix(a, b, kernel: str, sigma: float | None):
    if kernel == "linear":
        return a @ b.T
    if kernel == "poly":
        return (a @ b.T + 1.0) ** 3
    if kernel == "rbf":
        sq = cdist(a, b, metric="sqeuclidean")
        # sq/sigma^2 may overflow to inf for denormal sigma; exp(-inf) = 0
        # is the correct limit, so suppress the spurious warning
        with np.errstate(over="ignore"):
            return np.exp(-sq / (2.0 * sigma * sigma))
    raise ValueError(f"unknown kernel {kernel!r}")


def mmd(real: np.ndarray, gen: np.ndarray, kernel: str = "rbf",
        unbiased: bool = True, sigma: float | None = None) -> float:
    """Squared maximum mean discrepancy between the two samples.

    The default estimator is the unbiased U-statistic, which drops the
    diagonal and normalizes within-set sums by M(M-1); it can be slightly
    negative. unbiased=False keeps the diagonal and divides by M^2.
    For the rbf kernel, sigma defaults to the median pairwise distance of
    the pooled sample.
    """
    real, gen = _check_sets(real, gen, too_few=DegenerateSetError)
    if kernel not in MMD_KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    if kernel == "rbf" and sigma is None:
        sigma = median_heuristic_sigma(real, gen)
    k_rr = _kernel_matrix(real, real, kernel, sigma)
    k_gg = _kernel_matrix(gen, gen, kernel, sigma)
    k_rg = _kernel_matrix(real, gen, kernel, sigma)
    m = real.shape[0]
    n = gen.shape[0]
    if unbiased:
        term_r = (k_rr.sum() - np.trace(k_rr)) / (m * (m - 1))
        term_g = (k_gg.sum() - np.trace(k_gg)) / (n * (n - 1))
    else:
        term_r = k_rr.sum() / (m * m)
        term_g = k_gg.sum() / (n * n)
    return float(term_r + term_g - 2.0 * k_rg.sum() / (m * n))


METRIC_NAMES = (
    "fd",
    "precision",
    "recall",
    "density",
    "coverage",
    "f1_pr",
    "f1_dc",
    "mmd_linear",
    "mmd_rbf",
)

# full serialization order: scores plus the settings they were computed under
REPORT_FIELDS = METRIC_NAMES + ("k", "rbf_sigma")


@dataclass(frozen=True)
class MetricSettings:
    knn_k: int = DEFAULT_KNN_K
    mmd_unbiased: bool = True
    rbf_sigma: float | None = None

    def __post_init__(self):
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.rbf_sigma is not None and not self.rbf_sigma > 0:
            raise ValueError("rbf_sigma must be > 0")


@dataclass(frozen=True)
class MetricReport:
    fd: float
    precision: float
    recall: float
    density: float
    coverage: float
    f1_pr: float
    f1_dc: float
    mmd_linear: float
    mmd_rbf: float
    k: int
    rbf_sigma: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_FIELDS}

    def __getitem__(self, name: str) -> float:
        if name not in REPORT_FIELDS:
            raise KeyError(name)
        return getattr(self, name)


def evaluate(real: np.ndarray, gen: np.ndarray,
             settings: MetricSettings = MetricSettings()) -> MetricReport:
    """All metrics of the generated set against the reference set.

    The report records the neighborhood size and the realized RBF
    bandwidth (median heuristic unless overridden) alongside the scores.
    """
    real, gen = _check_sets(real, gen)
    scores = prdc(real, gen, settings.knn_k)
    sigma = settings.rbf_sigma
    if sigma is None:
        sigma = median_heuristic_sigma(real, gen)
    return MetricReport(
        fd=frechet_distance(real, gen),
        precision=scores["precision"],
        recall=scores["recall"],
        density=scores["density"],
        coverage=scores["coverage"],
        f1_pr=f1_score(scores["precision"], scores["recall"]),
        f1_dc=f1_score(scores["density"], scores["coverage"]),
        mmd_linear=mmd(real, gen, "linear", unbiased=settings.mmd_unbiased),
        mmd_rbf=mmd(real, gen, "rbf", unbiased=settings.mmd_unbiased, sigma=sigma),
        k=settings.knn_k,
        rbf_sigma=sigma,
    )
