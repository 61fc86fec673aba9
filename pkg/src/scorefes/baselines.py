"""Classical baselines: torus-aware KDE and a Gaussian mixture with EM/BIC.

The KDE uses product wrapped-normal kernels on the torus and Gaussian
kernels on R^n.  The GMM intentionally fits raw angle coordinates in
[-pi, pi) without any wrapping; modes split across the seam are a known
weakness of this baseline and are left in on purpose.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import (
    DegenerateDataWarning,
    EmptyDataset,
    InvalidInput,
    NumericalFailure,
    SingularComponentWarning,
)
from .spaces import Space, default_truncation, pairwise_wn_logpdf, wrap

BANDWIDTH_FLOOR = 1e-3
EIGENVALUE_FLOOR = 1e-6
# an image term below exp(-14) shifts a log kernel by < 2e-6 nats
_IMAGE_NEGLIGIBLE = 14.0
# fit sets at least this large use single precision pair buffers
_PAIR_F32_MIN = 10_000


# ---------------------------------------------------------------------------
# kernel density estimate


@dataclass(frozen=True)
class KdeModel:
    """Kernel density estimate that retains its fit frames."""

    data: np.ndarray
    bandwidth: np.ndarray
    space: Space

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if data.shape[0] == 0:
            raise EmptyDataset("KdeModel: no data")
        if data.shape[1] != self.space.dim:
            raise InvalidInput("KdeModel: data dimension mismatch with space")
        bw = np.broadcast_to(np.asarray(self.bandwidth, dtype=float),
                             (self.space.dim,)).copy()
        if not np.all(np.isfinite(bw)) or np.any(bw <= 0):
            raise InvalidInput("KdeModel: bandwidth must be positive and finite")
        if self.space.is_torus:
            data = wrap(data)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "bandwidth", bw)

    def logpdf(self, query, chunk_elems: int = 16_000_000) -> np.ndarray:
        return kde_logpdf(self, query, chunk_elems=chunk_elems)


def circular_std(angles) -> np.ndarray:
    """Per-coordinate circular standard deviation sqrt(-2 log Rbar)."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    rbar = np.hypot(np.cos(angles).mean(axis=0), np.sin(angles).mean(axis=0))
    rbar = np.minimum(rbar, 1.0)
    with np.errstate(divide="ignore"):
        out = np.sqrt(-2.0 * np.log(rbar))
    # Rbar -> 0 (perfectly spread data) would report an infinite spread
    return np.minimum(out, 2.0 * np.pi)


def kde_default_bandwidth(data, space: Space) -> np.ndarray:
    """Scott-style rule sigma_c * N**(-1/(n+4)) per coordinate.

    sigma_c is the circular standard deviation on the torus and the
    population standard deviation on R^n.  Coordinates whose bandwidth
    falls below the floor are clipped up with a warning.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n_frames, dim = data.shape
    if dim != space.dim:
        raise InvalidInput("kde_default_bandwidth: dimension mismatch")
    if n_frames < 2:
        raise InvalidInput("kde_default_bandwidth: need at least 2 frames")
    spread = circular_std(data) if space.is_torus else data.std(axis=0)
    bw = spread * n_frames ** (-1.0 / (dim + 4))
    if np.any(bw < BANDWIDTH_FLOOR):
        warnings.warn(
            "kde_default_bandwidth: near-zero spread, flooring bandwidth at "
            f"{BANDWIDTH_FLOOR}",
            DegenerateDataWarning,
        )
        bw = np.maximum(bw, BANDWIDTH_FLOOR)
    return bw


def kde_fit(data, space: Space, bandwidth=None) -> KdeModel:
    """KDE with the Scott-style default bandwidth unless one is given."""
    if bandwidth is None:
        bandwidth = kde_default_bandwidth(data, space)
    return KdeModel(data=data, bandwidth=bandwidth, space=space)


# an image order whose best-case term is below exp(-37) never registers
_IMAGE_CUTOFF = 37.0


def _wanted_images(h2: float) -> list:
    """Image orders |d| whose best-case term can still register.

    The correction exponent for image d at wrapped displacement delta is
    -(2*pi^2*d^2 + 2*pi*d*delta)/h^2 <= -2*pi^2*d*(d-1)/h^2, so order d
    drops out entirely once that bound clears the cutoff.
    """
    out = []
    d = 1
    while 2.0 * np.pi**2 * d * (d - 1) < _IMAGE_CUTOFF * h2:
        out.append(d)
        d += 1
    return out


def _torus_log_kernel_sum(query, centers_t, bandwidth):
    """Pairwise log wn-kernel products for one query chunk, shape (q, n).

    The d=0 image dominates at any sane bandwidth; higher images are
    accumulated only for seam-adjacent displacements where the d=1 term
    is above the negligibility cut.  ``centers_t`` is (dim, n) contiguous
    and fixes the buffer dtype.
    """
    dtype = centers_t.dtype.type
    log_k = np.zeros((query.shape[0], centers_t.shape[1]), dtype=dtype)
    buf = np.empty_like(log_k)
    norm = 0.0
    for c in range(query.shape[1]):
        h2 = float(bandwidth[c]) ** 2
        norm += 0.5 * np.log(2.0 * np.pi * h2)
        delta = np.subtract(query[:, c, None], centers_t[c][None, :], out=buf)
        # both operands live in [-pi, pi) so a single +-2*pi shift wraps
        np.subtract(delta, dtype(2.0 * np.pi), out=delta,
                    where=delta >= dtype(np.pi))
        np.add(delta, dtype(2.0 * np.pi), out=delta,
               where=delta < dtype(-np.pi))
        seam = np.abs(delta) > dtype(
            np.pi - _IMAGE_NEGLIGIBLE * h2 / (2.0 * np.pi))
        idx = np.nonzero(seam) if seam.any() else None
        if idx is not None:
            d_seam = delta[idx]
            images = np.zeros_like(d_seam)
            for d in _wanted_images(h2):
                expo = dtype(2.0 * np.pi**2 * d * d / h2)
                rate = dtype(2.0 * np.pi * d / h2)
                images += np.exp(-(expo + rate * d_seam))
                images += np.exp(-(expo - rate * d_seam))
            correction = np.log1p(images)
        np.multiply(delta, delta, out=delta)
        np.multiply(delta, dtype(-0.5 / h2), out=delta)
        log_k += delta
        if idx is not None:
            log_k[idx] += correction
    log_k -= dtype(norm)
    return log_k


def _euclid_log_kernel_sum(query, centers_t, bandwidth):
    dtype = centers_t.dtype.type
    log_k = np.zeros((query.shape[0], centers_t.shape[1]), dtype=dtype)
    buf = np.empty_like(log_k)
    norm = 0.0
    for c in range(query.shape[1]):
        h2 = float(bandwidth[c]) ** 2
        norm += 0.5 * np.log(2.0 * np.pi * h2)
        delta = np.subtract(query[:, c, None], centers_t[c][None, :], out=buf)
        np.multiply(delta, delta, out=delta)
        np.multiply(delta, dtype(-0.5 / h2), out=delta)
        log_k += delta
    log_k -= dtype(norm)
    return log_k


def _logmeanexp_rows(log_k) -> np.ndarray:
    """Row-wise log mean exp with a float64 accumulator."""
    peak = log_k.max(axis=1)
    np.exp(log_k - peak[:, None], out=log_k)
    total = log_k.sum(axis=1, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return peak.astype(np.float64) + np.log(total / log_k.shape[1])


def _fourier_order(h: float) -> int:
    """Cosine-series length that puts the wn truncation tail below 1e-20."""
    return int(np.ceil(9.6 / h))


def _torus_fourier_logpdf(q2, centers, bandwidth, chunk_elems) -> np.ndarray:
    """KDE logpdf through the Poisson-summation form of the wn kernel.

    wn(delta | h) = (1 + 2 sum_k exp(-k^2 h^2 / 2) cos(k delta)) / (2 pi)
    truncated below float precision, so cos(k q - k x) expands the whole
    pairwise kernel matrix into one GEMM per coordinate.  The coordinate
    product accumulates in float64; single precision features cost a few
    1e-5 nats.
    """
    n_centers, dim = centers.shape
    center_feats = []
    query_scales = []
    for c in range(dim):
        order = _fourier_order(float(bandwidth[c]))
        k = np.arange(1, order + 1)
        coef = 2.0 * np.exp(-0.5 * (k * bandwidth[c]) ** 2) / (2.0 * np.pi)
        angles = k[:, None] * centers[None, :, c]
        feats = np.empty((2 * order + 1, n_centers), dtype=np.float32)
        feats[0] = 1.0 / (2.0 * np.pi)
        feats[1:order + 1] = coef[:, None] * np.cos(angles)
        feats[order + 1:] = coef[:, None] * np.sin(angles)
        center_feats.append(feats)
        query_scales.append(k)
    rows = max(1, int(chunk_elems) // n_centers)
    out = np.empty(q2.shape[0])
    prod = np.empty((rows, n_centers))
    gemm = np.empty((rows, n_centers), dtype=np.float32)
    for start in range(0, q2.shape[0], rows):
        block = q2[start:start + rows]
        m = block.shape[0]
        prod_m, gemm_m = prod[:m], gemm[:m]
        prod_m.fill(1.0)
        for c in range(dim):
            angles = block[:, c, None] * query_scales[c][None, :]
            u = np.empty((m, 2 * query_scales[c].shape[0] + 1),
                         dtype=np.float32)
            order = query_scales[c].shape[0]
            u[:, 0] = 1.0
            u[:, 1:order + 1] = np.cos(angles)
            u[:, order + 1:] = np.sin(angles)
            np.matmul(u, center_feats[c], out=gemm_m)
            prod_m *= gemm_m
        with np.errstate(divide="ignore"):
            out[start:start + m] = np.log(prod_m.mean(axis=1))
    return out


# mean Fourier length per coordinate beyond which GEMM loses to the
# elementwise path (narrow kernels need long series but few images)
_FOURIER_MAX_MEAN_ORDER = 160


def kde_logpdf(model: KdeModel, query, chunk_elems: int = 16_000_000) -> np.ndarray:
    """Log of the mean kernel value over the retained frames.

    Small fit sets evaluate the wrapped-normal kernel through the manifold
    machinery directly.  Large torus fit sets with moderate bandwidths use
    the exact Fourier form of the kernel (one GEMM per coordinate); other
    large sets fall back to an elementwise image sum with single precision
    pair buffers.  The fast paths agree with the reference to a few 1e-5
    nats.
    """
    query = np.asarray(query, dtype=float)
    squeeze = query.ndim == 1
    q2 = np.atleast_2d(query)
    if q2.shape[1] != model.space.dim:
        raise InvalidInput("kde_logpdf: query dimension mismatch")
    n_centers, dim = model.data.shape
    big = n_centers >= _PAIR_F32_MIN
    out = np.empty(q2.shape[0])
    if model.space.is_torus:
        q2 = wrap(q2)
        lengths = [2 * _fourier_order(float(h)) + 1 for h in model.bandwidth]
        if big and np.mean(lengths) <= _FOURIER_MAX_MEAN_ORDER:
            out = _torus_fourier_logpdf(q2, model.data, model.bandwidth,
                                        chunk_elems)
            return out[0] if squeeze else out
        if not big:
            # reference path straight through the manifold kernel machinery
            trunc = max(default_truncation(float(h)) for h in model.bandwidth)
            rows = max(1, int(chunk_elems) // (n_centers * dim))
            for start in range(0, q2.shape[0], rows):
                log_k = pairwise_wn_logpdf(q2[start:start + rows], model.data,
                                           model.bandwidth, trunc)
                out[start:start + rows] = logsumexp(log_k, axis=1)
            result = out - np.log(n_centers)
            return result[0] if squeeze else result
        kernel_sum = _torus_log_kernel_sum
    else:
        kernel_sum = _euclid_log_kernel_sum
    dtype = np.float32 if big else np.float64
    centers_t = np.ascontiguousarray(model.data.T, dtype=dtype)
    rows = max(1, int(chunk_elems) // n_centers)
    for start in range(0, q2.shape[0], rows):
        block = q2[start:start + rows].astype(dtype)
        log_k = kernel_sum(block, centers_t, model.bandwidth)
        out[start:start + rows] = _logmeanexp_rows(log_k)
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# Gaussian mixture


@dataclass(frozen=True, eq=False)
class GmmModel:
    """Full-covariance Gaussian mixture fitted by EM.

    ``loglik`` is the mean per-frame log likelihood of the fit data; the
    history carries one entry per EM iteration.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    converged: bool
    loglik: float
    loglik_history: np.ndarray = field(repr=False, default=None)
    n_reinit: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covariances, dtype=float)
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInput("GmmModel: weights must sum to 1")
        if np.any(w < 0):
            raise InvalidInput("GmmModel: weights must be nonnegative")
        if means.shape[0] != w.shape[0] or covs.shape[0] != w.shape[0]:
            raise InvalidInput("GmmModel: component count mismatch")
        if covs.shape[1:] != (means.shape[1], means.shape[1]):
            raise InvalidInput("GmmModel: covariance shape mismatch")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_parameters(self) -> int:
        k, n = self.n_components, self.dim
        return (k - 1) + k * n + k * n * (n + 1) // 2

    def logpdf(self, query) -> np.ndarray:
        query = np.asarray(query, dtype=float)
        squeeze = query.ndim == 1
        q2 = np.atleast_2d(query)
        if q2.shape[1] != self.dim:
            raise InvalidInput("GmmModel.logpdf: query dimension mismatch")
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        out = logsumexp(_component_logpdf(q2, self.means, self.covariances)
                        + log_w[None, :], axis=1)
        return out[0] if squeeze else out

    def bic(self, n_frames: int) -> float:
        return (-2.0 * self.loglik * n_frames
                + self.n_parameters * np.log(n_frames))


def _component_logpdf(x, means, covariances):
    """Per-component Gaussian log densities, shape (N, K)."""
    n_frames, dim = x.shape
    out = np.empty((n_frames, means.shape[0]))
    for j in range(means.shape[0]):
        try:
            chol = np.linalg.cholesky(covariances[j])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(
                f"component {j} covariance is not positive definite") from exc
        dev = solve_triangular(chol, (x - means[j]).T, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, j] = -0.5 * (np.sum(dev * dev, axis=0)
                            + dim * np.log(2.0 * np.pi) + logdet)
    return out


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    """Clip eigenvalues at the floor; keeps every component invertible."""
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= EIGENVALUE_FLOOR:
        return cov
    vals = np.maximum(vals, EIGENVALUE_FLOOR)
    return (vecs * vals) @ vecs.T


def _kmeanspp_centers(data, n_components, rng):
    """Greedy seeding: each new center drawn with prob ~ squared distance."""
    n_frames = data.shape[0]
    centers = [data[rng.integers(n_frames)]]
    for _ in range(1, n_components):
        d2 = np.min(
            [np.sum((data - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0.0:
            centers.append(data[rng.integers(n_frames)])
            continue
        centers.append(data[rng.choice(n_frames, p=d2 / total)])
    return np.array(centers)


def _initial_parameters(data, n_components, rng):
    centers = _kmeanspp_centers(data, n_components, rng)
    d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    dim = data.shape[1]
    global_cov = _floor_covariance(np.cov(data, rowvar=False).reshape(dim, dim))
    counts = np.bincount(labels, minlength=n_components).astype(float)
    weights = (counts + 1.0) / (data.shape[0] + n_components)
    means = np.empty((n_components, dim))
    covs = np.empty((n_components, dim, dim))
    for j in range(n_components):
        members = data[labels == j]
        if members.shape[0] <= dim:
            means[j] = centers[j]
            covs[j] = global_cov
        else:
            means[j] = members.mean(axis=0)
            covs[j] = _floor_covariance(
                np.cov(members, rowvar=False).reshape(dim, dim))
    return weights, means, covs, global_cov


def gmm_fit(data, n_components: int, seed: int = 0, max_iter: int = 500,
            tol: float = 1e-7) -> GmmModel:
    """EM fit of a full-covariance mixture.

    Stops when the mean per-frame log likelihood improves by less than
    ``tol`` or after ``max_iter`` iterations.  A component starved below
    dim+1 effective frames is reinitialized at a random frame with the
    global covariance; each event is counted in ``n_reinit``.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n_frames, dim = data.shape
    if n_components < 1:
        raise InvalidInput("gmm_fit: n_components must be >= 1")
    if n_frames < n_components * (dim + 1):
        raise InvalidInput(
            f"gmm_fit: {n_frames} frames cannot support {n_components} "
            f"components in {dim}d (need >= {n_components * (dim + 1)})")
    if not np.all(np.isfinite(data)):
        raise InvalidInput("gmm_fit: data must be finite")
    rng = np.random.default_rng(seed)
    weights, means, covs, global_cov = _initial_parameters(
        data, n_components, rng)

    history = []
    converged = False
    n_reinit = 0
    prev = -np.inf
    for _ in range(max_iter):
        log_joint = _component_logpdf(data, means, covs) + np.log(weights)
        log_norm = logsumexp(log_joint, axis=1)
        loglik = float(log_norm.mean())
        history.append(loglik)
        if loglik - prev < tol:
            converged = True
            break
        prev = loglik
        resp = np.exp(log_joint - log_norm[:, None])
        bulk = resp.sum(axis=0)
        starved = np.flatnonzero(bulk < dim + 1)
        if starved.size:
            warnings.warn(
                f"gmm_fit: reinitializing {starved.size} starved "
                "component(s)", SingularComponentWarning)
            for j in starved:
                means[j] = data[rng.integers(n_frames)]
                covs[j] = global_cov
                weights[j] = 1.0 / n_components
                n_reinit += 1
            weights = weights / weights.sum()
            prev = -np.inf
            continue
        weights = bulk / n_frames
        means = (resp.T @ data) / bulk[:, None]
        for j in range(n_components):
            dev = data - means[j]
            covs[j] = _floor_covariance(
                (resp[:, j] * dev.T) @ dev / bulk[j])
    return GmmModel(
        weights=weights, means=means, covariances=covs,
        converged=converged, loglik=history[-1],
        loglik_history=np.array(history), n_reinit=n_reinit)


@dataclass(frozen=True)
class GmmSelection:
    """Result of a BIC scan over component counts."""

    best_k: int
    bics: np.ndarray
    logliks: np.ndarray
    models: tuple

    @property
    def best_model(self) -> GmmModel:
        return self.models[self.best_k - 1]


def gmm_select_k(data, k_max: int, seed: int = 0, n_restarts: int = 3,
                 max_iter: int = 500) -> GmmSelection:
    """Fit K = 1..k_max with restarts and pick the smallest-BIC K.

    Each K keeps its best-loglik restart.  BIC ties resolve toward the
    smaller K because the scan ascends.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if k_max < 1:
        raise InvalidInput("gmm_select_k: k_max must be >= 1")
    child_seeds = np.random.default_rng(seed).integers(
        2**31, size=(k_max, n_restarts))
    models = []
    for k in range(1, k_max + 1):
        fits = [gmm_fit(data, k, seed=int(child_seeds[k - 1, r]),
                        max_iter=max_iter)
                for r in range(n_restarts)]
        models.append(max(fits, key=lambda m: m.loglik))
    bics = np.array([m.bic(data.shape[0]) for m in models])
    logliks = np.array([m.loglik for m in models])
    return GmmSelection(best_k=int(np.argmin(bics)) + 1, bics=bics,
                        logliks=logliks, models=tuple(models))
