"""Collective-variable spaces and the wrapped-normal kernel family.

Two space kinds are supported: flat ``euclidean`` space R^n and the
hypertorus ``torus`` T^n, the natural domain of n torsion angles.  Torus
coordinates always live in the canonical chart [-pi, pi), in radians.

The wrapped normal is the Gaussian summed over 2*pi translates,

    p(x) = sum_d exp(-(x - mu + 2*pi*d)^2 / (2 sigma^2)) / sqrt(2*pi sigma^2),

truncated to |d| <= D images per side.  Because the displacement is wrapped
into [-pi, pi) first, the d = 0 image always dominates, so the image sum is
evaluated relative to it (a log-sum-exp with a known maximum); this stays
exact down to arbitrarily small sigma without underflow.  Multivariate
kernels factorize over coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

TWO_PI = 2.0 * math.pi

#: Discarded-image mass any default truncation must stay below.
TAIL_MASS_LIMIT = 1e-9


@dataclass(frozen=True)
class Space:
    """A CV domain: ``euclidean`` R^n or ``torus`` T^n."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "torus"):
            raise InvalidInput(f"unknown space kind {self.kind!r}")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise InvalidInput(f"space dim must be a positive integer, got {self.dim!r}")

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    def contains(self, x: np.ndarray) -> bool:
        """Whether points are finite, of the right width, and (torus) in-chart."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim or not np.all(np.isfinite(x)):
            return False
        if self.is_torus:
            return bool(np.all((x >= -math.pi) & (x < math.pi)))
        return True


def euclidean(dim: int) -> Space:
    return Space("euclidean", dim)


def torus(dim: int) -> Space:
    return Space("torus", dim)


def wrap(x) -> np.ndarray:
    """Map raw angles into the canonical chart [-pi, pi). Idempotent."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInput("wrap: non-finite input")
    return np.mod(x + math.pi, TWO_PI) - math.pi


def geodesic_displacement(a, b, space: Space) -> np.ndarray:
    """Per-coordinate minimal signed displacement from a to b.

    Torus: wrapped into [-pi, pi), so its norm is the geodesic distance.
    Euclidean: plain b - a.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != space.dim or b.shape[-1] != space.dim:
        raise InvalidInput(
            f"geodesic_displacement: dimension mismatch ({a.shape[-1]}, {b.shape[-1]}) "
            f"for space dim {space.dim}"
        )
    if space.is_torus:
        return wrap(b - a)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInput("geodesic_displacement: non-finite input")
    return b - a


def wn_tail_bound(sigma: float, trunc: int) -> float:
    """Upper bound on the image mass discarded by truncating at |d| <= trunc.

    Direct summation of 2 * sum_{d > trunc} exp(-(2*pi*d - pi)^2 / (2 sigma^2))
    over the next 100 images.
    """
    if sigma <= 0:
        raise InvalidInput("wn_tail_bound: sigma must be positive")
    d = np.arange(trunc + 1, trunc + 101, dtype=float)
    return float(2.0 * np.sum(np.exp(-((TWO_PI * d - math.pi) ** 2) / (2.0 * sigma**2))))


def default_truncation(sigma: float) -> int:
    """Smallest image count per side with tail mass below TAIL_MASS_LIMIT.

    Seeded at ceil(4*sigma/(2*pi)) + 1 (floor 2) and grown until the tail
    bound is met; growth only triggers for sigma on the order of 2*pi.
    """
    if sigma <= 0:
        raise InvalidInput("default_truncation: sigma must be positive")
    trunc = max(2, math.ceil(4.0 * sigma / TWO_PI) + 1)
    while wn_tail_bound(sigma, trunc) >= TAIL_MASS_LIMIT:
        trunc += 1
        if trunc > 10_000:
            raise InvalidInput(f"default_truncation: sigma={sigma} is unreasonably large")
    return trunc


@dataclass(frozen=True)
class WrappedNormalParams:
    """Isotropic wrapped normal on T^n: mean point, scalar sigma, image count."""

    mean: np.ndarray
    sigma: float
    truncation: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if not np.all(np.isfinite(mean)):
            raise InvalidInput("WrappedNormalParams: non-finite mean")
        object.__setattr__(self, "mean", wrap(mean))
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInput(f"WrappedNormalParams: sigma must be positive, got {self.sigma}")
        if int(self.truncation) < 2:
            raise InvalidInput("WrappedNormalParams: truncation must be >= 2")
        object.__setattr__(self, "truncation", int(self.truncation))

    @classmethod
    def create(cls, mean, sigma: float) -> "WrappedNormalParams":
        return cls(mean=np.asarray(mean, dtype=float), sigma=sigma,
                   truncation=default_truncation(sigma))


def _image_sum_terms(delta: np.ndarray, sigma, trunc: int):
    """Stable pieces of the image sum for wrapped displacement delta.

    Returns (base, log1p_corr, weighted_image) where the per-coordinate log
    kernel is base + log1p_corr - log(sqrt(2*pi)*sigma) with
    base = -delta^2/(2 sigma^2), and weighted_image is
    sum_d w_d * 2*pi*d with w_d the softmax weight of image d (d=0 included).
    """
    sig2 = np.square(sigma)
    base = -np.square(delta) / (2.0 * sig2)
    corr = np.zeros_like(delta)
    image_num = np.zeros_like(delta)
    for d in range(1, trunc + 1):
        for shift in (TWO_PI * d, -TWO_PI * d):
            term = np.exp(-np.square(delta + shift) / (2.0 * sig2) - base)
            corr += term
            image_num += term * shift
    return base, np.log1p(corr), image_num / (1.0 + corr)


def _wn_logpdf_nd(delta: np.ndarray, sigma, trunc: int) -> np.ndarray:
    """Sum of per-coordinate wrapped-normal log densities; delta pre-wrapped."""
    base, log_corr, _ = _image_sum_terms(delta, sigma, trunc)
    per_coord = base + log_corr - np.log(np.sqrt(TWO_PI) * np.asarray(sigma, dtype=float))
    return np.sum(per_coord, axis=-1)


def wn_logpdf(x, params: WrappedNormalParams) -> np.ndarray:
    """Log density of the wrapped normal at x (leading axes broadcast)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.mean.shape[-1]:
        raise InvalidInput("wn_logpdf: dimension mismatch")
    delta = wrap(x - params.mean)
    return _wn_logpdf_nd(delta, params.sigma, params.truncation)


def wn_score(x, params: WrappedNormalParams) -> np.ndarray:
    """Gradient of wn_logpdf with respect to x, a tangent vector in R^n.

    Per coordinate: sum_d w_d * (mu - x + 2*pi*d) / sigma^2 with softmax
    weights w_d over the images.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.mean.shape[-1]:
        raise InvalidInput("wn_score: dimension mismatch")
    delta = wrap(x - params.mean)
    return _wn_score_from_delta(delta, params.sigma, params.truncation)


def _wn_score_from_delta(delta: np.ndarray, sigma, trunc: int) -> np.ndarray:
    _, _, weighted_image = _image_sum_terms(delta, sigma, trunc)
    return -(delta + weighted_image) / np.square(sigma)


def wn_sample(params: WrappedNormalParams, rng: np.random.Generator,
              size: int | None = None) -> np.ndarray:
    """Draw from the wrapped normal: Gaussian draw, then wrap."""
    n = params.mean.shape[-1]
    shape = (n,) if size is None else (size, n)
    return wrap(params.mean + params.sigma * rng.standard_normal(shape))


def pairwise_wn_logpdf(queries: np.ndarray, centers: np.ndarray, sigma: np.ndarray,
                       trunc: int) -> np.ndarray:
    """Matrix of wrapped-normal log densities, queries (Q,n) against centers (N,n).

    sigma may be per-coordinate (n,). Used by the kernel density baseline;
    identical math to wn_logpdf, vectorized over pairs.
    """
    delta = wrap(queries[:, None, :] - centers[None, :, :])
    return _wn_logpdf_nd(delta, sigma, trunc)
