"""Intrinsic dimension estimation from two-nearest-neighbor distance ratios.

The estimator uses only the ratio mu = r2/r1 of each point's second- and
first-neighbor distances.  For locally uniform density on a d-dimensional
manifold, mu follows F(mu) = 1 - mu^(-d), so d is the slope through the
origin of -log(1 - F) against log mu.  The ratio form cancels the local
density, which is what makes the estimate usable on strongly non-uniform
ensembles; the price is sensitivity to the largest ratios, hence the
tail-discard knob.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, DegenerateDataWarning, InvalidInput
from .spaces import Space, wrap

__all__ = ["TwoNnResult", "twonn_estimate", "twonn_fit"]

# Pair-distance chunks are capped at this many f64 elements (~128 MB for the
# (rows, N, dim) difference block).
_CHUNK_ELEMS = 16_000_000


@dataclass(frozen=True)
class TwoNnResult:
    """Two-NN estimate plus the regression inputs needed to inspect it.

    mu_values holds the retained ratios in ascending order, i.e. exactly the
    points the slope was fit on after duplicate skipping and tail discard.
    """

    d_hat: float
    n_used: int
    fit_residual: float
    mu_values: np.ndarray = field(repr=False)
    metric: str
    n_total: int = 0  # ratios before the tail discard; 0 when unknown

    def __post_init__(self) -> None:
        if not np.isfinite(self.d_hat) or self.d_hat <= 0.0:
            raise DegenerateData(f"estimated dimension {self.d_hat!r} is not positive")
        if self.n_used != self.mu_values.shape[0]:
            raise InvalidInput("n_used does not match mu_values")
        if self.n_total and self.n_total < self.n_used:
            raise InvalidInput("n_total must be >= n_used")

    def fit_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """The regression inputs: (log mu, -log(1 - F)) over retained points."""
        n = self.n_total if self.n_total else self.n_used
        f = np.arange(1, self.n_used + 1) / (n + 1.0)
        return np.log(self.mu_values), -np.log1p(-f)


def _two_smallest_sq_dists(points: np.ndarray, space: Space) -> tuple[np.ndarray, np.ndarray]:
    """Squared distances to the two nearest neighbors of every point.

    Brute force over all pairs, chunked by rows.  Differences are taken
    elementwise (never through a Gram-matrix expansion) so exact duplicates
    produce exactly 0.0 and power-of-two coordinate scalings stay bitwise
    invariant.
    """
    n, dim = points.shape
    rows = max(1, _CHUNK_ELEMS // (n * dim))
    s1 = np.empty(n)
    s2 = np.empty(n)
    for start in range(0, n, rows):
        block = points[start : start + rows]
        diff = block[:, None, :] - points[None, :, :]
        if space.is_torus:
            diff = wrap(diff)
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        # Mask self-distances before taking the two smallest.
        idx = np.arange(start, min(start + rows, n))
        sq[idx - start, idx] = np.inf
        part = np.partition(sq, (0, 1), axis=1)
        s1[start : start + rows] = part[:, 0]
        s2[start : start + rows] = part[:, 1]
    return s1, s2


def twonn_fit(mu_sorted: np.ndarray, discard_fraction: float = 0.1) -> tuple[float, float, np.ndarray]:
    """Fit d from sorted neighbor ratios; returns (d_hat, rms_residual, kept mu).

    Uses F_i = i/(n+1) so the top point keeps a finite -log(1 - F) even with
    discard_fraction=0, then drops the top floor(f*n) ratios and regresses
    -log(1 - F) on log mu through the origin.
    """
    mu = np.asarray(mu_sorted, dtype=float)
    if mu.ndim != 1 or mu.size < 2:
        raise InvalidInput("need a 1-d array of at least 2 ratios")
    if not 0.0 <= discard_fraction < 1.0:
        raise InvalidInput(f"discard_fraction must be in [0, 1), got {discard_fraction}")
    n = mu.size
    keep = n - int(discard_fraction * n)
    if keep < 2:
        raise InvalidInput("discard_fraction leaves fewer than 2 ratios")
    kept = mu[:keep]
    if np.any(kept < 1.0) or not np.all(np.isfinite(kept)):
        raise InvalidInput("ratios must be finite and >= 1")
    x = np.log(kept)
    f = np.arange(1, keep + 1) / (n + 1.0)
    y = -np.log1p(-f)
    sxx = float(x @ x)
    if sxx == 0.0:
        raise DegenerateData("all neighbor ratios are 1; no slope information")
    d_hat = float(x @ y) / sxx
    resid = float(np.sqrt(np.mean((y - d_hat * x) ** 2)))
    return d_hat, resid, kept


def twonn_estimate(points: np.ndarray, space: Space, discard_fraction: float = 0.1) -> TwoNnResult:
    """Estimate intrinsic dimension of a point cloud by the two-NN ratio method.

    Distances follow the space: plain Euclidean norm, or the geodesic norm
    (componentwise wrapped differences) on the torus.  Exact duplicate points
    have r1 = 0 and no usable ratio; they are skipped with a warning, and the
    estimate fails outright once more than 10% of points are duplicates.

    Args:
        points: (N, dim) array, N >= 100.
        space: geometry the distances live on; dim must match.
        discard_fraction: fraction of the largest ratios dropped before the
            fit.  The tail deviates first from the ideal law when density
            varies or the manifold curves, so a mild trim stabilizes d_hat.

    Returns:
        TwoNnResult with d_hat, the retained ratio count, the RMS residual of
        the through-origin fit, the retained ratios, and the metric name.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise InvalidInput(f"points must be 2-d, got shape {pts.shape}")
    n, dim = pts.shape
    if n < 100:
        raise InvalidInput(f"need at least 100 points, got {n}")
    if dim != space.dim:
        raise InvalidInput(f"points have dim {dim} but space has dim {space.dim}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("points contain non-finite values")
    if not 0.0 <= discard_fraction < 1.0:
        raise InvalidInput(f"discard_fraction must be in [0, 1), got {discard_fraction}")

    s1, s2 = _two_smallest_sq_dists(pts if not space.is_torus else wrap(pts), space)
    dup = s1 == 0.0
    n_dup = int(dup.sum())
    if n_dup > 0.1 * n:
        raise DegenerateData(f"{n_dup} of {n} points are exact duplicates")
    if n_dup:
        warnings.warn(
            f"skipping {n_dup} duplicate points (zero first-neighbor distance)",
            DegenerateDataWarning,
        )
    mu = np.sqrt(s2[~dup] / s1[~dup])
    mu.sort()
    d_hat, resid, kept = twonn_fit(mu, discard_fraction)
    return TwoNnResult(
        d_hat=d_hat,
        n_used=kept.shape[0],
        fit_residual=resid,
        mu_values=kept,
        metric="geodesic" if space.is_torus else "euclidean",
        n_total=mu.size,
    )
