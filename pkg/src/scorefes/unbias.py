"""Reweighting high-temperature ensembles into equilibrium free energies.

A frame drawn with its collective variables held at temperature T_h carries
the unbiasing weight

    omega(z) = P_Th(z)^(T_h/T - 1),

so weighted histograms of any feature Y(z) estimate the equilibrium
distribution at T.  Everything runs in log space with a max shift, which
makes the whole pipeline exactly invariant to the normalization of the
density estimate: only log-density differences matter.

Free energies are A = -kB*T*log P, reported relative to their minimum.
Empty histogram bins keep a NaN free energy; they are never reported as 0.
"""

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datasets import Dataset
from .errors import DegenerateWeights, InvalidFeature, InvalidInput

#: Boltzmann constant in kJ/(mol*K), for datasets in MD units.
KB_KJ_PER_MOL_K = 0.0083144621

#: log-weight gap below which a frame's weight is set to exactly zero.
UNDERFLOW_GAP = 700.0


@dataclass(frozen=True)
class TemperatureSpec:
    """Physical temperature, elevated CV temperature, and kB (default reduced units)."""

    temperature: float
    high_temperature: float
    boltzmann: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.temperature <= self.high_temperature):
            raise InvalidInput(
                f"TemperatureSpec: need T_h >= T > 0, got T={self.temperature}, "
                f"T_h={self.high_temperature}"
            )
        if self.boltzmann <= 0.0:
            raise InvalidInput("TemperatureSpec: kB must be positive")

    @property
    def ratio(self) -> float:
        return self.high_temperature / self.temperature


@dataclass(frozen=True)
class FeatureMap:
    """A pure function of the frames, producing 1 or 2 reduced coordinates."""

    name: str
    arity: int
    fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise InvalidInput(f"FeatureMap: arity must be 1 or 2, got {self.arity}")

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames, dtype=float)
        values = np.asarray(self.fn(frames), dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape != (frames.shape[0], self.arity):
            raise InvalidInput(
                f"FeatureMap {self.name!r}: expected shape ({frames.shape[0]}, "
                f"{self.arity}), got {values.shape}"
            )
        bad = ~np.all(np.isfinite(values), axis=1)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise InvalidFeature(
                f"feature {self.name!r} produced a non-finite value at frame {idx}"
            )
        return values


def coordinate_feature(index: int, name: str | None = None) -> FeatureMap:
    return FeatureMap(name or f"z{index + 1}", 1, lambda z: z[:, index])


def cos_feature(index: int) -> FeatureMap:
    return FeatureMap(f"cos_z{index + 1}", 1, lambda z: np.cos(z[:, index]))


def sin_feature(index: int) -> FeatureMap:
    return FeatureMap(f"sin_z{index + 1}", 1, lambda z: np.sin(z[:, index]))


def linear_feature(coefficients, name: str) -> FeatureMap:
    coeff = np.asarray(coefficients, dtype=float)
    return FeatureMap(name, 1, lambda z: z @ coeff)


def pair_feature(first: FeatureMap, second: FeatureMap) -> FeatureMap:
    """Stack two scalar features into one 2-D feature for 2-D surfaces."""
    if first.arity != 1 or second.arity != 1:
        raise InvalidInput("pair_feature: both parts must have arity 1")
    return FeatureMap(
        f"{first.name},{second.name}", 2,
        lambda z: np.column_stack([first(z)[:, 0], second(z)[:, 0]]),
    )


@dataclass(frozen=True)
class WeightedEnsemble:
    """Frames plus per-frame unbiasing weights and an effective sample size."""

    log_weights: np.ndarray
    normalized_weights: np.ndarray
    ess: float
    frames: Dataset | None = None

    @property
    def n_frames(self) -> int:
        return self.log_weights.shape[0]


def compute_weights(logp_th, temps: TemperatureSpec,
                    frames: Dataset | None = None) -> WeightedEnsemble:
    """Per-frame weights from estimated high-temperature log densities.

    log omega_i = (T_h/T - 1) * logp_th_i, max-shifted before
    exponentiation.  Frames more than UNDERFLOW_GAP below the shifted
    maximum get weight exactly 0.  A -inf log density (a frame the
    estimate assigns zero probability) is allowed; all--inf input is not.
    """
    logp = np.asarray(logp_th, dtype=float)
    if logp.ndim != 1 or logp.size == 0:
        raise InvalidInput("compute_weights: logp_th must be a non-empty 1-D array")
    if np.any(np.isnan(logp)) or np.any(logp == np.inf):
        raise InvalidInput("compute_weights: logp_th contains NaN or +inf")
    if frames is not None and frames.n_frames != logp.size:
        raise InvalidInput("compute_weights: frames and logp_th lengths differ")

    exponent = temps.ratio - 1.0
    if exponent == 0.0:
        log_w = np.zeros_like(logp)
    else:
        log_w = exponent * logp
    peak = np.max(log_w)
    if not np.isfinite(peak):
        raise DegenerateWeights("compute_weights: every log weight is -inf")
    shifted = log_w - peak
    weights = np.where(shifted < -UNDERFLOW_GAP, 0.0, np.exp(shifted))
    total = float(np.sum(weights))
    ess = total**2 / float(np.sum(weights**2))
    return WeightedEnsemble(
        log_weights=shifted,
        normalized_weights=weights / total,
        ess=ess,
        frames=frames,
    )


def fes_of_cv(logp_th, temps: TemperatureSpec) -> np.ndarray:
    """High-temperature free energy A = -kB*T_h*log P_Th, min-shifted to 0."""
    logp = np.asarray(logp_th, dtype=float)
    if not np.all(np.isfinite(logp)):
        raise InvalidInput("fes_of_cv: non-finite log density")
    a = -temps.boltzmann * temps.high_temperature * logp
    return a - np.min(a)


@dataclass(frozen=True)
class FESGrid:
    """Binned feature distribution and its free energy, min over finite bins = 0.

    ``axes`` holds bin edges per feature axis.  ``free_energy`` is NaN on
    empty bins.  ``counts`` is the raw weighted mass before normalization.
    """

    axes: tuple
    free_energy: np.ndarray
    probability: np.ndarray
    counts: np.ndarray
    feature_names: tuple
    units: str = "kB*T"
    stderr: np.ndarray | None = None

    def __post_init__(self):
        finite = self.free_energy[np.isfinite(self.free_energy)]
        if finite.size and abs(float(np.min(finite))) > 1e-9:
            raise InvalidInput("FESGrid: finite free energies must be min-shifted to 0")

    @property
    def centers(self) -> tuple:
        return tuple(0.5 * (ax[1:] + ax[:-1]) for ax in self.axes)


def _resolve_edges(bins, values_1d):
    if isinstance(bins, (int, np.integer)):
        lo, hi = float(np.min(values_1d)), float(np.max(values_1d))
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        span = hi - lo
        return np.linspace(lo - 1e-9 * span, hi + 1e-9 * span, int(bins) + 1)
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise InvalidInput("bins must be an integer or increasing 1-D edges")
    return edges


def weighted_feature_distribution(ensemble: WeightedEnsemble, feature: FeatureMap,
                                  bins, temps: TemperatureSpec | None = None,
                                  frames: np.ndarray | None = None) -> FESGrid:
    """Weighted histogram of a feature, as probability mass and free energy.

    ``bins`` is an int or edge array (a tuple of two for 2-D features).
    The edges must cover every observed feature value.  Free energy is
    -log(pmf) in kB*T units unless a TemperatureSpec with a non-unit
    kB*T is given, in which case values are scaled by kB*T and the units
    string records it.
    """
    if frames is None:
        if ensemble.frames is None:
            raise InvalidInput(
                "weighted_feature_distribution: ensemble has no frames attached"
            )
        frames = ensemble.frames.samples
    values = feature(frames)
    if values.shape[0] != ensemble.n_frames:
        raise InvalidInput("weighted_feature_distribution: frame count mismatch")

    if feature.arity == 1:
        bin_spec = (bins,)
    else:
        if not isinstance(bins, tuple) or len(bins) != 2:
            bin_spec = (bins, bins)
        else:
            bin_spec = bins
    axes = tuple(_resolve_edges(b, values[:, k]) for k, b in enumerate(bin_spec))
    for k, edges in enumerate(axes):
        v = values[:, k]
        if np.min(v) < edges[0] or np.max(v) > edges[-1]:
            raise InvalidInput(
                f"bins for feature axis {k} do not cover the observed range "
                f"[{np.min(v)}, {np.max(v)}]"
            )

    weights = ensemble.normalized_weights
    if feature.arity == 1:
        counts, _ = np.histogram(values[:, 0], bins=axes[0], weights=weights)
    else:
        counts, _, _ = np.histogram2d(values[:, 0], values[:, 1],
                                      bins=[axes[0], axes[1]], weights=weights)
    total = float(np.sum(counts))
    if total <= 0.0:
        raise DegenerateWeights("weighted_feature_distribution: zero total mass")
    pmf = counts / total

    scale = 1.0
    units = "kB*T"
    if temps is not None:
        scale = temps.boltzmann * temps.temperature
        if scale != 1.0:
            units = "kJ/mol" if temps.boltzmann == KB_KJ_PER_MOL_K else "energy"
    with np.errstate(divide="ignore"):
        fes = np.where(pmf > 0.0, -scale * np.log(np.where(pmf > 0.0, pmf, 1.0)), np.nan)
    fes = fes - np.nanmin(fes)
    return FESGrid(axes=axes, free_energy=fes, probability=pmf, counts=counts,
                   feature_names=tuple(feature.name.split(",")), units=units)


def bootstrap_errorbars(ensemble: WeightedEnsemble, feature: FeatureMap, bins,
                        n_boot: int, rng, frames: np.ndarray | None = None) -> np.ndarray:
    """Per-bin standard error of the free energy by frame-level bootstrap.

    Frames are resampled uniformly with replacement, keeping their
    weights; the per-bin standard deviation over replicas is returned
    (NaN where every replica left the bin empty).
    """
    if n_boot < 1:
        raise InvalidInput("bootstrap_errorbars: n_boot must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if frames is None:
        if ensemble.frames is None:
            raise InvalidInput("bootstrap_errorbars: ensemble has no frames attached")
        frames = ensemble.frames.samples
    base = weighted_feature_distribution(ensemble, feature, bins, frames=frames)
    values = feature(frames)
    n = ensemble.n_frames
    weights = ensemble.normalized_weights

    replicas = np.empty((n_boot,) + base.free_energy.shape)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        w = weights[idx]
        total = float(np.sum(w))
        if total <= 0.0:
            replicas[b] = np.nan
            continue
        if feature.arity == 1:
            counts, _ = np.histogram(values[idx, 0], bins=base.axes[0], weights=w)
        else:
            counts, _, _ = np.histogram2d(values[idx, 0], values[idx, 1],
                                          bins=[base.axes[0], base.axes[1]], weights=w)
        pmf = counts / total
        with np.errstate(divide="ignore"):
            fes = np.where(pmf > 0.0, -np.log(np.where(pmf > 0.0, pmf, 1.0)), np.nan)
        replicas[b] = fes - np.nanmin(fes)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN bins
        stderr = np.nanstd(replicas, axis=0, ddof=1)
    return stderr
