"""Ground-truth densities, samplers, and oracles for validating the pipeline.

Analytic densities are product-kernel mixtures, plain Gaussian on R^n or
wrapped Gaussian on T^n, plus potential-based densities produced by
temperature scaling.  Mixtures stay closed under the diffusion's
perturbation (component scales inflate to sqrt(sigma_kc^2 + sigma(t)^2)),
which yields exact time-dependent scores for testing the likelihood
integrator without any training in the loop.

Temperature scaling reinterprets a density P, assumed to be an equilibrium
distribution at T_from, at a new temperature:  P_new ∝ P^(T_from/T_to).
This is what connects a high-temperature CV ensemble to the equilibrium
surface being recovered.

All oracles here are independent of the estimators under test: direct
quadrature (dim <= 2), exact iid mixture sampling with exact density
ratios (importance sampling, any dim), and, for integer temperature
ratios, an exact product-quadrature expansion of the mixture power.
"""

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .datasets import Dataset, stable_hash
from .diffusion import NoiseSchedule, sigma_of_t
from .errors import InvalidInput, PoorMixingWarning
from .spaces import Space, default_truncation, euclidean, torus, wrap
from .unbias import TemperatureSpec, coordinate_feature

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# quadrature grids

@dataclass(frozen=True)
class QuadratureGrid:
    """Regular tensor grid with trapezoid weights (periodic on the torus).

    Node counts of 64+ per axis keep this accurate enough for oracle use;
    smaller grids are rejected.
    """

    space: Space
    n_nodes: tuple
    bounds: tuple

    def __post_init__(self):
        n_nodes = tuple(int(m) for m in np.atleast_1d(self.n_nodes))
        if len(n_nodes) != self.space.dim:
            raise InvalidInput("QuadratureGrid: one node count per axis required")
        if any(m < 64 for m in n_nodes):
            raise InvalidInput("QuadratureGrid: need at least 64 nodes per axis")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != self.space.dim or any(hi <= lo for lo, hi in bounds):
            raise InvalidInput("QuadratureGrid: bad axis bounds")
        object.__setattr__(self, "n_nodes", n_nodes)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def for_torus(cls, dim: int, nodes: int) -> "QuadratureGrid":
        return cls(torus(dim), (nodes,) * dim, ((-math.pi, math.pi),) * dim)

    @classmethod
    def for_box(cls, bounds, nodes) -> "QuadratureGrid":
        bounds = tuple(bounds)
        if np.isscalar(nodes):
            nodes = (int(nodes),) * len(bounds)
        return cls(euclidean(len(bounds)), tuple(nodes), bounds)

    def axes(self) -> list:
        out = []
        for m, (lo, hi) in zip(self.n_nodes, self.bounds):
            if self.space.is_torus:
                out.append(np.linspace(lo, hi, m, endpoint=False))
            else:
                out.append(np.linspace(lo, hi, m))
        return out

    def axis_weights(self) -> list:
        out = []
        for m, (lo, hi) in zip(self.n_nodes, self.bounds):
            if self.space.is_torus:
                out.append(np.full(m, (hi - lo) / m))
            else:
                h = (hi - lo) / (m - 1)
                w = np.full(m, h)
                w[0] = w[-1] = 0.5 * h
                out.append(w)
        return out

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def node_weights(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axis_weights(), indexing="ij")
        out = np.ones(mesh[0].shape)
        for m in mesh:
            out = out * m
        return out.ravel()

    def integrate(self, values) -> float:
        values = np.asarray(values, dtype=float).ravel()
        w = self.node_weights()
        if values.shape != w.shape:
            raise InvalidInput("integrate: values do not match the grid")
        return float(np.sum(values * w))


# ---------------------------------------------------------------------------
# analytic densities

GAUSSIAN_MIXTURE = "gaussian_mixture"
WRAPPED_GAUSSIAN_MIXTURE = "wrapped_gaussian_mixture"
POTENTIAL_BASED = "potential_based"


@dataclass(frozen=True, eq=False)
class AnalyticDensity:
    """A normalized reference density: product-kernel mixture or potential.

    Potential-based densities hold an energy function V and a temperature;
    their log density is -V/kT - log Z, with log Z from quadrature when a
    grid is available (always for dim <= 2).  Without a normalization they
    still expose exact log-density differences, which is all the
    reweighting pipeline needs.
    """

    kind: str
    space: Space
    weights: np.ndarray | None = None
    means: np.ndarray | None = None
    sigmas: np.ndarray | None = None
    potential: Callable[[np.ndarray], np.ndarray] | None = None
    temperature: float = 1.0
    log_z: float | None = None
    grid: QuadratureGrid | None = None

    def __post_init__(self):
        if self.kind in (GAUSSIAN_MIXTURE, WRAPPED_GAUSSIAN_MIXTURE):
            if (self.kind == WRAPPED_GAUSSIAN_MIXTURE) != self.space.is_torus:
                raise InvalidInput("AnalyticDensity: mixture kind does not match space")
            w = np.asarray(self.weights, dtype=float)
            means = np.atleast_2d(np.asarray(self.means, dtype=float))
            sigmas = np.broadcast_to(
                np.asarray(self.sigmas, dtype=float), means.shape
            ).copy()
            if w.ndim != 1 or abs(float(np.sum(w)) - 1.0) > 1e-9 or np.any(w <= 0):
                raise InvalidInput("AnalyticDensity: weights must be positive, sum 1")
            if means.shape != (w.size, self.space.dim):
                raise InvalidInput("AnalyticDensity: means must have shape (K, dim)")
            if np.any(sigmas <= 0) or not np.all(np.isfinite(sigmas)):
                raise InvalidInput("AnalyticDensity: sigmas must be positive")
            if self.space.is_torus:
                means = wrap(means)
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "means", means)
            object.__setattr__(self, "sigmas", sigmas)
        elif self.kind == POTENTIAL_BASED:
            if self.potential is None or not callable(self.potential):
                raise InvalidInput("AnalyticDensity: potential must be callable")
            if self.temperature <= 0:
                raise InvalidInput("AnalyticDensity: temperature must be positive")
        else:
            raise InvalidInput(f"AnalyticDensity: unknown kind {self.kind!r}")

    @property
    def n_components(self) -> int:
        return 0 if self.weights is None else self.weights.size

    def describe(self) -> dict:
        out = {"kind": self.kind, "space": self.space.kind, "dim": self.space.dim}
        if self.kind != POTENTIAL_BASED:
            out["weights"] = self.weights.tolist()
            out["means"] = self.means.tolist()
            out["sigmas"] = self.sigmas.tolist()
        else:
            out["temperature"] = self.temperature
            out["normalized"] = self.log_z is not None
        return out


def gaussian_mixture(space: Space, weights, means, sigmas) -> AnalyticDensity:
    kind = WRAPPED_GAUSSIAN_MIXTURE if space.is_torus else GAUSSIAN_MIXTURE
    return AnalyticDensity(kind=kind, space=space, weights=weights, means=means,
                           sigmas=sigmas)


def _coord_stats(delta, sigmas, is_torus, trunc, with_derivs):
    """Per-coordinate kernel log density, score, and score derivative.

    delta has shape (..., K, n) and holds x - mean, wrapped on the torus;
    sigmas broadcasts as (K, n).  Torus kernels sum images relative to the
    dominant d = 0 term, so small sigmas cannot underflow.
    """
    sig2 = np.square(sigmas)
    base = -np.square(delta) / (2.0 * sig2)
    q0 = -delta / sig2
    if not is_torus:
        logp = base - np.log(np.sqrt(TWO_PI) * sigmas)
        if not with_derivs:
            return logp, None, None
        score = q0
        dscore = np.broadcast_to(-1.0 / sig2, delta.shape)
        return logp, score, dscore
    corr = np.zeros_like(delta)
    s_num = np.zeros_like(delta)
    q2_num = np.zeros_like(delta)
    for d in range(1, trunc + 1):
        for shift in (TWO_PI * d, -TWO_PI * d):
            rel = np.exp(-np.square(delta + shift) / (2.0 * sig2) - base)
            corr += rel
            if with_derivs:
                q = -(delta + shift) / sig2
                s_num += rel * q
                q2_num += rel * np.square(q)
    denom = 1.0 + corr
    logp = base + np.log1p(corr) - np.log(np.sqrt(TWO_PI) * sigmas)
    if not with_derivs:
        return logp, None, None
    score = (q0 + s_num) / denom
    second_moment = (np.square(q0) + q2_num) / denom
    dscore = second_moment - 1.0 / sig2 - np.square(score)
    return logp, score, dscore


def _mixture_stats(x, density: AnalyticDensity, sigmas, with_derivs):
    """Mixture log density and (optionally) score and exact divergence."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != density.space.dim:
        raise InvalidInput("dimension mismatch with the density's space")
    delta = x[:, None, :] - density.means[None, :, :]
    is_torus = density.space.is_torus
    trunc = default_truncation(float(np.max(sigmas))) if is_torus else 0
    if is_torus:
        delta = wrap(delta)
    logp_c, score_c, dscore_c = _coord_stats(delta, sigmas, is_torus, trunc, with_derivs)
    comp = np.sum(logp_c, axis=-1) + np.log(density.weights)[None, :]
    peak = np.max(comp, axis=-1, keepdims=True)
    lse = peak + np.log(np.sum(np.exp(comp - peak), axis=-1, keepdims=True))
    logpdf = lse[:, 0]
    if not with_derivs:
        return logpdf, None, None
    resp = np.exp(comp - lse)
    score = np.einsum("bk,bkn->bn", resp, score_c)
    comp_div = np.sum(dscore_c, axis=-1) + np.sum(np.square(score_c), axis=-1)
    div = np.einsum("bk,bk->b", resp, comp_div) - np.sum(np.square(score), axis=-1)
    return logpdf, score, div


def _unnorm_logpdf_fn(density: AnalyticDensity) -> Callable[[np.ndarray], np.ndarray]:
    if density.kind == POTENTIAL_BASED:
        potential = density.potential
        temperature = density.temperature
        return lambda z: -np.asarray(potential(np.atleast_2d(z)), dtype=float) / temperature
    return lambda z: _mixture_stats(z, density, density.sigmas, False)[0]


def density_logpdf(density: AnalyticDensity, z) -> np.ndarray:
    """Normalized log density; potential-based kinds need a known log Z."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    if density.kind == POTENTIAL_BASED:
        if density.log_z is None:
            raise InvalidInput(
                "density_logpdf: this potential-based density was never "
                "normalized; use density_logpdf_unnormalized"
            )
        out = _unnorm_logpdf_fn(density)(z) - density.log_z
    else:
        out = _mixture_stats(z, density, density.sigmas, False)[0]
    return float(out[0]) if single else out


def density_logpdf_unnormalized(density: AnalyticDensity, z) -> np.ndarray:
    """Log density up to a constant; exact for log-density differences."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    out = _unnorm_logpdf_fn(density)(z)
    if density.kind == POTENTIAL_BASED and density.log_z is not None:
        out = out - density.log_z
    return float(out[0]) if single else out


def mixture_score(density: AnalyticDensity, z) -> np.ndarray:
    """Exact score of a mixture density (no diffusion)."""
    if density.kind == POTENTIAL_BASED:
        raise InvalidInput("mixture_score: only mixture densities have closed forms")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    _, score, _ = _mixture_stats(z, density, density.sigmas, True)
    return score[0] if single else score


def mixture_sample(density: AnalyticDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact iid draws from a mixture density."""
    if density.kind == POTENTIAL_BASED:
        raise InvalidInput("mixture_sample: potential-based densities need MCMC")
    if n < 1:
        raise InvalidInput("mixture_sample: n must be positive")
    comp = rng.choice(density.n_components, size=n, p=density.weights)
    draws = density.means[comp] + density.sigmas[comp] * rng.standard_normal(
        (n, density.space.dim)
    )
    return wrap(draws) if density.space.is_torus else draws


class DiffusedMixtureScore:
    """Exact score of a mixture pushed through the diffusion to time t.

    Because the perturbation kernel is (wrapped) Gaussian, the diffused
    density is the same mixture with component scales
    sqrt(sigma_kc^2 + sigma(t)^2); score, divergence, and log density all
    stay in closed form.  Instances satisfy the score-function protocol of
    the likelihood integrator, including exact divergence.
    """

    def __init__(self, density: AnalyticDensity, schedule: NoiseSchedule):
        if density.kind == POTENTIAL_BASED:
            raise InvalidInput("DiffusedMixtureScore: needs a mixture density")
        self.density = density
        self.schedule = schedule

    def _sigmas_at(self, t: float) -> np.ndarray:
        s_t = float(sigma_of_t(t, self.schedule))
        return np.sqrt(np.square(self.density.sigmas) + s_t * s_t)

    def __call__(self, z, t: float) -> np.ndarray:
        _, score, _ = _mixture_stats(z, self.density, self._sigmas_at(t), True)
        return score

    def divergence(self, z, t: float) -> np.ndarray:
        _, _, div = _mixture_stats(z, self.density, self._sigmas_at(t), True)
        return div

    def logpdf(self, z, t: float) -> np.ndarray:
        logp, _, _ = _mixture_stats(z, self.density, self._sigmas_at(t), False)
        return logp


# ---------------------------------------------------------------------------
# temperature scaling

def _default_grid_for(density: AnalyticDensity, spread: float) -> QuadratureGrid | None:
    space = density.space
    if space.dim > 2:
        return None
    if space.is_torus:
        nodes = 4096 if space.dim == 1 else 512
        return QuadratureGrid.for_torus(space.dim, nodes)
    if density.kind == POTENTIAL_BASED:
        return density.grid
    pad = 10.0 * np.max(density.sigmas) * max(1.0, spread)
    lo = np.min(density.means - pad, axis=0)
    hi = np.max(density.means + pad, axis=0)
    nodes = 4096 if space.dim == 1 else 512
    return QuadratureGrid.for_box(tuple(zip(lo, hi)), nodes)


def temperature_scale(density: AnalyticDensity, t_from: float, t_to: float,
                      grid: QuadratureGrid | None = None) -> AnalyticDensity:
    """Reinterpret a density, equilibrium at t_from, at temperature t_to.

    The result is potential-based with V = -t_from * log P (so its
    unnormalized log density is (t_from/t_to) * log P), renormalized by
    quadrature when a grid is available.  Above 2 dimensions no default
    grid exists and the result is left unnormalized unless one is given.
    """
    if t_from <= 0 or t_to <= 0:
        raise InvalidInput("temperature_scale: temperatures must be positive")
    base_unnorm = _unnorm_logpdf_fn(density)

    def potential(z):
        return -t_from * base_unnorm(z)

    if grid is None:
        grid = _default_grid_for(density, math.sqrt(t_to / t_from))
    log_z = None
    if grid is not None:
        if grid.space.dim != density.space.dim:
            raise InvalidInput("temperature_scale: grid does not match the space")
        unnorm = (t_from / t_to) * base_unnorm(grid.points())
        log_z = float(logsumexp(unnorm + np.log(grid.node_weights())))
        if not np.isfinite(log_z):
            raise InvalidInput("temperature_scale: density is not normalizable")
    return AnalyticDensity(kind=POTENTIAL_BASED, space=density.space,
                           potential=potential, temperature=t_to, log_z=log_z,
                           grid=grid)


# ---------------------------------------------------------------------------
# 1D toy experiment

def gaussian_convolve(values, grid: QuadratureGrid, kernel_sigma: float) -> np.ndarray:
    """Convolve density values on a 1-D grid with a Gaussian kernel.

    Circular convolution (via FFT, with a wrapped-Gaussian kernel) on the
    torus, truncated linear convolution on a box; either way the result is
    renormalized to unit mass.
    """
    if kernel_sigma <= 0:
        raise InvalidInput("gaussian_convolve: kernel_sigma must be positive")
    if grid.space.dim != 1:
        raise InvalidInput("gaussian_convolve: grid must be 1-D")
    values = np.asarray(values, dtype=float).ravel()
    m = grid.n_nodes[0]
    if values.shape != (m,):
        raise InvalidInput("gaussian_convolve: values do not match the grid")

    if grid.space.is_torus:
        dx = TWO_PI / m
        offsets = wrap(dx * np.arange(m))
        kernel = np.zeros(m)
        trunc = default_truncation(kernel_sigma)
        for d in range(-trunc, trunc + 1):
            kernel += np.exp(-((offsets + TWO_PI * d) ** 2) / (2.0 * kernel_sigma**2))
        kernel /= np.sum(kernel)
        out = np.real(np.fft.ifft(np.fft.fft(values) * np.fft.fft(kernel)))
    else:
        lo, hi = grid.bounds[0]
        dx = (hi - lo) / (m - 1)
        half = min(m - 1, int(math.ceil(8.0 * kernel_sigma / dx)))
        offsets = dx * np.arange(-half, half + 1)
        kernel = np.exp(-offsets**2 / (2.0 * kernel_sigma**2))
        kernel /= np.sum(kernel)
        out = np.convolve(values, kernel, mode="same")
    out = np.clip(out, 0.0, None)
    return out / grid.integrate(out)


def toy_density() -> AnalyticDensity:
    """Fixed 1-D circular mixture with two unequal wells (versioned default)."""
    return gaussian_mixture(
        torus(1),
        weights=[0.55, 0.30, 0.15],
        means=[[-1.8], [1.4], [2.3]],
        sigmas=[[0.45], [0.35], [0.50]],
    )


@dataclass(frozen=True)
class ToyCurve:
    kbt_h: float
    high_t: np.ndarray
    perturbed_high_t: np.ndarray
    recovered: np.ndarray
    l1_error: float


@dataclass(frozen=True)
class ToyUnbiasResult:
    grid: QuadratureGrid
    ground_truth: np.ndarray
    curves: tuple


def toy_unbias_experiment(kbt_h_list, kernel_sigma: float,
                          grid: QuadratureGrid | None = None,
                          density: AnalyticDensity | None = None) -> ToyUnbiasResult:
    """Recover the kB*T = 1 density from scaled copies with perturbed weights.

    For each kB*T_h: scale the base density, blur it with a Gaussian kernel
    (standing in for density-estimation error; skipped when the width is 0),
    reweight by the blurred density to the power T_h/T - 1, and measure the
    L1 gap to the exact base density.  Everything happens on the grid.
    """
    kbt_h_list = [float(v) for v in np.atleast_1d(kbt_h_list)]
    if not kbt_h_list or any(v <= 0 for v in kbt_h_list):
        raise InvalidInput("toy_unbias_experiment: kB*T_h values must be positive")
    if kernel_sigma < 0:
        raise InvalidInput("toy_unbias_experiment: kernel_sigma must be >= 0")
    if density is None:
        density = toy_density()
    if density.space.dim != 1:
        raise InvalidInput("toy_unbias_experiment: 1-D densities only")
    if grid is None:
        grid = _default_grid_for(density, 1.0)

    points = grid.points()
    ground_truth = np.exp(density_logpdf(density, points))
    ground_truth /= grid.integrate(ground_truth)

    curves = []
    for kbt_h in kbt_h_list:
        scaled = temperature_scale(density, 1.0, kbt_h, grid=grid)
        p_high = np.exp(density_logpdf(scaled, points))
        p_high /= grid.integrate(p_high)
        if kernel_sigma > 0:
            p_tilde = gaussian_convolve(p_high, grid, kernel_sigma)
        else:
            p_tilde = p_high
        # omega = p_tilde^(T_h/T - 1) with T = 1, applied to exact samples
        # from p_high; on the grid that is a pointwise product.
        with np.errstate(divide="ignore"):
            log_recovered = (kbt_h - 1.0) * np.log(p_tilde) + np.log(p_high)
        recovered = np.exp(log_recovered - np.max(log_recovered[np.isfinite(log_recovered)]))
        recovered[~np.isfinite(recovered)] = 0.0
        recovered /= grid.integrate(recovered)
        l1 = grid.integrate(np.abs(recovered - ground_truth))
        curves.append(ToyCurve(kbt_h=kbt_h, high_t=p_high, perturbed_high_t=p_tilde,
                               recovered=recovered, l1_error=l1))
    return ToyUnbiasResult(grid=grid, ground_truth=ground_truth, curves=tuple(curves))


# ---------------------------------------------------------------------------
# Metropolis sampling

def metropolis_sample(density: AnalyticDensity, n_samples: int, burn_in: int = 2000,
                      thin: int = 10, proposal_sigma: float = 0.5, seed: int = 0,
                      n_chains: int = 64) -> Dataset:
    """Random-walk Metropolis draws from an analytic density.

    Runs vectorized lockstep chains with Gaussian proposals (wrapped on the
    torus) and keeps every thin-th state after burn-in, interleaving chains
    in iteration-major order.  Deterministic for a fixed seed; the
    generator config hash lands in the dataset metadata.
    """
    if n_samples < 1:
        raise InvalidInput("metropolis_sample: n_samples must be positive")
    if burn_in < 0 or thin < 1 or n_chains < 1:
        raise InvalidInput("metropolis_sample: bad chain settings")
    if proposal_sigma <= 0:
        raise InvalidInput("metropolis_sample: proposal_sigma must be positive")

    space = density.space
    rng = np.random.default_rng(seed)
    logp_fn = _unnorm_logpdf_fn(density)

    if space.is_torus:
        state = rng.uniform(-math.pi, math.pi, size=(n_chains, space.dim))
    elif density.kind != POTENTIAL_BASED:
        comp = rng.choice(density.n_components, size=n_chains, p=density.weights)
        state = density.means[comp] + density.sigmas[comp] * rng.standard_normal(
            (n_chains, space.dim)
        )
    else:
        state = rng.standard_normal((n_chains, space.dim))
    logp = logp_fn(state)

    per_chain = -(-n_samples // n_chains)  # ceil division
    kept = np.empty((per_chain, n_chains, space.dim))
    accepted = 0
    proposed = 0
    n_steps = burn_in + per_chain * thin
    next_keep = burn_in + thin - 1
    keep_row = 0
    for step in range(n_steps):
        move = proposal_sigma * rng.standard_normal(state.shape)
        candidate = state + move
        if space.is_torus:
            candidate = wrap(candidate)
        cand_logp = logp_fn(candidate)
        accept = np.log(rng.uniform(size=n_chains)) < cand_logp - logp
        state = np.where(accept[:, None], candidate, state)
        logp = np.where(accept, cand_logp, logp)
        accepted += int(np.sum(accept))
        proposed += n_chains
        if step == next_keep:
            kept[keep_row] = state
            keep_row += 1
            next_keep += thin

    acceptance = accepted / proposed
    if acceptance < 0.01:
        warnings.warn(
            f"Metropolis acceptance rate {acceptance:.4f} is below 1%; "
            f"proposal_sigma={proposal_sigma} is likely too large",
            PoorMixingWarning,
        )
    samples = kept.reshape(per_chain * n_chains, space.dim)[:n_samples]
    meta = {
        "generator": "metropolis",
        "seed": seed,
        "burn_in": burn_in,
        "thin": thin,
        "proposal_sigma": proposal_sigma,
        "n_chains": n_chains,
        "acceptance_rate": acceptance,
        "config_hash": stable_hash(
            "metropolis", density.describe(), n_samples, burn_in, thin,
            proposal_sigma, seed, n_chains,
        ),
    }
    return Dataset(samples=samples, space=space, meta=meta)


# ---------------------------------------------------------------------------
# benchmark suite

@dataclass(frozen=True)
class Benchmark:
    """A named synthetic problem: high-T data plus exact reference densities."""

    name: str
    space: Space
    temps: TemperatureSpec
    density_high: AnalyticDensity
    density_low: AnalyticDensity
    features: tuple
    fes_edges: np.ndarray
    proposal_sigma: float
    seed: int
    dataset: Dataset | None = None


_TORUS2_MIXTURE = {
    "weights": [0.44, 0.34, 0.22],
    "means": [[-1.9, 1.2], [1.1, -1.4], [2.9, 2.7]],
    "sigmas": [[0.75, 0.75], [0.85, 0.60], [0.80, 0.80]],
}

_TORUS5_MIXTURE = {
    "weights": [0.45, 0.35, 0.20],
    "means": [
        [-1.9, 1.2, 0.5, -0.8, 1.7],
        [1.1, -1.4, -2.2, 0.4, -0.6],
        [2.9, 2.7, 1.0, 2.0, -2.8],
    ],
    "sigmas": [
        [0.65, 0.75, 1.60, 1.80, 1.50],
        [0.75, 0.60, 1.50, 1.70, 1.90],
        [0.70, 0.80, 1.80, 1.60, 1.70],
    ],
}

_TORUS10_MIXTURE = {
    "weights": [0.35, 0.30, 0.20, 0.15],
    "means": [
        [-1.9, 1.2, 0.5, -0.8, 1.7, -2.5, 0.9, 2.2, -1.1, 0.3],
        [1.1, -1.4, -2.2, 0.4, -0.6, 1.8, -0.9, -2.6, 2.4, -1.5],
        [2.9, 2.7, 1.0, 2.0, -2.8, 0.2, 2.6, 0.8, -0.4, 2.0],
        [-0.6, -2.8, 2.6, -1.6, 0.8, -1.2, -2.2, 1.4, 1.0, -2.9],
    ],
    "sigmas": [
        [0.65, 0.75, 1.7, 1.9, 1.6, 1.8, 2.0, 1.7, 1.9, 1.8],
        [0.75, 0.60, 1.6, 1.8, 2.0, 1.7, 1.9, 1.8, 1.6, 1.7],
        [0.70, 0.80, 1.9, 1.6, 1.8, 2.0, 1.7, 1.9, 1.8, 1.6],
        [0.80, 0.70, 1.8, 2.0, 1.7, 1.6, 1.8, 1.6, 2.0, 1.9],
    ],
}

_EUCLID2_MIXTURE = {
    "weights": [0.50, 0.30, 0.20],
    "means": [[-2.0, 0.0], [1.5, 1.2], [0.8, -1.6]],
    "sigmas": [[0.55, 0.70], [0.65, 0.50], [0.50, 0.60]],
}

_BENCHMARKS = {
    "torus2": {
        "space": torus(2), "mixture": _TORUS2_MIXTURE, "ratio": 3.0,
        "proposal_sigma": 1.5, "seed": 20240811,
    },
    "torus5": {
        "space": torus(5), "mixture": _TORUS5_MIXTURE, "ratio": 3.0,
        "proposal_sigma": 1.2, "seed": 20240812,
    },
    "torus10": {
        "space": torus(10), "mixture": _TORUS10_MIXTURE, "ratio": 3.0,
        "proposal_sigma": 1.1, "seed": 20240813,
    },
    "euclid2": {
        "space": euclidean(2), "mixture": _EUCLID2_MIXTURE, "ratio": 4.0,
        "proposal_sigma": 1.1, "seed": 20240814,
    },
}

#: 64 bins nest exactly inside the 512-node oracle grids.
FES_BINS = 64


def benchmark_names() -> list:
    return sorted(_BENCHMARKS)


def benchmark_suite(name: str, n_frames: int = 200_000, seed: int | None = None,
                    include_dataset: bool = True) -> Benchmark:
    """A pinned synthetic benchmark: dataset at T_h plus exact densities.

    The high-temperature density is an exact mixture; the low-temperature
    reference is its temperature-scaled power (normalized by quadrature in
    2 dimensions, unnormalized above).  The dataset comes from seeded
    Metropolis chains targeting the high-temperature density.
    """
    if name not in _BENCHMARKS:
        raise InvalidInput(
            f"unknown benchmark {name!r}; available: {', '.join(benchmark_names())}"
        )
    spec = _BENCHMARKS[name]
    space = spec["space"]
    density_high = gaussian_mixture(space, **spec["mixture"])
    temps = TemperatureSpec(temperature=1.0, high_temperature=spec["ratio"])
    density_low = temperature_scale(density_high, spec["ratio"], 1.0)
    if seed is None:
        seed = spec["seed"]

    if space.is_torus:
        fes_edges = np.linspace(-math.pi, math.pi, FES_BINS + 1)
    else:
        pad = 6.0 * float(np.max(density_high.sigmas))
        lo = float(np.min(density_high.means[:, 0])) - pad
        hi = float(np.max(density_high.means[:, 0])) + pad
        fes_edges = np.linspace(lo, hi, FES_BINS + 1)

    dataset = None
    if include_dataset:
        dataset = metropolis_sample(
            density_high, n_frames, burn_in=2000, thin=10,
            proposal_sigma=spec["proposal_sigma"], seed=seed,
        )
    features = tuple(coordinate_feature(c) for c in range(min(2, space.dim)))
    return Benchmark(name=name, space=space, temps=temps, density_high=density_high,
                     density_low=density_low, features=features, fes_edges=fes_edges,
                     proposal_sigma=spec["proposal_sigma"], seed=seed, dataset=dataset)


# ---------------------------------------------------------------------------
# marginal oracles for FES comparisons

def _nested_axis_nodes(edges, sub: int):
    """Midpoint sub-nodes tiling each bin exactly: (nodes, weights, bin index)."""
    widths = np.diff(edges)
    offsets = (np.arange(sub) + 0.5) / sub
    nodes = (edges[:-1, None] + widths[:, None] * offsets[None, :]).ravel()
    node_w = np.repeat(widths / sub, sub)
    bin_idx = np.repeat(np.arange(widths.size), sub)
    return nodes, node_w, bin_idx


def oracle_marginal_quadrature(density_high: AnalyticDensity, ratio: float, axis: int,
                               edges, nodes: int = 512) -> np.ndarray:
    """Low-T marginal bin masses by dense quadrature (dim <= 2 only).

    The marginalized axis uses midpoint sub-nodes nested inside the bins,
    so every node cell lands in exactly one bin.
    """
    space = density_high.space
    if space.dim > 2:
        raise InvalidInput("oracle_marginal_quadrature: use the MC oracle above 2-D")
    if axis not in range(space.dim):
        raise InvalidInput("oracle_marginal_quadrature: bad axis")
    edges = np.asarray(edges, dtype=float)
    sub = max(2, nodes // (edges.size - 1))
    ax_nodes, ax_w, bin_idx = _nested_axis_nodes(edges, sub)

    if space.dim == 1:
        pts = ax_nodes[:, None]
        logp = ratio * density_logpdf(density_high, pts)
        values = np.exp(logp - np.max(logp)) * ax_w
        masses = np.bincount(bin_idx, weights=values, minlength=edges.size - 1)
    else:
        other = 1 - axis
        if space.is_torus:
            m = nodes
            dx = TWO_PI / m
            other_nodes = -math.pi + (np.arange(m) + 0.5) * dx
            other_w = np.full(m, dx)
        else:
            pad = 10.0 * float(np.max(density_high.sigmas))
            lo = float(np.min(density_high.means[:, other])) - pad
            hi = float(np.max(density_high.means[:, other])) + pad
            m = nodes
            dx = (hi - lo) / m
            other_nodes = lo + (np.arange(m) + 0.5) * dx
            other_w = np.full(m, dx)
        pts = np.empty((ax_nodes.size * m, 2))
        pts[:, axis] = np.repeat(ax_nodes, m)
        pts[:, other] = np.tile(other_nodes, ax_nodes.size)
        logp = ratio * density_logpdf(density_high, pts)
        values = np.exp(logp - np.max(logp)).reshape(ax_nodes.size, m)
        line = values @ other_w
        masses = np.bincount(bin_idx, weights=line * ax_w, minlength=edges.size - 1)

    total = masses.sum()
    if total <= 0:
        raise InvalidInput("oracle_marginal_quadrature: zero mass over the bins")
    return masses / total


def oracle_marginal_mc(density_high: AnalyticDensity, ratio: float, axis: int, edges,
                       n_draws: int = 2_000_000, seed: int = 0) -> np.ndarray:
    """Low-T marginal bin masses by importance sampling from the exact mixture.

    Draws iid from the high-T mixture and reweights by the exact density
    to the power ratio - 1; works in any dimension.  Weights keep a fixed
    reference shift across chunks so chunking cannot change the result.
    """
    edges = np.asarray(edges, dtype=float)
    rng = np.random.default_rng(seed)
    masses = np.zeros(edges.size - 1)
    shift = None
    chunk = 500_000
    remaining = n_draws
    while remaining > 0:
        m = min(chunk, remaining)
        draws = mixture_sample(density_high, m, rng)
        logw = (ratio - 1.0) * density_logpdf(density_high, draws)
        if shift is None:
            shift = float(np.max(logw))
        w = np.exp(logw - shift)
        inside = (draws[:, axis] >= edges[0]) & (draws[:, axis] <= edges[-1])
        idx = np.clip(np.searchsorted(edges, draws[inside, axis], side="right") - 1, 0,
                      edges.size - 2)
        masses += np.bincount(idx, weights=w[inside], minlength=edges.size - 1)
        remaining -= m
    total = masses.sum()
    if total <= 0:
        raise InvalidInput("oracle_marginal_mc: zero mass")
    return masses / total


def oracle_marginal_power(density_high: AnalyticDensity, ratio: int, axis: int, edges,
                          nodes: int = 4096) -> np.ndarray:
    """Exact low-T marginal for integer temperature ratios.

    The mixture raised to an integer power expands into component tuples;
    each tuple factorizes over coordinates into products of 1-D kernels,
    integrated by dense 1-D quadrature.  Cost grows as K^ratio, fine for
    the pinned benchmarks.
    """
    if int(ratio) != ratio or ratio < 1:
        raise InvalidInput("oracle_marginal_power: ratio must be a positive integer")
    if density_high.kind == POTENTIAL_BASED:
        raise InvalidInput("oracle_marginal_power: mixture densities only")
    ratio = int(ratio)
    space = density_high.space
    edges = np.asarray(edges, dtype=float)

    def coord_logp_1d(x_nodes):
        delta = x_nodes[:, None, None] - density_high.means[None, :, :]
        if space.is_torus:
            delta = wrap(delta)
        trunc = default_truncation(float(np.max(density_high.sigmas))) \
            if space.is_torus else 0
        logp, _, _ = _coord_stats(delta, density_high.sigmas, space.is_torus, trunc,
                                  False)
        return logp  # (nodes, K, n)

    if space.is_torus:
        dx = TWO_PI / nodes
        int_nodes = -math.pi + (np.arange(nodes) + 0.5) * dx
        int_w = np.full(nodes, dx)
    else:
        pad = 10.0 * float(np.max(density_high.sigmas))
        lo = float(np.min(density_high.means)) - pad
        hi = float(np.max(density_high.means)) + pad
        dx = (hi - lo) / nodes
        int_nodes = lo + (np.arange(nodes) + 0.5) * dx
        int_w = np.full(nodes, dx)
    logp_int = coord_logp_1d(int_nodes)

    sub = max(2, nodes // (edges.size - 1))
    ax_nodes, ax_w, bin_idx = _nested_axis_nodes(edges, sub)
    logp_ax = coord_logp_1d(ax_nodes)[:, :, axis]

    log_w = np.log(density_high.weights)
    tuple_logs = []
    tuple_axis_vals = []
    for combo in itertools.product(range(density_high.n_components), repeat=ratio):
        log_const = sum(log_w[j] for j in combo)
        axis_vals = np.zeros(ax_nodes.size)
        for j in combo:
            axis_vals = axis_vals + logp_ax[:, j]
        for c in range(space.dim):
            if c == axis:
                continue
            prod = np.zeros(nodes)
            for j in combo:
                prod = prod + logp_int[:, j, c]
            peak = np.max(prod)
            log_const += peak + math.log(np.sum(np.exp(prod - peak) * int_w))
        tuple_logs.append(log_const)
        tuple_axis_vals.append(axis_vals)
    peak = max(tuple_logs)
    marginal = np.zeros(ax_nodes.size)
    for log_const, axis_vals in zip(tuple_logs, tuple_axis_vals):
        marginal += math.exp(log_const - peak) * np.exp(axis_vals)
    masses = np.bincount(bin_idx, weights=marginal * ax_w, minlength=edges.size - 1)
    total = masses.sum()
    if total <= 0:
        raise InvalidInput("oracle_marginal_power: zero mass")
    return masses / total
