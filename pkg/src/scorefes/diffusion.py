"""Variance-exploding diffusion: noise schedule, likelihood ODE, sampler.

The forward process is dz = g(t) dw with no drift, where the noise scale
follows a geometric schedule sigma(t) = sigma_min * (sigma_max/sigma_min)^t
and g(t)^2 = d sigma^2/dt.  Marginals are then the data density convolved
with a (wrapped) Gaussian of scale sigma(t), which is what `perturb` draws
from and what `dsm_target` differentiates.

Log densities come from the probability-flow ODE integrated from t_min to 1:

    dz/dt   = -1/2 g(t)^2 s(z, t)
    log p(z0) = log p_prior(z(1)) - 1/2 * integral of g(t)^2 div s dt

where s is the score function being evaluated.  The prior at t = 1 is
N(0, sigma_max^2 I) on R^n and uniform on T^n (sigma_max = 2*pi makes the
wrapped marginal uniform to ~1e-8).

A score function is any callable (z, t) -> score with z of shape (B, n) and
scalar t.  If it also has a ``divergence(z, t)`` method, the integrator can
use it instead of finite differences.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericalFailure
from .spaces import Space, wrap

#: Integration never starts at t = 0, where sigma -> sigma_min but the
#: score of near-data marginals is extremely stiff.
DEFAULT_T_MIN = 1e-3


@dataclass(frozen=True)
class NoiseSchedule:
    """Geometric noise scale between sigma_min and sigma_max."""

    sigma_min: float = 0.01
    sigma_max: float = 10.0
    t_min: float = DEFAULT_T_MIN

    def __post_init__(self):
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise InvalidInput(
                f"NoiseSchedule: need 0 < sigma_min < sigma_max, "
                f"got ({self.sigma_min}, {self.sigma_max})"
            )
        if not (0.0 < self.t_min < 1.0):
            raise InvalidInput(f"NoiseSchedule: t_min must lie in (0, 1), got {self.t_min}")

    @property
    def log_ratio(self) -> float:
        return math.log(self.sigma_max / self.sigma_min)


def default_schedule(space: Space) -> NoiseSchedule:
    """sigma_max = 2*pi on the torus (uniform prior); 10 on standardized R^n."""
    if space.is_torus:
        return NoiseSchedule(sigma_min=0.01, sigma_max=2.0 * math.pi)
    return NoiseSchedule(sigma_min=0.01, sigma_max=10.0)


def sigma_of_t(t, schedule: NoiseSchedule):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0) or not np.all(np.isfinite(t)):
        raise InvalidInput("sigma_of_t: t must lie in [0, 1]")
    return schedule.sigma_min * np.exp(schedule.log_ratio * t)


def g_of_t(t, schedule: NoiseSchedule):
    """Diffusion coefficient, g^2 = d sigma^2 / dt."""
    return sigma_of_t(t, schedule) * math.sqrt(2.0 * schedule.log_ratio)


@dataclass(frozen=True)
class IntegratorConfig:
    """Settings for the likelihood ODE and the sampling SDE.

    divergence_mode ``fd`` uses central differences with step fd_step;
    ``exact`` requires the score function to provide a divergence method.
    """

    method: str = "rk4"
    n_steps: int = 500
    fd_step: float = 1e-3
    divergence_mode: str = "fd"

    def __post_init__(self):
        if self.method not in ("rk4", "euler"):
            raise InvalidInput(f"IntegratorConfig: unknown method {self.method!r}")
        if self.n_steps < 10:
            raise InvalidInput("IntegratorConfig: n_steps must be >= 10")
        if not (0.0 < self.fd_step < 0.1):
            raise InvalidInput("IntegratorConfig: fd_step must lie in (0, 0.1)")
        if self.divergence_mode not in ("fd", "exact"):
            raise InvalidInput(
                f"IntegratorConfig: unknown divergence_mode {self.divergence_mode!r}"
            )


def likelihood_config(**overrides) -> IntegratorConfig:
    return IntegratorConfig(**{"method": "rk4", "n_steps": 500, **overrides})


def sampling_config(**overrides) -> IntegratorConfig:
    return IntegratorConfig(**{"method": "euler", "n_steps": 1000, **overrides})


def perturb(z0, t, schedule: NoiseSchedule, space: Space, rng: np.random.Generator):
    """Draw z_t ~ (wrapped) N(z0, sigma(t)^2 I).  t broadcasts over rows."""
    z0 = np.asarray(z0, dtype=float)
    if z0.shape[-1] != space.dim:
        raise InvalidInput("perturb: dimension mismatch with space")
    sigma = np.asarray(sigma_of_t(t, schedule), dtype=float)
    if sigma.ndim == 1:
        sigma = sigma[:, None]
    zt = z0 + sigma * rng.standard_normal(z0.shape)
    return wrap(zt) if space.is_torus else zt


def dsm_target(z0, zt, t, schedule: NoiseSchedule, space: Space):
    """Score of the perturbation kernel at zt, the regression target.

    R^n: -(zt - z0) / sigma(t)^2 from the plain difference.  T^n: the
    wrapped-normal score with the displacement wrapped into [-pi, pi).
    """
    from .spaces import _wn_score_from_delta, default_truncation

    z0 = np.asarray(z0, dtype=float)
    zt = np.asarray(zt, dtype=float)
    if z0.shape[-1] != space.dim or zt.shape[-1] != space.dim:
        raise InvalidInput("dsm_target: dimension mismatch with space")
    sigma = np.asarray(sigma_of_t(t, schedule), dtype=float)
    if sigma.ndim == 1:
        sigma = sigma[:, None]
    if space.is_torus:
        trunc = default_truncation(float(np.max(sigma)))
        return _wn_score_from_delta(wrap(zt - z0), sigma, trunc)
    return -(zt - z0) / np.square(sigma)


def divergence(score_fn, z, t: float, config: IntegratorConfig, space: Space):
    """Divergence of the score field at (z, t), shape (B,).

    The finite-difference path evaluates the score at 2n shifted copies of
    every row in a single call, so batched score functions amortize well.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise InvalidInput("divergence: z must have shape (B, n)")
    if config.divergence_mode == "exact":
        div_method = getattr(score_fn, "divergence", None)
        if div_method is None:
            raise InvalidInput(
                "divergence: exact mode needs a score function with a "
                "divergence(z, t) method"
            )
        div = np.asarray(div_method(z, t), dtype=float)
        if not np.all(np.isfinite(div)):
            raise NumericalFailure("divergence: non-finite score divergence")
        return div
    return _fd_divergence(score_fn, z, t, config.fd_step, space)


def _fd_divergence(score_fn, z, t, h, space):
    b, n = z.shape
    shifted = np.repeat(z[None, :, :], 2 * n, axis=0)
    for c in range(n):
        shifted[2 * c, :, c] += h
        shifted[2 * c + 1, :, c] -= h
    flat = shifted.reshape(2 * n * b, n)
    if space.is_torus:
        flat = wrap(flat)
    scores = np.asarray(score_fn(flat, t))
    if not np.all(np.isfinite(scores)):
        raise NumericalFailure("divergence: score function returned non-finite values")
    scores = scores.reshape(2 * n, b, n)
    div = np.zeros(b)
    for c in range(n):
        div += (scores[2 * c, :, c] - scores[2 * c + 1, :, c]) / (2.0 * h)
    return div


def _score_and_divergence(score_fn, z, t, config, space):
    """One batched evaluation of both the velocity ingredient and div s."""
    if config.divergence_mode == "exact":
        s = np.asarray(score_fn(z, t), dtype=float)
        if not np.all(np.isfinite(s)):
            raise NumericalFailure("score function returned non-finite values")
        return s, divergence(score_fn, z, t, config, space)
    b, n = z.shape
    h = config.fd_step
    stacked = np.repeat(z[None, :, :], 2 * n + 1, axis=0)
    for c in range(n):
        stacked[1 + 2 * c, :, c] += h
        stacked[2 + 2 * c, :, c] -= h
    flat = stacked.reshape((2 * n + 1) * b, n)
    if space.is_torus:
        flat = wrap(flat)
    out = np.asarray(score_fn(flat, t))
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("score function returned non-finite values")
    out = out.reshape(2 * n + 1, b, n)
    s = out[0]
    div = np.zeros(b)
    for c in range(n):
        div += (out[1 + 2 * c, :, c] - out[2 + 2 * c, :, c]) / (2.0 * h)
    return s, div


def prior_logpdf(z1, schedule: NoiseSchedule, space: Space):
    """Log density of the t = 1 reference: uniform on T^n, wide Gaussian on R^n."""
    z1 = np.asarray(z1, dtype=float)
    n = z1.shape[-1]
    if space.is_torus:
        return np.full(z1.shape[:-1], -n * math.log(2.0 * math.pi))
    var = schedule.sigma_max**2
    return -0.5 * np.sum(z1**2, axis=-1) / var - 0.5 * n * math.log(2.0 * math.pi * var)


def prob_flow_logpdf(score_fn, z0, schedule: NoiseSchedule, space: Space,
                     config: IntegratorConfig | None = None):
    """Log density of z0 under the score field, via the probability-flow ODE.

    Integrates states forward from t_min to 1 while accumulating the
    divergence integral with the same integrator stages.  Accepts (B, n)
    or a single point (n,); returns (B,) or a scalar to match.
    """
    if config is None:
        config = likelihood_config()
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim == 1
    z = np.atleast_2d(z0).copy()
    if not np.all(np.isfinite(z)):
        raise InvalidInput("prob_flow_logpdf: non-finite query point")
    if space.is_torus:
        z = wrap(z)

    t_grid = np.linspace(schedule.t_min, 1.0, config.n_steps + 1)
    acc = np.zeros(z.shape[0])

    def rate(zc, tc):
        s, div = _score_and_divergence(score_fn, zc, tc, config, space)
        half_g2 = 0.5 * float(g_of_t(tc, schedule)) ** 2
        return -half_g2 * s, half_g2 * div

    for i in range(config.n_steps):
        t0, t1 = t_grid[i], t_grid[i + 1]
        dt = t1 - t0
        if config.method == "euler":
            v1, u1 = rate(z, t0)
            z = z + dt * v1
            acc += dt * u1
        else:
            v1, u1 = rate(z, t0)
            v2, u2 = rate(z + 0.5 * dt * v1, t0 + 0.5 * dt)
            v3, u3 = rate(z + 0.5 * dt * v2, t0 + 0.5 * dt)
            v4, u4 = rate(z + dt * v3, t1)
            z = z + (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
            acc += (dt / 6.0) * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
        if space.is_torus:
            z = wrap(z)
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(acc))):
            raise NumericalFailure(
                f"prob_flow_logpdf: trajectory left finite range at step {i + 1} "
                f"of {config.n_steps}"
            )

    logp = prior_logpdf(z, schedule, space) - acc
    return float(logp[0]) if single else logp


def reverse_sde_sample(score_fn, n_samples: int, dim: int, schedule: NoiseSchedule,
                       space: Space, rng: np.random.Generator,
                       config: IntegratorConfig | None = None):
    """Draw samples by Euler-Maruyama integration of the reverse SDE.

    Starts from the t = 1 prior and steps down to t_min with
    z <- z + g^2 s dt + g sqrt(dt) eps.
    """
    if config is None:
        config = sampling_config()
    if n_samples < 1 or dim < 1:
        raise InvalidInput("reverse_sde_sample: n_samples and dim must be positive")
    if space.is_torus:
        z = rng.uniform(-math.pi, math.pi, size=(n_samples, dim))
    else:
        z = schedule.sigma_max * rng.standard_normal((n_samples, dim))

    t_grid = np.linspace(1.0, schedule.t_min, config.n_steps + 1)
    for i in range(config.n_steps):
        t = float(t_grid[i])
        dt = float(t_grid[i] - t_grid[i + 1])
        g = float(g_of_t(t, schedule))
        s = np.asarray(score_fn(z, t), dtype=float)
        z = z + (g * g) * s * dt + g * math.sqrt(dt) * rng.standard_normal(z.shape)
        if space.is_torus:
            z = wrap(z)
    if not np.all(np.isfinite(z)):
        raise NumericalFailure("reverse_sde_sample: non-finite state")
    return z
