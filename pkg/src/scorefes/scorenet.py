"""Time-conditioned score network and its denoising training loop.

The network sees cos/sin coordinates on the torus (standardized coordinates
on R^n) plus sinusoidal features of log sigma(t), and outputs a raw tangent
vector that is divided by sigma(t) to give the score.  That division keeps
the regression target O(1) across all noise levels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .diffusion import (
    DEFAULT_T_MIN,
    IntegratorConfig,
    NoiseSchedule,
    default_schedule,
    dsm_target,
    likelihood_config,
    prob_flow_logpdf,
    reverse_sde_sample,
    sigma_of_t,
)
from .errors import (
    ConfigError,
    InvalidInput,
    NonFiniteLoss,
    NonFiniteLossWarning,
    NumericalFailure,
)
from .nets import Adam, MlpSpec, mlp_backward, mlp_forward, mlp_forward_cached
from .spaces import Space, wrap


@dataclass(frozen=True)
class ScoreNetConfig:
    """Architecture of the score MLP."""

    hidden_sizes: tuple = (256, 256, 256)
    time_features: int = 64
    activation: str = "silu"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if len(self.hidden_sizes) == 0 or any(h < 1 for h in self.hidden_sizes):
            raise ConfigError("ScoreNetConfig: hidden_sizes must be positive integers")
        if self.time_features < 2:
            raise ConfigError("ScoreNetConfig: need at least 2 time features")
        if self.activation != "silu":
            raise ConfigError(f"ScoreNetConfig: unknown activation {self.activation!r}")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for denoising score matching."""

    batch_size: int = 512
    n_epochs: int = 200
    learning_rate: float = 1e-3
    lr_decay: float = 1.0
    adam_betas: tuple = (0.9, 0.999)
    t_min: float = DEFAULT_T_MIN
    loss_weighting: str | None = "sigma2"
    val_fraction: float = 0.1
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.n_epochs < 1:
            raise ConfigError("TrainConfig: batch_size and n_epochs must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError("TrainConfig: lr_decay must lie in (0, 1]")
        if not 0.0 < self.t_min <= 0.1:
            raise ConfigError("TrainConfig: t_min must lie in (0, 0.1]")
        if self.loss_weighting not in (None, "sigma2"):
            raise ConfigError(f"TrainConfig: unknown loss_weighting {self.loss_weighting!r}")
        if not 0.0 <= self.val_fraction < 0.5:
            raise ConfigError("TrainConfig: val_fraction must lie in [0, 0.5)")
        if self.learning_rate <= 0:
            raise ConfigError("TrainConfig: learning_rate must be positive")
        if self.patience < 0:
            raise ConfigError("TrainConfig: patience must be >= 0")


def _time_feature_matrix(u, n_features: int) -> np.ndarray:
    """Sin/cos features of u in [0, 1]; frequencies spaced geometrically."""
    n_pairs = (n_features + 1) // 2
    freqs = np.exp(np.linspace(np.log(1.0), np.log(1000.0), n_pairs))
    phase = np.asarray(u, dtype=float)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)[:, :n_features]


def embed(z, t, space: Space, config: ScoreNetConfig, schedule: NoiseSchedule | None = None,
          standardization=None) -> np.ndarray:
    """Network input features for points z at diffusion time t.

    Torus: (cos z, sin z) with z wrapped first, so embed(z) == embed(wrap(z))
    bit-exactly.  Euclidean: (z - mean) / scale.  Both get sinusoidal features
    of log sigma(t), normalized by the schedule's log range, appended.
    """
    if schedule is None:
        schedule = default_schedule(space)
    z = np.asarray(z, dtype=float)
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    if z2.shape[1] != space.dim:
        raise InvalidInput(f"embed: expected {space.dim} coordinates, got {z2.shape[1]}")
    if space.is_torus:
        zw = wrap(z2)
        zfeats = np.concatenate([np.cos(zw), np.sin(zw)], axis=1)
    else:
        if standardization is not None:
            mean, scale = standardization
            z2 = (z2 - mean) / scale
        zfeats = z2
    sigma = np.asarray(sigma_of_t(t, schedule), dtype=float)
    u = (np.log(sigma) - np.log(schedule.sigma_min)) / schedule.log_ratio
    if u.ndim == 0:
        # one t for the whole batch: build a single feature row and tile it
        row = _time_feature_matrix(u[None], config.time_features)
        tfeats = np.broadcast_to(row, (z2.shape[0], config.time_features))
    else:
        tfeats = _time_feature_matrix(np.broadcast_to(u, (z2.shape[0],)),
                                      config.time_features)
    feats = np.concatenate([zfeats, tfeats], axis=1)
    return feats[0] if squeeze else feats


def _embed_dim(space: Space, config: ScoreNetConfig) -> int:
    zdim = 2 * space.dim if space.is_torus else space.dim
    return zdim + config.time_features


def mlp_spec_for(space: Space, config: ScoreNetConfig) -> MlpSpec:
    return MlpSpec((_embed_dim(space, config), *config.hidden_sizes, space.dim))


@dataclass(frozen=True, eq=False)
class ScoreModel:
    """A trained (or freshly initialized) score function s(z, t).

    standardization is a (mean, scale) pair on Euclidean spaces and None on
    the torus; history holds per-epoch losses when the model came out of
    train().
    """

    params: np.ndarray
    config: ScoreNetConfig
    schedule: NoiseSchedule
    space: Space
    standardization: tuple | None = None
    history: dict | None = None

    def __post_init__(self):
        spec = mlp_spec_for(self.space, self.config)
        params = np.asarray(self.params, dtype=float)
        if params.shape != (spec.n_params,):
            raise ConfigError(
                f"ScoreModel: expected {spec.n_params} parameters, got {params.shape}"
            )
        object.__setattr__(self, "params", params)
        if self.space.is_torus:
            if self.standardization is not None:
                raise ConfigError("ScoreModel: standardization is Euclidean-only")
        elif self.standardization is not None:
            mean = np.asarray(self.standardization[0], dtype=float)
            scale = np.asarray(self.standardization[1], dtype=float)
            if mean.shape != (self.space.dim,) or scale.shape != (self.space.dim,):
                raise ConfigError("ScoreModel: standardization shape mismatch")
            if np.any(scale <= 0):
                raise ConfigError("ScoreModel: standardization scales must be positive")
            object.__setattr__(self, "standardization", (mean, scale))

    @property
    def mlp_spec(self) -> MlpSpec:
        return mlp_spec_for(self.space, self.config)

    def _internal_score(self, z, t):
        """Score in internal coordinates (wrapped torus / standardized R^n)."""
        z2 = np.atleast_2d(np.asarray(z, dtype=float))
        feats = embed(z2, t, self.space, self.config, self.schedule)
        out = mlp_forward(self.mlp_spec, self.params, feats)
        sigma = np.asarray(sigma_of_t(t, self.schedule), dtype=float)
        sigma = sigma[:, None] if sigma.ndim == 1 else sigma
        return out / sigma

    def forward(self, z, t):
        """Score at original-coordinate points z; shape follows z."""
        z = np.asarray(z, dtype=float)
        squeeze = z.ndim == 1
        z2 = np.atleast_2d(z)
        if z2.shape[1] != self.space.dim:
            raise InvalidInput(f"forward: expected {self.space.dim} coordinates")
        if self.space.is_torus:
            s = self._internal_score(wrap(z2), t)
        elif self.standardization is None:
            s = self._internal_score(z2, t)
        else:
            mean, scale = self.standardization
            s = self._internal_score((z2 - mean) / scale, t) / scale
        if not np.all(np.isfinite(s)):
            raise NumericalFailure("ScoreModel.forward: non-finite score output")
        return s[0] if squeeze else s

    def __call__(self, z, t):
        return self.forward(z, t)

    def internal_field(self):
        """Callable (z, t) -> score in internal coordinates, for integrators."""
        return self._internal_score

    def _to_internal(self, z):
        if self.space.is_torus or self.standardization is None:
            return z
        mean, scale = self.standardization
        return (z - mean) / scale

    def _from_internal(self, z):
        if self.space.is_torus or self.standardization is None:
            return z
        mean, scale = self.standardization
        return mean + scale * z

    def logpdf(self, z, config: IntegratorConfig | None = None):
        """Exact model log-density via the probability-flow ODE."""
        if config is None:
            config = likelihood_config()
        z = np.asarray(z, dtype=float)
        lp = prob_flow_logpdf(
            self._internal_score, self._to_internal(z), self.schedule, self.space,
            config=config,
        )
        if self.standardization is not None:
            lp = lp - np.sum(np.log(self.standardization[1]))
        return lp

    def sample(self, n_samples: int, rng: np.random.Generator,
               config: IntegratorConfig | None = None) -> np.ndarray:
        """Draw model samples by integrating the reverse SDE."""
        z = reverse_sde_sample(
            self._internal_score, n_samples, self.space.dim, self.schedule,
            self.space, rng, config=config,
        )
        return self._from_internal(z)


def forward(model: ScoreModel, z, t):
    return model.forward(z, t)


def init_model(space: Space, config: ScoreNetConfig | None = None,
               schedule: NoiseSchedule | None = None,
               standardization=None) -> ScoreModel:
    """Freshly initialized model; the zeroed final layer makes s(z, t) == 0."""
    if config is None:
        config = ScoreNetConfig()
    if schedule is None:
        schedule = default_schedule(space)
    spec = mlp_spec_for(space, config)
    return ScoreModel(
        params=spec.init_params(config.seed), config=config, schedule=schedule,
        space=space, standardization=standardization,
    )


def weighted_residual_loss(scores, targets, sigma, weighting):
    """Mean over rows of lambda(t) * ||score - target||^2, plus its gradient.

    Returns (loss, dloss/dscores).  weighting "sigma2" sets lambda = sigma^2,
    None sets lambda = 1.
    """
    scores = np.asarray(scores, dtype=float)
    targets = np.asarray(targets, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lam = np.square(sigma) if weighting == "sigma2" else np.ones_like(sigma)
    resid = scores - targets
    n_rows = scores.shape[0]
    # overflow here is caught by the caller's finiteness check
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.sum(lam * np.sum(np.square(resid), axis=1)) / n_rows)
        dscores = (2.0 / n_rows) * lam[:, None] * resid
    return loss, dscores


def dsm_loss_and_grad(model: ScoreModel, batch, rng: np.random.Generator,
                      train_cfg: TrainConfig):
    """Denoising score-matching loss and flat parameter gradient on one batch.

    Times are uniform on [t_min, 1]; the perturbation-kernel scores are
    constants, so the gradient flows through the network only.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[1] != model.space.dim:
        raise InvalidInput("dsm_loss_and_grad: batch dimension mismatch")
    z0 = model._to_internal(batch)
    n_rows = z0.shape[0]
    t = rng.uniform(train_cfg.t_min, 1.0, size=n_rows)
    eps = rng.standard_normal(z0.shape)
    return _loss_and_grad_fixed(model, z0, t, eps, train_cfg)


def _loss_and_grad_fixed(model: ScoreModel, z0, t, eps, train_cfg: TrainConfig):
    """DSM loss/grad with the (t, noise) draws supplied by the caller."""
    sigma = np.asarray(sigma_of_t(t, model.schedule), dtype=float)
    zt = z0 + sigma[:, None] * eps
    if model.space.is_torus:
        zt = wrap(zt)
    target = dsm_target(z0, zt, t, model.schedule, model.space)
    feats = embed(zt, t, model.space, model.config, model.schedule)
    spec = model.mlp_spec
    out, cache = mlp_forward_cached(spec, model.params, feats)
    scores = out / sigma[:, None]
    loss, dscores = weighted_residual_loss(scores, target, sigma, train_cfg.loss_weighting)
    if not np.isfinite(loss):
        raise NumericalFailure("dsm loss is non-finite")
    grad = mlp_backward(spec, model.params, cache, dscores / sigma[:, None])
    return loss, grad


def _validation_loss(model: ScoreModel, params, z0, t, eps, train_cfg) -> float:
    """Loss on frozen validation draws, at candidate parameters."""
    probe = ScoreModel(
        params=params, config=model.config, schedule=model.schedule,
        space=model.space, standardization=model.standardization,
    )
    loss, _ = _loss_and_grad_fixed(probe, z0, t, eps, train_cfg)
    return loss


def train(dataset: Dataset, net_config: ScoreNetConfig | None = None,
          train_config: TrainConfig | None = None,
          schedule: NoiseSchedule | None = None) -> ScoreModel:
    """Fit a score model by denoising score matching.

    Deterministic for fixed seeds, data, and configs.  Keeps the parameters
    with the best validation loss (training loss when val_fraction is 0) and
    stops early after `patience` epochs without improvement.  A non-finite
    batch loss aborts the loop: the best checkpoint so far is returned with a
    warning, or NonFiniteLoss is raised if none exists.
    """
    if net_config is None:
        net_config = ScoreNetConfig()
    if train_config is None:
        train_config = TrainConfig()
    if schedule is None:
        schedule = default_schedule(dataset.space)

    samples = dataset.samples
    standardization = None
    if not dataset.space.is_torus:
        std = samples.std(axis=0)
        standardization = (samples.mean(axis=0), np.where(std > 0, std, 1.0))

    model = init_model(dataset.space, net_config, schedule, standardization)
    z_all = model._to_internal(samples)

    rng = np.random.default_rng(train_config.seed)
    n_frames = z_all.shape[0]
    n_val = int(round(train_config.val_fraction * n_frames))
    order = rng.permutation(n_frames)
    z_val, z_train = z_all[order[:n_val]], z_all[order[n_val:]]
    if z_train.shape[0] == 0:
        raise InvalidInput("train: validation split leaves no training frames")
    # Frozen validation draws keep the per-epoch losses comparable.
    t_val = rng.uniform(train_config.t_min, 1.0, size=z_val.shape[0])
    eps_val = rng.standard_normal(z_val.shape)

    opt = Adam(
        model.mlp_spec.n_params, learning_rate=train_config.learning_rate,
        beta1=train_config.adam_betas[0], beta2=train_config.adam_betas[1],
    )
    params = model.params.copy()
    best_params = params.copy()
    best_val = np.inf
    best_epoch = -1
    train_hist, val_hist = [], []
    stall = 0
    aborted = False

    for epoch in range(train_config.n_epochs):
        opt.learning_rate = train_config.learning_rate * train_config.lr_decay**epoch
        perm = rng.permutation(z_train.shape[0])
        batch_losses = []
        try:
            for start in range(0, z_train.shape[0], train_config.batch_size):
                batch = z_train[perm[start:start + train_config.batch_size]]
                work = ScoreModel(
                    params=params, config=net_config, schedule=schedule,
                    space=dataset.space, standardization=standardization,
                )
                t = rng.uniform(train_config.t_min, 1.0, size=batch.shape[0])
                eps = rng.standard_normal(batch.shape)
                loss, grad = _loss_and_grad_fixed(work, batch, t, eps, train_config)
                params = opt.step(params, grad)
                batch_losses.append(loss)
            train_loss = float(np.mean(batch_losses))
            if n_val > 0:
                val_loss = _validation_loss(model, params, z_val, t_val, eps_val, train_config)
            else:
                val_loss = train_loss
        except NumericalFailure:
            aborted = True
        if aborted:
            if best_epoch < 0:
                raise NonFiniteLoss(
                    f"train: non-finite loss in epoch {epoch + 1} with no checkpoint"
                )
            warnings.warn(
                f"train: non-finite loss in epoch {epoch + 1}; "
                f"returning checkpoint from epoch {best_epoch + 1}",
                NonFiniteLossWarning,
            )
            break
        train_hist.append(train_loss)
        val_hist.append(val_loss)
        if val_loss < best_val:
            best_val, best_epoch, stall = val_loss, epoch, 0
            best_params = params.copy()
        else:
            stall += 1
            if train_config.patience and stall >= train_config.patience:
                break

    history = {
        "train_loss": np.asarray(train_hist),
        "val_loss": np.asarray(val_hist),
        "best_epoch": best_epoch,
        "best_val_loss": float(best_val),
    }
    return ScoreModel(
        params=best_params, config=net_config, schedule=schedule,
        space=dataset.space, standardization=standardization, history=history,
    )
