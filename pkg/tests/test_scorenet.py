"""Score network: embeddings, DSM loss/gradients, training behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import scorefes.synthetic as syn
from scorefes.datasets import Dataset
from scorefes.diffusion import default_schedule, likelihood_config, prior_logpdf
from scorefes.errors import (
    ConfigError,
    EmptyDataset,
    InvalidInput,
    NonFiniteLoss,
    NonFiniteLossWarning,
    NumericalFailure,
)
from scorefes.scorenet import (
    ScoreModel,
    ScoreNetConfig,
    TrainConfig,
    _loss_and_grad_fixed,
    dsm_loss_and_grad,
    embed,
    init_model,
    mlp_spec_for,
    train,
    weighted_residual_loss,
)
from scorefes.spaces import (
    WrappedNormalParams,
    euclidean,
    torus,
    wn_sample,
    wrap,
)

SMALL_CFG = ScoreNetConfig(hidden_sizes=(8, 8), time_features=8, seed=0)


class TestEmbed:
    def test_torus_origin_starts_cos_sin(self):
        feats = embed(np.array([0.0]), 0.5, torus(1), SMALL_CFG)
        assert feats[0] == 1.0 and feats[1] == 0.0

    def test_feature_length(self):
        f_t = embed(np.zeros((3, 2)), 0.5, torus(2), SMALL_CFG)
        f_e = embed(np.zeros((3, 2)), 0.5, euclidean(2), SMALL_CFG)
        assert f_t.shape == (3, 2 * 2 + 8)
        assert f_e.shape == (3, 2 + 8)

    def test_wrap_invariance_bit_exact(self):
        z = np.array([[2.9, -3.1], [0.4, 1.0]])
        a = embed(z, 0.3, torus(2), SMALL_CFG)
        b = embed(wrap(z), 0.3, torus(2), SMALL_CFG)
        assert np.array_equal(a, b)

    def test_two_pi_shift_close(self):
        # adding 2*pi is not representable exactly, so exactness here means
        # float-rounding distance, not bitwise equality
        z = np.array([[0.7, -1.3]])
        a = embed(z, 0.3, torus(2), SMALL_CFG)
        b = embed(z + 2 * np.pi, 0.3, torus(2), SMALL_CFG)
        assert np.allclose(a, b, atol=1e-12, rtol=0)

    @given(st.floats(-50.0, 50.0), st.floats(0.05, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_wrap_invariance_property(self, z, t):
        a = embed(np.array([z]), t, torus(1), SMALL_CFG)
        b = embed(wrap(np.array([z])), t, torus(1), SMALL_CFG)
        assert np.array_equal(a, b)

    def test_euclidean_standardization_zeroes_mean(self):
        mean = np.array([3.0, -1.0])
        scale = np.array([2.0, 0.5])
        feats = embed(mean, 0.5, euclidean(2), SMALL_CFG, standardization=(mean, scale))
        assert np.array_equal(feats[:2], np.zeros(2))

    def test_time_features_bounded(self):
        feats = embed(np.zeros((5, 1)), 0.9, torus(1), SMALL_CFG)
        assert np.all(np.abs(feats[:, 2:]) <= 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            embed(np.zeros((3, 3)), 0.5, torus(2), SMALL_CFG)


class TestConfigs:
    def test_score_net_config_validation(self):
        with pytest.raises(ConfigError):
            ScoreNetConfig(hidden_sizes=())
        with pytest.raises(ConfigError):
            ScoreNetConfig(hidden_sizes=(0,))
        with pytest.raises(ConfigError):
            ScoreNetConfig(activation="relu")
        with pytest.raises(ConfigError):
            ScoreNetConfig(time_features=1)

    def test_train_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(t_min=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(t_min=0.2)
        with pytest.raises(ConfigError):
            TrainConfig(val_fraction=0.5)
        with pytest.raises(ConfigError):
            TrainConfig(loss_weighting="cosine")
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=-1.0)

    def test_t_min_boundary_allowed(self):
        TrainConfig(t_min=0.1)
        TrainConfig(val_fraction=0.0)


class TestScoreModel:
    def test_fresh_model_zero_score(self):
        model = init_model(torus(2), SMALL_CFG)
        z = np.random.default_rng(0).uniform(-np.pi, np.pi, (16, 2))
        assert np.array_equal(model(z, 0.5), np.zeros((16, 2)))

    def test_fresh_model_finite_bounded(self):
        cfg = ScoreNetConfig(hidden_sizes=(32, 32), time_features=16, seed=2)
        model = init_model(torus(3), cfg)
        z = np.random.default_rng(1).uniform(-np.pi, np.pi, (32, 3))
        s = model(z, 0.2)
        assert np.all(np.isfinite(s))

    def test_forward_periodicity_bit_exact(self):
        cfg = SMALL_CFG
        spec = mlp_spec_for(torus(2), cfg)
        params = np.random.default_rng(5).standard_normal(spec.n_params) * 0.3
        model = ScoreModel(params=params, config=cfg,
                           schedule=default_schedule(torus(2)), space=torus(2))
        z = np.array([[3.0, -3.1], [-0.2, 2.2]])
        assert np.array_equal(model(z, 0.4), model(wrap(z), 0.4))

    def test_param_count_checked(self):
        with pytest.raises(ConfigError):
            ScoreModel(params=np.zeros(3), config=SMALL_CFG,
                       schedule=default_schedule(torus(1)), space=torus(1))

    def test_standardization_torus_rejected(self):
        spec = mlp_spec_for(torus(1), SMALL_CFG)
        with pytest.raises(ConfigError):
            ScoreModel(params=np.zeros(spec.n_params), config=SMALL_CFG,
                       schedule=default_schedule(torus(1)), space=torus(1),
                       standardization=(np.zeros(1), np.ones(1)))

    def test_non_finite_output_raises(self):
        spec = mlp_spec_for(torus(1), SMALL_CFG)
        params = np.full(spec.n_params, np.nan)
        model = ScoreModel(params=params, config=SMALL_CFG,
                           schedule=default_schedule(torus(1)), space=torus(1))
        with pytest.raises(NumericalFailure):
            model(np.array([[0.0]]), 0.5)

    def test_zero_score_logpdf_torus_exact(self):
        model = init_model(torus(2), SMALL_CFG)
        z = np.array([[0.0, 1.0], [-3.0, 2.0]])
        lp = model.logpdf(z, config=likelihood_config(n_steps=16))
        assert np.array_equal(lp, np.full(2, -2.0 * np.log(2.0 * np.pi)))

    def test_zero_score_logpdf_euclidean_matches_prior(self):
        mean = np.array([2.0])
        scale = np.array([3.0])
        model = init_model(euclidean(1), SMALL_CFG, standardization=(mean, scale))
        z = np.array([[2.0], [5.0]])
        lp = model.logpdf(z, config=likelihood_config(n_steps=16))
        z_int = (z - mean) / scale
        expected = prior_logpdf(z_int, model.schedule, euclidean(1)) - np.log(scale).sum()
        assert np.allclose(lp, expected, rtol=1e-9)

    def test_sample_deterministic_and_wrapped(self):
        model = init_model(torus(2), SMALL_CFG)
        from scorefes.diffusion import sampling_config

        cfg = sampling_config(n_steps=20)
        a = model.sample(50, np.random.default_rng(3), config=cfg)
        b = model.sample(50, np.random.default_rng(3), config=cfg)
        assert np.array_equal(a, b)
        assert np.all((a >= -np.pi) & (a < np.pi))


class TestLossMachinery:
    def test_zero_residual_zero_loss(self):
        rng = np.random.default_rng(0)
        targets = rng.standard_normal((6, 2))
        sigma = rng.uniform(0.1, 1.0, 6)
        loss, grad = weighted_residual_loss(targets, targets, sigma, "sigma2")
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros((6, 2)))

    def test_weighting_matches_manual_expression(self):
        rng = np.random.default_rng(1)
        scores = rng.standard_normal((5, 3))
        targets = rng.standard_normal((5, 3))
        sigma = rng.uniform(0.2, 2.0, 5)
        for weighting, lam in ((None, np.ones(5)), ("sigma2", sigma**2)):
            loss, _ = weighted_residual_loss(scores, targets, sigma, weighting)
            manual = np.mean(lam * np.sum((scores - targets) ** 2, axis=1))
            assert np.isclose(loss, manual, rtol=1e-12)

    def test_init_weighted_loss_bounded_by_2n(self):
        # with the zeroed final layer the init loss is sigma^2 ||target||^2
        model = init_model(torus(2), SMALL_CFG)
        z = np.random.default_rng(2).uniform(-np.pi, np.pi, (256, 2))
        cfg = TrainConfig()
        losses = [dsm_loss_and_grad(model, z, np.random.default_rng(k), cfg)[0]
                  for k in range(20)]
        assert np.mean(losses) <= 2 * 2

    def test_gradcheck_through_dsm_loss(self):
        space = torus(2)
        cfg = ScoreNetConfig(hidden_sizes=(2,), time_features=4, seed=3)
        spec = mlp_spec_for(space, cfg)
        rng = np.random.default_rng(0)
        params = spec.init_params(3) + 0.05 * rng.standard_normal(spec.n_params)
        schedule = default_schedule(space)

        def loss_at(p):
            m = ScoreModel(params=p, config=cfg, schedule=schedule, space=space)
            return _loss_and_grad_fixed(m, z0, t, eps, tc)

        z0 = rng.uniform(-np.pi, np.pi, (8, 2))
        t = rng.uniform(1e-3, 1.0, 8)
        eps = rng.standard_normal((8, 2))
        tc = TrainConfig()
        _, grad = loss_at(params)
        h = 1e-6
        idx = np.random.default_rng(4).choice(spec.n_params, 10, replace=False)
        for i in idx:
            pp, pm = params.copy(), params.copy()
            pp[i] += h
            pm[i] -= h
            fd = (loss_at(pp)[0] - loss_at(pm)[0]) / (2 * h)
            assert abs(fd - grad[i]) <= 1e-4 * max(abs(fd), 1e-8)

    def test_non_finite_loss_raises(self):
        spec = mlp_spec_for(torus(1), SMALL_CFG)
        params = np.full(spec.n_params, 1e200)
        model = ScoreModel(params=params, config=SMALL_CFG,
                           schedule=default_schedule(torus(1)), space=torus(1))
        z = np.zeros((4, 1))
        with pytest.raises(NumericalFailure):
            dsm_loss_and_grad(model, z, np.random.default_rng(0), TrainConfig())

    def test_batch_dimension_mismatch(self):
        model = init_model(torus(2), SMALL_CFG)
        with pytest.raises(InvalidInput):
            dsm_loss_and_grad(model, np.zeros((4, 3)), np.random.default_rng(0),
                              TrainConfig())


def _wn_dataset(n, seed=5):
    wn = WrappedNormalParams.create(mean=[0.7], sigma=0.3)
    return Dataset(wn_sample(wn, np.random.default_rng(seed), n), torus(1)), wn


class TestTrain:
    def test_empty_dataset_unrepresentable(self):
        with pytest.raises(EmptyDataset):
            Dataset(np.zeros((0, 1)), torus(1))

    def test_deterministic_parameters(self):
        ds, _ = _wn_dataset(800)
        cfg = ScoreNetConfig(hidden_sizes=(16,), time_features=8, seed=1)
        tc = TrainConfig(n_epochs=3, batch_size=256, seed=2)
        a = train(ds, cfg, tc)
        b = train(ds, cfg, tc)
        assert np.array_equal(a.params, b.params)

    def test_history_records_best_epoch(self):
        ds, _ = _wn_dataset(800)
        cfg = ScoreNetConfig(hidden_sizes=(16,), time_features=8, seed=1)
        model = train(ds, cfg, TrainConfig(n_epochs=4, batch_size=256, seed=0))
        h = model.history
        assert len(h["train_loss"]) == len(h["val_loss"]) <= 4
        assert h["best_epoch"] == int(np.argmin(h["val_loss"]))
        assert h["best_val_loss"] == h["val_loss"][h["best_epoch"]]

    def test_val_fraction_zero_uses_train_loss(self):
        ds, _ = _wn_dataset(500)
        cfg = ScoreNetConfig(hidden_sizes=(8,), time_features=4, seed=0)
        model = train(ds, cfg, TrainConfig(n_epochs=3, batch_size=256,
                                           val_fraction=0.0, seed=0))
        h = model.history
        assert np.array_equal(h["train_loss"], h["val_loss"])

    def test_loss_decreases_first_five_epochs_on_benchmark(self):
        bm = syn.benchmark_suite("torus2", n_frames=200_000)
        cfg = ScoreNetConfig(hidden_sizes=(64, 64), time_features=32, seed=0)
        model = train(bm.dataset, cfg, TrainConfig(n_epochs=5, seed=0))
        tl = model.history["train_loss"]
        assert len(tl) == 5
        assert np.all(np.diff(tl) < 0)

    def test_trained_score_near_zero_at_mode(self):
        ds, wn = _wn_dataset(4000)
        cfg = ScoreNetConfig(hidden_sizes=(64, 64), time_features=32, seed=0)
        tc = TrainConfig(n_epochs=150, patience=40, batch_size=256, seed=1)
        model = train(ds, cfg, tc)
        s = model(np.array([[0.7]]), 1e-3)
        assert abs(float(s)) <= 0.1 / 0.3

    def test_abort_without_checkpoint_raises(self):
        ds, _ = _wn_dataset(512)
        cfg = ScoreNetConfig(hidden_sizes=(8, 8), time_features=8, seed=0)
        tc = TrainConfig(n_epochs=1, batch_size=256, learning_rate=1e200,
                         val_fraction=0.0, seed=0)
        with pytest.raises(NonFiniteLoss):
            train(ds, cfg, tc)

    def test_abort_with_checkpoint_warns(self):
        ds, _ = _wn_dataset(400)
        cfg = ScoreNetConfig(hidden_sizes=(8, 8), time_features=8, seed=0)
        tc = TrainConfig(n_epochs=3, batch_size=512, learning_rate=1e200,
                         val_fraction=0.0, seed=0)
        with pytest.warns(NonFiniteLossWarning):
            model = train(ds, cfg, tc)
        assert model.history["best_epoch"] == 0
        assert len(model.history["train_loss"]) == 1


class TestTrainedQuality:
    def test_uniform_data_yields_flat_logpdf(self):
        rng = np.random.default_rng(11)
        ds = Dataset(rng.uniform(-np.pi, np.pi, (32_000, 2)), torus(2))
        cfg = ScoreNetConfig(hidden_sizes=(32, 32), time_features=16, seed=1)
        tc = TrainConfig(n_epochs=12, patience=12, learning_rate=5e-4, seed=2)
        model = train(ds, cfg, tc)
        g = np.linspace(-np.pi, np.pi, 64, endpoint=False)
        gg = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        lp = model.logpdf(gg, config=likelihood_config(n_steps=64))
        assert np.max(np.abs(lp + 2.0 * np.log(2.0 * np.pi))) <= 0.05

    def test_doubling_data_does_not_raise_val_loss(self):
        dens = syn.gaussian_mixture(torus(1), [0.5, 0.5], [[-1.2], [1.6]],
                                    [[0.45], [0.45]])
        small, big = [], []
        for s in range(10):
            data = syn.mixture_sample(dens, 400, np.random.default_rng(100 + s))
            for n, acc in ((200, small), (400, big)):
                ds = Dataset(data[:n], torus(1))
                cfg = ScoreNetConfig(hidden_sizes=(64, 64), time_features=16, seed=s)
                tc = TrainConfig(n_epochs=60, patience=0, batch_size=32,
                                 val_fraction=0.25, seed=s)
                acc.append(train(ds, cfg, tc).history["best_val_loss"])
        assert np.median(big) <= np.median(small)

    def test_rotation_equivariance_of_logpdf(self):
        dens = syn.gaussian_mixture(torus(1), [0.55, 0.45], [[-1.5], [1.3]],
                                    [[0.65], [0.75]])
        data = syn.mixture_sample(dens, 8000, np.random.default_rng(7))
        c = 1.0
        cfg = ScoreNetConfig(hidden_sizes=(48, 48), time_features=32, seed=3)
        tc = TrainConfig(n_epochs=80, patience=0, batch_size=128, seed=4)
        m0 = train(Dataset(data, torus(1)), cfg, tc)
        m1 = train(Dataset(wrap(data + c), torus(1)), cfg, tc)
        g = np.linspace(-np.pi, np.pi, 64, endpoint=False)[:, None]
        icfg = likelihood_config(n_steps=64)
        lp0 = m0.logpdf(g, config=icfg)
        lp1 = m1.logpdf(wrap(g + c), config=icfg)
        assert np.median(np.abs(lp1 - lp0)) <= 0.1
