"""Command-line pipeline: train, estimate, unbias, and report.

Every command resolves one flat configuration (defaults < config file <
flags), writes its artifacts into ``output_dir``, and drops a resolved-config
snapshot there so a run can be repeated exactly.  All numeric output is
written with full-precision repr, which makes repeated runs byte-identical.

Exit codes: 0 success, 2 configuration problem, 3 data problem,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .baselines import GmmModel, KdeModel, gmm_fit, gmm_select_k, kde_fit
from .config import CONFIG_ENTRIES, describe_config, resolve_config, write_snapshot
from .datasets import Dataset, _parse_meta, read_dataset_csv, write_dataset_csv
from .diffusion import (
    IntegratorConfig,
    NoiseSchedule,
    default_schedule,
    prob_flow_logpdf,
    reverse_sde_sample,
    sampling_config,
)
from .errors import ConfigError, DataError, InvalidInput, NumericalFailure
from .idim import twonn_estimate
from .modelio import load_model, save_model
from .scorenet import ScoreModel, ScoreNetConfig, TrainConfig, train
from .spaces import Space, wrap
from .svgplot import svg_heatmap, svg_line_plot
from .synthetic import benchmark_suite, toy_unbias_experiment
from .unbias import (
    FESGrid,
    TemperatureSpec,
    bootstrap_errorbars,
    compute_weights,
    coordinate_feature,
    cos_feature,
    pair_feature,
    sin_feature,
    weighted_feature_distribution,
)

__all__ = ["main"]


def _meta_line(**tokens) -> str:
    parts = [f"scorefes={__version__}"] + [f"{k}={v}" for k, v in tokens.items()]
    return "# " + " ".join(parts)


# ---------------------------------------------------------------------------
# FESGrid CSV round trip

def write_fes_csv(grid: FESGrid, path: str) -> None:
    """One row per bin, mesh-ordered (first axis slowest), edges as lo/hi."""
    naxes = len(grid.axes)
    shape = "x".join(str(len(ax) - 1) for ax in grid.axes)
    header = _meta_line(kind="fes", units=grid.units, shape=shape,
                        features=",".join(grid.feature_names))
    columns = []
    for k in range(naxes):
        columns += [f"axis{k + 1}_lo", f"axis{k + 1}_hi"]
    columns += ["free_energy", "probability", "counts"]
    if grid.stderr is not None:
        columns.append("stderr")

    bins = [len(ax) - 1 for ax in grid.axes]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        fh.write(",".join(columns) + "\n")
        for flat in range(int(np.prod(bins))):
            idx = np.unravel_index(flat, bins)
            row = []
            for k in range(naxes):
                row += [repr(float(grid.axes[k][idx[k]])),
                        repr(float(grid.axes[k][idx[k] + 1]))]
            row += [repr(float(grid.free_energy[idx])),
                    repr(float(grid.probability[idx])),
                    repr(float(grid.counts[idx]))]
            if grid.stderr is not None:
                row.append(repr(float(grid.stderr[idx])))
            fh.write(",".join(row) + "\n")


def read_fes_csv(path: str) -> FESGrid:
    if not os.path.exists(path):
        raise DataError(f"FES file not found: {path}")
    meta = {}
    body = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                meta.update(_parse_meta(line))
            elif line.strip():
                body.append(line)
    if meta.get("kind") != "fes" or "shape" not in meta or not body:
        raise DataError(f"{path} is not a FES grid CSV")
    bins = [int(b) for b in str(meta["shape"]).split("x")]
    naxes = len(bins)
    columns = body[0].split(",")
    expected = []
    for k in range(naxes):
        expected += [f"axis{k + 1}_lo", f"axis{k + 1}_hi"]
    expected += ["free_energy", "probability", "counts"]
    has_stderr = columns == expected + ["stderr"]
    if not has_stderr and columns != expected:
        raise DataError(f"{path}: unexpected columns {columns}")

    rows = np.empty((len(body) - 1, len(columns)))
    for i, line in enumerate(body[1:]):
        parts = line.split(",")
        if len(parts) != len(columns):
            raise DataError(f"{path}: row {i + 1} has {len(parts)} fields")
        rows[i] = [float(p) for p in parts]
    if rows.shape[0] != int(np.prod(bins)):
        raise DataError(f"{path}: {rows.shape[0]} rows but shape says {bins}")

    axes = []
    for k in range(naxes):
        lo = rows[:, 2 * k].reshape(bins)
        hi = rows[:, 2 * k + 1].reshape(bins)
        take = tuple(slice(None) if j == k else 0 for j in range(naxes))
        axes.append(np.append(lo[take], hi[take][-1]))
    fes = rows[:, 2 * naxes].reshape(bins)
    prob = rows[:, 2 * naxes + 1].reshape(bins)
    counts = rows[:, 2 * naxes + 2].reshape(bins)
    stderr = rows[:, 2 * naxes + 3].reshape(bins) if has_stderr else None
    names = tuple(str(meta.get("features", "")).split(","))
    return FESGrid(axes=tuple(axes), free_energy=fes, probability=prob, counts=counts,
                   feature_names=names, units=str(meta.get("units", "kB*T")),
                   stderr=stderr)


# ---------------------------------------------------------------------------
# Shared argument plumbing

def _coord_index(token: str, dim: int) -> int:
    if not token.startswith("z"):
        raise ConfigError(f"feature spec: expected zK, got {token!r}")
    try:
        k = int(token[1:])
    except ValueError:
        raise ConfigError(f"feature spec: expected zK, got {token!r}") from None
    if not 1 <= k <= dim:
        raise ConfigError(f"feature spec {token!r}: index out of range for dim {dim}")
    return k - 1


def parse_feature_spec(spec: str, dim: int):
    """zK | cos:zK | sin:zK | pair:zA:zB."""
    spec = spec.strip()
    if ":" not in spec:
        return coordinate_feature(_coord_index(spec, dim))
    head, _, rest = spec.partition(":")
    if head == "cos":
        return cos_feature(_coord_index(rest, dim))
    if head == "sin":
        return sin_feature(_coord_index(rest, dim))
    if head == "pair":
        parts = rest.split(":")
        if len(parts) != 2:
            raise ConfigError(f"feature spec {spec!r}: pair takes exactly two coordinates")
        return pair_feature(coordinate_feature(_coord_index(parts[0], dim)),
                            coordinate_feature(_coord_index(parts[1], dim)))
    raise ConfigError(f"unknown feature spec {spec!r}")


def _parse_grid_axes(spec: str, space: Space | None, dim: int) -> tuple:
    """Cell-center nodes per axis, plus each axis's covered length."""
    tokens = [t.strip() for t in spec.split(",") if t.strip()]
    if len(tokens) == 1:
        tokens = tokens * dim
    if len(tokens) != dim:
        raise ConfigError(f"grid spec {spec!r}: expected {dim} axes, got {len(tokens)}")
    nodes = []
    spans = []
    for token in tokens:
        if ":" in token:
            parts = token.split(":")
            if len(parts) != 3:
                raise ConfigError(f"grid axis {token!r}: expected lo:hi:n")
            try:
                lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigError(f"grid axis {token!r}: expected lo:hi:n") from None
        else:
            if space is None or not space.is_torus:
                raise ConfigError(
                    f"grid axis {token!r}: bare node counts need a torus model; "
                    "use lo:hi:n"
                )
            try:
                n = int(token)
            except ValueError:
                raise ConfigError(f"grid axis {token!r}: expected a node count") from None
            lo, hi = -np.pi, np.pi
        if n < 1 or hi <= lo:
            raise ConfigError(f"grid axis {token!r}: need n >= 1 and hi > lo")
        # Cell centers of n equal bins, so mean(p) * volume estimates mass.
        nodes.append(lo + (np.arange(n) + 0.5) * (hi - lo) / n)
        spans.append(hi - lo)
    return nodes, spans


def _model_space(model) -> Space | None:
    return model.space if isinstance(model, (ScoreModel, KdeModel)) else None


def _model_dim(model) -> int:
    if isinstance(model, GmmModel):
        return model.dim
    return model.space.dim


def _check_model_matches(model, space: Space) -> None:
    mspace = _model_space(model)
    if mspace is not None and mspace != space:
        raise ConfigError(
            f"model space {mspace.kind}/{mspace.dim} does not match "
            f"data space {space.kind}/{space.dim}"
        )
    if mspace is None and _model_dim(model) != space.dim:
        raise ConfigError(
            f"model dim {_model_dim(model)} does not match data dim {space.dim}"
        )


def _model_logpdf(model, points: np.ndarray, cfg: dict) -> np.ndarray:
    if isinstance(model, ScoreModel):
        icfg = IntegratorConfig(method=cfg["integrator"], n_steps=cfg["n_steps"],
                                fd_step=cfg["fd_step"])
        return np.atleast_1d(prob_flow_logpdf(model.forward, points, model.schedule,
                                              model.space, config=icfg))
    return np.atleast_1d(model.logpdf(points))


def _resolve_temps(cfg: dict, meta: dict) -> TemperatureSpec:
    # 0 in the config means "take the dataset header value, else the default".
    t = cfg["temperature"] or float(meta.get("T", 1.0))
    t_h = cfg["high_temperature"] or float(meta.get("T_h", t))
    kb = cfg["kb"] or float(meta.get("kB", 1.0))
    return TemperatureSpec(temperature=t, high_temperature=t_h, boltzmann=kb)


def _require(cfg: dict, key: str) -> str:
    if not cfg[key]:
        raise ConfigError(f"config key {key!r} is required for this command")
    return cfg[key]


def _prepare_outdir(cfg: dict) -> str:
    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    write_snapshot(cfg, outdir)
    return outdir


def _load_dataset(cfg: dict) -> Dataset:
    return read_dataset_csv(_require(cfg, "dataset"))


def _fes_filename(feature_name: str) -> str:
    safe = feature_name.replace(",", "_").replace(":", "_")
    return f"fes_{safe}.csv"


# ---------------------------------------------------------------------------
# Commands

def cmd_train(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    outdir = _prepare_outdir(cfg)
    sigma_max = cfg["sigma_max"] or default_schedule(dataset.space).sigma_max
    schedule = NoiseSchedule(sigma_min=cfg["sigma_min"], sigma_max=sigma_max,
                             t_min=cfg["t_min"])
    net_config = ScoreNetConfig(hidden_sizes=cfg["hidden_sizes"],
                                time_features=cfg["time_features"],
                                activation=cfg["activation"], seed=cfg["seed"])
    train_config = TrainConfig(
        batch_size=cfg["batch_size"], n_epochs=cfg["n_epochs"],
        learning_rate=cfg["learning_rate"], lr_decay=cfg["lr_decay"],
        t_min=cfg["t_min"],
        loss_weighting=None if cfg["loss_weighting"] == "none" else cfg["loss_weighting"],
        val_fraction=cfg["val_fraction"], patience=cfg["patience"], seed=cfg["seed"],
    )
    model = train(dataset, net_config, train_config, schedule)

    model_path = os.path.join(outdir, "model.json")
    save_model(model, model_path)
    history = model.history
    with open(os.path.join(outdir, "loss_history.csv"), "w") as fh:
        fh.write(_meta_line(kind="loss_history") + "\n")
        fh.write("epoch,train_loss,val_loss\n")
        for i, (tr, vl) in enumerate(zip(history["train_loss"], history["val_loss"])):
            fh.write(f"{i},{float(tr)!r},{float(vl)!r}\n")
    print(f"trained {len(history['train_loss'])} epochs; "
          f"final train loss {float(history['train_loss'][-1])!r}, "
          f"best val loss {history['best_val_loss']!r} "
          f"at epoch {history['best_epoch']}")
    print(f"model written to {model_path}")
    return 0


def cmd_logpdf(cfg: dict, args) -> int:
    model = load_model(_require(cfg, "model"))
    outdir = _prepare_outdir(cfg)
    if bool(cfg["queries"]) == bool(cfg["grid"]):
        raise ConfigError("logpdf needs exactly one of --queries or --grid")

    grid_volume = None
    if cfg["queries"]:
        ds = read_dataset_csv(cfg["queries"])
        _check_model_matches(model, ds.space)
        points = ds.samples
        dim = ds.dim
    else:
        space = _model_space(model)
        dim = _model_dim(model)
        nodes, spans = _parse_grid_axes(cfg["grid"], space, dim)
        mesh = np.meshgrid(*nodes, indexing="ij")
        points = np.column_stack([m.ravel() for m in mesh])
        grid_volume = float(np.prod(spans))

    logp = _model_logpdf(model, points, cfg)
    out_path = os.path.join(outdir, "logpdf.csv")
    with open(out_path, "w") as fh:
        fh.write(_meta_line(kind="logpdf", dim=dim) + "\n")
        fh.write(",".join([f"z{c + 1}" for c in range(dim)] + ["log_pdf"]) + "\n")
        for row, lp in zip(points, logp):
            fh.write(",".join(repr(float(v)) for v in row) + f",{float(lp)!r}\n")
    print(f"{points.shape[0]} rows written to {out_path}")
    if grid_volume is not None:
        mass = float(np.mean(np.exp(logp)) * grid_volume)
        print(f"grid mass estimate: {mass!r}")
    return 0


def cmd_sample(cfg: dict, args) -> int:
    model = load_model(_require(cfg, "model"))
    if not isinstance(model, ScoreModel):
        raise ConfigError("sampling requires a score model container")
    outdir = _prepare_outdir(cfg)
    rng = np.random.default_rng(cfg["seed"])
    # The reverse SDE runs in the model's internal coordinates (wrapped
    # angles / standardized R^n), then maps back.
    z = reverse_sde_sample(model._internal_score, cfg["n_samples"], model.space.dim,
                           model.schedule, model.space, rng,
                           sampling_config(n_steps=cfg["n_steps"]))
    if model.space.is_torus:
        samples = wrap(z)
    elif model.standardization is not None:
        mean, scale = model.standardization
        samples = z * scale + mean
    else:
        samples = z
    ds = Dataset(samples=samples, space=model.space,
                 meta={"generator": "reverse_sde", "seed": cfg["seed"],
                       "n_steps": cfg["n_steps"]})
    out_path = os.path.join(outdir, "samples.csv")
    write_dataset_csv(ds, out_path)
    print(f"{cfg['n_samples']} samples written to {out_path}")
    return 0


def cmd_unbias(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    outdir = _prepare_outdir(cfg)
    temps = _resolve_temps(cfg, dataset.meta)

    if cfg["model"]:
        model = load_model(cfg["model"])
        _check_model_matches(model, dataset.space)
        est_name = {ScoreModel: "sbdm", KdeModel: "kde", GmmModel: "gmm"}[type(model)]
    elif cfg["estimator"] == "kde":
        bandwidth = cfg["kde_bandwidth"] or None
        model = kde_fit(dataset.samples, dataset.space, bandwidth=bandwidth)
        est_name = "kde"
    elif cfg["estimator"] == "gmm":
        if cfg["gmm_components"] > 0:
            model = gmm_fit(dataset.samples, cfg["gmm_components"], seed=cfg["seed"])
        else:
            model = gmm_select_k(dataset.samples, cfg["gmm_k_max"],
                                 seed=cfg["seed"]).best_model
        est_name = "gmm"
    else:
        raise ConfigError(
            "estimator=sbdm needs a trained model: pass --model MODEL_FILE"
        )

    logp = _model_logpdf(model, dataset.samples, cfg)
    ensemble = compute_weights(logp, temps, frames=dataset)

    weights_path = os.path.join(outdir, "weights.csv")
    with open(weights_path, "w") as fh:
        fh.write(_meta_line(kind="weights", estimator=est_name, ess=repr(ensemble.ess),
                            T=repr(temps.temperature), T_h=repr(temps.high_temperature),
                            kB=repr(temps.boltzmann)) + "\n")
        fh.write("log_weight,normalized_weight\n")
        for lw, w in zip(ensemble.log_weights, ensemble.normalized_weights):
            fh.write(f"{float(lw)!r},{float(w)!r}\n")

    max_frac = float(np.max(ensemble.normalized_weights))
    print(f"estimator={est_name} frames={dataset.n_frames} "
          f"ESS={ensemble.ess:.1f} max_weight_fraction={max_frac:.3e}")
    if ensemble.ess < 50.0:
        print(
            f"WARNING: effective sample size {ensemble.ess:.1f} < 50; the surface "
            "rests on a handful of frames. Lower T_h/T, add frames, or smooth "
            "the density estimate.",
            file=sys.stderr,
        )

    rng = np.random.default_rng(cfg["seed"])
    for spec in str(cfg["features"]).split(","):
        # pair specs contain ':' only, so comma-splitting is safe
        if not spec.strip():
            continue
        feature = parse_feature_spec(spec, dataset.dim)
        grid = weighted_feature_distribution(ensemble, feature, cfg["bins"], temps=temps)
        if cfg["n_boot"] > 0:
            stderr = bootstrap_errorbars(ensemble, feature, cfg["bins"],
                                         cfg["n_boot"], rng)
            grid = dataclasses.replace(grid, stderr=stderr)
        path = os.path.join(outdir, _fes_filename(feature.name))
        write_fes_csv(grid, path)
        print(f"feature {feature.name}: FES written to {path}")
    return 0


def _plot_grid(grid: FESGrid, title: str) -> str:
    units = grid.units
    if len(grid.axes) == 1:
        centers = grid.centers[0]
        curves = [(f"A ({units})", grid.free_energy)]
        if grid.stderr is not None:
            curves.append(("A + err", grid.free_energy + grid.stderr, "dashed"))
            curves.append(("A - err", grid.free_energy - grid.stderr, "dashed"))
        return svg_line_plot(centers, curves, title=title,
                             xlabel=grid.feature_names[0], ylabel=f"A ({units})",
                             mark_min=True)
    finite = grid.free_energy[np.isfinite(grid.free_energy)]
    levels = None
    if finite.size:
        top = float(finite.max())
        if top > 0:
            levels = np.linspace(0.0, top, 8)[1:-1]
    return svg_heatmap(grid.axes[0], grid.axes[1], grid.free_energy, title=title,
                       xlabel=grid.feature_names[0], ylabel=grid.feature_names[1],
                       contour_levels=levels, value_label=units)


def cmd_report(cfg: dict, args) -> int:
    outdir = _prepare_outdir(cfg)
    grids = []
    for path in args.grids:
        grid = read_fes_csv(path)
        if len(grid.axes) not in (1, 2):
            raise DataError(f"{path}: can only plot 1- or 2-axis grids")
        grids.append((path, grid))

    used = set()
    for path, grid in grids:
        stem = os.path.splitext(os.path.basename(path))[0]
        name = stem
        k = 2
        while name in used:
            name = f"{stem}_{k}"
            k += 1
        used.add(name)
        out_path = os.path.join(outdir, f"{name}.svg")
        with open(out_path, "w") as fh:
            fh.write(_plot_grid(grid, title=stem))
        print(f"plot written to {out_path}")

    if args.diff:
        if len(grids) != 2:
            raise ConfigError("--diff needs exactly two FES grids")
        (path_a, a), (path_b, b) = grids
        if len(a.axes) != len(b.axes) or any(
            not np.array_equal(ax, bx) for ax, bx in zip(a.axes, b.axes)
        ):
            raise ConfigError(
                f"cannot difference {path_a} and {path_b}: axes do not match"
            )
        diff = np.abs(a.free_energy - b.free_energy)
        # NaN wherever either grid is empty, rendered blank.
        diff = np.where(np.isfinite(a.free_energy) & np.isfinite(b.free_energy),
                        diff, np.nan)
        out_path = os.path.join(outdir, "diff.svg")
        title = "|A1 - A2|"
        if len(a.axes) == 1:
            svg = svg_line_plot(a.centers[0], [(title, diff)], title=title,
                                xlabel=a.feature_names[0], ylabel=f"|dA| ({a.units})")
        else:
            svg = svg_heatmap(a.axes[0], a.axes[1], diff, title=title,
                              xlabel=a.feature_names[0], ylabel=a.feature_names[1],
                              value_label=a.units)
        with open(out_path, "w") as fh:
            fh.write(svg)
        print(f"difference plot written to {out_path}")
    return 0


def cmd_idim(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    outdir = _prepare_outdir(cfg)
    if dataset.n_frames < 100:
        raise DataError(
            f"dimension estimate needs at least 100 frames, got {dataset.n_frames}"
        )
    result = twonn_estimate(dataset.samples, dataset.space,
                            discard_fraction=cfg["discard_fraction"])
    print(f"d_hat={result.d_hat!r} n_used={result.n_used} "
          f"fit_residual={result.fit_residual!r} metric={result.metric}")
    fit_path = cfg["fit_csv"] or os.path.join(outdir, "idim_fit.csv")
    log_mu, neg_log = result.fit_coordinates()
    with open(fit_path, "w") as fh:
        fh.write(_meta_line(kind="idim_fit", metric=result.metric,
                            d_hat=repr(result.d_hat)) + "\n")
        fh.write("log_mu,neg_log_1mF\n")
        for x, y in zip(log_mu, neg_log):
            fh.write(f"{float(x)!r},{float(y)!r}\n")
    print(f"fit points written to {fit_path}")
    return 0


def cmd_toy(cfg: dict, args) -> int:
    outdir = _prepare_outdir(cfg)
    result = toy_unbias_experiment(list(cfg["kbt_h"]), cfg["kernel_sigma"])
    x = result.grid.points()[:, 0]

    curve_path = os.path.join(outdir, "toy_curves.csv")
    labels = [f"recovered_kbt_{curve.kbt_h:g}" for curve in result.curves]
    with open(curve_path, "w") as fh:
        fh.write(_meta_line(kind="toy_curves",
                            kernel_sigma=repr(cfg["kernel_sigma"])) + "\n")
        fh.write(",".join(["x", "ground_truth"] + labels) + "\n")
        for i in range(x.size):
            row = [repr(float(x[i])), repr(float(result.ground_truth[i]))]
            row += [repr(float(curve.recovered[i])) for curve in result.curves]
            fh.write(",".join(row) + "\n")

    table_path = os.path.join(outdir, "toy_l1.csv")
    with open(table_path, "w") as fh:
        fh.write(_meta_line(kind="toy_l1") + "\n")
        fh.write("kbt_h,l1_error\n")
        for curve in result.curves:
            fh.write(f"{curve.kbt_h!r},{curve.l1_error!r}\n")
            print(f"kB*T_h={curve.kbt_h:g}: L1 error {curve.l1_error!r}")

    curves = [("ground truth", result.ground_truth, "dashed")]
    curves += [(f"kB*T_h={curve.kbt_h:g}", curve.recovered) for curve in result.curves]
    svg_path = os.path.join(outdir, "toy.svg")
    with open(svg_path, "w") as fh:
        fh.write(svg_line_plot(x, curves, title="recovered base-temperature density",
                               xlabel="z", ylabel="p(z)"))
    print(f"toy outputs written to {outdir}")
    return 0


def cmd_synth(cfg: dict, args) -> int:
    outdir = _prepare_outdir(cfg)
    bench = benchmark_suite(cfg["benchmark"], n_frames=cfg["n_frames"], seed=cfg["seed"])
    dataset = bench.dataset
    dataset.meta.update({
        "T_h": bench.temps.high_temperature,
        "T": bench.temps.temperature,
        "kB": bench.temps.boltzmann,
    })
    data_path = os.path.join(outdir, f"{bench.name}_dataset.csv")
    write_dataset_csv(dataset, data_path)

    truth = {
        "benchmark": bench.name,
        "space": {"kind": bench.space.kind, "dim": bench.space.dim},
        "temperature": bench.temps.temperature,
        "high_temperature": bench.temps.high_temperature,
        "mixture": {
            "weights": bench.density_high.weights.tolist(),
            "means": bench.density_high.means.tolist(),
            "sigmas": bench.density_high.sigmas.tolist(),
        },
        "proposal_sigma": bench.proposal_sigma,
        "seed": bench.seed,
        "acceptance_rate": dataset.meta["acceptance_rate"],
        "fes_edges": bench.fes_edges.tolist(),
    }
    truth_path = os.path.join(outdir, f"{bench.name}_truth.json")
    with open(truth_path, "w") as fh:
        json.dump(truth, fh, indent=1)
        fh.write("\n")
    print(f"benchmark {bench.name}: {dataset.n_frames} frames, "
          f"acceptance rate {dataset.meta['acceptance_rate']:.3f}")
    print(f"dataset written to {data_path}")
    return 0


def cmd_describe_config(cfg: dict, args) -> int:
    print(describe_config(), end="")
    return 0


_COMMANDS = {
    "train": (cmd_train, "fit a score model on a dataset"),
    "logpdf": (cmd_logpdf, "evaluate a model's log density on queries or a grid"),
    "sample": (cmd_sample, "draw samples from a score model's reverse SDE"),
    "unbias": (cmd_unbias, "reweight a high-temperature dataset into FES grids"),
    "report": (cmd_report, "render FES grid CSVs as SVG plots"),
    "idim": (cmd_idim, "estimate the intrinsic dimension of a dataset"),
    "toy": (cmd_toy, "run the exactly solvable 1-D unbiasing experiment"),
    "synth": (cmd_synth, "generate a synthetic benchmark dataset"),
    "describe-config": (cmd_describe_config, "print every config key and default"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorefes",
        description="score-based density estimation and unbiasing of "
                    "temperature-accelerated sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=fn)
        if name == "describe-config":
            continue
        sp.add_argument("--config", metavar="FILE", help="config file (key = value lines)")
        for entry in CONFIG_ENTRIES:
            sp.add_argument(f"--{entry.key}", metavar="V", dest=entry.key,
                            help=entry.help)
        if name == "report":
            sp.add_argument("grids", nargs="+", metavar="FES_CSV",
                            help="FES grid CSVs to plot")
            sp.add_argument("--diff", action="store_true",
                            help="also plot |A1 - A2| of exactly two grids")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {entry.key: getattr(args, entry.key, None) for entry in CONFIG_ENTRIES}
    try:
        cfg = resolve_config(getattr(args, "config", None), overrides)
        return args.func(cfg, args)
    except (ConfigError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
