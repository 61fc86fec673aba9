"""Flat key = value run configuration shared by every CLI command.

A config file is plain text: `key = value` lines, blank lines, `#`/`;`
comments, and optional `[section]` headers that group lines visually but do
not namespace keys.  Keys are globally unique; an unknown or repeated key is
an error rather than a silent ignore.  Command-line flags mirror the same
keys and override file values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ConfigError

__all__ = ["CONFIG_ENTRIES", "resolve_config", "describe_config", "write_snapshot"]


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    value = float(text)
    if value != value:
        raise ValueError("nan is not a valid setting")
    return value


def _parse_str(text: str) -> str:
    return text


def _parse_int_list(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(p) for p in parts)


def _parse_float_list(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(p) for p in parts)


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text

    return parse


@dataclass(frozen=True)
class ConfigEntry:
    key: str
    default: str
    parse: callable
    help: str


# One flat namespace; the CLI adds a --flag per entry.  Defaults are strings
# so the file, the flags, and the defaults all walk through the same parser.
CONFIG_ENTRIES = (
    ConfigEntry("dataset", "", _parse_str, "input dataset CSV (header carries space/dim)"),
    ConfigEntry("output_dir", "out", _parse_str, "directory all artifacts are written into"),
    ConfigEntry("seed", "0", _parse_int, "seed for training, sampling, and selection"),
    ConfigEntry("sigma_min", "0.01", _parse_float, "noise scale at t=0"),
    ConfigEntry("sigma_max", "0", _parse_float,
                "noise scale at t=1; 0 picks the space default (2*pi torus, 10 Euclidean)"),
    ConfigEntry("t_min", "0.001", _parse_float, "smallest diffusion time used anywhere"),
    ConfigEntry("hidden_sizes", "128,128,128", _parse_int_list, "MLP hidden layer widths"),
    ConfigEntry("time_features", "64", _parse_int, "sinusoidal time embedding size"),
    ConfigEntry("activation", "silu", _choice("silu"), "MLP activation"),
    ConfigEntry("batch_size", "512", _parse_int, "training batch size"),
    ConfigEntry("n_epochs", "150", _parse_int, "maximum training epochs"),
    ConfigEntry("learning_rate", "0.001", _parse_float, "Adam learning rate"),
    ConfigEntry("lr_decay", "0.97", _parse_float, "per-epoch learning-rate decay factor"),
    ConfigEntry("loss_weighting", "sigma2", _choice("sigma2", "none"),
                "denoising loss weighting"),
    ConfigEntry("val_fraction", "0.1", _parse_float, "validation split fraction"),
    ConfigEntry("patience", "30", _parse_int, "early-stopping patience in epochs (0 = off)"),
    ConfigEntry("estimator", "sbdm", _choice("sbdm", "kde", "gmm"),
                "density estimator used by unbias when no model file is given"),
    ConfigEntry("kde_bandwidth", "0", _parse_float, "KDE bandwidth; 0 = Scott rule"),
    ConfigEntry("gmm_components", "0", _parse_int,
                "GMM component count; 0 = BIC selection up to gmm_k_max"),
    ConfigEntry("gmm_k_max", "6", _parse_int, "largest K tried by BIC selection"),
    ConfigEntry("n_steps", "500", _parse_int, "integrator steps for likelihoods/sampling"),
    ConfigEntry("integrator", "rk4", _choice("rk4", "euler"), "ODE integrator"),
    ConfigEntry("fd_step", "0.001", _parse_float, "finite-difference divergence step"),
    ConfigEntry("features", "z1", _parse_str,
                "comma-separated feature specs: zK, cos:zK, sin:zK, pair:zA:zB"),
    ConfigEntry("bins", "64", _parse_int, "histogram bins per feature axis"),
    ConfigEntry("temperature", "0", _parse_float,
                "target temperature T; 0 = dataset header value (default 1)"),
    ConfigEntry("high_temperature", "0", _parse_float,
                "sampling temperature T_h; 0 = dataset header value (default T)"),
    ConfigEntry("kb", "0", _parse_float, "Boltzmann constant; 0 = header value (default 1)"),
    ConfigEntry("n_boot", "0", _parse_int, "bootstrap replicas for FES error bars (0 = off)"),
    ConfigEntry("queries", "", _parse_str, "query CSV for logpdf (dataset format)"),
    ConfigEntry("grid", "", _parse_str,
                "grid spec for logpdf: per-axis 'n' (torus) or 'lo:hi:n', comma-separated"),
    ConfigEntry("model", "", _parse_str, "model container path"),
    ConfigEntry("n_samples", "1000", _parse_int, "sample count for the sample command"),
    ConfigEntry("discard_fraction", "0.1", _parse_float,
                "fraction of largest ratios dropped by the dimension estimator"),
    ConfigEntry("fit_csv", "", _parse_str, "optional output CSV of dimension-fit points"),
    ConfigEntry("kernel_sigma", "0.1", _parse_float, "toy-experiment blur width"),
    ConfigEntry("kbt_h", "3,6,9", _parse_float_list, "toy-experiment kB*T_h list"),
    ConfigEntry("benchmark", "torus2", _parse_str, "synthetic benchmark name"),
    ConfigEntry("n_frames", "200000", _parse_int, "frames drawn by the synth command"),
)

_BY_KEY = {entry.key: entry for entry in CONFIG_ENTRIES}


def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith(("#", ";")):
                continue
            if line.startswith("[") and line.endswith("]"):
                continue  # section headers group lines; keys stay global
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.split("#", 1)[0].strip()
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    return values


def resolve_config(config_path: str | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then flag overrides; all parsed and typed."""
    raw = {entry.key: entry.default for entry in CONFIG_ENTRIES}
    if config_path:
        for key, value in _read_config_file(config_path).items():
            if key not in _BY_KEY:
                raise ConfigError(f"unknown config key {key!r} in {config_path}")
            raw[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _BY_KEY:
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = value
    resolved = {}
    for key, text in raw.items():
        try:
            resolved[key] = _BY_KEY[key].parse(str(text))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config key {key!r}: bad value {text!r} ({exc})") from exc
    return resolved


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def describe_config() -> str:
    lines = ["# every key, its default, and what it does", ""]
    for entry in CONFIG_ENTRIES:
        lines.append(f"{entry.key} = {entry.default}")
        lines.append(f"    # {entry.help}")
    return "\n".join(lines) + "\n"


def write_snapshot(config: dict, output_dir: str) -> str:
    """Persist the fully resolved configuration next to the run's artifacts."""
    path = os.path.join(output_dir, "resolved_config.txt")
    lines = [f"{key} = {_format_value(config[key])}" for key in sorted(config)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
