"""Command-line front end.

Usage::

    ntsgd <command> [--config FILE] [--out DIR] [--<key> VALUE ...]

Commands: gradcheck, run, sweep-sparsity, sweep-convergence, escape,
stability, stable-rank.

The config file is a list of ``key = value`` lines (``#`` starts a comment;
an optional ``[ntsgd]`` section header is accepted).  Lists are
comma-separated.  Every key can also be given as a flag, ``cut_rate`` as
``--cut-rate``; flags win over the file.  Unknown keys are rejected.

Results go to ``--out`` if given, else ``<output_dir>/<command>/<UTC
timestamp>/``.  The directory always receives ``config.json``, the
normalized effective configuration.

Exit status: 0 success, 1 invalid configuration, 2 runtime failure
(including a diverged run or a failed gradient check).
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import Dataset, load_idx_subset, make_neighbor, synth_blobs, train_test_split
from .experiments import (
    convergence_sweep,
    emit_csv,
    escape_experiment,
    escape_prescription,
    estimate_constants,
    sparsity_sweep,
    stability_experiment,
    stable_rank,
)
from .experiments.results import SweepResult
from .numerics import RngState, finite_diff_grad, relative_error
from .objectives import (
    LogisticObjective,
    MLPObjective,
    SaddleObjective,
    SaddleSpec,
    logistic_grad,
    logistic_loss,
)
from .optim import OptimizerConfig, StepSchedule, run

COMMANDS = ("gradcheck", "run", "sweep-sparsity", "sweep-convergence", "escape", "stability", "stable-rank")
GRADCHECK_TOL = 1e-5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | bool | ints | floats | opt_float
    default: object
    check: object = None
    help: str = ""


def _in(*choices):
    return lambda v: v in choices, f"one of {', '.join(choices)}"


_pos = (lambda v: v > 0, "> 0")
_nonneg = (lambda v: v >= 0, ">= 0")
_unit = (lambda v: 0 <= v <= 1, "in [0, 1]")

SCHEMA = {
    "objective": Key("str", "logistic", _in("logistic", "mlp", "saddle")),
    "dataset": Key("str", "blobs", _in("blobs", "idx")),
    "n_samples": Key("int", 200, _pos),
    "n_test": Key("int", 200, _nonneg),
    "dim": Key("int", 5, _pos),
    "n_classes": Key("int", 2, (lambda v: v >= 2, ">= 2")),
    "class_sep": Key("float", 2.0, _pos),
    "data_seed": Key("int", 0, _nonneg),
    "idx_images": Key("str", ""),
    "idx_labels": Key("str", ""),
    "hidden": Key("int", 32, _pos),
    "positive_label": Key("int", 1),
    "cut_rate": Key("float", 0.1, _unit),
    "sigma": Key("float", 1e-3, _nonneg),
    "beta": Key("float", 0.0, (lambda v: 0 <= v <= 0.5, "in [0, 0.5]")),
    "schedule": Key("str", "constant", _in(*StepSchedule.KINDS)),
    "lr": Key("float", 0.1, _pos),
    "batch_size": Key("int", 100, _pos),
    "horizon": Key("int", 1000, _nonneg),
    "record_every": Key("int", 100, _pos),
    "fixed_threshold": Key("opt_float", None, _nonneg),
    "seeds": Key("ints", [0]),
    "cut_rate_grid": Key("floats", [0.01, 0.1, 0.2, 0.5, 0.9], _unit),
    "sigma_grid": Key("floats", [1e-3], _nonneg),
    "horizons": Key("ints", [100, 1000, 10000], _pos),
    "saddle_dim": Key("int", 10, _pos),
    "saddle_negative": Key("float", -1.0, (lambda v: v < 0, "< 0")),
    "saddle_positive": Key("float", 1.0),
    "quartic": Key("float", 1.0, _pos),
    "loss_drop": Key("float", 0.1, _pos),
    "tau_max": Key("int", 100_000, _pos),
    "taus": Key("floats", [0.0, 1.0, 10.0, 100.0], _nonneg),
    "neighbor_index": Key("int", 0, _nonneg),
    "gap_sigmas": Key("floats", [0.0, 1e-3, 1e-2], _nonneg),
    "gradcheck_probes": Key("int", 100, _pos),
    "output_dir": Key("str", "results"),
}


def _coerce(name: str, key: Key, raw):
    def one(text, kind):
        text = str(text).strip()
        try:
            if kind == "int":
                return int(text)
            if kind == "float":
                v = float(text)
                if not math.isfinite(v):
                    raise ValueError
                return v
            if kind == "bool":
                if text.lower() in ("true", "yes", "1"):
                    return True
                if text.lower() in ("false", "no", "0"):
                    return False
                raise ValueError
            return text
        except ValueError:
            raise ConfigError(f"{name}: expected {kind}, got {text!r}") from None

    if key.kind in ("ints", "floats"):
        items = raw if isinstance(raw, (list, tuple)) else [s for s in str(raw).split(",") if s.strip()]
        if not items:
            raise ConfigError(f"{name}: list must not be empty")
        value = [one(x, key.kind[:-1]) for x in items]
        values = value
    elif key.kind == "opt_float":
        value = None if str(raw).strip().lower() in ("", "none") else one(raw, "float")
        values = [] if value is None else [value]
    else:
        value = one(raw, key.kind)
        values = [value]
    if key.check:
        ok, desc = key.check
        for v in values:
            if not ok(v):
                raise ConfigError(f"{name}: value {v!r} out of range (must be {desc})")
    return value


def parse_config(path=None, overrides: dict | None = None) -> dict:
    """Merge defaults, the config file and flag overrides into a validated dict."""
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not text.lstrip().startswith("["):
            text = "[ntsgd]\n" + text
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config syntax error: {exc}".splitlines()[0]) from None
        for section in parser.sections():
            if section != "ntsgd":
                raise ConfigError(f"unknown section [{section}]")
            raw.update(parser[section])
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    for k in raw:
        if k not in SCHEMA:
            raise ConfigError(f"unknown key: {k}")
    cfg = {}
    for name, key in SCHEMA.items():
        cfg[name] = _coerce(name, key, raw[name]) if name in raw else key.default
    if cfg["dataset"] == "idx" and not (cfg["idx_images"] and cfg["idx_labels"]):
        raise ConfigError("dataset: idx needs idx_images and idx_labels")
    if cfg["objective"] == "logistic" and cfg["n_classes"] != 2 and cfg["dataset"] == "blobs":
        raise ConfigError("n_classes: logistic objective needs 2 classes")
    return cfg


def optimizer_config(cfg: dict, seed: int | None = None) -> OptimizerConfig:
    return OptimizerConfig(
        cut_rate=cfg["cut_rate"],
        sigma=cfg["sigma"],
        beta=cfg["beta"],
        schedule=StepSchedule(cfg["schedule"], cfg["lr"]),
        batch_size=cfg["batch_size"],
        horizon=cfg["horizon"],
        seed=cfg["seeds"][0] if seed is None else seed,
        record_every=cfg["record_every"],
        fixed_threshold=cfg["fixed_threshold"],
    )


def load_data(cfg: dict) -> tuple[Dataset, Dataset | None]:
    rng = RngState(cfg["data_seed"]).split("data")
    if cfg["dataset"] == "idx":
        return load_idx_subset(cfg["idx_images"], cfg["idx_labels"], cfg["n_samples"], rng, n_test=cfg["n_test"])
    total = cfg["n_samples"] + cfg["n_test"]
    full = synth_blobs(rng, total, cfg["dim"], cfg["class_sep"], cfg["n_classes"])
    if cfg["n_test"] == 0:
        return full, None
    return train_test_split(full, cfg["n_test"], rng.split("split"))


def saddle_spec(cfg: dict) -> SaddleSpec:
    return SaddleSpec.standard(cfg["saddle_dim"], cfg["saddle_negative"], cfg["saddle_positive"], cfg["quartic"])


def build_objective(cfg: dict, data: Dataset | None):
    kind = cfg["objective"]
    if kind == "saddle":
        return SaddleObjective(saddle_spec(cfg))
    if kind == "logistic":
        return LogisticObjective(data, cfg["positive_label"])
    return MLPObjective(data, cfg["hidden"], int(max(cfg["n_classes"], data.labels.max() + 1)))


def _factory(cfg: dict):
    if cfg["objective"] == "logistic":
        return lambda d: LogisticObjective(d, cfg["positive_label"])
    if cfg["objective"] == "mlp":
        return lambda d: MLPObjective(d, cfg["hidden"], cfg["n_classes"])
    raise ConfigError("objective: stability needs a data-driven objective (logistic or mlp)")


# --- commands ----------------------------------------------------------------


def cmd_gradcheck(cfg, out: Path) -> int:
    rng = RngState(cfg["seeds"][0]).split("gradcheck")
    data = synth_blobs(rng.split("data"), 20, 4, 2.0, 3)
    spec = SaddleSpec.standard(5)
    mlp = MLPObjective(data, 6, 3)
    table = SweepResult(("objective", "probe", "relative_error", "passed"))
    worst = {}
    for name in ("saddle", "logistic", "mlp"):
        for k in range(cfg["gradcheck_probes"]):
            if name == "saddle":
                w = rng.standard_normal(spec.dim)
                obj = SaddleObjective(spec)
                f, g = obj.loss, obj.grad(w)
            elif name == "logistic":
                i = int(rng.integers(data.n, 1)[0])
                x = data.features[i]
                y = 1.0 if rng.uniform(1)[0] < 0.5 else -1.0
                w = rng.standard_normal(data.dim)
                f, g = (lambda v: logistic_loss(v, x, y)), logistic_grad(w, x, y)
            else:
                i = int(rng.integers(data.n, 1)[0])
                w = mlp.init_params(rng)
                f, g = (lambda v: mlp.loss(v, [i])), mlp.grad(w, [i])
            err = relative_error(g, finite_diff_grad(f, w))
            worst[name] = max(worst.get(name, 0.0), err)
            table.add(name, k, err, err < GRADCHECK_TOL)
    emit_csv(table, out / "gradcheck.csv")
    for name, err in worst.items():
        print(f"gradcheck {name}: max relative error {err:.3e} ({'ok' if err < GRADCHECK_TOL else 'FAIL'})")
    return 0 if all(e < GRADCHECK_TOL for e in worst.values()) else 2


def cmd_run(cfg, out: Path) -> int:
    train, test = load_data(cfg) if cfg["objective"] != "saddle" else (None, None)
    obj = build_objective(cfg, train)
    status = 0
    summary = SweepResult(("seed", "status", "final_loss", "final_grad_norm", "sample_index", "mean_sparsity",
                           "test_accuracy"))
    for seed in cfg["seeds"]:
        ocfg = optimizer_config(cfg, seed)
        w0 = obj.init_params(RngState(seed).split("init"))
        rec = run(obj, w0, ocfg)
        if rec.iterations.size == 0:
            # no updates: report the initial state only
            emit_csv(_initial_state(obj, w0), out / f"trajectory_seed{seed}.csv")
        else:
            emit_csv(rec, out / f"trajectory_seed{seed}.csv")
        acc = obj.accuracy(rec.final, test) if test is not None and hasattr(obj, "accuracy") else math.nan
        summary.add(seed, rec.status, obj.loss(rec.final) if not rec.diverged else math.nan,
                    float(np.linalg.norm(obj.grad(rec.final))) if not rec.diverged else math.nan,
                    rec.sample_index, rec.mean_sparsity, acc)
        print(f"run seed={seed}: status={rec.status} final_loss={summary.records[-1][2]:.6g} "
              f"steps={ocfg.horizon} wall={rec.wall_time:.2f}s")
        if rec.diverged:
            print(f"ntsgd: run diverged (seed {seed})", file=sys.stderr)
            status = 2
    emit_csv(summary, out / "summary.csv")
    return status


def _initial_state(obj, w0) -> SweepResult:
    table = SweepResult(("t", "loss", "grad_norm", "sparsity", "kappa", "w_norm"))
    table.add(0, obj.loss(w0), float(np.linalg.norm(obj.grad(w0))), math.nan, math.nan, float(np.linalg.norm(w0)))
    return table


def cmd_sweep_sparsity(cfg, out: Path) -> int:
    train, test = load_data(cfg)
    obj = build_objective(cfg, train)
    res = sparsity_sweep(obj, test, cfg["cut_rate_grid"], cfg["sigma_grid"], cfg["seeds"], optimizer_config(cfg),
                         extra_cells=[(0.0, 0.0)])
    emit_csv(res.runs, out / "runs.csv")
    emit_csv(res.summary, out / "summary.csv")
    for row in res.summary.rows():
        print("cut_rate={:<6g} sigma={:<8g} sparsity={:.4f} test_acc={:.4f}".format(row[0], row[1], row[3], row[6]))
    return 0


def cmd_sweep_convergence(cfg, out: Path) -> int:
    train, _ = load_data(cfg) if cfg["objective"] != "saddle" else (None, None)
    obj = build_objective(cfg, train)
    res = convergence_sweep(obj, optimizer_config(cfg), cfg["horizons"], cfg["seeds"])
    emit_csv(res.runs, out / "runs.csv")
    emit_csv(res.summary, out / "summary.csv")
    slopes = SweepResult(("metric", "slope", "defined"))
    slopes.add("grad_sq_sampled", res.slope_sampled, not math.isnan(res.slope_sampled))
    slopes.add("grad_sq_min", res.slope_min, res.slope_defined)
    emit_csv(slopes, out / "slope.csv")
    if res.slope_defined:
        print(f"log-log slope: min-gradient {res.slope_min:.4f}, sampled iterate {res.slope_sampled:.4f}")
    else:
        print("log-log slope undefined (need at least two horizons)")
    return 0


def cmd_escape(cfg, out: Path) -> int:
    res = escape_experiment(saddle_spec(cfg), cfg["sigma_grid"], optimizer_config(cfg), cfg["seeds"],
                            loss_drop=cfg["loss_drop"], tau_max=cfg["tau_max"])
    emit_csv(res.runs, out / "runs.csv")
    emit_csv(res.summary, out / "summary.csv")
    for row in res.summary.rows():
        print(f"sigma={row[0]:<8g} escaped {row[2]}/{row[1]} median_time={row[4]}")
    return 0


def cmd_stability(cfg, out: Path) -> int:
    factory = _factory(cfg)
    train, test = load_data(cfg)
    j = cfg["neighbor_index"]
    if j >= train.n:
        raise ConfigError(f"neighbor_index: {j} out of range for {train.n} samples")
    # replacement drawn from the same generator as the data
    extra = synth_blobs(RngState(cfg["data_seed"]).split("replacement"), cfg["n_classes"], train.dim,
                        cfg["class_sep"], cfg["n_classes"]) if cfg["dataset"] == "blobs" else test
    pair = make_neighbor(train, j, extra[0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = stability_experiment(factory, pair, optimizer_config(cfg), cfg["seeds"], test_data=test,
                                   gap_sigmas=cfg["gap_sigmas"] if test is not None else (),
                                   record_every=cfg["record_every"])
    for w in caught:
        print(f"ntsgd: warning: {w.message}", file=sys.stderr)
    emit_csv(res.divergence, out / "divergence.csv")
    emit_csv(res.coupling, out / "coupling.csv")
    emit_csv(res.gap, out / "gap.csv")
    emit_csv(res.gap_summary, out / "gap_summary.csv")
    last = res.divergence.records[-1]
    print(f"mean divergence at t={last[0]}: {last[1]:.6g}; coupling exact: {all(res.coupling.column('zero_before_hit'))}")
    return 0


def cmd_stable_rank(cfg, out: Path) -> int:
    if cfg["objective"] == "saddle":
        obj = SaddleObjective(saddle_spec(cfg))
        w = np.zeros(obj.dim)
    else:
        train, _ = load_data(cfg)
        obj = build_objective(cfg, train)
        if not obj.has_hessian:
            raise ConfigError("objective: stable-rank needs an objective with an analytic Hessian")
        w = np.zeros(obj.dim)
    H = obj.hessian(w)
    eta = cfg["lr"]
    table = SweepResult(("eta", "tau", "dim", "lambda_min", "lambda_max", "stable_rank"))
    for tau in cfg["taus"]:
        for row in stable_rank(H, eta, tau).rows():
            table.add(*row)
    emit_csv(table, out / "stable_rank.csv")
    consts = estimate_constants(obj, w[None, :], rng=RngState(cfg["seeds"][0]).split("probe"), sigma=cfg["sigma"])
    presc = SweepResult(("tau", "stable_rank", "eta_max", "eta_ok", "sigma2_min", "tau_min", "tau_ok"))
    for tau in cfg["taus"]:
        if tau == 0:
            continue
        p = escape_prescription(consts, H, eta, tau)
        presc.add(tau, p["stable_rank"], p["eta_max"], p["eta_ok"], p["sigma2_min"], p["tau_min"], p["tau_ok"])
    emit_csv(presc, out / "prescription.csv")
    emit_csv(consts, out / "constants.csv")
    for row in table.rows():
        print(f"tau={row[1]:<8g} stable_rank={row[5]:.6g}")
    return 0


HANDLERS = {
    "gradcheck": cmd_gradcheck,
    "run": cmd_run,
    "sweep-sparsity": cmd_sweep_sparsity,
    "sweep-convergence": cmd_sweep_convergence,
    "escape": cmd_escape,
    "stability": cmd_stability,
    "stable-rank": cmd_stable_rank,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # bad flags are configuration errors (exit 1), reported on one line
        self.exit(1, f"{self.prog}: config error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ntsgd", description="Truncated / noisy truncated SGD experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", help="exact output directory (default: <output_dir>/<command>/<timestamp>)")
    for name in SCHEMA:
        parser.add_argument("--" + name.replace("_", "-"), dest=name, default=None, metavar="VALUE")
    return parser


def dispatch(command: str, cfg: dict, out: Path | None = None) -> int:
    if out is None:
        stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        out = Path(cfg["output_dir"]) / command / stamp
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    echo = dict(cfg, command=command, version=__version__)
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return HANDLERS[command](cfg, out)


def main(argv=None) -> int:
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(line_buffering=True)
    args = build_parser().parse_args(argv)
    overrides = {name: getattr(args, name) for name in SCHEMA}
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"ntsgd: config error: {exc}", file=sys.stderr)
        return 1
    try:
        return dispatch(args.command, cfg, Path(args.out) if args.out else None)
    except ConfigError as exc:
        print(f"ntsgd: config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, FloatingPointError, ArithmeticError) as exc:
        print(f"ntsgd: {args.command} failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
