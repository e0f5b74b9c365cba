"""Pipeline driver: synth -> split -> forecast -> score -> detect -> evaluate.

Stages talk to each other only through files, so externally produced
forecasts can be dropped in at the `score` boundary. Every subcommand is
deterministic given its inputs (and seed); `--jobs` never changes output.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric failure.
Errors print a single machine-parsable line: ``error[<category>]: <text>``.
"""

from __future__ import annotations

import csv
import functools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from poakit import core, detect as detect_mod, forecast as fc, io as pio
from poakit import metrics as mx
from poakit import synth as synth_mod
from poakit import uncertainty as unc
from poakit.core import DataFormatError, NumericError, ValidationError

SEED_ENV_VAR = "POAKIT_SEED"


class CliError(click.ClickException):
    def __init__(self, message: str, exit_code: int, category: str):
        super().__init__(message)
        self.exit_code = exit_code
        self.category = category

    def show(self, file=None) -> None:
        click.echo(f"error[{self.category}]: {self.format_message()}", err=True)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValidationError, DataFormatError) as exc:
            raise CliError(str(exc), 2, "validation") from exc
        except OSError as exc:
            raise CliError(str(exc), 3, "io") from exc
        except (NumericError, FloatingPointError, ZeroDivisionError) as exc:
            raise CliError(str(exc), 4, "numeric") from exc

    return wrapper


@click.group()
def cli():
    """Precursor-of-anomaly detection pipeline and evaluation metrics."""


def _resolve_seed(flag_seed: int | None, config_seed: int | None) -> int:
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    if config_seed is not None:
        return config_seed
    return 42


def _synth_config_from_json(data: dict) -> synth_mod.SynthConfig:
    variables = []
    for raw in data.get("variables", []):
        kind = raw.get("kind")
        if kind == "sine":
            variables.append(
                synth_mod.SineBase(
                    amplitude=float(raw["amplitude"]),
                    period=float(raw["period"]),
                    phase=float(raw.get("phase", 0.0)),
                )
            )
        elif kind == "ar1":
            variables.append(
                synth_mod.Ar1Base(coef=float(raw["coef"]), noise_std=float(raw["noise_std"]))
            )
        else:
            raise ValidationError(f"unknown variable kind {kind!r} in synth config")
    anomalies = tuple(
        synth_mod.AnomalySpec(
            start=int(a["start"]),
            length=int(a["length"]),
            kind=a["kind"],
            magnitude=float(a["magnitude"]),
        )
        for a in data.get("anomalies", [])
    )
    precursor = None
    if data.get("precursor") is not None:
        p = data["precursor"]
        precursor = synth_mod.PrecursorSpec(
            lead=int(p.get("lead", 20)),
            length=int(p.get("length", p.get("lead", 20))),
            drift_magnitude=float(p.get("drift_magnitude", 1.0)),
            noise_inflation=float(p.get("noise_inflation", 2.0)),
        )
    return synth_mod.SynthConfig(
        length=int(data["length"]),
        variables=tuple(variables),
        anomalies=anomalies,
        precursor=precursor,
        obs_noise_std=float(data.get("obs_noise_std", 0.05)),
        seed=int(data.get("seed", 42)),
    )


def _synth_config_to_dict(cfg: synth_mod.SynthConfig) -> dict:
    variables = []
    for base in cfg.variables:
        if isinstance(base, synth_mod.SineBase):
            variables.append(
                {"kind": "sine", "amplitude": base.amplitude, "period": base.period,
                 "phase": base.phase}
            )
        else:
            variables.append({"kind": "ar1", "coef": base.coef, "noise_std": base.noise_std})
    out = {
        "length": cfg.length,
        "variables": variables,
        "anomalies": [
            {"start": a.start, "length": a.length, "kind": a.kind, "magnitude": a.magnitude}
            for a in cfg.anomalies
        ],
        "obs_noise_std": cfg.obs_noise_std,
        "seed": cfg.seed,
    }
    if cfg.precursor is not None:
        out["precursor"] = {
            "lead": cfg.precursor.lead,
            "length": cfg.precursor.length,
            "drift_magnitude": cfg.precursor.drift_magnitude,
            "noise_inflation": cfg.precursor.noise_inflation,
        }
    return out


@cli.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Synth config JSON; defaults to the built-in benchmark.")
@click.option("--seed", type=int, default=None,
              help=f"Override the config seed (also via ${SEED_ENV_VAR}).")
@handle_errors
def synth(out_dir, config_path, seed):
    """Generate a synthetic train/test/labels dataset with precursor truth."""
    if config_path is None:
        cfg = synth_mod.default_config()
    else:
        with open(config_path) as fh:
            cfg = _synth_config_from_json(json.load(fh))
    resolved = _resolve_seed(seed, cfg.seed)
    if resolved != cfg.seed:
        cfg = synth_mod.SynthConfig(
            length=cfg.length, variables=cfg.variables, anomalies=cfg.anomalies,
            precursor=cfg.precursor, obs_noise_std=cfg.obs_noise_std, seed=resolved,
        )
    train, test, labels, truth = synth_mod.generate(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_series_csv(out / "train.csv", train)
    pio.write_series_csv(out / "test.csv", test)
    pio.write_labels_csv(out / "labels.csv", labels)
    pio.write_segments_csv(out / "precursor_truth.csv", truth)
    files = ["train.csv", "test.csv", "labels.csv", "precursor_truth.csv"]
    pio.write_manifest(
        out / "manifest.json", _synth_config_to_dict(cfg), cfg.seed,
        [out / f for f in files],
    )
    click.echo(f"synth: wrote {', '.join(files)} to {out}")


@cli.command()
@click.argument("series_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--train-frac", type=float, default=0.7, show_default=True)
@handle_errors
def split(series_path, out_dir, train_frac):
    """Chronologically split a series into train/valid parts."""
    series = pio.read_series_csv(series_path)
    train, valid = pio.chronological_split(series, train_frac)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_series_csv(out / "train.csv", train)
    pio.write_series_csv(out / "valid.csv", valid)
    click.echo(f"split: {len(train)}/{len(valid)} rows -> {out}")


DEFAULT_MEMBERS = ",".join(s.spec_string for s in fc.default_member_specs())


def _parse_members(text: str) -> list[fc.ForecasterSpec]:
    specs = [fc.ForecasterSpec.parse(part) for part in text.split(",") if part.strip()]
    if not specs:
        raise ValidationError("no forecaster members given")
    return specs


@cli.command()
@click.argument("train_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("valid_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Series to emit inference forecasts for.")
@click.option("--members", default=DEFAULT_MEMBERS, show_default=True,
              help="Comma-separated specs, e.g. 'persistence,ar_ols:4'.")
@click.option("--top-k", type=int, default=5, show_default=True)
@click.option("--criterion", type=click.Choice(["mse", "mae"]), default="mse",
              show_default=True)
@click.option("--input-len", type=int, default=100, show_default=True)
@click.option("--horizon", type=int, default=24, show_default=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--standardize/--no-standardize", default=False, show_default=True,
              help="Per-variable z-scaling (statistics fit on TRAIN) before "
                   "fitting; forecasts are emitted in the scaled space.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker threads for per-member prediction.")
@handle_errors
def forecast(train_path, valid_path, out_dir, test_path, members, top_k, criterion,
             input_len, horizon, stride, standardize, jobs):
    """Fit members on TRAIN, rank them on VALID, emit top-K ensemble forecasts."""
    train = pio.read_series_csv(train_path)
    valid = pio.read_series_csv(valid_path)
    scaler = None
    if standardize:
        mu = train.values.mean(axis=0)
        sd = np.maximum(train.values.std(axis=0), 1e-12)

        def scaler(series):
            return core.TimeSeries(
                series.timestamps, (series.values - mu) / sd, series.variable_names
            )

        train, valid = scaler(train), scaler(valid)
    specs = _parse_members(members)
    cfg = fc.WindowConfig(input_len, horizon, stride)
    fitted = [fc.fit(spec, train) for spec in specs]
    valid_windows = fc.make_windows(valid, cfg, with_targets=True)
    targets = np.stack([w.target for w in valid_windows])
    inputs = np.stack([w.input for w in valid_windows])

    def run_member(model):
        return model.member_id, fc.predict_batch(model, inputs, horizon)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            member_preds = dict(pool.map(run_member, fitted))
    else:
        member_preds = dict(run_member(m) for m in fitted)
    scores = fc.evaluate_members(member_preds, targets)
    selected = set(fc.select_top_k(scores, top_k, criterion))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scoreboard.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("member_id", "mse", "mae", "selected"))
        for s in scores:
            writer.writerow(
                (s.member_id, format(s.mse, ".9g"), format(s.mae, ".9g"),
                 int(s.member_id in selected))
            )
    chosen = [m for m in fitted if m.member_id in selected]
    valid_ens = fc.forecast_ensembles(chosen, valid_windows, horizon)
    fc.write_forecast_records(out / "valid_forecasts.csv", valid_ens)
    written = ["scoreboard.csv", "valid_forecasts.csv"]
    if test_path is not None:
        test = pio.read_series_csv(test_path)
        if scaler is not None:
            test = scaler(test)
        test_windows = fc.make_windows(test, cfg, with_targets=False)
        test_ens = fc.forecast_ensembles(chosen, test_windows, horizon)
        fc.write_forecast_records(out / "test_forecasts.csv", test_ens)
        written.append("test_forecasts.csv")
    for model in fitted:
        for note in model.fit_report:
            click.echo(f"forecast: note: {model.member_id}: {note}")
    pio.write_manifest(
        out / "manifest.json",
        {"members": members, "top_k": top_k, "criterion": criterion,
         "input_len": input_len, "horizon": horizon, "stride": stride,
         "standardize": standardize, "selected": sorted(selected)},
        None,
        [out / f for f in written],
    )
    click.echo(f"forecast: selected {sorted(selected)} -> {out}")


@cli.command()
@click.argument("forecasts_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("valid_forecasts_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--length", type=int, default=None,
              help="Test series length; defaults to max window origin + 1.")
@click.option("--agg", type=click.Choice(["mean", "max"]), default="mean",
              show_default=True, help="Variable aggregation.")
@click.option("--collate", type=click.Choice(["max", "latest", "earliest"]),
              default="max", show_default=True, help="Overlapping-window resolution.")
@click.option("--normalize/--no-normalize", "do_normalize", default=True,
              show_default=True, help="Z-score against validation statistics.")
@click.option("--eps-sigma", type=float, default=unc.DEFAULT_EPS_SIGMA, show_default=True)
@handle_errors
def score(forecasts_path, valid_forecasts_path, out_path, length, agg, collate,
          do_normalize, eps_sigma):
    """Turn ensemble forecasts into a per-timestamp precursor score timeline."""
    test_ens = fc.ingest_external_forecasts(forecasts_path)
    valid_ens = fc.ingest_external_forecasts(valid_forecasts_path)
    timeline = unc.score_timeline(
        test_ens, valid_ens, series_len=length, agg=agg, collate=collate,
        eps_sigma=eps_sigma, normalize_scores=do_normalize,
    )
    pio.write_scores(out_path, timeline)
    n = int(timeline.defined.sum())
    click.echo(f"score: {n}/{len(timeline)} timestamps scored -> {out_path}")


def _metric_params(theta, alpha, beta, gamma, delta, epsilon, k, tapr_alpha=0.5):
    return mx.MetricParams(
        theta=theta, alpha=alpha, beta=beta, gamma=gamma,
        delta=delta, epsilon=epsilon, k=k, tapr_alpha=tapr_alpha,
    )


def _metric_options(func):
    for option in reversed([
        click.option("--alpha", type=float, default=1 / 3, show_default="1/3"),
        click.option("--beta", type=float, default=1 / 3, show_default="1/3"),
        click.option("--gamma", type=float, default=1 / 3, show_default="1/3"),
        click.option("--delta", type=int, default=24, show_default=True,
                     help="Ambiguous trailing window length."),
        click.option("--epsilon", type=int, default=7, show_default=True,
                     help="Optimal lead time of the early reward."),
        click.option("--k", type=float, default=0.001, show_default=True,
                     help="Early-reward decay sharpness."),
        click.option("--tapr-alpha", type=float, default=0.5, show_default=True),
    ]):
        func = option(func)
    return func


def _parse_detect_metric(metric: str, labels, delta, alpha, beta, gamma, epsilon, k):
    """Build the Detection -> F1 callback for the threshold search."""
    anomalies = core.segments_from_flags(labels.flags)
    if metric == "point-f1":
        def evaluate(det):
            return mx.pointwise_prf(det.flags, labels.flags)[2]

        return evaluate
    if metric.startswith("ptapr-f1@"):
        try:
            theta = float(metric.split("@", 1)[1])
        except ValueError:
            raise ValidationError(f"bad theta in metric {metric!r}") from None
        params = _metric_params(theta, alpha, beta, gamma, delta, epsilon, k)

        def evaluate(det):
            seg = detect_mod.split_precursor_prediction(det, anomalies, delta)
            report = mx.ptapr_report(seg, params)
            return report.f1

        return evaluate
    raise ValidationError(
        f"unknown detect metric {metric!r}; use 'point-f1' or 'ptapr-f1@<theta>'"
    )


@cli.command("detect")
@click.argument("scores_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--grid-n", type=int, default=256, show_default=True,
              help="Quantile count of the threshold grid.")
@click.option("--metric", default="ptapr-f1@0", show_default=True,
              help="Search objective: 'point-f1' or 'ptapr-f1@<theta>'.")
@click.option("--search-scores", "search_scores_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Run the threshold search on this held-out scores file "
                   "instead of SCORES (requires --search-labels).")
@click.option("--search-labels", "search_labels_path",
              type=click.Path(exists=True, dir_okay=False), default=None)
@_metric_options
@handle_errors
def detect_cmd(scores_path, labels_path, out_path, grid_n, metric,
               search_scores_path, search_labels_path,
               alpha, beta, gamma, delta, epsilon, k, tapr_alpha):
    """Best-F1 threshold search over score quantiles, then flag emission.

    By default the search runs on SCORES/LABELS themselves. For deployment
    studies the search can instead run on a labeled holdout
    (--search-scores/--search-labels); the winning threshold is then applied
    to SCORES.
    """
    scores = pio.read_scores(scores_path)
    labels = pio.read_labels_csv(labels_path)
    if len(labels) != len(scores):
        raise ValidationError(
            f"labels length {len(labels)} != scores length {len(scores)}"
        )
    if (search_scores_path is None) != (search_labels_path is None):
        raise ValidationError("--search-scores and --search-labels go together")
    if search_scores_path is not None:
        search_scores = pio.read_scores(search_scores_path)
        search_labels = pio.read_labels_csv(search_labels_path)
        if len(search_labels) != len(search_scores):
            raise ValidationError("search labels/scores length mismatch")
    else:
        search_scores, search_labels = scores, labels
    grid = detect_mod.default_grid(search_scores, grid_n)
    evaluate = _parse_detect_metric(
        metric, search_labels, delta, alpha, beta, gamma, epsilon, k
    )
    result = detect_mod.best_f1_threshold(search_scores, search_labels, evaluate, grid)
    detection = detect_mod.apply_threshold(scores, result.threshold)
    meta = {
        "threshold": result.threshold,
        "f1": result.f1,
        "metric": metric,
        "grid": f"{grid_n} quantiles ({len(grid)} unique)",
        "searched_on": search_scores_path or str(scores_path),
        "all_undefined": result.all_undefined,
    }
    pio.write_detection(out_path, detection, meta)
    if result.all_undefined:
        click.echo("detect: warning: every candidate threshold left F1 undefined")
    click.echo(
        f"detect: threshold {result.threshold:.6g} (search F1 {result.f1:.4f}) "
        f"-> {out_path}"
    )


def _evaluation_payload(detection, labels, params, metrics_wanted, theta_grid_n):
    anomalies = core.segments_from_flags(labels.flags)
    segments = detect_mod.split_precursor_prediction(detection, anomalies, params.delta)
    payload: dict = {
        "params": {
            "theta": params.theta, "alpha": params.alpha, "beta": params.beta,
            "gamma": params.gamma, "delta": params.delta, "epsilon": params.epsilon,
            "k": params.k, "tapr_alpha": params.tapr_alpha,
        }
    }
    thetas = np.linspace(0.0, 1.0, theta_grid_n)
    if "ptapr" in metrics_wanted:
        report = mx.ptapr_report(segments, params)
        sweep = mx.ptapr_theta_sweep(segments, params, thetas)
        p_e, r_e, f1_e = mx.early_prf(segments, params)
        payload["ptapr"] = {
            "f1_0": sweep.f1_at_0,
            "f1_1": sweep.f1_at_1,
            "auc": sweep.auc,
            "at_theta": {
                "theta": params.theta, "ptar": report.ptar, "ptap": report.ptap,
                "f1": report.f1,
                "recall_components": {
                    "detection": report.recall.detection,
                    "portion": report.recall.portion,
                    "early": report.recall.early,
                },
                "precision_components": {
                    "detection": report.precision.detection,
                    "portion": report.precision.portion,
                    "early": report.precision.early,
                },
            },
            "early_detection": {"precision": p_e, "recall": r_e, "f1": f1_e},
            "diagnostics": {
                "anomaly_coverage": list(report.anomaly_coverage),
                "anomaly_reward": list(report.anomaly_reward),
                "prediction_coverage": list(report.prediction_coverage),
                "prediction_reward": list(report.prediction_reward),
            },
            "curve": {
                "theta": sweep.thetas, "ptar": sweep.ptar, "ptap": sweep.ptap,
                "f1": sweep.f1,
            },
        }
    if "tapr" in metrics_wanted:
        curve = []
        for theta in thetas:
            p = mx.MetricParams(
                theta=float(theta), alpha=params.alpha, beta=params.beta,
                gamma=params.gamma, delta=params.delta, epsilon=params.epsilon,
                k=params.k, tapr_alpha=params.tapr_alpha,
            )
            curve.append(mx.tapr(segments, p).f1)
        curve = np.asarray(curve)
        at_theta = mx.tapr(segments, params)
        payload["tapr"] = {
            "f1_0": float(curve[0]),
            "f1_1": float(curve[-1]),
            "auc": mx.auc_trapezoid(thetas, curve),
            "at_theta": {
                "tar": at_theta.tar, "tap": at_theta.tap, "f1": at_theta.f1,
            },
            "curve": {"theta": thetas, "f1": curve},
        }
    if "pak" in metrics_wanted:
        suite = mx.pa_k_suite(detection.flags, labels.flags)
        payload["pak"] = {
            "f1_pa": suite.f1_pa,
            "f1_pointwise": suite.f1_pointwise,
            "auc": suite.auc,
            "curve": {
                "k": suite.k_values, "precision": suite.precision,
                "recall": suite.recall, "f1": suite.f1,
            },
        }
    return payload


@cli.command()
@click.argument("detection_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--metrics", default="ptapr,tapr,pak", show_default=True)
@click.option("--theta", type=float, default=0.0, show_default=True,
              help="Report-level overlap threshold.")
@click.option("--theta-grid", type=int, default=101, show_default=True)
@_metric_options
@handle_errors
def evaluate(detection_path, labels_path, out_dir, metrics, theta, theta_grid,
             alpha, beta, gamma, delta, epsilon, k, tapr_alpha):
    """Full metric report (PTaPR / TaPR / PA%K) for a stored detection."""
    detection = pio.read_detection(detection_path)
    labels = pio.read_labels_csv(labels_path)
    if len(labels) != len(detection):
        raise ValidationError(
            f"labels length {len(labels)} != detection length {len(detection)}"
        )
    wanted = {m.strip() for m in metrics.split(",") if m.strip()}
    unknown = wanted - {"ptapr", "tapr", "pak"}
    if unknown:
        raise ValidationError(f"unknown metrics: {sorted(unknown)}")
    params = _metric_params(theta, alpha, beta, gamma, delta, epsilon, k, tapr_alpha)
    payload = _evaluation_payload(detection, labels, params, wanted, theta_grid)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_json(out / "evaluation.json", payload)
    if "ptapr" in payload:
        curve = payload["ptapr"]["curve"]
        pio.write_theta_curve_csv(
            out / "theta_curve.csv", curve["theta"], curve["ptar"], curve["ptap"],
            curve["f1"],
        )
    summary = []
    for name in ("ptapr", "tapr", "pak"):
        if name in payload:
            block = payload[name]
            if name == "pak":
                summary.append(f"pak F1_PA={block['f1_pa']:.4f} AUC={block['auc']:.4f}")
            else:
                summary.append(
                    f"{name} F1_0={block['f1_0']:.4f} F1_1={block['f1_1']:.4f} "
                    f"AUC={block['auc']:.4f}"
                )
    click.echo("evaluate: " + "; ".join(summary) + f" -> {out}")


@cli.command()
@click.argument("detection_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--param", type=click.Choice(["k", "epsilon"]), required=True)
@click.option("--values", required=True, help="Comma-separated parameter values.")
@click.option("--theta-grid", type=int, default=101, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@_metric_options
@handle_errors
def sweep(detection_path, labels_path, out_path, param, values, theta_grid, jobs,
          alpha, beta, gamma, delta, epsilon, k, tapr_alpha):
    """Sensitivity sweep of the early-reward parameters (k or epsilon)."""
    detection = pio.read_detection(detection_path)
    labels = pio.read_labels_csv(labels_path)
    anomalies = core.segments_from_flags(labels.flags)
    segments = detect_mod.split_precursor_prediction(detection, anomalies, delta)
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse --values {values!r}") from None
    if not parsed:
        raise ValidationError("no sweep values given")
    thetas = np.linspace(0.0, 1.0, theta_grid)

    def run_value(value):
        kwargs = dict(alpha=alpha, beta=beta, gamma=gamma, delta=delta,
                      epsilon=epsilon, k=k, tapr_alpha=tapr_alpha, theta=0.0)
        if param == "k":
            kwargs["k"] = value
        else:
            kwargs["epsilon"] = int(value)
        params = mx.MetricParams(**kwargs)
        s = mx.ptapr_theta_sweep(segments, params, thetas)
        return value, s.f1_at_0, s.f1_at_1, s.auc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_value, parsed))
    else:
        rows = [run_value(v) for v in parsed]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow((param, "f1_0", "f1_1", "auc"))
        for row in rows:
            writer.writerow([format(v, ".9g") for v in row])
    click.echo(f"sweep: {len(rows)} {param} values -> {out_path}")


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@handle_errors
def report(run_dir):
    """Consolidate a run directory into plot-ready CSVs plus report.json.

    Expects the conventional file names produced by the other subcommands:
    scores.csv, detection.csv, labels.csv, evaluation.json (whichever exist).
    """
    run = Path(run_dir)
    consolidated: dict = {}
    plot_files = []
    scores = labels = detection = None
    if (run / "scores.csv").exists():
        scores = pio.read_scores(run / "scores.csv")
    if (run / "labels.csv").exists():
        labels = pio.read_labels_csv(run / "labels.csv")
    if (run / "detection.csv").exists():
        detection = pio.read_detection(run / "detection.csv")
        meta_path = run / "detection.csv.meta.json"
        if meta_path.exists():
            consolidated["detection"] = json.loads(meta_path.read_text())
    if (run / "evaluation.json").exists():
        consolidated["evaluation"] = json.loads((run / "evaluation.json").read_text())
        curve = consolidated["evaluation"].get("ptapr", {}).get("curve")
        if curve:
            pio.write_theta_curve_csv(
                run / "plot_theta_curve.csv", curve["theta"], curve["ptar"],
                curve["ptap"], curve["f1"],
            )
            plot_files.append("plot_theta_curve.csv")
    if scores is not None:
        with open(run / "plot_timeline.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("timestamp", "score", "flag", "label"))
            T = len(scores)
            for i in range(T):
                s = "" if np.isnan(scores.scores[i]) else format(scores.scores[i], ".9g")
                f = int(detection.flags[i]) if detection is not None and i < len(detection) else ""
                l = int(labels.flags[i]) if labels is not None and i < len(labels) else ""
                writer.writerow((i, s, f, l))
        plot_files.append("plot_timeline.csv")
    if not consolidated and not plot_files:
        raise ValidationError(f"{run}: no pipeline outputs found to report on")
    pio.write_json(run / "report.json", consolidated)
    pio.write_manifest(
        run / "report_manifest.json", {"run_dir": str(run)}, None,
        [run / f for f in plot_files + ["report.json"]],
    )
    click.echo(f"report: wrote report.json and {plot_files} in {run}")


def main():
    cli(prog_name="poakit")


if __name__ == "__main__":
    main()
