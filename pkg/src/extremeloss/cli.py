"""Command line entry point.

    extremeloss synth      --out DIR
    extremeloss preprocess --input raw.csv --out DIR
    extremeloss train      --input DIR --out DIR [--model gbdt|mlp] [--a A | --baseline]
    extremeloss eval       --model-file FILE --input DIR --out DIR
    extremeloss sweep      --input DIR --out DIR [--a-values 0.5,0.7,0.9]

Exit codes: 0 success, 1 domain error (empty band or split, failed
training), 2 I/O or usage error.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile

from . import gbdt, metrics, mlp, pipeline, synth
from .config import RunConfig, format_loss_config, format_months, load_config, parse_months
from .errors import (ConfigError, DomainError, EmptyBandError, ExtremeLossError, ModelFormatError,
                     ParseError, TrainingError)
from .loss import ImprovedLoss, SquaredError

log = logging.getLogger("extremeloss")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


def _write_atomic(path, data):
    """Write via a temp file in the same directory, then rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(value, flag):
    if not value:
        raise ConfigError(f"{flag} is required")
    return value


def _dataset_path(path, name):
    return os.path.join(path, name) if os.path.isdir(path) else path


def _make_out(cfg):
    out = _require(cfg.out, "--out")
    os.makedirs(out, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands

def cmd_synth(cfg: RunConfig):
    out = _make_out(cfg)
    scfg = cfg.synth_config()
    series, manifest = synth.generate(scfg)
    csv_path = os.path.join(out, "raw.csv")
    buf = io.StringIO()
    series.to_csv(buf)
    _write_atomic(csv_path, buf.getvalue())
    _write_atomic(os.path.join(out, "manifest.json"), manifest.to_json() + "\n")
    log.info("wrote %d records to %s", len(series), csv_path)
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig):
    src = _require(cfg.input, "--input")
    out = _make_out(cfg)
    result = pipeline.ingest_csv(_dataset_path(src, "raw.csv"))
    if result.errors:
        log.warning(result.summary)
    cleaned, report = pipeline.clean(result.series)
    windows = pipeline.build_windows(pipeline.aggregate(cleaned))
    summary = {"clean": report.to_dict(), "parse_errors": len(result.errors),
               "windows": len(windows), "test_months": format_months(cfg.test_months)}
    _write_atomic(os.path.join(out, "clean_report.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if len(windows) == 0:
        log.warning("no 8-hour contiguous stretch in the input; zero windows built")
    split = pipeline.split_by_month(windows, cfg.test_months, cfg.loss_config())
    for name, part in (("train.csv", split.train), ("test.csv", split.test)):
        buf = io.StringIO()
        part.to_csv(buf)
        _write_atomic(os.path.join(out, name), buf.getvalue())
    summary["n_train"], summary["n_test"] = len(split.train), len(split.test)
    summary["band_counts_train"] = dict(zip(("low", "normal", "high"), split.band_counts_train))
    _write_atomic(os.path.join(out, "clean_report.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("train %d / test %d windows", len(split.train), len(split.test))
    return EXIT_OK


def _objective(cfg: RunConfig, train_y, baseline):
    lcfg = cfg.loss_config()
    if baseline:
        return SquaredError(), lcfg
    if not lcfg.has_weights:
        try:
            lcfg = lcfg.with_weights(train_y)
        except EmptyBandError as exc:
            raise EmptyBandError(exc.band, f"{exc}; adjust t_high/t_low or supply w_high/w_low") from None
    return ImprovedLoss(lcfg), lcfg


def fit(cfg: RunConfig, train, baseline):
    objective, lcfg = _objective(cfg, train.y, baseline)
    if cfg.model == "gbdt":
        model = gbdt.train(train.X, train.y, objective, cfg.gbdt_params())
        return model, gbdt.serialize(model), lcfg, "round"
    model = mlp.train(train.X, train.y, objective, cfg.mlp_params())
    return model, mlp.serialize(model), lcfg, "epoch"


def _trace_csv(trace, label):
    start = 0 if label == "round" else 1
    lines = [f"{label},train_loss"] + [f"{i},{v!r}" for i, v in enumerate(trace, start=start)]
    return "\n".join(lines) + "\n"


def cmd_train(cfg: RunConfig):
    src = _require(cfg.input, "--input")
    out = _make_out(cfg)
    train = pipeline.WindowDataset.from_csv(_dataset_path(src, "train.csv"))
    model, blob, lcfg, label = fit(cfg, train, cfg.baseline)
    _write_atomic(os.path.join(out, f"model.{cfg.model}"), blob)
    _write_atomic(os.path.join(out, "loss_trace.csv"), _trace_csv(model.loss_trace, label))
    _write_atomic(os.path.join(out, "loss_config.txt"), format_loss_config(lcfg))
    log.info("trained %s (%s) on %d windows", cfg.model, "baseline" if cfg.baseline else f"a={lcfg.a}",
             len(train))
    return EXIT_OK


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(gbdt.MAGIC):
        return gbdt.deserialize(data)
    if data.startswith(mlp.MAGIC):
        return mlp.deserialize(data)
    raise ModelFormatError(f"{path} is not a model file")


def cmd_eval(cfg: RunConfig, model_file):
    src = _require(cfg.input, "--input")
    out = _make_out(cfg)
    model = load_model(_require(model_file, "--model-file"))
    test = pipeline.WindowDataset.from_csv(_dataset_path(src, "test.csv"))
    report = metrics.evaluate(model.predict(test.X), test.y, cfg.loss_config())
    _write_atomic(os.path.join(out, "report.json"), report.to_json())
    _write_atomic(os.path.join(out, "report.csv"), report.to_csv_row())
    return EXIT_OK


def run_sweep(cfg: RunConfig, train, test):
    """Baseline plus one improved model per ``cfg.a_values``; one flat row each."""
    rows = []
    eval_cfg = cfg.loss_config()
    for a in (None,) + tuple(cfg.a_values):
        run_cfg = cfg if a is None else cfg.replace(a=float(a))
        model, _, lcfg, _ = fit(run_cfg, train, baseline=a is None)
        report = metrics.evaluate(model.predict(test.X), test.y, eval_cfg)
        row = {"model": cfg.model, "a": "baseline" if a is None else float(a),
               "w_high": lcfg.w_high, "w_low": lcfg.w_low}
        row.update(report.flat_row())
        rows.append(row)
        log.info("sweep %s: recall %.3f bias_high %s", row["a"], report.recall_combined or 0.0,
                 report.bias_high)
    return rows


def cmd_sweep(cfg: RunConfig):
    src = _require(cfg.input, "--input")
    out = _make_out(cfg)
    train = pipeline.WindowDataset.from_csv(_dataset_path(src, "train.csv"))
    test = pipeline.WindowDataset.from_csv(_dataset_path(src, "test.csv"))
    rows = run_sweep(cfg, train, test)
    _write_atomic(os.path.join(out, "sweep.csv"), metrics.sweep_table(rows))
    lines = [f"{cfg.model} a-sweep on {len(test)} test windows ({metrics.BIAS_CONVENTION})"]
    for r in rows:
        lines.append(f"a={r['a']}: recall={r['recall_combined']} mae_high={r['mae_high']} "
                     f"mae_low={r['mae_low']} bias_high={r['bias_high']} bias_low={r['bias_low']}")
    _write_atomic(os.path.join(out, "summary.txt"), "\n".join(lines) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument handling

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--input", help="input file or directory")
    common.add_argument("--out", help="output directory")
    common.add_argument("--model", choices=("gbdt", "mlp"))
    common.add_argument("--a", type=float, help="extreme-case importance factor in (0, 1)")
    common.add_argument("--baseline", action="store_true", help="train with plain squared error")
    common.add_argument("--seed", type=int)
    common.add_argument("--test-months", help="YYYY-MM[,YYYY-MM...]")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="extremeloss", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate synthetic sensor CSV")
    sub.add_parser("preprocess", parents=[common], help="clean, aggregate, window and split")
    sub.add_parser("train", parents=[common], help="train one model")
    p = sub.add_parser("eval", parents=[common], help="evaluate a model on a test set")
    p.add_argument("--model-file", required=True)
    p = sub.add_parser("sweep", parents=[common], help="baseline plus a-sweep")
    p.add_argument("--a-values", help="comma separated a values")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    for name in ("input", "out", "model", "a", "seed"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.baseline:
        changes["baseline"] = True
    if args.test_months is not None:
        changes["test_months"] = parse_months(args.test_months)
    if getattr(args, "a_values", None):
        try:
            changes["a_values"] = tuple(float(v) for v in args.a_values.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"bad --a-values {args.a_values!r}") from None
    return cfg.replace(**changes)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "preprocess":
            return cmd_preprocess(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.model_file)
        return cmd_sweep(cfg)
    except (DomainError, TrainingError) as exc:
        print(f"extremeloss: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ConfigError, ParseError, ModelFormatError) as exc:
        print(f"extremeloss: {exc}", file=sys.stderr)
        return EXIT_IO
    except ExtremeLossError as exc:
        print(f"extremeloss: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
