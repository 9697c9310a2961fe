"""Command line entry point: ``tlsnet <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 numerical diagnostic.
"""
import argparse
import json
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from . import ensemble as ens
from .bayes import GridBayesEstimator
from .config import load_config
from .datasets import generate_dataset, load_dataset
from .exceptions import ConfigError, DomainError, NumericalDiagnostic
from .experiments import (
    attach_crb,
    crb_curve,
    crb_to_csv,
    evaluate,
    ood_to_csv,
    run_ood_uncertainty,
    time_inference,
    timing_to_csv,
    write_text,
)
from .metrics import read_metrics_csv, write_metrics_csv
from .nn.io import load_model, save_model
from .nn.quantize import quantize
from .nn.training import train
from .tuning import random_search_tune, trials_to_csv, write_best

log = logging.getLogger("tlsnet")

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


class InputError(Exception):
    """Unreadable or malformed input file."""


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _load_data(path):
    try:
        return load_dataset(path)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _load_estimator(path):
    try:
        if os.path.isdir(path):
            return ens.load_ensemble(path)
        return load_model(path)
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def cmd_generate(args, config):
    path = args.out or _out(args, f"{args.split}.jsonl")
    ds = generate_dataset(config, args.split, path)
    print(f"wrote {len(ds)} records to {path}")


def cmd_train_single(args, config):
    data = _load_data(args.train)
    tc = config.model.replace(seed=config.seed)
    if args.loss:
        tc = tc.replace(loss=args.loss)
    model, tlog = train(data.X, data.y, tc)
    path = args.out or _out(args, "single.model.json")
    save_model(model, path)
    tlog.to_csv(path + ".log.csv")
    print(f"best epoch {tlog.best_epoch}; wrote {path}")


def cmd_train_ensemble(args, config):
    data = _load_data(args.train)
    adversarial = config.ensemble.adversarial or args.adversarial
    e = ens.train_ensemble(
        data.X, data.y, config.model, M=config.ensemble.M, adversarial=adversarial,
        epsilon=config.ensemble.epsilon, seed=config.seed, n_jobs=args.threads,
    )
    path = args.out or _out(args, "ensemble")
    ens.save_ensemble(e, path)
    for i, tlog in enumerate(e.logs):
        tlog.to_csv(os.path.join(path, f"member_{i:02d}.log.csv"))
    print(f"wrote {e.size} members to {path}")


def cmd_eval(args, config):
    est = _load_estimator(args.model)
    rows = evaluate(est, _load_data(args.test), args.name)
    path = args.out or _out(args, "metrics.csv")
    write_metrics_csv(rows, path)
    print(f"pooled rmse {rows[-1].rmse:.5f}; wrote {path}")


def cmd_bayes_eval(args, config):
    p, b = config.physics, config.bayes
    est = GridBayesEstimator(p.omega, p.gamma, p.prior_lo, p.prior_hi, b.n_grid, b.chunk_size).fit()
    rows = evaluate(est, _load_data(args.test), "bayes")
    path = args.out or _out(args, "bayes_metrics.csv")
    write_metrics_csv(rows, path)
    print(f"pooled rmse {rows[-1].rmse:.5f}; wrote {path}")


def cmd_crb(args, config):
    try:
        rows = read_metrics_csv(args.bias)
    except (ValueError, KeyError) as exc:
        raise InputError(str(exc)) from exc
    curve = crb_curve(config, rows, args.estimator)
    path = args.out or _out(args, "crb.csv")
    write_text(path, crb_to_csv(curve))
    if args.annotate:
        write_metrics_csv(attach_crb(rows, curve), args.annotate)
    print(f"wrote {path}")


def cmd_ood(args, config):
    e = _load_estimator(args.ensemble)
    if not isinstance(e, ens.DeepEnsemble):
        raise ConfigError("ood needs an ensemble directory")
    omegas = config.ood.omega_list if args.shift in ("omega", "both") else ()
    taus = config.ood.sigma_tau_list if args.shift in ("sigma_tau", "both") else ()
    rows = run_ood_uncertainty(e, config, omegas, taus)
    path = args.out or _out(args, "ood.csv")
    write_text(path, ood_to_csv(rows))
    print(f"wrote {path}")


def cmd_tune(args, config):
    data = _load_data(args.train)
    best, trials = random_search_tune(config, data.X, data.y, args.trials, n_jobs=args.threads)
    write_text(_out(args, "trials.csv"), trials_to_csv(trials))
    if best is None:
        raise NumericalDiagnostic("every tuning trial failed")
    write_best(best, _out(args, "best.json"))
    print(f"{sum(not t.failed for t in trials)}/{len(trials)} trials succeeded; best {best}")


def cmd_quantize(args, config):
    src = _load_estimator(args.model)
    if isinstance(src, ens.DeepEnsemble):
        path = args.out or _out(args, "ensemble_int8")
        ens.save_ensemble(ens.quantize_ensemble(src), path)
    else:
        path = args.out or _out(args, "single_int8.model.json")
        save_model(quantize(src), path)
    print(f"wrote {path}")


def cmd_time(args, config):
    e = _load_estimator(args.ensemble)
    if not isinstance(e, ens.DeepEnsemble):
        raise ConfigError("time needs an ensemble directory")
    data = _load_data(args.test)
    p, b = config.physics, config.bayes
    bayes = GridBayesEstimator(p.omega, p.gamma, p.prior_lo, p.prior_hi, b.n_grid, b.chunk_size)
    counts = [c for c in config.timing.counts if c <= len(data)]
    rows = time_inference(e, bayes, data.X, counts, config.timing.repeats)
    path = args.out or _out(args, "timing.csv")
    write_text(path, timing_to_csv(rows))
    for r in rows:
        print(f"n={r.n_trajectories}: ensemble {r.ensemble_s:.4g}s, bayes {r.bayes_s:.4g}s, ratio {r.ratio:.3g}")


def build_parser():
    parser = argparse.ArgumentParser(prog="tlsnet", description="Detuning estimation from photon delay records.")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out-dir", default=".", help="directory for default output paths")
    parser.add_argument("--threads", type=int, default=1, help="worker processes / BLAS threads")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="config override, e.g. data.n_train=1000 (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a train or test dataset")
    p.add_argument("--split", choices=("train", "test"), required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-single", help="train one network")
    p.add_argument("--train", required=True)
    p.add_argument("--loss", choices=("rmse", "msle", "gaussian_nll"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_single)

    p = sub.add_parser("train-ensemble", help="train a deep ensemble")
    p.add_argument("--train", required=True)
    p.add_argument("--adversarial", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_ensemble)

    p = sub.add_parser("eval", help="per-detuning metrics of a model or ensemble")
    p.add_argument("--model", required=True, help="model file or ensemble directory")
    p.add_argument("--test", required=True)
    p.add_argument("--name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bayes-eval", help="per-detuning metrics of the grid posterior mean")
    p.add_argument("--test", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bayes_eval)

    p = sub.add_parser("crb", help="biased Cramér-Rao bound from a bias table")
    p.add_argument("--bias", required=True, help="metrics CSV")
    p.add_argument("--estimator")
    p.add_argument("--annotate", help="also write the metrics with the crb column filled")
    p.add_argument("--out")
    p.set_defaults(func=cmd_crb)

    p = sub.add_parser("ood", help="average predicted variance under generator shifts")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--shift", choices=("omega", "sigma_tau", "both"), default="both")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ood)

    p = sub.add_parser("tune", help="random hyperparameter search")
    p.add_argument("--train", required=True)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("quantize", help="int8 post-training quantization")
    p.add_argument("--model", required=True, help="model file or ensemble directory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("time", help="ensemble versus grid-Bayes inference time")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_time)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        overrides = dict(_parse_override(s) for s in args.set)
        if args.seed is not None:
            overrides["seed"] = args.seed
        config = load_config(args.config, overrides)
        with threadpool_limits(limits=args.threads):
            args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        # e.g. a loss that cannot handle the labels in the data
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, InputError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalDiagnostic as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
