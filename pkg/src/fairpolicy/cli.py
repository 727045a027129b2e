"""Command-line entry point: one verb per pipeline stage.

Exit codes: 0 success, 1 invalid configuration or data, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import _rng
from .analysis import cluster_comparison, partial_sweep, run_comparison, split_indices
from .data_model import CONTINUOUS, Assignment, DataError
from .fair_adjust import fit_scores, mq_adjust_table
from .io import (
    ConfigError, InputError, RunConfig, emit_reports, format_table, load_dataset, read_csv, to_float,
    write_adjusted, write_columns, write_dataset,
)
from .policy_tree import ADJUSTED, CDF, PolicyTree, fit_tree, predict_tree, to_cdf_scale
from .prob_split_tree import ProbSplitPolicy, predict_prob, render, transform
from .scores import evaluate_policy

log = logging.getLogger("fairpolicy")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this verb")
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        # command-line paths are relative to the working directory
        cfg.out = str(Path(args.out).resolve())
    return cfg


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    if not out.is_absolute():
        out = Path(cfg.base_dir) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stamp(args) -> str | None:
    return None if args.no_timestamp else datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_validate(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    print(f"ok: n={data.n}, features={data.features.names}, groups={data.sensitive.k}, "
          f"treatments={data.scores.n_treatments}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import SyntheticSpec, generate_synthetic

    block = {}
    if args.config is not None:
        block = RunConfig.load(args.config).synthetic or {}
    if args.n is not None:
        block["n"] = args.n
    spec = SyntheticSpec(**block)
    seed = args.seed if args.seed is not None else 0
    synth = generate_synthetic(spec, _rng.stream(seed, _rng.SYNTH))
    out = Path(args.out or "synthetic")
    cfg = write_dataset(out, synth.dataset, synth.nuisance, {"seed": seed, "out": "out"})
    truth = {k: np.asarray(v).tolist() for k, v in synth.truth.items()}
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {synth.dataset.n} rows to {out} (config: {cfg})")
    return EXIT_OK


def cmd_adjust(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    out = _out(cfg)
    adjusted = mq_adjust_table(data.features, data.sensitive, cfg.seed)
    write_adjusted(out / "adjusted_features.csv", adjusted)
    scores, _ = fit_scores(data.scores, data.sensitive, cfg.seed)
    write_columns(out / "adjusted_scores.csv",
                  {n: scores.values[:, d] for d, n in enumerate(scores.treatment_names)})
    meta = {"seed": cfg.seed, "config_hash": cfg.hash(), "streams": "features (seed, 1, j); scores (seed, 2, d)"}
    (out / "adjust_metadata.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"wrote adjusted_features.csv and adjusted_scores.csv to {out}")
    return EXIT_OK


def _fit_inputs(cfg: RunConfig, data, target: str):
    if target in ("A", "both"):
        adjusted = mq_adjust_table(data.features, data.sensitive, cfg.seed)
        feats = data.features.with_values(adjusted.adjusted, kind=CONTINUOUS)
        scale = ADJUSTED
    else:
        adjusted, feats, scale = None, data.features, "raw"
    scores = data.scores
    if target in ("scores", "both"):
        scores, _ = fit_scores(data.scores, data.sensitive, cfg.seed)
    return adjusted, feats, scores, scale


def cmd_fit(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    out = _out(cfg)
    adjusted, feats, scores, scale = _fit_inputs(cfg, data, args.target)
    tree = fit_tree(feats, scores, depth=cfg.depth, n_points=cfg.n_points, scale=scale,
                    treatment_names=data.scores.treatment_names)
    if adjusted is not None:
        tree = to_cdf_scale(tree, adjusted.model)
    (out / "tree.json").write_text(json.dumps(tree.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "tree.txt").write_text(tree.render() + "\n", encoding="utf-8")
    print(tree.render())
    return EXIT_OK


def _load_tree(path: str) -> PolicyTree:
    with open(path, encoding="utf-8") as fh:
        return PolicyTree.from_dict(json.load(fh))


def cmd_transform(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    out = _out(cfg)
    tree = _load_tree(args.tree)
    adjusted = mq_adjust_table(data.features, data.sensitive, cfg.seed)
    if tree.scale == ADJUSTED:
        tree = to_cdf_scale(tree, adjusted.model)
    if tree.scale != CDF:
        raise ConfigError(f"transform needs a cdf-scale or adjusted-scale tree, got scale {tree.scale!r}")
    policy = transform(tree, adjusted, data.features, data.sensitive)
    (out / "prob_split.json").write_text(json.dumps(policy.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "prob_split.txt").write_text(render(policy) + "\n", encoding="utf-8")
    print(render(policy))
    return EXIT_OK


def _assignment_for(args, cfg, data) -> np.ndarray:
    m = data.scores.n_treatments
    if args.assignment:
        path = Path(args.assignment)
        cols = read_csv(path)
        d = to_float(path, next(iter(cols)), next(iter(cols.values())))
        if len(d) != data.n or np.any(d != np.round(d)) or np.any((d < 0) | (d >= m)):
            raise InputError(f"{path}: need {data.n} integer treatments in 0..{m - 1}")
        return d.astype(np.int64)
    if args.tree:
        with open(args.tree, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "groups" in doc:
            policy = ProbSplitPolicy.from_dict(doc)
            rng = _rng.stream(cfg.seed, _rng.PREDICT, 0)
            return predict_prob(policy, data.features, data.sensitive, rng).treatments
        tree = PolicyTree.from_dict(doc)
        if tree.scale == "raw":
            return predict_tree(tree, data.features).treatments
        raise ConfigError("evaluate predicts raw-scale trees only; transform cdf-scale trees first")
    if data.observed is not None:
        return data.observed.treatments
    raise ConfigError("evaluate needs --assignment, --tree, or an observed assignment in the config")


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    d = _assignment_for(args, cfg, data)
    rep = evaluate_policy(Assignment(d, data.scores.n_treatments), data.scores, data.sensitive,
                          cfg.prior_concentration)
    header = ["policy_value", "cramers_v", "p_value", "log_bf"] + [f"share_{i}" for i in range(len(rep.program_shares))]
    row = [rep.policy_value, rep.fairness.cramers_v, rep.fairness.p_value, rep.fairness.log_bf,
           *rep.program_shares.tolist()]
    print(format_table(header, [row]))
    if args.out is not None:
        from .io import write_csv

        out = _out(cfg)
        write_csv(out / "evaluation.csv", header, [row])
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    acfg = cfg.analysis()
    comp = run_comparison(data, acfg)
    out = _out(cfg)
    emit_reports(out, cfg, comparison=comp, figures=not args.no_figures, timestamp=_stamp(args))
    print((out / "comparison.txt").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    acfg = cfg.analysis()
    points = partial_sweep(data, acfg)
    out = _out(cfg)
    emit_reports(out, cfg, sweep=points, figures=not args.no_figures, timestamp=_stamp(args))
    print(format_table(["target", "lambda", "policy_value", "cramers_v"],
                       [[p.target, p.lam, p.policy_value, p.cramers_v] for p in points]))
    return EXIT_OK


def cmd_cluster(args) -> int:
    cfg = _config(args)
    data = load_dataset(cfg)
    acfg = cfg.analysis()
    split = split_indices(data.n, acfg.train_frac, acfg.seed)
    comp = run_comparison(data, acfg, split)
    summary = cluster_comparison(comp, data, acfg, split)
    out = _out(cfg)
    emit_reports(out, cfg, clusters=summary, figures=not args.no_figures, timestamp=_stamp(args))
    print((out / "clusters.csv").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    reports = argparse.ArgumentParser(add_help=False)
    reports.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    reports.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from run_metadata.json")

    p = argparse.ArgumentParser(prog="fairpolicy", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("validate", parents=[common], help="load and validate inputs").set_defaults(fn=cmd_validate)
    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset and config")
    s.add_argument("--n", type=int)
    s.set_defaults(fn=cmd_synth)
    sub.add_parser("adjust", parents=[common], help="MQ-adjust features and scores").set_defaults(fn=cmd_adjust)
    s = sub.add_parser("fit", parents=[common], help="fit a policy tree")
    s.add_argument("--target", choices=["none", "A", "scores", "both"], default="none")
    s.set_defaults(fn=cmd_fit)
    s = sub.add_parser("transform", parents=[common], help="turn a cdf-scale tree into group trees")
    s.add_argument("--tree", required=True)
    s.set_defaults(fn=cmd_transform)
    s = sub.add_parser("evaluate", parents=[common], help="policy value and fairness of an allocation")
    s.add_argument("--assignment", help="CSV with one treatment column")
    s.add_argument("--tree", help="raw-scale tree or probabilistic split policy JSON")
    s.set_defaults(fn=cmd_evaluate)
    for verb, fn, text in (("compare", cmd_compare, "benchmark comparison table"),
                           ("sweep", cmd_sweep, "partial fairness sweep"),
                           ("cluster", cmd_cluster, "winners and losers clustering")):
        sub.add_parser(verb, parents=[common, reports], help=text).set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, InputError, DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
