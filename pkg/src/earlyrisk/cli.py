"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .classifier import ConfigError, LevelConfig, SelectionPolicy, classify
from .data import POSITIVE, DataError, load_datasets
from .evaluation import DEFAULT_DEADLINES, ERISK_C_FN, ERISK_C_FP, ERISK_C_TP, decide_all, evaluate, stream_items
from .explain import build_explanation, dump_json, render_html
from .model import Hyperparams, Model, ModelError, Tokenizer
from .stream import EarlyPolicy, run_subject, write_trajectory_csv
from .tuning import CrossValidator, SearchSpec, format_score_table, grid_search, write_best_config, write_score_table

log = logging.getLogger("earlyrisk")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _add_hyper(p):
    p.add_argument("--sigma", type=float, default=None, help="smoothness (default 0.455)")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="significance (default 1)")
    p.add_argument("--rho", type=float, default=None, help="sanction (default 1)")
    p.add_argument("--config", help="best-config JSON written by `tune`")


def _add_levels(p):
    p.add_argument("--operator", choices=("addition", "maximum", "mean"), default="addition", help="summary operator for every level")


def _add_policy(p):
    p.add_argument("--policy", choices=("threshold", "delta"), default="threshold")
    p.add_argument("--ratio-min", type=float, default=4.0)
    p.add_argument("--min-change", type=float, default=0.0)
    p.add_argument("--positive", default=POSITIVE, help="name of the positive category")
    p.add_argument("--negative", default=None, help="name of the negative category (default: the other one)")
    p.add_argument("--mode", choices=("per-post", "chunked"), default="per-post")
    p.add_argument("--chunks", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)


def _add_erde(p):
    p.add_argument("--o", dest="deadlines", type=_ints, default=list(DEFAULT_DEADLINES), help="comma separated ERDE deadlines")
    p.add_argument("--cfp", type=float, default=ERISK_C_FP)
    p.add_argument("--cfn", type=float, default=ERISK_C_FN)
    p.add_argument("--ctp", type=float, default=ERISK_C_TP)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="earlyrisk", description="Incremental text classification and early risk detection.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="learn a model from labeled corpora")
    p.add_argument("corpus", nargs="*", help="JSONL files or subject directories")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--merge", nargs="+", default=[], metavar="MODEL", help="model files to merge into the result")
    p.add_argument("--categories", help="comma separated category order (default: sorted labels)")
    _add_hyper(p)

    p = sub.add_parser("classify", help="classify a single text")
    p.add_argument("model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--file")
    p.add_argument("--gamma", type=float, default=0.0, help="band policy width (0 = argmax)")
    p.add_argument("--tree", action="store_true", help="include per-level vectors")
    _add_levels(p)
    _add_hyper(p)

    p = sub.add_parser("stream", help="stream subjects and emit early decisions")
    p.add_argument("model")
    p.add_argument("dataset", nargs="+")
    p.add_argument("--decisions", help="JSONL output (default stdout)")
    p.add_argument("--trajectories", help="directory for per-subject trajectory CSVs")
    _add_policy(p)
    _add_levels(p)
    _add_hyper(p)

    p = sub.add_parser("eval", help="early-detection metrics on labeled subjects")
    p.add_argument("model")
    p.add_argument("dataset", nargs="+")
    p.add_argument("--report", help="JSON report path (default stdout)")
    p.add_argument("--csv", help="CSV report path")
    _add_policy(p)
    _add_erde(p)
    _add_levels(p)
    _add_hyper(p)

    p = sub.add_parser("tune", help="cross-validated hyper-parameter search")
    p.add_argument("dataset", nargs="+")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--objective", default="erde", choices=("erde", "f1"))
    p.add_argument("--objective-o", type=int, default=50, help="deadline of the ERDE objective")
    p.add_argument("--lambda-grid", type=_floats, default=[1.0])
    p.add_argument("--rho-grid", type=_floats, default=[1.0])
    p.add_argument("--sigma-center", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", help="CSV score table path (default stdout)")
    p.add_argument("--best", help="best-config JSON path")
    p.add_argument("--policy", choices=("threshold", "delta"), default="threshold")
    p.add_argument("--ratio-min", type=float, default=4.0)
    p.add_argument("--min-change", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    _add_erde(p)
    _add_levels(p)

    p = sub.add_parser("explain", help="HTML explanation of a text or a subject")
    p.add_argument("model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--file")
    src.add_argument("--dataset")
    p.add_argument("--subject", help="subject id within --dataset (default: first)")
    p.add_argument("--focus", default=None, help="category to highlight (default: positive or first)")
    p.add_argument("-o", "--output", required=True, help="HTML output path")
    p.add_argument("--json", help="also dump the annotated tree as JSON")
    _add_levels(p)
    _add_hyper(p)

    p = sub.add_parser("inspect", help="top terms of a category")
    p.add_argument("model")
    p.add_argument("--category", required=True)
    p.add_argument("-k", type=int, default=20)
    p.add_argument("--json", action="store_true")
    _add_hyper(p)
    return parser


def _hyperparams(args, base: Hyperparams | None = None) -> Hyperparams:
    base = base or Hyperparams()
    vals = base.to_dict()
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read config {args.config}: {e}") from None
        vals.update(cfg.get("hyperparams", cfg))
    for key, attr in (("sigma", "sigma"), ("lambda", "lam"), ("rho", "rho")):
        v = getattr(args, attr, None)
        if v is not None:
            vals[key] = v
    try:
        return Hyperparams.from_dict(vals)
    except ModelError as e:
        raise UsageError(str(e)) from None


def _load_model(args) -> Model:
    try:
        model = Model.load(args.model)
    except OSError as e:
        raise DataError(f"cannot read model {args.model}: {e}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise DataError(f"invalid model {args.model}: {e}") from None
    hp = _hyperparams(args, model.hyperparams)
    return model if hp == model.hyperparams else model.with_hyperparams(hp)


def _level_config(args) -> LevelConfig:
    return LevelConfig.default(args.operator)


def _policy(args, model: Model) -> EarlyPolicy:
    pos = model.index_of(args.positive)
    if args.negative is not None:
        neg = model.index_of(args.negative)
    elif model.n_categories == 2:
        neg = 1 - pos
    else:
        raise UsageError("--negative is required for models with more than two categories")
    if args.policy == "threshold":
        return EarlyPolicy.threshold(pos, neg)
    return EarlyPolicy.delta(args.ratio_min, args.min_change, pos, neg)


def _mode(args) -> str:
    return "per_post" if args.mode == "per-post" else "chunked"


def _read_text(args) -> str:
    if args.text is not None:
        return args.text
    try:
        return Path(args.file).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {args.file}: {e}") from None


def cmd_train(args) -> int:
    if not args.corpus and not args.merge:
        raise UsageError("nothing to train on: give corpus paths and/or --merge models")
    documents = []
    for s in load_datasets(args.corpus):
        if s.truth is None:
            raise DataError(f"subject {s.subject_id!r} has no label")
        documents.extend((t, s.truth) for t in s.items)
    if args.corpus and not documents:
        raise DataError("corpus contains no documents")
    labels = sorted({c for _, c in documents})
    if args.categories:
        order = [c.strip() for c in args.categories.split(",") if c.strip()]
        missing = set(labels) - set(order)
        if missing:
            raise DataError(f"labels not in --categories: {sorted(missing)}")
    else:
        order = labels
    model = None
    if documents:
        if len(order) < 2:
            raise DataError(f"need at least two categories, found {order}")
        model = Model(order, _hyperparams(args), Tokenizer())
        model.learn(documents)
    for path in args.merge:
        try:
            other = Model.load(path)
        except (OSError, ValueError, KeyError) as e:
            raise DataError(f"cannot read model {path}: {e}") from None
        if model is None:
            model = other.with_hyperparams(_hyperparams(args, other.hyperparams))
        else:
            model = model.merge(other)
    model.save(args.output)
    for p in model.categories:
        print(f"{p.name}\tdocs={p.doc_count}\tvocabulary={len(p)}")
    return EXIT_OK


def cmd_classify(args) -> int:
    model = _load_model(args)
    result = classify(model, _read_text(args), _level_config(args), SelectionPolicy(args.gamma))
    out = result.to_dict(with_tree=args.tree)
    out["categories"] = model.category_names
    print(json.dumps(out))
    return EXIT_OK


def cmd_stream(args) -> int:
    model = _load_model(args)
    policy = _policy(args, model)
    level_config = _level_config(args)
    dataset = load_datasets(args.dataset)
    model.update_global_values()
    traj_dir = Path(args.trajectories) if args.trajectories else None
    if traj_dir is not None:
        traj_dir.mkdir(parents=True, exist_ok=True)
        decisions = []
        for s in dataset:
            run = run_subject(model, stream_items(s, _mode(args), args.chunks), policy, level_config, s.subject_id)
            write_trajectory_csv(run, traj_dir / f"{s.subject_id}.csv", policy.positive_index, policy.negative_index)
            decisions.append((s.subject_id, run.decision.value, run.k, s.truth))
    else:
        decisions = [
            (d.subject_id, d.decision, d.k, d.truth)
            for d in decide_all(model, policy, dataset, _mode(args), args.chunks, level_config, args.jobs)
        ]
    lines = []
    for sid, decision, k, truth in decisions:
        rec = {"subject_id": sid, "decision": decision, "k": k}
        if truth is not None:
            rec["label"] = truth
        lines.append(json.dumps(rec))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.decisions:
        Path(args.decisions).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args)
    report = evaluate(
        model,
        _policy(args, model),
        load_datasets(args.dataset),
        mode=_mode(args),
        deadlines=args.deadlines,
        chunks=args.chunks,
        c_fp=args.cfp,
        c_fn=args.cfn,
        c_tp=args.ctp,
        level_config=_level_config(args),
        jobs=args.jobs,
    )
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    else:
        print(report.to_json())
    if args.csv:
        report.write_csv(args.csv)
    return EXIT_OK


def cmd_tune(args) -> int:
    dataset = load_datasets(args.dataset)
    spec = SearchSpec(
        folds=args.folds,
        objective=args.objective,
        o=args.objective_o,
        sigma_center=args.sigma_center,
        lambda_grid=tuple(args.lambda_grid),
        rho_grid=tuple(args.rho_grid),
        seed=args.seed,
        c_fp=args.cfp,
        c_fn=args.cfn,
        c_tp=args.ctp,
    )
    cv = CrossValidator(dataset, spec, level_config=_level_config(args), jobs=args.jobs)
    pos = cv.categories.index(POSITIVE)
    if args.policy == "delta":
        cv.policy = EarlyPolicy.delta(args.ratio_min, args.min_change, pos, 1 - pos)
    rows = grid_search(cv)
    if args.table:
        write_score_table(rows, args.table)
    else:
        sys.stdout.write(format_score_table(rows))
    if args.best:
        write_best_config(rows, spec, args.best)
    return EXIT_OK


def cmd_explain(args) -> int:
    model = _load_model(args)
    if args.dataset:
        streams = load_datasets([args.dataset])
        if not streams:
            raise DataError("dataset is empty")
        if args.subject is None:
            stream = streams[0]
        else:
            matches = [s for s in streams if s.subject_id == args.subject]
            if not matches:
                raise DataError(f"subject {args.subject!r} not found")
            stream = matches[0]
        texts = stream.items
    else:
        texts = [_read_text(args)]
    if args.focus is not None:
        focus = model.index_of(args.focus)
    else:
        focus = model.index_of(POSITIVE) if POSITIVE in model.category_names else 0
    tree = build_explanation(model, texts, _level_config(args), focus)
    try:
        render_html(tree, focus, args.output)
        if args.json:
            dump_json(tree, args.json)
    except OSError as e:
        raise DataError(f"cannot write report: {e}") from None
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = _load_model(args)
    terms = model.top_terms(args.category, args.k)
    i = model.index_of(args.category)
    rows = []
    for term, gv in terms:
        lvs, sgs, sns = model.term_factors(term)
        rows.append({"term": term, "gv": gv, "lv": lvs[i], "sg": sgs[i], "sn": sns[i]})
    if args.json:
        print(json.dumps(rows))
    else:
        print("term\tgv\tlv\tsg\tsn")
        for r in rows:
            print(f"{r['term']}\t{r['gv']:.6f}\t{r['lv']:.6f}\t{r['sg']:.6f}\t{r['sn']:.6f}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "classify": cmd_classify,
    "stream": cmd_stream,
    "eval": cmd_eval,
    "tune": cmd_tune,
    "explain": cmd_explain,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"earlyrisk: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelError, ConfigError) as e:
        print(f"earlyrisk: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"earlyrisk: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
