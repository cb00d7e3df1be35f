"""Command-line entry point: ``digmilp <subcommand> ...``.

Exit codes: 0 ok, 1 verification found non-feasible-bounded instances,
2 invalid input, 3 solver limit or labeling failure, 4 assembly failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import METRICS, ObjectivePredictor, corpus_stats, effort_profile, js_similarity, pearson
from .analytics import optimal_values, rel_mse, solver_configs
from .baselines import BowlyGenerator, RandomDecoderGenerator
from .datasets import generate_family
from .exceptions import DigMilpError, FormatError, SolverLimit, ValidationError
from .instance import Status
from .io import load_instances, load_labeled, store_instances
from .nn.checkpoint import MAGIC, load_checkpoint
from .pipeline import PipelineConfig, StageError, run_pipeline
from .solver import SolverParams, classify, extract_labels, solve_milp
from .analytics.stats import instance_stats
from .vae import DEFAULT_ALPHA, DigMilpGenerator, label_dataset

log = logging.getLogger("digmilp")


def _table(header, rows) -> str:
    cells = [list(map(str, header))] + [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells)


def _emit(args, doc, header=None, rows=None):
    if getattr(args, "json", False) or rows is None:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(_table(header, rows))


def _solver_params(args) -> SolverParams:
    if getattr(args, "solver_config", None):
        return SolverParams.from_dict(json.loads(Path(args.solver_config).read_text()))
    return SolverParams()


def _labeled_or_solve(path):
    insts, labels = load_labeled(path)
    if not insts:
        raise ValidationError(f"{path}: no instances found")
    return insts, (labels if all(t is not None for t in labels) else None)


# subcommands


def cmd_generate_dataset(args):
    kw = {}
    if args.family == "sc":
        for key in ("n_cons", "n_vars", "density"):
            if getattr(args, key) is not None:
                kw[key] = getattr(args, key)
    else:
        for key in ("n_items", "n_bids"):
            if getattr(args, key) is not None:
                kw[key] = getattr(args, key)
    insts = generate_family(args.family, args.count, args.seed, **kw)
    store_instances(insts, args.out)
    print(f"wrote {len(insts)} instance(s) to {args.out}")


def cmd_solve(args):
    params = _solver_params(args)
    limit = False
    for inst in load_instances(args.path):
        rep = solve_milp(inst, params)
        limit |= rep.limit_hit
        print(f"{inst.name}: {rep.line()}")
    if limit:
        raise SolverLimit("node limit reached on at least one instance")


def cmd_label(args):
    params = _solver_params(args)
    insts = load_instances(args.path)
    labels = [extract_labels(i, params, first_incumbent=args.first_incumbent) for i in insts]
    store_instances(insts, args.out, labels)
    print(f"labeled {len(insts)} instance(s) into {args.out}")


def cmd_train(args):
    insts, labels = _labeled_or_solve(args.data)
    alpha = args.alpha if args.alpha is not None else DEFAULT_ALPHA[args.family]
    gen = DigMilpGenerator(alpha=alpha, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                           latent_dim=args.latent_dim, hidden_dim=args.hidden_dim, seed=args.seed)
    gen.fit(insts, labels)
    gen.save(args.out)
    print(f"loss {gen.loss_trace_[0]:.6g} -> {gen.loss_trace_[-1]:.6g}; saved {args.out}")


def cmd_sample(args):
    insts, labels = _labeled_or_solve(args.data)
    gen = DigMilpGenerator.load(args.model)
    samples = gen.sample(args.count, gamma=args.gamma, seed=args.seed, dataset=label_dataset(insts, labels))
    store_instances(samples, args.out)
    print(f"wrote {len(samples)} sample(s) to {args.out}")


def cmd_baseline(args):
    insts, labels = _labeled_or_solve(args.data)
    if args.kind == "bowly":
        samples = BowlyGenerator(family=args.family, seed=args.seed).fit(insts, labels).sample(args.count)
    else:
        samples = RandomDecoderGenerator(seed=args.seed).fit(insts, labels).sample(args.count, gamma=args.gamma)
    store_instances(samples, args.out)
    print(f"wrote {len(samples)} {args.kind} instance(s) to {args.out}")


def cmd_verify(args):
    insts = load_instances(args.path)
    params = _solver_params(args)
    statuses = [classify(i, params) for i in insts]
    ok = sum(s is Status.OPTIMAL for s in statuses)
    for inst, st in zip(insts, statuses):
        if st is not Status.OPTIMAL:
            print(f"{inst.name}: {st.value}")
    print(f"feasible-bounded: {ok}/{len(insts)}")
    return 0 if ok == len(insts) else 1


def cmd_stats(args):
    rows, doc = [], {}
    for path in args.paths:
        mat = corpus_stats(load_instances(path))
        means = mat.mean(axis=0)
        doc[path] = {"count": int(mat.shape[0]), **dict(zip(METRICS, map(float, means)))}
        rows.append([path, mat.shape[0], *map(float, means)])
    _emit(args, doc, ["corpus", "count", *METRICS], rows)


def cmd_similarity(args):
    orig = load_instances(args.original)
    cands = [load_instances(c) for c in args.candidate]
    reports = js_similarity(orig, cands, bins=args.bins, names=args.candidate)
    doc = [r.to_dict() for r in reports]
    rows = [[r.name, r.score, *(r.distances[m] for m in METRICS)] for r in reports]
    _emit(args, doc, ["candidate", "score", *(f"js:{m}" for m in METRICS)], rows)


def cmd_correlate(args):
    configs = solver_configs(args.configs, args.seed)
    ea = effort_profile(load_instances(args.a), configs, args.metric)
    eb = effort_profile(load_instances(args.b), configs, args.metric)
    rep = pearson(ea, eb)
    doc = {**rep.to_dict(), "metric": args.metric, "effort_a": ea.tolist(), "effort_b": eb.tolist()}
    _emit(args, doc, ["r", "p", "n"], [[rep.r, rep.p, rep.n]])


def cmd_predict_train(args):
    insts = load_instances(args.data)
    model = ObjectivePredictor(hidden=args.hidden, epochs=args.epochs, batch_size=args.batch_size,
                               lr=args.lr, seed=args.seed).fit(insts)
    model.save(args.out)
    print(f"loss {model.loss_trace_[0]:.6g} -> {model.loss_trace_[-1]:.6g}; saved {args.out}")


def cmd_predict_eval(args):
    model = ObjectivePredictor.load(args.model)
    insts = load_instances(args.data)
    truth = optimal_values(insts)
    preds = model.predict(insts)
    doc = {"rel_mse": rel_mse(preds, truth), "count": len(insts)}
    _emit(args, doc, ["rel_mse", "count"], [[doc["rel_mse"], doc["count"]]])


def cmd_pipeline(args):
    cfg = PipelineConfig.load(args.config)
    doc = run_pipeline(cfg, args.out)
    root = Path(args.out or cfg.paths.out_dir)
    print((root / "verify.txt").read_text().strip())
    for name, st in doc["stages"].items():
        print(f"{name:<11}{st['sha256']}")


def describe(path) -> str:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        tensors, meta = load_checkpoint(path)
        count = sum(int(np.size(v)) for v in tensors.values())
        lines = [f"checkpoint {meta.get('kind', 'unknown')}: {count} parameters in {len(tensors)} tensors"]
        lines += [f"  {k} {list(np.shape(v))}" for k, v in tensors.items()]
        return "\n".join(lines)
    if not raw.lstrip().startswith((b"{", b"[")):
        raise FormatError(f"{path}: unknown format (offset 0)")
    insts = load_instances(path)
    lines = []
    for inst in insts:
        st = instance_stats(inst)
        lines.append(f"{inst.name}: {inst.n_cons} cons × {inst.n_vars} vars, density {st.density_mean:.4g}, "
                     f"{inst.mode.value}")
    return "\n".join(lines)


def cmd_describe(args):
    print(describe(args.path))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="digmilp", description="Generate, solve and score MILP instances.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    g = add("generate-dataset", cmd_generate_dataset, "synthesize SC or CA instances")
    g.add_argument("--family", choices=["sc", "ca"], required=True)
    g.add_argument("--count", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-cons", type=int)
    g.add_argument("--n-vars", type=int)
    g.add_argument("--density", type=float)
    g.add_argument("--n-items", type=int)
    g.add_argument("--n-bids", type=int)
    g.add_argument("--out", required=True)

    for name, fn, help_ in (("solve", cmd_solve, "solve instances to optimality"),
                            ("verify", cmd_verify, "check every instance is feasible-bounded")):
        s = add(name, fn, help_)
        s.add_argument("path")
        s.add_argument("--solver-config", help="JSON file of solver parameters")

    s = add("label", cmd_label, "attach primal/dual/slack labels")
    s.add_argument("path")
    s.add_argument("--out", required=True)
    s.add_argument("--solver-config")
    s.add_argument("--first-incumbent", action="store_true")

    s = add("train", cmd_train, "train the generator")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--family", choices=["sc", "ca"], default="sc", help="picks the default alpha")
    s.add_argument("--alpha", type=float, help="reconstruction weight (default: 5 for sc, 150 for ca)")
    s.add_argument("--batch-size", type=int, default=8)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--latent-dim", type=int, default=8)
    s.add_argument("--hidden-dim", type=int, default=32)
    s.add_argument("--seed", type=int, default=123)

    s = add("sample", cmd_sample, "sample new instances from a trained generator")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--gamma", type=float, default=0.1)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = add("baseline", cmd_baseline, "sample from a comparison generator")
    s.add_argument("--kind", choices=["bowly", "random"], required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--family", default="sc")
    s.add_argument("--gamma", type=float, default=0.1)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = add("stats", cmd_stats, "structural statistics per corpus")
    s.add_argument("paths", nargs="+")
    s.add_argument("--json", action="store_true")

    s = add("similarity", cmd_similarity, "JS similarity of candidates to an original corpus")
    s.add_argument("--original", required=True)
    s.add_argument("--candidate", nargs="+", required=True)
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--json", action="store_true")

    s = add("correlate", cmd_correlate, "effort correlation across solver configurations")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--configs", type=int, default=45)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--metric", choices=["nodes", "pivots"], default="nodes")
    s.add_argument("--json", action="store_true")

    s = add("predict-train", cmd_predict_train, "train the optimal-value predictor")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--hidden", type=int, default=32)
    s.add_argument("--batch-size", type=int, default=8)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=0)

    s = add("predict-eval", cmd_predict_eval, "relative MSE of a trained predictor")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--json", action="store_true")

    s = add("pipeline", cmd_pipeline, "run generate -> label -> train -> sample -> verify -> similarity")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides paths.out_dir)")

    s = add("describe", cmd_describe, "summarize an instance file or checkpoint")
    s.add_argument("path")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args) or 0
    except StageError as e:
        print(f"error in stage {e.stage}: {e.cause}", file=sys.stderr)
        return e.exit_code
    except DigMilpError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
