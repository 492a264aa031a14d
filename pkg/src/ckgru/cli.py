"""Command-line surface.

Subcommands: preprocess, train, evaluate, cv, ablate, predict,
attn-export, gradcheck, synth-gen.  Every command takes --config and
--seed; failures print a single ``ERROR: ...`` line and exit nonzero.
"""

import argparse
import html
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .config import RunConfig, load_config
from .data import LABELS, ingest_dataset, load_bundle, prepare_samples, write_tokenized
from .gradcheck import finite_diff_check
from .model import EncodedSample, ModelConfig, SentimentModel
from .rng import Rng
from .synth import SPECS, synth_gen
from .training import Fitted, Metrics, Variant, ablate, cross_validate, fit

_FMT = "{:.12g}"


def _fmt(x):
    return _FMT.format(x)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ckgru", description="knowledge-gated BiGRU tweet sentiment toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="path to a run configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.set_defaults(func=fn)
        return p

    p = add("preprocess", cmd_preprocess, help="normalize/tokenize/tag a dataset")
    p.add_argument("--out", default="tokenized.tsv")

    p = add("train", cmd_train, help="train on the full dataset")
    p.add_argument("--out", default="run", help="output directory")

    p = add("evaluate", cmd_evaluate, help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="optional metrics TSV path")

    p = add("cv", cmd_cv, help="k-fold cross-validation")
    p.add_argument("--out", default="cv", help="output directory")
    p.add_argument("--folds", type=int, default=10)

    p = add("ablate", cmd_ablate, help="cross-validate component ablations")
    p.add_argument("--out", default="ablation", help="output directory")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--switches", default="", help="comma list, e.g. no_vad,plain_bigru")

    p = add("predict", cmd_predict, help="label a dataset with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default="predictions.tsv")

    p = add("attn-export", cmd_attn_export, help="export attention weights")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default="attention.tsv")
    p.add_argument("--format", choices=("tsv", "html"), default="tsv")

    p = add("gradcheck", cmd_gradcheck, help="finite-difference check of the full model")

    p = add("synth-gen", cmd_synth_gen, help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, choices=SPECS)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--out", default="synth", help="output directory")
    p.add_argument("--dc", type=int, default=8, help="concept dimension for concept_task")

    return parser


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _load_dataset(cfg, require_labels):
    if not cfg.dataset:
        raise ValueError("no dataset configured (set [data] dataset)")
    raws = ingest_dataset(cfg.dataset, require_labels=require_labels)
    bundle = load_bundle(cfg)
    return prepare_samples(raws, bundle, cfg), bundle


def write_metrics_tsv(path, rows):
    """rows: iterable of (variant, fold_label, metrics dict)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("variant\tfold\t" + "\t".join(Metrics.FIELDS) + "\n")
        for variant, fold, metrics in rows:
            cells = [variant, str(fold)] + [_fmt(metrics[name]) for name in Metrics.FIELDS]
            fh.write("\t".join(cells) + "\n")


def _result_rows(results):
    for result in results:
        for i, m in enumerate(result.per_fold):
            yield result.variant, i + 1, m.as_dict()
        yield result.variant, "mean", result.mean


def write_summary_json(path, results):
    summary = {r.variant: {k: _fmt(v) for k, v in r.mean.items()} for r in results}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_preprocess(args):
    cfg = _load_cfg(args)
    prepared, _ = _load_dataset(cfg, require_labels=False)
    write_tokenized(args.out, prepared)
    print(f"wrote {len(prepared)} rows to {args.out}")
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    prepared, bundle = _load_dataset(cfg, require_labels=True)
    fitted = fit(prepared, cfg, file_embeddings=bundle.embeddings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.ckpt", fitted, cfg.max_len)
    with open(out / "loss_curve.tsv", "w", encoding="utf-8") as fh:
        fh.write("epoch\tloss\n")
        for epoch, loss in enumerate(fitted.loss_curve, 1):
            fh.write(f"{epoch}\t{_fmt(loss)}\n")
    print(f"trained {cfg.epochs} epochs; final loss {_fmt(fitted.loss_curve[-1])}; "
          f"checkpoint at {out / 'model.ckpt'}")
    return 0


def _fitted_from_checkpoint(path, cfg):
    model, embedding, selection, scaler, max_len = load_model(path)
    cfg.max_len = max_len
    return Fitted(model, embedding, selection, scaler, [], cfg, Variant())


def cmd_evaluate(args):
    cfg = _load_cfg(args)
    fitted = _fitted_from_checkpoint(args.checkpoint, cfg)
    prepared, _ = _load_dataset(cfg, require_labels=True)
    metrics = fitted.evaluate(prepared)
    for name in Metrics.FIELDS:
        print(f"{name}\t{_fmt(getattr(metrics, name))}")
    if args.out:
        write_metrics_tsv(args.out, [("checkpoint", "all", metrics.as_dict())])
    return 0


def cmd_cv(args):
    cfg = _load_cfg(args)
    prepared, bundle = _load_dataset(cfg, require_labels=True)
    result = cross_validate(prepared, cfg, folds=args.folds,
                            file_embeddings=bundle.embeddings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_tsv(out / "metrics.tsv", _result_rows([result]))
    write_summary_json(out / "summary.json", [result])
    print(f"mean accuracy {_fmt(result.mean['accuracy'])} over {args.folds} folds; "
          f"wrote {out / 'metrics.tsv'}")
    return 0


def cmd_ablate(args):
    cfg = _load_cfg(args)
    prepared, bundle = _load_dataset(cfg, require_labels=True)
    switches = [s for s in args.switches.split(",") if s.strip()]
    results = ablate(prepared, cfg, switches, folds=args.folds,
                     file_embeddings=bundle.embeddings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_tsv(out / "ablation.tsv", _result_rows(results))
    write_summary_json(out / "summary.json", results)
    for result in results:
        print(f"{result.variant}\taccuracy {_fmt(result.mean['accuracy'])}")
    return 0


def cmd_predict(args):
    cfg = _load_cfg(args)
    fitted = _fitted_from_checkpoint(args.checkpoint, cfg)
    prepared, _ = _load_dataset(cfg, require_labels=False)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("id\tlabel\t" + "\t".join(f"p_{name}" for name in LABELS) + "\n")
        for p in prepared:
            pred, probs, _ = fitted.model.predict(fitted.encode(p))
            cells = [p.tweet_id, LABELS[pred]] + [_fmt(x) for x in probs]
            fh.write("\t".join(cells) + "\n")
    print(f"wrote predictions for {len(prepared)} rows to {args.out}")
    return 0


def cmd_attn_export(args):
    cfg = _load_cfg(args)
    fitted = _fitted_from_checkpoint(args.checkpoint, cfg)
    prepared, _ = _load_dataset(cfg, require_labels=False)
    records = []
    for p in prepared:
        _, _, weights = fitted.model.predict(fitted.encode(p))
        records.append((p.tweet_id, p.tokens, weights[-1]))
    if args.format == "tsv":
        _write_attn_tsv(args.out, records)
    else:
        _write_attn_html(args.out, records)
    print(f"wrote attention weights for {len(records)} tweets to {args.out}")
    return 0


def _write_attn_tsv(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tposition\ttoken\tweight\n")
        for tweet_id, tokens, weights in records:
            for pos, (tok, w) in enumerate(zip(tokens, weights)):
                fh.write(f"{tweet_id}\t{pos}\t{tok}\t{float(w)!r}\n")


def _write_attn_html(path, records):
    """Token heatmap: background opacity follows the min-max scaled weight
    within each tweet; data-weight carries the exact value."""
    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset='utf-8'><title>attention heatmap</title>",
        "<style>span.tok{padding:2px 4px;margin:1px;border-radius:3px;"
        "display:inline-block}</style></head><body>",
    ]
    for tweet_id, tokens, weights in records:
        lo, hi = float(min(weights)), float(max(weights))
        span = hi - lo
        parts.append(f"<div class='tweet' data-id='{html.escape(tweet_id)}'>")
        for pos, (tok, w) in enumerate(zip(tokens, weights)):
            intensity = (float(w) - lo) / span if span > 0 else 0.5
            parts.append(
                f"<span class='tok' data-position='{pos}' data-weight='{float(w)!r}' "
                f"style='background: rgba(214, 39, 40, {intensity:.4f})'>"
                f"{html.escape(tok)}</span>")
        parts.append("</div>")
    parts.append("</body></html>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def toy_gradcheck_setup(seed, h=8, d_w=8, d_c=4, k=5, vocab=12):
    """Small full-architecture fixture for finite-difference checks."""
    rng = Rng(seed, stream=7)
    mcfg = ModelConfig(d_w=d_w, d_c=d_c, h=h, d_red=6, gcm_iterations=2,
                       dropout=0.0, pos_size=5, dep_size=4, n_meta=3)
    from .model import EmbeddingProvider

    table = rng.uniform_block(vocab * d_w, -0.1, 0.1).reshape(vocab, d_w)
    tokens = [f"w{i}" for i in range(vocab - 1)]
    embedding = EmbeddingProvider.from_vocab(tokens, table)
    model = SentimentModel(mcfg, embedding, rng)
    onehot = np.zeros((k, mcfg.pos_size + mcfg.dep_size))
    for t in range(k):
        onehot[t, rng.randbelow(mcfg.pos_size)] = 1.0
        onehot[t, mcfg.pos_size + rng.randbelow(mcfg.dep_size)] = 1.0
    sample = EncodedSample(
        sample_id="toy",
        tokens=[f"w{i % (vocab - 1)}" for i in range(k)],
        token_ids=np.asarray([rng.randbelow(vocab) for _ in range(k)], dtype=np.intp),
        onehot=onehot,
        alphas=rng.uniform_block(k * d_c, -1.0, 1.0).reshape(k, d_c),
        vad=rng.uniform_block(9, 0.0, 1.0),
        meta=rng.uniform_block(3, 0.0, 1.0),
        label=rng.randbelow(3),
    )
    return model, sample


def cmd_gradcheck(args):
    seed = args.seed if args.seed is not None else 1
    model, sample = toy_gradcheck_setup(seed)
    err = finite_diff_check(lambda: model.loss(sample), model.params,
                            value_fn=lambda: model.loss_value(sample))
    print(f"max relative error: {err:.6e} over {model.params.n_values()} coordinates")
    return 0 if err < 1e-4 else 1


def cmd_synth_gen(args):
    seed = args.seed if args.seed is not None else 0
    paths = synth_gen(args.spec, args.n, seed, args.out, d_c=args.dc)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except Exception as exc:  # the CLI contract: one parsable error line
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())
