"""Command-line entry point: the pipeline as subcommands.

    ramdec gen-toy    write a miniature corpus, graph, and references
    ramdec make-egs   splice + label + shard features into training examples
    ramdec priors     estimate pdf priors from alignments
    ramdec train      fit the acoustic model on an examples directory
    ramdec decode     beam-search decode features into word hypotheses
    ramdec score      word error rate between reference and hypothesis files

Exit codes: 0 success, 1 domain or data error, 2 usage error. Diagnostics go
to stderr; data goes to files or stdout only.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import am, dataset, decoder, fst, mlp, score as scoring, toy
from .ark import read_int_vector_ark, read_matrix_ark
from .errors import RamdecError

log = logging.getLogger("ramdec")


def _usage_error(message: str) -> None:
    print(f"ramdec: usage error: {message}", file=sys.stderr)
    raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ramdec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="generate a deterministic miniature task")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--num-words", type=int, default=3)
    p.add_argument("--num-pdfs", type=int, default=6)
    p.add_argument("--feature-dim", type=int, default=2)
    p.add_argument("--utterances", type=int, default=20)
    p.add_argument("--frames-per-word", type=int, default=5)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--noise", type=float, default=0.5)
    p.set_defaults(func=_cmd_gen_toy)

    p = sub.add_parser("make-egs", help="splice, label, and shard training data")
    p.add_argument("--feats", required=True)
    p.add_argument("--ali", required=True)
    p.add_argument("--left", type=int, required=True)
    p.add_argument("--right", type=int, required=True)
    p.add_argument("--num-pdfs", type=int, required=True)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_egs)

    p = sub.add_parser("priors", help="estimate pdf priors from alignments")
    p.add_argument("--ali", required=True)
    p.add_argument("--num-pdfs", type=int, required=True)
    p.add_argument("--floor", type=float, default=dataset.DEFAULT_PRIOR_FLOOR)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_priors)

    p = sub.add_parser("train", help="train the acoustic model")
    p.add_argument("--egs", required=True)
    p.add_argument("--layers", required=True, help="comma-separated hidden layer sizes, e.g. 16,16")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report-dir", help="write training curves and metrics CSV here")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="beam-search decode features into hypotheses")
    p.add_argument("--graph", required=True)
    p.add_argument("--words", required=True)
    p.add_argument("--feats", required=True)
    p.add_argument("--left", type=int, required=True)
    p.add_argument("--right", type=int, required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--am", choices=("local", "remote"), required=True)
    p.add_argument("--model", help="model file (required with --am local)")
    p.add_argument("--url", help="server base url (required with --am remote; falls back to RAMDEC_URL)")
    p.add_argument("--model-name", default="am")
    p.add_argument("--chunk-size", type=int, default=64)
    p.add_argument("--timeout-ms", type=int, default=5000)
    p.add_argument("--max-retries", type=int, default=2)
    p.add_argument("--beam", type=float, default=16.0)
    p.add_argument("--max-active", type=int, default=7000)
    p.add_argument("--lattice-beam", type=float, default=8.0)
    p.add_argument("--acoustic-scale", type=float, default=0.1)
    p.add_argument("--lattice-out", help="also write pruned lattices to this file")
    p.add_argument("--jobs", type=int, default=1, help="utterances decoded in parallel")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("score", help="word error rate between transcripts")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--report-dir", help="write per-utterance CSV and summary figure here")
    p.set_defaults(func=_cmd_score)

    return parser


def _cmd_gen_toy(args) -> int:
    spec = toy.ToySpec(
        seed=args.seed,
        num_words=args.num_words,
        num_pdfs=args.num_pdfs,
        feature_dim=args.feature_dim,
        utterances=args.utterances,
        frames_per_word=args.frames_per_word,
        class_mean_separation=args.separation,
        noise_stddev=args.noise,
    )
    manifest = toy.generate(spec, args.out)
    log.info("wrote toy task with %d utterances to %s", spec.utterances, args.out)
    for name, path in manifest.items():
        log.info("  %s: %s", name, path)
    return 0


def _cmd_make_egs(args) -> int:
    cfg = dataset.SplicingConfig(args.left, args.right)
    meta = dataset.build_egs_dir(args.feats, args.ali, cfg, args.num_pdfs, args.shards, args.out)
    log.info(
        "wrote %d shards (%d frames, input dim %d) to %s",
        meta["num_shards"], meta["frames"], meta["input_dim"], args.out,
    )
    return 0


def _cmd_priors(args) -> int:
    alis = list(read_int_vector_ark(args.ali))
    priors = dataset.compute_priors(alis, args.num_pdfs, args.floor)
    dataset.write_priors(priors, args.out)
    log.info("wrote %d priors to %s", priors.num_pdfs, args.out)
    return 0


def _parse_layers(spec: str) -> list[int]:
    try:
        dims = [int(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise RamdecError(f"--layers must be comma-separated integers, got {spec!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise RamdecError(f"--layers must name positive hidden sizes, got {spec!r}")
    return dims


def _cmd_train(args) -> int:
    meta, shards = dataset.load_egs_dir(args.egs)
    hidden = _parse_layers(args.layers)
    model = mlp.init_model(meta["input_dim"], hidden + [meta["num_pdfs"]], seed=args.seed)
    cfg = mlp.TrainConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr, seed=args.seed)
    model, reports = mlp.train_sgd(model, shards, cfg)
    for r in reports:
        log.info("epoch %d: cross-entropy %.4f, frame accuracy %.4f", r.epoch, r.mean_cross_entropy, r.frame_accuracy)
    mlp.save_model(model, args.out)
    log.info("wrote model (%s -> %s) to %s", meta["input_dim"], meta["num_pdfs"], args.out)
    if args.report_dir:
        from .report import write_training_report

        for path in write_training_report(reports, args.report_dir):
            log.info("wrote %s", path)
    return 0


def _make_backend(args):
    """Returns (propagate(spliced) -> posteriors, num_pdfs hint or None)."""
    if args.am == "local":
        if not args.model:
            _usage_error("decode --am local requires --model")
        model = mlp.load_model(args.model)
        return (lambda spliced: am.local_propagate(model, spliced)), model.num_pdfs
    url = args.url or os.environ.get("RAMDEC_URL")
    if not url:
        _usage_error("decode --am remote requires --url or the RAMDEC_URL environment variable")
    cfg = am.RemoteConfig(
        base_url=url,
        model_name=args.model_name,
        chunk_size=args.chunk_size,
        timeout_ms=args.timeout_ms,
        max_retries=args.max_retries,
    )
    return (lambda spliced: am.remote_propagate(cfg, spliced)), None


def _cmd_decode(args) -> int:
    graph = fst.parse_fst_text(Path(args.graph).read_text(encoding="utf-8"))
    words = fst.parse_symbol_table(Path(args.words).read_text(encoding="utf-8"))
    priors = dataset.read_priors(args.priors)
    problems = fst.validate_graph(graph, priors.num_pdfs)
    if problems:
        raise RamdecError("invalid decoding graph: " + "; ".join(problems))
    splice_cfg = dataset.SplicingConfig(args.left, args.right)
    dcfg = decoder.DecodeConfig(
        beam=args.beam,
        max_active=args.max_active,
        lattice_beam=args.lattice_beam,
        acoustic_scale=args.acoustic_scale,
    )
    propagate, _ = _make_backend(args)

    def decode_one(mat):
        spliced = dataset.splice(mat, splice_cfg)
        post = propagate(spliced)
        ll = am.loglikes(post, priors)
        lattice = decoder.decode(graph, ll, dcfg)
        result = decoder.best_path(lattice)
        lattice_text = None
        if args.lattice_out:
            pruned = decoder.prune_lattice(lattice, dcfg.lattice_beam)
            lattice_text = decoder.write_lattice_text(pruned)
        return result, lattice_text

    feats = list(read_matrix_ark(args.feats))
    outcomes: list[tuple[str, object]] = []
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for mat, outcome in zip(feats, pool.map(lambda m: _try_decode(decode_one, m), feats)):
                outcomes.append((mat.key, outcome))
    else:
        for mat in feats:
            outcomes.append((mat.key, _try_decode(decode_one, mat)))

    failures = 0
    hyp_lines = []
    lattice_blocks = []
    for key, outcome in outcomes:
        if isinstance(outcome, Exception):
            failures += 1
            log.error("utterance %s failed: %s", key, outcome)
            continue
        result, lattice_text = outcome
        hyp_lines.append(" ".join([key, *words.words(result.words)]).rstrip())
        if result.partial:
            log.warning("utterance %s: no final state survived, hypothesis is partial", key)
        if lattice_text is not None:
            lattice_blocks.append(f"{key}\n{lattice_text}")
    Path(args.out).write_text("\n".join(hyp_lines) + ("\n" if hyp_lines else ""), encoding="utf-8")
    if args.lattice_out:
        Path(args.lattice_out).write_text("\n".join(lattice_blocks), encoding="utf-8")
    log.info("decoded %d/%d utterances to %s", len(feats) - failures, len(feats), args.out)
    return 1 if failures else 0


def _try_decode(fn, mat):
    try:
        return fn(mat)
    except RamdecError as e:
        return e


def _cmd_score(args) -> int:
    refs = scoring.read_transcripts(args.ref)
    hyps = scoring.read_transcripts(args.hyp)
    report = scoring.score_corpus(refs, hyps)
    sys.stdout.write(scoring.format_report(report))
    if args.report_dir:
        from .report import write_score_report

        for path in write_score_report(report, args.report_dir):
            log.info("wrote %s", path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="ramdec: %(levelname)s: %(message)s", force=True
    )
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        code = e.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    except RamdecError as e:
        log.error("%s", e)
        return 1
    except OSError as e:
        log.error("%s", e)
        return 1


def console_main() -> None:
    sys.exit(main())
