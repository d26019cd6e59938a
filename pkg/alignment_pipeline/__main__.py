"""CLI entry point: python -m alignment_pipeline <command> [options]"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .bpe import BpeModel, Vocabulary, apply_bpe, debpe, learn_joint_bpe, load_merges, save_merges
from .checkpoint import load_model, read_sidecar, save_model
from .config import load_config
from .corpus import (
    ParallelCorpus,
    PreparedCorpus,
    filter_corpus,
    generate_synthetic_corpus,
    load_parallel_corpus,
    read_gold,
    read_lines,
    read_naacl_gold,
    read_pharaoh,
    write_gold,
    write_lines,
    write_pharaoh,
)
from .decoding import beam_decode
from .errors import AlignmentError, DataError, FormatError, UsageError
from .evaluation import aer, corpus_bleu, wilcoxon_signed_rank
from .extraction import extract_alignment_head, extract_layer_average, symmetrize_corpus
from .models import AlignmentScore, AlignmentSet, ExperimentConfig, GoldAlignment, MultiTaskConfig, ScoreRow
from .pipeline import AlignmentExperiment
from .report import emit_reports, format_score_report
from .statistical import lexicon_of, train_aligner, train_bidirectional, viterbi_align, write_lexicon
from .steps.s5_evaluate import score_row
from .training import self_training_pipeline, supervise_from_external, train_model
from .transformer import Transformer

logger = logging.getLogger("alignment_pipeline")


class _Parser(argparse.ArgumentParser):
    """Argument errors become ``UsageError`` so they share the exit-code mapping."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _progress(msg: str, pct: float) -> None:
    bar_len = 30
    filled = int(bar_len * pct)
    bar = "█" * filled + "░" * (bar_len - filled)
    print(f"\r  [{bar}] {pct:5.1%}  {msg:<60}", end="", flush=True)
    if pct >= 1.0:
        print()


def _overrides(args: argparse.Namespace) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        values[key.strip()] = value.strip()
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return values


def _config(args: argparse.Namespace, **extra: Optional[str]) -> ExperimentConfig:
    values = _overrides(args)
    values.update({k: v for k, v in extra.items() if v is not None})
    return load_config(args.config, values)


# ── Model bundles: <name>.alnf + .json sidecar + .vocab + .codes ──


def _save_bundle(model: Transformer, path: str, seed: int, vocab: Vocabulary, bpe: BpeModel, multitask: MultiTaskConfig) -> None:
    save_model(model, path, seed, {"multitask": multitask.model_dump(), "marker": bpe.marker})
    vocab.save(Path(path).with_suffix(".vocab"))
    save_merges(bpe, Path(path).with_suffix(".codes"))


def _load_bundle(path: str) -> Tuple[Transformer, Vocabulary, BpeModel, MultiTaskConfig]:
    meta = read_sidecar(path)
    for suffix in (".vocab", ".codes"):
        if not Path(path).with_suffix(suffix).is_file():
            raise FormatError(f"model bundle is missing {Path(path).with_suffix(suffix).name}", None, path)
    try:
        multitask = MultiTaskConfig(**meta.get("multitask", {}))
    except ValidationError as exc:
        raise FormatError(f"invalid multitask settings in sidecar: {exc}", None, path) from exc
    model = load_model(path)
    vocab = Vocabulary.load(Path(path).with_suffix(".vocab"))
    if len(vocab) != model.vocab_size:
        raise FormatError(f"vocabulary has {len(vocab)} entries but the model expects {model.vocab_size}", None, path)
    bpe = load_merges(Path(path).with_suffix(".codes"), meta.get("marker", "@@"))
    return model, vocab, bpe, multitask


def _load_gold(path: str, one_indexed: bool, naacl: bool, num_sentences: int) -> List[GoldAlignment]:
    if naacl:
        return read_naacl_gold(path, num_sentences)
    return read_gold(path, one_indexed)


# ── Commands ──


def cmd_learn_bpe(args: argparse.Namespace) -> int:
    config = _config(args)
    merges = args.merges if args.merges is not None else config.bpe.merges
    corpus = load_parallel_corpus(args.source, args.target, args.tokenize)
    model = learn_joint_bpe(corpus.source, corpus.target, merges, config.bpe.marker)
    save_merges(model, args.output)
    print(f"Learned {model.num_merges} merges → {args.output}")
    return 0


def cmd_apply_bpe(args: argparse.Namespace) -> int:
    config = _config(args)
    model = load_merges(args.codes, config.bpe.marker)
    lines = read_lines(args.input)
    write_lines(args.output, (" ".join(apply_bpe(model, line.split()).tokens) for line in lines))
    print(f"Segmented {len(lines)} lines → {args.output}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    config = _config(args)
    corpus, golds = generate_synthetic_corpus(
        config.seed, args.size, args.vocab, args.scheme, args.min_len, args.max_len
    )
    prefix = args.prefix
    write_lines(f"{prefix}.src", corpus.source)
    write_lines(f"{prefix}.tgt", corpus.target)
    write_gold(f"{prefix}.gold", golds)
    print(f"Wrote {len(corpus)} pairs ({args.scheme}) → {prefix}.src / {prefix}.tgt / {prefix}.gold")
    return 0


def cmd_ibm_align(args: argparse.Namespace) -> int:
    config = _config(args, **{"aligner.model": args.model})
    pairs = load_parallel_corpus(args.source, args.target, args.tokenize).pairs()
    if args.direction == "forward":
        forward = train_aligner(pairs, config.aligner, show_progress=True)
        alignments = [viterbi_align(forward, src, tgt) for src, tgt in pairs]
    else:
        forward, reverse = train_bidirectional(pairs, config.aligner, show_progress=True)
        directional = [viterbi_align(forward, src, tgt) for src, tgt in pairs]
        reversed_ = [viterbi_align(reverse, tgt, src) for src, tgt in pairs]
        alignments = symmetrize_corpus(directional, reversed_, args.final_and or config.final_and)
    write_pharaoh(args.output, alignments)
    if args.lexicon:
        write_lexicon(lexicon_of(forward), args.lexicon)
    print(f"Aligned {len(pairs)} pairs with {config.aligner.model} ({sum(map(len, alignments))} links) → {args.output}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    corpus = load_parallel_corpus(args.source, args.target, args.tokenize)
    external: Optional[List[AlignmentSet]] = None
    if args.mode != "baseline-nll" and args.supervision == "external-file":
        if not args.labels:
            raise UsageError("--supervision external-file needs --labels")
        external = read_pharaoh(args.labels, args.one_indexed)
        if len(external) != len(corpus):
            raise DataError(f"alignment file has {len(external)} lines but the corpus has {len(corpus)} sentence pairs")
    if args.reverse:
        corpus = corpus.swapped()
        external = [a.transpose() for a in external] if external is not None else None

    filtered, kept = filter_corpus(corpus, config.filter.max_words, config.filter.max_ratio)
    if len(filtered) == 0:
        raise DataError("no training pairs survive length filtering")
    bpe = load_merges(args.codes, config.bpe.marker) if args.codes else learn_joint_bpe(
        filtered.source, filtered.target, config.bpe.merges, config.bpe.marker
    )
    data = PreparedCorpus.from_corpus(filtered, bpe)
    name = Path(args.model_out).stem
    print(f"Training {args.mode} on {len(data)} pairs ({len(data.vocab)} symbols)")

    if args.mode == "baseline-nll":
        model, _ = train_model(data, config, args.mode, checkpoint_dir=args.checkpoint_dir, name=name, progress_callback=_progress)
    elif external is not None:
        model = supervise_from_external(data, [external[k] for k in kept], config, args.mode, args.checkpoint_dir)
    else:
        model, labels = self_training_pipeline(data, config, args.mode, checkpoint_dir=args.checkpoint_dir)
        if args.labels_out:
            write_pharaoh(args.labels_out, labels)

    multitask = MultiTaskConfig.for_mode(args.mode, **config.multitask.model_dump(exclude={"full_context"}))
    _save_bundle(model, args.model_out, config.seed, data.vocab, bpe, multitask)
    print(f"Saved model → {args.model_out}")
    return 0


def _extract(model: Transformer, vocab: Vocabulary, multitask: MultiTaskConfig, corpus: PreparedCorpus, args: argparse.Namespace, max_tokens: int) -> List[AlignmentSet]:
    if args.method == "alignment-head":
        return extract_alignment_head(model, vocab, corpus.pairs, multitask, max_tokens)
    scope = "all" if args.method == "all-average" else (args.layer or max(1, model.config.n_layers - 1))
    return extract_layer_average(model, vocab, corpus.pairs, scope, max_tokens)


def cmd_align(args: argparse.Namespace) -> int:
    config = _config(args)
    model, vocab, bpe, multitask = _load_bundle(args.model)
    corpus = load_parallel_corpus(args.source, args.target, args.tokenize)
    data = PreparedCorpus.from_corpus(corpus, bpe, vocab)
    alignments = _extract(model, vocab, multitask, data, args, config.training.max_tokens)
    if args.reverse_model:
        reverse, reverse_vocab, _, reverse_multitask = _load_bundle(args.reverse_model)
        reverse_data = PreparedCorpus.from_corpus(corpus.swapped(), bpe, reverse_vocab)
        backward = _extract(reverse, reverse_vocab, reverse_multitask, reverse_data, args, config.training.max_tokens)
        alignments = symmetrize_corpus(alignments, backward, args.final_and or config.final_and)
    write_pharaoh(args.output, alignments)
    print(f"Extracted {args.method} alignments for {len(alignments)} pairs → {args.output}")
    return 0


def cmd_symmetrize(args: argparse.Namespace) -> int:
    forward = read_pharaoh(args.forward)
    reverse = read_pharaoh(args.reverse)
    merged = symmetrize_corpus(forward, reverse, args.final_and, reverse_is_transposed=args.reverse_transposed)
    write_pharaoh(args.output, merged)
    print(f"Symmetrized {len(merged)} sentences ({sum(map(len, merged))} links) → {args.output}")
    return 0


def _print_score(name: str, score: AlignmentScore) -> None:
    print(
        f"{name}: AER {score.aer:.3f}  precision {score.precision:.3f}  recall {score.recall:.3f}  "
        f"|A| {score.hyp_count}  |S| {score.sure_count}  |P| {score.possible_count}"
    )


def cmd_score_aer(args: argparse.Namespace) -> int:
    hyps = read_pharaoh(args.hyp)
    gold = _load_gold(args.gold, args.one_indexed, args.naacl, len(hyps))
    score, per_sentence = aer(hyps, gold)
    _print_score(Path(args.hyp).name, score)
    rows: List[ScoreRow] = []
    if args.baseline:
        base_score, base_sentences = aer(read_pharaoh(args.baseline), gold)
        _print_score(Path(args.baseline).name, base_score)
        test = wilcoxon_signed_rank([s.aer for s in per_sentence], [s.aer for s in base_sentences], args.alpha)
        print(f"Wilcoxon signed-rank: W={test.statistic:.1f}  n={test.n}  p={test.p_value:.3g}  significant={test.significant}")
        rows.append(score_row(Path(args.baseline).name, base_score))
        rows.append(score_row(Path(args.hyp).name, score, test.p_value, Path(args.baseline).name))
    else:
        rows.append(score_row(Path(args.hyp).name, score))
    if args.output:
        emit_reports(args.output, comparison=rows)
    return 0


def cmd_score_bleu(args: argparse.Namespace) -> int:
    hyps = read_lines(args.hyp)
    refs = read_lines(args.ref)
    if args.debpe:
        hyps = [debpe(line) for line in hyps]
        refs = [debpe(line) for line in refs]
    print(f"BLEU = {100.0 * corpus_bleu(hyps, refs, smooth=args.smooth):.2f}")
    return 0


def cmd_translate(args: argparse.Namespace) -> int:
    config = _config(args)
    beam = args.beam if args.beam is not None else config.beam_size
    model, vocab, bpe, _ = _load_bundle(args.model)
    lines = read_lines(args.input)
    outputs: List[str] = []
    for k, line in enumerate(lines, start=1):
        src_ids = vocab.encode(apply_bpe(bpe, line.split()).tokens)
        hyp = beam_decode(model, src_ids, beam, config.max_decode_len)
        outputs.append(debpe(vocab.decode(hyp.output), bpe.marker))
        _progress(f"translated {k}/{len(lines)}", k / max(1, len(lines)))
    write_lines(args.output, outputs)
    print(f"Translated {len(lines)} sentences (beam {beam}) → {args.output}")
    if args.reference:
        print(f"BLEU = {100.0 * corpus_bleu(outputs, read_lines(args.reference), smooth=args.smooth):.2f}")
    return 0


def _read_json(path: Path):
    if not path.is_file():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise FormatError(f"unreadable JSON: {exc}", None, str(path)) from exc


def cmd_report(args: argparse.Namespace) -> int:
    per_layer: Dict[str, AlignmentScore] = {}
    rows: List[ScoreRow] = []
    epochs = None
    if args.run_dir:
        run = Path(args.run_dir)
        extraction = _read_json(run / "step3_extraction.json") or {}
        per_layer = {k: AlignmentScore(**v) for k, v in extraction.get("per_layer", {}).items()}
        rows = [ScoreRow(**r) for r in _read_json(run / "step5_scores.json") or []]
        epochs = _read_json(run / "step4_epochs.json") or _read_json(run / "step2_baseline_epochs.json")
    if args.model:
        if not (args.source and args.target and args.gold):
            raise UsageError("report --model needs --source, --target and --gold")
        config = _config(args)
        model, vocab, bpe, _ = _load_bundle(args.model)
        corpus = load_parallel_corpus(args.source, args.target, args.tokenize)
        gold = _load_gold(args.gold, args.one_indexed, args.naacl, len(corpus))
        data = PreparedCorpus.from_corpus(corpus, bpe, vocab)
        reverse = None
        if args.reverse_model:
            reverse = _load_bundle(args.reverse_model)
        for scope in [*range(1, model.config.n_layers + 1), "all"]:
            hyps = extract_layer_average(model, vocab, data.pairs, scope, config.training.max_tokens)
            if reverse is not None:
                reverse_model, reverse_vocab = reverse[0], reverse[1]
                reverse_data = PreparedCorpus.from_corpus(corpus.swapped(), bpe, reverse_vocab)
                backward = extract_layer_average(reverse_model, reverse_vocab, reverse_data.pairs, scope, config.training.max_tokens)
                hyps = symmetrize_corpus(hyps, backward, config.final_and)
            per_layer["average" if scope == "all" else str(scope)] = aer(hyps, gold)[0]
    if not (per_layer or rows or epochs):
        raise UsageError("report needs --run-dir with step results or --model with --source/--target/--gold")
    output = args.output_dir or args.run_dir
    if not output:
        raise UsageError("report needs --output-dir")
    written = emit_reports(output, per_layer, rows, epochs)
    if rows:
        print(format_score_report(rows), end="")
    for path in written:
        print(f"Wrote {path}")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = _config(args)
    test: Optional[ParallelCorpus] = None
    gold: Optional[List[GoldAlignment]] = None
    if args.synthetic:
        corpus, golds = generate_synthetic_corpus(config.seed, args.train_size + args.test_size, args.vocab, args.scheme)
        train = corpus.subset(range(args.train_size))
        test = corpus.subset(range(args.train_size, len(corpus)))
        gold = golds[args.train_size:]
    else:
        if not (args.train_source and args.train_target):
            raise UsageError("pipeline needs --train-source/--train-target or --synthetic")
        train = load_parallel_corpus(args.train_source, args.train_target, args.tokenize)
        if args.test_source and args.test_target:
            test = load_parallel_corpus(args.test_source, args.test_target, args.tokenize)
            if args.gold:
                gold = _load_gold(args.gold, args.one_indexed, args.naacl, len(test))

    experiment = AlignmentExperiment(config, output_dir=args.output_dir, progress_callback=_progress)
    start = time.time()
    result = experiment.run(train, test, gold)
    minutes, seconds = divmod(int(time.time() - start), 60)
    print(f"\nDone in {minutes}m {seconds}s")
    print(f"   Output: {experiment.output_dir}")
    if result.per_layer:
        print("   AER per layer: " + ", ".join(f"{k}={v.aer:.3f}" for k, v in result.per_layer.items()))
    if result.rows:
        print()
        print(format_score_report(result.rows), end="")
    print()
    return 0


# ── Parser ──


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key (dotted), repeatable")
    common.add_argument("--seed", type=int, default=None, help="Random seed (overrides config)")
    common.add_argument("--tokenize", action="store_true", help="Apply the rule tokenizer to corpus lines")
    common.add_argument("-v", "--verbose", action="store_true", help="Verbose logging")

    gold_flags = _Parser(add_help=False)
    gold_flags.add_argument("--one-indexed", action="store_true", help="Gold indices start at 1")
    gold_flags.add_argument("--naacl", action="store_true", help="Gold uses 'sentence source target [S|P]' lines")

    parser = _Parser(prog="alignment_pipeline", description="Word alignment from transformer attention.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("learn-bpe", parents=[common], help="Learn joint BPE merges")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--merges", type=int, default=None, help="Number of merges (default: bpe.merges)")
    p.add_argument("--output", required=True)
    p.set_defaults(handler=cmd_learn_bpe)

    p = sub.add_parser("apply-bpe", parents=[common], help="Segment a tokenized file with learned merges")
    p.add_argument("--codes", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(handler=cmd_apply_bpe)

    p = sub.add_parser("generate", parents=[common], help="Write a synthetic permutation corpus with gold")
    p.add_argument("--prefix", required=True, help="Writes PREFIX.src, PREFIX.tgt and PREFIX.gold")
    p.add_argument("--size", type=int, default=2200)
    p.add_argument("--vocab", type=int, default=50)
    p.add_argument("--scheme", default="adjacent-swap", help="identity | adjacent-swap | window-reverse:K")
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=10)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("ibm-align", parents=[common], help="Align with IBM Model 1 / HMM")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--model", choices=["ibm1", "hmm"], default=None)
    p.add_argument("--direction", choices=["forward", "both"], default="both")
    p.add_argument("--final-and", action="store_true", help="Symmetrize with the final step")
    p.add_argument("--lexicon", default=None, help="Dump the forward lexical table here")
    p.set_defaults(handler=cmd_ibm_align)

    p = sub.add_parser("train", parents=[common], help="Train a translation model")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--model-out", required=True, help="Checkpoint path (.alnf); vocab and codes are written next to it")
    p.add_argument("--mode", choices=["baseline-nll", "multitask", "multitask-full-context"], default="baseline-nll")
    p.add_argument("--supervision", choices=["self", "external-file"], default="self")
    p.add_argument("--labels", default=None, help="Pharaoh word alignments for external supervision")
    p.add_argument("--one-indexed", action="store_true", help="Label file indices start at 1")
    p.add_argument("--labels-out", default=None, help="Write the self-training labels here")
    p.add_argument("--codes", default=None, help="Reuse BPE merges instead of learning them")
    p.add_argument("--reverse", action="store_true", help="Train target→source")
    p.add_argument("--checkpoint-dir", default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("align", parents=[common], help="Extract alignments from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", choices=["layer-average", "all-average", "alignment-head"], default="layer-average")
    p.add_argument("--layer", type=int, default=None, help="1-based decoder layer (default: penultimate)")
    p.add_argument("--reverse-model", default=None, help="Target→source model; symmetrizes with grow-diagonal")
    p.add_argument("--final-and", action="store_true")
    p.set_defaults(handler=cmd_align)

    p = sub.add_parser("symmetrize", parents=[common], help="Grow-diagonal symmetrization of two alignment files")
    p.add_argument("--forward", required=True)
    p.add_argument("--reverse", required=True, help="Target-source alignments unless --reverse-transposed")
    p.add_argument("--reverse-transposed", action="store_true")
    p.add_argument("--output", required=True)
    p.add_argument("--final-and", action="store_true")
    p.set_defaults(handler=cmd_symmetrize)

    p = sub.add_parser("score-aer", parents=[common, gold_flags], help="Score alignments against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--baseline", default=None, help="Second hypothesis file for a signed-rank test")
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--output", default=None, help="Directory for comparison.csv and scores.tsv")
    p.set_defaults(handler=cmd_score_aer)

    p = sub.add_parser("score-bleu", parents=[common], help="Corpus BLEU")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--debpe", action="store_true", help="Join subwords before scoring")
    p.set_defaults(handler=cmd_score_bleu)

    p = sub.add_parser("translate", parents=[common], help="Beam-decode a source file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--reference", default=None, help="Score BLEU against this file")
    p.add_argument("--smooth", action="store_true")
    p.set_defaults(handler=cmd_translate)

    p = sub.add_parser("report", parents=[common, gold_flags], help="Per-layer, comparison and epoch reports")
    p.add_argument("--run-dir", default=None, help="Rebuild reports from a pipeline run directory")
    p.add_argument("--model", default=None, help="Score every decoder layer of this model")
    p.add_argument("--reverse-model", default=None)
    p.add_argument("--source", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--gold", default=None)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("pipeline", parents=[common, gold_flags], help="Run the end-to-end experiment")
    p.add_argument("--train-source", default=None)
    p.add_argument("--train-target", default=None)
    p.add_argument("--test-source", default=None)
    p.add_argument("--test-target", default=None)
    p.add_argument("--gold", default=None)
    p.add_argument("--synthetic", action="store_true", help="Generate train/test data instead of reading files")
    p.add_argument("--train-size", type=int, default=2000)
    p.add_argument("--test-size", type=int, default=200)
    p.add_argument("--vocab", type=int, default=50)
    p.add_argument("--scheme", default="adjacent-swap")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(handler=cmd_pipeline)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s  %(levelname)-8s  %(name)s  %(message)s",
    )
    try:
        return args.handler(args)
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
