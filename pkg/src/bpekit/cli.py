"""Command-line entry point.

Exit codes: 0 success, 1 domain or I/O error, 2 usage error.
Data goes to stdout, level-tagged logs to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from bpekit import benchmark, chat_template, codec, corpus
from bpekit.errors import BpeKitError, InvalidConversation
from bpekit.model import TokenizerModel
from bpekit.trainer import DEFAULT_VOCAB, TrainerConfig, train

log = logging.getLogger("bpekit")


def _key_value(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    if k not in ("domain", "language", "reasoning"):
        raise argparse.ArgumentTypeError(f"unknown slice key {k!r} (domain, language, reasoning)")
    return k, v


def _nonneg(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _write_out(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _input_bytes(args) -> bytes:
    if args.text is not None and args.file is not None:
        raise SystemExit(_usage(args, "--text and --file are mutually exclusive"))
    if args.file is not None:
        return Path(args.file).read_bytes()
    if args.text is not None:
        return args.text.encode("utf-8", "surrogateescape")
    raise SystemExit(_usage(args, "one of --text or --file is required"))


def _usage(args, message: str) -> int:
    args.parser.print_usage(sys.stderr)
    print(f"{args.parser.prog}: error: {message}", file=sys.stderr)
    return 2


# -----------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    if bool(args.mixture) == bool(args.corpus):
        return _usage(args, "give exactly one of --mixture or --corpus")
    specials = None
    if args.specials_file:
        raw = Path(args.specials_file).read_text("utf-8")
        try:
            specials = json.loads(raw)
        except ValueError:
            specials = [line for line in raw.splitlines() if line.strip()]
    config = TrainerConfig(
        target_vocab=args.vocab,
        min_pair_frequency=args.min_pair_freq,
        seed=args.seed or 0,
    )
    if specials is not None:
        config.specials = list(specials)
    summary: dict = {}
    if args.mixture:
        spec = corpus.MixtureSpec.load(args.mixture)
        if args.seed is not None:
            spec.seed = args.seed
        config.seed = spec.seed
        stream = corpus.sample_mixture(spec)
        model = train(stream, config, jobs=args.jobs)
        summary["mixture"] = stream.stats()
    else:
        stats = corpus.LoadStats()
        model = train(corpus.load_documents(args.corpus, stats), config, jobs=args.jobs)
        summary["documents"] = stats.documents
        summary["malformed_count"] = stats.malformed_count
    model.save(args.out)
    summary.update(out=args.out, merges=len(model.merges), vocab_size=model.vocab_size)
    log.info("wrote %s (%d merges, vocab %d)", args.out, len(model.merges), model.vocab_size)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_encode(args) -> int:
    model = TokenizerModel.load(args.model)
    ids = codec.encode(_input_bytes(args), model, parse_specials=args.parse_specials)
    print(json.dumps(ids))
    return 0


def cmd_decode(args) -> int:
    model = TokenizerModel.load(args.model)
    try:
        ids = json.loads(_input_bytes(args))
    except ValueError:
        return _usage(args, "decode input must be a JSON list of token ids")
    if not isinstance(ids, list):
        return _usage(args, "decode input must be a JSON list of token ids")
    _write_out(codec.decode(ids, model), args.out)
    return 0


def _split_corpus_arg(text: str) -> tuple[str, dict]:
    # "path@language=ko,reasoning=true" attaches tags to one corpus file
    if "@" in text:
        path, tags = text.rsplit("@", 1)
        return path, dict(_key_value(kv) for kv in tags.split(",") if kv)
    return text, {}


def cmd_bench(args) -> int:
    if not args.model or not args.corpus:
        return _usage(args, "--model and --corpus are required")
    models = {}
    for path in args.model:
        name = Path(path).stem
        if name in models:
            name = path
        models[name] = TokenizerModel.load(path)
    shared = dict(args.slice or [])
    groups: dict[benchmark.Slice, list[str]] = {}
    try:
        for text in args.corpus:
            path, tags = _split_corpus_arg(text)
            slc = benchmark.Slice.from_tags({**shared, **tags})
            groups.setdefault(slc, []).append(path)
    except (argparse.ArgumentTypeError, ValueError) as e:
        return _usage(args, str(e))
    baselines = None
    if args.baselines:
        baselines = benchmark.load_baselines(None if args.baselines == "builtin" else args.baselines)

    rows, failed = [], 0
    for slc, paths in groups.items():
        stats = corpus.LoadStats()
        try:
            part = benchmark.run_benchmark(
                [(slc, corpus.load_documents(paths, stats))], models, args.sample_cap, jobs=args.jobs
            )
        except (BpeKitError, OSError) as e:
            log.error("slice %s: %s", slc.key() or "<all>", e)
            failed += 1
            continue
        if stats.malformed_count:
            log.warning("slice %s: skipped %d malformed lines", slc.key() or "<all>", stats.malformed_count)
        rows.extend(part.rows)
    rows.sort(key=lambda r: (r.tokenizer, r.slice.key()))
    report = benchmark.BenchmarkReport(rows, baselines, benchmark.compute_gains(rows, baselines))
    text = benchmark.emit_report(report, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 1 if failed else 0


def cmd_chat_render(args) -> int:
    raw = _input_bytes(args)
    try:
        conv = chat_template.from_dict(json.loads(raw))
    except ValueError as e:
        if isinstance(e, BpeKitError):
            raise
        raise InvalidConversation(f"conversation file is not JSON: {e}") from e
    if args.keep_last_think is not None:
        conv = chat_template.strip_reasoning(conv, args.keep_last_think)
    rendered = chat_template.render(conv)
    if args.model:
        model = TokenizerModel.load(args.model)
        print(json.dumps(codec.encode(rendered, model, parse_specials=True)))
    else:
        _write_out(rendered, args.out)
    return 0


def cmd_shard_plan(args) -> int:
    if not args.corpus:
        return _usage(args, "--corpus is required")
    paths = [str(p) for p in corpus.expand_paths(args.corpus)]
    if args.rank is not None:
        files = corpus.shard_files(paths, args.rank, args.world_size)
        print(json.dumps(files, indent=2))
        return 0
    plan = corpus.shard_plan(paths, args.world_size)
    out = {
        str(rank): {"files": files, "bytes": sum(os.path.getsize(f) for f in files)}
        for rank, files in enumerate(plan)
    }
    print(json.dumps(out, indent=2))
    return 0


# -----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpekit", description="Byte-level BPE tokenizer toolkit.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    jobs_default = os.cpu_count() or 1

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func, parser=sp)
        return sp

    sp = add("train", cmd_train, "Train a BPE model from a mixture spec or corpus files.")
    sp.add_argument("--mixture", help="mixture spec JSON file")
    sp.add_argument("--corpus", action="append", help="corpus file or directory (repeatable)")
    sp.add_argument("--vocab", type=int, default=DEFAULT_VOCAB, help="target vocabulary size incl. bytes and specials")
    sp.add_argument("--specials-file", help="JSON list or one-per-line file of special tokens")
    sp.add_argument("--min-pair-freq", type=_positive, default=2, help="minimum weighted pair count to merge")
    sp.add_argument("--seed", type=int, help="sampling seed (default: the mixture's own seed, else 0)")
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--jobs", type=_positive, default=jobs_default, help="worker processes for word counting")

    for name, func, help_ in (
        ("encode", cmd_encode, "Encode text to a JSON list of token ids."),
        ("decode", cmd_decode, "Decode a JSON list of token ids to raw bytes."),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--model", required=True)
        sp.add_argument("--text", help="inline input")
        sp.add_argument("--file", help="input file")
        if name == "encode":
            sp.add_argument("--parse-specials", action="store_true", help="map special-token literals to their ids")
        else:
            sp.add_argument("--out", help="write bytes here instead of stdout")

    sp = add("bench", cmd_bench, "Measure bytes per token over corpus slices.")
    sp.add_argument("--model", action="append", help="model file (repeatable)")
    sp.add_argument("--corpus", action="append", help="corpus file, optionally PATH@key=value,... (repeatable)")
    sp.add_argument("--slice", action="append", type=_key_value, help="slice tag key=value for all corpora (repeatable)")
    sp.add_argument("--baselines", help="baselines JSON file, or 'builtin' for the shipped reference values")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--sample-cap", type=_positive, default=benchmark.DEFAULT_SAMPLE_CAP)
    sp.add_argument("--out", help="write the report here instead of stdout")
    sp.add_argument("--jobs", type=_positive, default=1)

    sp = add("chat-render", cmd_chat_render, "Render a conversation JSON file with the chat template.")
    sp.add_argument("--text", help="inline conversation JSON")
    sp.add_argument("--file", help="conversation JSON file")
    sp.add_argument("--keep-last-think", type=_nonneg, metavar="N", help="drop think segments except in the last N assistant turns")
    sp.add_argument("--model", help="print token ids (specials parsed) instead of text")
    sp.add_argument("--out", help="write rendered bytes here instead of stdout")

    sp = add("shard-plan", cmd_shard_plan, "Assign corpus files to workers, balancing bytes.")
    sp.add_argument("--corpus", action="append", help="corpus file or directory (repeatable)")
    sp.add_argument("--world-size", type=_positive, required=True)
    sp.add_argument("--rank", type=int, help="print only this worker's files")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="[%(levelname)s] %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.func(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except (BpeKitError, OSError, json.JSONDecodeError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
