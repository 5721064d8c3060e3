"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/integrity error.  Machine
output goes to stdout, progress and diagnostics to stderr, so pipelines
stay clean.  TOKGRAFT_THREADS caps the worker threads used to fill the
density matrix.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import surgery
from .bytemap import render
from .core import encode
from .errors import TokgraftError
from .metrics import compare_density, token_frequency
from .model_io import (load_candidates, load_model, save_candidates,
                       save_model, stream_words)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _labeled(value: str) -> tuple[str, str]:
    label, sep, path = value.partition("=")
    if not sep or not label or not path:
        raise argparse.ArgumentTypeError(f"expected LABEL=PATH, got {value!r}")
    return label, path


def _parse_k(value: str):
    if value == "auto":
        return "auto"
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"-k expects an integer or 'auto', got {value!r}")
    if k < 0:
        raise argparse.ArgumentTypeError("-k must be >= 0")
    return k


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tokgraft",
                     description="Byte-level BPE vocabulary surgery and density metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="vocabulary and merge statistics")
    p.add_argument("model", help="model JSON file")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("extract", help="extract Cyrillic-bearing candidates from donors")
    p.add_argument("--donor", metavar="LABEL=PATH", type=_labeled, action="append",
                   required=True, help="donor model file (repeatable)")
    p.add_argument("--min-cyrillic", type=int, default=1,
                   help="minimum Cyrillic code points per candidate (default 1)")
    p.add_argument("-o", "--output", required=True, help="candidate set output file")

    p = sub.add_parser("transplant", help="swap low-frequency tokens for candidates")
    p.add_argument("--base", required=True, help="base model file")
    p.add_argument("--candidates", required=True, help="candidate set file")
    p.add_argument("--corpus", required=True, help="frequency corpus (UTF-8 text)")
    p.add_argument("--jsonl", action="store_true",
                   help='corpus is line-delimited JSON with a "text" field')
    p.add_argument("-k", type=_parse_k, default="auto",
                   help="number of tokens to swap, or 'auto' (default)")
    p.add_argument("--passes", type=int, default=4,
                   help="reachability refinement passes (default 4)")
    p.add_argument("-o", "--output", required=True, help="surgered model output file")
    p.add_argument("--report", help="surgery report JSON output file")

    p = sub.add_parser("density", help="tokens/word density matrix")
    p.add_argument("--model", metavar="LABEL=PATH", type=_labeled, action="append",
                   required=True, help="model file (repeatable)")
    p.add_argument("--corpus", metavar="LABEL=PATH", type=_labeled, action="append",
                   required=True, help="corpus file (repeatable)")
    p.add_argument("--jsonl", action="store_true",
                   help='corpora are line-delimited JSON with a "text" field')
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output")
    fmt.add_argument("--table", action="store_true", help="aligned table output (default)")

    p = sub.add_parser("encode", help="encode text and show the pieces")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--file", help="encode the contents of this file")
    p.add_argument("text", nargs="?", help="text to encode")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("diff", help="token and merge deltas between two models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _cmd_inspect(args) -> int:
    model = load_model(args.model)
    protected = surgery.classify_protected(model)
    counts = protected.class_counts()
    info = {
        "vocab_size": len(model.vocab),
        "merges": len(model.merges),
        "pretokenizer": model.pretokenizer,
        "protected": counts,
        "protected_total": len(protected.ids),
        "removable": len(model.vocab) - len(protected.ids),
    }
    if args.json:
        print(json.dumps(info, ensure_ascii=False))
        return 0
    print(f"vocab size     {info['vocab_size']}")
    print(f"merges         {info['merges']}")
    print(f"pretokenizer   {info['pretokenizer']}")
    for cls in surgery.PROTECTION_CLASSES:
        print(f"protected[{cls}]  {counts[cls]}")
    print(f"protected      {info['protected_total']}")
    print(f"removable      {info['removable']}")
    return 0


def _cmd_extract(args) -> int:
    donors = []
    for label, path in args.donor:
        _log(f"loading donor {label} from {path}")
        donors.append((label, load_model(path)))
    candidates = surgery.extract_candidates(donors, min_cyrillic=args.min_cyrillic)
    Path(args.output).write_bytes(save_candidates(candidates))
    _log(f"extracted {len(candidates)} candidates -> {args.output}")
    return 0


def _cmd_transplant(args) -> int:
    base = load_model(args.base)
    candidates = load_candidates(args.candidates)
    _log(f"counting token frequencies over {args.corpus}")
    freqs = token_frequency(base, stream_words(args.corpus, jsonl=args.jsonl),
                            corpus_label=args.corpus)
    _log(f"transplanting (k={args.k}, passes={args.passes})")
    result = surgery.transplant(base, candidates, freqs, k=args.k,
                                max_passes=args.passes)
    Path(args.output).write_bytes(save_model(result.model))
    _log(f"removed {len(result.removed)}, added {len(result.added)}, "
         f"unplaced {len(result.unplaced)} -> {args.output}")
    if args.report:
        report = surgery.report_dict(result)
        Path(args.report).write_bytes(
            json.dumps(report, ensure_ascii=False, separators=(",", ":")).encode("utf-8"))
        _log(f"report -> {args.report}")
    return 0


def _density_cells(models, corpora):
    return compare_density(models, corpora)


def _cmd_density(args) -> int:
    models = []
    for label, path in args.model:
        _log(f"loading model {label} from {path}")
        models.append((label, load_model(path)))
    corpora = [(label, stream_words(path, jsonl=args.jsonl))
               for label, path in args.corpus]

    threads = int(os.environ.get("TOKGRAFT_THREADS", "1") or "1")
    if threads > 1 and len(models) > 1:
        from concurrent.futures import ThreadPoolExecutor
        from collections import Counter
        counts = [(label, Counter(stream)) for label, stream in corpora]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                label: pool.submit(_density_cells, [(label, model)], counts)
                for label, model in models
            }
        cells = {}
        averages = {}
        for label, _ in models:
            got_cells, got_avg = futures[label].result()
            cells.update(got_cells)
            averages.update(got_avg)
    else:
        cells, averages = compare_density(models, corpora)

    model_labels = [label for label, _ in models]
    corpus_labels = [label for label, _ in args.corpus]
    if args.json:
        reports = []
        for m in model_labels:
            for c in corpus_labels:
                cell = cells[(m, c)]
                if isinstance(cell, TokgraftError):
                    reports.append({"model": m, "corpus": c, "error": str(cell)})
                else:
                    reports.append(cell.to_dict())
        doc = {"reports": reports, "averages": averages}
        print(json.dumps(doc, ensure_ascii=False))
        return 0

    header = f"{'corpus':<14}{'model':<14}{'tok/word':>10}{'1 tok %':>10}{'<=2 tok %':>11}{'>2 tok %':>10}"
    print(header)
    print("-" * len(header))
    for c in corpus_labels:
        for m in model_labels:
            cell = cells[(m, c)]
            if isinstance(cell, TokgraftError):
                print(f"{c:<14}{m:<14}  error: {cell}")
            else:
                print(f"{c:<14}{m:<14}{cell.tok_per_word:>10.2f}"
                      f"{cell.pct_1:>10.1f}{cell.pct_le2:>11.1f}{cell.pct_gt2:>10.1f}")
    print("-" * len(header))
    for m in model_labels:
        avg = averages[m]
        shown = f"{avg:.2f}" if avg is not None else "n/a"
        print(f"{'avg':<14}{m:<14}{shown:>10}")
    return 0


def _cmd_encode(args) -> int:
    model = load_model(args.model)
    if args.file is not None and args.text is not None:
        raise _UsageError("give either TEXT or --file, not both")
    if args.file is not None:
        data = Path(args.file).read_bytes()
    elif args.text is not None:
        data = args.text.encode("utf-8")
    else:
        raise _UsageError("nothing to encode: give TEXT or --file")
    ids = encode(model, data)
    pieces = [render(model.vocab[i]) for i in ids]
    if args.json:
        print(json.dumps({"ids": ids, "pieces": pieces, "count": len(ids)},
                         ensure_ascii=False))
        return 0
    print("ids:    " + " ".join(str(i) for i in ids))
    print("pieces: " + " ".join(pieces))
    print(f"count:  {len(ids)}")
    return 0


def _cmd_diff(args) -> int:
    a = load_model(args.model_a)
    b = load_model(args.model_b)
    tokens_a = set(a.vocab)
    tokens_b = set(b.vocab)
    added = sorted(tokens_b - tokens_a)
    removed = sorted(tokens_a - tokens_b)
    merges_a = {(a.vocab[m.left], a.vocab[m.right]) for m in a.merges}
    merges_b = {(b.vocab[m.left], b.vocab[m.right]) for m in b.merges}
    merges_added = sorted(merges_b - merges_a)
    merges_removed = sorted(merges_a - merges_b)
    if args.json:
        print(json.dumps({
            "tokens_added": [render(t) for t in added],
            "tokens_removed": [render(t) for t in removed],
            "merges_added": [f"{render(l)} {render(r)}" for l, r in merges_added],
            "merges_removed": [f"{render(l)} {render(r)}" for l, r in merges_removed],
        }, ensure_ascii=False))
        return 0
    print(f"tokens: +{len(added)} -{len(removed)}   "
          f"merges: +{len(merges_added)} -{len(merges_removed)}")
    for name, toks in (("+ ", added), ("- ", removed)):
        for t in toks[:20]:
            print(f"  {name}{render(t)}")
        if len(toks) > 20:
            print(f"  {name}... and {len(toks) - 20} more")
    return 0


_COMMANDS = {
    "inspect": _cmd_inspect,
    "extract": _cmd_extract,
    "transplant": _cmd_transplant,
    "density": _cmd_density,
    "encode": _cmd_encode,
    "diff": _cmd_diff,
}


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (TokgraftError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
