"""Command-line entry points: extract, check, lock."""

import argparse
import sys
from dataclasses import replace

from .embformat import verify_format
from .errors import EmbedderError
from .extract import extract
from .lockfile import DEFAULT_LOCK, parse_lock, resolve_spec, write_lock


def cmd_extract(args) -> int:
    specs = parse_lock(args.lock)
    spec = resolve_spec(args.model, specs)
    counts = extract(args.input, spec, args.output,
                     normalize=args.normalize, batch_size=args.batch_size)
    total = sum(counts.values())
    print(f"wrote {args.output}: {total} records, dim {spec.dim}, encoder {spec.describe()}")
    for (split, label) in sorted(counts):
        print(f"  {split:5s} {label:9s} {counts[(split, label)]}")
    return 0


def cmd_check(args) -> int:
    report = verify_format(args.input)
    print(report.summary())
    if report.ok:
        for (split, label) in sorted(report.partition_counts):
            print(f"  {split:5s} {label:9s} {report.partition_counts[(split, label)]}")
    return 0 if report.ok else 2


def cmd_lock(args) -> int:
    """Resolve unpinned encoder revisions against the model hub, if reachable."""
    specs = parse_lock(args.lock)
    unresolved = 0
    changed = False
    for alias, spec in sorted(specs.items()):
        if spec.revision != "unpinned":
            print(f"{alias}: already {spec.revision}")
            continue
        try:
            from huggingface_hub import HfApi
            sha = HfApi().model_info(spec.model).sha
        except Exception as exc:
            print(f"{alias}: unresolved ({type(exc).__name__}: {exc})")
            unresolved += 1
            continue
        specs[alias] = replace(spec, revision=sha)
        print(f"{alias}: pinned {sha}")
        changed = True
    if changed:
        write_lock(args.lock, specs)
        print(f"updated {args.lock}")
    return 3 if unresolved else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedder",
        description="Embed labeled utterances into the EMB1 binary format.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed a raw CSV of text,label,split rows")
    p.add_argument("--model", required=True, help="encoder alias or model id from the lockfile")
    p.add_argument("--in", dest="input", required=True, help="raw utterance CSV")
    p.add_argument("--out", dest="output", required=True, help="EMB1 file to write")
    p.add_argument("--normalize", action="store_true", help="L2-normalize vectors before writing")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lock", default=str(DEFAULT_LOCK), help="encoder lockfile path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("check", help="validate an EMB1 file")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lock", help="pin unresolved encoder revisions from the model hub")
    p.add_argument("--lock", default=str(DEFAULT_LOCK))
    p.set_defaults(func=cmd_lock)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmbedderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
