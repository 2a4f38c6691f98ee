"""Command-line entry point binding generation, training, tracking, scoring.

Subcommand style: generate / stats / train / track / evaluate / serve.  All
randomness flows from --seed, machine output is JSON, human output is an
aligned text table.  Failed commands exit nonzero with a one-line JSON error
on stderr and never leave a partial corpus behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

from .corpus import (
    CorpusFormatError,
    compute_stats,
    read_corpus,
    render_stats_table,
    write_corpus,
)
from .generate import GenerationError, generate_corpus, load_assets
from .metrics import MetricsError, evaluate, render_report_table
from .schema import (
    SchemaError,
    ServiceSchema,
    load_schema,
    load_schema_dir,
)
from .tracker import (
    CheckpointError,
    HashedPairEncoder,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    track_dialogue,
    train_tracker,
)

log = logging.getLogger(__name__)

SCHEMA_FILENAME = "schema.json"


class CliError(Exception):
    """User-facing failure; message printed as {"error": ...} on stderr."""


def _load_schema_map(path: str) -> dict[str, ServiceSchema]:
    if os.path.isdir(path):
        return load_schema_dir(path)
    return {s.service_name: s for s in load_schema(path)}


def _resolve_schemas(explicit: str | None, corpus_dir: str) -> dict[str, ServiceSchema]:
    """Schemas come from --schemas, else from schema.json inside the corpus."""
    if explicit:
        return _load_schema_map(explicit)
    bundled = os.path.join(corpus_dir, SCHEMA_FILENAME)
    if os.path.isfile(bundled):
        return _load_schema_map(bundled)
    raise CliError(
        f"no --schemas given and {bundled} does not exist; "
        "pass --schemas or generate the corpus with this tool"
    )


def _atomic_write_text(path: str, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    assets = load_assets(
        args.schemas,
        args.backends,
        args.scenarios,
        args.templates,
        variations_file=args.variations,
        automaton_file=args.automaton,
        seed=args.seed,
    )
    dialogues = generate_corpus(assets, args.num, args.seed, workers=args.workers)

    out = os.path.abspath(args.out)
    parent = os.path.dirname(out) or "."
    os.makedirs(parent, exist_ok=True)
    # Stage into a sibling temp dir, then rename over the target so an
    # interrupted run never leaves a half-written corpus.  rename only
    # replaces an empty directory, so a non-empty --out is refused.
    staging = tempfile.mkdtemp(dir=parent, prefix=".generate-")
    try:
        write_corpus(
            dialogues,
            staging,
            include_user_actions=args.include_user_actions,
        )
        schema_payload = [
            assets.schemas[name].to_dict() for name in sorted(assets.schemas)
        ]
        with open(os.path.join(staging, SCHEMA_FILENAME), "w", encoding="utf-8") as fh:
            json.dump(schema_payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        try:
            os.replace(staging, out)
        except OSError as exc:
            raise CliError(
                f"cannot write corpus to {out} (target must be absent or an "
                f"empty directory): {exc}"
            )
    finally:
        if os.path.isdir(staging):
            for name in os.listdir(staging):
                os.unlink(os.path.join(staging, name))
            os.rmdir(staging)

    stats = compute_stats(dialogues)
    print(render_stats_table(stats))
    log.info("wrote %d dialogues to %s", len(dialogues), out)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    stats = compute_stats(read_corpus(args.corpus))
    if args.json:
        print(json.dumps(stats.to_dict(), indent=1))
    else:
        print(render_stats_table(stats))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    dialogues = read_corpus(args.corpus)
    if not dialogues:
        raise CliError(f"corpus {args.corpus} contains no dialogues")
    schemas = _resolve_schemas(args.schemas, args.corpus)
    config = TrainConfig(
        dim=args.dim,
        seed=args.seed,
        encoder_seed=args.encoder_seed,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        schema_noise=args.schema_noise,
    )
    params, encoder = train_tracker(dialogues, schemas, config)
    save_checkpoint(params, args.out, encoder_config=encoder.to_dict())
    log.info("wrote checkpoint %s (dim=%d)", args.out, params.dim)
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    params, encoder_config = load_checkpoint(args.checkpoint)
    encoder = HashedPairEncoder.from_dict(encoder_config)
    schemas = _resolve_schemas(args.schemas, args.corpus)
    dialogues = read_corpus(args.corpus)

    embeddings: dict = {}
    records = []
    for dialogue in dialogues:
        for rec in track_dialogue(
            encoder, schemas, params, dialogue, embeddings=embeddings
        ):
            rec["dialogue_id"] = dialogue.dialogue_id
            records.append(rec)
    payload = {"predictions": records}
    _atomic_write_text(args.out, json.dumps(payload, indent=1) + "\n")
    log.info("wrote %d frame predictions to %s", len(records), args.out)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    refs = read_corpus(args.refs)
    try:
        with open(args.hyp, encoding="utf-8") as fh:
            predictions = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read predictions {args.hyp}: {exc}")
    schemas = _resolve_schemas(args.schemas, args.refs)
    seen = None
    if args.seen_services:
        seen = {s.strip() for s in args.seen_services.split(",") if s.strip()}
    report = evaluate(
        refs,
        predictions,
        schemas,
        seen_services=seen,
        exact=args.exact_match,
        ignore_extra=args.ignore_extra,
        allow_partial=args.allow_partial,
    )
    if args.json:
        print(json.dumps(report.to_dict(), indent=1))
    else:
        print(render_report_table(report))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .workbench_api import create_app

    schemas = _resolve_schemas(args.schemas, args.corpus)
    app = create_app(args.corpus, schemas=schemas, accepted_dir=args.accepted)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialogkit",
        description="Generate annotated task-oriented dialogues and evaluate "
        "schema-guided state tracking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate, vary, and render a corpus")
    p.add_argument("--schemas", required=True, help="directory of service schema files")
    p.add_argument("--backends", required=True, help="directory of backend table files")
    p.add_argument("--scenarios", required=True, help="scenario catalog JSON file")
    p.add_argument("--templates", required=True, help="utterance template JSON file")
    p.add_argument("--variations", default=None, help="value variation table JSON file")
    p.add_argument("--automaton", default=None, help="flow automaton override file")
    p.add_argument("--num", type=int, required=True, help="number of dialogues")
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--workers", type=int, default=1, help="parallel dialogue builders")
    p.add_argument(
        "--include-user-actions",
        action="store_true",
        help="keep user-turn dialogue acts in the written files",
    )
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="summarize a corpus directory")
    p.add_argument("corpus", help="corpus directory of dialogue shards")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="fit tracker heads on an annotated corpus")
    p.add_argument("corpus", help="training corpus directory")
    p.add_argument("--schemas", default=None, help="schema dir or file (defaults to corpus schema.json)")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--encoder-seed", type=int, default=0, help="hashed encoder seed")
    p.add_argument("--dim", type=int, default=64, help="embedding width")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--schema-noise", type=float, default=TrainConfig.schema_noise)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="predict dialogue state for a corpus")
    p.add_argument("corpus", help="corpus directory to track")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint file")
    p.add_argument("--schemas", default=None, help="schema dir or file (defaults to corpus schema.json)")
    p.add_argument("--out", required=True, help="prediction JSON file to write")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="score predictions against a reference corpus")
    p.add_argument("refs", help="reference corpus directory")
    p.add_argument("hyp", help="prediction JSON file")
    p.add_argument("--schemas", default=None, help="schema dir or file (defaults to refs schema.json)")
    p.add_argument("--seen-services", default=None, help="comma-separated training services")
    p.add_argument("--exact-match", action="store_true", help="disable fuzzy value matching")
    p.add_argument("--allow-partial", action="store_true", help="tolerate missing predictions")
    p.add_argument("--ignore-extra", action="store_true",
                   help="do not penalize predicted slots absent from the reference")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the paraphrase workbench HTTP API")
    p.add_argument("corpus", help="corpus directory of templated dialogues")
    p.add_argument("--schemas", default=None, help="schema dir or file (defaults to corpus schema.json)")
    p.add_argument("--accepted", default=None,
                   help="directory for accepted paraphrases (default: CORPUS/accepted)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


_KNOWN_ERRORS = (
    CliError,
    CheckpointError,
    CorpusFormatError,
    GenerationError,
    MetricsError,
    SchemaError,
    OSError,
    ValueError,
)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
