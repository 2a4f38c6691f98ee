#!/usr/bin/env python3
"""End-to-end demo on the bundled fixtures.

Generates a corpus, prints its statistics, trains the tracker on a split,
tracks the held-out dialogues, and scores the predictions.  Everything is
seeded, so two runs of this script produce identical numbers.

Usage: python scripts/run_pipeline.py [--workdir DIR] [--num 300] [--seed 7]
"""

import argparse
import os
import subprocess
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ASSETS = os.path.join(ROOT, "src", "dialogkit", "assets")


def sh(*args: str) -> None:
    print("+", " ".join(args), flush=True)
    subprocess.run([sys.executable, "-m", "dialogkit.cli", *args], check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="pipeline_out")
    parser.add_argument("--num", type=int, default=300)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epochs", type=int, default=24)
    args = parser.parse_args()

    os.makedirs(args.workdir, exist_ok=True)
    corpus = os.path.join(args.workdir, "corpus")
    heldout = os.path.join(args.workdir, "heldout")
    ckpt = os.path.join(args.workdir, "tracker.json")
    preds = os.path.join(args.workdir, "predictions.json")

    if not os.path.isdir(corpus):
        sh(
            "generate",
            "--schemas", os.path.join(ASSETS, "schemas"),
            "--backends", os.path.join(ASSETS, "backends"),
            "--scenarios", os.path.join(ASSETS, "scenarios", "training.json"),
            "--templates", os.path.join(ASSETS, "templates.json"),
            "--variations", os.path.join(ASSETS, "variations.json"),
            "--num", str(args.num),
            "--seed", str(args.seed),
            "--workers", "8",
            "--out", corpus,
        )
    sh("stats", corpus)

    # Split off the last tenth of the corpus as held-out dialogues.
    if not os.path.isdir(heldout):
        from dialogkit.corpus import read_corpus, write_corpus
        import json
        import shutil

        dialogues = read_corpus(corpus)
        cut = max(1, len(dialogues) // 10)
        train_dir = os.path.join(args.workdir, "train")
        for path, part in ((train_dir, dialogues[:-cut]), (heldout, dialogues[-cut:])):
            shutil.rmtree(path, ignore_errors=True)
            write_corpus(part, path)
            shutil.copy(
                os.path.join(corpus, "schema.json"), os.path.join(path, "schema.json")
            )

    sh(
        "train", os.path.join(args.workdir, "train"),
        "--out", ckpt,
        "--seed", "1",
        "--epochs", str(args.epochs),
    )
    sh("track", heldout, "--checkpoint", ckpt, "--out", preds)
    sh("evaluate", heldout, preds)
    return 0


if __name__ == "__main__":
    sys.exit(main())
