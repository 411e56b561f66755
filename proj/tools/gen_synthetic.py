#!/usr/bin/env python3
"""Writes the heading-free annotated corpus under tests/fixtures/synthetic.

Each document strings together 3-5 topics. Every sentence draws most words
from its topic's vocabulary plus some shared filler and a little vocabulary
from other topics, so topic shifts are visible to an embedding chunker but
not perfectly. refs.json records where the topics change.
"""
import json
import random
import sys
from pathlib import Path

TOPICS = {
    "git": "fork clone remote upstream branch checkout rebase origin fetch pull merge history",
    "build": "compiler cmake toolchain configure makefile linker target binary install ninja flags cache",
    "tests": "test suite assertion fixture coverage runner failing passing mock regression unit harness",
    "docs": "documentation guide tutorial markdown page reference example diagram wording typo glossary sidebar",
    "review": "reviewer approval comment feedback maintainer discussion suggestion nit revision thread consensus etiquette",
    "release": "version tag changelog publish semver artifact milestone freeze candidate hotfix archive announcement",
    "issues": "issue label triage bug report reproduce tracker duplicate priority assignee template stale",
    "style": "formatter indentation naming lint convention whitespace brace clang camel snake header ordering",
    "ci": "pipeline workflow runner matrix job cache badge status trigger nightly artifact secret",
    "license": "license copyright notice attribution grant patent clause contributor agreement sign trademark permissive",
}
FILLER = "the you your then it this to and of a before after when make sure".split()


def sentence(rng, topic, others):
    vocab = TOPICS[topic].split()
    words = []
    for _ in range(rng.randint(6, 10)):
        r = rng.random()
        if r < 0.55:
            words.append(rng.choice(vocab))
        elif r < 0.85:
            words.append(rng.choice(FILLER))
        else:
            words.append(rng.choice(TOPICS[rng.choice(others)].split()))
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def main(out: Path, seed: int = 7, docs: int = 6):
    rng = random.Random(seed)
    names = list(TOPICS)
    refs = []
    for d in range(docs):
        topics = rng.sample(names, rng.randint(3, 5))
        others = [t for t in names if t not in topics]
        paragraphs, boundaries, n = [], [], 0
        for i, topic in enumerate(topics):
            if i:
                boundaries.append(n)
            count = rng.randint(4, 8)
            paragraphs.append(" ".join(sentence(rng, topic, others) for _ in range(count)))
            n += count
        name = f"doc{d + 1}.md"
        (out / name).write_text("\n\n".join(paragraphs) + "\n")
        refs.append({"doc": name, "n_sentences": n, "boundaries": boundaries})
    (out / "refs.json").write_text(json.dumps({"documents": refs}, indent=2) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests/fixtures/synthetic")
