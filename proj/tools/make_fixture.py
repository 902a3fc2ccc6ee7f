"""Writes the 20-pair synthetic fixture dataset.

Post and claim share a few keywords; every other word comes from disjoint
filler vocabularies, so the gold rationale is exactly the shared keywords.
"""

import argparse
import json
import random

KEYWORDS = [
    "vaccine", "covid", "election", "fraud", "climate", "warming", "bridge", "collapse",
    "senator", "bribe", "flood", "dam", "virus", "mask", "tax", "refund", "bank", "crash",
    "river", "poison", "school", "closure", "oil", "spill", "army", "parade",
]
POST_FILLER = [
    "people", "say", "today", "really", "wow", "look", "this", "they", "never", "told",
    "us", "share", "before", "deleted", "truth", "finally", "out", "everyone", "knows",
]
CLAIM_FILLER = [
    "the", "a", "of", "was", "in", "report", "officials", "confirmed", "that", "has",
    "been", "according", "to", "statement", "published", "on", "is", "by",
]


def spans_of(text, words):
    out = []
    pos = 0
    for tok in text.split(" "):
        word = tok.rstrip(".,!?")
        if word in words:
            out.append([pos, pos + len(word)])
        pos += len(tok) + 1
    return out


def make_pair(rng, index):
    shared = rng.sample(KEYWORDS, rng.randint(2, 3))
    post_words = shared + rng.sample(POST_FILLER, rng.randint(4, 7))
    claim_words = list(shared) + rng.sample(CLAIM_FILLER, rng.randint(3, 6))
    rng.shuffle(post_words)
    rng.shuffle(claim_words)
    post = " ".join(post_words) + rng.choice(["!", ".", "?"])
    claim = " ".join(claim_words) + "."
    keys = set(shared)
    return {
        "id": f"pair-{index:02d}",
        "post": post,
        "claim": claim,
        "post_rationale": spans_of(post, keys),
        "claim_rationale": spans_of(claim, keys),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/fixture_pairs.jsonl")
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--seed", type=int, default=1000)
    args = parser.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        for i in range(args.count):
            f.write(json.dumps(make_pair(rng, i)) + "\n")


if __name__ == "__main__":
    main()
