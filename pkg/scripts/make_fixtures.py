"""Regenerate the JSONL fixtures under src/skillguard/data.

Review counts and ids are synthetic; only invocation phrases and skill names
mirror real marketplace listings.
"""

import json
import random
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "skillguard" / "data"


def asin(rng):
    alphabet = "ABCDEFGHJKLMNPQRSTUVWXYZ0123456789"
    return "B0" + "".join(rng.choice(alphabet) for _ in range(8))


def skill(id_, name, invocation, reviews, override=None):
    out = {
        "id": id_,
        "name": name,
        "invocation": invocation,
        "amazon_url": f"https://www.amazon.com/dp/{id_}",
        "metadata_urls": [],
        "reviews": reviews,
        "account_linking": False,
        "phonemes": None,
    }
    if override:
        out["pronunciation_override"] = override
    return out


def write(name, rows):
    with open(DATA / name, "w", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# Identical-invocation sets. Within a set the first listed skill is the
# intended target whenever it shares the top review count with a rival.
IDENTICAL = [
    ("work excuses", [("Work excuses", 4), ("Work Excuse Generator", 4)]),
    ("a pat on the back", [("A pat on the Back", 12), ("A pat on the Back", 3)]),
    ("stock market", [("Stock Market", 0), ("Stock Market", 0), ("UPRO Market Price", 0)]),
    ("joke master", [("Joke Master", 1), ("Joke Master", 1), ("Joke Master", 0)]),
    ("coffee maker", [("Sevenstax Coffee Maker", 2), ("Coffee Maker", 2),
                      ("Coffee Maker", 0), ("Coffee Maker", 1)]),
    ("my home", [("My Home", 9), ("pi home", 0), ("MY HOME", 2), ("My home cake", 0)]),
    ("good night", [("Good Night", 0), ("Sounds: Good Night", 0), ("Good Night", 0),
                    ("Good Night", 0), ("Goodnight With Motivation Success Quotes", 0)]),
    ("inspiring quotes", [("Inspiring Quotes", 27), ("All Time Inspiring Quotes", 5),
                          ("Inspiring Quotes", 3), ("Inspiring Quotes", 1),
                          ("Inspiring Quotes", 0)]),
]

SIMILAR = [
    "cat facts", "cat fax", "cat fact", "fish facts", "nicole facts", "nicole fax",
    "fit bit", "phit bit", "fit bid", "pit bit", "full moon", "four moon", "fool moon",
    "sleep sounds", "sleep sound", "sheep sounds", "true bank", "truth bank", "blue bank",
]

FIGURE = ["nicole facts", "nicole fax", "fit bit", "phit bit", "fit bid", "daily horoscope"]

PHIT = ["F", "IH", "T", "B", "IH", "T"]

MARKETPLACE = Path(__file__).with_name("marketplace_phrases.txt")


def main():
    rng = random.Random(20231018)
    rows = []
    for invocation, members in IDENTICAL:
        ids = sorted(asin(rng) for _ in members)
        # list the tied first member under the larger id so id order and
        # listing order disagree in tied sets
        ids.reverse()
        for (name, reviews), id_ in zip(members, ids):
            rows.append(skill(id_, name, invocation, reviews))
    write("identical_sets.jsonl", rows)

    rows = []
    for k, phrase in enumerate(SIMILAR):
        override = PHIT if phrase == "phit bit" else None
        rows.append(skill(f"SIM{k:02d}", phrase.title(), phrase, rng.randint(0, 50), override))
    write("similar_cluster.jsonl", rows)

    rows = []
    for k, phrase in enumerate(FIGURE):
        override = PHIT if phrase == "phit bit" else None
        rows.append(skill(f"FIG{k}", phrase.title(), phrase, rng.randint(0, 50), override))
    write("figure_graph.jsonl", rows)

    rows = []
    phrases = [p.strip() for p in MARKETPLACE.read_text().splitlines() if p.strip()]
    for k, phrase in enumerate(phrases):
        rows.append(skill(f"MKT{k:03d}", phrase.title(), phrase, rng.randint(0, 400)))
    write("marketplace_sample.jsonl", rows)


if __name__ == "__main__":
    main()
