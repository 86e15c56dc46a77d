"""Bundled fixture catalogs.

* ``identical_sets``: 8 sets / 28 skills sharing invocation phrases.
  Review counts are synthetic; several sets have clones tied on reviews.
* ``similar_cluster``: a dense cluster of near-homophone invocations.
* ``figure_graph``: six skills whose graph keeps 4 edges at threshold 200.
* ``marketplace_sample``: ordinary invocation phrases for background pairs.
* ``squat_pairs``: squatting pairs in the style of published examples.
"""

import json
from importlib import resources

from .graph import Skill, resolve_phonemes

FIXTURES = ("identical_sets", "similar_cluster", "figure_graph", "marketplace_sample")


def fixture_path(name: str):
    return resources.files("skillguard").joinpath("data", name)


def load_fixture(name: str, pdict=None, overrides=None) -> list[Skill]:
    """Load a bundled catalog; resolve phonemes when a dictionary is given."""
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    text = fixture_path(f"{name}.jsonl").read_text(encoding="utf-8")
    skills = [Skill.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
    if pdict is not None:
        skills = resolve_phonemes(skills, pdict, overrides)
    return skills


def squat_pairs() -> tuple[list[tuple[str, str]], dict[str, list[str]]]:
    data = json.loads(fixture_path("squat_pairs.json").read_text(encoding="utf-8"))
    return [tuple(p) for p in data["pairs"]], data["overrides"]
