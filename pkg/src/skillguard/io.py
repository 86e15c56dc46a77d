"""Canonical JSON: sorted keys, compact separators, one trailing LF."""

import json
from pathlib import Path


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n"


def write_canonical(obj, path) -> None:
    Path(path).write_text(canonical_dumps(obj), encoding="utf-8", newline="\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
