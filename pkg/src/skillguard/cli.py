"""Command-line entry point: ``skillguard <command> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .counterpart import (
    MINUTE_MS,
    Evidence,
    collect_evidence,
    load_apps,
    load_history,
    match_skills,
)
from .exceptions import SkillGuardError
from .fixtures import load_fixture
from .graph import PhoneticGraph, build_graph, load_catalog, resolve_phonemes
from .identity import (
    CorpusFetcher,
    Delta,
    MapperTable,
    apply_delta,
    build_mapper_table,
    diff_tables,
    domain_certs_from_manifest,
)
from .io import canonical_dumps, read_json, write_canonical
from .phonetics import (
    CostMatrix,
    learn_cost_matrix,
    load_dict,
    load_overrides,
    phonetic_distance,
    phrase_to_phonemes,
)
from .planner import SkillState, plan_actions
from .simulator import ConfusionModel, Outcome, run_q1_experiment, sweep_thresholds
from .synthetic import generate_world, load_traces

log = logging.getLogger("skillguard")

EXIT_CODES = """\
exit codes:
  0  success
  1  invalid input (bad JSON, bad value)
  2  missing file or dictionary parse error
  3  dictionary has no alternate pronunciations
  4  out-of-vocabulary words in a phrase
  5  table/delta version mismatch
  6  unknown or duplicate skill id
"""


def _existing(path: str | None, flag: str, required: bool = True) -> Path | None:
    if path is None:
        if required:
            raise FileNotFoundError(f"{flag} is required")
        return None
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{flag}: no such file: {path}")
    return p


def _emit(obj, out: str | None) -> None:
    if out:
        write_canonical(obj, out)
    else:
        sys.stdout.write(canonical_dumps(obj))


def _load_pdict(args):
    return load_dict(_existing(args.dict, "--dict", required=False))


def _load_costs(args, pdict=None) -> CostMatrix:
    if getattr(args, "costs", None):
        return CostMatrix.from_dict(read_json(_existing(args.costs, "--costs")))
    return learn_cost_matrix(pdict if pdict is not None else _load_pdict(args))


def _overrides(args):
    path = getattr(args, "overrides", None)
    return load_overrides(_existing(path, "--overrides")) if path else None


def _catalog(args, pdict):
    catalog = load_catalog(_existing(args.catalog, "--catalog"))
    return resolve_phonemes(catalog, pdict, _overrides(args))


def cmd_learn_costs(args):
    pdict = _load_pdict(args)
    costs = learn_cost_matrix(pdict)
    print(f"pairs: {costs.n_pairs}")
    if args.out:
        write_canonical(costs.to_dict(), args.out)


def cmd_distance(args):
    pdict = _load_pdict(args)
    costs = _load_costs(args, pdict)
    overrides = _overrides(args)
    a = phrase_to_phonemes(args.phrase_a, pdict, overrides)
    b = phrase_to_phonemes(args.phrase_b, pdict, overrides)
    print(f"{phonetic_distance(a, b, costs):.2f}")


def cmd_graph(args):
    pdict = _load_pdict(args)
    costs = _load_costs(args, pdict)
    graph = build_graph(_catalog(args, pdict), costs, args.threshold)
    _emit(graph.to_dict(), args.out)


def cmd_build_table(args):
    pdict = _load_pdict(args)
    costs = _load_costs(args, pdict)
    catalog = _catalog(args, pdict)
    fetcher = CorpusFetcher.from_manifest(_existing(args.corpus, "--corpus"))
    table = build_mapper_table(catalog, costs, args.threshold, fetcher, version=args.version)
    _emit(table.to_dict(), args.out)
    print(f"entries: {len(table)}", file=sys.stderr)


def cmd_delta(args):
    old = MapperTable.from_dict(read_json(_existing(args.old, "--old")))
    new = MapperTable.from_dict(read_json(_existing(args.new, "--new")))
    _emit(diff_tables(old, new).to_dict(), args.out)


def cmd_apply_delta(args):
    old = MapperTable.from_dict(read_json(_existing(args.old, "--old")))
    delta = Delta.from_dict(read_json(_existing(args.delta, "--delta")))
    _emit(apply_delta(old, delta).to_dict(), args.out)


def cmd_filter(args):
    history = load_history(_existing(args.history, "--history"))
    apps = load_apps(_existing(args.apps, "--apps")) if args.apps else []
    evidence = collect_evidence(
        history, apps, args.session_gap_min * MINUTE_MS, args.precede_window_min * MINUTE_MS
    )
    _emit(
        {
            "qualified_domains": sorted(evidence.qualified_domains),
            "app_certs": sorted(evidence.app_certs),
        },
        args.out,
    )


def cmd_match(args):
    raw = read_json(_existing(args.evidence, "--evidence"))
    evidence = Evidence(frozenset(raw.get("qualified_domains", ())),
                        frozenset(raw.get("app_certs", ())))
    table = MapperTable.from_dict(read_json(_existing(args.table, "--table")))
    certs = domain_certs_from_manifest(_existing(args.corpus, "--corpus"))
    _emit(sorted(match_skills(evidence, table, certs)), args.out)


def cmd_plan(args):
    matched = read_json(_existing(args.matched, "--matched"))
    graph = PhoneticGraph.from_dict(read_json(_existing(args.graph, "--graph")))
    if args.threshold is not None:
        graph = graph.with_threshold(min(args.threshold, graph.threshold))
    state = {}
    if args.state:
        state = {k: SkillState(v) for k, v in read_json(_existing(args.state, "--state")).items()}
    plan = plan_actions(set(matched), graph, state)
    _emit(plan.to_dict(), args.out)


def cmd_simulate(args):
    pdict = _load_pdict(args)
    costs = _load_costs(args, pdict)
    overrides = _overrides(args)
    if args.catalog:
        catalog = _catalog(args, pdict)
    else:
        name = "identical_sets" if args.scenario == "identical" else "similar_cluster"
        catalog = load_fixture(name, pdict, overrides)
    graph = build_graph(catalog, costs, args.threshold)
    model = ConfusionModel(args.confusion_radius, args.fail_prob, args.seed, args.mishear_prob)
    result = run_q1_experiment(args.scenario, catalog, graph, model, args.threshold)
    report = {}
    for config in ("baseline", "defended"):
        counts = result.counts(config)
        report[config] = counts
        print(f"[{config}]")
        for outcome in Outcome:
            print(f"{outcome.value}: {counts[outcome.value]}")
    if args.out:
        write_canonical(report, args.out)


def _grid(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        out, k = [], 0
        while start + k * step <= stop + 1e-9:
            out.append(start + k * step)
            k += 1
        return out
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args):
    pdict = _load_pdict(args)
    costs = _load_costs(args, pdict)
    catalog = _catalog(args, pdict)
    fetcher = CorpusFetcher.from_manifest(_existing(args.corpus, "--corpus"))
    traces = load_traces(_existing(args.traces, "--traces"))
    result = sweep_thresholds(
        traces, catalog, costs, fetcher, _grid(args.grid),
        args.session_gap_min * MINUTE_MS, args.precede_window_min * MINUTE_MS,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(result.to_csv(), encoding="utf-8", newline="\n")
    write_canonical(result.summary(), out / "summary.json")
    print(f"rows: {len(result.rows)}")
    print(f"eer: {result.eer:.4f} at threshold {result.eer_threshold:g}")


def cmd_synth(args):
    pdict = _load_pdict(args)
    costs = _load_costs(args, pdict)
    world = generate_world(pdict, costs, args.n_skills, args.n_users, args.seed)
    paths = world.write(args.out)
    for key, path in paths.items():
        print(f"{key}: {path}")


def _add_common(p, *names):
    flags = {
        "dict": lambda: p.add_argument("--dict", help="CMU dictionary file (default: bundled)"),
        "costs": lambda: p.add_argument("--costs", help="learned cost-matrix JSON"),
        "overrides": lambda: p.add_argument("--overrides", help="pronunciation overrides JSON"),
        "catalog": lambda: p.add_argument("--catalog", help="skill catalog JSONL"),
        "corpus": lambda: p.add_argument("--corpus", help="page corpus manifest JSON"),
        "threshold": lambda: p.add_argument("--threshold", type=float, default=400.0),
        "out": lambda: p.add_argument("--out", help="output path"),
        "history": lambda: p.add_argument("--history", help="history CSV (timestamp_ms,url)"),
        "apps": lambda: p.add_argument("--apps", help="installed apps JSON"),
        "traces": lambda: p.add_argument("--traces", help="user traces JSON"),
        "session": lambda: p.add_argument("--session-gap-min", type=float, default=30.0),
        "precede": lambda: p.add_argument("--precede-window-min", type=float, default=5.0),
        "seed": lambda: p.add_argument("--seed", type=int, required=True),
    }
    for name in names:
        flags[name]()


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="skillguard",
        description="Skill-squatting defense toolkit.",
        epilog=EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file of flag defaults (flags override it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_, *common):
        p = sub.add_parser(name, help=help_, epilog=EXIT_CODES,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_common(p, *common)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    add("learn-costs", cmd_learn_costs, "learn the phoneme cost matrix", "dict", "out")
    p = add("distance", cmd_distance, "phonetic distance between two phrases",
            "dict", "costs", "overrides")
    p.add_argument("phrase_a")
    p.add_argument("phrase_b")
    add("graph", cmd_graph, "export the pruned phonetic graph",
        "dict", "costs", "overrides", "catalog", "threshold", "out")
    p = add("build-table", cmd_build_table, "build the mapper table",
            "dict", "costs", "overrides", "catalog", "corpus", "threshold", "out")
    p.add_argument("--version", dest="version", type=int, default=1)
    p = add("delta", cmd_delta, "diff two consecutive mapper tables", "out")
    p.add_argument("--old", required=True)
    p.add_argument("--new", required=True)
    p = add("apply-delta", cmd_apply_delta, "apply a delta to a mapper table", "out")
    p.add_argument("--old", required=True)
    p.add_argument("--delta", required=True)
    add("filter", cmd_filter, "qualified domains from browsing history",
        "history", "apps", "session", "precede", "out")
    p = add("match", cmd_match, "match evidence to mapper-table skills", "corpus", "out")
    p.add_argument("--evidence", required=True)
    p.add_argument("--table", required=True)
    p = add("plan", cmd_plan, "enable/disable plan for matched skills", "out")
    p.add_argument("--matched", required=True, help="JSON array of matched skill ids")
    p.add_argument("--graph", required=True)
    p.add_argument("--state", help="JSON object skill id -> DEFAULT|ENABLED|DISABLED")
    p.add_argument("--threshold", type=float, default=None)
    p = add("simulate", cmd_simulate, "replay the enable/disable invocation experiment",
            "dict", "costs", "overrides", "catalog", "threshold", "seed", "out")
    p.add_argument("--scenario", choices=("identical", "similar"), required=True)
    p.add_argument("--confusion-radius", type=float, default=400.0)
    p.add_argument("--fail-prob", type=float, default=0.0)
    p.add_argument("--mishear-prob", type=float, default=0.0)
    p = add("sweep", cmd_sweep, "FAR/FRR/setup-time sweep over thresholds",
            "dict", "costs", "overrides", "catalog", "corpus", "traces", "session", "precede")
    p.add_argument("--grid", default="0:1000:50", help="start:stop:step or comma list")
    p.add_argument("--out", required=True, help="output directory")
    p = add("synth", cmd_synth, "write a synthetic catalog, corpus and traces",
            "dict", "costs", "seed")
    p.add_argument("--n-skills", type=int, default=1000)
    p.add_argument("--n-users", type=int, default=50)
    p.add_argument("--out", required=True, help="output directory")
    return parser, subs


def main(argv=None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser, subs = build_parser()
    if known.config:
        try:
            config = {k.replace("-", "_"): v for k, v in read_json(known.config).items()}
        except (OSError, ValueError) as exc:
            print(f"error: cannot read --config: {exc}", file=sys.stderr)
            return 2
        for sub in subs.values():
            dests = {a.dest: a for a in sub._actions}
            present = {k: v for k, v in config.items() if k in dests}
            for key in present:
                dests[key].required = False
            sub.set_defaults(**present)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SkillGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
