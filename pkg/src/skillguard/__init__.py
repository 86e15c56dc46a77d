"""Offline defense toolkit against voice-assistant skill squatting."""

from .counterpart import HistoryFilter, collect_evidence, filter_history, match_skills, segment_sessions
from .graph import PhoneticGraph, PhoneticNeighbors, Skill, build_graph, load_catalog, resolve_phonemes
from .identity import (
    CorpusFetcher,
    MapperTable,
    apply_delta,
    build_mapper_table,
    diff_tables,
    extract_domains,
    find_backlink,
)
from .phonetics import (
    CostMatrix,
    CostMatrixLearner,
    PhonemeSeq,
    learn_cost_matrix,
    load_dict,
    parse_dict,
    phonetic_distance,
    phrase_to_phonemes,
)
from .pipeline import SkillGuard
from .planner import ActionPlan, SkillState, estimate_setup_time, plan_actions
from .simulator import ConfusionModel, evaluate_user, run_q1_experiment, simulate_invocation, sweep_thresholds

__version__ = "0.1.0"
