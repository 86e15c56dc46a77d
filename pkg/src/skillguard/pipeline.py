"""End-to-end estimator: catalog + page corpus in, enable/disable plans out."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .counterpart import DEFAULT_PRECEDE_WINDOW_MS, DEFAULT_SESSION_GAP_MS
from .graph import build_graph
from .identity import CorpusFetcher, build_mapper_table
from .planner import plan_actions
from .simulator import ErrorRates, evaluate_user, matched_for_trace
from .urls import DEFAULT_DOMAIN_DENYLIST
from .validation import check_threshold


class SkillGuard(BaseEstimator):
    """Backend plus extension logic as one estimator.

    ``fit`` builds the phonetic graph and the mapper table from a
    phoneme-resolved catalog and a page corpus. ``predict`` turns user traces
    into :class:`~skillguard.planner.ActionPlan` objects, and ``score``
    returns the mean FAR/FRR over traces with known used skills.

    Parameters
    ----------
    costs : CostMatrix
    threshold : float, default=400.0
    session_gap_ms, precede_window_ms : int
        History filter settings.
    denylist : frozenset of str
        Root domains that never serve as identities.

    Attributes
    ----------
    graph_ : PhoneticGraph
    table_ : MapperTable
    domain_certs_ : dict
    """

    def __init__(
        self,
        costs=None,
        threshold=400.0,
        session_gap_ms=DEFAULT_SESSION_GAP_MS,
        precede_window_ms=DEFAULT_PRECEDE_WINDOW_MS,
        denylist=DEFAULT_DOMAIN_DENYLIST,
    ):
        self.costs = costs
        self.threshold = threshold
        self.session_gap_ms = session_gap_ms
        self.precede_window_ms = precede_window_ms
        self.denylist = denylist

    def fit(self, X, y=None, corpus=()):
        if self.costs is None:
            raise ValueError("SkillGuard needs a CostMatrix")
        threshold = check_threshold(self.threshold)
        catalog = list(X)
        fetcher = corpus if isinstance(corpus, CorpusFetcher) else CorpusFetcher(corpus)
        self.graph_ = build_graph(catalog, self.costs, threshold)
        self.table_ = build_mapper_table(
            catalog, self.costs, threshold, fetcher, self.graph_, self.denylist
        )
        self.domain_certs_ = fetcher.domain_certs()
        return self

    def matched(self, trace):
        check_is_fitted(self, "table_")
        return matched_for_trace(
            trace, self.table_, self.domain_certs_, self.session_gap_ms, self.precede_window_ms
        )

    def predict(self, X, current=None):
        """One ActionPlan per trace, planned against ``current`` (default: all DEFAULT)."""
        check_is_fitted(self, "graph_")
        return [plan_actions(self.matched(trace), self.graph_, current or {}) for trace in X]

    def evaluate(self, X) -> list[ErrorRates]:
        check_is_fitted(self, "graph_")
        return [
            evaluate_user(trace, self.table_, self.graph_, self.graph_.threshold,
                          self.domain_certs_, self.session_gap_ms, self.precede_window_ms)
            for trace in X
        ]

    def score(self, X, y=None):
        """1 - (mean FAR + mean FRR) / 2, so higher is better."""
        rates = self.evaluate(X)
        if not rates:
            return 1.0
        far = sum(r.far for r in rates) / len(rates)
        frr = sum(r.frr for r in rates) / len(rates)
        return 1.0 - (far + frr) / 2
