"""Inductive top-N evaluation and spectrum profiling.

Evaluation users are never part of the rating matrix, so each one is
scored from scratch: their chronologically last interaction is held out
as the single target, everything earlier forms the observation vector,
and the model ranks the items it has never seen the user touch.  Items
absent from the training graph cannot be ranked; a user whose target is
such an item counts as a miss rather than being dropped, which keeps the
denominator honest.

Hit rate at N is 1 when the target appears in the top N.  NDCG places a
single relevant item, so the discounted gain is 1/log2(rank + 1) and the
ideal normalizer is 1.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import HoldoutError, holdout_last
from .filters import FilterModel, Prediction, recommend_topn, reconstruct
from .online import NoiseConfig, init_state, update
from .spectral import SpectralBasis, gft


class ProtocolError(ValueError):
    """The evaluation cohort cannot be scored as requested."""


def hit_rate(recs, truth, n: int) -> float:
    """1.0 when any relevant item appears in the first n recommendations."""
    if n < 1:
        raise ValueError(f"cutoff must be >= 1, got {n}")
    truth = set(truth)
    return 1.0 if any(r in truth for r in list(recs)[:n]) else 0.0


def ndcg(recs, truth, n: int) -> float:
    """Discounted cumulative gain over the first n slots, normalized.

    Binary gains: each relevant item at 1-based rank j contributes
    1/log2(j + 1).  The normalizer places min(|truth|, n) hits at the
    top.  With a single relevant item this reduces to 1/log2(rank + 1).
    """
    if n < 1:
        raise ValueError(f"cutoff must be >= 1, got {n}")
    truth = set(truth)
    if not truth:
        return 0.0
    dcg = 0.0
    for j, rec in enumerate(list(recs)[:n], start=1):
        if rec in truth:
            dcg += 1.0 / math.log2(j + 1)
    ideal = sum(1.0 / math.log2(j + 1) for j in range(1, min(len(truth), n) + 1))
    return dcg / ideal


@dataclass
class MetricsReport:
    """Per-cutoff means and standard errors plus cohort bookkeeping."""

    cutoffs: tuple
    stats: dict
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cutoffs": list(self.cutoffs),
            "metrics": {
                str(c): {k: float(v) for k, v in self.stats[c].items()} for c in self.cutoffs
            },
            "counts": {k: int(v) for k, v in self.counts.items()},
        }


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _aggregate(rows, cutoffs, counts) -> MetricsReport:
    stats = {}
    hr = np.array([[r[0][c] for c in cutoffs] for r in rows]) if rows else np.zeros((0, len(cutoffs)))
    nd = np.array([[r[1][c] for c in cutoffs] for r in rows]) if rows else np.zeros((0, len(cutoffs)))
    for j, c in enumerate(cutoffs):
        stats[c] = {
            "hr": float(hr[:, j].mean()) if rows else 0.0,
            "hr_stderr": _stderr(hr[:, j]),
            "ndcg": float(nd[:, j].mean()) if rows else 0.0,
            "ndcg_stderr": _stderr(nd[:, j]),
        }
    counts["users"] = len(rows)
    return MetricsReport(tuple(cutoffs), stats, counts)


def _score_ranking(pred: Prediction, target_row, cutoffs):
    """Metric rows for one user given the prediction and target."""
    max_cut = max(cutoffs)
    hr_row, nd_row = {}, {}
    if target_row is None or target_row in pred.observed:
        # target unrankable: automatic miss at every cutoff
        for c in cutoffs:
            hr_row[c], nd_row[c] = 0.0, 0.0
        return hr_row, nd_row
    recs = recommend_topn(pred, max_cut)
    truth = {int(target_row)}
    for c in cutoffs:
        hr_row[c] = hit_rate(recs, truth, c)
        nd_row[c] = ndcg(recs, truth, c)
    return hr_row, nd_row


def _run_cohort(worker, users_events, threads):
    items = list(users_events.items())
    if threads <= 1:
        return [worker(ev) for _, ev in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, (ev for _, ev in items)))


def evaluate_filter(
    model: FilterModel,
    item_rows: dict,
    users_events: dict,
    cutoffs=(10, 50, 100),
    threads: int = 1,
) -> MetricsReport:
    """Score a cohort with the batch filter.

    Each user needs >= 2 events (prefix plus target); others are skipped
    and counted.  Results are deterministic and independent of the
    thread count: per-user rows are computed independently and reduced
    in cohort order.
    """
    cutoffs = tuple(sorted(set(int(c) for c in cutoffs)))
    if not cutoffs:
        raise ProtocolError("need at least one cutoff")
    counts = {"skipped": 0, "unseen_targets": 0, "unknown_prefix_items": 0}

    def worker(events):
        try:
            prefix_items, target = holdout_last(events)
        except HoldoutError:
            return None
        prefix_rows = {item_rows[i] for i in prefix_items if i in item_rows}
        unknown = len(prefix_items) - len(prefix_rows)
        target_row = item_rows.get(target)
        s = np.zeros(model.n)
        if prefix_rows:
            s[list(prefix_rows)] = 1.0
        pred = reconstruct(model, s)
        hr_row, nd_row = _score_ranking(pred, target_row, cutoffs)
        return hr_row, nd_row, target_row is None, unknown

    results = _run_cohort(worker, users_events, threads)
    rows = []
    for res in results:
        if res is None:
            counts["skipped"] += 1
            continue
        hr_row, nd_row, unseen, unknown = res
        counts["unseen_targets"] += int(unseen)
        counts["unknown_prefix_items"] += unknown
        rows.append((hr_row, nd_row))
    return _aggregate(rows, cutoffs, counts)


def evaluate_online(
    model: FilterModel,
    item_rows: dict,
    users_events: dict,
    noise: NoiseConfig,
    p0,
    cutoffs=(10, 50, 100),
    threads: int = 1,
) -> MetricsReport:
    """Score a cohort with the streaming estimator.

    The target stays held out exactly as in evaluate_filter; the state
    is seeded from all events before the last observed one, and that
    last observed event is fed through one prediction-correction cycle.
    Users need >= 3 events so the fed event never touches the target.
    """
    cutoffs = tuple(sorted(set(int(c) for c in cutoffs)))
    if not cutoffs:
        raise ProtocolError("need at least one cutoff")
    counts = {"skipped": 0, "unseen_targets": 0, "unknown_prefix_items": 0}

    def worker(events):
        if len(events) < 3:
            return None
        ordered = sorted(events, key=lambda ev: ev.t)
        target = ordered[-1].item
        fed = ordered[-2].item
        prefix_items = {ev.item for ev in ordered[:-2]}
        prefix_rows = {item_rows[i] for i in prefix_items if i in item_rows}
        unknown = len(prefix_items) - len(prefix_rows)

        fed_row = item_rows.get(fed)
        if fed_row is None:
            unknown += 1
            delta = frozenset()
        elif fed_row in prefix_rows:
            delta = frozenset()  # repeat purchase adds no new observation
        else:
            delta = frozenset([fed_row])

        state = init_state(model, prefix_rows, p0)
        _, pred = update(model, state, delta, noise)
        target_row = item_rows.get(target)
        hr_row, nd_row = _score_ranking(pred, target_row, cutoffs)
        return hr_row, nd_row, target_row is None, unknown

    results = _run_cohort(worker, users_events, threads)
    rows = []
    for res in results:
        if res is None:
            counts["skipped"] += 1
            continue
        hr_row, nd_row, unseen, unknown = res
        counts["unseen_targets"] += int(unseen)
        counts["unknown_prefix_items"] += unknown
        rows.append((hr_row, nd_row))
    return _aggregate(rows, cutoffs, counts)


@dataclass
class SpectrumProfile:
    """Average squared frequency content of a family of signals.

    Each signal's coefficient vector is scaled to unit length before
    averaging, so the profile sums to 1 and is comparable across
    cohorts of different activity levels.
    """

    energy: np.ndarray
    count: int
    skipped: int


def spectrum_profile(basis: SpectralBasis, vectors) -> SpectrumProfile:
    """Average normalized squared spectrum over an iterable of signals."""
    acc = np.zeros(basis.k)
    count = 0
    skipped = 0
    for v in vectors:
        c = gft(basis, np.asarray(v, dtype=np.float64))
        norm = np.linalg.norm(c)
        if norm <= 1e-15:
            skipped += 1
            continue
        c = c / norm
        acc += c * c
        count += 1
    if count == 0:
        raise ProtocolError("no nonzero signals to profile")
    return SpectrumProfile(acc / count, count, skipped)
