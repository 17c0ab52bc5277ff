"""Interaction logs, user splits, and the binary rating matrix.

The on-disk format is delimited text with one event per line,
``user item timestamp``, separated by commas or whitespace.  Ids are
opaque strings; timestamps must parse as floats.  Users are partitioned
into train/validation/test groups, and only train users contribute
columns to the rating matrix, so evaluation users are never part of the
graph they are scored against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy import sparse


class ParseError(ValueError):
    """A log line could not be parsed."""


class SplitError(ValueError):
    """The user population cannot be partitioned as requested."""


class HoldoutError(ValueError):
    """A user has too few events to hold one out."""


class Interaction(NamedTuple):
    user: str
    item: str
    t: float


@dataclass(frozen=True)
class DatasetSplit:
    """A user-level partition plus the dense index maps derived from it.

    ``item_index`` maps item ids to matrix rows and covers exactly the
    items that appear in some train user's history.  ``user_index`` maps
    train user ids to matrix columns.  Both maps are built from sorted
    ids so the same partition always yields the same matrix layout.
    """

    train_users: tuple[str, ...]
    val_users: tuple[str, ...]
    test_users: tuple[str, ...]
    item_index: dict[str, int]
    user_index: dict[str, int]
    seed: int
    ratios: tuple[int, int, int]

    def to_json_dict(self) -> dict:
        return {
            "train_users": list(self.train_users),
            "val_users": list(self.val_users),
            "test_users": list(self.test_users),
            "seed": self.seed,
            "ratios": list(self.ratios),
        }


@dataclass
class RatingMatrix:
    """Binary item-by-user matrix over train users.

    Rows are items, columns are train users, entries are 1.0 where the
    user interacted with the item.  Rows and columns that would be empty
    are pruned and recorded so every remaining vertex has degree >= 1.
    """

    matrix: sparse.csr_matrix
    item_rows: dict[str, int]
    user_cols: dict[str, int]
    dropped_items: list[str] = field(default_factory=list)
    dropped_users: list[str] = field(default_factory=list)

    @property
    def n_items(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_users(self) -> int:
        return self.matrix.shape[1]


def load_interactions(path) -> list[Interaction]:
    """Read a delimited event log.

    Blank lines and lines starting with ``#`` are skipped.  Each data
    line must provide at least user, item, and a numeric timestamp;
    extra trailing fields are ignored.
    """
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",") if "," in line else line.split()
            if len(parts) < 3:
                raise ParseError(f"line {lineno}: expected 'user item timestamp', got {line!r}")
            user, item = parts[0].strip(), parts[1].strip()
            if not user or not item:
                raise ParseError(f"line {lineno}: empty user or item id")
            try:
                t = float(parts[2])
            except ValueError:
                raise ParseError(f"line {lineno}: timestamp {parts[2]!r} is not numeric") from None
            events.append(Interaction(user, item, t))
    return events


def filter_activity(log, min_user_events: int = 0, min_item_raters: int = 0):
    """Drop rarely rated items, then inactive users.

    Items are kept when at least ``min_item_raters`` distinct users
    touched them; users are kept when at least ``min_user_events`` of
    their events survive the item filter.  Both default to 0 (no-op).
    Returns ``(filtered_log, stats)`` where the stats count ids present
    in the input log but absent from the output, whichever stage removed
    them.
    """
    kept = list(log)
    before_events = len(kept)
    before_items = {ev.item for ev in kept}
    before_users = {ev.user for ev in kept}

    if min_item_raters > 0:
        raters: dict[str, set] = {}
        for ev in kept:
            raters.setdefault(ev.item, set()).add(ev.user)
        good_items = {i for i, us in raters.items() if len(us) >= min_item_raters}
        kept = [ev for ev in kept if ev.item in good_items]

    if min_user_events > 0:
        counts: dict[str, int] = {}
        for ev in kept:
            counts[ev.user] = counts.get(ev.user, 0) + 1
        good_users = {u for u, c in counts.items() if c >= min_user_events}
        kept = [ev for ev in kept if ev.user in good_users]

    stats = {
        "items_dropped": len(before_items - {ev.item for ev in kept}),
        "users_dropped": len(before_users - {ev.user for ev in kept}),
        "events_dropped": before_events - len(kept),
    }
    return kept, stats


def _index_maps(log, train_users):
    train = set(train_users)
    items = sorted({ev.item for ev in log if ev.user in train})
    item_index = {item: i for i, item in enumerate(items)}
    user_index = {user: j for j, user in enumerate(sorted(train))}
    return item_index, user_index


def split_users(log, ratios: tuple[int, int, int] = (8, 1, 1), seed: int = 9876) -> DatasetSplit:
    """Partition users into train/validation/test by a seeded shuffle.

    Users are collected in first-appearance order, shuffled with the
    seed, and cut at the ratio boundaries.  For small populations the
    boundaries are nudged so validation and test each keep at least one
    user.  Fewer than 3 distinct users is an error.
    """
    if any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise SplitError(f"ratios must be nonnegative and sum > 0, got {ratios}")
    seen: dict[str, None] = {}
    for ev in log:
        seen.setdefault(ev.user, None)
    users = list(seen)
    n = len(users)
    if n < 3:
        raise SplitError(f"need at least 3 distinct users to split, got {n}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    shuffled = [users[i] for i in order]

    total = sum(ratios)
    c1 = int(n * ratios[0] / total)
    c2 = int(n * (ratios[0] + ratios[1]) / total)
    # keep validation and test nonempty even when rounding collapses them
    if c2 >= n:
        c2 = n - 1
    if c1 >= c2:
        c1 = c2 - 1
    if c1 < 1:
        raise SplitError(f"cannot produce three nonempty groups from {n} users with ratios {ratios}")

    train, val, test = shuffled[:c1], shuffled[c1:c2], shuffled[c2:]
    item_index, user_index = _index_maps(log, train)
    return DatasetSplit(tuple(train), tuple(val), tuple(test), item_index, user_index, seed, tuple(ratios))


def rebuild_split(log, manifest: dict) -> DatasetSplit:
    """Reconstruct a DatasetSplit from its JSON manifest plus the log."""
    train = tuple(manifest["train_users"])
    item_index, user_index = _index_maps(log, train)
    return DatasetSplit(
        train,
        tuple(manifest["val_users"]),
        tuple(manifest["test_users"]),
        item_index,
        user_index,
        int(manifest["seed"]),
        tuple(manifest["ratios"]),
    )


def build_matrix(log, split: DatasetSplit) -> RatingMatrix:
    """Assemble the binary item-by-user matrix over train users.

    Duplicate (item, user) pairs collapse to a single 1.  Empty rows or
    columns (possible when the log passed in is a subset of the one the
    split was built from) are pruned and their ids recorded.
    """
    pairs = set()
    for ev in log:
        col = split.user_index.get(ev.user)
        if col is None:
            continue
        row = split.item_index.get(ev.item)
        if row is None:
            continue
        pairs.add((row, col))

    n = len(split.item_index)
    m = len(split.user_index)
    if not pairs:
        raise SplitError("no train events; cannot build a rating matrix")
    rows = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
    cols = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
    mat = sparse.csr_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n, m))

    row_deg = np.asarray(mat.sum(axis=1)).ravel()
    col_deg = np.asarray(mat.sum(axis=0)).ravel()
    keep_rows = np.flatnonzero(row_deg > 0)
    keep_cols = np.flatnonzero(col_deg > 0)

    items_by_row = {i: item for item, i in split.item_index.items()}
    users_by_col = {j: user for user, j in split.user_index.items()}
    dropped_items = [items_by_row[i] for i in np.flatnonzero(row_deg == 0)]
    dropped_users = [users_by_col[j] for j in np.flatnonzero(col_deg == 0)]

    if dropped_items or dropped_users:
        mat = mat[keep_rows][:, keep_cols].tocsr()
    item_rows = {items_by_row[i]: new for new, i in enumerate(keep_rows)}
    user_cols = {users_by_col[j]: new for new, j in enumerate(keep_cols)}
    return RatingMatrix(mat, item_rows, user_cols, dropped_items, dropped_users)


def group_events(log) -> dict[str, list[Interaction]]:
    """Group events by user, preserving file order within each user."""
    groups: dict[str, list[Interaction]] = {}
    for ev in log:
        groups.setdefault(ev.user, []).append(ev)
    return groups


def holdout_last(events: Iterable[Interaction]):
    """Split one user's history into (earlier item set, last item).

    Events are ordered by timestamp with input order breaking ties; the
    chronologically last event is the held-out target and every earlier
    item forms the prefix set.
    """
    ordered = sorted(events, key=lambda ev: ev.t)
    if len(ordered) < 2:
        raise HoldoutError(f"need at least 2 events to hold one out, got {len(ordered)}")
    prefix = {ev.item for ev in ordered[:-1]}
    return prefix, ordered[-1].item


def items_to_vector(item_rows: dict[str, int], n: int, items: Iterable[str]):
    """One-hot observation vector for a set of item ids.

    Ids without a matrix row are skipped and returned separately so the
    caller can count them.
    """
    s = np.zeros(n)
    unknown = []
    for item in items:
        row = item_rows.get(item)
        if row is None:
            unknown.append(item)
        else:
            s[row] = 1.0
    return s, unknown
