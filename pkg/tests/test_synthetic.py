import numpy as np
import pytest

from specrec import Interaction, window_log


def test_deterministic_by_seed():
    assert window_log(n_items=20, n_users=10, seed=5) == window_log(
        n_items=20, n_users=10, seed=5
    )
    assert window_log(n_items=20, n_users=10, seed=5) != window_log(
        n_items=20, n_users=10, seed=6
    )


def test_event_shape_and_ranges():
    log = window_log(n_items=30, n_users=12, seed=1, events_lo=3, events_hi=6)
    assert all(isinstance(ev, Interaction) for ev in log)
    per_user = {}
    for ev in log:
        per_user.setdefault(ev.user, []).append(ev)
    assert len(per_user) == 12
    for events in per_user.values():
        assert 3 <= len(events) <= 6
        # timestamps count up within a user, so holdout order is stable
        assert [ev.t for ev in events] == list(map(float, range(len(events))))
    items = {int(ev.item[1:]) for ev in log}
    assert items <= set(range(30))


def test_items_cluster_near_user_center():
    # a narrow window keeps each user inside a small arc of the ring
    log = window_log(n_items=1000, n_users=40, seed=2, events_lo=8, events_hi=8, width=3.0)
    per_user = {}
    for ev in log:
        per_user.setdefault(ev.user, []).append(int(ev.item[1:]))
    for rows in per_user.values():
        angles = np.array(rows) * 2 * np.pi / 1000
        # circular spread: resultant length near 1 means tight cluster
        resultant = np.hypot(np.cos(angles).mean(), np.sin(angles).mean())
        assert resultant > 0.95


def test_uniform_shape_respects_width():
    log = window_log(
        n_items=500, n_users=30, seed=3, events_lo=5, events_hi=5, width=4.0, shape="uniform"
    )
    per_user = {}
    for ev in log:
        per_user.setdefault(ev.user, []).append(int(ev.item[1:]))
    for rows in per_user.values():
        ring = np.array(rows)
        # all offsets within +-4 of some center
        center = ring[0]
        d = np.minimum((ring - center) % 500, (center - ring) % 500)
        assert d.max() <= 8


def test_validation():
    with pytest.raises(ValueError, match="shape"):
        window_log(shape="triangle")
    with pytest.raises(ValueError, match="events_lo"):
        window_log(events_lo=0)
    with pytest.raises(ValueError, match="events_lo"):
        window_log(events_lo=5, events_hi=4)
