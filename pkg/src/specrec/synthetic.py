"""Synthetic interaction logs with smooth latent structure.

Items sit on a ring; each user picks items near a random center, so
nearby items co-occur and the item graph has a smooth, fast-decaying
spectrum.  Useful for self-contained verification runs and demos where
no real dataset is wired in.
"""

from __future__ import annotations

import numpy as np

from .data import Interaction


def window_log(
    n_items: int = 200,
    n_users: int = 600,
    seed: int = 7,
    events_lo: int = 4,
    events_hi: int = 12,
    width: float = 8.0,
    shape: str = "gaussian",
) -> list:
    """Generate a log of (user, item, timestamp) events.

    Each user draws between events_lo and events_hi events around a
    uniform random center; offsets are gaussian (sd = width) or uniform
    on [-width, width].  Timestamps count up per user, so the last event
    is always the chronological holdout.
    """
    if shape not in ("gaussian", "uniform"):
        raise ValueError(f"shape must be 'gaussian' or 'uniform', got {shape!r}")
    if not 1 <= events_lo <= events_hi:
        raise ValueError("need 1 <= events_lo <= events_hi")
    rng = np.random.default_rng(seed)
    log = []
    for u in range(n_users):
        center = int(rng.integers(n_items))
        count = int(rng.integers(events_lo, events_hi + 1))
        if shape == "gaussian":
            offs = np.rint(rng.normal(0.0, width, size=count)).astype(int)
        else:
            offs = rng.integers(-int(width), int(width) + 1, size=count)
        for t, off in enumerate(offs):
            item = (center + int(off)) % n_items
            log.append(Interaction(f"u{u:05d}", f"i{item:05d}", float(t)))
    return log
