"""Online state estimation in the frequency domain.

The closed-form filter is a batch operation; this module keeps a per-user
state that absorbs feedback as it streams in.  The state x is the vector
of filtered frequency coefficients.  A new observation delta moves the
state by the filtered transform of the delta (the prediction step), and
the raw transform of the accumulated observations acts as a measurement
that pulls the state back toward the evidence (the correction step):

    predict   x_bar = x_hat + F delta_s,         p_bar = p + sigma_eta
    measure   z     = U^T (s + delta_s)
    correct   K     = p_bar / (p_bar + sigma_nu)
              x_hat = x_bar + K (z - x_bar)
              p     = (1 - K)^2 p_bar + K^2 sigma_nu

with F = diag(H(lambda)) U^T, so F delta_s is computed in O(k) per new
item.  All covariances are diagonal, kept as length-k vectors; the
variance update uses the squared (Joseph) form, which stays positive for
any gain.  One update touches O(nk + k^2) scalars; pass an OpCounter to
measure that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .data import holdout_last
from .filters import FilterModel, Prediction, rows_to_coefficients

P_FLOOR = 1e-8


class EstimationError(ValueError):
    """Not enough data to estimate the initial state variance."""


class OpCounter:
    """Tallies scalar multiply-level work reported by update()."""

    def __init__(self):
        self.total = 0

    def add(self, n):
        self.total += int(n)


@dataclass(frozen=True)
class NoiseConfig:
    """Diagonal process/measurement noise levels (scalars, broadcast to k)."""

    sigma_eta: float = 1e-4
    sigma_nu: float = 1e-4

    def __post_init__(self):
        if self.sigma_eta < 0 or self.sigma_nu < 0:
            raise ValueError("noise variances must be nonnegative")


@dataclass(frozen=True)
class UserState:
    """Frequency-domain state estimate for one user.

    x_hat   : filtered coefficient estimate, length k
    p_diag  : per-frequency estimate variance, length k
    observed: item rows folded into the state so far
    """

    x_hat: np.ndarray
    p_diag: np.ndarray
    observed: frozenset


def _as_p_vector(p0, k: int) -> np.ndarray:
    p = np.asarray(p0, dtype=np.float64)
    if p.ndim == 0:
        p = np.full(k, float(p))
    if p.shape != (k,):
        raise ValueError(f"p0 must be scalar or length {k}, got shape {p.shape}")
    if np.any(p < 0):
        raise ValueError("initial variances must be nonnegative")
    return np.maximum(p, P_FLOOR)


def init_state(model: FilterModel, prefix_rows: Iterable[int], p0) -> UserState:
    """Seed the state from a user's existing observations.

    The initial estimate is the batch filter output in the frequency
    domain; p0 sets the prior variance (see estimate_p0).
    """
    rows = frozenset(int(r) for r in prefix_rows)
    bad = [r for r in rows if not 0 <= r < model.n]
    if bad:
        raise ValueError(f"item row {bad[0]} outside [0, {model.n})")
    x_hat = model.gains * rows_to_coefficients(model, rows)
    return UserState(x_hat, _as_p_vector(p0, model.k), rows)


def predict_step(model: FilterModel, state: UserState, delta_rows: Iterable[int], noise: NoiseConfig):
    """Extrapolate state and variance through the new observations."""
    x_bar = state.x_hat + model.gains * rows_to_coefficients(model, delta_rows)
    p_bar = state.p_diag + noise.sigma_eta
    return x_bar, p_bar


def correct_step(x_bar: np.ndarray, p_bar: np.ndarray, z: np.ndarray, noise: NoiseConfig):
    """Blend the extrapolated state with the measurement.

    The gain is optimal for the diagonal model; the variance update is
    the squared form, valid for any gain.
    """
    gain = p_bar / (p_bar + noise.sigma_nu)
    x_hat = x_bar + gain * (z - x_bar)
    p_new = (1.0 - gain) ** 2 * p_bar + gain**2 * noise.sigma_nu
    return x_hat, p_new


def update(
    model: FilterModel,
    state: UserState,
    delta_rows: Iterable[int],
    noise: NoiseConfig,
    ops: OpCounter | None = None,
):
    """One prediction-correction cycle; returns (new state, prediction).

    delta_rows must be disjoint from what the state already contains.
    An empty delta is allowed and acts as a pure noise-rebalancing step.
    """
    delta = frozenset(int(r) for r in delta_rows)
    overlap = delta & state.observed
    if overlap:
        raise ValueError(f"delta items already observed: {sorted(overlap)[:5]}")
    bad = [r for r in delta if not 0 <= r < model.n]
    if bad:
        raise ValueError(f"delta row {bad[0]} outside [0, {model.n})")

    x_bar, p_bar = predict_step(model, state, delta, noise)
    all_rows = state.observed | delta
    z = rows_to_coefficients(model, all_rows)
    x_hat, p_new = correct_step(x_bar, p_bar, z, noise)
    scores = model.basis.vectors @ x_hat

    if ops is not None:
        k, n = model.k, model.n
        ops.add(len(delta) * k + 2 * k)   # predict
        ops.add(len(all_rows) * k)        # measurement transform
        ops.add(8 * k)                    # gain + correction + variance
        ops.add(n * k)                    # expand scores to items

    new_state = UserState(x_hat, p_new, all_rows)
    return new_state, Prediction(scores, all_rows)


def estimate_p0(model: FilterModel, users_events: dict, item_rows: dict) -> np.ndarray:
    """Per-frequency prior variance from held-out validation users.

    For every user with at least two events, compare the measurement of
    their full history against the state extrapolated from all but the
    last event; the mean squared residual per frequency (floored at
    1e-8) seeds p0 for evaluation-time states.
    """
    acc = np.zeros(model.k)
    count = 0
    for events in users_events.values():
        if len(events) < 2:
            continue
        prefix_items, last_item = holdout_last(events)
        prefix_rows = {item_rows[i] for i in prefix_items if i in item_rows}
        full_rows = set(prefix_rows)
        if last_item in item_rows:
            full_rows.add(item_rows[last_item])
        z_full = rows_to_coefficients(model, full_rows)
        x_bar = model.gains * rows_to_coefficients(model, prefix_rows)
        r = z_full - x_bar
        acc += r * r
        count += 1
    if count == 0:
        raise EstimationError("no user has >= 2 events; cannot estimate p0")
    return np.maximum(acc / count, P_FLOOR)
