"""Confidence radii and confidence-set maintenance for the three optimistic learners."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .core import FunctionClass
from .regression import (
    HistoryStats,
    distance_table,
    fit_table,
    residual_table,
    threshold,
)


@dataclass(frozen=True)
class RadiusParams:
    """Constants shared by the radius formulas. All logarithms are natural."""

    bound: float = 1.0
    delta: float = 0.1
    C: float = 1.0
    C_prime: float = 1.0
    per_round_union: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not (self.bound > 0 and self.C > 0 and self.C_prime > 0):
            raise ValueError("bound and constants must be positive")


def beta_ols(t: int, num_functions: int, params: RadiusParams) -> float:
    return 4.0 * params.C * params.bound ** 2 * math.log(t * num_functions / params.delta)


def beta_known_var(t: int, tau: float, sigma2: float, num_functions: int,
                   delta_tilde: float, params: RadiusParams) -> float:
    B = params.bound
    return (4.0 * min(tau * B, B * B) + 16.0 * sigma2) * math.log(t * num_functions / delta_tilde)


def radius_unknown_var(t: int, tau: float, W_band: float, num_functions: int, i: int,
                       delta: float, params: RadiusParams) -> float:
    log_term = math.log(2 * i * i * t * num_functions / delta)
    return params.C_prime * tau * (math.sqrt(W_band * log_term) + params.bound * log_term)


def num_levels(t: int) -> int:
    """``ceil(log2 t)`` for ``t >= 1``, computed exactly."""
    return (t - 1).bit_length()


def level_delta(delta: float, i: int, t: int, per_round_union: bool) -> float:
    """Confidence share of threshold ``i`` in the known-variance learner."""
    if per_round_union:
        return delta / (4.0 * (i + 1) ** 2 * t * t)
    return delta / (2.0 * (i + 1) ** 2)


@dataclass
class ConfidenceState:
    """Masks over the class: the acting set plus one set per threshold level."""

    mask: np.ndarray
    level_masks: Dict[int, np.ndarray] = field(default_factory=dict)
    fits: Dict[int, int] = field(default_factory=dict)
    radii: Dict[int, float] = field(default_factory=dict)
    band_variance: Dict[int, float] = field(default_factory=dict)
    q: int = 0
    degeneracy_events: int = 0
    degenerate_now: bool = False

    @classmethod
    def initial(cls, num_functions: int) -> "ConfidenceState":
        return cls(mask=np.ones(num_functions, dtype=bool))

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def level_sizes(self) -> List[int]:
        return [int(self.level_masks[i].sum()) for i in sorted(self.level_masks)]

    def _resolve(self, new_mask: np.ndarray, fallback_fit: int) -> None:
        self.degenerate_now = not new_mask.any()
        if self.degenerate_now:
            self.degeneracy_events += 1
            new_mask = np.zeros_like(new_mask)
            new_mask[fallback_fit] = True
            for m in self.level_masks.values():
                m |= new_mask
        self.mask = new_mask


def update_sets_ols(state: ConfidenceState, fclass: FunctionClass, fit_id: int,
                    stats: HistoryStats, t: int, params: RadiusParams) -> ConfidenceState:
    """Fresh (non-intersected) set around the unfiltered fit."""
    beta = beta_ols(t, fclass.num_functions, params)
    dist = distance_table(fclass.flat, np.array([fit_id]), stats.total)[0]
    state.fits = {0: fit_id}
    state.radii = {0: beta}
    state._resolve(dist <= beta, fit_id)
    return state


def update_sets_known_var(state: ConfidenceState, fclass: FunctionClass, stats: HistoryStats,
                          t: int, sigma2: float, params: RadiusParams) -> ConfidenceState:
    """Thresholds ``B / 2**i`` for ``i = 0..ceil(log2 t)``, each intersected with its past."""
    prev = state.mask
    q = num_levels(t)
    for i in range(q + 1):
        if i not in state.level_masks:
            state.level_masks[i] = prev.copy()
    cs = stats.threshold_stats(q)
    fits = fit_table(fclass.flat, prev, cs)
    dist = distance_table(fclass.flat, fits, cs)
    new_mask = prev.copy()
    state.radii = {}
    for i in range(q + 1):
        d_i = level_delta(params.delta, i, t, params.per_round_union)
        beta = beta_known_var(t, threshold(params.bound, i), sigma2, fclass.num_functions,
                              d_i, params)
        state.radii[i] = beta
        state.level_masks[i] = state.level_masks[i] & (dist[i] <= beta)
        new_mask &= state.level_masks[i]
    state.fits = {i: int(f) for i, f in enumerate(fits)}
    state.q = q
    state._resolve(new_mask, int(fits[0]))
    return state


def update_sets_unknown_var(state: ConfidenceState, fclass: FunctionClass,
                            stats: HistoryStats, t: int, params: RadiusParams) -> ConfidenceState:
    """Bands ``(B/2**i, B/2**(i-1)]`` for ``i = 1..ceil(log2 t)`` with data-driven radii."""
    prev = state.mask
    q = num_levels(t)
    state.q = q
    state.degenerate_now = False
    if q == 0:
        return state
    for i in range(1, q + 1):
        if i not in state.level_masks:
            state.level_masks[i] = prev.copy()
    cs = stats.band_stats(q)
    fits = fit_table(fclass.flat, prev, cs)
    W = residual_table(fclass.flat, fits, cs)
    dist = distance_table(fclass.flat, fits, cs)
    new_mask = prev.copy()
    state.radii = {}
    state.band_variance = {}
    for k in range(q):
        i = k + 1
        r = radius_unknown_var(t, threshold(params.bound, i), float(W[k]),
                               fclass.num_functions, i, params.delta, params)
        state.radii[i] = r
        state.band_variance[i] = float(W[k])
        state.level_masks[i] = state.level_masks[i] & (dist[k] <= r)
        new_mask &= state.level_masks[i]
    state.fits = {k + 1: int(f) for k, f in enumerate(fits)}
    state._resolve(new_mask, int(fits[0]))
    return state
