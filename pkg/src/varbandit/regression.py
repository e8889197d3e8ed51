"""Filtered least-squares oracles and variance estimators over a finite class.

Every filtered sum the algorithms need reduces to per-cell counts ``N``, reward
sums ``S`` and squared-reward sums ``Q``. Records are bucketed once, when they
are appended, by the dyadic level of their frozen width, so threshold filters
``width <= B / 2**i`` are suffix sums over levels and bands
``B / 2**i < width <= B / 2**(i-1)`` are single levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from .core import DegenerateSetError, FunctionClass, InteractionRecord

# Widths at or below B / 2**MAX_LEVEL share the last level.
MAX_LEVEL = 60


@dataclass(frozen=True)
class FilterSpec:
    """Which past rounds enter a regression, judged on their frozen width.

    ``all`` keeps every round, ``le`` keeps ``width <= tau`` and ``band`` keeps
    ``tau < width <= 2 * tau``.
    """

    kind: str = "all"
    tau: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in ("all", "le", "band"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind != "all" and not self.tau > 0:
            raise ValueError("filter threshold must be positive")

    @classmethod
    def all(cls) -> "FilterSpec":
        return cls("all")

    @classmethod
    def width_le(cls, tau: float) -> "FilterSpec":
        return cls("le", tau)

    @classmethod
    def width_in(cls, tau: float) -> "FilterSpec":
        return cls("band", tau)

    def accepts(self, w: float) -> bool:
        if self.kind == "all":
            return True
        if self.kind == "le":
            return w <= self.tau
        return self.tau < w <= 2 * self.tau


class CellStats(NamedTuple):
    """Flattened per-cell ``(N, S, Q)``; arrays may carry a leading batch axis."""

    N: np.ndarray
    S: np.ndarray
    Q: np.ndarray


def width_level(w: float, bound: float) -> int:
    """Largest ``i`` in ``[0, MAX_LEVEL]`` with ``w <= bound / 2**i``; ``-1`` if ``w > bound``."""
    if w > bound:
        return -1
    i = 0
    while i < MAX_LEVEL and w <= bound / 2.0 ** (i + 1):
        i += 1
    return i


def threshold(bound: float, i: int) -> float:
    return bound / 2.0 ** i


class HistoryStats:
    """Append-only interaction history with level-bucketed sufficient statistics.

    Row ``k`` of the histograms holds rounds whose width level is ``k - 1``
    (row 0: width above the bound, which a valid class never produces).
    """

    def __init__(self, num_contexts: int, num_actions: int, bound: float) -> None:
        self.num_actions = num_actions
        self.bound = float(bound)
        cells = num_contexts * num_actions
        self.N = np.zeros((MAX_LEVEL + 2, cells))
        self.S = np.zeros((MAX_LEVEL + 2, cells))
        self.Q = np.zeros((MAX_LEVEL + 2, cells))
        self.total = CellStats(np.zeros(cells), np.zeros(cells), np.zeros(cells))
        self.records: List[InteractionRecord] = []
        self.levels: List[int] = []

    @classmethod
    def for_class(cls, fclass: FunctionClass) -> "HistoryStats":
        return cls(fclass.num_contexts, fclass.num_actions, fclass.bound)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: InteractionRecord) -> None:
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("records must arrive in increasing round order")
        c = record.context_id * self.num_actions + record.action_id
        r = record.reward
        row = width_level(record.width_at_play, self.bound) + 1
        self.N[row, c] += 1.0
        self.S[row, c] += r
        self.Q[row, c] += r * r
        self.total.N[c] += 1.0
        self.total.S[c] += r
        self.total.Q[c] += r * r
        self.records.append(record)
        self.levels.append(row - 1)

    def _dyadic_index(self, tau: float) -> Optional[int]:
        for i in range(MAX_LEVEL):
            if threshold(self.bound, i) == tau:
                return i
        return None

    def cell_stats(self, filt: FilterSpec) -> CellStats:
        """Per-cell ``(N, S, Q)`` restricted to the rounds ``filt`` keeps."""
        if filt.kind == "all":
            return CellStats(self.total.N.copy(), self.total.S.copy(), self.total.Q.copy())
        i = self._dyadic_index(filt.tau)
        if i is None or (filt.kind == "band" and i == 0):
            return self._loop_stats(filt)
        if filt.kind == "le":
            return CellStats(self.N[i + 1:].sum(axis=0), self.S[i + 1:].sum(axis=0),
                             self.Q[i + 1:].sum(axis=0))
        # band (B/2**i, B/2**(i-1)] is exactly level i - 1, i.e. row i
        return CellStats(self.N[i].copy(), self.S[i].copy(), self.Q[i].copy())

    def threshold_stats(self, q: int) -> CellStats:
        """Stacked stats for ``width <= B / 2**i``, ``i = 0..q``; shape ``(q + 1, cells)``."""
        N = np.cumsum(self.N[::-1], axis=0)[::-1]
        S = np.cumsum(self.S[::-1], axis=0)[::-1]
        Q = np.cumsum(self.Q[::-1], axis=0)[::-1]
        return CellStats(N[1:q + 2], S[1:q + 2], Q[1:q + 2])

    def band_stats(self, q: int) -> CellStats:
        """Stacked stats for bands ``(B/2**i, B/2**(i-1)]``, ``i = 1..q``; shape ``(q, cells)``."""
        return CellStats(self.N[1:q + 1], self.S[1:q + 1], self.Q[1:q + 1])

    def _loop_stats(self, filt: FilterSpec) -> CellStats:
        cells = self.total.N.shape[0]
        N, S, Q = np.zeros(cells), np.zeros(cells), np.zeros(cells)
        for rec in self.records:
            if filt.accepts(rec.width_at_play):
                c = rec.context_id * self.num_actions + rec.action_id
                N[c] += 1.0
                S[c] += rec.reward
                Q[c] += rec.reward * rec.reward
        return CellStats(N, S, Q)


# ---------------------------------------------------------------------------
# batched kernels: ``values`` is (F, cells), stats are (L, cells)

def squared_loss_table(values: np.ndarray, stats: CellStats) -> np.ndarray:
    """``(L, F)`` table of ``sum_cells N f^2 - 2 f S`` (the loss minus the constant ``sum Q``)."""
    N = np.atleast_2d(stats.N)[:, None, :]
    S = np.atleast_2d(stats.S)[:, None, :]
    return (N * values * values - 2.0 * S * values).sum(axis=-1)


def fit_table(values: np.ndarray, mask: np.ndarray, stats: CellStats) -> np.ndarray:
    """Least-squares fit id per batch row, restricted to ``mask``; lowest id on ties."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DegenerateSetError("candidate set for least squares is empty")
    loss = squared_loss_table(values, stats)
    loss[:, ~mask] = np.inf
    return np.argmin(loss, axis=1)


def distance_table(values: np.ndarray, fit_ids: np.ndarray, stats: CellStats) -> np.ndarray:
    """``(L, F)`` table of ``sum_cells N (fit_l - f)^2``."""
    N = np.atleast_2d(stats.N)
    diff = values[np.asarray(fit_ids)][:, None, :] - values[None, :, :]
    return (N[:, None, :] * diff * diff).sum(axis=-1)


def residual_table(values: np.ndarray, fit_ids: np.ndarray, stats: CellStats) -> np.ndarray:
    """``(L,)`` residual sums ``sum_cells Q - 2 f S + N f^2`` for each row's fit, clipped at 0."""
    f = values[np.asarray(fit_ids)]
    N, S, Q = (np.atleast_2d(a) for a in stats)
    w = (Q - 2.0 * f * S + N * f * f).sum(axis=-1)
    return np.maximum(w, 0.0)


# ---------------------------------------------------------------------------
# single-filter operations

def least_squares_fit(fclass: FunctionClass, candidate_mask: np.ndarray,
                      stats: HistoryStats, filt: FilterSpec = FilterSpec()) -> int:
    """Masked minimizer of the filtered squared loss (lowest id on ties)."""
    return int(fit_table(fclass.flat, candidate_mask, stats.cell_stats(filt))[0])


def filtered_distance(fclass: FunctionClass, f_id: int, g_id: int, stats: HistoryStats,
                      filt: FilterSpec = FilterSpec()) -> float:
    cs = stats.cell_stats(filt)
    diff = fclass.flat[f_id] - fclass.flat[g_id]
    return float((cs.N * diff * diff).sum())


def cumulative_variance_estimate(fclass: FunctionClass, fit_id: int, stats: HistoryStats,
                                 filt: FilterSpec = FilterSpec()) -> float:
    """Filtered sum of squared residuals of ``fit_id``."""
    return float(residual_table(fclass.flat, np.array([fit_id]), stats.cell_stats(filt))[0])


def sigma_hat_update(prev: float, W: float, t: int, bound: float, num_functions: int,
                     delta_prime: float, C: float = 1.0) -> float:
    """Next value of the nonincreasing variance upper bound; the first value is ``B**2``."""
    if t < 2:
        raise ValueError("sigma_hat_update needs t >= 2 (the first value is B**2)")
    candidate = (2.0 * W + C * bound ** 2 * math.log(t * num_functions / delta_prime)) / (t - 1)
    return min(prev, candidate)
