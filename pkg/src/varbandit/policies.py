"""Per-round decision logic for the optimistic learners and two baselines."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple, Type

import numpy as np

from .confidence import (
    ConfidenceState,
    RadiusParams,
    update_sets_known_var,
    update_sets_ols,
    update_sets_unknown_var,
)
from .core import DegenerateSetError, FunctionClass, instant_regret, width
from .regression import HistoryStats, fit_table, residual_table, sigma_hat_update

OPTIMISTIC = ("ols", "sols_known", "sols_estimated", "sols_unknown")
BASELINES = ("greedy", "uniform")
POLICY_KINDS = OPTIMISTIC + BASELINES

__all__ = [
    "POLICY_KINDS",
    "Decision",
    "PolicyParams",
    "instant_regret",
    "make_policy",
    "policy_step",
    "select_action",
]


@dataclass(frozen=True)
class PolicyParams:
    delta: float = 0.1
    C: float = 1.0
    C_prime: float = 1.0
    C_var: float = 1.0
    known_variance: Optional[float] = None
    per_round_union: bool = False

    def radius_params(self, bound: float, delta: Optional[float] = None) -> RadiusParams:
        return RadiusParams(bound=bound, delta=self.delta if delta is None else delta,
                            C=self.C, C_prime=self.C_prime,
                            per_round_union=self.per_round_union)


@dataclass(frozen=True)
class Decision:
    action: int
    upper: np.ndarray
    width_at_play: float


def select_action(fclass: FunctionClass, mask: np.ndarray, context_id: int) -> Tuple[int, np.ndarray]:
    """Optimistic action: maximize the masked upper envelope, lowest id on ties."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DegenerateSetError("cannot act on an empty function set")
    upper = fclass.values[mask, context_id, :].max(axis=0)
    return int(np.argmax(upper)), upper


class Policy:
    kind = "base"

    def __init__(self, fclass: FunctionClass, params: PolicyParams,
                 rng: Optional[np.random.Generator] = None) -> None:
        self.fclass = fclass
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.state = ConfidenceState.initial(fclass.num_functions)
        self.sigma_hat2: Optional[float] = None

    @property
    def mask(self) -> np.ndarray:
        return self.state.mask

    def update(self, t: int, stats: HistoryStats) -> None:
        """Bring the confidence state to round ``t`` using rounds ``1..t-1``."""

    def act(self, context_id: int) -> Tuple[int, np.ndarray]:
        return select_action(self.fclass, self.state.mask, context_id)


class OptimisticLeastSquares(Policy):
    kind = "ols"

    def update(self, t: int, stats: HistoryStats) -> None:
        full = self.fclass.full_mask()
        fit = int(fit_table(self.fclass.flat, full, stats.total)[0])
        update_sets_ols(self.state, self.fclass, fit, stats, t,
                        self.params.radius_params(self.fclass.bound))


class KnownVarianceOLS(Policy):
    kind = "sols_known"

    def __init__(self, fclass, params, rng=None):
        super().__init__(fclass, params, rng)
        if params.known_variance is None:
            raise ValueError("sols_known needs known_variance")
        self.sigma_hat2 = params.known_variance

    def update(self, t: int, stats: HistoryStats) -> None:
        update_sets_known_var(self.state, self.fclass, stats, t, self.sigma_hat2,
                              self.params.radius_params(self.fclass.bound))


class EstimatedVarianceOLS(Policy):
    """Known-variance learner fed a running variance upper bound.

    The failure budget is split evenly between the sets and the estimator.
    """

    kind = "sols_estimated"

    def __init__(self, fclass, params, rng=None):
        super().__init__(fclass, params, rng)
        self.sigma_hat2 = fclass.bound ** 2

    def update(self, t: int, stats: HistoryStats) -> None:
        half = self.params.delta / 2.0
        if t >= 2:
            cs = stats.total
            fit = fit_table(self.fclass.flat, self.fclass.full_mask(), cs)
            W = float(residual_table(self.fclass.flat, fit, cs)[0])
            self.sigma_hat2 = sigma_hat_update(self.sigma_hat2, W, t, self.fclass.bound,
                                               self.fclass.num_functions, half,
                                               self.params.C_var)
        update_sets_known_var(self.state, self.fclass, stats, t, self.sigma_hat2,
                              self.params.radius_params(self.fclass.bound, delta=half))


class UnknownVarianceOLS(Policy):
    kind = "sols_unknown"

    def update(self, t: int, stats: HistoryStats) -> None:
        update_sets_unknown_var(self.state, self.fclass, stats, t,
                                self.params.radius_params(self.fclass.bound))


class Greedy(Policy):
    """Plays the argmax of the unfiltered least-squares fit."""

    kind = "greedy"

    def update(self, t: int, stats: HistoryStats) -> None:
        self._fit = int(fit_table(self.fclass.flat, self.fclass.full_mask(), stats.total)[0])

    def act(self, context_id: int) -> Tuple[int, np.ndarray]:
        row = self.fclass.values[self._fit, context_id]
        return int(np.argmax(row)), row.copy()


class Uniform(Policy):
    kind = "uniform"

    def act(self, context_id: int) -> Tuple[int, np.ndarray]:
        a = int(self.rng.integers(self.fclass.num_actions))
        return a, np.full(self.fclass.num_actions, np.nan)


_REGISTRY: Dict[str, Type[Policy]] = {
    cls.kind: cls for cls in (OptimisticLeastSquares, KnownVarianceOLS, EstimatedVarianceOLS,
                              UnknownVarianceOLS, Greedy, Uniform)
}


def make_policy(kind: str, fclass: FunctionClass, params: PolicyParams = PolicyParams(),
                rng: Optional[np.random.Generator] = None) -> Policy:
    try:
        cls = _REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown policy {kind!r}; choose from {POLICY_KINDS}") from None
    return cls(fclass, params, rng)


def policy_step(policy: Policy, t: int, context_id: int, stats: HistoryStats) -> Decision:
    """Update the policy through round ``t - 1``, then choose for ``context_id``.

    The width is measured under the set the policy acts with, before the reward
    is revealed.
    """
    policy.update(t, stats)
    action, upper = policy.act(context_id)
    w = width(policy.fclass, policy.mask, context_id, action)
    return Decision(action, upper, w)


def with_known_variance(params: PolicyParams, variance: float) -> PolicyParams:
    return replace(params, known_variance=variance)
