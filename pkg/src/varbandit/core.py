"""Tabular function classes, the uncertainty width and ground-truth helpers."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np


class DegenerateSetError(ValueError):
    """Raised when an empty function set is used for width or action selection."""


@dataclass(frozen=True)
class FunctionClass:
    """A finite class of mean-reward functions stored as a dense table.

    ``values[f, x, a]`` is the mean reward function ``f`` assigns to context
    ``x`` and action ``a``. ``bound`` is the known constant ``B`` bounding both
    the values and all pairwise differences.
    """

    values: np.ndarray
    bound: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-dimensional, got shape {values.shape}")
        if min(values.shape) < 1:
            raise ValueError("need at least one function, context and action")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if not self.bound > 0:
            raise ValueError("bound must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bound", float(self.bound))
        flat = values.reshape(values.shape[0], -1)
        flat.setflags(write=False)
        object.__setattr__(self, "_flat", flat)

    @property
    def num_functions(self) -> int:
        return self.values.shape[0]

    @property
    def num_contexts(self) -> int:
        return self.values.shape[1]

    @property
    def num_actions(self) -> int:
        return self.values.shape[2]

    @property
    def flat(self) -> np.ndarray:
        """Values reshaped to ``(num_functions, num_contexts * num_actions)``."""
        return self._flat

    def cell(self, context_id: int, action_id: int) -> int:
        return context_id * self.num_actions + action_id

    def full_mask(self) -> np.ndarray:
        return np.ones(self.num_functions, dtype=bool)

    def save(self, path: Union[str, Path]) -> None:
        write_class(self, path)


@dataclass(frozen=True)
class Violation:
    kind: str  # "value" or "gap"
    context_id: int
    action_id: int
    amount: float
    function_id: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "value":
            return (f"|f{self.function_id}(x{self.context_id}, a{self.action_id})| = "
                    f"{self.amount!r} exceeds bound")
        return (f"spread at (x{self.context_id}, a{self.action_id}) = {self.amount!r} "
                f"exceeds bound")


@dataclass(frozen=True)
class InteractionRecord:
    """One played round. ``width_at_play`` is frozen when the round completes."""

    t: int
    context_id: int
    action_id: int
    reward: float
    width_at_play: float
    truth_mean: float = float("nan")
    sigma_t: float = float("nan")


def validate_class(fclass: FunctionClass) -> List[Violation]:
    """Check both boundedness conditions; an empty list means the class is valid."""
    B = fclass.bound
    report: List[Violation] = []
    for f, x, a in zip(*np.nonzero(np.abs(fclass.values) > B)):
        report.append(Violation("value", int(x), int(a), float(fclass.values[f, x, a]), int(f)))
    spread = fclass.values.max(axis=0) - fclass.values.min(axis=0)
    for x, a in zip(*np.nonzero(spread > B)):
        report.append(Violation("gap", int(x), int(a), float(spread[x, a])))
    return report


def _require_nonempty(mask: np.ndarray) -> None:
    if not mask.any():
        raise DegenerateSetError("function set is empty")


def width(fclass: FunctionClass, mask: np.ndarray, context_id: int, action_id: int) -> float:
    """Largest disagreement among the masked functions at one context-action pair."""
    mask = np.asarray(mask, dtype=bool)
    _require_nonempty(mask)
    column = fclass.values[mask, context_id, action_id]
    return float(column.max() - column.min())


def best_mean(fclass: FunctionClass, truth_id: int, context_id: int) -> Tuple[int, float]:
    """Best action of function ``truth_id`` at a context (lowest id on ties)."""
    row = fclass.values[truth_id, context_id]
    action = int(np.argmax(row))
    return action, float(row[action])


def instant_regret(fclass: FunctionClass, truth_id: int, context_id: int, action_id: int) -> float:
    _, best = best_mean(fclass, truth_id, context_id)
    return best - float(fclass.values[truth_id, context_id, action_id])


# ---------------------------------------------------------------------------
# generators

def random_class(num_functions: int, num_contexts: int, num_actions: int,
                 bound: float = 1.0, rng: Optional[np.random.Generator] = None) -> FunctionClass:
    """Values drawn uniformly in ``[0, bound]``, which satisfies both bounds."""
    rng = np.random.default_rng(rng)
    values = rng.uniform(0.0, bound, size=(num_functions, num_contexts, num_actions))
    return FunctionClass(values, bound)


def gapped_class(num_functions: int, num_contexts: int, num_actions: int, gap: float,
                 bound: float = 1.0, truth_id: int = 0,
                 rng: Optional[np.random.Generator] = None) -> FunctionClass:
    """Uniform class whose ``truth_id`` row has a best-vs-second action gap >= ``gap``
    at every context. Requires ``num_actions >= 2``.
    """
    if num_actions < 2:
        raise ValueError("a best-vs-second gap needs at least two actions")
    if not 0 < gap < bound:
        raise ValueError("gap must lie in (0, bound)")
    rng = np.random.default_rng(rng)
    values = rng.uniform(0.0, bound, size=(num_functions, num_contexts, num_actions))
    for x in range(num_contexts):
        while True:
            row = np.sort(values[truth_id, x])
            if row[-1] - row[-2] >= gap:
                break
            values[truth_id, x] = rng.uniform(0.0, bound, size=num_actions)
    return FunctionClass(values, bound)


def identifiable_class(num_functions: int, num_contexts: int, num_actions: int,
                       separation: float = 0.5, bound: float = 1.0, truth_id: int = 0,
                       gap: float = 0.0,
                       rng: Optional[np.random.Generator] = None) -> FunctionClass:
    """Uniform class where every other function misses the truth by ``separation``
    on each of the truth's optimal cells.

    Playing the optimal policy then separates the truth from every rival at a
    linear rate, so optimistic learners stop making mistakes after a while. A
    positive ``gap`` also enforces the truth's best-vs-second action gap.
    """
    if not 0 < separation <= bound:
        raise ValueError("separation must lie in (0, bound]")
    rng = np.random.default_rng(rng)
    if gap > 0:
        values = np.array(gapped_class(num_functions, num_contexts, num_actions, gap, bound,
                                       truth_id, rng).values)
    else:
        values = rng.uniform(0.0, bound, size=(num_functions, num_contexts, num_actions))
    others = np.arange(num_functions) != truth_id
    for x in range(num_contexts):
        a_star = int(np.argmax(values[truth_id, x]))
        v = values[truth_id, x, a_star]
        if v - separation < 0 and v + separation > bound:
            # raising the optimum keeps it optimal and makes room below it
            v = values[truth_id, x, a_star] = separation
        values[others, x, a_star] = v - separation if v - separation >= 0 else v + separation
    return FunctionClass(values, bound)


# ---------------------------------------------------------------------------
# plain-text file format: "F X A B" header then one row per function

def write_class(fclass: FunctionClass, path: Union[str, Path]) -> None:
    F, X, A = fclass.values.shape
    lines = [f"{F} {X} {A} {fclass.bound!r}"]
    for row in fclass.flat:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_class(path: Union[str, Path]) -> FunctionClass:
    tokens = [line.split() for line in Path(path).read_text().splitlines()
              if line.strip() and not line.lstrip().startswith("#")]
    if not tokens or len(tokens[0]) != 4:
        raise ValueError(f"{path}: header must be 'num_functions num_contexts num_actions B'")
    F, X, A = (int(v) for v in tokens[0][:3])
    bound = float(tokens[0][3])
    rows = tokens[1:]
    if len(rows) != F:
        raise ValueError(f"{path}: expected {F} function rows, found {len(rows)}")
    values = np.empty((F, X * A))
    for f, row in enumerate(rows):
        if len(row) != X * A:
            raise ValueError(f"{path}: row {f} has {len(row)} entries, expected {X * A}")
        values[f] = [float(v) for v in row]
    return FunctionClass(values.reshape(F, X, A), bound)


def from_rows(rows: Sequence[Sequence[float]], num_contexts: int, num_actions: int,
              bound: float = 1.0) -> FunctionClass:
    """Build a class from rows in context-major, action-minor order."""
    values = np.asarray(rows, dtype=float).reshape(len(rows), num_contexts, num_actions)
    return FunctionClass(values, bound)
