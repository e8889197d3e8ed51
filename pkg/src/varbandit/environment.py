"""Context streams and bounded reward noise with controlled conditional variance."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import FunctionClass

NOISE_KINDS = ("rademacher", "truncated_gaussian", "zero")
CONTEXT_KINDS = ("iid", "cycle", "list")


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class VarianceSchedule:
    """Noise standard deviation per round.

    Exactly one representation is used: a constant, an explicit list (round t
    reads entry t-1), or phases ``[(end_1, s_1), (end_2, s_2), ...]`` where
    phase k covers rounds up to and including ``end_k`` and the last phase
    extends forever.
    """

    constant: Optional[float] = None
    listed: Optional[Tuple[float, ...]] = None
    phases: Optional[Tuple[Tuple[int, float], ...]] = None

    def __post_init__(self) -> None:
        given = [v is not None for v in (self.constant, self.listed, self.phases)]
        if sum(given) != 1:
            raise ConfigurationError("variance schedule needs exactly one representation")
        if any(s < 0 for s in self._levels()):
            raise ConfigurationError("noise scales must be nonnegative")
        if self.phases is not None:
            ends = [end for end, _ in self.phases]
            if ends != sorted(ends) or len(set(ends)) != len(ends) or ends[0] < 1:
                raise ConfigurationError("phase ends must be increasing positive rounds")

    def _levels(self) -> List[float]:
        if self.constant is not None:
            return [self.constant]
        if self.listed is not None:
            return list(self.listed)
        return [s for _, s in self.phases]

    def sigma(self, t: int) -> float:
        if self.constant is not None:
            return self.constant
        if self.listed is not None:
            if t > len(self.listed):
                raise ConfigurationError(f"sigma_list has no entry for round {t}")
            return self.listed[t - 1]
        for end, s in self.phases:
            if t <= end:
                return s
        return self.phases[-1][1]

    def max_sigma(self, horizon: int) -> float:
        if self.listed is not None:
            return max(self.listed[:horizon])
        if self.phases is not None:
            levels = []
            start = 1
            for end, s in self.phases:
                if start <= horizon:
                    levels.append(s)
                start = end + 1
            if start <= horizon:
                levels.append(self.phases[-1][1])
            return max(levels)
        return self.constant

    @classmethod
    def parse(cls, key: str, text: str) -> "VarianceSchedule":
        """Parse ``sigma=0.05``, ``sigma_list=0.1,0.0`` or ``sigma_phase=500:0.1,1000:0.01``."""
        text = text.strip()
        try:
            if key == "sigma":
                return cls(constant=float(text))
            if key == "sigma_list":
                return cls(listed=tuple(float(v) for v in text.split(",") if v.strip()))
            if key == "sigma_phase":
                phases = []
                for chunk in text.split(","):
                    end, s = chunk.split(":")
                    phases.append((int(end), float(s)))
                return cls(phases=tuple(phases))
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"cannot parse {key}={text!r}: {exc}") from None
        raise ConfigurationError(f"unknown variance schedule key {key!r}")


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "rademacher"
    schedule: VarianceSchedule = field(default_factory=lambda: VarianceSchedule(constant=0.0))

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class EnvironmentSpec:
    fclass: FunctionClass
    truth_id: int
    noise: NoiseModel
    horizon: int
    context_process: str = "iid"
    context_sequence: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.truth_id < self.fclass.num_functions:
            raise ConfigurationError(f"truth_id {self.truth_id} out of range")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if self.context_process not in CONTEXT_KINDS:
            raise ConfigurationError(f"context process must be one of {CONTEXT_KINDS}")
        if self.context_process == "cycle" and not self.context_sequence:
            object.__setattr__(self, "context_sequence", tuple(range(self.fclass.num_contexts)))
        if self.context_process in ("cycle", "list"):
            if not self.context_sequence:
                raise ConfigurationError("listed contexts need a nonempty sequence")
            if any(not 0 <= x < self.fclass.num_contexts for x in self.context_sequence):
                raise ConfigurationError("context id out of range in sequence")
        if self.context_process == "list" and len(self.context_sequence) < self.horizon:
            raise ConfigurationError("listed context sequence is shorter than the horizon")
        schedule = self.noise.schedule
        if schedule.listed is not None and len(schedule.listed) < self.horizon:
            raise ConfigurationError("sigma_list is shorter than the horizon")
        if self.noise.kind == "rademacher" and schedule.max_sigma(self.horizon) > self.fclass.bound:
            raise ConfigurationError("rademacher noise needs sigma_t <= B")

    def max_variance(self) -> float:
        if self.noise.kind == "zero":
            return 0.0
        return self.noise.schedule.max_sigma(self.horizon) ** 2


def environment_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (context, noise, policy) generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def sample_context(spec: EnvironmentSpec, t: int, rng: np.random.Generator) -> int:
    if spec.context_process == "iid":
        return int(rng.integers(spec.fclass.num_contexts))
    if spec.context_process == "cycle":
        seq = spec.context_sequence
        return seq[(t - 1) % len(seq)]
    return spec.context_sequence[t - 1]


def sample_noise(kind: str, sigma: float, bound: float, rng: np.random.Generator) -> float:
    if kind == "zero" or sigma == 0.0:
        # keep one draw per round so the stream position never depends on sigma
        if kind != "zero":
            rng.random()
        return 0.0
    if kind == "rademacher":
        if sigma > bound:
            raise ConfigurationError(f"rademacher sigma {sigma} exceeds bound {bound}")
        return sigma if rng.random() < 0.5 else -sigma
    # truncated gaussian via rejection on [-B, B]
    while True:
        xi = float(rng.normal(0.0, sigma))
        if abs(xi) <= bound:
            return xi


def sample_reward(spec: EnvironmentSpec, t: int, context_id: int, action_id: int,
                  rng: np.random.Generator) -> Tuple[float, float, float]:
    """Return ``(reward, truth_mean, sigma_t)`` for one play."""
    mean = float(spec.fclass.values[spec.truth_id, context_id, action_id])
    sigma = 0.0 if spec.noise.kind == "zero" else spec.noise.schedule.sigma(t)
    xi = sample_noise(spec.noise.kind, sigma, spec.fclass.bound, rng)
    return mean + xi, mean, sigma


def parse_contexts(text: str) -> Tuple[str, Tuple[int, ...]]:
    """``iid``, ``cycle``, ``cycle:0,1`` or ``list:2,0,1``."""
    kind, _, rest = text.strip().partition(":")
    if kind not in CONTEXT_KINDS:
        raise ConfigurationError(f"unknown context process {text!r}")
    seq: Sequence[int] = tuple(int(v) for v in rest.split(",") if v.strip()) if rest else ()
    return kind, tuple(seq)
