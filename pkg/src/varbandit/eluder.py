"""Exact eluder dimension of small finite classes by exhaustive search.

A point is eps-independent of a prefix when some pair of functions is within
``eps`` in root-sum-square on the prefix yet differs by more than ``eps`` at
the point. Once a pair witnesses a point its prefix discrepancy exceeds
``eps``, so every pair can witness at most once and a repeated point is never
independent. The search therefore runs over sets of distinct points, memoized
on the set used so far.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import FunctionClass

DomainPoint = Tuple[int, int]

DEFAULT_DOMAIN_BUDGET = 12
MAX_FUNCTIONS = 64
NUDGE = 1e-9


class EluderBudgetError(ValueError):
    """The exhaustive search was refused because the input is too large."""


@dataclass(frozen=True)
class Witness:
    g: int
    g_prime: int
    prefix_discrepancy: float
    gap: float


@dataclass(frozen=True)
class EluderCertificate:
    epsilon: float
    points: Tuple[DomainPoint, ...]
    witnesses: Tuple[Witness, ...]

    def __len__(self) -> int:
        return len(self.points)


def _table(fclass: FunctionClass, mask, domain: Sequence[DomainPoint]) -> Tuple[np.ndarray, np.ndarray]:
    ids = np.flatnonzero(np.asarray(mask, dtype=bool))
    cols = [fclass.values[ids, x, a] for x, a in domain]
    return ids, np.stack(cols, axis=1) if cols else np.zeros((len(ids), 0))


def is_eps_dependent(z: DomainPoint, prefix: Sequence[DomainPoint], fclass: FunctionClass,
                     mask, epsilon: float) -> Tuple[bool, Optional[Witness]]:
    """Exhaustive check over ordered pairs; returns a violating pair when independent."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ids, V = _table(fclass, mask, list(prefix) + [z])
    n = len(prefix)
    # canonical order so the discrepancy does not depend on how the prefix is listed
    order = sorted(range(n), key=lambda k: prefix[k])
    P = V[:, order]
    diff = P[:, None, :] - P[None, :, :]
    disc = np.sqrt((diff * diff).sum(axis=-1))
    gap = V[:, None, n] - V[None, :, n]
    bad = (disc <= epsilon) & (gap > epsilon)
    if not bad.any():
        return True, None
    g, h = (int(k) for k in np.argwhere(bad)[0])
    return False, Witness(int(ids[g]), int(ids[h]), float(disc[g, h]), float(gap[g, h]))


def _check_budget(n_points: int, n_functions: int, budget: int) -> None:
    if n_points > budget:
        raise EluderBudgetError(f"domain has {n_points} points; exhaustive budget is {budget}")
    if n_functions > MAX_FUNCTIONS:
        raise EluderBudgetError(f"class has {n_functions} functions; limit is {MAX_FUNCTIONS}")


def _default_domain(fclass: FunctionClass) -> List[DomainPoint]:
    return [(x, a) for x in range(fclass.num_contexts) for a in range(fclass.num_actions)]


def nonmonotone_eluder_dim(fclass: FunctionClass, mask=None, domain: Optional[Sequence[DomainPoint]] = None,
                           epsilon: float = 1.0,
                           budget: int = DEFAULT_DOMAIN_BUDGET) -> Tuple[int, EluderCertificate]:
    """Longest sequence whose every element is eps-independent of its predecessors."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    mask = fclass.full_mask() if mask is None else np.asarray(mask, dtype=bool)
    domain = _default_domain(fclass) if domain is None else [tuple(p) for p in domain]
    domain = sorted(set(domain))
    ids, V = _table(fclass, mask, domain)
    _check_budget(len(domain), len(ids), budget)
    m, n = V.shape
    gi, gj = np.triu_indices(m, k=1)
    D = V[gi] - V[gj]  # (pairs, points)
    D2 = D * D
    witness_at = np.abs(D) > epsilon

    memo: Dict[int, Tuple[int, int]] = {}

    def alive(used: int) -> np.ndarray:
        cols = [k for k in range(n) if used >> k & 1]
        if not cols:
            return np.ones(len(gi), dtype=bool)
        return np.sqrt(D2[:, cols].sum(axis=1)) <= epsilon

    def best(used: int) -> Tuple[int, int]:
        if used in memo:
            return memo[used]
        live = alive(used)
        result = (0, -1)
        if live.any():
            open_pts = witness_at[live].any(axis=0)
            for k in range(n):
                if used >> k & 1 or not open_pts[k]:
                    continue
                length = 1 + best(used | 1 << k)[0]
                if length > result[0]:
                    result = (length, k)
        memo[used] = result
        return result

    length, _ = best(0)
    points: List[DomainPoint] = []
    used = 0
    while True:
        _, k = memo[used]
        if k < 0:
            break
        points.append(domain[k])
        used |= 1 << k
    witnesses = []
    for j, z in enumerate(points):
        dep, w = is_eps_dependent(z, points[:j], fclass, mask, epsilon)
        assert not dep, "search produced an element that fails replay"
        witnesses.append(w)
    return length, EluderCertificate(epsilon, tuple(points), tuple(witnesses))


def critical_epsilons(fclass: FunctionClass, mask, domain: Sequence[DomainPoint],
                      epsilon: float) -> List[float]:
    """``epsilon`` plus a value just below every pairwise gap magnitude above it."""
    _, V = _table(fclass, mask, domain)
    gi, gj = np.triu_indices(V.shape[0], k=1)
    gaps = np.unique(np.abs(V[gi] - V[gj]))
    grid = {float(epsilon)}
    for g in gaps:
        below = float(g) * (1.0 - NUDGE)
        if below >= epsilon:
            grid.add(below)
    return sorted(grid)


def eluder_dim(fclass: FunctionClass, mask=None, domain: Optional[Sequence[DomainPoint]] = None,
               epsilon: float = 1.0, budget: int = DEFAULT_DOMAIN_BUDGET,
               with_certificate: bool = False):
    """Eluder dimension: the non-monotone dimension maximized over ``eps' >= epsilon``.

    Returns the count, or ``(count, certificate)`` when ``with_certificate``.
    """
    mask = fclass.full_mask() if mask is None else np.asarray(mask, dtype=bool)
    domain = _default_domain(fclass) if domain is None else [tuple(p) for p in domain]
    _check_budget(len(set(domain)), int(mask.sum()), budget)
    top, top_cert = -1, None
    for eps_prime in critical_epsilons(fclass, mask, domain, epsilon):
        d, cert = nonmonotone_eluder_dim(fclass, mask, domain, eps_prime, budget)
        if d > top:
            top, top_cert = d, cert
    return (top, top_cert) if with_certificate else top


def replay_certificate(cert: EluderCertificate, fclass: FunctionClass, mask=None) -> bool:
    """True when every element is eps-independent of its predecessors."""
    mask = fclass.full_mask() if mask is None else mask
    for j, z in enumerate(cert.points):
        dep, _ = is_eps_dependent(z, cert.points[:j], fclass, mask, cert.epsilon)
        if dep:
            return False
    return True


def format_certificate(cert: EluderCertificate) -> str:
    lines = [f"epsilon' = {cert.epsilon!r}"]
    for j, (z, w) in enumerate(zip(cert.points, cert.witnesses), start=1):
        lines.append(f"{j}: x={z[0]} a={z[1]}  witness=(f{w.g}, f{w.g_prime})  "
                     f"prefix_discrepancy={w.prefix_discrepancy:.6g}  gap={w.gap:.6g}")
    return "\n".join(lines)

