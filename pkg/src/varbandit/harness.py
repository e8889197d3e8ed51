"""Reproducible experiment runner: configs, seeded runs, sweeps and audits."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .confidence import ConfidenceState
from .core import (
    FunctionClass,
    InteractionRecord,
    gapped_class,
    identifiable_class,
    instant_regret,
    random_class,
    read_class,
    validate_class,
)
from .environment import (
    ConfigurationError,
    EnvironmentSpec,
    NoiseModel,
    VarianceSchedule,
    environment_streams,
    parse_contexts,
    sample_context,
    sample_reward,
)
from .policies import OPTIMISTIC, POLICY_KINDS, PolicyParams, make_policy, policy_step
from .regression import HistoryStats

log = logging.getLogger(__name__)

SCHEMA = 1
COLUMNS = (
    "t", "context", "action", "reward", "truth_mean", "sigma", "instant_regret", "cum_regret",
    "width_at_play", "set_size", "level_sizes", "radii", "optimism_ok", "sigma_hat2",
    "degenerate",
)
# tolerance for the per-step optimism and width/regret assertions
ASSERT_TOL = 1e-12


@dataclass(frozen=True)
class ClassSource:
    """Where the function class comes from: a file or a seeded generator."""

    path: Optional[str] = None
    kind: str = "uniform"  # uniform | gapped | identifiable
    num_functions: int = 20
    num_contexts: int = 5
    num_actions: int = 5
    bound: float = 1.0
    seed: int = 0
    gap: float = 0.0
    separation: float = 0.5
    truth_id: int = 0

    def build(self) -> FunctionClass:
        if self.path is not None:
            return read_class(self.path)
        rng = np.random.default_rng(self.seed)
        shape = (self.num_functions, self.num_contexts, self.num_actions)
        if self.kind == "uniform":
            return random_class(*shape, bound=self.bound, rng=rng)
        if self.kind == "gapped":
            return gapped_class(*shape, gap=self.gap, bound=self.bound,
                                truth_id=self.truth_id, rng=rng)
        if self.kind == "identifiable":
            return identifiable_class(*shape, separation=self.separation, bound=self.bound,
                                      truth_id=self.truth_id, gap=self.gap, rng=rng)
        raise ConfigurationError(f"unknown class kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    class_source: ClassSource = field(default_factory=ClassSource)
    truth_id: int = 0
    contexts: str = "iid"
    noise_kind: str = "rademacher"
    schedule: VarianceSchedule = field(default_factory=lambda: VarianceSchedule(constant=0.1))
    horizon: int = 1000
    seed: int = 0
    policy: str = "ols"
    params: PolicyParams = field(default_factory=PolicyParams)

    def __post_init__(self) -> None:
        if self.policy not in POLICY_KINDS:
            raise ConfigurationError(f"policy must be one of {POLICY_KINDS}, got {self.policy!r}")
        if not 0 < self.params.delta < 1:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")

    def environment(self, fclass: FunctionClass) -> EnvironmentSpec:
        kind, seq = parse_contexts(self.contexts)
        return EnvironmentSpec(fclass, self.truth_id, NoiseModel(self.noise_kind, self.schedule),
                               self.horizon, kind, seq)


# ---------------------------------------------------------------------------
# config files: "key = value" lines, '#' comments

_CLASS_KEYS = {
    "class_file": ("path", str), "class_kind": ("kind", str),
    "num_functions": ("num_functions", int), "num_contexts": ("num_contexts", int),
    "num_actions": ("num_actions", int), "bound": ("bound", float),
    "class_seed": ("seed", int), "gap": ("gap", float), "separation": ("separation", float),
}
_PARAM_KEYS = {
    "delta": float, "C": float, "C_prime": float, "C_var": float, "known_variance": float,
    "per_round_union": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}
_SCHEDULE_KEYS = ("sigma", "sigma_list", "sigma_phase")


def parse_config_text(text: str, base_dir: Union[str, Path, None] = None) -> RunConfig:
    entries: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value
    return config_from_mapping(entries, base_dir)


def config_from_mapping(entries: Mapping[str, str], base_dir: Union[str, Path, None] = None) -> RunConfig:
    entries = dict(entries)
    class_kw = {}
    param_kw = {}
    schedule = None
    run_kw = {}
    for key, value in entries.items():
        try:
            if key in _CLASS_KEYS:
                name, conv = _CLASS_KEYS[key]
                if key == "class_file" and base_dir is not None and not Path(value).is_absolute():
                    value = str(Path(base_dir) / value)
                class_kw[name] = conv(value)
            elif key in _PARAM_KEYS:
                param_kw[key] = _PARAM_KEYS[key](value)
            elif key in _SCHEDULE_KEYS:
                if schedule is not None:
                    raise ConfigurationError("give only one of sigma, sigma_list, sigma_phase")
                schedule = VarianceSchedule.parse(key, value)
            elif key in ("truth_id", "horizon", "seed"):
                run_kw[key] = int(value)
            elif key == "contexts":
                run_kw["contexts"] = value
            elif key == "noise":
                run_kw["noise_kind"] = value
            elif key == "policy":
                run_kw["policy"] = value
            else:
                raise ConfigurationError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad value for {key}: {value!r}") from None
    if "path" in class_kw and not Path(class_kw["path"]).exists():
        raise ConfigurationError(f"class file {class_kw['path']} does not exist")
    if "truth_id" in run_kw:
        class_kw.setdefault("truth_id", run_kw["truth_id"])
    if schedule is not None:
        run_kw["schedule"] = schedule
    return RunConfig(class_source=ClassSource(**class_kw), params=PolicyParams(**param_kw), **run_kw)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), base_dir=path.parent)


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    """Copy of ``config`` with run-level fields (``seed``, ``policy``, ...) replaced."""
    return replace(config, **changes)


# ---------------------------------------------------------------------------
# running

@dataclass
class StepRow:
    t: int
    context: int
    action: int
    reward: float
    truth_mean: float
    sigma: float
    instant_regret: float
    cum_regret: float
    width_at_play: float
    set_size: int
    level_sizes: str
    radii: str
    optimism_ok: bool
    sigma_hat2: Optional[float]
    degenerate: bool


@dataclass
class RunResult:
    policy: str
    seed: int
    rows: List[StepRow]
    summary: Dict[str, object]

    @property
    def cum_regret(self) -> np.ndarray:
        return np.array([r.cum_regret for r in self.rows])

    @property
    def optimism_clean(self) -> bool:
        return all(r.optimism_ok for r in self.rows)

    @property
    def ok(self) -> bool:
        return (self.summary["degeneracy_events"] == 0
                and self.summary["invariant_violations"] == 0)


def _fmt(v: float) -> str:
    return repr(float(v))


def run_once(config: RunConfig) -> RunResult:
    """Execute exactly ``horizon`` rounds; deterministic given the config and seed."""
    started = time.perf_counter()
    fclass = config.class_source.build()
    report = validate_class(fclass)
    if report:
        raise ConfigurationError("function class violates its bound: " + "; ".join(map(str, report[:5])))
    env = config.environment(fclass)
    params = config.params
    if config.policy == "sols_known":
        declared = env.max_variance()
        if params.known_variance is None:
            params = replace(params, known_variance=declared)
        elif params.known_variance < declared:
            raise ConfigurationError(f"known_variance {params.known_variance} is below the "
                                     f"environment's largest variance {declared}")
    ctx_rng, noise_rng, policy_rng = environment_streams(config.seed)
    policy = make_policy(config.policy, fclass, params, policy_rng)
    stats = HistoryStats.for_class(fclass)
    truth = config.truth_id
    tracks_sets = config.policy in OPTIMISTIC
    nested = config.policy in ("sols_known", "sols_estimated", "sols_unknown")

    rows: List[StepRow] = []
    cum = 0.0
    violations: List[str] = []
    out_of_bound = 0
    noise_sq = 0.0
    prev_mask = None
    for t in range(1, config.horizon + 1):
        x = sample_context(env, t, ctx_rng)
        decision = policy_step(policy, t, x, stats)
        a = decision.action
        state: ConfidenceState = policy.state
        reward, mean, sigma = sample_reward(env, t, x, a, noise_rng)
        regret = instant_regret(fclass, truth, x, a)
        cum += regret
        truth_in = bool(state.mask[truth]) if tracks_sets else True

        if tracks_sets and truth_in:
            best = float(fclass.values[truth, x].max())
            if decision.upper[a] < best - ASSERT_TOL:
                violations.append(f"t={t}: optimism failed with truth in set")
            if regret > decision.width_at_play + ASSERT_TOL:
                violations.append(f"t={t}: regret exceeds width with truth in set")
        if nested and prev_mask is not None and np.any(state.mask & ~prev_mask):
            violations.append(f"t={t}: confidence set grew")
        prev_mask = state.mask.copy()
        if abs(reward) > fclass.bound:
            out_of_bound += 1
        noise_sq += (reward - mean) ** 2

        stats.append(InteractionRecord(t, x, a, reward, decision.width_at_play, mean, sigma))
        rows.append(StepRow(
            t=t, context=x, action=a, reward=reward, truth_mean=mean, sigma=sigma,
            instant_regret=regret, cum_regret=cum, width_at_play=decision.width_at_play,
            set_size=state.size,
            level_sizes=";".join(str(s) for s in state.level_sizes()),
            radii=";".join(_fmt(state.radii[i]) for i in sorted(state.radii)),
            optimism_ok=truth_in, sigma_hat2=policy.sigma_hat2,
            degenerate=state.degenerate_now,
        ))

    for v in violations[:10]:
        log.warning("%s seed=%d %s", config.policy, config.seed, v)
    summary = {
        "policy": config.policy,
        "seed": config.seed,
        "horizon": config.horizon,
        "final_regret": cum,
        "width_sum": float(sum(r.width_at_play for r in rows)),
        "optimism_clean": all(r.optimism_ok for r in rows),
        "optimism_failures": sum(not r.optimism_ok for r in rows),
        "degeneracy_events": state.degeneracy_events,
        "invariant_violations": len(violations),
        "reward_out_of_bound": out_of_bound,
        "realized_noise_variance": noise_sq / config.horizon,
        "final_set_size": state.size,
        "wall_time_s": time.perf_counter() - started,
    }
    return RunResult(config.policy, config.seed, rows, summary)


def rows_to_csv(rows: Sequence[StepRow]) -> str:
    buf = io.StringIO()
    buf.write(f"#schema={SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([
            r.t, r.context, r.action, _fmt(r.reward), _fmt(r.truth_mean), _fmt(r.sigma),
            _fmt(r.instant_regret), _fmt(r.cum_regret), _fmt(r.width_at_play), r.set_size,
            r.level_sizes, r.radii, int(r.optimism_ok),
            "" if r.sigma_hat2 is None else _fmt(r.sigma_hat2), int(r.degenerate),
        ])
    return buf.getvalue()


def read_run_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#schema="):
            raise ValueError(f"{path}: missing schema line")
        return list(csv.DictReader(fh))


def write_run(result: RunResult, out_dir: Union[str, Path], stem: str = "run") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.csv"
    path.write_text(rows_to_csv(result.rows))
    (out / f"{stem}_summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return path


def digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# sweeps

def checkpoints(horizon: int) -> Tuple[int, int, int]:
    return max(1, horizon // 4), max(1, horizon // 2), horizon


def _run_cell(args: Tuple[RunConfig, str, int]) -> Tuple[str, int, Optional[RunResult], Optional[str]]:
    base, policy, seed = args
    try:
        return policy, seed, run_once(replace(base, policy=policy, seed=seed)), None
    except Exception as exc:  # one failed cell must not stop the sweep
        return policy, seed, None, f"{type(exc).__name__}: {exc}"


@dataclass
class SweepResult:
    results: Dict[Tuple[str, int], RunResult]
    failures: Dict[Tuple[str, int], str]
    table: List[Dict[str, object]]

    @property
    def ok(self) -> bool:
        return not self.failures and all(r.ok for r in self.results.values())


def summarize(results: Mapping[Tuple[str, int], RunResult], horizon: int) -> List[Dict[str, object]]:
    """Per-run rows then per-policy median/mean rows, sorted by (policy, seed)."""
    cps = checkpoints(horizon)
    table: List[Dict[str, object]] = []
    by_policy: Dict[str, List[List[float]]] = {}
    for policy, seed in sorted(results):
        res = results[(policy, seed)]
        values = [res.rows[c - 1].cum_regret for c in cps]
        by_policy.setdefault(policy, []).append(values)
        row = {"policy": policy, "seed": str(seed)}
        row.update({f"cum_regret_t{c}": v for c, v in zip(cps, values)})
        table.append(row)
    for policy in sorted(by_policy):
        columns = list(zip(*by_policy[policy]))
        for stat, fn in (("median", statistics.median), ("mean", statistics.fmean)):
            row = {"policy": policy, "seed": stat}
            row.update({f"cum_regret_t{c}": fn(col) for c, col in zip(cps, columns)})
            table.append(row)
    return table


def run_sweep(base: RunConfig, seeds: Sequence[int], policies: Sequence[str], parallel: int = 1,
              out_dir: Union[str, Path, None] = None) -> SweepResult:
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("sweep seeds must be distinct")
    for p in policies:
        if p not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy {p!r}")
    cells = [(base, p, s) for p in sorted(set(policies)) for s in sorted(seeds)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]
    results, failures = {}, {}
    for policy, seed, res, err in outcomes:
        if err is None:
            results[(policy, seed)] = res
        else:
            failures[(policy, seed)] = err
            log.error("sweep cell policy=%s seed=%d failed: %s", policy, seed, err)
    table = summarize(results, base.horizon)
    if out_dir is not None:
        write_sweep(results, failures, table, out_dir)
    return SweepResult(results, failures, table)


def write_sweep(results, failures, table, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (policy, seed) in sorted(results):
        (out / f"{policy}_seed{seed}.csv").write_text(rows_to_csv(results[(policy, seed)].rows))
    with open(out / "summary.csv", "w", newline="") as fh:
        fh.write(f"#schema={SCHEMA}\n")
        if table:
            writer = csv.DictWriter(fh, fieldnames=list(table[0]), lineterminator="\n")
            writer.writeheader()
            for row in table:
                writer.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    if failures:
        with open(out / "failures.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("policy", "seed", "error"))
            for (policy, seed), err in sorted(failures.items()):
                writer.writerow((policy, seed, err))


def audit_optimism(results: Iterable[RunResult]) -> Dict[str, float]:
    """Per-policy fraction of runs whose confidence sets always held the truth."""
    counts: Dict[str, List[int]] = {}
    for res in results:
        clean, total = counts.setdefault(res.policy, [0, 0])
        counts[res.policy] = [clean + int(res.optimism_clean), total + 1]
    return {p: c / n for p, (c, n) in sorted(counts.items())}


def parse_seeds(text: str) -> List[int]:
    """``0..9`` (inclusive) or ``1,5,7``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s.strip()]
