"""Monte Carlo experiments: ratio estimates, two-point sweeps and the adversarial fixture.

Fast paths run the compiled kernels, which draw values as uniforms keyed by
(seed, trial) and map them through the distribution's quantile afterwards.
One kernel run therefore serves every ``a`` of a two-point sweep (common
random numbers).  STRICT tie-breaking routes through the literal engines.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Optional, Sequence

import numpy as np

from . import _kernels as kern
from .core import (Adversarial, Distribution, ProblemInstance, TieBreaker, TwoPoint, expected_max,
                   parse_distribution, trial_rng)
from .mrs_engine import run_mrs
from .profiles import DiscreteSchedule, k_for_profile, mrs_k_zero_schedule, parse_profile, schedule_for
from .secretary import run_secretary, sample_count, skip_count
from .streaming import grid_breakpoints, plan_segments, run_streaming, stored_cells

DEFAULT_TRIALS = 100_000
DEFAULT_N = 10_000
CHUNK = 50_000


@dataclass(frozen=True)
class RuleSpec:
    """A stopping rule as configured by a string such as ``mrs:opt``.

    kind is one of mrs, streaming, secretary, threshold (skip r-1, then take
    the first record) and first (accept X_1).  ``schedule`` overrides the
    profile for mrs rules built in code.
    """

    kind: str
    profile: Optional[str] = None
    epsilon: Optional[float] = None
    beta: Optional[float] = None
    r: Optional[int] = None
    clamp: bool = True
    schedule: Optional[DiscreteSchedule] = field(default=None, compare=False, repr=False)

    @property
    def id(self) -> str:
        if self.kind in ("mrs", "streaming"):
            return f"{self.kind}:{self.profile}" if self.profile else self.kind
        if self.kind == "threshold":
            return f"threshold:{self.r}"
        return self.kind

    @property
    def rank_based(self) -> bool:
        return self.kind in ("threshold", "first")

    @classmethod
    def from_schedule(cls, schedule: DiscreteSchedule, name: str = "schedule") -> "RuleSpec":
        return cls("mrs", profile=name, schedule=schedule)


def parse_rule(text, epsilon: float | None = None, beta: float | None = None,
               clamp: bool = True) -> RuleSpec:
    """``mrs:<profile>``, ``streaming:<profile>``, ``secretary``, ``threshold:r`` or ``first``."""
    if isinstance(text, RuleSpec):
        return text
    if isinstance(text, DiscreteSchedule):
        return RuleSpec.from_schedule(text)
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "mrs":
        if not arg:
            raise ValueError("mrs rule needs a profile, e.g. mrs:opt")
        parse_profile(arg)  # validate early
        return RuleSpec("mrs", profile=arg, clamp=clamp)
    if kind == "streaming":
        if not arg:
            raise ValueError("streaming rule needs a profile, e.g. streaming:opt")
        if epsilon is None or not epsilon > 0:
            raise ValueError("streaming rule needs a positive epsilon")
        return RuleSpec("streaming", profile=arg, epsilon=float(epsilon))
    if kind == "secretary":
        return RuleSpec("secretary", beta=beta)
    if kind == "threshold":
        r = int(arg)
        if r < 1:
            raise ValueError("threshold rule needs r >= 1")
        return RuleSpec("threshold", r=r)
    if kind == "first":
        return RuleSpec("first")
    raise ValueError(f"unknown algorithm {text!r}")


def default_k(rule: RuleSpec, n: int, beta: float | None = None) -> int:
    """k from beta (floor(beta n)) or, for profile rules, the smallest feasible budget."""
    if beta is not None:
        return sample_count(beta, n)
    if rule.kind == "secretary":
        return sample_count(rule.beta or 0.0, n)
    if rule.kind in ("mrs", "streaming") and rule.schedule is None:
        if rule.profile == "three-step":
            return n
        return k_for_profile(parse_profile(rule.profile), n)
    if rule.schedule is not None:
        return rule.schedule.k_required
    return 0


@dataclass(frozen=True)
class RatioEstimate:
    """Ratio estimate; stderr is the sample std of the per-trial numerator over sqrt(trials),
    divided by the exact denominator (delta method for a paired denominator)."""

    mean: float
    stderr: float
    trials: int
    n: int
    seed: int
    algo_id: str
    dist_id: str
    k: int = 0
    a: Optional[float] = None
    stop_prob: Optional[float] = None
    success_prob: Optional[float] = None
    denominator: str = "exact"
    tie: str = "jitter"
    epsilon: Optional[float] = None
    stored_cells_peak: int = 0
    ceiling: Optional[float] = None
    within_ceiling: Optional[bool] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


# -- trial runners ----------------------------------------------------------------

def _mrs_schedule(rule: RuleSpec, n: int, k: int) -> DiscreteSchedule:
    if rule.schedule is not None:
        if rule.schedule.n != n:
            raise ValueError("schedule length differs from n")
        rule.schedule.check(k)
        return rule.schedule
    return schedule_for(rule.profile, n, k, clamp=rule.clamp)


def _streaming_plan(rule: RuleSpec, n: int, k: int):
    step = grid_breakpoints(parse_profile(rule.profile), rule.epsilon)
    return plan_segments(step, n, k)


def _secretary_m(rule: RuleSpec, n: int, k: int) -> int:
    beta = rule.beta if rule.beta is not None else k / n
    return skip_count(beta, n)


def uniform_trials(rule: RuleSpec, n: int, k: int, seed: int, trials: int, trial0: int = 0):
    """(stop, u_acc, u_max) arrays from the compiled kernel for ``rule``."""
    stop = np.empty(trials, np.int64)
    uacc = np.empty(trials)
    umax = np.empty(trials)
    seed = np.uint64(int(seed) & (2**64 - 1))
    if rule.kind == "mrs":
        f = _mrs_schedule(rule, n, k).array().astype(np.int64)
        run = lambda t0, m, s, a, b: kern.mrs_trials(f, k, seed, t0, m, s, a, b)  # noqa: E731
    elif rule.kind == "streaming":
        plan = _streaming_plan(rule, n, k)
        starts = np.asarray(plan.starts, np.int64) - 1
        qs = np.asarray(plan.q, np.int64)
        run = lambda t0, m, s, a, b: kern.streaming_trials(starts, qs, n, k, seed, t0, m, s, a, b)  # noqa: E731
    elif rule.kind in ("secretary", "threshold", "first"):
        if rule.kind == "secretary":
            kk, m_skip = k, _secretary_m(rule, n, k)
        elif rule.kind == "threshold":
            kk, m_skip = 0, min(rule.r - 1, n)
        else:
            kk, m_skip = 0, 0
        run = lambda t0, m, s, a, b: kern.secretary_trials(n, kk, m_skip, seed, t0, m, s, a, b)  # noqa: E731
    else:
        raise ValueError(f"unknown rule kind {rule.kind!r}")
    for start in range(0, trials, CHUNK):
        m = min(CHUNK, trials - start)
        run(trial0 + start, m, stop[start:start + m], uacc[start:start + m], umax[start:start + m])
    return stop, uacc, umax


def _values(dist: Distribution, u: np.ndarray) -> np.ndarray:
    out = np.zeros(u.shape)
    ok = ~np.isnan(u)
    out[ok] = np.asarray(dist.quantile(u[ok]), dtype=float)
    return out


def _literal_trials(rule: RuleSpec, instance: ProblemInstance, trials: int, tie: TieBreaker):
    """Per-trial accepted values and stop steps from the literal engines."""
    n, k = instance.n, instance.k
    acc = np.empty(trials)
    stop = np.empty(trials, np.int64)
    cells = 0
    if rule.kind == "mrs":
        sched = _mrs_schedule(rule, n, k)
    elif rule.kind == "streaming":
        step = grid_breakpoints(parse_profile(rule.profile), rule.epsilon)
        g = step.source
    for t in range(trials):
        rng = trial_rng(instance.seed, t)
        if rule.kind == "mrs":
            out = run_mrs(sched, instance, tie, rng)
        elif rule.kind == "streaming":
            out, _ = run_streaming(g, rule.epsilon, instance, tie, rng, step=step)
            cells = max(cells, out.stored_cells_peak)
        elif rule.kind == "secretary":
            beta = rule.beta if rule.beta is not None else k / n
            out = run_secretary(beta, instance, tie, rng)
        else:
            raise ValueError(f"no literal engine for rule kind {rule.kind!r}")
        acc[t] = out.accepted_value
        stop[t] = out.stop_index or 0
    return stop, acc, cells


def _estimate(acc: np.ndarray, denom: float, **kw) -> RatioEstimate:
    t = acc.size
    sd = float(np.std(acc, ddof=1)) if t > 1 else 0.0
    return RatioEstimate(mean=float(np.mean(acc)) / denom, stderr=sd / math.sqrt(t) / denom,
                         trials=t, **kw)


def _paired(acc: np.ndarray, mx: np.ndarray, **kw) -> RatioEstimate:
    """Ratio of sums with delta-method stderr; numerator and max come from the same trials."""
    t = acc.size
    mbar = float(np.mean(mx))
    r = float(np.mean(acc)) / mbar
    d = acc - r * mx
    sd = float(np.std(d, ddof=1)) if t > 1 else 0.0
    return RatioEstimate(mean=r, stderr=sd / math.sqrt(t) / mbar, trials=t, **kw)


def monte_carlo_ratio(algo, instance: ProblemInstance, trials: int = DEFAULT_TRIALS,
                      tie: TieBreaker = TieBreaker.JITTER, denominator: str = "auto",
                      epsilon: float | None = None, beta: float | None = None) -> RatioEstimate:
    """E[X_tau] / E[max] estimated over ``trials`` runs seeded by (instance.seed, trial).

    denominator: ``exact`` (closed form), ``paired`` (empirical max of the same
    trials), ``independent`` (empirical max of an independent seed stream,
    for variance comparisons) or ``auto`` (exact when available).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rule = parse_rule(algo, epsilon=epsilon, beta=beta)
    n, k, dist = instance.n, instance.k, instance.dist
    if denominator == "auto":
        try:
            expected_max(dist, n)
            denominator = "exact"
        except TypeError:
            denominator = "paired"
    meta = dict(n=n, seed=instance.seed, algo_id=rule.id, dist_id=dist.spec, k=k,
                denominator=denominator, tie=tie.name.lower(), epsilon=rule.epsilon)
    if rule.kind == "streaming":
        meta["stored_cells_peak"] = stored_cells(parse_profile(rule.profile), rule.epsilon, n, k)
    if tie is TieBreaker.STRICT:
        if denominator != "exact":
            raise ValueError("STRICT runs support the exact denominator only")
        stop, acc, cells = _literal_trials(rule, instance, trials, tie)
        if cells:
            meta["stored_cells_peak"] = cells
        return _estimate(acc, expected_max(dist, n), stop_prob=float(np.mean(stop > 0)), **meta)
    stop, uacc, umax = uniform_trials(rule, n, k, instance.seed, trials)
    acc = _values(dist, uacc)
    meta["stop_prob"] = float(np.mean(stop > 0))
    meta["success_prob"] = float(np.mean((stop > 0) & (uacc == umax)))
    if denominator == "exact":
        return _estimate(acc, expected_max(dist, n), **meta)
    if denominator == "paired":
        return _paired(acc, _values(dist, umax), **meta)
    if denominator == "independent":
        _, _, umax2 = uniform_trials(rule, n, k, (instance.seed ^ 0x1E3779B97F4A7C15) & 0x7FFFFFFFFFFFFFFF, trials)
        mx = _values(dist, umax2)
        mbar = float(np.mean(mx))
        r = float(np.mean(acc)) / mbar
        var = np.var(acc, ddof=1) / mbar**2 + r**2 * np.var(mx, ddof=1) / mbar**2
        return RatioEstimate(mean=r, stderr=float(math.sqrt(var / trials)), trials=trials, **meta)
    raise ValueError(f"unknown denominator mode {denominator!r}")


@dataclass(frozen=True)
class SweepResult:
    estimates: tuple
    argmin_a: float
    min_ratio: float

    def pooled_sigma(self) -> float:
        return float(np.sqrt(np.mean([e.stderr**2 for e in self.estimates])))


def sweep_two_point(algo, a_grid: Sequence[float], n: int = DEFAULT_N, trials: int = DEFAULT_TRIALS,
                    seed: int = 0, k: int | None = None, epsilon: float | None = None,
                    beta: float | None = None) -> SweepResult:
    """Ratio on the two-point instance whose maximum is 0 with probability a, for each a.

    Per-draw zero probability is a^(1/n), so E[max] = 1 - a.  A single kernel
    run is reused for every a.
    """
    rule = parse_rule(algo, epsilon=epsilon, beta=beta)
    a_grid = [float(a) for a in a_grid]
    if any(not 0.0 <= a < 1.0 for a in a_grid):
        raise ValueError("a_grid must lie in [0, 1)")
    k = default_k(rule, n, beta) if k is None else k
    stop, uacc, _ = uniform_trials(rule, n, k, seed, trials)
    cells = stored_cells(parse_profile(rule.profile), rule.epsilon, n, k) if rule.kind == "streaming" else 0
    stop_prob = float(np.mean(stop > 0))
    out = []
    for a in a_grid:
        dist = TwoPoint.for_max(a, n)
        acc = _values(dist, uacc)
        out.append(_estimate(acc, 1.0 - a, n=n, seed=seed, algo_id=rule.id,
                             dist_id=f"two-point-max:{a!r}", k=k, a=a, stop_prob=stop_prob,
                             epsilon=rule.epsilon, stored_cells_peak=cells))
    best = min(out, key=lambda e: e.mean)
    return SweepResult(tuple(out), best.a, best.mean)


def success_probability(algo, n: int, trials: int = DEFAULT_TRIALS, seed: int = 0,
                        k: int = 0, epsilon: float | None = None, beta: float | None = None):
    """(P[accepted value is the maximum of X_1..X_n], stderr) under continuous values."""
    rule = parse_rule(algo, epsilon=epsilon, beta=beta)
    stop, uacc, umax = uniform_trials(rule, n, k, seed, trials)
    hit = (stop > 0) & (uacc == umax)
    p = float(np.mean(hit))
    return p, math.sqrt(max(p * (1 - p), 0.0) / trials)


# -- rank-based rules ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _rank_dp(n: int):
    """Backward recursion; V[i] = best success probability after i values without stopping."""
    if n < 1:
        raise ValueError("n must be at least 1")
    v = [0.0] * (n + 1)
    r_star = n
    for i in range(n, 0, -1):
        # value i is a record w.p. 1/i; stopping on it wins w.p. i/n
        stop_now = i / n
        v[i - 1] = (max(stop_now, v[i]) + (i - 1) * v[i]) / i
        if stop_now >= v[i]:
            r_star = i
    return tuple(v), r_star


def optimal_rank_rule_success(n: int) -> float:
    """Success probability of the best rule that sees only relative ranks."""
    return _rank_dp(n)[0][0]


def optimal_threshold(n: int) -> int:
    """First step r at which the optimal rule accepts a record."""
    return _rank_dp(n)[1]


def threshold_success_formula(n: int, r: int) -> Fraction:
    """Success of 'skip r-1 values, take the next record', exactly."""
    if r == 1:
        return Fraction(1, n)
    return Fraction(r - 1, n) * sum((Fraction(1, j - 1) for j in range(r, n + 1)), Fraction(0))


def threshold_success_bruteforce(n: int, r: int) -> Fraction:
    """Same quantity by enumerating all n! orders."""
    wins = 0
    total = 0
    for perm in permutations(range(n)):
        total += 1
        best = max(perm[:r - 1], default=-1)
        for j in range(r - 1, n):
            if perm[j] > best:
                wins += perm[j] == n - 1
                break
    return Fraction(wins, total)


def best_threshold_bruteforce(n: int) -> Fraction:
    """max over r of the enumerated threshold-rule success (n <= 8)."""
    if n > 8:
        raise ValueError("brute force limited to n <= 8")
    return max(threshold_success_bruteforce(n, r) for r in range(1, n + 1))


def adversarial_instance(n: int, seed: int = 0) -> ProblemInstance:
    """Hard instance for rank-based rules; test fixture only."""
    return ProblemInstance(n, 0, Adversarial(n), seed)


def adversarial_ratio(algo, n: int = 8, trials: int = DEFAULT_TRIALS, seed: int = 0) -> RatioEstimate:
    """Ratio on Adversarial(n) with values scaled so the top value is 1.

    For rank-based rules (k = 0) the estimate carries the optimal rank
    rule's success probability as ``ceiling`` and whether the mean stays
    within 3 stderr of it.
    """
    inst = adversarial_instance(n, seed)
    rule = parse_rule(algo)
    if rule.kind == "secretary" and (rule.beta or 0.0) != 0.0:
        raise ValueError("adversarial fixture runs rank rules without samples")
    if rule.kind == "mrs" and rule.schedule is None:
        rule = RuleSpec.from_schedule(mrs_k_zero_schedule(n), name="k0")
    est = monte_carlo_ratio(rule, inst, trials)
    ceiling = optimal_rank_rule_success(n)
    return RatioEstimate(**{**asdict(est), "ceiling": ceiling,
                            "within_ceiling": est.mean <= ceiling + 3 * est.stderr})


# -- emission -------------------------------------------------------------------------

CSV_COLUMNS = ("algo", "dist", "a", "n", "k", "trials", "seed", "tie", "mean", "stderr",
               "stop_prob", "success_prob", "stored_cells_peak", "epsilon", "denominator")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def estimate_row(e: RatioEstimate) -> dict:
    return {"algo": e.algo_id, "dist": e.dist_id, "a": e.a, "n": e.n, "k": e.k, "trials": e.trials,
            "seed": e.seed, "tie": e.tie, "mean": e.mean, "stderr": e.stderr,
            "stop_prob": e.stop_prob, "success_prob": e.success_prob,
            "stored_cells_peak": e.stored_cells_peak, "epsilon": e.epsilon,
            "denominator": e.denominator}


def to_csv(estimates: Sequence[RatioEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in estimates:
        row = estimate_row(e)
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def to_json(estimates: Sequence[RatioEstimate], config: dict) -> str:
    return json.dumps({"config": config, "results": [estimate_row(e) for e in estimates]},
                      indent=2, sort_keys=True)


def config_from_json(text: str) -> dict:
    """Re-parse the echoed config; raises if the algo or dist strings no longer parse."""
    cfg = json.loads(text)["config"]
    parse_rule(cfg["algo"], epsilon=cfg.get("epsilon"), beta=cfg.get("beta"))
    if cfg.get("command") != "sweep":
        parse_distribution(cfg["dist"], n=cfg.get("n"))
    return cfg
