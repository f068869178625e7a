"""Skip-based secretary rule with beta*n samples.

Skip the first m = floor(((1+beta)/e - beta) n) values, then accept the first
value beating every sample and every earlier value.  Guarantees (1+beta)/e
for beta <= 1/(e-1).
"""

from __future__ import annotations

import math

import numpy as np

from . import quadrature as qd
from .core import ProblemInstance, RunOutcome, TieBreaker
from .mrs_engine import _phi

BETA_MAX = 1.0 / (math.e - 1.0)
_FUZZ = 1e-9


def check_beta(beta: float) -> None:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta > BETA_MAX + 1e-12:
        raise ValueError(f"beta={beta} exceeds 1/(e-1); the skip rule's guarantee does not apply")


def sample_count(beta: float, n: int) -> int:
    return int(math.floor(beta * n + _FUZZ))


def skip_count(beta: float, n: int) -> int:
    """m = floor(((1+beta)/e - beta) n), never negative."""
    check_beta(beta)
    return max(int(math.floor(((1.0 + beta) / math.e - beta) * n + _FUZZ)), 0)


def guarantee(beta: float) -> float:
    return (1.0 + beta) / math.e


def run_secretary(beta: float, instance: ProblemInstance, tie: TieBreaker = TieBreaker.JITTER,
                  rng: np.random.Generator | None = None) -> RunOutcome:
    """Literal run: skipped values still feed the running maximum."""
    n, k = instance.n, instance.k
    if k != sample_count(beta, n):
        raise ValueError(f"instance.k must equal floor(beta n) = {sample_count(beta, n)}")
    m = skip_count(beta, n)
    rng = np.random.default_rng(instance.seed) if rng is None else rng
    dist = instance.dist
    u = rng.random(k + n)
    levels = np.asarray(dist.level(u))
    jitter = tie is TieBreaker.JITTER
    tags = rng.random(k + n) if jitter else np.zeros(k + n)
    best = (-math.inf, -math.inf)
    for p in range(k + n):
        key = (levels[p], tags[p])
        j = p - k + 1
        if j > m:
            beats = key > best if jitter else levels[p] > best[0]
            if beats:
                return RunOutcome(j, float(dist.quantile(u[p])), j)
        if key > best:
            best = key
    return RunOutcome(None, 0.0, n)


def H(a, beta: float, tol: float = 1e-12):
    """int_{(1+beta)/e}^{1+beta} (1 - a^t)/((1-a) t^2) dt; a = 1 uses the limit t."""
    lo, hi = (1.0 + beta) / math.e, 1.0 + beta
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.array([qd.integrate(lambda t, av=av: _phi(t, av) / t ** 2, lo, hi, tol)
                    for av in a_arr])
    return float(out[0]) if np.ndim(a) == 0 else out


def H_at_zero(beta: float) -> float:
    """Closed form at a = 0: int dt/t^2 = (e - 1)/(1 + beta)."""
    return (math.e - 1.0) / (1.0 + beta)


def secretary_ratio_lower_check(beta: float, a_grid) -> tuple[bool, float]:
    """(all H(a) >= 1 - 1e-9 on the grid, min H - 1)."""
    if not 0 < beta <= BETA_MAX + 1e-12:
        raise ValueError("need 0 < beta <= 1/(e-1)")
    vals = H(np.asarray(a_grid, dtype=float), beta)
    margin = float(np.min(vals) - 1.0)
    return bool(margin >= -1e-9), margin
