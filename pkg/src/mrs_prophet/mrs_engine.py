"""Running MRS rules and evaluating their competitive ratios.

Three routes to the ratio of a schedule:

* ``run_mrs`` executes the rule literally on drawn values;
* ``exact_ratio_two_point`` is the closed form on two-point instances;
* ``pointwise_ratio`` is the n -> infinity integral for a continuous profile.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import quadrature as qd
from .core import ProblemInstance, RunOutcome, TieBreaker
from .profiles import DiscreteSchedule, Profile

A_GRID_POINTS = 512
_PROBE_A = np.array([0.0, 0.02, 0.1, 0.25, 0.383, 0.5, 0.65, 0.8, 0.9, 0.97, 0.995, 1.0])


def run_mrs(schedule: DiscreteSchedule, instance: ProblemInstance,
            tie: TieBreaker = TieBreaker.JITTER, rng: np.random.Generator | None = None
            ) -> RunOutcome:
    """Draw k samples and n values and apply the rule step by step.

    At step i a fresh uniform subset of size f(i) of the k+i-1 values seen so
    far is drawn; X_i is accepted iff it beats the subset maximum.  An empty
    subset (f(i) = 0) accepts.
    """
    n, k = instance.n, instance.k
    if schedule.n != n:
        raise ValueError("schedule length differs from instance n")
    schedule.check(k)
    rng = np.random.default_rng(instance.seed) if rng is None else rng
    dist = instance.dist
    u = rng.random(k + n)
    levels = np.asarray(dist.level(u))
    tags = rng.random(k + n) if tie is TieBreaker.JITTER else None
    for i in range(n):
        p = k + i
        q = schedule.f[i]
        if q == 0:
            return RunOutcome(i + 1, float(dist.quantile(u[p])), i + 1)
        idx = rng.choice(p, size=q, replace=False)
        if tags is None:
            accept = levels[p] > levels[idx].max()
        else:
            top = levels[idx].max()
            at_top = idx[levels[idx] == top]
            accept = levels[p] > top or (levels[p] == top and tags[p] > tags[at_top].max())
        if accept:
            return RunOutcome(i + 1, float(dist.quantile(u[p])), i + 1)
    return RunOutcome(None, 0.0, n)


def batch_stop_steps(schedule: DiscreteSchedule, k: int, trials: int,
                     rng: np.random.Generator, chunk: int = 100_000) -> np.ndarray:
    """Stop steps (0 = never) of many literal runs, vectorised with numpy.

    Values are continuous uniforms; each step's subset is the f(i) smallest of
    fresh random keys over the seen positions.
    """
    n = schedule.n
    schedule.check(k)
    f = schedule.array()
    out = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        vals = rng.random((m, k + n))
        stop = np.zeros(m, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        for i in range(n):
            p = k + i
            rows = np.nonzero(alive)[0]
            if rows.size == 0:
                break
            if f[i] == 0:
                stop[rows] = i + 1
                alive[rows] = False
                continue
            keys = rng.random((rows.size, p))
            pick = np.argpartition(keys, f[i] - 1, axis=1)[:, :f[i]]
            ref = np.take_along_axis(vals[rows, :p], pick, axis=1).max(axis=1)
            hit = vals[rows, p] > ref
            stop[rows[hit]] = i + 1
            alive[rows[hit]] = False
        out[done:done + m] = stop
        done += m
    return out


def exact_ratio_two_point(schedule: DiscreteSchedule, a: float, n: int | None = None) -> float:
    """Exact ratio on TwoPoint(a) (per-draw zero probability a), continuous tie-breaking.

    Reaching step i has probability prod_{j<i} f(j)/(f(j)+1); the rule then
    stops w.p. 1/(f(i)+1) and the accepted value is 1 w.p. 1 - a^(f(i)+1).
    """
    if n is not None and n != schedule.n:
        raise ValueError("n differs from the schedule length")
    if not 0.0 <= a < 1.0:
        raise ValueError("a must lie in [0, 1)")
    f = schedule.array().astype(float)
    m = f + 1.0
    log_reach = np.concatenate([[0.0], np.cumsum(np.log1p(-1.0 / m))[:-1]])
    if a == 0.0:
        hit = np.ones_like(m)
        denom = 1.0
    else:
        la = math.log(a)
        hit = -np.expm1(m * la)
        denom = -math.expm1(schedule.n * la)
    terms = np.exp(log_reach) / m * hit
    return math.fsum(terms) / denom


def _phi(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    """(1 - a^g)/(1 - a) with its limits at a = 0 and a = 1; broadcasts."""
    g, a = np.broadcast_arrays(np.asarray(g, dtype=float), np.asarray(a, dtype=float))
    out = np.empty(g.shape)
    one = a >= 1.0
    zero = a <= 0.0
    mid = ~(one | zero)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.log(a[mid])
        out[mid] = np.expm1(g[mid] * la) / np.expm1(la)
    out[one] = g[one]
    out[zero] = np.where(g[zero] > 0, 1.0, 0.0)
    return out


class PointwiseRule:
    """Quadrature for the pointwise ratio of one profile, reusable across ``a``.

    Works in u = sqrt(1-y), where dy = 2u du, so profiles vanishing like
    sqrt(1-y) at y = 1 give smooth integrands.  With w(u) = 2u/g(1-u^2) and
    H(u) = int_u^1 w, the ratio is int_0^1 exp(-H) w phi(g, a) du.  The
    panel mesh is refined until both w and the integrand at probe ``a``
    values meet ``tol``; H at each node is the sum of later panels plus a
    Gauss-Legendre integral up to the node's panel edge.
    """

    def __init__(self, g: Profile, tol: float = 1e-10):
        self.g = g
        self.tol = tol
        self._check_support()
        edges = [0.0, 1.0] + [math.sqrt(1.0 - y) for y in g.breakpoints if 0.0 < y < 1.0]
        edges = adaptive_edges = qd.adaptive_mesh(self._w, edges, tol)
        for _ in range(40):
            self._build(edges)
            err = self._panel_error(_PROBE_A)
            allowed = tol * (edges[1:] - edges[:-1])
            bad = (err > allowed) & (edges[1:] - edges[:-1] > 1e-13)
            if not bad.any():
                break
            mids = 0.5 * (edges[:-1][bad] + edges[1:][bad])
            edges = np.sort(np.concatenate([edges, mids]))
        else:
            raise RuntimeError("pointwise quadrature did not converge")
        self.edges = edges
        self._phase1_panels = len(adaptive_edges) - 1

    def _check_support(self):
        y = np.linspace(0.0, 1.0, 10_001)[:-1]
        gy = np.asarray(self.g(y), dtype=float)
        if np.any(~np.isfinite(gy)) or np.any(gy < 0):
            raise ValueError("profile must be finite and nonnegative on [0, 1)")
        zero = gy == 0
        if np.any(zero[:-1] & zero[1:]):
            raise ValueError("profile vanishes on a set of positive measure; h diverges")

    def _gu(self, u):
        return np.asarray(self.g(1.0 - u * u), dtype=float)

    def _w(self, u):
        with np.errstate(divide="ignore"):
            return 2.0 * u / self._gu(u)

    def _build(self, edges):
        left, right = edges[:-1], edges[1:]
        nodes = qd.panel_nodes(left, right)
        w = self._w(nodes)
        panel_int, _ = qd.panel_rules(left, right, w)
        tail = np.concatenate([np.cumsum(panel_int[::-1])[::-1][1:], [0.0]])
        # partial integral from each node to its panel's right edge
        span = right[:, None] - nodes
        gl_pts = nodes[..., None] + 0.5 * span[..., None] * (qd.GL_X + 1.0)
        partial = 0.5 * span * np.sum(qd.GL_W * self._w(gl_pts), axis=-1)
        self._left, self._right = left, right
        self._nodes = nodes
        self._gn = self._gu(nodes)
        self._weight_part = np.exp(-(tail[:, None] + partial)) * w
        self.h_total = float(math.fsum(panel_int))

    def _integrand(self, a):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return self._weight_part[..., None] * _phi(self._gn[..., None], a[None, None, :])

    def _panel_error(self, a):
        _, err = qd.panel_rules(self._left, self._right, self._integrand(a))
        return err.max(axis=-1)

    def __call__(self, a):
        """Pointwise ratio at each ``a`` in [0, 1] (a = 1 is the limit)."""
        scalar = np.ndim(a) == 0
        a_arr = np.atleast_1d(np.asarray(a, dtype=float))
        if np.any((a_arr < 0) | (a_arr > 1)):
            raise ValueError("a must lie in [0, 1]")
        out = np.empty(a_arr.shape)
        for start in range(0, a_arr.size, 64):
            part = a_arr[start:start + 64]
            k, _ = qd.panel_rules(self._left, self._right, self._integrand(part))
            out[start:start + 64] = k.sum(axis=0)
        return float(out[0]) if scalar else out

    def h(self, y):
        """Cumulative h(y) = int_0^y dz/g(z), for diagnostics."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        res = np.empty(y.shape)
        for j, yy in enumerate(y):
            u0 = math.sqrt(max(1.0 - yy, 0.0))
            res[j] = qd.integrate(self._w, u0, 1.0, 1e-12) if u0 < 1.0 else 0.0
        return res


@lru_cache(maxsize=64)
def pointwise_rule(g: Profile) -> PointwiseRule:
    return PointwiseRule(g)


def pointwise_ratio(g: Profile, a):
    """int_0^1 exp(-h(y)) (1 - a^g(y)) / (g(y)(1-a)) dy, h(y) = int_0^y 1/g."""
    return pointwise_rule(g)(a)


def worst_case_ratio(g: Profile, points: int = A_GRID_POINTS, xtol: float = 1e-7):
    """(alpha, a_star): infimum of the pointwise ratio over a in [0, 1]."""
    rule = pointwise_rule(g)
    return _min_over_a(rule, points, xtol)


def _min_over_a(rule: PointwiseRule, points: int = A_GRID_POINTS, xtol: float = 1e-7):
    a, val = qd.grid_then_golden(rule, lambda x: rule(x), 0.0, 1.0, points, xtol)
    return val, a
