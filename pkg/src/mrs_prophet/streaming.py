"""Single-pass MRS with O(1) stored values per segment.

The profile is replaced by a step profile g~ that restarts at g(x_i) on each
grid segment and grows with slope 1.  One subset-maximum sampler per segment
runs from the start of the stream; each is frozen when its segment begins,
and inside a segment the threshold is a running maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterator, Optional

import numpy as np
from scipy import optimize

from .core import Distribution, ProblemInstance, RunOutcome, TieBreaker
from .profiles import Profile

SCAN_POINTS = 10_000
DEDUPE_TOL = 1e-12
MAX_CROSSINGS_PER_LEVEL = 1000
# live registers besides the per-segment samplers: read counter, value index,
# segment index, running threshold (value, tag), current value (value, tag)
BASE_CELLS = 7
CELLS_PER_SAMPLER = 4  # s, t, T value, T tag


@dataclass(frozen=True)
class StepProfile(Profile):
    """g~(x) = level_i + (x - x_i) on [x_i, x_{i+1})."""

    epsilon: float
    xs: tuple
    levels: tuple
    source: Optional[Profile] = field(default=None, compare=False)

    @property
    def gamma(self) -> int:
        return len(self.xs)

    @property
    def breakpoints(self) -> tuple:
        return tuple(x for x in self.xs if 0.0 < x < 1.0)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        xs = np.asarray(self.xs)
        idx = np.clip(np.searchsorted(xs, y, side="right") - 1, 0, len(xs) - 1)
        return np.asarray(self.levels)[idx] + (y - xs[idx])

    @property
    def spec(self) -> str:
        base = self.source.spec if self.source is not None else "custom"
        return f"step({base},eps={self.epsilon!r})"


def _level_crossings(g: Profile, eps: float, ys: np.ndarray, gy: np.ndarray) -> list:
    top = float(np.max(gy))
    out = []
    for j in range(0, int(math.floor(top / eps)) + 1):
        level = j * eps
        above = gy >= level
        change = np.nonzero(above[:-1] != above[1:])[0]
        if change.size > MAX_CROSSINGS_PER_LEVEL:
            raise ValueError(f"profile crosses level {level} more than "
                             f"{MAX_CROSSINGS_PER_LEVEL} times on the scan grid")
        for c in change:
            lo, hi = ys[c], ys[c + 1]

            def f(x):
                return float(g(x)) - level

            flo, fhi = f(lo), f(hi)
            if flo == 0.0 or fhi == 0.0:
                out.append(lo if flo == 0.0 else hi)
                continue
            if flo * fhi > 0:
                raise ValueError(f"could not bracket crossing of level {level} near {lo:.6g}")
            out.append(optimize.brentq(f, lo, hi, xtol=1e-14))
    return out


def grid_breakpoints(g: Profile, epsilon: float) -> StepProfile:
    """Strip edges {0, eps, 2eps, ..., 1}, level crossings of g and g's own kinks."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ys = np.linspace(0.0, 1.0, SCAN_POINTS + 1)
    gy = np.asarray(g(ys), dtype=float)
    if not np.all(np.isfinite(gy)) or np.any(gy < 0):
        raise ValueError("profile must be finite and nonnegative for grid construction")
    strips = [round(j * epsilon, 12) for j in range(int(math.floor(1.0 / epsilon)) + 1)
              if j * epsilon < 1.0]
    declared = [x for x in g.breakpoints if 0.0 < x < 1.0]
    crossings = _level_crossings(g, epsilon, ys, gy)
    pts = sorted(set(strips + [1.0] + crossings + declared))
    keep = []
    for x in pts:
        if keep and x - keep[-1] <= DEDUPE_TOL:
            # prefer exact declared/strip coordinates over root-finder output
            if x in declared or x in strips:
                keep[-1] = x
            continue
        keep.append(x)
    xs = tuple(float(x) for x in keep)
    levels = tuple(float(v) for v in np.asarray(g(np.asarray(xs)), dtype=float))
    return StepProfile(epsilon, xs, levels, source=g)


@dataclass(frozen=True)
class SegmentPlan:
    """Segment starts (1-based value index) and subset sizes for one (n, k).

    ``starts``/``q`` are the effective segments.  ``all_starts``/``all_q`` keep
    one entry per grid segment, including segments that round to zero length
    at this n; the literal engine allocates a sampler for each of them.
    """

    starts: tuple
    q: tuple
    n: int
    k: int
    all_starts: tuple = ()
    all_q: tuple = ()

    @property
    def segments(self) -> int:
        return len(self.starts)

    @property
    def samplers(self) -> int:
        return len(self.all_starts)


def plan_segments(step: StepProfile, n: int, k: int) -> SegmentPlan:
    """Segments [ceil(x_i n), ceil(x_{i+1} n)) starting at 1; the last one includes n.

    Each segment's threshold is the maximum of a uniform subset of size
    ceil(g(x_i) n), clamped to [1, k + j0 - 1], of the prefix before it.
    When several grid points share a start, the last one defines the segment.
    """
    all_starts, all_q = [], []
    for x, level in zip(step.xs[:-1], step.levels[:-1]):
        j0 = max(1, int(math.ceil(x * n - 1e-9)))
        prefix = k + j0 - 1
        q = int(math.ceil(level * n - 1e-9))
        all_starts.append(j0)
        all_q.append(0 if prefix == 0 else min(max(q, 1), prefix))
    eff = {}
    for j0, q in zip(all_starts, all_q):
        eff[j0] = q
    js = sorted(eff)
    return SegmentPlan(tuple(js), tuple(eff[j] for j in js), n, k,
                       tuple(all_starts), tuple(all_q))


# -- value feeds ---------------------------------------------------------------

class UniformStream:
    """Buffered uniforms from a numpy generator, one at a time."""

    def __init__(self, rng: np.random.Generator, chunk: int = 8192):
        self.rng, self.chunk = rng, chunk
        self._buf = rng.random(chunk).tolist()
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == self.chunk:
            self._buf = self.rng.random(self.chunk).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class FeedExhausted(RuntimeError):
    pass


class ValueFeed:
    """Pull-based source of (value, level) pairs with a read counter."""

    def __init__(self):
        self.reads = 0

    def _next(self):
        raise NotImplementedError

    def pull(self):
        item = self._next()
        self.reads += 1
        return item


class ArrayFeed(ValueFeed):
    def __init__(self, values, levels=None):
        super().__init__()
        self._values = list(values)
        self._levels = list(values) if levels is None else list(levels)

    def _next(self):
        if self.reads >= len(self._values):
            raise FeedExhausted("value feed ended early")
        return self._values[self.reads], self._levels[self.reads]


class DistributionFeed(ValueFeed):
    """Draws i.i.d. values on demand (buffered internally)."""

    def __init__(self, dist: Distribution, rng: np.random.Generator, length: int, chunk: int = 4096):
        super().__init__()
        self.dist, self.rng, self.length, self.chunk = dist, rng, length, chunk
        self._buf: list = []
        self._pos = 0

    def _next(self):
        if self.reads >= self.length:
            raise FeedExhausted("value feed ended early")
        if self._pos >= len(self._buf):
            u = self.rng.random(min(self.chunk, self.length - self.reads))
            self._buf = list(zip(np.asarray(self.dist.quantile(u)).tolist(),
                                 np.asarray(self.dist.level(u)).tolist()))
            self._pos = 0
        item = self._buf[self._pos]
        self._pos += 1
        return item


class FileFeed(ValueFeed):
    """Reads whitespace-separated nonnegative values one token at a time."""

    def __init__(self, path):
        super().__init__()
        self._fh = open(path, "r", encoding="utf-8")
        self._tokens: Iterator[str] = self._scan()

    def _scan(self):
        for line in self._fh:
            yield from line.split()

    def _next(self):
        try:
            v = float(next(self._tokens))
        except StopIteration:
            raise FeedExhausted("value feed ended early") from None
        return v, v

    def close(self):
        self._fh.close()


# -- single-pass subset maximum --------------------------------------------------

@dataclass
class SubsetMaxState:
    """Sequential sampler: include the next position with probability s/t."""

    s: int
    t: int
    T: tuple = (-math.inf, -math.inf)

    def __post_init__(self):
        if not 0 <= self.s <= self.t:
            raise ValueError("need 0 <= s <= t")

    def offer(self, key: tuple, u: float) -> bool:
        """Offer the next position; ``u`` is a fresh uniform on [0, 1)."""
        if self.t == 0:
            raise ValueError("sampler has no positions left")
        take = u * self.t < self.s
        if take:
            self.s -= 1
            if key > self.T:
                self.T = key
        self.t -= 1
        return take


def on_the_fly_subset_max(feed: ValueFeed, m: int, q: int, rng: np.random.Generator) -> float:
    """Consume m values and return the max over a uniform q-subset (0 if q = 0)."""
    if not 0 <= q <= m:
        raise ValueError("need 0 <= q <= m")
    state = SubsetMaxState(q, m)
    best = 0.0
    for _ in range(m):
        value, level = feed.pull()
        if state.offer((level, 0.0), rng.random()):
            best = max(best, value)
    return best


def subset_probabilities(m: int, q: int) -> dict:
    """Exact probability of every subset produced by the s/t sampler (m small)."""
    probs: dict = {}

    def walk(pos, s, chosen, p):
        if pos == m:
            probs[tuple(chosen)] = probs.get(tuple(chosen), Fraction(0)) + p
            return
        t = m - pos
        take = Fraction(s, t)
        if take > 0:
            walk(pos + 1, s - 1, chosen + [pos], p * take)
        if take < 1:
            walk(pos + 1, s, chosen, p * (1 - take))

    walk(0, q, [], Fraction(1))
    return probs


def subset_uniformity_exact(m: int, q: int) -> bool:
    probs = subset_probabilities(m, q)
    target = Fraction(1, math.comb(m, q))
    return set(probs) == set(combinations(range(m), q)) and all(p == target for p in probs.values())


# -- literal run --------------------------------------------------------------

def run_streaming(g: Profile, epsilon: float, instance: ProblemInstance,
                  tie: TieBreaker = TieBreaker.JITTER, rng: np.random.Generator | None = None,
                  feed: ValueFeed | None = None, step: StepProfile | None = None):
    """One pass over S_1..S_k, X_1..X_n; returns (RunOutcome, feed).

    All samplers start with the stream and are frozen at their segment's
    first value; a sampler whose prefix is empty yields no threshold.
    """
    n, k = instance.n, instance.k
    rng = np.random.default_rng(instance.seed) if rng is None else rng
    step = grid_breakpoints(g, epsilon) if step is None else step
    plan = plan_segments(step, n, k)
    if feed is None:
        feed = DistributionFeed(instance.dist, rng, k + n)
    samplers = [SubsetMaxState(q, k + j0 - 1) for j0, q in zip(plan.all_starts, plan.all_q)]
    pending = list(range(len(samplers)))
    peak = BASE_CELLS + CELLS_PER_SAMPLER * len(samplers)
    jitter = tie is TieBreaker.JITTER
    coin = UniformStream(rng)
    nxt = 0  # next sampler to freeze
    thr = (-math.inf, -math.inf)
    for pos in range(k + n):
        j = pos - k + 1  # value index (<= 0 while reading samples)
        while nxt < len(samplers) and j >= 1 and plan.all_starts[nxt] == j:
            # frozen sampler becomes the threshold; an empty segment's is replaced at once
            thr = samplers[nxt].T
            pending.remove(nxt)
            nxt += 1
        value, level = feed.pull()
        key = (level, coin() if jitter else 0.0)
        if j >= 1 and (key > thr if jitter else level > thr[0]):
            return RunOutcome(j, float(value), j, peak), feed
        for idx in pending:
            sm = samplers[idx]
            if sm.t > 0:
                sm.offer(key, coin())
        if j >= 1 and key > thr:
            thr = key
    return RunOutcome(None, 0.0, n, peak), feed


def stored_cells(g: Profile, epsilon: float, n: int, k: int) -> int:
    """Peak register count of ``run_streaming`` for (n, k) without running it."""
    plan = plan_segments(grid_breakpoints(g, epsilon), n, k)
    return BASE_CELLS + CELLS_PER_SAMPLER * plan.samplers
