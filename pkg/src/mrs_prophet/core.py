"""Domain types shared by every stopping rule: distributions, instances, outcomes.

Every distribution is represented through its quantile function so that a
single uniform draw ``u`` determines a value.  Ordering draws by ``u`` is the
same as ordering ``(value, tag)`` pairs lexicographically with an i.i.d. uniform
tag, which is how the JITTER tie rule is realised by the fast engines.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate

ADVERSARIAL_MAX_N = 12


class TieBreaker(enum.Enum):
    """How a stopping rule compares two draws with equal value."""

    JITTER = "jitter"
    STRICT = "strict"


class Distribution:
    """Base class; subclasses are frozen dataclasses."""

    def quantile(self, u):
        raise NotImplementedError

    def level(self, u):
        """Exact comparison coordinate of the draw at quantile ``u``.

        Equal to the value except where floating point cannot order values.
        """
        return self.quantile(u)

    def cdf(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    @property
    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class TwoPoint(Distribution):
    """Value 0 with probability ``a`` and value 1 otherwise."""

    a: float

    def __post_init__(self):
        if not 0.0 <= self.a < 1.0:
            raise ValueError(f"two-point probability must lie in [0, 1), got {self.a}")

    @classmethod
    def for_max(cls, a_max: float, n: int) -> "TwoPoint":
        """Instance whose maximum over ``n`` draws is 0 with probability ``a_max``."""
        if not 0.0 <= a_max < 1.0:
            raise ValueError(f"a_max must lie in [0, 1), got {a_max}")
        return cls(a_max ** (1.0 / n) if a_max > 0 else 0.0)

    def quantile(self, u):
        return np.where(np.asarray(u) >= self.a, 1.0, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, np.where(x < 1, self.a, 1.0))

    @property
    def spec(self) -> str:
        return f"two-point:{self.a!r}"


@dataclass(frozen=True)
class Uniform01(Distribution):
    def quantile(self, u):
        return np.asarray(u, dtype=float)

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    @property
    def spec(self) -> str:
        return "uniform01"


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def quantile(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)))

    @property
    def spec(self) -> str:
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class Empirical(Distribution):
    """Uniform over a finite list of nonnegative values (with multiplicity)."""

    values: tuple
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("empirical distribution needs at least one value")
        if any(v < 0 or not math.isfinite(v) for v in self.values):
            raise ValueError("empirical values must be finite and nonnegative")
        object.__setattr__(self, "values", tuple(sorted(float(v) for v in self.values)))

    def quantile(self, u):
        vals = np.asarray(self.values)
        idx = np.minimum((np.asarray(u) * len(vals)).astype(np.int64), len(vals) - 1)
        return vals[idx]

    def cdf(self, x):
        vals = np.asarray(self.values)
        return np.searchsorted(vals, np.asarray(x, dtype=float), side="right") / len(vals)

    @property
    def spec(self) -> str:
        if self.source is not None:
            return f"empirical:@{self.source}"
        return "empirical:" + ",".join(repr(v) for v in self.values)


@dataclass(frozen=True)
class Adversarial(Distribution):
    """Hard instance with values ``n**(3s)``, s = 1..n^3, and a dominating top value.

    The values overflow float64 quickly, so draws are identified by their
    exponent ``s`` (see :meth:`level`) and reported in units of the top value
    ``u = n**(3(n^3+1))``.  Ratios are unaffected by the common scale.
    """

    n: int

    def __post_init__(self):
        if not 1 <= self.n <= ADVERSARIAL_MAX_N:
            raise ValueError(f"adversarial instance supports 1 <= n <= {ADVERSARIAL_MAX_N}")

    @property
    def top_exponent(self) -> int:
        return self.n ** 3 + 1

    def probabilities(self) -> list[Fraction]:
        """Exact probabilities of exponents 1..n^3+1."""
        n = self.n
        low = Fraction(1, n ** 3) * (1 - Fraction(1, n ** 2))
        return [low] * n ** 3 + [Fraction(1, n ** 2)]

    def _cum(self) -> np.ndarray:
        n = self.n
        low = (1.0 - 1.0 / n ** 2) / n ** 3
        cum = low * np.arange(1, n ** 3 + 1)
        return np.append(cum, 1.0)

    def scaled_values(self) -> np.ndarray:
        s = np.arange(1, self.top_exponent + 1)
        return np.power(float(self.n), 3.0 * (s - self.top_exponent))

    def level(self, u):
        idx = np.searchsorted(self._cum(), np.asarray(u), side="right")
        return np.minimum(idx, self.top_exponent - 1) + 1

    def quantile(self, u):
        return self.scaled_values()[np.asarray(self.level(u)) - 1]

    def cdf(self, x):
        # cdf over exponents
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], self._cum()])
        idx = np.clip(np.floor(x).astype(np.int64), 0, self.top_exponent)
        return cum[idx]

    @property
    def spec(self) -> str:
        return f"adversarial:{self.n}"


@dataclass(frozen=True)
class ProblemInstance:
    n: int
    k: int
    dist: Distribution
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.k < 0:
            raise ValueError("k must be nonnegative")

    @property
    def beta(self) -> float:
        return self.k / self.n


@dataclass
class RunOutcome:
    stop_index: Optional[int]
    accepted_value: float
    steps_reached: int
    stored_cells_peak: int = 0

    def __post_init__(self):
        if self.stop_index is None and self.accepted_value != 0:
            raise ValueError("a run that never stops accepts the value 0")


def sample_value(dist: Distribution, rng: np.random.Generator) -> float:
    return float(dist.sample(rng))


def expected_max(dist: Distribution, n: int) -> float:
    """E[max of n i.i.d. draws], exact where a closed form is available."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(dist, TwoPoint):
        return -math.expm1(n * math.log(dist.a)) if dist.a > 0 else 1.0
    if isinstance(dist, Uniform01):
        return n / (n + 1)
    if isinstance(dist, Exponential):
        return math.fsum(1.0 / j for j in range(1, n + 1)) / dist.rate
    if isinstance(dist, Empirical):
        vals = np.unique(np.asarray(dist.values))
        cdf = np.asarray(dist.cdf(vals))
        jumps = cdf ** n - np.concatenate([[0.0], cdf[:-1]]) ** n
        return math.fsum(vals * jumps)
    if isinstance(dist, Adversarial):
        cum = dist._cum()
        jumps = cum ** n - np.concatenate([[0.0], cum[:-1]]) ** n
        return math.fsum(dist.scaled_values() * jumps)
    raise TypeError(f"no expected-max evaluator for {type(dist).__name__}")


def expected_max_quadrature(dist: Distribution, n: int, upper: float = math.inf) -> float:
    """Integrate 1 - F(x)^n over [0, upper); used for continuous laws and as a check."""
    val, _ = integrate.quad(lambda x: 1.0 - float(dist.cdf(x)) ** n, 0.0, upper,
                            epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def parse_distribution(text: str, n: Optional[int] = None) -> Distribution:
    """Parse a config string such as ``two-point:0.4556`` or ``empirical:@x.csv``.

    ``two-point-max:A`` builds the two-point instance whose maximum over the
    run's ``n`` values is zero with probability ``A``; it needs ``n``.
    """
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    try:
        if name == "two-point":
            return TwoPoint(float(arg))
        if name == "two-point-max":
            if n is None:
                raise ValueError("two-point-max needs the horizon n")
            return TwoPoint.for_max(float(arg), n)
        if name == "uniform01":
            return Uniform01()
        if name == "exp":
            return Exponential(float(arg) if arg else 1.0)
        if name == "adversarial":
            return Adversarial(int(arg))
        if name == "empirical":
            if arg.startswith("@"):
                path = arg[1:]
                vals = [float(tok) for tok in Path(path).read_text().split()]
                return Empirical(tuple(vals), source=path)
            return Empirical(tuple(float(tok) for tok in arg.split(",")))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad distribution spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown distribution {text!r}")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial, a pure function of (seed, trial)."""
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), trial]))
