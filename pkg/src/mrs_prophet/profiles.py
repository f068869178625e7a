"""Sample-size profiles g on [0, 1] and their discretisations f on [n]."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class ScheduleClampWarning(UserWarning):
    """A discretised profile was clamped up to 1."""


class InfeasibleSchedule(ValueError):
    """f(i) exceeds the k+i-1 values available at step i."""

    def __init__(self, step: int, f_i: int, available: int):
        self.step = step
        super().__init__(f"step {step}: subset size {f_i} exceeds the {available} values seen")


class Profile:
    """Continuous schedule g: [0, 1] -> R+.

    ``breakpoints`` lists interior points where g or its derivative jumps;
    integrators split panels there.
    """

    breakpoints: tuple = ()

    def __call__(self, y):
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ThreeStepLimit(Profile):
    """Limit profile of the warm-up rule: 1, 4/3, 2/3 on consecutive thirds."""

    breakpoints: tuple = (1.0 / 3.0, 2.0 / 3.0)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y < 1.0 / 3.0, 1.0, np.where(y < 2.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0))

    @property
    def spec(self) -> str:
        return "three-step"


def unconstrained_opt_g(y, mu_bar: float):
    """Optimal unconstrained profile 2*sqrt(mu - mu*y)/mu."""
    y = np.asarray(y, dtype=float)
    return 2.0 * np.sqrt(np.maximum(mu_bar - mu_bar * y, 0.0)) / mu_bar


@dataclass(frozen=True)
class UnconstrainedOpt(Profile):
    mu_bar: float

    def __call__(self, y):
        return unconstrained_opt_g(y, self.mu_bar)

    @property
    def spec(self) -> str:
        return "opt"


def constrained_g(y, beta: float, t: float):
    """beta + y up to t, then (beta+t)*sqrt((1-y)/(1-t)); linear everywhere if t = 1."""
    y = np.asarray(y, dtype=float)
    if t >= 1.0:
        return beta + y
    tail = (beta + t) * np.sqrt(np.maximum(1.0 - y, 0.0) / (1.0 - t))
    return np.where(y <= t, beta + y, tail)


@dataclass(frozen=True)
class Constrained(Profile):
    beta: float
    t: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")

    @property
    def breakpoints(self) -> tuple:
        return (self.t,) if 0.0 < self.t < 1.0 else ()

    def __call__(self, y):
        return constrained_g(y, self.beta, self.t)

    @property
    def spec(self) -> str:
        return f"constrained:beta={self.beta!r},t={self.t!r}"


@dataclass(frozen=True)
class Constant(Profile):
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("constant profile must be positive")

    def __call__(self, y):
        return np.full(np.shape(y), self.c, dtype=float)

    @property
    def spec(self) -> str:
        return f"const:{self.c!r}"


@dataclass(frozen=True)
class Custom(Profile):
    """Tabulated profile, linearly interpolated between rows (y, g)."""

    ys: tuple
    gs: tuple
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=float)
        gs = np.asarray(self.gs, dtype=float)
        if ys.shape != gs.shape or ys.size < 2:
            raise ValueError("custom profile needs at least two (y, g) rows")
        if np.any(np.diff(ys) <= 0) or ys[0] > 0 or ys[-1] < 1:
            raise ValueError("custom profile y must increase and cover [0, 1]")
        if np.any(gs < 0) or not np.all(np.isfinite(gs)):
            raise ValueError("custom profile values must be finite and nonnegative")

    @property
    def breakpoints(self) -> tuple:
        return tuple(y for y in self.ys if 0.0 < y < 1.0)

    def __call__(self, y):
        return np.interp(np.asarray(y, dtype=float), self.ys, self.gs)

    @property
    def spec(self) -> str:
        if self.source is not None:
            return f"custom:@{self.source}"
        return "custom:" + ";".join(f"{y!r},{g!r}" for y, g in zip(self.ys, self.gs))


@dataclass(frozen=True)
class DiscreteSchedule:
    """Subset sizes f(1..n), stored 0-based in ``f``."""

    f: tuple
    n: int
    k_required: int
    clamped: bool = False

    def __post_init__(self):
        if len(self.f) != self.n:
            raise ValueError("schedule length must equal n")

    @classmethod
    def from_sizes(cls, f, clamped: bool = False) -> "DiscreteSchedule":
        f = tuple(int(x) for x in f)
        n = len(f)
        need = max((fi - i for i, fi in enumerate(f)), default=0)
        return cls(f, n, max(need, 0), clamped)

    def array(self) -> np.ndarray:
        return np.asarray(self.f, dtype=np.int64)

    def check(self, k: int) -> None:
        """Raise InfeasibleSchedule at the first step whose subset does not fit."""
        for i, fi in enumerate(self.f, start=1):
            if fi < 0 or fi > k + i - 1:
                raise InfeasibleSchedule(i, fi, k + i - 1)


def three_step(n: int) -> DiscreteSchedule:
    """Warm-up schedule: n-1, 4n/3-1, 2n/3-1 on consecutive thirds of [n]."""
    if n < 3 or n % 3:
        raise ValueError("three-step schedule needs n divisible by 3")
    third = n // 3
    f = [n - 1] * third + [4 * third - 1] * third + [2 * third - 1] * third
    return DiscreteSchedule.from_sizes(f)


def discretize(g: Profile, n: int, k: int, warn: bool = True) -> DiscreteSchedule:
    """f(i) = ceil(g(i/n) n) clamped to [1, k+i-1]."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    if k == 0:
        raise ValueError("an MRS rule needs at least one reference value at step 1 (k = 0)")
    i = np.arange(1, n + 1)
    raw = np.ceil(np.asarray(g(i / n), dtype=float) * n - 1e-9).astype(np.int64)
    f = np.clip(raw, 1, k + i - 1)
    low = bool(np.any(raw < 1))
    if low and warn:
        warnings.warn(f"{int(np.sum(raw < 1))} subset sizes clamped up to 1", ScheduleClampWarning,
                      stacklevel=2)
    return DiscreteSchedule.from_sizes(f, clamped=bool(np.any(f != raw)))


def raw_sizes(g: Profile, n: int) -> np.ndarray:
    """Unclamped ceil(g(i/n) n), used to report which step breaks a budget."""
    i = np.arange(1, n + 1)
    return np.ceil(np.asarray(g(i / n), dtype=float) * n - 1e-9).astype(np.int64)


def _parse_kv(arg: str) -> dict:
    out = {}
    for part in arg.split(","):
        key, _, val = part.partition("=")
        out[key.strip()] = float(val)
    return out


def parse_profile(text: str, mu_bar: Optional[float] = None) -> Profile:
    """Parse ``three-step``, ``opt``, ``constrained:beta=..,t=..``, ``const:c``, ``custom:@file``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    if name == "three-step":
        return ThreeStepLimit()
    if name == "opt":
        if mu_bar is None:
            from .control_solver import solve_mu_bar
            mu_bar = solve_mu_bar()
        return UnconstrainedOpt(mu_bar)
    if name == "constrained":
        kv = _parse_kv(arg)
        return Constrained(kv["beta"], kv.get("t", 1.0))
    if name == "const":
        return Constant(float(arg))
    if name == "custom":
        if not arg.startswith("@"):
            raise ValueError("custom profile expects @file.csv")
        rows = [line.split(",") for line in Path(arg[1:]).read_text().splitlines() if line.strip()]
        rows = [r for r in rows if _is_number(r[0])]
        ys = tuple(float(r[0]) for r in rows)
        gs = tuple(float(r[1]) for r in rows)
        return Custom(ys, gs, source=arg[1:])
    raise ValueError(f"unknown profile {text!r}")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def schedule_for(profile_text: str, n: int, k: int, mu_bar: Optional[float] = None,
                 clamp: bool = True) -> DiscreteSchedule:
    """Schedule used by the CLI: exact three-step schedule, else ``discretize``.

    With ``clamp=False`` a profile asking for more than k+i-1 values raises
    :class:`InfeasibleSchedule` at the first such step.
    """
    if profile_text.strip().lower() == "three-step":
        sched = three_step(n)
        sched.check(k)
        return sched
    prof = parse_profile(profile_text, mu_bar)
    if not clamp:
        raw = np.maximum(raw_sizes(prof, n), 1)
        avail = k + np.arange(n)
        bad = np.nonzero(raw > avail)[0]
        if bad.size:
            i = int(bad[0])
            raise InfeasibleSchedule(i + 1, int(raw[i]), int(avail[i]))
    if k == 0:
        raise InfeasibleSchedule(1, 1, 0)
    return discretize(prof, n, k)


def k_for_profile(g: Profile, n: int) -> int:
    """Smallest k for which ``discretize`` needs no upper clamping."""
    raw = np.maximum(raw_sizes(g, n), 1)
    return int(max(np.max(raw - np.arange(n)), 1))


def mrs_k_zero_schedule(n: int) -> DiscreteSchedule:
    """Rank-only rule with no samples: accept X1 (empty reference set), then f = i-1."""
    return DiscreteSchedule((0,) + tuple(range(1, n)), n, 0)

