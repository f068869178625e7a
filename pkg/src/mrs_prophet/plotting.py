"""Report figures rendered to files with the Agg backend."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .mrs_engine import pointwise_ratio  # noqa: E402
from .profiles import Constrained, Profile  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_table1(rows: list[dict], path, p_alpha: float | None = None) -> Path:
    """alpha against beta with the reference curves -x ln(x/(1+x)) and (1+x)/e."""
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.linspace(0.01, 1.5, 300)
    ax.plot(x, -x * np.log(x / (1 + x)), ":", color="gray", label=r"$-x\ln(x/(1+x))$")
    ax.plot(x, (1 + x) / math.e, "--", color="gray", label=r"$(1+x)/e$")
    if rows:
        b = [r["beta"] for r in rows]
        ax.plot(b, [r["alpha"] for r in rows], "o-", label="solved MRS ratio")
        ref = [(r["beta"], r["ref_alpha"]) for r in rows if "ref_alpha" in r]
        if ref:
            ax.plot(*zip(*ref), "x", color="k", label="reference values")
    if p_alpha is not None:
        ax.axhline(p_alpha, color="C3", lw=0.8, label="unconstrained optimum")
    ax.set_xlim(0, 1.5)
    ax.set_ylim(0, 1)
    ax.set_xlabel(r"sample budget $\beta$")
    ax.set_ylabel(r"ratio $\alpha$")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_profiles(profiles: dict, path) -> Path:
    """g(y) for each named profile."""
    fig, ax = plt.subplots(figsize=(6, 4))
    y = np.linspace(0.0, 1.0, 801)
    for name, g in profiles.items():
        ax.plot(y, g(y), label=name)
    ax.set_xlabel("y")
    ax.set_ylabel("g(y)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_pointwise(profiles: dict, path, points: int = 201) -> Path:
    """Asymptotic two-point ratio against a for each named profile."""
    fig, ax = plt.subplots(figsize=(6, 4))
    a = np.linspace(0.0, 1.0, points)
    for name, g in profiles.items():
        ax.plot(a, pointwise_ratio(g, a), label=name)
    ax.set_xlabel("a = P[max = 0]")
    ax.set_ylabel("ratio")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sweep(sweep, path, reference: Profile | None = None) -> Path:
    """Monte Carlo two-point sweep with 3-sigma bars and an optional asymptotic curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    a = np.array([e.a for e in sweep.estimates])
    m = np.array([e.mean for e in sweep.estimates])
    s = np.array([e.stderr for e in sweep.estimates])
    ax.errorbar(a, m, yerr=3 * s, fmt=".", capsize=2, label="Monte Carlo (3 sigma)")
    if reference is not None:
        grid = np.linspace(0.0, 0.999, 200)
        ax.plot(grid, pointwise_ratio(reference, grid), label="asymptotic")
    ax.axvline(sweep.argmin_a, color="C3", lw=0.8, label="empirical argmin")
    ax.set_xlabel("a = P[max = 0]")
    ax.set_ylabel("ratio")
    ax.legend(fontsize=8)
    return _save(fig, path)


def report_profiles(mu_bar: float, betas=(1.0, 0.6, 0.3)) -> dict:
    from .control_solver import solve_q
    from .profiles import ThreeStepLimit, UnconstrainedOpt
    out = {"three-step": ThreeStepLimit(), "opt": UnconstrainedOpt(mu_bar)}
    for b in betas:
        sol = solve_q(b, mu_bar=mu_bar)
        out[f"constrained beta={b}"] = Constrained(b, sol.t_star)
    return out
