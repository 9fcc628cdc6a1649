"""Tuning of the divider's inductive post: coarse scan plus golden-section
refinement of the post offset, repeated for each candidate radius."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fdfd import SolverConfig, simulate
from .geometry import DeviceLayout, generate_tee_divider, validate_layout
from .network import to_db
from .waveguide import SiwSpec

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class TuningProblem:
    spec: SiwSpec
    arm_length: float
    xp_bounds: tuple[float, float]
    radii: tuple[float, ...] = (1.2e-3,)
    band: tuple[float, float] = (2.1e9, 3.0e9)
    npoints: int = 11
    config: SolverConfig = field(default_factory=SolverConfig)
    coarse_points: int = 9
    tol: float = 0.05e-3
    generator: Callable[..., DeviceLayout] = generate_tee_divider
    # (x_p, r) -> objective in dB; replaces the solver when given
    evaluator: Callable[[float, float], float] | None = None

    def __post_init__(self):
        lo, hi = self.xp_bounds
        if not hi >= lo:
            raise ValueError(f"empty x_p bounds {self.xp_bounds}")
        if not self.radii:
            raise ValueError("need at least one post radius")
        if not 0 < self.band[0] < self.band[1]:
            raise ValueError(f"invalid band {self.band}")
        if self.coarse_points < 3:
            raise ValueError("coarse scan needs at least 3 points")


@dataclass(frozen=True)
class Evaluation:
    x_p: float
    r: float
    objective: float


@dataclass(frozen=True)
class TuningResult:
    x_p: float
    r: float
    objective: float
    history: tuple[Evaluation, ...]
    converged: bool

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate([e.objective for e in self.history])

    def history_csv(self) -> str:
        lines = ["eval_index,x_p_m,r_m,objective_db"]
        for k, e in enumerate(self.history):
            lines.append(f"{k},{e.x_p!r},{e.r!r},{e.objective!r}")
        return "\n".join(lines) + "\n"


def default_xp_bounds(spec: SiwSpec, arm_length: float, r: float) -> tuple[float, float]:
    """Post offsets that keep a radius-``r`` post inside the junction square
    clear of the back wall."""
    lo = arm_length
    hi = arm_length + spec.w_siw - spec.d / 2 - r - spec.p / 4
    return lo, hi


def worst_return_loss(layout: DeviceLayout, band: tuple[float, float], npoints: int,
                      config: SolverConfig) -> float:
    """max over the band of |S11| in dB."""
    freqs = np.linspace(band[0], band[1], npoints)
    res = simulate(layout, freqs, config, excite=[1])
    return float(np.max(to_db(res.data.entry(1, 1))))


def evaluate(problem: TuningProblem, x_p: float, r: float) -> float:
    """Objective for one candidate; invalid layouts score +inf."""
    if problem.evaluator is not None:
        return float(problem.evaluator(x_p, r))
    try:
        layout = problem.generator(problem.spec, problem.arm_length, r, x_p)
    except ValueError:
        return math.inf
    if validate_layout(layout):
        return math.inf
    return worst_return_loss(layout, problem.band, problem.npoints, problem.config)


def baseline_objective(problem: TuningProblem) -> float:
    """Objective of the junction without a tuning post."""
    if problem.evaluator is not None:
        return float(problem.evaluator(0.0, 0.0))
    layout = problem.generator(problem.spec, problem.arm_length, 0.0, 0.0)
    return worst_return_loss(layout, problem.band, problem.npoints, problem.config)


def _golden(fun: Callable[[float], float], a: float, b: float, tol: float) -> None:
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a >= tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)


def optimize_post(problem: TuningProblem, workers: int = 1) -> TuningResult:
    history: list[Evaluation] = []

    def record(x: float, r: float, val: float) -> float:
        history.append(Evaluation(float(x), float(r), float(val)))
        return val

    lo, hi = problem.xp_bounds
    converged = True
    for r in problem.radii:
        if hi - lo <= 0:
            record(lo, r, evaluate(problem, lo, r))
            continue
        xs = np.linspace(lo, hi, problem.coarse_points)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                vals = list(pool.map(lambda x: evaluate(problem, float(x), r), xs))
        else:
            vals = [evaluate(problem, float(x), r) for x in xs]
        for x, v in zip(xs, vals):
            record(x, r, v)
        if not np.isfinite(vals).any():
            converged = False
            continue
        k = int(np.argmin(vals))
        a, b = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
        _golden(lambda x: record(x, r, evaluate(problem, x, r)), a, b, problem.tol)

    finite = [e for e in history if math.isfinite(e.objective)]
    if not finite:
        raise ValueError("every candidate layout was invalid")
    best = min(finite, key=lambda e: e.objective)
    return TuningResult(best.x_p, best.r, best.objective, tuple(history), converged)
