"""Benchmark the compiled coordinate-descent kernel against the numpy
fallback on a synthetic path fit, and confirm they agree."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _cd_py, solver
from .data_model import FitConfig
from .solver import SolverProblem, fit_path

try:
    from . import _cd_fast
except ImportError:
    _cd_fast = None

__all__ = ["BenchRow", "run_benchmark"]


@dataclass(frozen=True)
class BenchRow:
    kernel: str
    seconds: float
    n: int
    p: int
    n_lambda: int


def _time_path(kernel_fn, problem, config, repeats: int) -> tuple[float, np.ndarray]:
    saved = solver.cd_solve
    solver.cd_solve = kernel_fn
    try:
        best = np.inf
        coefs = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            path = fit_path(problem, config)
            best = min(best, time.perf_counter() - t0)
            coefs = path.coefs
        return best, coefs
    finally:
        solver.cd_solve = saved


def run_benchmark(
    n: int = 400, p: int = 200, n_lambda: int = 100, seed: int = 0, repeats: int = 3
) -> tuple[list[BenchRow], float | None]:
    """Time a non-negative path fit under each kernel.

    Returns (rows, max coefficient difference between kernels), the latter
    None when the compiled kernel is unavailable.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: max(1, p // 10)] = rng.standard_normal(max(1, p // 10))
    y = X @ beta + rng.standard_normal(n)
    problem = SolverProblem(design=X, target=y, nonneg=True)
    config = FitConfig(n_lambda=n_lambda, seed=seed)
    rows = []
    t_py, coefs_py = _time_path(_cd_py.cd_solve, problem, config, repeats)
    rows.append(BenchRow("python", t_py, n, p, n_lambda))
    diff = None
    if _cd_fast is not None:
        t_c, coefs_c = _time_path(_cd_fast.cd_solve, problem, config, repeats)
        rows.insert(0, BenchRow("compiled", t_c, n, p, n_lambda))
        diff = float(np.abs(coefs_c - coefs_py).max())
    return rows, diff
