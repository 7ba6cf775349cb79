"""Solver configuration shared by the pipeline stages."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .linalg import Tolerances
from .lm import LMOptions

SUCCESS_TOL = 1e-6  # err-rel at or below this counts as a successful decomposition


class Deadline:
    """Cooperative wall-clock budget checked between solver phases."""

    def __init__(self, limit: float | None):
        self.limit = limit
        self.start = time.perf_counter()

    def exceeded(self) -> bool:
        return self.limit is not None and time.perf_counter() - self.start > self.limit

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


@dataclass
class SolveOptions:
    max_retries: int = 5
    success_tol: float = SUCCESS_TOL
    tolerances: Tolerances = field(default_factory=Tolerances)
    lm: LMOptions = field(default_factory=LMOptions)
    seed: int | None = None
    mixing: str = "on-retry"  # "off" | "on-retry" | "always"
    starts: int = 12  # LM multi-starts per stage-1 row and per stage-2 solve
    eps_iso: float = 1e-8  # guard on the bilinear square of the projector axis
    time_limit: float | None = None  # cooperative per-run budget, seconds
    stage1_max_rows: int | None = None  # cap stage-1 rows (forces stage 2); None = no cap

    def __post_init__(self):
        if self.mixing not in ("off", "on-retry", "always"):
            raise ValueError(f"mixing must be off|on-retry|always, got {self.mixing!r}")
        for name in ("success_tol", "starts", "eps_iso"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
