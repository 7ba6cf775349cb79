"""Plain alternating least squares CP baseline.

Each sweep solves the three Khatri-Rao least-squares problems in cyclic order,
so the fit residual is nonincreasing per sweep. No line search, no
regularization: a deliberately plain baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DecompositionError
from .linalg import as_rng
from .tensors import FactorTriple, Tensor3, khatri_rao, mode_k_flatten

_MAX_RESTARTS = 3


@dataclass
class AlsOptions:
    max_sweeps: int = 500
    rel_change_tol: float = 1e-10
    seed: int | None = None
    init_scale: float = 1.0

    def __post_init__(self):
        if self.max_sweeps < 1 or self.rel_change_tol <= 0 or self.init_scale <= 0:
            raise ValueError("AlsOptions fields must be positive")


def _init_factors(dims, r, real_input, scale, rng):
    mats = []
    for n in dims:
        m = rng.standard_normal((n, r)) * scale
        if not real_input:
            m = m + 1j * rng.standard_normal((n, r)) * scale
        mats.append(m.astype(np.complex128))
    return mats


def als_decompose(f: Tensor3, r: int, opts: AlsOptions | None = None) -> tuple[FactorTriple, np.ndarray]:
    """Run ALS from a random init; returns (factors, per-sweep err-rel trace).

    A rank-deficient Khatri-Rao system mid-sweep triggers a fresh restart
    (at most 3); the trace covers the returned run only.
    """
    opts = opts or AlsOptions()
    if r < 1:
        raise DecompositionError("rank must be >= 1")
    rng = as_rng(opts.seed)
    flats = [mode_k_flatten(f, k).T for k in (1, 2, 3)]
    fnorm = f.norm()
    real_input = f.is_real()

    for _ in range(_MAX_RESTARTS + 1):
        u1, u2, u3 = _init_factors(f.dims, r, real_input, opts.init_scale, rng)
        trace = []
        deficient = False
        prev = None
        for _ in range(opts.max_sweeps):
            for mode in (1, 2, 3):
                if mode == 1:
                    a, target = khatri_rao(u2, u3), flats[0]
                elif mode == 2:
                    a, target = khatri_rao(u1, u3), flats[1]
                else:
                    a, target = khatri_rao(u1, u2), flats[2]
                x, _, rank, _ = np.linalg.lstsq(a, target, rcond=None)
                if rank < r:
                    deficient = True
                    break
                if mode == 1:
                    u1 = x.T
                elif mode == 2:
                    u2 = x.T
                else:
                    u3 = x.T
            if deficient:
                break
            err = float(np.linalg.norm(flats[0] - khatri_rao(u2, u3) @ u1.T)) / fnorm
            trace.append(err)
            if prev is not None and prev - err <= opts.rel_change_tol * max(err, 1e-300):
                break
            prev = err
        if not deficient:
            try:
                return FactorTriple(u1, u2, u3, r), np.asarray(trace)
            except Exception:
                continue  # collapsed column; restart
    raise DecompositionError("ALS restarts exhausted (rank-deficient Khatri-Rao systems)")
