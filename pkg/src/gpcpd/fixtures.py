"""Reference tensors with known decompositions, and random planted instances.

The two fixed examples ship as transcribed data validated against each other
at every call: the integer 5x3x3 tensor must equal the reconstruction from its
integer factors exactly, and the 8x5x3 power-law tensor must match its rank-8
closed-form factors to 1e-10.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError
from .linalg import as_rng
from .tensors import FactorTriple, Tensor3, cpd_to_tensor, relative_error

# 5x3x3 integer tensor, slices k = 1, 2, 3
_EX41_SLICES = [
    [
        [-38, 56, 82],
        [42, 152, 42],
        [78, 109, -48],
        [102, -13, -105],
        [18, 35, 0],
    ],
    [
        [-55, 126, 92],
        [17, 352, 38],
        [93, 226, -63],
        [144, -163, -123],
        [27, -18, 15],
    ],
    [
        [31, 180, -14],
        [-77, 434, 88],
        [-85, 136, 71],
        [10, -313, 43],
        [37, -96, 1],
    ],
]

_EX41_U1 = [
    [3, 2, -3, 4, 1],
    [5, 6, 1, 8, 3],
    [9, 2, 4, -1, 2],
    [-3, -5, 5, 1, -2],
    [3, -2, 0, 1, -2],
]
_EX41_U2 = [
    [1, -2, 3, 4, 1],
    [5, 6, 1, 9, 2],
    [1, 1, -3, 4, -2],
]
_EX41_U3 = [
    [2, 1, 6, 1, -2],
    [3, 5, 7, 1, 3],
    [1, 9, -5, 1, 3],
]


def fixture_example41() -> tuple[Tensor3, FactorTriple]:
    """Rank-5 integer 5x3x3 tensor with exactly six distinct decompositions."""
    data = np.stack([np.array(s, dtype=np.complex128) for s in _EX41_SLICES], axis=2)
    tensor = Tensor3(data)
    triple = FactorTriple(
        np.array(_EX41_U1, dtype=np.complex128),
        np.array(_EX41_U2, dtype=np.complex128),
        np.array(_EX41_U3, dtype=np.complex128),
        5,
    )
    recon = cpd_to_tensor(triple)
    if float(np.max(np.abs(recon.data - tensor.data))) > 1e-12:
        raise AssertionError("example-4.1 fixture data is internally inconsistent")
    return tensor, triple


def fixture_example42() -> tuple[Tensor3, FactorTriple]:
    """Rank-8 8x5x3 tensor with entries (i1 - 7/2) ** (4/5 i2 + i3 - 9/5).

    Powers of the negative bases use the principal branch, so the tensor is
    genuinely complex; its rank-8 factors are U1 = I and Vandermonde-like
    power columns in U2, U3.
    """
    base = np.arange(1, 9, dtype=np.complex128) - 3.5  # per s = i1
    i2 = np.arange(1, 6, dtype=np.float64)
    i3 = np.arange(1, 4, dtype=np.float64)
    expo = 0.8 * i2[None, :, None] + i3[None, None, :] - 1.8
    data = np.power(base[:, None, None], expo)
    tensor = Tensor3(data)
    u1 = np.eye(8, dtype=np.complex128)
    u2 = np.power(base[None, :], 0.8 * (i2[:, None] - 1.0))
    u3 = np.power(base[None, :], i3[:, None] - 1.0)
    triple = FactorTriple(u1, u2, u3, 8)
    if relative_error(tensor, triple) > 1e-10:
        raise AssertionError("example-4.2 fixture data is internally inconsistent")
    return tensor, triple


FIXTURES = {"example41": fixture_example41, "example42": fixture_example42}

DISTRIBUTIONS = ("normal", "normal-shifted", "complex-normal")


def gen_random_rank_r(
    n1: int,
    n2: int,
    n3: int,
    r: int,
    distribution: str = "normal",
    seed=None,
) -> tuple[Tensor3, FactorTriple]:
    """Random rank-r tensor from i.i.d. factor entries; seeded and deterministic.

    ``normal``: real standard normal entries. ``normal-shifted``: real normal
    with means 1, 2, 3 for U1, U2, U3 and variance 1. ``complex-normal``:
    standard complex Gaussian.
    """
    if not (1 <= r <= min(n1, n2 * n3)):
        raise DimensionMismatchError(f"need 1 <= r <= min(n1, n2*n3) = {min(n1, n2 * n3)}, got {r}")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    rng = as_rng(seed)
    mats = []
    for idx, n in enumerate((n1, n2, n3)):
        m = rng.standard_normal((n, r))
        if distribution == "normal-shifted":
            m = m + float(idx + 1)
        elif distribution == "complex-normal":
            m = (m + 1j * rng.standard_normal((n, r))) / np.sqrt(2.0)
        mats.append(m.astype(np.complex128))
    triple = FactorTriple(mats[0], mats[1], mats[2], r)
    return cpd_to_tensor(triple), triple
