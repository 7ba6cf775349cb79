"""Stage 1: sequential search for generalized left common eigenvectors.

A row s (written as a column vector) is a generalized left common eigenvector
of the reduced slices T_2, ..., T_{n3} when T_k^T s = lambda_k * s[:n2] for
every k. Candidates are parametrized in a rotated frame, xbar = Q [x; 1], and
found as zeros of the projected residual

    f_Q(x) = vec( (I - u u^T / (u^T u)) (xbar^T x_1 T) ),   u = xbar[:n2],

whose projector uses the plain bilinear square u^T u, not the norm. After a
row is accepted, the next frame Q comes from the QR factorization of the
stacked rows' transpose, which forces every later candidate out of their span;
the trailing columns of Q are re-randomized per start so restarts can reach
eigenvectors with little weight on the deterministic last column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainGuardViolation
from .linalg import as_rng, complex_normal, qr_full, random_unitary
from .lm import minimize
from .options import SolveOptions
from .preprocess import ReducedTensor


@dataclass(frozen=True)
class CommonEigRow:
    """One accepted eigenvector row (unit norm) with its eigenvalues for k >= 2.

    lambda_{.,1} = 1 implicitly: the first reduced slice is (I_r)[:, :n2], so
    T_1^T s = s[:n2] for every s. ``residual`` is the worst eigen-equation
    residual over the slices, relative to nothing (absolute, rows unit norm).
    """

    s: np.ndarray
    lambdas: np.ndarray  # shape (n3 - 1,), entries for k = 2 .. n3
    residual: float


@dataclass
class EigRowSet:
    rows: list[CommonEigRow] = field(default_factory=list)
    target: int = 0

    @property
    def p(self) -> int:
        return len(self.rows)

    @property
    def complete(self) -> bool:
        return self.p == self.target

    def stacked(self) -> np.ndarray:
        """S^p: p x r matrix whose rows are the found eigenvectors."""
        if not self.rows:
            return np.zeros((0, self.target), dtype=np.complex128)
        return np.array([row.s for row in self.rows])

    def lambda_matrix(self) -> np.ndarray:
        """(n3 x p) eigenvalue table including the implicit all-ones first row."""
        if not self.rows:
            return np.zeros((0, 0), dtype=np.complex128)
        lams = np.array([row.lambdas for row in self.rows]).T  # (n3-1, p)
        ones = np.ones((1, self.p), dtype=np.complex128)
        return np.concatenate([ones, lams], axis=0)

    def truncated(self, p: int) -> "EigRowSet":
        return EigRowSet(rows=list(self.rows[:p]), target=self.target)


@dataclass(frozen=True)
class SearchFrame:
    """Unitary frame Q for one row search, with the slices rotated into it.

    tq[a] = sum_i Q[i, a] T[i, :, :], so xbar^T x_1 T = sum_a y_a tq[a] for
    xbar = Q y.
    """

    Q: np.ndarray
    tq: np.ndarray

    @classmethod
    def from_q(cls, q: np.ndarray, rt: ReducedTensor) -> "SearchFrame":
        return cls(Q=q, tq=np.tensordot(q, rt.T.data, axes=([0], [0])))


def build_frame(rt: ReducedTensor, found: EigRowSet, rng) -> SearchFrame:
    """Frame for searching row p+1: random unitary at p=0, deflating QR after.

    For p >= 1 the first p columns of Q span the found rows; the trailing
    r - p columns are re-randomized by a unitary acting on the orthogonal
    complement.
    """
    r = rt.rank
    rng = as_rng(rng)
    if found.p == 0:
        return SearchFrame.from_q(random_unitary(r, rng), rt)
    q, _ = qr_full(found.stacked().T)
    p = found.p
    if r - p > 0:
        q = q.copy()
        q[:, p:] = q[:, p:] @ random_unitary(r - p, rng)
    return SearchFrame.from_q(q, rt)


def _guard(u: np.ndarray, eps_iso: float) -> complex:
    """Bilinear square u^T u, guarded against the projector's true singularity."""
    nrm2 = float(np.real(np.vdot(u, u)))
    s = complex(u @ u)
    if nrm2 == 0.0 or abs(s) < eps_iso * nrm2:
        raise DomainGuardViolation("projector axis is numerically isotropic")
    return s


def eval_fQ(x: np.ndarray, frame: SearchFrame, rt: ReducedTensor, eps_iso: float = 1e-8) -> np.ndarray:
    """Projected residual, zero exactly at generalized common eigenvectors."""
    n2 = rt.slice_cols
    y = np.concatenate([np.asarray(x, dtype=np.complex128).reshape(-1), [1.0]])
    xbar = frame.Q @ y
    u = xbar[:n2]
    s = _guard(u, eps_iso)
    w = np.tensordot(y, frame.tq, axes=([0], [0]))  # (n2, n3) = xbar^T x_1 T
    zw = w - np.outer(u, (u @ w)) / s
    return zw.reshape(-1, order="F")


def jac_fQ(x: np.ndarray, frame: SearchFrame, rt: ReducedTensor, eps_iso: float = 1e-8) -> np.ndarray:
    """Analytic Jacobian of ``eval_fQ`` w.r.t. x (holomorphic, no conjugation)."""
    r = rt.rank
    n2 = rt.slice_cols
    n3 = rt.n_slices
    y = np.concatenate([np.asarray(x, dtype=np.complex128).reshape(-1), [1.0]])
    xbar = frame.Q @ y
    u = xbar[:n2]
    s = _guard(u, eps_iso)
    w = np.tensordot(y, frame.tq, axes=([0], [0]))
    uw = u @ w  # (n3,)
    cols = np.empty((n2 * n3, r - 1), dtype=np.complex128)
    for j in range(r - 1):
        du = frame.Q[:n2, j]
        dw = frame.tq[j]  # d(xbar^T x_1 T)/dx_j
        ds = 2.0 * (u @ du)
        # d(Z W) = dZ W + Z dW with Z = I - u u^T / s
        dzw = (
            -(np.outer(du, uw) + np.outer(u, du @ w)) / s
            + np.outer(u, uw) * (ds / s**2)
            + dw
            - np.outer(u, (u @ dw)) / s
        )
        cols[:, j] = dzw.reshape(-1, order="F")
    return cols


def extract_eigenvalues(s_row: np.ndarray, rt: ReducedTensor, eps_iso: float = 1e-8) -> np.ndarray:
    """Eigenvalues lambda_k = u^T (T_k^T s) / (u^T u) for k = 2 .. n3.

    The bilinear ratio is degree-0 homogeneous in s, so any nonzero scaling of
    the row yields the same eigenvalues.
    """
    s_row = np.asarray(s_row, dtype=np.complex128).reshape(-1)
    n2 = rt.slice_cols
    u = s_row[:n2]
    denom = _guard(u, eps_iso)
    w = np.tensordot(s_row, rt.T.data, axes=([0], [0]))  # (n2, n3)
    lams = (u @ w) / denom
    return lams[1:]


def eig_residual(s_row: np.ndarray, lambdas: np.ndarray, rt: ReducedTensor) -> float:
    """max_k || T_k^T s - lambda_k s[:n2] || with lambda_1 = 1."""
    s_row = np.asarray(s_row, dtype=np.complex128).reshape(-1)
    n2 = rt.slice_cols
    w = np.tensordot(s_row, rt.T.data, axes=([0], [0]))
    lam_full = np.concatenate([[1.0], np.asarray(lambdas, dtype=np.complex128)])
    res = w - np.outer(s_row[:n2], lam_full)
    return float(np.max(np.linalg.norm(res, axis=0)))


def refine_row(
    s_row: np.ndarray, lambdas: np.ndarray, rt: ReducedTensor, iters: int = 3
) -> tuple[np.ndarray, np.ndarray, float]:
    """Gauss-Newton polish of (s, lambda) on the raw eigen-equations.

    The eigenvalue of a row with a small leading part s[:n2] is poorly
    determined by the projected residual alone; a few joint refinement steps
    push both the direction and the eigenvalues to the round-off floor, which
    stage 2 needs when it reuses the row. Keeps the row unit norm.
    """
    t = rt.T.data
    r, n2, n3 = t.shape
    s = np.asarray(s_row, dtype=np.complex128).copy()
    lam = np.asarray(lambdas, dtype=np.complex128).copy()
    best = (s, lam, eig_residual(s, lam, rt))
    for _ in range(iters):
        u = s[:n2]
        lam_full = np.concatenate([[1.0], lam])
        w = np.tensordot(s, t, axes=([0], [0]))
        res = (w - np.outer(u, lam_full)).reshape(-1, order="F")
        j = np.zeros((n2 * n3 + 1, r + n3 - 1), dtype=np.complex128)
        for k in range(n3):
            block = slice(k * n2, (k + 1) * n2)
            jk = t[:, :, k].T.copy()
            jk[:, :n2] -= lam_full[k] * np.eye(n2)
            j[block, :r] = jk
            if k >= 1:
                j[block, r + k - 1] = -u
        j[-1, :r] = s.conj()  # gauge: move within the unit sphere's tangent space
        rhs = -np.concatenate([res, [0.0]])
        delta, _, _, _ = np.linalg.lstsq(j, rhs, rcond=None)
        s = s + delta[:r]
        nrm = np.linalg.norm(s)
        if nrm == 0.0:
            break
        s = s / nrm
        lam = lam + delta[r:]
        residual = eig_residual(s, lam, rt)
        if residual < best[2]:
            best = (s, lam, residual)
        else:
            break
    return best


def find_next_row(rt: ReducedTensor, found: EigRowSet, opts: SolveOptions, rng) -> CommonEigRow | None:
    """Multi-start LM search for the next eigenvector row; None when all starts fail."""
    rng = as_rng(rng)
    r = rt.rank
    scale = rt.norm()
    accept_tol = opts.tolerances.residual_zero_tol * scale
    for _ in range(opts.starts):
        frame = build_frame(rt, found, rng)
        x0 = complex_normal(rng, r - 1)
        try:
            outcome = minimize(
                lambda x: eval_fQ(x, frame, rt, opts.eps_iso),
                lambda x: jac_fQ(x, frame, rt, opts.eps_iso),
                x0,
                opts.lm,
                scale=scale,
            )
        except DomainGuardViolation:
            continue
        if outcome.residual_norm > accept_tol:
            continue
        xbar = frame.Q @ np.concatenate([outcome.x_final, [1.0]])
        s_row = xbar / np.linalg.norm(xbar)
        try:
            lams = extract_eigenvalues(s_row, rt, opts.eps_iso)
        except DomainGuardViolation:
            continue
        s_row, lams, residual = refine_row(s_row, lams, rt)
        if residual > accept_tol:
            continue
        stacked = np.vstack([found.stacked(), s_row])
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[-1] <= opts.tolerances.rank_rel_tol * sv[0]:
            continue  # numerically dependent on the found rows
        return CommonEigRow(s=s_row, lambdas=lams, residual=residual)
    return None


def run_stage1(rt: ReducedTensor, opts: SolveOptions, rng, deadline=None) -> EigRowSet:
    """Find rows sequentially until one search fails or all r rows are found."""
    rng = as_rng(rng)
    found = EigRowSet(rows=[], target=rt.rank)
    max_rows = rt.rank if opts.stage1_max_rows is None else min(opts.stage1_max_rows, rt.rank)
    while found.p < max_rows:
        if deadline is not None and deadline.exceeded():
            break
        row = find_next_row(rt, found, opts, rng)
        if row is None:
            break
        found.rows.append(row)
    return found
