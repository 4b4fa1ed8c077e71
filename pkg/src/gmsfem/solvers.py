"""Numerical kernels: generalized eigensolver, direct factors, CG and PCG
with a two-level additive Schwarz preconditioner and a Lanczos condition
estimate recovered from the CG coefficients."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class NumericalError(RuntimeError):
    """Factorization or iteration failure."""


INF_CUTOFF = 1e-12  # relative rank tolerance on the S side


def dense_gen_eig(A: np.ndarray, S: np.ndarray, inf_cutoff: float = INF_CUTOFF):
    """Eigenpairs of A psi = lambda S psi with A positive definite.

    Solved as the reversed pencil S v = nu A v by congruence with the
    Cholesky factor of A; lambda = 1/nu.  The lambda = inf modes are the
    S-null directions, so their count is read off the rank of S (relative
    eigenvalue tolerance inf_cutoff) rather than from the nu values, which
    keeps the detection independent of the conditioning of A.  Returns
    eigenvalues in non-increasing order (inf modes first) and
    A-orthonormal eigenvectors as columns.
    """
    A = np.asarray(A, dtype=float)
    S = np.asarray(S, dtype=float)
    if A.shape != S.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and S must be square of equal size")
    A = 0.5 * (A + A.T)
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(A)
        scale = max(abs(w[0]), abs(w[-1]), 1.0)
        if w[0] < -1e-8 * scale:
            raise NumericalError("A side of the pencil is indefinite") from None
        # A merely singular: fall back to the forward pencil if S allows it
        try:
            lam, vec = la.eigh(A, S)
        except (np.linalg.LinAlgError, la.LinAlgError):
            raise NumericalError("both pencil sides are singular") from None
        order = np.argsort(lam)[::-1]
        return lam[order], vec[:, order]
    W = la.solve_triangular(L, S, lower=True)
    C = la.solve_triangular(L, W.T, lower=True)
    nu, V = la.eigh(0.5 * (C + C.T))
    nu = np.maximum(nu, 0.0)
    vecs = la.solve_triangular(L.T, V, lower=False)
    w_s = np.linalg.eigvalsh(S)
    n_inf = int(np.sum(w_s <= inf_cutoff * max(w_s[-1], 0.0)))
    # ascending nu is descending lambda; the n_inf smallest nu belong to
    # the S-null directions and are reported as lambda = inf
    lam = 1.0 / np.maximum(nu, np.finfo(float).tiny)
    lam[:n_inf] = np.inf
    return lam, vecs


class SparseFactor:
    """Reusable LU factorization of a sparse SPD matrix."""

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise NumericalError(f"sparse factorization failed: {exc}") from None
        self.shape = A.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))


def sparse_direct(A) -> SparseFactor:
    return SparseFactor(A)


@dataclass
class PcgReport:
    iterations: int
    residuals: list
    condition_estimate: float
    converged: bool
    ritz_min: float = 0.0
    ritz_max: float = 0.0

    def to_csv_row(self) -> str:
        return (f"{self.iterations},{self.condition_estimate:.6e},"
                f"{int(self.converged)},{self.residuals[-1]:.6e}")


def _lanczos_condition(alphas, betas) -> tuple:
    """(condition, ritz_min, ritz_max) from the CG-recovered tridiagonal."""
    k = len(alphas)
    if k == 0:
        return 1.0, 0.0, 0.0
    diag = np.empty(k)
    off = np.empty(max(k - 1, 0))
    diag[0] = 1.0 / alphas[0]
    for i in range(1, k):
        diag[i] = 1.0 / alphas[i] + betas[i - 1] / alphas[i - 1]
        off[i - 1] = np.sqrt(betas[i - 1]) / alphas[i - 1]
    if k == 1:
        return 1.0, float(diag[0]), float(diag[0])
    ev = la.eigvalsh_tridiagonal(diag, off)
    lo = max(ev[0], np.finfo(float).tiny)
    return float(ev[-1] / lo), float(ev[0]), float(ev[-1])


def pcg(A, b: np.ndarray, M_inv=None, tol: float = 1e-10, max_it: int = 1000,
        x0=None):
    """Preconditioned CG on an SPD system.

    A is a sparse matrix or a callable v -> Av; M_inv a callable applying
    the preconditioner (identity when None).  Convergence is measured in
    the relative preconditioned residual sqrt(r'z)/sqrt(r0'z0).
    """
    matvec = A if callable(A) else (lambda v: A @ v)
    prec = M_inv if M_inv is not None else (lambda v: v)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x) if x0 is not None else b.copy()
    z = prec(r)
    rz = float(r @ z)
    if rz < 0:
        raise NumericalError("preconditioner is not positive")
    norm0 = np.sqrt(rz) if rz > 0 else 1.0
    history = [1.0]
    if rz == 0.0:
        return x, PcgReport(0, history, 1.0, True)
    p = z.copy()
    alphas, betas = [], []
    warned = False
    for it in range(1, max_it + 1):
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise NumericalError(f"operator lost positive definiteness (p'Ap={pAp:.3e})")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = prec(r)
        rz_new = float(r @ z)
        alphas.append(alpha)
        rel = np.sqrt(max(rz_new, 0.0)) / norm0
        history.append(rel)
        if not warned and rel > 100.0 * min(history[:-1]):
            warnings.warn(f"pcg residual grew 100x at iteration {it}", RuntimeWarning)
            warned = True
        if rel <= tol:
            cond, rmin, rmax = _lanczos_condition(alphas, betas)
            return x, PcgReport(it, history, cond, True, rmin, rmax)
        beta = rz_new / rz
        betas.append(beta)
        p = z + beta * p
        rz = rz_new
    cond, rmin, rmax = _lanczos_condition(alphas, betas)
    return x, PcgReport(max_it, history, cond, False, rmin, rmax)


def cg(A, b, tol=1e-10, max_it=1000, x0=None):
    return pcg(A, b, M_inv=None, tol=tol, max_it=max_it, x0=x0)


class TwoLevelPreconditioner:
    """Coarse solve plus overlapping-subdomain solves, all additive.

    Operates in the ordering of a free-node-reduced fine system: callers
    pass the index of each subdomain's interior nodes within that ordering.
    """

    def __init__(self, coarse_P: sp.csr_matrix, coarse_factor,
                 sub_indices: list, sub_factors: list):
        self.coarse_P = coarse_P
        self.coarse_factor = coarse_factor
        self.sub_indices = sub_indices
        self.sub_factors = sub_factors

    @property
    def n_subdomains(self) -> int:
        return len(self.sub_indices)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.coarse_P @ self.coarse_factor(self.coarse_P.T @ v)
        for idx, f in zip(self.sub_indices, self.sub_factors):
            out[idx] += f.solve(v[idx])
        return out

    def __call__(self, v):
        return self.apply(v)


def build_two_level(A_ff: sp.csr_matrix, P_ff: sp.csr_matrix,
                    sub_interior_indices: list) -> TwoLevelPreconditioner:
    """Factorize the coarse matrix P'AP and each subdomain principal block.

    A_ff is the Dirichlet-reduced fine matrix, P_ff the coarse prolongation
    in the same row ordering, sub_interior_indices the per-subdomain index
    arrays into that ordering.
    """
    S0 = np.asarray((P_ff.T @ (A_ff @ P_ff)).todense()) if sp.issparse(P_ff) \
        else P_ff.T @ (A_ff @ P_ff)
    S0 = 0.5 * (S0 + S0.T)
    try:
        c0 = la.cho_factor(S0)
    except la.LinAlgError as exc:
        raise NumericalError(f"coarse matrix not SPD: {exc}") from None
    coarse_solve = lambda v: la.cho_solve(c0, v)
    factors = []
    for i, idx in enumerate(sub_interior_indices):
        if len(idx) == 0:
            raise NumericalError(f"subdomain {i} has no interior nodes")
        try:
            factors.append(SparseFactor(A_ff[idx][:, idx]))
        except NumericalError as exc:
            raise NumericalError(f"subdomain {i}: {exc}") from None
    return TwoLevelPreconditioner(P_ff, coarse_solve, sub_interior_indices, factors)
