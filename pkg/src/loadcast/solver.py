"""Penalized least-squares core.

Every estimator reduces to the Tikhonov problem

    minimize ||y - X beta||^2 + beta^T T beta

with solution ``beta = (X^T X + T)^{-1} X^T y`` and equivalent degrees of
freedom ``dof = trace(X (X^T X + T)^{-1} X^T) = trace((X^T X + T)^{-1} X^T X)``.

For the weight-surface models ``X`` is the lifted regressor matrix, whose
normal matrix has the Kronecker form ``I (x) G`` with ``G`` the 96x96 Gram
matrix of the daily regressor vectors. The row-decoupled and Kronecker
solvers exploit that structure and never form the 9216x9216 system.

Weight surfaces are vectorized row by row: ``a = [a11 .. a1Q, a21 .. aQQ]``.
Under that ordering second differences along each row give ``I (x) D`` and
along each column give ``D (x) I``, with ``D = Delta^T Delta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import SingularSystemError, ValidationError

__all__ = [
    "PIVOT_TOL",
    "SecondDiffOperator",
    "second_diff",
    "ScaledIdentity",
    "RowSecondDiff",
    "ColSecondDiff",
    "BlockDiag",
    "ChainSecondDiff",
    "EdgeSecondDiff",
    "PenaltySpec",
    "SolveResult",
    "solve_normal",
    "solve_dense",
    "solve_rowwise",
    "solve_kron",
    "dof_of",
    "dof_rowwise",
    "dof_kron",
    "objective_gradient",
    "edge_indices",
]

PIVOT_TOL = 1e-12


class SecondDiffOperator:
    """The ``(n-2) x n`` interior second-difference operator.

    ``(Delta v)[k] = v[k+2] - 2 v[k+1] + v[k]`` for ``k = 0 .. n-3``.
    """

    def __init__(self, n: int):
        n = int(n)
        if n < 3:
            raise ValidationError(f"second differences need n >= 3, got {n}")
        self.n = n

    @property
    def shape(self):
        return (self.n - 2, self.n)

    def __matmul__(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise ValidationError(f"operand has length {v.shape[0]}, expected {self.n}")
        return v[2:] - 2.0 * v[1:-1] + v[:-2]

    def matrix(self) -> sp.csr_matrix:
        n = self.n
        return sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n), format="csr")

    def gram(self) -> np.ndarray:
        """``Delta^T Delta`` as a dense pentadiagonal matrix."""
        M = self.matrix()
        return (M.T @ M).toarray()

    def __repr__(self):
        return f"SecondDiffOperator(n={self.n})"


def second_diff(n: int) -> SecondDiffOperator:
    return SecondDiffOperator(n)


# -- penalty terms -----------------------------------------------------------


@dataclass(frozen=True)
class ScaledIdentity:
    lam: float

    def matrix(self, n):
        return self.lam * np.eye(n)


@dataclass(frozen=True)
class RowSecondDiff:
    """Second differences along each row of a ``q x q`` surface."""

    lam: float
    q: int

    def matrix(self, n):
        _check_square(n, self.q)
        return self.lam * np.kron(np.eye(self.q), second_diff(self.q).gram())


@dataclass(frozen=True)
class ColSecondDiff:
    """Second differences along each column of a ``q x q`` surface."""

    lam: float
    q: int

    def matrix(self, n):
        _check_square(n, self.q)
        return self.lam * np.kron(second_diff(self.q).gram(), np.eye(self.q))


@dataclass(frozen=True)
class BlockDiag:
    """Zero on the first ``p`` coefficients, ``lam * I`` on the next ``r``."""

    p: int
    r: int
    lam: float

    def matrix(self, n):
        if n != self.p + self.r:
            raise ValidationError(f"block penalty covers {self.p + self.r} of {n} parameters")
        T = np.zeros((n, n))
        T[self.p :, self.p :] = self.lam * np.eye(self.r)
        return T


@dataclass(frozen=True)
class ChainSecondDiff:
    """Second differences along an ordered chain of parameter indices."""

    lam: float
    indices: tuple

    def matrix(self, n):
        idx = np.asarray(self.indices)
        T = np.zeros((n, n))
        T[np.ix_(idx, idx)] = self.lam * second_diff(len(idx)).gram()
        return T


def edge_indices(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Positions of the diagonal and last-column edges in the interleaved
    two-edge parameter vector ``(a11, a1q, a22, a2q, ..., aqq)``.

    Both chains end on the shared corner entry ``aqq``.
    """
    corner = 2 * (q - 1)
    diag = np.append(np.arange(0, corner, 2), corner)
    last = np.append(np.arange(1, corner, 2), corner)
    return diag, last


@dataclass(frozen=True)
class EdgeSecondDiff:
    """Second-difference penalties on both edges of a two-edge surface."""

    lam_diag: float
    lam_last: float
    q: int

    def matrix(self, n):
        if n != 2 * self.q - 1:
            raise ValidationError(f"two-edge penalty needs {2 * self.q - 1} parameters, got {n}")
        diag, last = edge_indices(self.q)
        return (
            ChainSecondDiff(self.lam_diag, tuple(diag)).matrix(n)
            + ChainSecondDiff(self.lam_last, tuple(last)).matrix(n)
        )


def _check_square(n, q):
    if n != q * q:
        raise ValidationError(f"surface penalty for q={q} needs {q * q} parameters, got {n}")


@dataclass(frozen=True)
class PenaltySpec:
    """A Tikhonov matrix described as a sum of structured terms."""

    terms: tuple = ()

    def __post_init__(self):
        for term in self.terms:
            for name in ("lam", "lam_diag", "lam_last"):
                value = getattr(term, name, 0.0)
                if not np.isfinite(value) or value < 0:
                    raise ValidationError(f"penalty weight {name}={value} must be finite and >= 0")

    @classmethod
    def of(cls, *terms):
        return cls(tuple(terms))

    def assemble(self, n: int) -> np.ndarray:
        T = np.zeros((n, n))
        for term in self.terms:
            T += term.matrix(n)
        return T

    @property
    def total_weight(self) -> float:
        return float(
            sum(getattr(t, "lam", 0.0) + getattr(t, "lam_diag", 0.0) + getattr(t, "lam_last", 0.0)
                for t in self.terms)
        )


def _penalty_matrix(T, n):
    if T is None:
        return np.zeros((n, n))
    if isinstance(T, PenaltySpec):
        return T.assemble(n)
    T = np.asarray(T, dtype=float)
    if T.shape != (n, n):
        raise ValidationError(f"penalty has shape {T.shape}, expected {(n, n)}")
    return T


# -- factorization -----------------------------------------------------------


class _SPDSolver:
    """Equilibrated Cholesky factorization with a rank check.

    ``M`` is rescaled to unit diagonal before factoring so that badly scaled
    parametrizations (raw cubic monomials, say) do not trip the pivot test.
    If Cholesky fails but the eigenvalue check finds no rank deficiency, an
    eigendecomposition-based solve is used instead.
    """

    def __init__(self, M, what="system"):
        M = np.asarray(M, dtype=float)
        M = 0.5 * (M + M.T)
        d = np.diag(M).copy()
        if np.any(~np.isfinite(M)):
            raise SingularSystemError(f"{what}: non-finite entries")
        zero = d <= 0
        if zero.any():
            raise SingularSystemError(
                f"{what} is singular: {zero.sum()} parameter(s) carry no information "
                "and no penalty",
                deficiency=int(zero.sum()),
            )
        self.scale = 1.0 / np.sqrt(d)
        Ms = M * self.scale[:, None] * self.scale[None, :]
        self._eig = None
        try:
            self._cho = la.cho_factor(Ms, lower=True, check_finite=False)
            piv = np.diag(self._cho[0]) ** 2
            if piv.min() < PIVOT_TOL * piv.max():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            self._cho = None
            w, V = la.eigh(Ms, check_finite=False)
            deficiency = int(np.sum(w <= PIVOT_TOL * max(w.max(), 0.0)))
            if deficiency:
                raise SingularSystemError(
                    f"{what} is numerically singular: rank deficiency {deficiency} "
                    f"of {len(w)} (relative tolerance {PIVOT_TOL:g})",
                    deficiency=deficiency,
                ) from None
            self._eig = (w, V)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        s = self.scale if rhs.ndim == 1 else self.scale[:, None]
        z = s * rhs
        if self._cho is not None:
            z = la.cho_solve(self._cho, z, check_finite=False)
        else:
            w, V = self._eig
            z = V @ ((V.T @ z) / (w if z.ndim == 1 else w[:, None]))
        return s * z

    def trace_inv_times(self, N) -> float:
        """``trace(M^{-1} N)``."""
        return float(np.trace(self.solve(N)))


# -- solves ------------------------------------------------------------------


@dataclass
class SolveResult:
    """Outcome of a penalized least-squares solve.

    Attributes
    ----------
    beta : ndarray
        Coefficients (row-major vectorization for surface solves).
    dof : float
        Trace of the hat matrix.
    rss : float or None
        Residual sum of squares, when the target energy was supplied.
    penalty : float
        ``beta^T T beta``.
    shape : tuple or None
        Matrix shape of ``beta`` for surface solves.
    """

    beta: np.ndarray
    dof: float
    rss: float | None = None
    penalty: float = 0.0
    shape: tuple | None = None
    extras: dict = field(default_factory=dict)

    def matrix(self) -> np.ndarray:
        if self.shape is None:
            raise ValueError("result is not a surface")
        return self.beta.reshape(self.shape)

    @property
    def objective(self):
        return None if self.rss is None else self.rss + self.penalty


def solve_normal(N, r, T=None, yy=None, what="penalized normal equations") -> SolveResult:
    """Solve ``(N + T) beta = r`` given a normal matrix ``N = X^T X``.

    ``dof`` is ``trace((N + T)^{-1} N)``; ``rss`` is filled when the target
    energy ``yy = y^T y`` is given.
    """
    N = np.asarray(N, dtype=float)
    r = np.asarray(r, dtype=float)
    n = N.shape[0]
    Tm = _penalty_matrix(T, n)
    fac = _SPDSolver(N + Tm, what)
    beta = fac.solve(r)
    dof = fac.trace_inv_times(N)
    penalty = float(beta @ Tm @ beta)
    rss = None
    if yy is not None:
        rss = float(yy - 2.0 * beta @ r + beta @ N @ beta)
    return SolveResult(beta=beta, dof=dof, rss=rss, penalty=penalty)


def solve_dense(X, y, T=None) -> SolveResult:
    """Tikhonov solve on an explicit design matrix.

    Examples
    --------
    >>> res = solve_dense(np.array([[1.0]]), np.array([2.0]), PenaltySpec.of(ScaledIdentity(1.0)))
    >>> float(res.beta[0]), res.dof
    (1.0, 0.5)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError(f"incompatible shapes X{X.shape}, y{y.shape}")
    return solve_normal(X.T @ X, X.T @ y, T, yy=float(y @ y))


def _check_gram(G, B):
    G = np.asarray(G, dtype=float)
    B = np.asarray(B, dtype=float)
    q = G.shape[0]
    if G.shape != (q, q) or B.shape != (q, q):
        raise ValidationError(f"Gram {G.shape} and cross {B.shape} must both be square of one size")
    return G, B, q


def _surface_rss(A, G, B, yy):
    if yy is None:
        return None
    return float(yy - 2.0 * np.trace(A @ B) + np.sum((A @ G) * A))


def solve_rowwise(G, B, T_row=None, yy=None) -> SolveResult:
    """Solve the surface problem whose penalty acts on each row alone.

    Row ``i`` of ``A`` solves ``(G + T_row) a_i = B[:, i]``.

    Parameters
    ----------
    G : (Q, Q) ndarray
        ``sum_d Y(d-1) Y(d-1)^T``.
    B : (Q, Q) ndarray
        Column ``i`` is ``sum_d Y(d-1) Y(d, i)``.
    T_row : PenaltySpec or (Q, Q) ndarray, optional
    yy : float, optional
        ``sum_d ||Y(d)||^2``, enables ``rss``.
    """
    G, B, q = _check_gram(G, B)
    Tm = _penalty_matrix(T_row, q)
    fac = _SPDSolver(G + Tm, "row system G + T")
    A = fac.solve(B).T
    row_dof = fac.trace_inv_times(G)
    penalty = float(np.sum((A @ Tm) * A))
    return SolveResult(
        beta=A.ravel(),
        dof=q * row_dof,
        rss=_surface_rss(A, G, B, yy),
        penalty=penalty,
        shape=(q, q),
        extras={"row_dof": row_dof},
    )


def solve_kron(G, B, lam1: float, lam2: float, yy=None) -> SolveResult:
    """Solve the surface problem with row and column second-difference penalties.

    The normal equations ``(I (x) (G + lam1 D) + lam2 D (x) I) a = rhs`` are
    the Sylvester equation ``(G + lam1 D) W + lam2 W D = B`` for ``W = A^T``.
    Diagonalizing ``D = V diag(mu) V^T`` splits it into ``Q`` independent
    systems ``(G + lam1 D + lam2 mu_k I) w_k = (B V)[:, k]``.

    Raises
    ------
    SingularSystemError
        If some mode system is singular; ``mode`` names it.
    """
    G, B, q = _check_gram(G, B)
    if lam1 < 0 or lam2 < 0 or not np.isfinite(lam1 + lam2):
        raise ValidationError("penalty weights must be finite and >= 0")
    D = second_diff(q).gram()
    mu, V = la.eigh(D)
    mu = np.clip(mu, 0.0, None)
    Bt = B @ V
    Wt = np.empty_like(Bt)
    base = G + lam1 * D
    dof = 0.0
    for k in range(q):
        try:
            fac = _SPDSolver(base + lam2 * mu[k] * np.eye(q), f"mode {k} system")
        except SingularSystemError as exc:
            raise SingularSystemError(str(exc), deficiency=exc.deficiency, mode=k) from None
        Wt[:, k] = fac.solve(Bt[:, k])
        dof += fac.trace_inv_times(G)
    A = (Wt @ V.T).T
    penalty = float(lam1 * np.sum((A @ D) * A) + lam2 * np.sum((D @ A) * A))
    return SolveResult(
        beta=A.ravel(),
        dof=dof,
        rss=_surface_rss(A, G, B, yy),
        penalty=penalty,
        shape=(q, q),
    )


def dof_of(X, T=None) -> float:
    """Equivalent degrees of freedom ``trace(H)`` for an explicit design."""
    X = np.asarray(X, dtype=float)
    N = X.T @ X
    return _SPDSolver(N + _penalty_matrix(T, N.shape[0])).trace_inv_times(N)


def dof_rowwise(G, T_row=None) -> float:
    G = np.asarray(G, dtype=float)
    q = G.shape[0]
    return q * _SPDSolver(G + _penalty_matrix(T_row, q)).trace_inv_times(G)


def dof_kron(G, lam1: float, lam2: float) -> float:
    G = np.asarray(G, dtype=float)
    q = G.shape[0]
    D = second_diff(q).gram()
    mu = np.clip(la.eigvalsh(D), 0.0, None)
    base = G + lam1 * D
    return sum(
        _SPDSolver(base + lam2 * m * np.eye(q)).trace_inv_times(G) for m in mu
    )


def objective_gradient(X, y, T, beta) -> np.ndarray:
    """Gradient ``2 X^T (X beta - y) + 2 T beta`` of the penalized objective."""
    X = np.asarray(X, dtype=float)
    Tm = _penalty_matrix(T, X.shape[1])
    return 2.0 * X.T @ (X @ beta - y) + 2.0 * Tm @ beta
