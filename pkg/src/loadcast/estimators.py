"""Estimators of the day-ahead weight surface ``A`` in ``Y(d) ~ A Y(d-1)``.

Six estimators are provided:

========  ==========================================  ====================
kind      model                                       hyperparameters
========  ==========================================  ====================
OLS       unrestricted least squares                  none
TA        ridge on every weight                       lam
TS        second differences along rows and columns   lam1, lam2
RBF       cubic polynomial + Gaussian bumps           lam, sigma, m
TE        diagonal and last column only               lam_diag, lam_last
OnE       diagonal only                               lam_diag
========  ==========================================  ====================

plus the persistence surface ``A = 0`` used as a baseline.

All fits work from the sufficient statistics of a :class:`TrainingSet`
(``G``, ``B`` and the target energy), so their cost does not grow with the
number of training days beyond forming those products.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RankDeficientError, SingularSystemError, ValidationError
from .calendar import date_of, day_serial
from .series import TrainingSet
from .solver import (
    BlockDiag,
    ChainSecondDiff,
    EdgeSecondDiff,
    PenaltySpec,
    ScaledIdentity,
    edge_indices,
    solve_kron,
    solve_normal,
    solve_rowwise,
)

__all__ = [
    "EstimatorKind",
    "WeightSurface",
    "RBFBasis",
    "fit",
    "fit_ols",
    "fit_ta",
    "fit_ts",
    "fit_rbf",
    "fit_te",
    "fit_one",
    "persistence_surface",
    "HYPERPARAMETERS",
]


class EstimatorKind(str, enum.Enum):
    OLS = "OLS"
    TA = "TA"
    TS = "TS"
    RBF = "RBF"
    TE = "TE"
    ONE = "OnE"
    PERSISTENCE = "PERSISTENCE"

    @classmethod
    def parse(cls, value) -> "EstimatorKind":
        if isinstance(value, cls):
            return value
        for kind in cls:
            if kind.value.lower() == str(value).lower():
                return kind
        raise ValidationError(f"unknown estimator kind {value!r}")


# Tunable hyperparameters per kind (RBF's sigma and m are fixed, not tuned).
HYPERPARAMETERS = {
    EstimatorKind.OLS: (),
    EstimatorKind.TA: ("lam",),
    EstimatorKind.TS: ("lam1", "lam2"),
    EstimatorKind.RBF: ("lam",),
    EstimatorKind.TE: ("lam_diag", "lam_last"),
    EstimatorKind.ONE: ("lam_diag",),
    EstimatorKind.PERSISTENCE: (),
}


@dataclass
class WeightSurface:
    """A fitted ``q x q`` weight surface.

    Dense surfaces store the full matrix. Edge surfaces store only the main
    diagonal (``diag``, length ``q``) and, for TE, the last column above the
    corner (``last``, length ``q - 1``); every other entry is zero. Indices
    are zero-based, so the corner entry is ``entry(q - 1, q - 1)``.
    """

    kind: EstimatorKind
    q: int
    dof: float
    dense: np.ndarray | None = None
    diag: np.ndarray | None = None
    last: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    window: tuple | None = None
    rss: float | None = None
    coefficients: np.ndarray | None = None

    def __post_init__(self):
        self.kind = EstimatorKind.parse(self.kind)
        if self.dense is None and self.diag is None:
            raise ValidationError("surface needs dense weights or a diagonal")
        if self.dense is not None and self.dense.shape != (self.q, self.q):
            raise ValidationError(f"dense surface must be {self.q}x{self.q}")
        if self.diag is not None and self.diag.shape != (self.q,):
            raise ValidationError(f"diagonal must have length {self.q}")
        if self.last is not None and self.last.shape != (self.q - 1,):
            raise ValidationError(f"last column must have length {self.q - 1}")

    @property
    def is_sparse(self) -> bool:
        return self.dense is None

    def entry(self, i: int, j: int) -> float:
        if not (0 <= i < self.q and 0 <= j < self.q):
            raise IndexError(f"entry ({i}, {j}) outside {self.q}x{self.q} surface")
        if self.dense is not None:
            return float(self.dense[i, j])
        if i == j:
            return float(self.diag[i])
        if j == self.q - 1 and self.last is not None:
            return float(self.last[i])
        return 0.0

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        A = np.diag(self.diag).astype(float)
        if self.last is not None:
            A[:-1, -1] = self.last
        return A

    def apply(self, y_prev) -> np.ndarray:
        """``A @ y_prev`` using the sparse structure when there is one."""
        y = np.asarray(y_prev, dtype=float)
        if self.dense is not None:
            return self.dense @ y
        out = self.diag * y
        if self.last is not None:
            out[:-1] += self.last * y[-1]
        return out

    @property
    def n_parameters(self) -> int:
        if self.kind is EstimatorKind.RBF and self.coefficients is not None:
            return len(self.coefficients)
        if self.dense is not None:
            return self.q * self.q
        return self.q + (0 if self.last is None else self.q - 1)

    # -- persistence --------------------------------------------------------

    def metadata(self) -> dict:
        window = None
        if self.window is not None:
            window = [date_of(self.window[0]).isoformat(), date_of(self.window[1]).isoformat()]
        return {
            "kind": self.kind.value,
            "q": self.q,
            "hyperparameters": self.params,
            "dof": self.dof,
            "rss": self.rss,
            "training_window": window,
        }

    def save(self, path) -> Path:
        """Write ``q`` rows of comma-separated weights plus ``<path>.json``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.to_dense():
                w.writerow([repr(float(v)) for v in row])
        meta = sidecar_path(path)
        meta.write_text(json.dumps(self.metadata(), indent=2))
        return meta

    @classmethod
    def load(cls, path) -> "WeightSurface":
        path = Path(path)
        A = np.loadtxt(path, delimiter=",", ndmin=2)
        meta_path = sidecar_path(path)
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        kind = EstimatorKind.parse(meta.get("kind", "OLS"))
        q = A.shape[0]
        window = meta.get("training_window")
        if window is not None:
            window = (day_serial(window[0]), day_serial(window[1]))
        common = dict(
            kind=kind, q=q, dof=float(meta.get("dof", np.nan)),
            params=meta.get("hyperparameters", {}), window=window, rss=meta.get("rss"),
        )
        if kind is EstimatorKind.TE:
            return cls(diag=np.diag(A).copy(), last=A[:-1, -1].copy(), **common)
        if kind is EstimatorKind.ONE:
            return cls(diag=np.diag(A).copy(), **common)
        return cls(dense=A, **common)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


# -- helpers -----------------------------------------------------------------


def _stats(train: TrainingSet):
    return train.gram(), train.cross(), train.target_energy()


def _window(train: TrainingSet):
    return (int(train.days[0]), int(train.days[-1]))


def _check_lam(**lams):
    for name, value in lams.items():
        if not np.isfinite(value) or value < 0:
            raise ValidationError(f"{name} must be finite and >= 0, got {value}")


def _basis_normal(F, G, B):
    """Normal matrix and right-hand side for ``A = sum_l beta_l F_l``.

    ``N[l, m] = <F_l, F_m G>`` and ``r[l] = <F_l, B^T>`` (Frobenius).
    """
    p = F.shape[0]
    flat = F.reshape(p, -1)
    FG = (F @ G).reshape(p, -1)
    return flat @ FG.T, flat @ B.T.ravel()


def _edge_basis(q, with_last):
    n = 2 * q - 1 if with_last else q
    F = np.zeros((n, q, q))
    if with_last:
        diag, last = edge_indices(q)
        F[diag, np.arange(q), np.arange(q)] = 1.0
        F[last[:-1], np.arange(q - 1), q - 1] = 1.0
    else:
        F[np.arange(q), np.arange(q), np.arange(q)] = 1.0
    return F


# -- estimators --------------------------------------------------------------


def fit_ols(train: TrainingSet) -> WeightSurface:
    """Unrestricted least squares, one independent regression per row.

    Raises
    ------
    RankDeficientError
        If the Gram matrix is singular (fewer than ``q`` informative pairs).
    """
    G, B, yy = _stats(train)
    try:
        res = solve_rowwise(G, B, None, yy=yy)
    except SingularSystemError as exc:
        raise RankDeficientError(
            f"OLS normal equations are rank deficient ({len(train)} pairs for "
            f"{train.n_quarters} regressors): {exc}; use a regularized estimator",
            deficiency=exc.deficiency,
        ) from None
    return WeightSurface(EstimatorKind.OLS, train.n_quarters, res.dof, dense=res.matrix(),
                         window=_window(train), rss=res.rss)


def fit_ta(train: TrainingSet, lam: float) -> WeightSurface:
    """Ridge (amplitude) regularization, ``T = lam * I``."""
    _check_lam(lam=lam)
    G, B, yy = _stats(train)
    res = solve_rowwise(G, B, PenaltySpec.of(ScaledIdentity(lam)), yy=yy)
    return WeightSurface(EstimatorKind.TA, train.n_quarters, res.dof, dense=res.matrix(),
                         params={"lam": lam}, window=_window(train), rss=res.rss)


def fit_ts(train: TrainingSet, lam1: float, lam2: float) -> WeightSurface:
    """Smoothness regularization of second differences.

    ``lam1`` weighs differences along each row (across regressor
    quarter-hours), ``lam2`` along each column (across target quarter-hours).
    """
    _check_lam(lam1=lam1, lam2=lam2)
    G, B, yy = _stats(train)
    res = solve_kron(G, B, lam1, lam2, yy=yy)
    return WeightSurface(EstimatorKind.TS, train.n_quarters, res.dof, dense=res.matrix(),
                         params={"lam1": lam1, "lam2": lam2}, window=_window(train),
                         rss=res.rss)


@dataclass(frozen=True)
class RBFBasis:
    """Cubic polynomial plus Gaussian radial basis on a ``q x q`` grid.

    Grid coordinates run ``1..q``; centres sit at ``q * k / m`` for
    ``k = 0..m`` along each axis, giving ``(m + 1)**2`` radial functions.
    """

    q: int = 96
    sigma: float = 4.0
    m: int = 12

    def __post_init__(self):
        if self.sigma <= 0 or self.m < 1:
            raise ValidationError("RBF basis needs sigma > 0 and m >= 1")

    @property
    def centres(self) -> np.ndarray:
        return self.q * np.arange(self.m + 1) / self.m

    def grid(self):
        i, j = np.meshgrid(np.arange(1, self.q + 1, dtype=float),
                           np.arange(1, self.q + 1, dtype=float), indexing="ij")
        return i, j

    def polynomial(self) -> np.ndarray:
        """``(q*q, 10)`` monomials 1, i, j, i^2, ij, j^2, i^3, i^2 j, i j^2, j^3."""
        i, j = (v.ravel() for v in self.grid())
        return np.column_stack([np.ones_like(i), i, j, i**2, i * j, j**2,
                                i**3, i**2 * j, i * j**2, j**3])

    def radial(self) -> np.ndarray:
        """``(q*q, (m+1)**2)`` Gaussian bumps, centre index ``(k, z)`` row-major."""
        i, j = (v.ravel() for v in self.grid())
        w = self.centres
        di = (i[:, None] - w[None, :]) ** 2
        dj = (j[:, None] - w[None, :]) ** 2
        r2 = di[:, :, None] + dj[:, None, :]
        return np.exp(-r2 / (2.0 * self.sigma**2)).reshape(len(i), -1)

    def design(self) -> np.ndarray:
        return np.hstack([self.polynomial(), self.radial()])


def fit_rbf(train: TrainingSet, lam: float, sigma: float = 4.0, m: int = 12) -> WeightSurface:
    """Cubic trend plus ridge-penalized Gaussian bumps.

    The polynomial coefficients are unpenalized; ``lam`` shrinks the
    ``(m + 1)**2`` bump amplitudes.
    """
    _check_lam(lam=lam)
    q = train.n_quarters
    basis = RBFBasis(q=q, sigma=sigma, m=m)
    M = basis.design()
    p = M.shape[1]
    if p > len(train) * q:
        raise ValidationError(f"RBF model has {p} parameters but only {len(train) * q} observations")
    F = M.T.reshape(p, q, q)
    G, B, yy = _stats(train)
    N, r = _basis_normal(F, G, B)
    res = solve_normal(N, r, PenaltySpec.of(BlockDiag(10, p - 10, lam)), yy=yy,
                       what="RBF normal equations")
    A = (M @ res.beta).reshape(q, q)
    return WeightSurface(EstimatorKind.RBF, q, res.dof, dense=A,
                         params={"lam": lam, "sigma": sigma, "m": m}, window=_window(train),
                         rss=res.rss, coefficients=res.beta)


def fit_te(train: TrainingSet, lam_diag: float, lam_last: float) -> WeightSurface:
    """Two-edge model: only the diagonal and the last column are free.

    The ``2q - 1`` coefficients are interleaved as
    ``(a11, a1q, a22, a2q, ..., aqq)``; the corner ``aqq`` closes both
    second-difference chains.
    """
    _check_lam(lam_diag=lam_diag, lam_last=lam_last)
    q = train.n_quarters
    if len(train) < 3:
        raise ValidationError("two-edge model needs at least 3 training pairs")
    G, B, yy = _stats(train)
    N, r = _basis_normal(_edge_basis(q, True), G, B)
    res = solve_normal(N, r, PenaltySpec.of(EdgeSecondDiff(lam_diag, lam_last, q)), yy=yy,
                       what="two-edge normal equations")
    diag_idx, last_idx = edge_indices(q)
    return WeightSurface(EstimatorKind.TE, q, res.dof, diag=res.beta[diag_idx].copy(),
                         last=res.beta[last_idx[:-1]].copy(),
                         params={"lam_diag": lam_diag, "lam_last": lam_last},
                         window=_window(train), rss=res.rss, coefficients=res.beta)


def fit_one(train: TrainingSet, lam_diag: float) -> WeightSurface:
    """One-edge model: ``Y(d, k) ~ a_k Y(d-1, k)`` with smooth ``a``."""
    _check_lam(lam_diag=lam_diag)
    q = train.n_quarters
    G, B, yy = _stats(train)
    # diagonal basis: N = diag(G), r = diag(B)
    N = np.diag(np.diag(G))
    r = np.diag(B).copy()
    T = PenaltySpec.of(ChainSecondDiff(lam_diag, tuple(range(q))))
    res = solve_normal(N, r, T, yy=yy, what="one-edge normal equations")
    return WeightSurface(EstimatorKind.ONE, q, res.dof, diag=res.beta.copy(),
                         params={"lam_diag": lam_diag}, window=_window(train), rss=res.rss,
                         coefficients=res.beta)


def persistence_surface(q: int = 96) -> WeightSurface:
    """``A = 0``: tomorrow's load equals the load one week earlier."""
    return WeightSurface(EstimatorKind.PERSISTENCE, q, 0.0, diag=np.zeros(q))


def fit(kind, train: TrainingSet, **hyper) -> WeightSurface:
    """Dispatch to the estimator named by ``kind``."""
    kind = EstimatorKind.parse(kind)
    if kind is EstimatorKind.OLS:
        return fit_ols(train)
    if kind is EstimatorKind.TA:
        return fit_ta(train, hyper["lam"])
    if kind is EstimatorKind.TS:
        return fit_ts(train, hyper["lam1"], hyper["lam2"])
    if kind is EstimatorKind.RBF:
        return fit_rbf(train, hyper["lam"], hyper.get("sigma", 4.0), hyper.get("m", 12))
    if kind is EstimatorKind.TE:
        return fit_te(train, hyper["lam_diag"], hyper["lam_last"])
    if kind is EstimatorKind.ONE:
        return fit_one(train, hyper["lam_diag"])
    return persistence_surface(train.n_quarters)
