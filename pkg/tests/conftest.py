import datetime as dt

import numpy as np
import pytest

from loadcast.calendar import SpecialDayCalendar, day_serial
from loadcast.experiment import SyntheticSpec, synth_generate
from loadcast.series import TrainingSet


def var_training(q, n, seed=0, A=None, noise=1.0):
    """Pairs from a stable VAR(1) ``y_t = A y_{t-1} + noise * e_t``."""
    rng = np.random.default_rng(seed)
    if A is None:
        A = 0.4 * rng.standard_normal((q, q)) / np.sqrt(q)
    burn = 100 if noise > 0 else 0
    Y = np.zeros((n + burn + 1, q))
    Y[0] = rng.standard_normal(q) * (noise if noise > 0 else 1.0)
    for t in range(1, n + burn + 1):
        Y[t] = A @ Y[t - 1] + noise * rng.standard_normal(q)
    Y = Y[burn:]
    return TrainingSet(Y[:-1], Y[1:], np.arange(1000, 1000 + n)), A


def second_diff_matrix(n):
    """Explicit (n-2) x n stencil [1, -2, 1], built independently of the package."""
    return np.diff(np.eye(n), n=2, axis=0)


def lifted_design(train):
    """Explicit design for ``vec_rows(A)``: row (d, i) holds Y(d-1) in block i."""
    X0, Z = train.regressors, train.targets
    n, q = X0.shape
    X = np.zeros((n * q, q * q))
    for d in range(n):
        for i in range(q):
            X[d * q + i, i * q:(i + 1) * q] = X0[d]
    return X, Z.ravel()


def reference_tikhonov(X, y, T):
    M = X.T @ X + T
    beta = np.linalg.solve(M, X.T @ y)
    dof = np.trace(np.linalg.solve(M, X.T @ X))
    return beta, dof


@pytest.fixture(scope="session")
def default_calendar():
    return SpecialDayCalendar.default()


@pytest.fixture(scope="session")
def empty_calendar():
    return SpecialDayCalendar.empty()


@pytest.fixture(scope="session")
def synthetic_years():
    """Four years (2015-2018) of synthetic load on the default calendar."""
    spec = SyntheticSpec(n_days=4 * 365 + 1, start="2015-01-01", seed=3)
    load, _ = synth_generate(spec)
    return load


def serial(text):
    return day_serial(dt.date.fromisoformat(text))


def rbf_map(q, sigma, m):
    """Columns: cubic monomials then Gaussian bumps, over vec_rows of a q x q grid."""
    pts = [(i, j) for i in range(1, q + 1) for j in range(1, q + 1)]
    cols = []
    for a, b in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]:
        cols.append([i**a * j**b for i, j in pts])
    centres = [q * k / m for k in range(m + 1)]
    for w in centres:
        for v in centres:
            cols.append([np.exp(-((i - w) ** 2 + (j - v) ** 2) / (2 * sigma**2)) for i, j in pts])
    return np.array(cols, dtype=float).T


def edge_map(q, with_last):
    """Selection matrix from edge parameters to vec_rows(A), plus the two index chains."""
    n = 2 * q - 1 if with_last else q
    S = np.zeros((q * q, n))
    diag_chain, last_chain = [], []
    for i in range(q):
        k = 2 * i if with_last else i
        S[i * q + i, k] = 1.0
        diag_chain.append(k)
        if with_last and i < q - 1:
            S[i * q + q - 1, k + 1] = 1.0
            last_chain.append(k + 1)
    if with_last:
        last_chain.append(diag_chain[-1])
    return S, diag_chain, last_chain


def chain_penalty(n, chain, lam):
    T = np.zeros((n, n))
    Dm = second_diff_matrix(len(chain))
    T[np.ix_(chain, chain)] = lam * Dm.T @ Dm
    return T


def reference_problem(kind, train, **hyper):
    """Brute-force (design, target, penalty, map) for any estimator on small q.

    The surface is ``vec_rows(A) = M beta``; the explicit design is ``X M``.
    """
    X, y = lifted_design(train)
    q = train.n_quarters
    Dm = second_diff_matrix(q)
    D = Dm.T @ Dm
    if kind in ("OLS", "TA", "TS"):
        M = np.eye(q * q)
        if kind == "OLS":
            T = np.zeros((q * q, q * q))
        elif kind == "TA":
            T = hyper["lam"] * np.eye(q * q)
        else:
            T = hyper["lam1"] * np.kron(np.eye(q), D) + hyper["lam2"] * np.kron(D, np.eye(q))
    elif kind == "RBF":
        M = rbf_map(q, hyper.get("sigma", 4.0), hyper.get("m", 12))
        p = M.shape[1]
        T = np.diag([0.0] * 10 + [hyper["lam"]] * (p - 10))
    elif kind == "TE":
        M, dchain, lchain = edge_map(q, True)
        n = M.shape[1]
        T = chain_penalty(n, dchain, hyper["lam_diag"]) + chain_penalty(n, lchain, hyper["lam_last"])
    elif kind == "OnE":
        M, dchain, _ = edge_map(q, False)
        T = chain_penalty(q, dchain, hyper["lam_diag"])
    else:
        raise ValueError(kind)
    return X @ M, y, T, M


def reference_fit(kind, train, **hyper):
    Xe, y, T, M = reference_problem(kind, train, **hyper)
    beta, dof = reference_tikhonov(Xe, y, T)
    return (M @ beta).reshape(train.n_quarters, train.n_quarters), beta, dof
