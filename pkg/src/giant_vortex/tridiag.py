"""Symmetric tridiagonal eigenpairs: Sturm-sequence bisection + inverse iteration."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


class EigenSolverError(RuntimeError):
    pass


def sturm_count(diag, off_sq, x: float) -> int:
    """Number of eigenvalues strictly below `x`.

    `diag` and `off_sq` are plain lists (diagonal, squared off-diagonal); the
    LDL^T pivots of T - x I are counted for negative sign.
    """
    count = 0
    d = 1.0
    tiny = 1e-300
    prev_b2 = 0.0
    for a, b2 in zip(diag, off_sq):
        d = (a - x) - prev_b2 / d
        if d == 0.0:
            d = -tiny
        if d < 0.0:
            count += 1
        prev_b2 = b2
    return count


def gershgorin_bounds(diag: np.ndarray, off: np.ndarray) -> tuple[float, float]:
    rad = np.zeros_like(diag)
    rad[:-1] += np.abs(off)
    rad[1:] += np.abs(off)
    return float(np.min(diag - rad)), float(np.max(diag + rad))


def bisect_eigenvalue(diag, off, k: int, rtol: float = 4e-16, max_iter: int = 200,
                      lower: float | None = None, upper: float | None = None) -> float:
    """The k-th smallest eigenvalue (k = 0 is the lowest) by bisection."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    if not 0 <= k < len(diag):
        raise ValueError(f"eigenvalue index {k} out of range")
    lo, hi = gershgorin_bounds(diag, off)
    if lower is not None:
        lo = max(lo, lower)
    if upper is not None:
        hi = min(hi, upper)
    d_list = diag.tolist()
    b2_list = (off * off).tolist() + [0.0]
    if sturm_count(d_list, b2_list, lo) > k or sturm_count(d_list, b2_list, hi) <= k:
        raise EigenSolverError("bisection bracket does not contain the requested eigenvalue")
    scale = max(abs(lo), abs(hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * scale or mid in (lo, hi):
            return mid
        if sturm_count(d_list, b2_list, mid) > k:
            hi = mid
        else:
            lo = mid
    raise EigenSolverError(f"bisection for eigenvalue {k} did not converge")


def tridiag_matvec(diag, off, v):
    out = diag * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def inverse_iteration(diag, off, shift: float, n_iter: int = 4, seed: int = 0,
                      orth: list[np.ndarray] | None = None) -> np.ndarray:
    """Unit eigenvector for the eigenvalue nearest `shift`."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    n = len(diag)
    # nudge off the eigenvalue so the shifted matrix stays numerically invertible
    eps = 1e-12 * max(1.0, abs(shift))
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag - (shift - eps)
    ab[2, :-1] = off
    v = np.random.default_rng(seed).standard_normal(n)
    for _ in range(n_iter):
        if orth:
            for q in orth:
                v -= (q @ v) * q
        v = solve_banded((1, 1), ab, v)
        v /= np.linalg.norm(v)
    if orth:
        for q in orth:
            v -= (q @ v) * q
        v /= np.linalg.norm(v)
    return v


def lowest_eigenpairs(diag, off, how_many: int = 2, seed: int = 0):
    """Lowest `how_many` eigenpairs of the symmetric tridiagonal matrix.

    Returns ``(values, vectors)`` with vectors as columns of unit 2-norm.
    Eigenvalues come from bisection; the vectors from inverse iteration at the
    bisected value, then the value is polished by the Rayleigh quotient.
    """
    values, vectors = [], []
    for k in range(how_many):
        lam = bisect_eigenvalue(diag, off, k)
        v = inverse_iteration(diag, off, lam, seed=seed + k, orth=vectors)
        values.append(float(v @ tridiag_matvec(diag, off, v)))
        vectors.append(v)
    return np.array(values), np.column_stack(vectors)
