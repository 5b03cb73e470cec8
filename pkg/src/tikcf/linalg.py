"""Dense linear-algebra kernels.

The generalized SVD here uses the "CS" convention::

    A = U @ diag(c) @ X.T
    L = V @ diag(s) @ X.T,      c**2 + s**2 == 1

so a Tikhonov solve ``min ||A x - b||^2 + lam ||L x - d||^2`` becomes a
division per generalized singular pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    InputError,
    NoBracket,
    NonFinite,
    NotPositiveDefinite,
    RankDeficient,
    SingularFilter,
)

_EPS = np.finfo(float).eps
_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class GsvdFactors:
    """Factors of a matrix pair ``(A, L)`` with ``n`` shared columns.

    ``U`` is ``m x n`` and ``V`` is ``p x n``. When ``m < n`` (or ``p < n``)
    only the columns paired with a nonzero ``c`` (or ``s``) can be
    orthonormal; the rest are truncated completion vectors.
    """

    U: np.ndarray
    V: np.ndarray
    X: np.ndarray
    c: np.ndarray
    s: np.ndarray
    # inverse transpose of X, kept so solves avoid refactoring
    XinvT: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        """Generalized singular values ``c / s`` (``inf`` where ``s == 0``)."""
        with np.errstate(divide="ignore"):
            return np.where(self.s > 0, self.c / np.where(self.s > 0, self.s, 1.0), np.inf)


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError(f"bracket requires lo < hi, got ({self.lo}, {self.hi})")


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :] if M.size else M.reshape(0, 0)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name} has non-finite entries")
    return M


def gsvd(A, L) -> GsvdFactors:
    """Generalized SVD of ``(A, L)``.

    The stacked matrix ``[A; L]`` is QR-factored and its orthonormal factor
    ``[Q1; Q2]`` is split by a cosine-sine decomposition. Pairs with
    ``c <= 1/sqrt(2)`` take ``V`` from a QR of ``Q2 Z``; the remaining pairs
    are re-diagonalized by an SVD on the orthogonal complement so that small
    ``s`` values keep orthonormal ``V`` columns.

    Raises
    ------
    DimensionMismatch
        If ``A`` and ``L`` have different column counts.
    RankDeficient
        If ``[A; L]`` does not have full column rank.
    """
    A = _as_matrix(A, "A")
    L = _as_matrix(L, "L")
    if L.size == 0 and L.shape[1] == 0:
        L = np.zeros((0, A.shape[1]))
    m, n = A.shape
    p, nl = L.shape
    if nl != n:
        raise DimensionMismatch(f"A has {n} columns but L has {nl}")
    if n == 0:
        raise DimensionMismatch("matrices must have at least one column")
    if m + p < n:
        raise RankDeficient(f"stacked matrix is {m + p} x {n}; rank < {n}")

    Q, R = np.linalg.qr(np.vstack([A, L]))
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= max(m + p, n) * _EPS * sv[0]:
        raise RankDeficient(f"stacked matrix [A; L] is rank deficient (cond ~ {sv[0] / max(sv[-1], 1e-300):.3g})")

    mp, pp = max(m, n), max(p, n)
    Q1 = np.zeros((mp, n))
    Q1[:m] = Q[:m]
    Q2 = np.zeros((pp, n))
    Q2[:p] = Q[m:]

    W, c, Zt = np.linalg.svd(Q1, full_matrices=False)
    W, c, Z = W[:, ::-1], np.clip(c[::-1], 0.0, 1.0), Zt.T[:, ::-1]
    k = int(np.count_nonzero(c <= _SQRT_HALF))

    T = Q2 @ Z
    if k:
        Qt, Rt = np.linalg.qr(T[:, :k], mode="complete")
        sign = np.where(np.diag(Rt)[:k] < 0, -1.0, 1.0)
        V1 = Qt[:, :k] * sign
        Vc = Qt[:, k:]
    else:
        V1 = np.zeros((pp, 0))
        Vc = np.eye(pp)
    c1 = c[:k]
    s1 = np.sqrt(np.maximum(0.0, 1.0 - c1 * c1))

    if k < n:
        G = Vc.T @ T[:, k:]
        Y, s2, Pt = np.linalg.svd(G, full_matrices=False)
        s2 = np.clip(s2, 0.0, 1.0)
        V2 = Vc @ Y
        Z2 = Z[:, k:] @ Pt.T
        M2 = Q1 @ Z2
        U2 = M2 / np.linalg.norm(M2, axis=0)
        c2 = np.sqrt(np.maximum(0.0, 1.0 - s2 * s2))
        Zf = np.hstack([Z[:, :k], Z2])
    else:
        U2 = np.zeros((mp, 0))
        V2 = np.zeros((pp, 0))
        c2 = s2 = np.zeros(0)
        Zf = Z

    U = np.hstack([W[:, :k], U2])[:m]
    V = np.hstack([V1, V2])[:p]
    X = R.T @ Zf
    XinvT = scipy.linalg.solve_triangular(R, Zf)
    return GsvdFactors(U=U, V=V, X=X, c=np.concatenate([c1, c2]),
                       s=np.concatenate([s1, s2]), XinvT=XinvT)


def _xinv_t(f: GsvdFactors) -> np.ndarray:
    if f.XinvT is not None:
        return f.XinvT
    return np.linalg.inv(f.X.T)


def tikhonov_solve_gsvd(f: GsvdFactors, b, lam: float, d=None) -> np.ndarray:
    """Minimize ``||A x - b||^2 + lam * ||L x - d||^2`` from GSVD factors.

    ``d`` defaults to zero, giving the classical ``lam * ||L x||^2`` penalty.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (f.U.shape[0],):
        raise DimensionMismatch(f"b has shape {b.shape}, expected ({f.U.shape[0]},)")
    if lam < 0 or not math.isfinite(lam):
        raise InputError(f"lam must be finite and >= 0, got {lam}")
    denom = f.c * f.c + lam * f.s * f.s
    if np.any(denom <= 1e-28):
        raise SingularFilter("c_i^2 + lam*s_i^2 vanishes; A is rank deficient and lam == 0")
    rhs = f.c * (f.U.T @ b)
    if d is not None:
        d = np.asarray(d, dtype=float)
        if d.shape != (f.V.shape[0],):
            raise DimensionMismatch(f"d has shape {d.shape}, expected ({f.V.shape[0]},)")
        rhs = rhs + lam * f.s * (f.V.T @ d)
    return _xinv_t(f) @ (rhs / denom)


def dense_normal_solve(terms: Sequence, regs: Sequence = (), ridge: float = 0.0) -> np.ndarray:
    """Brute-force minimizer of a weighted sum of squared residuals.

    Parameters
    ----------
    terms : sequence of ``(A, b, weight)``
        Data terms ``weight * ||A x - b||^2``.
    regs : sequence of ``(L, weight)`` or ``(L, weight, center)``
        Penalties ``weight * ||L (x - center)||^2``; ``center`` defaults to 0.
    ridge : float
        Coefficient of ``||x||^2``.

    The normal equations are factored by Cholesky; a failed factorization
    raises :class:`NotPositiveDefinite`.
    """
    if not terms and not regs:
        raise DimensionMismatch("need at least one term")
    first = terms[0][0] if terms else regs[0][0]
    n = np.atleast_2d(np.asarray(first, dtype=float)).shape[1]
    H = ridge * np.eye(n)
    g = np.zeros(n)
    for A, b, w in terms:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float)
        if A.shape[1] != n or A.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"term shapes {A.shape} / {b.shape} incompatible with n={n}")
        H += w * A.T @ A
        g += w * A.T @ b
    for reg in regs:
        Lm, r = np.atleast_2d(np.asarray(reg[0], dtype=float)), reg[1]
        if Lm.shape[1] != n:
            raise DimensionMismatch(f"regularizer has {Lm.shape[1]} columns, expected {n}")
        LtL = Lm.T @ Lm
        H += r * LtL
        if len(reg) > 2 and reg[2] is not None:
            g += r * LtL @ np.asarray(reg[2], dtype=float)
    try:
        cf = scipy.linalg.cho_factor(H)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return scipy.linalg.cho_solve(cf, g)


def zero_find(phi: Callable[[float], float], target: float, bracket: Bracket,
              tol: float = 1e-10, max_expand: int = 60, max_iter: int = 500) -> float:
    """Bisection root of ``phi(t) = target`` for monotone ``phi``.

    If the bracket has no sign change it is widened by doubling, toward the
    side the monotone trend points to, at most ``max_expand`` times.
    Bisection stops once ``|phi(t) - target| <= tol`` or the bracket cannot
    be split further in floating point.
    """
    if tol <= 0:
        raise InputError("tol must be positive")

    def g(t):
        val = float(phi(t))
        if not math.isfinite(val):
            raise NonFinite(f"phi({t!r}) = {val}")
        return val - target

    def straddles(a, b):
        return a == 0.0 or b == 0.0 or (a < 0) != (b < 0)

    lo, hi = float(bracket.lo), float(bracket.hi)
    glo, ghi = g(lo), g(hi)
    expansions = 0
    while not straddles(glo, ghi):
        if expansions == max_expand:
            raise NoBracket(f"no sign change after {max_expand} expansions (last bracket [{lo}, {hi}])")
        expansions += 1
        width = hi - lo
        if ghi == glo:
            lo, hi = lo - width, hi + width
            glo, ghi = g(lo), g(hi)
        elif (ghi > glo) == (ghi < 0):
            # root lies above hi
            lo, glo = hi, ghi
            hi = hi + 2.0 * width
            ghi = g(hi)
        else:
            hi, ghi = lo, glo
            lo = lo - 2.0 * width
            glo = g(lo)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if abs(glo) <= tol and abs(glo) <= abs(ghi):
        return lo
    if abs(ghi) <= tol:
        return hi

    best_t, best_g = (lo, glo) if abs(glo) < abs(ghi) else (hi, ghi)
    for _ in range(max_iter):
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if abs(gm) < abs(best_g):
            best_t, best_g = mid, gm
        if abs(gm) <= tol:
            return mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
    return best_t


def residual_norm(f: GsvdFactors, b, lam: float) -> float:
    """``||A x(lam) - b||`` evaluated in the GSVD basis."""
    b = np.asarray(b, dtype=float)
    beta = f.U.T @ b
    denom = f.c * f.c + lam * f.s * f.s
    fitted = f.U @ (f.c * f.c * beta / denom)
    return float(np.linalg.norm(fitted - b))


def discrepancy_lambda(f: GsvdFactors, b, noise_norm: float, safety: float = 1.05,
                       tol: float = 1e-10) -> float:
    """Regularization weight whose residual matches ``safety * noise_norm``.

    The residual norm is nondecreasing in ``lam``; the root is bracketed
    starting from ``[0, 1]`` and found by :func:`zero_find`.
    """
    target = safety * noise_norm
    return zero_find(lambda lam: residual_norm(f, b, max(lam, 0.0)), target,
                     Bracket(0.0, 1.0), tol=tol * max(1.0, target))
