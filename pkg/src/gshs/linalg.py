"""Matrix-exponential helpers: stacked small matrices and sparse actions."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError

__all__ = ["expm_batched", "expm_nonneg_batch", "expm_action"]

# Pade-13 coefficients for the scaling-and-squaring exponential.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 4.25


def expm_batched(mats: np.ndarray) -> np.ndarray:
    """Exponential of a stack of small dense matrices, shape ``(..., n, n)``.

    Scaling-and-squaring with a single scaling exponent chosen from the
    largest 1-norm in the batch, so every matrix shares the same code path.
    """
    a = np.asarray(mats)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("expected a stack of square matrices")
    dtype = np.complex128 if np.iscomplexobj(a) else np.float64
    a = a.astype(dtype, copy=False)
    n = a.shape[-1]
    norm = float(np.abs(a).sum(axis=-2).max()) if a.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / _PADE13_THETA)))) if norm > _PADE13_THETA else 0
    A = a / (2.0**squarings)

    ident = np.eye(n, dtype=dtype)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    b = _PADE13
    U = A @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    )
    R = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        R = R @ R
    return R


def expm_nonneg_batch(mats: np.ndarray, dt: float, tol: float = 1e-15, max_terms: int = 500) -> np.ndarray:
    """``exp(M*dt)`` for stacked generator matrices (nonnegative off-diagonals).

    Uses uniformization: with ``gamma`` dominating the diagonal the series
    ``exp(M dt) = sum_k Poisson(gamma dt)_k (I + M/gamma)^k`` has nonnegative
    terms only, so the result never carries negative entries from roundoff.
    """
    M = np.asarray(mats, dtype=np.float64)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError("expected a stack of square matrices")
    n = M.shape[-1]
    diag = np.diagonal(M, axis1=-2, axis2=-1)
    gamma = max(float(-diag.min()) if diag.size else 0.0, 0.0)
    lam = gamma * dt
    if lam == 0.0:
        # nothing dominates the diagonal; defer to the generic exponential
        return expm_batched(M * dt)
    if lam > 200.0:
        return expm_batched(M * dt)

    ident = np.broadcast_to(np.eye(n), M.shape)
    P = M / gamma + ident
    weight = np.exp(-lam)
    total_weight = weight
    term = ident.copy()
    acc = weight * term
    for k in range(1, max_terms + 1):
        term = term @ P
        weight *= lam / k
        acc = acc + weight * term
        total_weight += weight
        if 1.0 - total_weight <= tol and k >= lam:
            return acc
    raise NumericalError("uniformization series did not converge")


def _one_norm(B) -> float:
    if sp.issparse(B):
        return float(np.max(np.abs(B).sum(axis=0))) if B.nnz else 0.0
    return float(np.abs(B).sum(axis=0).max())


def expm_action(A, v: np.ndarray, dt: float = 1.0, tol: float = 1e-12, max_terms: int = 160) -> np.ndarray:
    """Action ``exp(A*dt) @ v`` without forming the exponential.

    Shifted, scaled truncated Taylor series: the substep count keeps the
    per-substep norm small so the series stays well conditioned.  For real
    generator matrices the shift equals the most negative diagonal entry,
    which makes every Taylor term nonnegative on nonnegative input.
    """
    if A.shape[0] != A.shape[1] or A.shape[1] != np.shape(v)[0]:
        raise ValueError("operator/vector dimensions do not match")
    diag = A.diagonal()
    cplx = np.iscomplexobj(diag) or np.iscomplexobj(v)
    if cplx:
        mu = complex(diag.sum() / A.shape[0])
    else:
        mu = float(min(diag.min(), 0.0)) if diag.size else 0.0
    B = A.copy()
    if sp.issparse(B):
        B = B.tocsr()
        B.setdiag(diag - mu)
    else:
        B = np.array(B)
        np.fill_diagonal(B, diag - mu)

    norm = _one_norm(B)
    substeps = max(1, int(np.ceil(norm * dt / 4.0)))
    h = dt / substeps
    scale = np.exp(mu * h)
    w = np.array(v, dtype=np.complex128 if cplx else np.float64, copy=True)
    for _ in range(substeps):
        term = w.copy()
        total = w.copy()
        small_streak = 0
        for k in range(1, max_terms + 1):
            term = B.dot(term) * (h / k)
            total += term
            ref = max(float(np.abs(total).max()), np.finfo(float).tiny)
            if float(np.abs(term).max()) <= tol * ref:
                small_streak += 1
                if small_streak >= 2:
                    break
            else:
                small_streak = 0
        else:
            raise NumericalError("matrix exponential action did not converge")
        w = total * scale
    return w
