"""Dense symmetric / SPD linear algebra.

Factorizations, matrix powers, geodesics on the SPD manifold, and the two
divergences used by the solvers. All functions are pure: they validate
their inputs, never mutate them, and return freshly allocated arrays.

Matrices are plain float64 ``numpy`` arrays. A "symmetric" matrix here is
exactly symmetric (``m[i, j] == m[j, i]``); :func:`symmetrize` produces one
and every operation whose result is mathematically symmetric re-symmetrizes
before returning, so floating-point asymmetry never accumulates.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceError, DimensionMismatch, NotPositiveDefinite

# Relative positive-definiteness guard: min eigenvalue must exceed
# SPD_TOLERANCE times the max eigenvalue.
SPD_TOLERANCE = 1e-12


class EigenDecomposition(NamedTuple):
    """Spectral factorization of a symmetric matrix, V diag(w) V^T.

    ``eigenvalues`` are sorted ascending; column ``eigenvectors[:, i]``
    pairs with ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_square(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a square float64 array, raising DimensionMismatch otherwise."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionMismatch(f"{name} must have dimension >= 1")
    return a


def _require_same_dim(a: np.ndarray, b: np.ndarray, names: str = "operands") -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(
            f"{names} have mismatched shapes {a.shape} and {b.shape}"
        )


def symmetrize(m) -> np.ndarray:
    """Return (m + m^T) / 2.

    The result is exactly symmetric, entry by entry. Raises
    DimensionMismatch for non-square input.
    """
    a = as_square(m)
    return (a + a.T) / 2


def is_spd(a: np.ndarray, tol: float = SPD_TOLERANCE) -> bool:
    """True iff ``a`` is symmetric with min eigenvalue > tol * max eigenvalue."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if not np.array_equal(a, a.T):
        return False
    w = np.linalg.eigvalsh(a)
    return bool(w[-1] > 0 and w[0] > tol * w[-1])


def check_spd(a, name: str = "matrix", tol: float = SPD_TOLERANCE) -> np.ndarray:
    """Validate that ``a`` is SPD and return it as a float64 array.

    Symmetry must hold exactly (construct inputs with :func:`symmetrize`);
    positive definiteness is checked through the relative eigenvalue guard.
    """
    a = as_square(a, name)
    if not np.array_equal(a, a.T):
        raise NotPositiveDefinite(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(a)
    if not (w[-1] > 0 and w[0] > tol * w[-1]):
        raise NotPositiveDefinite(
            f"{name} is not positive definite "
            f"(min eigenvalue {w[0]:.3e}, max {w[-1]:.3e})"
        )
    return a


def cholesky(a) -> np.ndarray:
    """Lower-triangular L with L L^T = a.

    Raises NotPositiveDefinite when a pivot fails (the matrix is not SPD).
    """
    a = as_square(a, "cholesky input")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc


def sym_eigen(m) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    Raises ConvergenceError if the underlying symmetric solver fails to
    converge (a sign of numerical pathology in the input).
    """
    a = as_square(m, "eigen input")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}") from exc
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def spd_power(a, t: float) -> np.ndarray:
    """Matrix power a^t of an SPD matrix through its eigendecomposition.

    Any real exponent is accepted: t = -1 gives the inverse, 0 the
    identity, 1/2 the principal square root.
    """
    a = as_square(a, "power input")
    w, v = sym_eigen(symmetrize(a))
    if not (w[-1] > 0 and w[0] > SPD_TOLERANCE * w[-1]):
        raise NotPositiveDefinite(
            f"power input is not positive definite (min eigenvalue {w[0]:.3e})"
        )
    return symmetrize((v * w**t) @ v.T)


def spd_inverse(a) -> np.ndarray:
    """Inverse of an SPD matrix via Cholesky solve, symmetrized."""
    a = as_square(a, "inverse input")
    low = cholesky(a)
    inv = scipy.linalg.cho_solve((low, True), np.eye(a.shape[0]))
    return symmetrize(inv)


def _whiten(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """L^{-1} x L^{-T} for y = L L^T, symmetrized."""
    low = cholesky(y)
    z = scipy.linalg.solve_triangular(low, x, lower=True)
    return symmetrize(scipy.linalg.solve_triangular(low, z.T, lower=True).T)


def geodesic(a, b, t: float) -> np.ndarray:
    """Point at parameter t on the SPD geodesic from a to b.

    Computed by the Cholesky-Schur path: factor a = L L^T, form the
    whitened matrix M = L^{-1} b L^{-T} (whose Schur form, being symmetric,
    is its eigendecomposition M = V diag(w) V^T), and return
    L V diag(w^t) V^T L^T. Endpoints are exact: t=0 gives a, t=1 gives b.

    t must lie in [0, 1]; a and b must be SPD of equal dimension.
    """
    a = as_square(a, "geodesic endpoint a")
    b = as_square(b, "geodesic endpoint b")
    _require_same_dim(a, b, "geodesic endpoints")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter t must be in [0, 1], got {t}")
    low = cholesky(a)
    z = scipy.linalg.solve_triangular(low, b, lower=True)
    m = symmetrize(scipy.linalg.solve_triangular(low, z.T, lower=True).T)
    w, v = sym_eigen(m)
    if w[0] <= 0:
        raise NotPositiveDefinite(
            f"geodesic endpoint b is not positive definite "
            f"(whitened min eigenvalue {w[0]:.3e})"
        )
    inner = (v * w**t) @ v.T
    return symmetrize(low @ inner @ low.T)


def riemannian_distance(x, y) -> float:
    """Riemannian (affine-invariant) distance between SPD matrices.

    Equals the Frobenius norm of log(y^{-1/2} x y^{-1/2}), computed as the
    root sum of squared logs of the eigenvalues of the whitened matrix.
    Symmetric in its arguments and zero iff x == y.
    """
    x = as_square(x, "distance operand x")
    y = as_square(y, "distance operand y")
    _require_same_dim(x, y, "distance operands")
    m = _whiten(y, x)
    w = np.linalg.eigvalsh(m)
    if w[0] <= 0:
        raise NotPositiveDefinite(
            f"distance operand is not positive definite "
            f"(whitened min eigenvalue {w[0]:.3e})"
        )
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def sld_divergence(a, a0) -> float:
    """Symmetrized LogDet divergence trace(a a0^{-1}) + trace(a^{-1} a0) - 2d.

    Nonnegative, zero iff a == a0.
    """
    a = as_square(a, "divergence operand a")
    a0 = as_square(a0, "divergence operand a0")
    _require_same_dim(a, a0, "divergence operands")
    d = a.shape[0]
    low_a = cholesky(a)
    low_a0 = cholesky(a0)
    # trace(a a0^{-1}) as the elementwise product with the explicit inverse
    t1 = float(np.sum(a * scipy.linalg.cho_solve((low_a0, True), np.eye(d))))
    t2 = float(np.sum(a0 * scipy.linalg.cho_solve((low_a, True), np.eye(d))))
    return max(t1 + t2 - 2 * d, 0.0)


def loewner_less(a, b) -> bool:
    """True iff a is strictly below b in the Loewner order (b - a is PD)."""
    a = as_square(a, "order operand a")
    b = as_square(b, "order operand b")
    _require_same_dim(a, b, "order operands")
    w = np.linalg.eigvalsh(symmetrize(b - a))
    return bool(w[0] > 0)
