"""
Dense complex linear-algebra kernel.

Thin, validated wrappers around LAPACK (via scipy.linalg) and ARPACK
(via scipy.sparse.linalg) that fix the output conventions the rest of the
package relies on:

* singular values are returned in descending order;
* eigenvalues are sorted by descending magnitude, ties broken by descending
  real part and then descending imaginary part;
* every eigenvector is unit norm with its largest-modulus component made
  real positive, so identical inputs give identical outputs.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import InvalidInput, IterationLimit

DENSE_CAP = 4096

# relative decimal places used to decide that two magnitudes tie
_TIE_DECIMALS = 12


class SVDResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    Vh: np.ndarray


@dataclass(frozen=True)
class EigenSet:
    """Eigenvalues sorted by descending magnitude, with aligned eigenvectors.

    ``vectors`` holds eigenvectors as columns and is ``None`` when only
    eigenvalues were requested. ``values_only`` is set when the matrix is
    numerically defective, i.e. the returned vectors fail the residual
    check or are not linearly independent.
    """

    values: np.ndarray
    vectors: Optional[np.ndarray] = None
    values_only: bool = False

    def __len__(self):
        return len(self.values)


def _check_finite(A):
    A = np.asarray(A)
    if A.ndim != 2:
        raise InvalidInput(f"expected a matrix, got an array with {A.ndim} dimensions")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return A


def svd(A) -> SVDResult:
    """Thin SVD ``A = U @ diag(S) @ Vh`` with ``S`` descending."""
    A = _check_finite(A)
    try:
        U, S, Vh = sla.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        U, S, Vh = sla.svd(A, full_matrices=False, lapack_driver="gesvd")
    return SVDResult(U, S, Vh)


def sort_order(values) -> np.ndarray:
    """Permutation sorting ``values`` by |v| desc, then Re desc, then Im desc."""
    values = np.asarray(values, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    mag = np.round(np.abs(values) / scale, _TIE_DECIMALS)
    re = np.round(values.real / scale, _TIE_DECIMALS)
    return np.lexsort((-values.imag, -re, -mag))


def fix_phase(vectors):
    """Normalise columns and make each one's largest-modulus entry real positive."""
    V = np.array(vectors, dtype=complex, copy=True)
    if V.ndim == 1:
        return fix_phase(V[:, None])[:, 0]
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0] = 1.0
    V /= norms
    idx = np.argmax(np.abs(V), axis=0)
    pivots = V[idx, np.arange(V.shape[1])]
    phases = np.ones_like(pivots)
    nz = np.abs(pivots) > 0
    phases[nz] = np.conj(pivots[nz]) / np.abs(pivots[nz])
    return V * phases


def _defective(A, values, vectors, norm_A):
    resid = np.linalg.norm(A @ vectors - vectors * values, axis=0)
    if np.any(resid > 1e-8 * max(norm_A, 1e-300)):
        return True
    # coinciding eigenvalues with parallel eigenvectors signal a Jordan block
    tol = 1e-6 * max(norm_A, 1.0)
    n = len(values)
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        cluster = np.flatnonzero(np.abs(values - values[i]) < tol)
        seen[cluster] = True
        if len(cluster) > 1:
            sv = np.linalg.svd(vectors[:, cluster], compute_uv=False)
            if sv[-1] < 1e-6:
                return True
    return False


def eig_dense(A, vectors: bool = True, cap: int = DENSE_CAP) -> EigenSet:
    """Full eigendecomposition of a general complex square matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
    vectors : bool
        Also compute eigenvectors (columns of ``EigenSet.vectors``).
    cap : int
        Largest dimension accepted on the dense path.
    """
    A = _check_finite(A)
    n, m = A.shape
    if n != m:
        raise InvalidInput(f"matrix must be square, got {A.shape}")
    if n > cap:
        raise InvalidInput(f"dimension {n} exceeds dense cap {cap}")
    if not vectors:
        w = sla.eigvals(A)
        return EigenSet(w[sort_order(w)].astype(complex))
    w, V = sla.eig(A)
    order = sort_order(w)
    w = w[order].astype(complex)
    V = fix_phase(V[:, order])
    flag = _defective(A, w, V, np.linalg.norm(A))
    return EigenSet(w, V, values_only=flag)


def eigh_values(H) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, descending."""
    H = _check_finite(H)
    return sla.eigvalsh(H)[::-1]


def dominant_eigs(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int = 1,
    maxiter: Optional[int] = None,
    tol: float = 0.0,
    dense_below: int = 64,
) -> EigenSet:
    """Top-``k`` magnitude eigenpairs of the linear map ``apply``.

    Uses implicitly restarted Arnoldi (ARPACK). Small problems, and
    requests for nearly the whole spectrum, are materialised and routed to
    :func:`eig_dense`.

    Raises
    ------
    IterationLimit
        Arnoldi did not converge; ``err.best`` holds the converged part.
    """
    if k < 1 or k > dim:
        raise InvalidInput(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    if dim <= dense_below or k >= dim - 1:
        eye = np.eye(dim, dtype=complex)
        M = np.column_stack([apply(eye[:, j]) for j in range(dim)])
        full = eig_dense(M)
        return EigenSet(full.values[:k], full.vectors[:, :k], full.values_only)

    op = spla.LinearOperator((dim, dim), matvec=lambda x: apply(np.asarray(x).ravel()), dtype=complex)
    # deterministic start vector
    v0 = np.random.default_rng(12345).standard_normal(dim) + 0j
    ncv = min(dim, max(2 * k + 1, 20))
    try:
        w, V = spla.eigs(op, k=k, which="LM", v0=v0, ncv=ncv, maxiter=maxiter, tol=tol)
    except spla.ArpackNoConvergence as err:
        w, V = err.eigenvalues, err.eigenvectors
        order = sort_order(w)
        best = EigenSet(w[order], fix_phase(V[:, order]) if len(w) else V)
        raise IterationLimit(f"Arnoldi did not converge for k={k}", best=best) from err
    order = sort_order(w)
    return EigenSet(w[order].astype(complex), fix_phase(V[:, order]))
