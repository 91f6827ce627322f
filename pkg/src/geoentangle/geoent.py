"""
Global geometric entanglement per block of an infinite MPS.

Transfer matrix
---------------
For a canonical iMPS the block transfer matrix ``A(L)`` is the chi² x chi²
matrix with rows ``(α α')`` and columns ``(β β')``::

    A(1)[(α α'), (β β')] = Σ_s √(λ_α λ_α') Γ^s_{αβ} conj(Γ^s_{α'β'}) √(λ_β λ_β')

and ``A(L) = A(1)^L``. Its dominant eigenvalue is 1 with eigenvector
``λ_α δ_{αα'}``; the modulus of the second one sets the correlation length.

Double maximisation
-------------------
For a product of identical block states φ the per-block fidelity is governed
by ``B(φ) = √Λ M(φ) √Λ`` with ``M_{αβ} = <φ|τ_{αβ}>``. We maximise
``f(φ, r) = |r† B(φ) r|`` over unit ``r`` and normalised φ by alternating:

* φ-step: φ ∝ ψ(r) = Σ conj(r_α) √λ_α r_β √λ_β τ_{αβ}, giving
  f = ||ψ(r)|| and ||ψ(r)||² = (r ⊗ r*)† A(L) (r ⊗ r*);
* r-step: phase-rotation ascent on |r† B r| (dominant eigenvector of the
  Hermitian part of e^{-iθ} B, θ = arg r† B r) to a fixed point.

Both steps only need ``A(L)``; block states are never built.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import imps, numerics
from .errors import (
    CanonicalViolation,
    CriticalDegeneracy,
    DegenerateDirection,
    InvalidInput,
    InvariantViolation,
    NumericalBreakdown,
)
from .imps import InfiniteMPS

logger = logging.getLogger(__name__)

GAP_TOL = 1e-8


@dataclass(frozen=True)
class TransferMatrix:
    L: int
    mat: np.ndarray
    lam: np.ndarray

    @property
    def chi(self) -> int:
        return len(self.lam)

    def as_tensor(self) -> np.ndarray:
        """View with index order [α, α', β, β']."""
        c = self.chi
        return self.mat.reshape(c, c, c, c)


@dataclass(frozen=True)
class GeoEntResult:
    """Outcome of the double maximisation for one (state, L).

    ``d_max_abs`` is the maximised |r† B r| (a numerical radius);
    ``spectral_radius`` is the largest |eigenvalue| of B at the optimum and
    ``radius_mismatch`` flags a disagreement above 1e-8 between the two.
    """

    E: float
    d_max_abs: float
    r: np.ndarray
    phi_norm_sq: float
    iterations: int
    converged: bool
    starts_used: int
    L: int = 0
    spectral_radius: float = float("nan")
    radius_mismatch: bool = False
    start_index: int = 0
    history: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class WeylBounds:
    upper: float
    lower: float
    lambda1: float

    def holds(self, tol: float = 1e-10) -> bool:
        return self.upper + tol >= self.lambda1 >= self.lower - tol


# --------------------------------------------------------------------------
# transfer matrices
# --------------------------------------------------------------------------


def _sym_weights(lam):
    return np.sqrt(np.kron(lam, lam))


def transfer_matrix(mps: InfiniteMPS) -> TransferMatrix:
    w = _sym_weights(mps.lam)
    E = imps.single_site_transfer(mps.work_gamma())
    return TransferMatrix(1, w[:, None] * E * w[None, :], mps.lam)


def transfer_block(mps: InfiniteMPS, L: int, base: Optional[TransferMatrix] = None) -> TransferMatrix:
    """A(L) = A(1)^L by repeated squaring (or ``base.mat^(L / base.L)``)."""
    if L < 1:
        raise InvalidInput(f"block size must be positive, got {L}")
    if base is None:
        base = transfer_matrix(mps)
    if L % base.L:
        raise InvalidInput(f"L={L} is not a multiple of the base block {base.L}")
    return TransferMatrix(L, imps._matrix_power(base.mat, L // base.L), mps.lam)


def transfer_block_from_overlap(mps: InfiniteMPS, L: int, method: str = "sequential") -> TransferMatrix:
    """A(L) assembled from the block overlap tensor <τ_{α'β'}|τ_{αβ}>."""
    w = _sym_weights(mps.lam)
    O = imps.block_overlap(mps, L, method=method)
    return TransferMatrix(L, w[:, None] * O * w[None, :], mps.lam)


def _apply_transfer(mps: InfiniteMPS):
    """Matrix-free action of A(1) on a chi² vector."""
    chi = mps.chi
    s = np.sqrt(mps.lam)
    C = s[None, :, None] * mps.gamma * s[None, None, :]

    def apply(v):
        X = v.reshape(chi, chi)
        return np.einsum("sab,bc,sdc->ad", C, X, C.conj(), optimize=True).ravel()

    return apply


def transfer_spectrum(A: TransferMatrix, k: Optional[int] = None, check: bool = True) -> numerics.EigenSet:
    """Eigenvalues/vectors of A(L), magnitude-descending.

    With ``k`` set, only the top-``k`` pairs are computed iteratively.

    Raises
    ------
    CanonicalViolation
        The dominant eigenvalue deviates from 1 by more than 1e-6.
    """
    n = A.mat.shape[0]
    if k is None or k >= n - 1:
        eigs = numerics.eig_dense(A.mat)
        if k is not None:
            eigs = numerics.EigenSet(eigs.values[:k], eigs.vectors[:, :k], eigs.values_only)
    else:
        mat = A.mat
        eigs = numerics.dominant_eigs(lambda v: mat @ v, n, k)
    if check and abs(eigs.values[0] - 1.0) > 1e-6:
        raise CanonicalViolation(f"dominant transfer eigenvalue {eigs.values[0]} != 1")
    return eigs


def dominant_overlap(A: TransferMatrix, eigs: Optional[numerics.EigenSet] = None) -> float:
    """|<a(1)|v_1>| between the dominant eigenvector and λ_α δ_{αα'}."""
    if eigs is None:
        eigs = transfer_spectrum(A, k=1)
    a1 = np.diag(A.lam).ravel()
    a1 = a1 / np.linalg.norm(a1)
    v = eigs.vectors[:, 0]
    return float(abs(np.vdot(a1, v)) / np.linalg.norm(v))


def second_eigenvalue_modulus(mps: InfiniteMPS) -> float:
    """|ν₂(A(1))|, or 0 for a product state."""
    if mps.chi == 1:
        return 0.0
    n = mps.chi**2
    if n <= 256:
        vals = numerics.eig_dense(transfer_matrix(mps).mat, vectors=False).values
    else:
        vals = numerics.dominant_eigs(_apply_transfer(mps), n, k=2).values
    return float(abs(vals[1]))


def correlation_length(mps: InfiniteMPS, nu2_abs: Optional[float] = None) -> float:
    """ξ = -1 / ln|ν₂(A(1))| in lattice units.

    Raises
    ------
    CriticalDegeneracy
        |ν₂| >= 1 - 1e-8 (critical or cat-like state).
    """
    if mps.chi == 1:
        return 0.0
    if nu2_abs is None:
        nu2_abs = second_eigenvalue_modulus(mps)
    if nu2_abs >= 1.0 - GAP_TOL:
        raise CriticalDegeneracy(f"|nu_2| = {nu2_abs!r} is numerically 1")
    if nu2_abs == 0.0:
        return 0.0
    return -1.0 / math.log(nu2_abs)


def geoent_asymptotic(mps: InfiniteMPS, nu2_abs: Optional[float] = None) -> float:
    """E = -2 ln λ₁, valid away from criticality for L >> ξ.

    Raises
    ------
    CriticalDegeneracy
        The transfer matrix has no spectral gap, so the formula does not apply;
        use :func:`geoent_finite` instead.
    """
    if mps.chi > 1:
        if nu2_abs is None:
            nu2_abs = second_eigenvalue_modulus(mps)
        if nu2_abs >= 1.0 - GAP_TOL:
            raise CriticalDegeneracy(
                f"|nu_2| = {nu2_abs!r}: no spectral gap, asymptotic formula invalid"
            )
    return -2.0 * math.log(mps.lam[0])


# --------------------------------------------------------------------------
# double maximisation
# --------------------------------------------------------------------------


def _contract_r(A4, r):
    """K_{αβ} = Σ A[α, α', β, β'] r_α' conj(r_β') so that ||ψ(r)||² = r† K r."""
    return np.einsum("apbq,p,q->ab", A4, r, r.conj(), optimize=True)


def psi_norm_sq(A: TransferMatrix, r) -> float:
    """||ψ(r)||² = (r ⊗ r*)† A(L) (r ⊗ r*)."""
    r = np.asarray(r, dtype=complex)
    v = np.kron(r, r.conj())
    return float(np.vdot(v, A.mat @ v).real)


def optimal_block_state(mps: InfiniteMPS, L: int, r):
    """Best block state for fixed ``r`` and its unnormalised squared norm.

    Returns
    -------
    phi : np.ndarray, shape (d**L,)
        ψ(r) / ||ψ(r)||.
    norm_sq : float
        ||ψ(r)||².

    Raises
    ------
    DegenerateDirection
        ||ψ(r)|| < 1e-14.
    """
    r = np.asarray(r, dtype=complex)
    if r.shape != (mps.chi,) or abs(np.linalg.norm(r) - 1) > 1e-10:
        raise InvalidInput("r must be a unit vector of length chi")
    tau = imps.block_tensor(mps, L)
    s = np.sqrt(mps.lam)
    c = np.outer(r.conj() * s, r * s)
    psi = np.einsum("nab,ab->n", tau, c)
    norm = np.linalg.norm(psi)
    if norm < 1e-14:
        raise DegenerateDirection(f"||psi(r)|| = {norm:.3e}")
    return psi / norm, float(norm**2)


def overlap_matrix(mps: InfiniteMPS, L: int, phi) -> np.ndarray:
    """M_{αβ} = <φ|τ_{αβ}> for a normalised block state φ."""
    tau = imps.block_tensor(mps, L)
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (tau.shape[0],):
        raise InvalidInput(f"phi must have length {tau.shape[0]}")
    return np.einsum("n,nab->ab", phi.conj(), tau)


def _phase_rotation(B, r, tol, max_inner=200):
    """Ascend |r† B r| by repeated Hermitian-part eigenvector updates."""
    val = abs(np.vdot(r, B @ r))
    for _ in range(max_inner):
        z = np.vdot(r, B @ r)
        theta = np.angle(z) if abs(z) > 0 else 0.0
        H = np.exp(-1j * theta) * B
        H = 0.5 * (H + H.conj().T)
        _, V = np.linalg.eigh(H)
        r_new = V[:, -1]
        new = abs(np.vdot(r_new, B @ r_new))
        if new <= val * (1 + tol):
            if new > val:
                r, val = r_new, new
            break
        r, val = r_new, new
    return r, val


def _random_unit(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _ascent(A4, r, max_iter, tol):
    K = _contract_r(A4, r)
    f = math.sqrt(max(np.vdot(r, K @ r).real, 0.0))
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if f < 1e-300:
            break
        B = K / f
        r, _ = _phase_rotation(B, r, tol)
        K = _contract_r(A4, r)
        f_new = math.sqrt(max(np.vdot(r, K @ r).real, 0.0))
        if f_new < f * (1 - 1e-13):
            raise NumericalBreakdown(f"objective decreased from {f!r} to {f_new!r}")
        history.append(f_new)
        done = f_new - f <= tol * f
        f = max(f, f_new)
        if done:
            converged = True
            break
    return r, f, K, it, converged, history


def solve_from_transfer(
    A: TransferMatrix,
    starts: int = 8,
    seed: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-12,
) -> GeoEntResult:
    """Multi-start alternating ascent given a precomputed A(L)."""
    chi = A.chi
    A4 = A.as_tensor()
    if chi == 1:
        val = float(abs(A.mat[0, 0]))
        d = math.sqrt(val)
        return GeoEntResult(
            E=-math.log(val), d_max_abs=d, r=np.ones(1, dtype=complex), phi_norm_sq=val,
            iterations=0, converged=True, starts_used=1, L=A.L, spectral_radius=d,
        )
    children = np.random.SeedSequence(seed).spawn(max(starts - 1, 0))
    inits = [np.eye(chi, dtype=complex)[0]]
    inits += [_random_unit(np.random.default_rng(c), chi) for c in children]

    best = None
    for idx, r0 in enumerate(inits[:max(starts, 1)]):
        r, f, K, it, conv, hist = _ascent(A4, r0, max_iter, tol)
        # selection by (objective, start index): strict improvement only
        if best is None or f > best[1]:
            best = (idx, f, r, K, it, conv, hist)
    idx, f, r, K, it, conv, hist = best
    if f <= 0:
        raise DegenerateDirection("every start collapsed to a zero block state")
    B = K / f
    rho_B = float(np.max(np.abs(np.linalg.eigvals(B))))
    r = numerics.fix_phase(r)
    return GeoEntResult(
        E=-2.0 * math.log(f),
        d_max_abs=f,
        r=r,
        phi_norm_sq=f * f,
        iterations=it,
        converged=conv,
        starts_used=len(inits[:max(starts, 1)]),
        L=A.L,
        spectral_radius=rho_B,
        radius_mismatch=abs(rho_B - f) > 1e-8,
        start_index=idx,
        history=tuple(hist),
    )


def geoent_finite(
    mps: InfiniteMPS,
    L: int,
    starts: int = 8,
    seed: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-12,
    transfer: Optional[TransferMatrix] = None,
) -> GeoEntResult:
    """Geometric entanglement per L-site block by alternating ascent.

    Parameters
    ----------
    starts : int
        Number of starts: ``r = e_1`` plus ``starts - 1`` seeded random unit vectors.
    seed : int
        Master seed for the random starts.
    transfer : TransferMatrix, optional
        Precomputed A(L).
    """
    if transfer is None:
        transfer = transfer_block(mps, L)
    elif transfer.L != L:
        raise InvalidInput(f"transfer matrix is for L={transfer.L}, not {L}")
    res = solve_from_transfer(transfer, starts=starts, seed=seed, max_iter=max_iter, tol=tol)
    if not res.converged:
        logger.warning("geoent_finite L=%d: no start converged in %d iterations", L, max_iter)
    return res


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------


def weyl_bounds(mps: InfiniteMPS, L: int, spectrum=None, check: bool = True) -> WeylBounds:
    """ν₁(ρ)^{1/4} >= λ₁ >= (ν₂(ρ) + ν_min(ρ))^{1/4} for the L-site block.

    Raises
    ------
    InvariantViolation
        When ``check`` is set and either side fails by more than 1e-10.
    """
    if spectrum is None:
        spectrum = imps.reduced_density_spectrum(mps, L)
    lam1 = float(mps.lam[0])
    upper = spectrum.nu1**0.25
    if len(spectrum.nonzero) < 2:
        lower = 0.0
    else:
        lower = (spectrum.nu2 + spectrum.nu_min) ** 0.25
    wb = WeylBounds(upper, lower, lam1)
    if check and not wb.holds():
        raise InvariantViolation(
            f"L={L}: sandwich {upper!r} >= {lam1!r} >= {lower!r} violated"
        )
    return wb


def single_copy(mps: InfiniteMPS, L: int, spectrum=None) -> float:
    """E₁ = -ln ν₁(ρ_L)."""
    if spectrum is None:
        spectrum = imps.reduced_density_spectrum(mps, L)
    return -math.log(spectrum.nu1)


# --------------------------------------------------------------------------
# finite-M fidelities
# --------------------------------------------------------------------------


def _projected_transfer(B):
    chi = B.shape[0]
    return np.einsum("ab,cd->acbd", B, B.conj()).reshape(chi * chi, chi * chi)


def boundary_vectors(B, lam):
    """(b_left, b_right) with b_right = T a, b_left = T† a, T = B ⊗ B*, a = λ_α δ_{αα'}."""
    T = _projected_transfer(B)
    a = np.diag(lam).astype(complex).ravel()
    return T.conj().T @ a, T @ a, T


def fidelity_from_overlap(B, lam, M: int) -> float:
    """|Λ|² = b_left† T^(M-2) b_right for M blocks projected on the same φ."""
    if M < 2:
        raise InvalidInput(f"need M >= 2, got {M}")
    bl, br, T = boundary_vectors(B, lam)
    mid = br if M == 2 else imps._matrix_power(T, M - 2) @ br
    val = np.vdot(bl, mid)
    if abs(val.imag) > 1e-10 or not (-1e-10 <= val.real <= 1 + 1e-10):
        raise NumericalBreakdown(f"fidelity {val} outside [0, 1]")
    return float(val.real)


def log_fidelity_from_overlap(B, lam, M: int) -> float:
    """ln |Λ|² for large M, with rescaling at every squaring to avoid underflow."""
    if M < 2:
        raise InvalidInput(f"need M >= 2, got {M}")
    bl, br, T = boundary_vectors(B, lam)
    n = M - 2
    log_scale = 0.0
    vec = br.copy()
    base = T.copy()
    base_log = 0.0
    while n:
        if n & 1:
            vec = base @ vec
            s = np.linalg.norm(vec)
            vec /= s
            log_scale += math.log(s) + base_log
        n >>= 1
        if n:
            base = base @ base
            s = np.linalg.norm(base)
            base /= s
            base_log = 2 * base_log + math.log(s)
    val = np.vdot(bl, vec).real
    if val <= 0:
        raise NumericalBreakdown(f"non-positive fidelity direction {val}")
    return math.log(val) + log_scale


def fidelity_finite_M(mps: InfiniteMPS, L: int, M: int, phi) -> float:
    """Squared overlap of M contiguous blocks with φ^{⊗M}.

    Uses the boundary vector ``b_{(αα')} = Σ_β √λ_α M_{αβ} √λ_α' conj(M_{α'β}) λ_β²``
    on the right and its mirror image on the left, joined by M - 2 copies of
    the φ-projected block transfer matrix.
    """
    Mmat = overlap_matrix(mps, L, phi)
    s = np.sqrt(mps.lam)
    B = s[:, None] * Mmat * s[None, :]
    return fidelity_from_overlap(B, mps.lam, M)


def block_fidelity(mps: InfiniteMPS, L: int, phi) -> float:
    """<φ|ρ_L|φ>."""
    Mmat = overlap_matrix(mps, L, phi)
    lam2 = mps.lam**2
    return float(np.einsum("a,ab,b->", lam2, np.abs(Mmat) ** 2, lam2, optimize=True))
