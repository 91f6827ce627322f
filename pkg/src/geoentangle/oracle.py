"""
Brute-force references: exact diagonalisation of small rings and direct
maximisation of the overlap with product states of contiguous blocks.

Nothing here relies on the transfer-matrix machinery, so the results can be
used to cross-check it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla
from scipy import optimize

from . import numerics
from .errors import InvalidInput, NumericalBreakdown, TooLarge
from .imps import InfiniteMPS
from .models import NNModel

logger = logging.getLogger(__name__)

# ring sizes are capped at d^N <= ED_CAP * d
ED_CAP = 2**14
BLOCK_DIM_CAP = 256
GRID_STEP = 0.01


@dataclass(frozen=True)
class DenseState:
    """Pure state of ``N`` sites with local dimension ``d``; site 0 is the most significant digit."""

    N: int
    d: int
    amps: np.ndarray
    energy: Optional[float] = None

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.d**self.N,):
            raise InvalidInput(f"expected {self.d**self.N} amplitudes, got {amps.shape}")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise InvalidInput("state is not normalised")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((self.d,) * self.N)


@dataclass(frozen=True)
class BruteForceGE:
    """Best product-of-blocks approximation of a dense state.

    ``grid_overlap_sq`` holds the independent grid-search value when one
    was run (two-dimensional blocks only), else ``None``.
    """

    E_total: float
    E_per_block: float
    best_overlap_sq: float
    per_block_states: list
    starts_used: int
    converged: bool = True
    iterations: int = 0
    start_index: int = 0
    grid_overlap_sq: Optional[float] = None
    history: tuple = field(default=(), repr=False)


def product_state(vectors) -> DenseState:
    """Dense state ``v_0 ⊗ v_1 ⊗ ...``."""
    vecs = [np.asarray(v, dtype=complex) / np.linalg.norm(v) for v in vectors]
    amps = vecs[0]
    for v in vecs[1:]:
        amps = np.kron(amps, v)
    return DenseState(len(vecs), len(vecs[0]), amps / np.linalg.norm(amps))


# --------------------------------------------------------------------------
# exact diagonalisation
# --------------------------------------------------------------------------


def _ring_hamiltonian(model: NNModel, N: int, periodic: bool):
    d = model.d
    h4 = model.h2.reshape(d, d, d, d)
    if not np.any(h4.imag):
        h4 = h4.real
    bonds = [(i, i + 1) for i in range(N - 1)]
    if periodic and N > 2:
        bonds.append((N - 1, 0))

    def apply(v):
        psi = np.asarray(v).reshape((d,) * N)
        out = np.zeros_like(psi, dtype=np.result_type(psi, h4))
        for i, j in bonds:
            t = np.tensordot(h4, psi, axes=([2, 3], [i, j]))
            # tensordot puts the two acted-on axes first; move them back
            out += np.moveaxis(t, [0, 1], [i, j])
        return out.ravel()

    return apply


def ed_ground_state(model: NNModel, N: int, bc: str = "periodic") -> DenseState:
    """Lowest eigenvector of ``Σ_i h2_{i,i+1}`` on ``N`` sites.

    Raises
    ------
    TooLarge
        ``d**N`` exceeds ``2**14 * d``.
    """
    if bc not in ("periodic", "open"):
        raise InvalidInput(f"bc must be 'periodic' or 'open', got {bc!r}")
    if N < 2:
        raise InvalidInput(f"need at least two sites, got {N}")
    dim = model.d**N
    if dim > ED_CAP * model.d:
        raise TooLarge(f"Hilbert space dimension {dim} exceeds {ED_CAP * model.d}")
    apply = _ring_hamiltonian(model, N, bc == "periodic")
    dtype = float if not np.any(model.h2.imag) else complex
    if dim <= 512:
        H = np.column_stack([apply(col) for col in np.eye(dim, dtype=dtype)])
        w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
        e0, v = w[0], V[:, 0]
    else:
        op = spla.LinearOperator((dim, dim), matvec=apply, dtype=dtype)
        v0 = np.random.default_rng(2024).standard_normal(dim).astype(dtype)
        w, V = spla.eigsh(op, k=1, which="SA", v0=v0, tol=1e-13, maxiter=20 * dim)
        e0, v = w[0], V[:, 0]
    v = numerics.fix_phase(v)
    return DenseState(N, model.d, v / np.linalg.norm(v), energy=float(e0))


# --------------------------------------------------------------------------
# closest product of blocks
# --------------------------------------------------------------------------


def _contract_except(psi, phis, k):
    """<⊗_{j≠k} φ_j | Ψ> as a vector on block k."""
    t = psi
    # contract from the last block down so axis numbers stay valid
    for j in range(len(phis) - 1, -1, -1):
        if j != k:
            t = np.tensordot(t, phis[j].conj(), axes=([j], [0]))
    return t


def _overlap(psi, phis):
    c = _contract_except(psi, phis, 0)
    return abs(np.vdot(phis[0], c)) ** 2


def _alternate(psi, phis, max_iter, tol):
    phis = [p / np.linalg.norm(p) for p in phis]
    M = len(phis)
    val = _overlap(psi, phis)
    history = [val]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        start = val
        for k in range(M):
            c = _contract_except(psi, phis, k)
            n = np.linalg.norm(c)
            if n == 0:
                continue
            phis[k] = c / n
            new = n * n
            if new < val * (1 - 1e-12):
                raise NumericalBreakdown(f"block update lowered the overlap from {val!r} to {new!r}")
            val = max(val, new)
        history.append(val)
        if val - start <= tol * max(val, 1e-300):
            converged = True
            break
    return phis, val, it, converged, history


def _block_rdm_vector(psi, k):
    M = psi.ndim
    t = np.moveaxis(psi, k, 0).reshape(psi.shape[k], -1)
    w, V = np.linalg.eigh(t @ t.conj().T)
    return V[:, -1]


def brute_force_ge(
    state: DenseState,
    L: int,
    starts: int = 8,
    seed: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-12,
    grid: bool = True,
) -> BruteForceGE:
    """Maximise |<φ_1 ⊗ ... ⊗ φ_M | Ψ>|² over block states, M = N / L.

    Start 0 uses the dominant eigenvector of each block's reduced density
    matrix; the remaining ``starts - 1`` use seeded random block states.
    When blocks are two-dimensional a Bloch-sphere grid search is run as an
    independent check (see :func:`grid_product_overlap`).
    """
    N, d = state.N, state.d
    if L < 1 or N % L:
        raise InvalidInput(f"block size {L} does not divide N={N}")
    D = d**L
    if D > BLOCK_DIM_CAP:
        raise TooLarge(f"block dimension {D} exceeds {BLOCK_DIM_CAP}")
    M = N // L
    psi = state.amps.reshape((D,) * M)
    if M == 1:
        return BruteForceGE(0.0, 0.0, 1.0, [state.amps.copy()], 1)

    children = np.random.SeedSequence(seed).spawn(max(starts - 1, 0))
    inits = [[_block_rdm_vector(psi, k) for k in range(M)]]
    for child in children:
        rng = np.random.default_rng(child)
        inits.append([rng.standard_normal(D) + 1j * rng.standard_normal(D) for _ in range(M)])
    inits = inits[:max(starts, 1)]

    best = None
    for idx, init in enumerate(inits):
        phis, val, it, conv, hist = _alternate(psi, init, max_iter, tol)
        if best is None or val > best[1]:
            best = (idx, val, phis, it, conv, hist)
    idx, val, phis, it, conv, hist = best
    val = min(val, 1.0)
    grid_val = grid_product_overlap(state, L) if (grid and D == 2) else None
    if grid_val is not None and grid_val > val + 1e-4:
        logger.warning("grid search beat alternating updates: %.8f > %.8f", grid_val, val)
    E = -math.log(val)
    return BruteForceGE(
        E_total=E,
        E_per_block=E / M,
        best_overlap_sq=val,
        per_block_states=[numerics.fix_phase(p) for p in phis],
        starts_used=len(inits),
        converged=conv,
        iterations=it,
        start_index=idx,
        grid_overlap_sq=grid_val,
        history=tuple(hist),
    )


# --------------------------------------------------------------------------
# Bloch-sphere grid searches
# --------------------------------------------------------------------------


def bloch_grid(step: float = GRID_STEP):
    """Polar and azimuthal angles covering the sphere at spacing ``step``."""
    theta = np.arange(0.0, math.pi + step / 2, step)
    phi = np.arange(0.0, 2 * math.pi, step)
    return np.meshgrid(theta, phi, indexing="ij")


def bloch_vector(theta, phi):
    """Qubit states cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>, stacked on the last axis."""
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def _grid_then_refine(objective_batch, objective_one, step, n_refine=5):
    T, P = bloch_grid(step)
    vals = objective_batch(T.ravel(), P.ravel())
    order = np.argsort(-vals, kind="stable")[:n_refine]
    best = float(vals[order[0]])
    for i in order:
        x0 = np.array([T.ravel()[i], P.ravel()[i]])
        res = optimize.minimize(lambda x: -objective_one(x[0], x[1]), x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -float(res.fun))
    return best


def grid_product_overlap(state: DenseState, L: int = 1, step: float = GRID_STEP) -> float:
    """Grid estimate of the best product overlap for two-dimensional blocks.

    Blocks ``1 .. M-1`` share a common Bloch vector scanned on the grid, and
    the last block takes its exact conditional optimum. For two blocks this
    covers every product state; for more blocks it covers the
    translation-symmetric family, which contains the optimum for symmetric
    states.
    """
    N, d = state.N, state.d
    if d**L != 2 or N % L:
        raise InvalidInput("grid search needs two-dimensional blocks that tile the state")
    M = N // L
    psi = state.amps.reshape((2,) * M)

    rest = psi.reshape(2, -1)

    def batch(theta, phi, chunk=1024):
        out = np.empty(len(theta))
        for i in range(0, len(theta), chunk):
            v = bloch_vector(theta[i:i + chunk], phi[i:i + chunk]).conj()
            u = v
            for _ in range(M - 2):
                u = (u[:, :, None] * v[:, None, :]).reshape(len(v), -1)
            c = u @ rest.T
            out[i:i + chunk] = np.sum(np.abs(c) ** 2, axis=1)
        return out

    def one(theta, phi):
        return float(batch(np.array([theta]), np.array([phi]))[0])

    return min(_grid_then_refine(batch, one, step), 1.0)


def _top_hermitian_2x2(B, theta):
    """λ_max of (e^{-iθ}B + h.c.)/2 for 2x2 matrices ``B[..., 2, 2]`` and angles ``theta``."""
    z = np.exp(-1j * np.asarray(theta))
    a = (z * B[..., 0, 0]).real
    dd = (z * B[..., 1, 1]).real
    off = 0.5 * (z * B[..., 0, 1] + np.conj(z * B[..., 1, 0]))
    return 0.5 * (a + dd) + np.sqrt(0.25 * (a - dd) ** 2 + np.abs(off) ** 2)


def _numerical_radius_2x2(B, n_theta=64):
    """Coarse numerical radius of a stack of 2x2 matrices (max over n_theta angles)."""
    thetas = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
    return _top_hermitian_2x2(B[:, None], thetas[None, :]).max(axis=1)


def _numerical_radius_exact(B):
    """max_θ λ_max((e^{-iθ}B + h.c.)/2), scanned then refined."""
    if B.shape == (2, 2):
        def neg(theta):
            return -float(_top_hermitian_2x2(B, theta))
    else:
        def neg(theta):
            H = np.exp(-1j * theta) * B
            return -np.linalg.eigvalsh(0.5 * (H + H.conj().T))[-1]

    thetas = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
    if B.shape == (2, 2):
        scan = -_top_hermitian_2x2(B, thetas)
    else:
        scan = [neg(t) for t in thetas]
    t0 = thetas[int(np.argmin(scan))]
    step = thetas[1]
    res = optimize.minimize_scalar(neg, bounds=(t0 - step, t0 + step), method="bounded",
                                   options={"xatol": 1e-12})
    return max(-float(res.fun), -neg(t0))


def geoent_grid(mps: InfiniteMPS, step: float = GRID_STEP) -> float:
    """Per-site geometric entanglement of a qubit iMPS by Bloch-sphere search.

    For every grid state φ the per-site fidelity factor is the numerical
    radius of ``√Λ M(φ) √Λ`` with ``M_{αβ} = <φ|Γ_{αβ}>``; the best grid
    point is refined locally and ``-2 ln`` of the maximum is returned.
    """
    if mps.d != 2:
        raise InvalidInput("grid search is defined for qubit chains only")
    s = np.sqrt(mps.lam)
    G = mps.gamma

    def Bmats(theta, phi):
        v = bloch_vector(theta, phi).conj()
        M = np.einsum("ns,sab->nab", v, G)
        return s[None, :, None] * M * s[None, None, :]

    def batch(theta, phi, chunk=8192):
        out = np.empty(len(theta))
        for i in range(0, len(theta), chunk):
            B = Bmats(theta[i:i + chunk], phi[i:i + chunk])
            if mps.chi == 1:
                out[i:i + chunk] = np.abs(B[:, 0, 0])
            elif mps.chi == 2:
                out[i:i + chunk] = _numerical_radius_2x2(B)
            else:
                out[i:i + chunk] = [_numerical_radius_exact(b) for b in B]
        return out

    def one(theta, phi):
        return _numerical_radius_exact(Bmats(np.array([theta]), np.array([phi]))[0])

    best = _grid_then_refine(batch, one, step)
    return -2.0 * math.log(best)
