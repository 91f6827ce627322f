"""
Translationally invariant infinite matrix product states in Vidal form.

The state is the infinite contraction ``... Λ Γ Λ Γ Λ ...`` with one site
tensor ``gamma[s, α, β]`` and one bond vector ``lam[α]`` (the Schmidt
coefficients across every cut). In canonical form::

    Σ_s Γ^s Λ² Γ^s†  = 1        (right)
    Σ_s Γ^s† Λ² Γ^s  = 1        (left)

Lengths are measured in lattice units throughout (cut-off ε = 1).

Block conventions
-----------------
A block of ``L`` sites has coefficient tensor
``τ^{s1..sL}_{αβ} = (Γ^{s1} Λ Γ^{s2} Λ ... Λ Γ^{sL})_{αβ}`` (interior Λ only),
with ``s1`` the most significant digit of the flattened physical index.
The block overlap matrix ``O(L)`` has entries
``O[(α α'), (β β')] = <τ_{α'β'} | τ_{αβ}>`` and equals
``E (D E)^(L-1)`` with ``E = Σ_s Γ^s ⊗ conj(Γ^s)`` and ``D = diag(λ ⊗ λ)``.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics
from .errors import (
    BlockTooLarge,
    DegenerateState,
    InvalidInput,
    IoError,
    NumericalBreakdown,
)

SCHEMA_VERSION = 1
BLOCK_CAP = 2**20
# guards the materialised block tensor (d^L * chi^2 complex entries)
BLOCK_ENTRY_CAP = 2**25
ZERO_PROB = 1e-14
# fixed-point eigenvalues below this fraction of the largest span the null space
_FIXED_POINT_CUT = 1e-15


@dataclass(frozen=True)
class InfiniteMPS:
    """Single-site translationally invariant iMPS in canonical form.

    Attributes
    ----------
    gamma : np.ndarray, shape (d, chi, chi), complex
        Site tensor, index order [s][α][β].
    lam : np.ndarray, shape (chi,)
        Schmidt coefficients, descending, with unit 2-norm.
    eps : float
        Lattice spacing; fixed to 1.
    """

    gamma: np.ndarray
    lam: np.ndarray
    eps: float = field(default=1.0)

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=complex)
        l = np.asarray(self.lam, dtype=float)
        if g.ndim != 3 or g.shape[1] != g.shape[2] or g.shape[1] != l.shape[0]:
            raise InvalidInput(f"inconsistent shapes gamma={g.shape}, lam={l.shape}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(l))):
            raise InvalidInput("non-finite entries in iMPS")
        g.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "lam", l)

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    @property
    def chi(self) -> int:
        return self.gamma.shape[1]

    def is_real(self) -> bool:
        return not np.any(self.gamma.imag)

    def work_gamma(self):
        """Gamma in the cheapest exact dtype (real when the state is real)."""
        return self.gamma.real.copy() if self.is_real() else self.gamma


def canonical_residuals(mps: InfiniteMPS):
    """Frobenius norms of the (right, left) canonical-condition defects."""
    g, lam2 = mps.gamma, mps.lam**2
    eye = np.eye(mps.chi)
    right = np.einsum("sab,b,scb->ac", g, lam2, g.conj(), optimize=True) - eye
    left = np.einsum("sba,b,sbc->ac", g.conj(), lam2, g, optimize=True) - eye
    return float(np.linalg.norm(right)), float(np.linalg.norm(left))


# --------------------------------------------------------------------------
# canonical form
# --------------------------------------------------------------------------


def _fixed_point(A, side):
    """Dominant eigenpair of X -> Σ A X A† (right) or X -> Σ A† X A (left)."""
    d, chi, _ = A.shape

    if side == "right":
        def apply(x):
            X = x.reshape(chi, chi)
            return np.einsum("sab,bc,sdc->ad", A, X, A.conj(), optimize=True).ravel()
    else:
        def apply(x):
            X = x.reshape(chi, chi)
            return np.einsum("sba,bc,scd->ad", A.conj(), X, A, optimize=True).ravel()

    res = numerics.dominant_eigs(apply, chi * chi, k=1)
    eta = res.values[0]
    X = res.vectors[:, 0].reshape(chi, chi)
    tr = np.trace(X)
    if abs(tr) > 0:
        X = X * (abs(tr) / tr)
    X = 0.5 * (X + X.conj().T)
    return eta, X


def _psd_factor(X, tol):
    w, V = np.linalg.eigh(X)
    keep = w > tol * w.max()
    return w[keep], V[:, keep]


def fix_gauge(gamma, lam):
    """Sort ``lam`` descending and fix the residual per-index phase freedom.

    Index 0 keeps its phase; every other index ``β`` gets the phase that makes
    the largest-magnitude entry linking it to an already fixed index real and
    positive. Indices that never couple to a fixed one keep their phase.
    """
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    g = gamma[:, order][:, :, order].astype(complex)
    chi = len(lam)
    phase = np.ones(chi, dtype=complex)
    fixed = np.zeros(chi, dtype=bool)
    fixed[0] = True
    mag = np.abs(g)
    progress = True
    while progress and not fixed.all():
        progress = False
        for b in np.flatnonzero(~fixed):
            # entries Γ^s_{ab} (a fixed) transform as e^{i(p_a - p_b)}
            cand_col = mag[:, fixed, b]
            cand_row = mag[:, b, fixed]
            best_col = cand_col.max() if cand_col.size else 0.0
            best_row = cand_row.max() if cand_row.size else 0.0
            if max(best_col, best_row) <= 1e-12:
                continue
            fixed_idx = np.flatnonzero(fixed)
            if best_col >= best_row:
                s, i = np.unravel_index(np.argmax(cand_col), cand_col.shape)
                a = fixed_idx[i]
                z = phase[a] * g[s, a, b]
                phase[b] = z / abs(z)
            else:
                s, i = np.unravel_index(np.argmax(cand_row), cand_row.shape)
                a = fixed_idx[i]
                z = g[s, b, a] * np.conj(phase[a])
                phase[b] = np.conj(z) / abs(z)
            fixed[b] = True
            progress = True
    g = phase[None, :, None] * g * phase.conj()[None, None, :]
    if not np.iscomplexobj(gamma):
        # real input only ever receives signs
        g = g.real
    return g, lam


def _canonical_pass(gamma, lam, tol):
    """One gauge transformation towards canonical form.

    The right fixed point is taken for ``ΓΛ`` and the left one for ``ΛΓ``;
    close to canonical form both are near the identity, so the factors below
    stay well conditioned even when ``lam`` spans many decades. The left
    fixed point of ``ΓΛ`` is ``Λ L Λ`` and the ``Λ^-1`` it would introduce
    cancels analytically.
    """
    AR = gamma * lam[None, None, :]
    AL = lam[None, :, None] * gamma
    eta, R = _fixed_point(AR, "right")
    _, Lt = _fixed_point(AL, "left")
    scale = max(1.0, float(np.max(np.abs(AR))) ** 2)
    if abs(eta) <= 1e-14 * scale or eta.real <= 0 or abs(eta.imag) > 1e-8 * abs(eta):
        raise DegenerateState(f"dominant transfer eigenvalue {eta} is not positive")

    if np.trace(R).real < 0:
        R = -R
    if np.trace(Lt).real < 0:
        Lt = -Lt
    if not np.iscomplexobj(gamma):
        R, Lt = R.real, Lt.real
    r, VR = _psd_factor(R, min(tol * tol, _FIXED_POINT_CUT))
    l, VL = _psd_factor(Lt, min(tol * tol, _FIXED_POINT_CUT))
    Y = VR * np.sqrt(r)
    Yinv = (VR / np.sqrt(r)).conj().T
    W = VL * np.sqrt(l)
    Winv_h = VL / np.sqrt(l)

    U, S, Vh = numerics.svd(W.conj().T @ (lam[:, None] * Y))
    keep = S > tol * S[0]
    U, S, Vh = U[:, keep], S[keep], Vh[keep]
    norm = np.linalg.norm(S)
    new_gamma = np.einsum("ab,bc,scd,de,ef->saf", Vh, Yinv, gamma, Winv_h, U, optimize=True)
    return new_gamma * (norm / math.sqrt(eta.real)), S / norm


def _canonical_passes(gamma, lam, tol, max_passes):
    best, best_res = None, math.inf
    for _ in range(max_passes):
        gamma, lam = _canonical_pass(gamma, lam, tol)
        gamma, lam = fix_gauge(gamma, lam)
        mps = InfiniteMPS(gamma, lam)
        res = max(canonical_residuals(mps))
        if res < best_res:
            best, best_res = mps, res
        if res < 1e-10:
            break
    return best, best_res


def canonicalize(
    gamma,
    lam=None,
    tol: float = 1e-8,
    max_passes: int = 8,
    residual_target: float = 5e-9,
) -> InfiniteMPS:
    """Bring a translationally invariant MPS ``... Λ Γ Λ Γ ...`` to canonical form.

    Schmidt values below ``tol`` (relative to the largest) are discarded, so
    the returned bond dimension can be smaller than the input one. A single
    pass is exact only when nothing is discarded, so passes are repeated
    until both canonical residuals drop below 1e-10 and the best pass is
    kept.

    The attainable residual is roughly machine precision divided by the
    smallest kept Schmidt value, because entries of Γ scale like 1/λ. If the
    best pass misses ``residual_target`` the cut is raised threefold (at
    most three times) and the input is processed again.

    Raises
    ------
    DegenerateState
        The dominant transfer eigenvalue is not a positive number.
    """
    gamma = np.asarray(gamma)
    gamma = gamma.astype(complex if np.iscomplexobj(gamma) else float)
    if gamma.ndim != 3 or gamma.shape[1] != gamma.shape[2]:
        raise InvalidInput(f"gamma must have shape (d, chi, chi), got {gamma.shape}")
    lam = np.ones(gamma.shape[1]) if lam is None else np.asarray(lam, dtype=float)
    if lam.shape != (gamma.shape[1],) or np.any(lam <= 0):
        raise InvalidInput("lambda must be a positive vector matching the bond dimension")
    best, best_res = None, math.inf
    for _ in range(4):
        mps, res = _canonical_passes(gamma, lam, tol, max_passes)
        if res < best_res:
            best, best_res = mps, res
        if best_res <= residual_target:
            break
        tol *= 3.0
    return best


def random_imps(seed: int, d: int, chi: int) -> InfiniteMPS:
    """Random canonical iMPS from a complex Gaussian site tensor."""
    if d < 2 or chi < 1:
        raise InvalidInput(f"need d >= 2 and chi >= 1, got d={d}, chi={chi}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, chi, chi)) + 1j * rng.standard_normal((d, chi, chi))
    return canonicalize(g, np.ones(chi))


def product_imps(vector) -> InfiniteMPS:
    """chi = 1 iMPS of the product state ``vector^{⊗∞}``."""
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return InfiniteMPS(v.reshape(-1, 1, 1), np.ones(1))


# --------------------------------------------------------------------------
# blocks
# --------------------------------------------------------------------------


def block_tensor(mps: InfiniteMPS, L: int, cap: int = BLOCK_CAP) -> np.ndarray:
    """Coefficients τ^{s⃗}_{αβ} of an L-site block, shape (d**L, chi, chi).

    Raises
    ------
    BlockTooLarge
        ``d**L`` exceeds ``cap`` or the tensor would not fit in memory.
    """
    if L < 1:
        raise InvalidInput(f"block size must be positive, got {L}")
    n = mps.d**L
    if n > cap or n * mps.chi**2 > BLOCK_ENTRY_CAP:
        raise BlockTooLarge(f"block of {L} sites has {n} states (cap {cap}, chi {mps.chi})")
    g = mps.gamma
    tau = g
    for _ in range(L - 1):
        tau = np.einsum("nab,b,sbc->nsac", tau, mps.lam, g, optimize=True).reshape(-1, mps.chi, mps.chi)
    return tau


def single_site_transfer(gamma) -> np.ndarray:
    """E = Σ_s Γ^s ⊗ conj(Γ^s) as a chi² x chi² matrix, rows (α α'), cols (β β')."""
    d, chi, _ = gamma.shape
    E = np.einsum("sab,scd->acbd", gamma, gamma.conj())
    return E.reshape(chi * chi, chi * chi)


def _matrix_power(M, L):
    result = None
    base = M
    while L:
        if L & 1:
            result = base if result is None else result @ base
        L >>= 1
        if L:
            base = base @ base
    return result


def block_overlap(mps: InfiniteMPS, L: int, method: str = "squaring") -> np.ndarray:
    """Overlap matrix O(L) with ``O[(α α'), (β β')] = <τ_{α'β'}|τ_{αβ}>``.

    ``method="sequential"`` contracts one site at a time; ``"squaring"``
    raises ``D E`` to the power ``L - 1`` by repeated squaring.
    """
    if L < 1:
        raise InvalidInput(f"block size must be positive, got {L}")
    E = single_site_transfer(mps.work_gamma())
    if L == 1:
        return E
    lam2 = np.kron(mps.lam, mps.lam)
    DE = lam2[:, None] * E
    if method == "sequential":
        out = E
        for _ in range(L - 1):
            out = out @ DE
        return out
    if method != "squaring":
        raise InvalidInput(f"unknown method {method!r}")
    return E @ _matrix_power(DE, L - 1)


# --------------------------------------------------------------------------
# block spectra
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSpectrum:
    """Eigenvalues of the reduced density matrix of an L-site block.

    ``probs`` is descending and sums to one; entries below 1e-14 are set to
    zero. ``raw_trace`` is the trace before normalisation.
    """

    L: int
    probs: np.ndarray
    raw_trace: float

    @property
    def nu1(self) -> float:
        return float(self.probs[0])

    @property
    def nu2(self) -> float:
        return float(self.probs[1]) if len(self.nonzero) > 1 else 0.0

    @property
    def nonzero(self) -> np.ndarray:
        return self.probs[self.probs > 0]

    @property
    def nu_min(self) -> float:
        """Smallest retained (nonzero) eigenvalue."""
        return float(self.nonzero[-1])


def _spectrum_from_gram(R, L):
    R = 0.5 * (R + R.conj().T)
    raw_trace = float(np.trace(R).real)
    if raw_trace <= 0:
        raise NumericalBreakdown(f"non-positive trace {raw_trace} of block Gram matrix")
    if np.isrealobj(R) or not np.any(R.imag):
        w = numerics.eigh_values(R.real)
    else:
        w = numerics.eigh_values(R)
    probs = w / raw_trace
    if probs[-1] < -1e-10:
        raise NumericalBreakdown(f"negative block eigenvalue {probs[-1]:.3e}")
    probs = np.where(probs < ZERO_PROB, 0.0, probs)
    return BlockSpectrum(L, probs, raw_trace)


def _reshuffle(M, chi):
    """(α α'),(β β') -> (α β),(α' β')."""
    return M.reshape(chi, chi, chi, chi).transpose(0, 2, 1, 3).reshape(chi * chi, chi * chi)


def block_spectrum_from_transfer(A_L, lam, L: int) -> BlockSpectrum:
    """Block spectrum from a precomputed transfer matrix A(L)."""
    chi = len(lam)
    w = np.sqrt(np.kron(lam, lam))
    R = w[:, None] * _reshuffle(np.asarray(A_L), chi) * w[None, :]
    return _spectrum_from_gram(R, L)


def reduced_density_spectrum(mps: InfiniteMPS, L: int, overlap=None) -> BlockSpectrum:
    """Spectrum of ρ_L = Σ_{αβ} λ_α² λ_β² |τ_{αβ}><τ_{αβ}|.

    Computed as the spectrum of the weighted Gram matrix
    ``R[(αβ),(α'β')] = λ_α λ_β λ_α' λ_β' <τ_{α'β'}|τ_{αβ}>``, whose nonzero
    eigenvalues coincide with those of ρ_L. The block states are never
    materialised; ``overlap`` may carry a precomputed :func:`block_overlap`.
    """
    chi = mps.chi
    if chi * chi > numerics.DENSE_CAP:
        raise InvalidInput(f"chi^2 = {chi * chi} exceeds the dense cap")
    O = block_overlap(mps, L) if overlap is None else overlap
    w = np.kron(mps.lam, mps.lam)
    R = w[:, None] * _reshuffle(O, chi) * w[None, :]
    return _spectrum_from_gram(R, L)


def dense_block_density(mps: InfiniteMPS, L: int) -> np.ndarray:
    """ρ_L as an explicit d^L x d^L matrix (small blocks only)."""
    tau = block_tensor(mps, L)
    w = (mps.lam[:, None] * mps.lam[None, :]) ** 2
    return np.einsum("nab,ab,mab->nm", tau, w, tau.conj(), optimize=True)


def schmidt_entropy(mps: InfiniteMPS) -> float:
    p = mps.lam**2
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


# --------------------------------------------------------------------------
# local observables
# --------------------------------------------------------------------------


def local_expectation(mps: InfiniteMPS, op) -> complex:
    """<O> for a single-site operator on a canonical iMPS."""
    lam2 = mps.lam**2
    rho = np.einsum("a,sab,b,tab->st", lam2, mps.gamma, lam2, mps.gamma.conj(), optimize=True)
    return complex(np.trace(rho @ np.asarray(op)))


def bond_expectation(mps: InfiniteMPS, op2) -> complex:
    """<O> for a two-site operator (d² x d², row index s1*d + s2)."""
    d, lam = mps.d, mps.lam
    theta = np.einsum("a,sab,b,tbc,c->stac", lam, mps.gamma, lam, mps.gamma, lam, optimize=True)
    theta = theta.reshape(d * d, -1)
    return complex(np.vdot(theta, np.asarray(op2) @ theta))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def to_json_dict(mps: InfiniteMPS) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "d": mps.d,
        "chi": mps.chi,
        "lambda": [float(x) for x in mps.lam],
        "gamma": {"re": mps.gamma.real.tolist(), "im": mps.gamma.imag.tolist()},
    }


def from_json_dict(data: dict) -> InfiniteMPS:
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise InvalidInput(f"unsupported iMPS schema version {version!r}")
    try:
        g = np.asarray(data["gamma"]["re"], dtype=float) + 1j * np.asarray(data["gamma"]["im"], dtype=float)
        lam = np.asarray(data["lambda"], dtype=float)
        d, chi = int(data["d"]), int(data["chi"])
    except (KeyError, TypeError, ValueError) as err:
        raise InvalidInput(f"malformed iMPS document: {err}") from err
    if g.shape != (d, chi, chi) or lam.shape != (chi,):
        raise InvalidInput(f"declared d={d}, chi={chi} do not match gamma {g.shape}")
    return InfiniteMPS(g, lam)


def save_imps(mps: InfiniteMPS, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(to_json_dict(mps)) + "\n", encoding="utf-8")
    except OSError as err:
        raise IoError(str(err)) from err
    return path


def load_imps(path) -> InfiniteMPS:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise IoError(str(err)) from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise InvalidInput(f"{path}: not valid JSON ({err})") from err
    return from_json_dict(data)
