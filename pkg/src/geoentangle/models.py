"""
Nearest-neighbour spin chains and their ground states.

The transverse-field Ising chain is ``H = -Σ σ^x_i σ^x_{i+1} - h Σ σ^z_i``
(critical at h = 1, central charge 1/2). Ground states are found by
imaginary-time TEBD with a second-order Trotter splitting on a two-site
unit cell, then folded back into a single-site iMPS.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import integrate

from . import imps, numerics
from .errors import InvalidInput, IterationLimit
from .imps import InfiniteMPS

logger = logging.getLogger(__name__)

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
ID2 = np.eye(2)

CENTRAL_CHARGE = {"tfim": 0.5, "xx": 1.0}


@dataclass(frozen=True)
class NNModel:
    """Translation-invariant nearest-neighbour Hamiltonian ``H = Σ_i h2_{i,i+1}``."""

    name: str
    d: int
    h2: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        h2 = np.asarray(self.h2, dtype=complex)
        if h2.shape != (self.d**2, self.d**2):
            raise InvalidInput(f"h2 must be {self.d**2}x{self.d**2}, got {h2.shape}")
        if np.max(np.abs(h2 - h2.conj().T)) > 1e-12:
            raise InvalidInput("h2 is not Hermitian")
        object.__setattr__(self, "h2", h2)


def tfim(h: float, J: float = 1.0) -> NNModel:
    """Transverse-field Ising bond term, field split evenly over the two sites."""
    h2 = -J * np.kron(SX, SX) - 0.5 * h * (np.kron(SZ, ID2) + np.kron(ID2, SZ))
    return NNModel("tfim", 2, h2, {"h": float(h), "J": float(J)})


def xx(h: float = 0.0, J: float = 1.0) -> NNModel:
    """XX chain ``-J Σ (σ^x σ^x + σ^y σ^y) - h Σ σ^z`` (critical, c = 1 for |h| < 2J)."""
    h2 = -J * (np.kron(SX, SX) + np.kron(SY, SY)).real - 0.5 * h * (np.kron(SZ, ID2) + np.kron(ID2, SZ))
    return NNModel("xx", 2, h2, {"h": float(h), "J": float(J)})


MODELS = {"tfim": tfim, "xx": xx}


def make_model(name: str, h: float) -> NNModel:
    try:
        return MODELS[name](h)
    except KeyError:
        raise InvalidInput(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def tfim_exact(h: float):
    """Ground-state energy per site and correlation length of the infinite TFIM.

    ``e0 = -(1/π) ∫_0^π sqrt(1 + h² - 2h cos k) dk`` and ``ξ = 1/|ln h|``
    (``inf`` at the critical point).
    """
    if h < 0:
        raise InvalidInput(f"field must be non-negative, got {h}")
    val, _ = integrate.quad(
        lambda k: math.sqrt(1.0 + h * h - 2.0 * h * math.cos(k)),
        0.0, math.pi, epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    e0 = -val / math.pi
    if h == 0:
        xi = 0.0
    elif h == 1:
        xi = math.inf
    else:
        xi = 1.0 / abs(math.log(h))
    return e0, xi


# --------------------------------------------------------------------------
# iTEBD
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ITEBDOptions:
    """Imaginary-time TEBD settings.

    ``dt_schedule`` is a sequence of ``(dt, max_sweeps)`` pairs with strictly
    descending ``dt``. The energy is measured every ``check_every`` sweeps; a
    stage stops early once it changes by less than ``energy_tol`` per unit
    imaginary time. The search fails if the last window still shows a change
    of ``energy_tol`` or more per sweep.
    """

    chi_max: int = 32
    cutoff: float = 1e-12
    dt_schedule: tuple = ((0.1, 500), (0.01, 500), (0.001, 500), (0.0001, 500))
    energy_tol: float = 1e-10
    check_every: int = 10

    def __post_init__(self):
        dts = [float(dt) for dt, _ in self.dt_schedule]
        if not dts or any(dt <= 0 for dt in dts):
            raise InvalidInput("time steps must be positive")
        if any(a <= b for a, b in zip(dts, dts[1:])):
            raise InvalidInput("dt_schedule must be strictly descending")
        if any(int(n) < 1 for _, n in self.dt_schedule):
            raise InvalidInput("sweep counts must be positive")
        if self.chi_max < 1:
            raise InvalidInput("chi_max must be positive")


def _bond_update(B, lam, i, U, chi_max, cutoff):
    """Hastings-style update of bond (i, i+1) on a two-site unit cell of right-canonical tensors."""
    j = 1 - i
    d = B[i].shape[0]
    C = np.einsum("sab,tbc->astc", B[i], B[j])
    chiL, chiR = C.shape[0], C.shape[3]
    C = np.einsum("uvst,astc->auvc", U.reshape(d, d, d, d), C)
    theta = lam[i][:, None, None, None] * C
    X, S, Y = numerics.svd(theta.reshape(chiL * d, d * chiR))
    keep = min(chi_max, int(np.sum(S > cutoff * S[0])))
    S, Y = S[:keep], Y[:keep]
    norm = np.linalg.norm(S)
    lam[j] = S / norm
    Y = Y.reshape(keep, d, chiR)
    B[j] = Y.transpose(1, 0, 2)
    B[i] = np.einsum("auvc,kvc->uak", C, Y.conj()) / norm
    return 1.0 - norm**2


def _bond_energy(B, lam, i, h2):
    j = 1 - i
    d = B[i].shape[0]
    theta = np.einsum("a,sab,tbc->stac", lam[i], B[i], B[j], optimize=True).reshape(d * d, -1)
    return float(np.vdot(theta, h2 @ theta).real / np.vdot(theta, theta).real)


def _fold_to_single_site(B):
    """Single-site tensor T with ...T T T... equal to ...B0 B1 B0 B1...

    For a translation-invariant state the two sublattice tensors satisfy
    ``B1 = X B0 X / c``; X is the dominant fixed point of the mixed map
    ``Y -> Σ_{st} (B1 B0)^{st} Y (B0 B1)^{st†}``, and ``T = B0 X``.
    """
    d = B[0].shape[0]
    chi0 = B[0].shape[1]
    P = np.einsum("sab,tbc->stac", B[0], B[1]).reshape(d * d, chi0, chi0)
    Q = np.einsum("sab,tbc->stac", B[1], B[0]).reshape(d * d, B[1].shape[1], B[1].shape[1])
    if Q.shape[1] != chi0:
        raise IterationLimit("sublattice bond dimensions differ; state is not translation invariant")

    def apply(v):
        Y = v.reshape(chi0, chi0)
        return np.einsum("nab,bc,ndc->ad", Q, Y, P.conj(), optimize=True).ravel()

    res = numerics.dominant_eigs(apply, chi0 * chi0, k=1)
    X = res.vectors[:, 0].reshape(chi0, chi0)
    if not (np.iscomplexobj(B[0]) or np.iscomplexobj(B[1])):
        # the phase-fixed fixed point of a real map is real up to rounding
        X = X.real
    X = X / np.linalg.norm(X)
    return np.einsum("sab,bc->sac", B[0], X)


def itebd_ground_state(
    model: NNModel,
    opts: ITEBDOptions = ITEBDOptions(),
    seed: int = 0,
    return_info: bool = False,
    initial=None,
):
    """Ground state of ``model`` as a canonical single-site iMPS.

    The evolution starts from the product state ``initial^{⊗∞}``, or from a
    seeded random real product state when ``initial`` is None. A start that
    is an eigenvector of a symmetry of ``model`` stays in that symmetry
    sector.

    Raises
    ------
    IterationLimit
        The energy still changes by ``energy_tol`` or more per sweep at the
        end of the last stage; the final iterate is attached as ``err.best``.
    """
    d = model.d
    if initial is None:
        v = np.random.default_rng(seed).standard_normal(d)
    else:
        v = np.asarray(initial, dtype=float)
        if v.shape != (d,) or not np.any(v):
            raise InvalidInput(f"initial must be a nonzero real vector of length {d}")
    v = v / np.linalg.norm(v)
    B = [v.reshape(d, 1, 1).astype(float), v.reshape(d, 1, 1).astype(float)]
    lam = [np.ones(1), np.ones(1)]
    h2 = model.h2.real if not np.any(model.h2.imag) else model.h2

    energy = math.nan
    rate = math.inf
    per_sweep = math.inf
    sweeps_done = 0
    for dt, n_sweeps in opts.dt_schedule:
        U_half = sla.expm(-0.5 * dt * h2)
        U_full = sla.expm(-dt * h2)
        if np.iscomplexobj(U_half):
            B = [b.astype(complex) for b in B]
        e_prev, last_check = math.nan, 0
        rate = per_sweep = math.inf
        for sweep in range(1, int(n_sweeps) + 1):
            _bond_update(B, lam, 0, U_half, opts.chi_max, opts.cutoff)
            _bond_update(B, lam, 1, U_full, opts.chi_max, opts.cutoff)
            _bond_update(B, lam, 0, U_half, opts.chi_max, opts.cutoff)
            sweeps_done += 1
            if sweep % opts.check_every == 0 or sweep == n_sweeps:
                energy = 0.5 * (_bond_energy(B, lam, 0, h2) + _bond_energy(B, lam, 1, h2))
                if not math.isnan(e_prev):
                    span = sweep - last_check
                    per_sweep = abs(energy - e_prev) / span
                    rate = per_sweep / dt
                    # stationary in imaginary time, not merely slow because dt is small
                    if rate < opts.energy_tol:
                        break
                e_prev, last_check = energy, sweep
        logger.debug("dt=%g: E=%.14f dE/dtau=%.2e after %d sweeps", dt, energy, rate, sweep)

    T = _fold_to_single_site(B)
    mps = imps.canonicalize(T)
    info = {"energy": energy, "change_per_sweep": per_sweep, "rate": rate, "sweeps": sweeps_done}
    if per_sweep >= opts.energy_tol:
        err = IterationLimit(f"energy still changing by {per_sweep:.2e} per sweep", best=mps)
        err.info = info
        raise err
    return (mps, info) if return_info else mps


def energy_per_site(mps: InfiniteMPS, model: NNModel) -> float:
    return float(imps.bond_expectation(mps, model.h2).real)
