"""
Numerical radius versus spectral radius of the block matrix B(φ).

The double maximisation maximises |r† B r| over unit r, which is the
numerical radius w(B). The fidelity of M blocks with φ^{⊗M}, on the other
hand, decays at the rate set by the spectral radius ρ(B). The two agree
when B is normal, as it is for the Ising ground states, and differ
otherwise. This script shows both cases.

Run:  python demos/04_numerical_radius.py
"""

import math

import numpy as np

from geoentangle import geoent, harness, imps


def fidelity_rate(mps, L, res, M=2000):
    phi, _ = geoent.optimal_block_state(mps, L, res.r)
    s = np.sqrt(mps.lam)
    B = s[:, None] * geoent.overlap_matrix(mps, L, phi) * s[None, :]
    ln2M = geoent.log_fidelity_from_overlap(B, mps.lam, 2 * M)
    lnM = geoent.log_fidelity_from_overlap(B, mps.lam, M)
    return math.exp((ln2M - lnM) / M)


def show(label, mps, L):
    res = geoent.geoent_finite(mps, L)
    print(f"{label:22s} w(B)² = {res.d_max_abs ** 2:.8f}   ρ(B)² = {res.spectral_radius ** 2:.8f}   "
          f"per-block fidelity = {fidelity_rate(mps, L, res):.8f}")


def main():
    show("random chi=2, L=2", imps.random_imps(3, 2, 2), 2)
    show("random chi=3, L=1", imps.random_imps(8, 2, 3), 1)
    show("Ising h=3, L=2", harness.ground_state("tfim", 3.0, 16), 2)


if __name__ == "__main__":
    main()
