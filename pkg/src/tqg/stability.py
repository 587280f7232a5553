"""Linearised thermal Rossby-wave dispersion relation and growth-rate scans.

Around the constant-gradient equilibrium (zonal velocity U, planetary
vorticity gradient beta, buoyancy gradient B, bathymetry gradient H), the
Doppler-shifted phase speed C of a plane wave with wavevector modulus |k|
solves

    C^2 (|k|^2 + 1)(alpha |k|^2 + 1) + C X + Y = 0,

with X = U + B - beta and Y = (U - H/2) B.  Complex roots signal
instability; for Y > 0 they occur exactly when
(|k|^2 + 1)(alpha |k|^2 + 1) > X^2 / (4 Y).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DispersionParams:
    """Equilibrium gradients; X and Y are always derived, never stored."""

    U: float = 1.0
    beta: float = 0.0
    B: float = 1.0
    H: float = 0.0

    @property
    def X(self) -> float:
        return self.U + self.B - self.beta

    @property
    def Y(self) -> float:
        return (self.U - self.H / 2.0) * self.B


def phase_speed(params: DispersionParams, k, alpha: float):
    """Both complex roots C+ (principal + branch) and C- of the quadratic.

    For real discriminant C+ >= C-; for complex roots they are conjugate
    with Im(C+) >= 0, so the ordering (by real part, then imaginary part)
    is deterministic.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("wavevector modulus must be nonnegative")
    kk = k * k
    P = (kk + 1.0) * (alpha * kk + 1.0)
    disc = params.X**2 - 4.0 * params.Y * P
    root = np.sqrt(disc.astype(complex))
    c_plus = (-params.X + root) / (2.0 * P)
    c_minus = (-params.X - root) / (2.0 * P)
    return c_plus, c_minus


def is_unstable(params: DispersionParams, k, alpha: float):
    """Closed-form instability predicate: complex phase speed at this |k|."""
    k = np.asarray(k, dtype=float)
    if params.Y <= 0:
        return np.zeros(k.shape, dtype=bool)
    P = (k * k + 1.0) * (alpha * k * k + 1.0)
    return P > params.X**2 / (4.0 * params.Y)


@dataclass
class GrowthRateScan:
    params: DispersionParams
    alphas: list
    k: np.ndarray  # (K,)
    c_plus: np.ndarray  # (A, K) complex
    c_minus: np.ndarray  # (A, K) complex
    growth_rate: np.ndarray  # (A, K): |k| * max-branch Im(C), clipped at 0

    def k_max(self, alpha: float) -> float:
        """Wavenumber of maximum growth rate for one alpha."""
        a = self.alphas.index(alpha)
        return float(self.k[np.argmax(self.growth_rate[a])])


def growth_rate_scan(params: DispersionParams, alphas, kgrid) -> GrowthRateScan:
    """Tabulate both dispersion branches and |k| * Im(C) over (alpha, |k|)."""
    alphas = list(alphas)
    kgrid = np.asarray(kgrid, dtype=float)
    if len(alphas) == 0 or kgrid.size == 0:
        raise ValueError("alpha list and k grid must be non-empty")
    cp = np.empty((len(alphas), kgrid.size), dtype=complex)
    cm = np.empty_like(cp)
    for a, alpha in enumerate(alphas):
        cp[a], cm[a] = phase_speed(params, kgrid, alpha)
    growth = kgrid[None, :] * np.maximum(
        np.maximum(cp.imag, cm.imag), 0.0
    )
    return GrowthRateScan(
        params=params, alphas=alphas, k=kgrid, c_plus=cp, c_minus=cm,
        growth_rate=growth,
    )


def write_scan_csv(scan: GrowthRateScan, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["alpha", "k", "re_c_plus", "im_c_plus", "re_c_minus", "im_c_minus",
             "growth_rate"]
        )
        for a, alpha in enumerate(scan.alphas):
            for i, k in enumerate(scan.k):
                writer.writerow([
                    f"{alpha:.17g}",
                    f"{k:.17g}",
                    f"{scan.c_plus[a, i].real:.17g}",
                    f"{scan.c_plus[a, i].imag:.17g}",
                    f"{scan.c_minus[a, i].real:.17g}",
                    f"{scan.c_minus[a, i].imag:.17g}",
                    f"{scan.growth_rate[a, i]:.17g}",
                ])
