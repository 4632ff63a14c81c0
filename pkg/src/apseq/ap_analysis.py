"""Quantitative almost-periodicity checkers on finite windows.

Three classes are checked, each relative to a seminorm kappa:

  Bohr        relative density of eps-translation numbers tau with
              sup_k kappa(F(k+tau) - F(k)) <= eps
  Weyl        windowed averages l^{-1} sum_{j=s..s+l} kappa(F(j)-P(j))^p
              uniformly over the window start s, against a trigonometric
              polynomial P
  Besicovitch symmetric Cesaro averages l^{-1} sum_{|j|<=l} kappa(F(j)-P(j))^p
              with the limit over l estimated from a declared grid

The limits of the definitions are unreachable at desk scale; every checker
states exactly which finite ranges it scanned so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import InputContractError
from .seq_core import (BiSequence, Seminorm, SeminormFamily, TrigPoly,
                       Vector, Window, as_window)


@dataclass
class APReport:
    """Outcome of a Bohr translation-number scan.

    max_defect is the minimax defect: the worst over window starts t of the
    best achievable sup-defect by some tau in [t, t+L].  The verdict is
    exactly max_defect <= epsilon, so the defect stays diagnosable when the
    verdict is false.
    """

    epsilon: float
    seminorm_label: str
    verdict: bool
    witness_L: int | None
    translation_numbers: list[int]
    max_defect: float
    k_window: tuple[int, int] | None = None
    tau_range: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "seminorm_label": self.seminorm_label,
            "verdict": self.verdict,
            "witness_L": self.witness_L,
            "translation_numbers": list(self.translation_numbers),
            "max_defect": self.max_defect,
            "k_window": list(self.k_window) if self.k_window else None,
            "tau_range": list(self.tau_range) if self.tau_range else None,
        }


@dataclass
class BesicovitchReport:
    """Cesaro averages per grid length l and the declared limit estimator."""

    p: float
    values_by_l: list[tuple[int, float]]
    limsup_estimate: float
    seminorm_label: str | None = None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "values_by_l": [[l, v] for l, v in self.values_by_l],
            "limsup_estimate": self.limsup_estimate,
            "seminorm_label": self.seminorm_label,
        }


def translation_defects(F: BiSequence, sn: Seminorm, k_window,
                        taus: np.ndarray) -> np.ndarray:
    """sup_{k in k_window} kappa(F(k+tau) - F(k)) for each tau."""
    k_window = as_window(k_window)
    taus = np.asarray(taus, dtype=np.int64)
    lo = k_window.start + int(taus.min())
    hi = k_window.end + int(taus.max())
    all_vals = F.window_values(Window(min(lo, k_window.start),
                                      max(hi, k_window.end)))
    base0 = min(lo, k_window.start)
    base = all_vals[k_window.start - base0:k_window.end - base0 + 1]
    n = len(k_window)
    out = np.empty(taus.shape[0])
    for i, tau in enumerate(taus):
        a = k_window.start + int(tau) - base0
        out[i] = sn.of_rows(all_vals[a:a + n] - base).max()
    return out


def bohr_check(F: BiSequence, sn: Seminorm, epsilon: float, k_window,
               tau_range, L: int) -> APReport:
    """Scan every start t in tau_range for a translation number in [t, t+L].

    The scan is exhaustive: defects are computed for every candidate tau in
    [tau_range.start, tau_range.end + L].  Recorded translation numbers are
    all scanned tau with defect <= epsilon.
    """
    if L < 1:
        raise InputContractError("interval length L must be >= 1")
    if epsilon < 0:
        raise InputContractError("epsilon must be >= 0")
    k_window = as_window(k_window)
    tau_range = as_window(tau_range)
    taus = np.arange(tau_range.start, tau_range.end + L + 1)
    defects = translation_defects(F, sn, k_window, taus)
    # minimax over sliding windows of length L+1 (tau in [t, t+L])
    windows = np.lib.stride_tricks.sliding_window_view(defects, L + 1)
    best_per_t = windows.min(axis=1)
    max_defect = float(best_per_t.max())
    verdict = bool(max_defect <= epsilon)
    translations = [int(t) for t, d in zip(taus, defects) if d <= epsilon]
    return APReport(epsilon=float(epsilon), seminorm_label=sn.label,
                    verdict=verdict, witness_L=L if verdict else None,
                    translation_numbers=translations, max_defect=max_defect,
                    k_window=(k_window.start, k_window.end),
                    tau_range=(tau_range.start, tau_range.end))


def _difference_values(F: BiSequence, P: BiSequence, sn: Seminorm,
                       window: Window) -> np.ndarray:
    if F.dim != P.dim:
        raise InputContractError(f"dimension mismatch {F.dim} vs {P.dim}")
    return sn.of_rows(F.window_values(window) - P.window_values(window))


def weyl_distance(F: BiSequence, P: BiSequence, sn: Seminorm, p: float,
                  l: int, s_range) -> float:
    """max over s in s_range of l^{-1} sum_{j=s}^{s+l} kappa(F(j)-P(j))^p.

    The sum has l+1 terms by definition; the normalizer is l.
    """
    if l < 1:
        raise InputContractError("window length l must be >= 1")
    if p < 1:
        raise InputContractError("exponent p must be >= 1")
    s_range = as_window(s_range)
    vals = _difference_values(F, P, sn,
                              Window(s_range.start, s_range.end + l)) ** p
    csum = np.concatenate([[0.0], np.cumsum(vals)])
    n_starts = len(s_range)
    sums = csum[l + 1:l + 1 + n_starts] - csum[:n_starts]
    return float(sums.max() / l)


def besicovitch_distance(F: BiSequence, P: BiSequence, sn: Seminorm, p: float,
                         l_grid=(64, 128, 256, 512)) -> BesicovitchReport:
    """Symmetric averages l^{-1} sum_{j=-l}^{l} kappa(F(j)-P(j))^p per grid l.

    The limit over l is estimated as the max over the largest quartile of the
    grid, a declared estimator in place of the unreachable limsup.
    """
    grid = [int(l) for l in l_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise InputContractError("l_grid must be nonempty and increasing")
    if p < 1:
        raise InputContractError("exponent p must be >= 1")
    lmax = grid[-1]
    vals = _difference_values(F, P, sn, Window(-lmax, lmax)) ** p
    csum = np.concatenate([[0.0], np.cumsum(vals)])

    def symmetric_sum(l: int) -> float:
        return float(csum[lmax + l + 1] - csum[lmax - l])

    values = [(l, symmetric_sum(l) / l) for l in grid]
    top = max(1, ceil(len(grid) / 4))
    limsup = max(v for _, v in values[-top:])
    return BesicovitchReport(p=float(p), values_by_l=values,
                             limsup_estimate=float(limsup),
                             seminorm_label=sn.label)


def omega_c_check(F: BiSequence, omega: int, c: complex,
                  family: SeminormFamily, k_window) -> float:
    """max over k in k_window and kappa of kappa(F(k+omega) - c F(k));
    zero means (omega, c)-periodic on the window."""
    if omega < 1:
        raise InputContractError("omega must be a positive integer")
    if c == 0:
        raise InputContractError("c must be nonzero")
    k_window = as_window(k_window)
    vals = F.window_values(k_window.extended(right=omega))
    n = len(k_window)
    diff = vals[omega:omega + n] - complex(c) * vals[:n]
    return float(max(sn.of_rows(diff).max() for sn in family))


def bohr_fourier_coefficient(F: BiSequence, lam: float, N: int) -> Vector:
    """Empirical mean (2N+1)^{-1} sum_{k=-N}^{N} F(k) exp(-i lam k)."""
    if N < 1:
        raise InputContractError("N must be >= 1")
    ks = np.arange(-N, N + 1)
    vals = F.window_values(Window(-N, N))
    phases = np.exp(-1j * float(lam) * ks)
    return (phases[:, None] * vals).sum(axis=0) / (2 * N + 1)


def fit_trig_poly(F: BiSequence, frequencies, N: int) -> TrigPoly:
    """Trig-polynomial approximant on a user-declared frequency list.

    There is no automatic frequency discovery; coefficients are the
    empirical means at the declared frequencies.
    """
    freqs = [float(l) for l in frequencies]
    if not freqs:
        raise InputContractError("need at least one frequency")
    return TrigPoly.of([(lam, bohr_fourier_coefficient(F, lam, N))
                        for lam in freqs])
