"""Operator sequences k -> A(k) with per-seminorm bound certificates.

A bound certificate for a seminorm kappa is a rule k -> c(k) > 0 with
kappa(A(k) x) <= c(k) * kappa(x) for all x.  Certificates gate everything
downstream: the solution series converges when the backward products
c(k-1) * ... * c(k-v) are summable over v, and the truncation tail bounds
are built from those same products.

Certificates are either supplied analytically by the problem builder or
derived here as exact induced bounds of the concrete matrices:

  sup norm      max absolute row sum
  l1            max absolute column sum
  l2            largest singular value
  lp, 1<p<inf   interpolation bound ||A||_1^(1/p) * ||A||_inf^(1-1/p)
  stencil S     max absolute row sum of S A S^{-1} (S is the zero-padded
                stencil matrix, which is invertible for difference stencils)
  block_sum     max over block columns j of sum_i c_base(A_ij)

All of these are sound upper bounds, so randomized soundness checks hold
up to roundoff with no fudge factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CertificateError, InputContractError, ShapeError
from .seq_core import Seminorm, SeminormFamily, Vector, Window, as_window

Matrix = np.ndarray  # (d, d) complex128

#: default depth cap and tolerance for certificate-product certification
V_MAX_DEFAULT = 10_000
RAC_TOL_DEFAULT = 1e-12


def as_matrix(m, dim: int | None = None) -> Matrix:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ShapeError(f"expected dimension {dim}, got {a.shape[0]}")
    a = a.copy()
    a.flags.writeable = False
    return a


def induced_bound(matrix: Matrix, sn: Seminorm) -> float:
    """Sound upper bound c with sn(A x) <= c * sn(x) for all x."""
    a = np.abs(matrix)
    if sn.kind == "sup":
        return float(a.sum(axis=1).max())
    if sn.kind == "p":
        n1 = float(a.sum(axis=0).max())
        if sn.p == 1:
            return n1
        if sn.p == 2:
            return float(np.linalg.norm(matrix, 2))
        ninf = float(a.sum(axis=1).max())
        return n1 ** (1.0 / sn.p) * ninf ** (1.0 - 1.0 / sn.p)
    if sn.kind == "stencil":
        s = sn.stencil_matrix(matrix.shape[0])
        try:
            conj = np.linalg.solve(s.T.conj(), (s @ matrix).T.conj()).T.conj()
        except np.linalg.LinAlgError as exc:
            raise CertificateError(
                f"stencil seminorm {sn.label!r} has a singular stencil matrix; "
                f"supply an analytic certificate instead") from exc
        return float(np.abs(conj).sum(axis=1).max())
    if sn.kind == "block_sum":
        p = sn.blocks
        d, rem = divmod(matrix.shape[0], p)
        if rem:
            raise ShapeError(f"matrix of size {matrix.shape[0]} is not "
                             f"{p}x{p} blocks")
        col_sums = np.zeros(p)
        for j in range(p):
            for i in range(p):
                block = matrix[i * d:(i + 1) * d, j * d:(j + 1) * d]
                col_sums[j] += induced_bound(block, sn.base)
        return float(col_sums.max())
    raise InputContractError(f"unknown seminorm kind {sn.kind!r}")


class OperatorSequence:
    """k -> A(k) with bound certificates and per-seminorm sup bounds.

    Backends: constant matrix, periodic list of matrices, or a pure
    generator rule.  Matrices produced by generators are memoized per k
    (windows are small and evaluation must be deterministic).

    ``certificates[label]`` is a rule k -> c(k); ``sup_bounds[label]`` caps
    c(k) over the range the solver will touch.  For constant and periodic
    backends the sup is exact; generator backends take it from a declared
    probe window recorded in ``sup_probe``.
    """

    def __init__(self, dim: int, fn: Callable[[int], Matrix], backend: str,
                 family: SeminormFamily | None = None,
                 certificates: dict[str, Callable[[int], float]] | None = None,
                 sup_bounds: dict[str, float] | None = None,
                 sup_probe: Window | None = None,
                 period: int | None = None):
        self.dim = int(dim)
        self.backend = backend
        self.period = period
        self.family = family
        self._fn = fn
        self._mat_cache: dict[int, Matrix] = {}
        self._cert_cache: dict[tuple[str, int], float] = {}
        self.sup_probe = sup_probe
        if certificates is None:
            if family is None:
                raise InputContractError(
                    "need a seminorm family to derive certificates, or "
                    "explicit certificate rules")
            certificates = {
                sn.label: (lambda k, _sn=sn: induced_bound(self.matrix(k), _sn))
                for sn in family}
        self.certificates = certificates
        if sup_bounds is None:
            sup_bounds = self._derive_sup_bounds()
        self.sup_bounds = sup_bounds

    # -- constructors -----------------------------------------------------

    @staticmethod
    def constant(matrix, family: SeminormFamily | None = None,
                 certificates=None, sup_bounds=None) -> "OperatorSequence":
        m = as_matrix(matrix)
        return OperatorSequence(m.shape[0], lambda k: m, "constant",
                                family=family, certificates=certificates,
                                sup_bounds=sup_bounds)

    @staticmethod
    def periodic(matrices: Sequence, family: SeminormFamily | None = None,
                 certificates=None, sup_bounds=None) -> "OperatorSequence":
        mats = [as_matrix(m) for m in matrices]
        if not mats:
            raise InputContractError("periodic backend needs >= 1 matrix")
        dim = mats[0].shape[0]
        for m in mats:
            if m.shape[0] != dim:
                raise ShapeError("periodic matrices have mixed dimensions")
        omega = len(mats)
        return OperatorSequence(dim, lambda k: mats[k % omega], "periodic",
                                family=family, certificates=certificates,
                                sup_bounds=sup_bounds, period=omega)

    @staticmethod
    def from_function(dim: int, fn: Callable[[int], Matrix],
                      family: SeminormFamily | None = None,
                      certificates=None, sup_bounds=None,
                      sup_probe=None) -> "OperatorSequence":
        probe = as_window(sup_probe) if sup_probe is not None else None
        return OperatorSequence(dim, lambda k: as_matrix(fn(k), dim),
                                "generator", family=family,
                                certificates=certificates,
                                sup_bounds=sup_bounds, sup_probe=probe)

    # -- evaluation --------------------------------------------------------

    def matrix(self, k: int) -> Matrix:
        k = int(k)
        if self.backend == "constant":
            return self._fn(0)
        if self.backend == "periodic":
            return self._fn(k)
        m = self._mat_cache.get(k)
        if m is None:
            m = self._mat_cache[k] = self._fn(k)
        return m

    def apply(self, k: int, x: Vector) -> Vector:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.dim,):
            raise ShapeError(f"operator dim {self.dim} vs value shape {x.shape}")
        return self.matrix(k) @ x

    def certificate(self, label: str, k: int) -> float:
        if label not in self.certificates:
            raise CertificateError(f"no certificate for seminorm {label!r}")
        k = int(k)
        if self.backend == "constant":
            k = 0
        elif self.backend == "periodic":
            k = k % self.period
        key = (label, k)
        c = self._cert_cache.get(key)
        if c is None:
            c = self._cert_cache[key] = float(self.certificates[label](k))
        return c

    def certificate_array(self, label: str, window: Window) -> np.ndarray:
        return np.array([self.certificate(label, k) for k in window])

    def sup_bound(self, label: str) -> float:
        if label not in self.sup_bounds:
            raise CertificateError(f"no sup bound for seminorm {label!r}")
        return self.sup_bounds[label]

    def labels(self) -> list[str]:
        return sorted(self.certificates)

    def _derive_sup_bounds(self) -> dict[str, float]:
        if not self.certificates:
            return {}
        if self.backend == "constant":
            ks: Iterable[int] = (0,)
        elif self.backend == "periodic":
            ks = range(self.period)
        else:
            if self.sup_probe is None:
                raise InputContractError(
                    "generator-backed operator sequences need either explicit "
                    "sup_bounds or a sup_probe window")
            ks = self.sup_probe
        return {label: max(self.certificate(label, k) for k in ks)
                for label in self.certificates}


def op_apply(A: OperatorSequence, k: int, x: Vector) -> Vector:
    """A(k) x."""
    return A.apply(k, x)


def op_product_apply(A: OperatorSequence, k: int, v: int, x: Vector) -> Vector:
    """A(k-1) A(k-2) ... A(k-v) x, applied right to left as matrix-vector
    products; the full product matrix is never formed."""
    if v < 1:
        raise InputContractError(f"product depth must be >= 1, got {v}")
    y = np.asarray(x, dtype=np.complex128)
    for i in range(v, 0, -1):
        y = A.apply(k - i, y)
    return y


@dataclass
class RacCertificate:
    """Partial sums of backward certificate products at one (seminorm, k).

    partial_sums[V-1] = sum_{v=1..V} prod_{i=1..v} c(k-i), nondecreasing in V.
    When every c <= c_sup < 1 the tail after depth V is bounded by
    prod_{i<=V} c(k-i) * c_sup / (1 - c_sup), which reduces to the geometric
    c_sup^(V+1) / (1 - c_sup) for constant certificates.
    """

    seminorm_label: str
    k: int
    partial_sums: list[float] = field(default_factory=list)
    tail_bound: float | None = None
    converged: bool = False
    sup_bound: float | None = None
    depth: int = 0


def rac_certify(A: OperatorSequence, label: str, k: int,
                V_max: int = V_MAX_DEFAULT,
                tol: float = RAC_TOL_DEFAULT) -> RacCertificate:
    """Certify summability of backward certificate products at (label, k).

    Converged when the certified tail bound drops below tol, or when the
    increments stay below tol for 10 consecutive depths with sup bound < 1.
    Without sup bound < 1 no finite prefix certifies the tail, so the
    certificate reports converged=False and the caller decides.
    """
    if V_max < 1:
        raise InputContractError("V_max must be >= 1")
    sup = A.sup_bound(label)
    cert = RacCertificate(seminorm_label=label, k=int(k), sup_bound=sup)
    prod = 1.0
    total = 0.0
    small_increments = 0
    geometric = sup < 1.0
    for v in range(1, V_max + 1):
        prod *= A.certificate(label, k - v)
        total += prod
        cert.partial_sums.append(total)
        cert.depth = v
        if geometric:
            cert.tail_bound = prod * sup / (1.0 - sup)
            if cert.tail_bound <= tol:
                cert.converged = True
                break
            small_increments = small_increments + 1 if prod < tol else 0
            if small_increments >= 10:
                cert.converged = True
                break
    return cert
