"""Block companion reduction of p-th order equations and the p = 2 solver.

The order-p equation

    C A_p(k+p) u(k+p) + ... + C A_1(k+1) u(k+1) + A_0(k) u(k) = C f(k)

is rewritten over the product state vec u(k) = [u(k), ..., u(k+p-1)] as

    boldC boldB(k+1) vec u(k+1) = boldA(k) vec u(k) + boldC vec f(k)

with boldA(k) = diag(-A_0(k), C, ..., C), boldB carrying the shifted
coefficients in its first row and identities on the subdiagonal, and
boldC = C on every block.  The reduction selection boldB(k) [boldA(k)]^{-1}
boldC keeps unit-size subdiagonal blocks for p >= 3, so its certificate
products do not decay and the series gate only opens for p = 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import InputContractError, NumericError, ShapeError
from .first_order import SolveReport
from .operator_model import (Matrix, OperatorSequence, V_MAX_DEFAULT,
                             as_matrix, induced_bound)
from .resolvent import COND_LIMIT, ResolventSelection, solve_inclusion
from .seq_core import BiSequence, SeminormFamily, as_window


@dataclass
class CompanionSystem:
    """Block matrices of the order-p reduction over the product space Y^p."""

    p: int
    dim: int                      # base dimension d; blocks are d x d
    A_seqs: tuple[OperatorSequence, ...]   # A_0 .. A_p
    C: Matrix

    def __post_init__(self):
        self.C = as_matrix(self.C, self.dim)

    @property
    def block_dim(self) -> int:
        return self.p * self.dim

    def _zeros(self) -> np.ndarray:
        n = self.block_dim
        return np.zeros((n, n), dtype=np.complex128)

    def _set_block(self, m: np.ndarray, i: int, j: int, block) -> None:
        d = self.dim
        m[i * d:(i + 1) * d, j * d:(j + 1) * d] = block

    def bold_A(self, k: int) -> Matrix:
        """diag(-A_0(k), C, ..., C)."""
        m = self._zeros()
        self._set_block(m, 0, 0, -self.A_seqs[0].matrix(k))
        for i in range(1, self.p):
            self._set_block(m, i, i, self.C)
        return m

    def bold_B(self, j: int) -> Matrix:
        """First row A_1(j), A_2(j+1), ..., A_p(j+p-1); identities on the
        subdiagonal.  The argument is the sequence index itself, so the
        equation uses bold_B(k+1)."""
        m = self._zeros()
        for col in range(self.p):
            self._set_block(m, 0, col, self.A_seqs[col + 1].matrix(j + col))
        eye = np.eye(self.dim)
        for row in range(1, self.p):
            self._set_block(m, row, row - 1, eye)
        return m

    def bold_C(self) -> Matrix:
        m = self._zeros()
        for i in range(self.p):
            self._set_block(m, i, i, self.C)
        return m

    def lift(self, f: BiSequence) -> BiSequence:
        """vec f(k) = [f(k), 0, ..., 0]."""
        if f.dim != self.dim:
            raise ShapeError(f"forcing dim {f.dim} vs base dim {self.dim}")
        p, d = self.p, self.dim

        def fn(k: int):
            out = np.zeros(p * d, dtype=np.complex128)
            out[:d] = f(k)
            return out

        return BiSequence.from_function(p * d, fn)


def build_companion(p: int, A_seqs, C) -> CompanionSystem:
    """Assemble the reduction matrices for an order-p equation, p >= 2."""
    if p < 2:
        raise InputContractError(f"companion reduction needs order p >= 2, got {p}")
    seqs = tuple(A_seqs)
    if len(seqs) != p + 1:
        raise InputContractError(f"need p+1 = {p + 1} coefficient sequences, "
                                 f"got {len(seqs)}")
    dim = seqs[0].dim
    for s in seqs:
        if s.dim != dim:
            raise ShapeError("coefficient sequences have mixed dimensions")
    return CompanionSystem(p=p, dim=dim, A_seqs=seqs, C=as_matrix(C, dim))


def companion_D_block(sys: CompanionSystem, A0inv_C: OperatorSequence,
                      k: int) -> Matrix:
    """The reduction selection bold_B(k) [bold_A(k)]^{-1} bold_C, assembled
    blockwise: only the first row, the (2,1) resolvent block, and the
    subdiagonal identities are nonzero.  Equals the dense triple product.
    """
    if A0inv_C.dim != sys.dim:
        raise ShapeError("A0inv_C dimension mismatch")
    d, p = sys.dim, sys.p
    g = A0inv_C.matrix(k)                    # [A_0(k)]^{-1} C
    m = sys._zeros()
    sys._set_block(m, 0, 0, -(sys.A_seqs[1].matrix(k) @ g))
    for col in range(1, p):
        sys._set_block(m, 0, col, sys.A_seqs[col + 1].matrix(k + col))
    sys._set_block(m, 1, 0, -g)
    eye = np.eye(d)
    for row in range(2, p):
        sys._set_block(m, row, row - 1, eye)
    return m


def companion_D_dense(sys: CompanionSystem, k: int) -> Matrix:
    """Independent dense route: bold_B(k) @ solve(bold_A(k), bold_C)."""
    return sys.bold_B(k) @ np.linalg.solve(sys.bold_A(k), sys.bold_C())


def order_p_series_gate(p: int) -> None:
    """The series route is only certified for p = 2: for p >= 3 the selection
    keeps identity blocks on its subdiagonal, the per-seminorm certificates
    cannot fall below 1, and the backward certificate products do not decay."""
    if p != 2:
        raise InputContractError(
            f"order p={p} is not solvable by the companion series route; "
            "the selection has unit-size subdiagonal blocks for p >= 3, so "
            "the certificate-product summability condition fails. "
            "Use build_companion for structure or forward iteration instead.")


def _a0_inverse_sequence(A0: OperatorSequence, C: Matrix,
                         cond_limit: float = COND_LIMIT) -> OperatorSequence:
    def fn(k: int) -> Matrix:
        m = A0.matrix(k)
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > cond_limit:
            raise NumericError(f"A0({k}) condition estimate {cond:.3e} "
                               f"exceeds {cond_limit:.1e}")
        return np.linalg.solve(m, C)

    if A0.backend == "constant":
        return OperatorSequence.constant(fn(0), certificates={})
    if A0.backend == "periodic":
        return OperatorSequence.periodic([fn(k) for k in range(A0.period)],
                                         certificates={})
    return OperatorSequence(A0.dim, fn, "generator", certificates={})


def _joint_sup_indices(seqs, sup_probe) -> list[int]:
    backends = {s.backend for s in seqs}
    if backends <= {"constant"}:
        return [0]
    if backends <= {"constant", "periodic"}:
        period = 1
        for s in seqs:
            if s.backend == "periodic":
                period = period * s.period // gcd(period, s.period)
        return list(range(period + 1))  # +1 covers the c3(k+1) shift
    if sup_probe is None:
        raise InputContractError(
            "generator-backed coefficients need a sup_probe window")
    return list(as_window(sup_probe))


def solve_second_order(A0: OperatorSequence, A1: OperatorSequence,
                       A2: OperatorSequence, C, f: BiSequence, window,
                       tol: float = 1e-10, V_max: int = V_MAX_DEFAULT,
                       family: SeminormFamily | None = None,
                       sup_probe=None, pad_right: int = 2,
                       threads: int | None = None
                       ) -> tuple[BiSequence, SolveReport]:
    """Solve C A_2(k+2) u(k+2) + C A_1(k+1) u(k+1) + A_0(k) u(k) = C f(k).

    Per-seminorm certificates are the sum of three pieces exactly as the
    sufficient condition combines them: c1 for [A_0]^{-1} C, c2 for
    A_1 [A_0]^{-1} C, c3 for A_2 (taken at the index the selection block
    actually carries).  The summed certificate must stay below 1.
    The scalar-level residual of the order-2 equation is certified on the
    returned u.
    """
    order_p_series_gate(2)
    family = family or A0.family or A1.family or A2.family
    if family is None:
        raise InputContractError("need a seminorm family")
    window = as_window(window)
    C = as_matrix(C, A0.dim)
    sys = build_companion(2, [A0, A1, A2], C)
    G = _a0_inverse_sequence(A0, C)
    d = A0.dim

    def c_pieces(label: str, k: int) -> tuple[float, float, float]:
        sn = family.by_label(label)
        g = G.matrix(k)
        return (induced_bound(g, sn),
                induced_bound(A1.matrix(k) @ g, sn),
                induced_bound(A2.matrix(k + 1), sn))

    piece_cache: dict[tuple[str, int], tuple[float, float, float]] = {}

    def combined(label: str, k: int) -> float:
        key = (label, k)
        got = piece_cache.get(key)
        if got is None:
            got = piece_cache[key] = c_pieces(label, k)
        return got[0] + got[1] + got[2]

    certs = {sn.label: (lambda k, _l=sn.label: combined(_l, k))
             for sn in family}
    ks = _joint_sup_indices([A0, A1, A2], sup_probe)
    sups = {lbl: max(rule(k) for k in ks) for lbl, rule in certs.items()}

    lifted = family.lifted(2)
    D = OperatorSequence(2 * d, lambda k: companion_D_block(sys, G, k),
                         "generator", family=lifted,
                         certificates=certs, sup_bounds=sups)
    vec_f = sys.lift(f)
    sel = ResolventSelection(D, sys.bold_C(), "companion reduction")

    amp = max(induced_bound(C, sn) for sn in family)
    inner_tol = tol / (4.0 * max(1.0, amp))
    u_pad = max(2, pad_right)  # the order-2 residual consumes u(k+2)
    v, report = solve_inclusion(sel, vec_f, window, tol=inner_tol,
                                V_max=V_max, pad_right=u_pad + 1,
                                threads=threads)
    report.tol = tol

    # vec u(k) = [bold_A(k)]^{-1} bold_C (v(k+1) - vec f(k)):
    # block 1 is -G(k) applied to the head, block 2 passes through
    u_window = window.extended(right=u_pad)
    vec_u = np.empty((len(u_window), 2 * d), dtype=np.complex128)
    for i, k in enumerate(u_window):
        w = np.asarray(v(k + 1)) - vec_f(k)
        vec_u[i, :d] = -(G.matrix(k) @ w[:d])
        vec_u[i, d:] = w[d:]
    u = BiSequence.from_table(u_window.start, vec_u[:, :d])

    shift_defect = float(np.abs(vec_u[:-1, d:] - vec_u[1:, :d]).max())
    report.residual_form = "second_order_direct"
    report.max_residual = second_order_residual(A0, A1, A2, C, f, u, window,
                                                family)
    report.extras["shift_consistency_defect"] = shift_defect
    return u, report


def second_order_residual(A0, A1, A2, C, f: BiSequence, u: BiSequence,
                          window, family: SeminormFamily) -> dict[str, float]:
    """max of kappa(C A2(k+2) u(k+2) + C A1(k+1) u(k+1) + A0(k) u(k) - C f(k))."""
    window = as_window(window)
    C = as_matrix(C, u.dim)
    us = u.window_values(window.extended(right=2))
    fs = f.window_values(window)
    m2 = np.stack([A2.matrix(k + 2) for k in window])
    m1 = np.stack([A1.matrix(k + 1) for k in window])
    m0 = np.stack([A0.matrix(k) for k in window])
    rows = (np.einsum("pij,pj->pi", m2, us[2:]) @ C.T
            + np.einsum("pij,pj->pi", m1, us[1:-1]) @ C.T
            + np.einsum("pij,pj->pi", m0, us[:-2]) - fs @ C.T)
    return {sn.label: float(sn.of_rows(rows).max()) for sn in family}


def companion_forward_oracle(sys: CompanionSystem, f: BiSequence, k0: int,
                             vec0, window) -> BiSequence:
    """Forward iteration of the companion system from vec u(k0) = vec0,
    solving boldC boldB(k+1) vec u(k+1) = boldA(k) vec u(k) + boldC vec f(k)
    step by step (needs invertible boldC boldB)."""
    window = as_window(window)
    if k0 > window.start:
        raise InputContractError("k0 must not exceed the window start")
    vec_f = sys.lift(f)
    bc = sys.bold_C()
    cur = np.asarray(vec0, dtype=np.complex128)
    if cur.shape != (sys.block_dim,):
        raise ShapeError(f"initial state needs shape ({sys.block_dim},)")
    values = np.empty((window.end - k0 + 1, sys.block_dim), dtype=np.complex128)
    values[0] = cur
    for i, k in enumerate(range(k0, window.end)):
        rhs = sys.bold_A(k) @ cur + bc @ vec_f(k)
        lhs = bc @ sys.bold_B(k + 1)
        cond = np.linalg.cond(lhs)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NumericError(f"companion step at k={k} is singular")
        cur = np.linalg.solve(lhs, rhs)
        values[i + 1] = cur
    return BiSequence.from_table(k0, values)


def build_B_from_D(A_mat: OperatorSequence, D_mat: OperatorSequence, p: int,
                   base_family: SeminormFamily | None = None,
                   window=None, budget: float | None = None
                   ) -> tuple[OperatorSequence, list[str]]:
    """B(k+1) = A(k) D(k) as a lazy product sequence.

    When a base family and window are given, the per-block smallness budget
    sum_{i,j} ||D_ij(k)|| <= 1/(2 p^2) is checked with induced bounds and
    violations are reported as warnings; the certificate condition on the
    solve remains the binding gate either way.
    """
    if A_mat.dim != D_mat.dim:
        raise ShapeError("A and D dimensions differ")
    if p < 1 or A_mat.dim % p:
        raise InputContractError(f"dimension {A_mat.dim} is not p={p} blocks")
    budget = budget if budget is not None else 1.0 / (2 * p * p)
    warnings: list[str] = []
    if base_family is not None and window is not None:
        d = A_mat.dim // p
        for k in as_window(window):
            m = D_mat.matrix(k)
            for sn in base_family:
                total = sum(
                    induced_bound(m[i * d:(i + 1) * d, j * d:(j + 1) * d], sn)
                    for i in range(p) for j in range(p))
                if total > budget:
                    warnings.append(
                        f"block budget violated at k={k}, seminorm "
                        f"{sn.label!r}: {total:.4f} > {budget:.4f}")

    def fn(j: int) -> Matrix:
        return A_mat.matrix(j - 1) @ D_mat.matrix(j - 1)

    if A_mat.backend == "constant" and D_mat.backend == "constant":
        B = OperatorSequence.constant(fn(1), certificates={})
    else:
        B = OperatorSequence(A_mat.dim, fn, "generator", certificates={})
    return B, warnings
