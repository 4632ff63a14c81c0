"""Series solver for x(k+1) = A(k) x(k) + f(k) on the integer line.

The bounded solution is the operator-product series

    x(k) = f(k-1) + sum_{v>=1} A(k-1) A(k-2) ... A(k-v) f(k-1-v),

well defined whenever the backward products of the bound certificates are
summable.  The solver truncates the series per k at a depth whose certified
tail bound is below the requested tolerance for every seminorm, and reports
the measured residual of the returned table rather than assuming it.

The independent check is forward iteration of the recurrence from a far-left
zero initial condition (``forward_oracle``); the two routes share no code.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil, log

import numpy as np

from .ap_analysis import APReport
from .errors import ConvergencePreconditionError, InputContractError
from .operator_model import OperatorSequence, V_MAX_DEFAULT
from .seq_core import (BiSequence, SeminormFamily, Window, as_vector,
                       as_window)

TOL_DEFAULT = 1e-10
UNIQUENESS_THRESHOLD = 1e-12
UNIQUENESS_DEPTH = 10_000


@dataclass
class SolveReport:
    """Everything needed to audit one solve.

    max_residual is measured on the returned solution over the requested
    window; truncation depths and per-seminorm tail bounds are per k.
    """

    window: tuple[int, int]
    tol: float
    truncation_V: list[tuple[int, int]] = field(default_factory=list)
    tail_bounds: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    max_residual: dict[str, float] = field(default_factory=dict)
    residual_form: str = "first_order"
    f_sup: dict[str, float] = field(default_factory=dict)
    f_probe: tuple[int, int] | None = None
    sup_certificates: dict[str, float] = field(default_factory=dict)
    uniqueness: str = "not certified"
    uniqueness_by_label: dict[str, bool] = field(default_factory=dict)
    periodicity_defect: float | None = None
    ap_report: APReport | None = None
    warnings: list[str] = field(default_factory=list)
    extras: dict[str, float] = field(default_factory=dict)
    inner: "SolveReport | None" = None

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "tol": self.tol,
            "truncation_V": [[k, v] for k, v in self.truncation_V],
            "tail_bounds": {lbl: [[k, b] for k, b in pairs]
                            for lbl, pairs in sorted(self.tail_bounds.items())},
            "max_residual": dict(sorted(self.max_residual.items())),
            "residual_form": self.residual_form,
            "f_sup": dict(sorted(self.f_sup.items())),
            "f_probe": list(self.f_probe) if self.f_probe else None,
            "sup_certificates": dict(sorted(self.sup_certificates.items())),
            "uniqueness": self.uniqueness,
            "uniqueness_by_label": dict(sorted(self.uniqueness_by_label.items())),
            "periodicity_defect": self.periodicity_defect,
            "ap_report": self.ap_report.to_dict() if self.ap_report else None,
            "warnings": list(self.warnings),
            "extras": dict(sorted(self.extras.items())),
            "inner": self.inner.to_dict() if self.inner else None,
        }


def _apply_level(mats: np.ndarray, vecs: np.ndarray,
                 threads: int | None) -> np.ndarray:
    """Row-wise matrix-vector products mats[p] @ vecs[p], optionally chunked
    across a thread pool.  Placement by index keeps results order-independent."""
    if threads and threads > 1 and mats.shape[0] >= 4 * threads:
        out = np.empty_like(vecs)
        bounds = np.linspace(0, mats.shape[0], threads + 1, dtype=int)

        def work(i):
            a, b = bounds[i], bounds[i + 1]
            out[a:b] = np.einsum("pij,pj->pi", mats[a:b], vecs[a:b])

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(threads)))
        return out
    return np.einsum("pij,pj->pi", mats, vecs)


def _probe_forcing(f: BiSequence, window: Window, family: SeminormFamily,
                   margin: int) -> tuple[np.ndarray, dict[str, float], Window]:
    probe = window.extended(left=margin + 1)
    vals = f.window_values(probe)
    if not np.isfinite(vals).all():
        raise InputContractError("forcing has non-finite values on the probe "
                                 f"window [{probe.start}, {probe.end}]")
    sup = {sn.label: float(sn.of_rows(vals).max()) for sn in family}
    return vals, sup, probe


def _geometric_depth(sup_c: float, sup_f: float, tol: float) -> int:
    """Smallest V with sup_c^V * sup_c/(1-sup_c) * sup_f <= tol."""
    if sup_f == 0.0:
        return 0
    head = sup_c / (1.0 - sup_c) * sup_f
    if head <= tol:
        return 0
    if sup_c <= 0.0:
        return 1
    return max(0, ceil(log(tol / head) / log(sup_c)))


def solve_series(A: OperatorSequence, f: BiSequence, window, tol: float = TOL_DEFAULT,
                 V_max: int = V_MAX_DEFAULT, pad_right: int = 1,
                 threads: int | None = None) -> tuple[BiSequence, SolveReport]:
    """Truncated series solution on ``window`` (table extends pad_right further).

    Preconditions: every seminorm of A's family has a certified sup bound
    below 1 (otherwise no finite prefix certifies the series tail), and the
    per-k certificate products reach the tolerance within V_max terms.
    The sup of the forcing is taken over the window extended left by the
    certified truncation depth; the probe range is recorded in the report.
    """
    window = as_window(window)
    if A.family is None:
        raise InputContractError("operator sequence carries no seminorm family")
    if f.dim != A.dim:
        raise InputContractError(f"forcing dim {f.dim} vs operator dim {A.dim}")
    family = A.family
    # the table always extends one step right so the residual is measurable
    work = window.extended(right=max(1, pad_right))

    missing = [sn.label for sn in family if sn.label not in A.certificates]
    if missing:
        raise InputContractError(
            f"operator sequence lacks certificates for seminorms {missing}")
    sups = {sn.label: A.sup_bound(sn.label) for sn in family}
    bad = [lbl for lbl, s in sups.items() if not s < 1.0]
    if bad:
        raise ConvergencePreconditionError(
            "certificate sup bounds not below 1 for seminorms "
            f"{bad}; the series tail cannot be certified")

    # forcing probe: iterate the depth estimate to a fixpoint (the probe must
    # cover everything the truncated series consumes).  For forcings that
    # grow toward -inf the iteration diverges unless the certificates beat
    # the growth, which is exactly the convergence condition.
    margin = 8
    for _ in range(256):
        f_vals, f_sup, probe = _probe_forcing(f, work, family, margin)
        depth = max(_geometric_depth(sups[sn.label], f_sup[sn.label], tol)
                    for sn in family)
        if depth > V_max:
            raise ConvergencePreconditionError(
                f"certified truncation depth {depth} exceeds V_max={V_max}")
        if depth <= margin:
            break
        margin = depth
    else:
        raise ConvergencePreconditionError(
            "forcing probe did not stabilize: the forcing grows toward -inf "
            "faster than the certificates decay")
    growth_warning = None
    left_edge = max(sn.of_rows(f_vals[:8]).max() for sn in family)
    on_window = max(sn.of_rows(f_vals[-len(work):]).max() for sn in family)
    if left_edge > 2.0 * on_window and on_window > 0:
        growth_warning = (
            "forcing grows toward -inf on the probe window; tail bounds "
            "assume the probed sup extends further left")

    # per-k truncation depth from actual certificate products
    labels = [sn.label for sn in family]
    certs = {lbl: np.array([A.certificate(lbl, j)
                            for j in range(work.start - margin - 1, work.end)])
             for lbl in labels}
    c0 = work.start - margin - 1  # index of certs[..][0]
    n = len(work)
    V_arr = np.zeros(n, dtype=int)
    tails: dict[str, np.ndarray] = {lbl: np.zeros(n) for lbl in labels}
    for i, k in enumerate(work):
        for lbl in labels:
            s = sups[lbl]
            head = s / (1.0 - s) * f_sup[lbl]
            if head <= tol:
                tails[lbl][i] = max(tails[lbl][i], head)
                continue
            seg = certs[lbl][k - margin - c0:k - c0]  # c(k-margin) .. c(k-1)
            prods = np.cumprod(seg[::-1])
            bounds = prods * (s / (1.0 - s)) * f_sup[lbl]
            ok = bounds <= tol
            if not ok.any():
                raise ConvergencePreconditionError(
                    f"certificate products for {lbl!r} at k={k} do not reach "
                    f"tol={tol} within depth {len(prods)}")
            V = int(np.argmax(ok)) + 1
            V_arr[i] = max(V_arr[i], V)
            tails[lbl][i] = bounds[V - 1]
    v_need = int(V_arr.max()) if n else 0

    # series summation via the shifted-product table
    # t_0(k) = f(k-1), t_v(k) = A(k-1) t_{v-1}(k-1), x(k) = sum_{v<=V(k)} t_v(k)
    ks = Window(work.start - v_need, work.end)
    m = len(ks)
    # f_vals covers [work.start - margin - 1, work.end]; t_0 needs f on
    # [ks.start - 1, work.end - 1] and margin >= v_need by construction
    off = ks.start - 1 - probe.start
    T = f_vals[off:off + m].copy()
    amats = np.empty((m, A.dim, A.dim), dtype=np.complex128)
    amats[0] = np.eye(A.dim)
    for p in range(1, m):
        amats[p] = A.matrix(ks.start + p - 1)
    acc = T[v_need:].copy()
    for v in range(1, v_need + 1):
        T[v:] = _apply_level(amats[v:], T[v - 1:-1], threads)
        mask = V_arr >= v
        if mask.any():
            acc[mask] += T[v_need:][mask]

    x = BiSequence.from_table(work.start, acc)

    report = SolveReport(window=(window.start, window.end), tol=tol)
    report.truncation_V = [(k, int(V_arr[i])) for i, k in enumerate(work)]
    report.tail_bounds = {lbl: [(k, float(tails[lbl][i]))
                                for i, k in enumerate(work)]
                          for lbl in labels}
    report.f_sup = f_sup
    report.f_probe = (probe.start, probe.end)
    report.sup_certificates = sups
    report.max_residual = residual(A, f, x, window, family)
    if growth_warning:
        report.warnings.append(growth_warning)
    _attach_uniqueness(report, A, labels)
    return x, report


def _attach_uniqueness(report: SolveReport, A: OperatorSequence,
                       labels) -> None:
    by_label = {}
    for lbl in labels:
        prod = 1.0
        ok = False
        for i in range(1, UNIQUENESS_DEPTH + 1):
            prod *= A.certificate(lbl, -i)
            if prod < UNIQUENESS_THRESHOLD:
                ok = True
                break
        by_label[lbl] = ok
    report.uniqueness_by_label = by_label
    report.uniqueness = ("certified" if all(by_label.values())
                         else "not certified")


def residual(A: OperatorSequence, f: BiSequence, x: BiSequence, window,
             family: SeminormFamily) -> dict[str, float]:
    """max over k in window and kappa of kappa(x(k+1) - A(k) x(k) - f(k))."""
    window = as_window(window)
    xs = x.window_values(window.extended(right=1))
    fs = f.window_values(window)
    mats = np.stack([A.matrix(k) for k in window])
    rows = xs[1:] - np.einsum("pij,pj->pi", mats, xs[:-1]) - fs
    return {sn.label: float(sn.of_rows(rows).max()) for sn in family}


def forward_oracle(A: OperatorSequence, f: BiSequence, k0: int, x0,
                   window) -> BiSequence:
    """Exact forward iteration x(k+1) = A(k) x(k) + f(k) from x(k0) = x0.

    No truncation: this is the independent brute-force check of the series.
    """
    window = as_window(window)
    if k0 > window.start:
        raise InputContractError(f"k0={k0} must not exceed window start "
                                 f"{window.start}")
    x = as_vector(x0, A.dim)
    values = np.empty((window.end - k0 + 1, A.dim), dtype=np.complex128)
    values[0] = x
    cur = np.array(x)
    for i, k in enumerate(range(k0, window.end)):
        cur = A.matrix(k) @ cur + f(k)
        values[i + 1] = cur
    return BiSequence.from_table(k0, values)


def homogeneous_decay(A: OperatorSequence, label: str, K: int) -> list[float]:
    """Backward certificate products prod_{i=1..k} c(-i) for k = 1..K.

    Decay below tolerance certifies that the only almost periodic solution
    of the homogeneous equation is zero, hence uniqueness of the solved one.
    No decay means "not certified", never "non-unique".
    """
    if K < 1:
        raise InputContractError("K must be >= 1")
    out = []
    prod = 1.0
    for i in range(1, K + 1):
        prod *= A.certificate(label, -i)
        out.append(prod)
    return out


def weighted_growth_check(x: BiSequence, alpha: float,
                          family: SeminormFamily, window) -> float:
    """max over window and kappa of (1+|k|)^(-alpha) * kappa(x(k)), the
    finite-window proxy for polynomial boundedness."""
    if alpha < 0:
        raise InputContractError("alpha must be >= 0")
    window = as_window(window)
    vals = x.window_values(window)
    weights = (1.0 + np.abs(np.arange(window.start, window.end + 1))) ** (-alpha)
    return float(max((sn.of_rows(vals) * weights).max() for sn in family))
