"""Command-line front end: scenario dispatch and artifact emission.

Subcommands: solve, solve-inclusion, solve-degenerate, solve-p2,
reduce-order, analyze, example.  Each consumes a JSON scenario config
(see config.py) and writes solution CSV, report JSON and a short text
summary into --out.  Exit codes: 0 success, 2 input-contract error,
3 convergence-precondition failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ap_analysis, discretization
from .config import ScenarioConfig, build_family, cmat, cnum, cpair, mat_out
from .errors import ApseqError, InputContractError
from .first_order import solve_series
from .higher_order import (build_companion, build_B_from_D, companion_D_block,
                           solve_second_order)
from .operator_model import OperatorSequence, as_matrix
from .resolvent import (ResolventSelection, solve_degenerate_vb,
                        solve_degenerate_vb1)
from .seq_core import (FLOAT_FMT, BiSequence, SeminormFamily, Window,
                       as_window, write_csv)

SUBCOMMAND_KINDS = {
    "solve": ("first_order",),
    "solve-inclusion": ("inclusion",),
    "solve-degenerate": ("degenerate_vb", "degenerate_vb1", "system_bm",
                         "heat"),
    "solve-p2": ("second_order", "wave"),
    "analyze": ("analyze",),
}


def _threads_from(args) -> int | None:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("APSEQ_THREADS")
    return max(1, int(env)) if env else None


def _required_window(cfg: ScenarioConfig) -> tuple[Window, int]:
    """Hull of the config window and everything the analyses will touch."""
    lo, hi = cfg.window.start, cfg.window.end
    pad = 1
    a = cfg.analysis
    if "omega_c" in a:
        pad = max(pad, int(a["omega_c"]["omega"]))
    if "bohr" in a:
        kw = as_window(a["bohr"]["k_window"])
        tr = as_window(a["bohr"]["tau_range"])
        L = int(a["bohr"]["L"])
        lo = min(lo, kw.start + tr.start)
        hi = max(hi, kw.end + tr.end + L)
    if "besicovitch" in a:
        lmax = max(int(l) for l in a["besicovitch"]["l_grid"])
        fit = int(a["besicovitch"].get("fit_N", lmax))
        span = max(lmax, fit)
        lo, hi = min(lo, -span), max(hi, span)
    if "weyl" in a:
        sr = as_window(a["weyl"]["s_range"])
        fit = int(a["weyl"].get("fit_N", 256))
        lo = min(lo, sr.start, -fit)
        hi = max(hi, sr.end + int(a["weyl"]["l"]), fit)
    return Window(lo, hi), pad


def _run_analysis(cfg: ScenarioConfig, x: BiSequence,
                  family: SeminormFamily, solve_report=None) -> dict:
    out: dict = {}
    a = cfg.analysis
    if "omega_c" in a:
        req = a["omega_c"]
        defect = ap_analysis.omega_c_check(x, int(req["omega"]),
                                           cnum(req["c"]), family,
                                           cfg.window)
        out["omega_c"] = {"omega": int(req["omega"]),
                          "c": cpair(cnum(req["c"])), "defect": defect}
        if solve_report is not None:
            solve_report.periodicity_defect = defect
    if "bohr" in a:
        req = a["bohr"]
        sn = family.by_label(req.get("seminorm", family.labels()[0]))
        rep = ap_analysis.bohr_check(x, sn, float(req["epsilon"]),
                                     as_window(req["k_window"]),
                                     as_window(req["tau_range"]),
                                     int(req["L"]))
        out["bohr"] = rep.to_dict()
        if solve_report is not None:
            solve_report.ap_report = rep
    if "besicovitch" in a:
        req = a["besicovitch"]
        sn = family.by_label(req.get("seminorm", family.labels()[0]))
        grid = [int(l) for l in req["l_grid"]]
        freqs = [float(v) for v in req.get("frequencies", [0.0])]
        poly = ap_analysis.fit_trig_poly(x, freqs, int(req.get("fit_N",
                                                               grid[-1])))
        rep = ap_analysis.besicovitch_distance(
            x, BiSequence.from_trig_poly(poly), sn,
            float(req.get("p", 1.0)), grid)
        out["besicovitch"] = rep.to_dict()
        out["besicovitch"]["frequencies"] = freqs
    if "weyl" in a:
        req = a["weyl"]
        sn = family.by_label(req.get("seminorm", family.labels()[0]))
        freqs = [float(v) for v in req.get("frequencies", [0.0])]
        poly = ap_analysis.fit_trig_poly(x, freqs, int(req.get("fit_N", 256)))
        val = ap_analysis.weyl_distance(x, BiSequence.from_trig_poly(poly),
                                        sn, float(req.get("p", 1.0)),
                                        int(req["l"]),
                                        as_window(req["s_range"]))
        out["weyl"] = {"l": int(req["l"]), "value": val,
                       "seminorm_label": sn.label, "frequencies": freqs}
    return out


def _probe(cfg: ScenarioConfig) -> Window:
    return cfg.window.extended(left=2048, right=8)


def _ainv_c(cfg: ScenarioConfig, A: OperatorSequence, C,
            family: SeminormFamily) -> OperatorSequence:
    if "Ainv_C" in cfg.operators:
        return cfg.operator("Ainv_C", family=family)
    return ResolventSelection.from_matrix_inverse(
        A, C, family, sup_probe=_probe(cfg)).D


def _config_C(cfg: ScenarioConfig, dim: int):
    if "C" in cfg.operators:
        return as_matrix(cmat(cfg.operators["C"]), dim)
    return np.eye(dim, dtype=np.complex128)


def _dispatch(cfg: ScenarioConfig, threads: int | None):
    """Solve per the config kind.  Returns (solution, aux, report, family)."""
    hull, pad = _required_window(cfg)
    family = cfg.family()

    def forcing(dim=None):
        return cfg.sequence(cfg.forcing, dim=dim)

    if cfg.kind == "first_order":
        f = forcing()
        A = cfg.operator("A", family=family)
        x, rep = solve_series(A, f, hull, tol=cfg.tol, pad_right=pad,
                              threads=threads)
        return x, {}, rep, family

    if cfg.kind == "inclusion":
        f = forcing()
        C = _config_C(cfg, cfg.dim)
        if "D" in cfg.operators:
            sel = ResolventSelection(cfg.operator("D", family=family), C)
        else:
            sel = ResolventSelection.from_matrix_inverse(
                cfg.operator("A", plain=True), C, family,
                sup_probe=_probe(cfg))
        from .resolvent import solve_inclusion
        x, rep = solve_inclusion(sel, f, hull, tol=cfg.tol, pad_right=pad,
                                 threads=threads)
        return x, {}, rep, family

    if cfg.kind == "degenerate_vb":
        f = forcing()
        C = _config_C(cfg, cfg.dim)
        B = cfg.operator("B", family=family)
        A = cfg.operator("A", plain=True)
        ainv = _ainv_c(cfg, A, C, family)
        v, u, rep = solve_degenerate_vb(B, ainv, C, f, hull, tol=cfg.tol,
                                        A=A, pad_right=pad, threads=threads)
        return (u if u is not None else v), {"v": v}, rep, family

    if cfg.kind == "degenerate_vb1":
        f = forcing()
        C = _config_C(cfg, cfg.dim)
        B = cfg.operator("B", plain=True)
        A = cfg.operator("A", plain=True)
        g = cfg.sequence(cfg.sequences.get("g"))
        if "Ainv_BC" in cfg.operators:
            ainv_bc = cfg.operator("Ainv_BC", family=family)
        else:
            def fn(k):
                return np.linalg.solve(A.matrix(k), B.matrix(k + 1) @ C)
            ainv_bc = OperatorSequence.from_function(
                cfg.dim, fn, family=family, sup_probe=_probe(cfg))
        u, rep = solve_degenerate_vb1(B, ainv_bc, C, g, f, hull, tol=cfg.tol,
                                      A=A, pad_right=pad, threads=threads)
        return u, {}, rep, family

    if cfg.kind == "second_order":
        f = forcing()
        C = _config_C(cfg, cfg.dim)
        A0 = cfg.operator("A0", plain=True)
        A1 = cfg.operator("A1", plain=True)
        A2 = cfg.operator("A2", plain=True)
        u, rep = solve_second_order(A0, A1, A2, C, f, hull, tol=cfg.tol,
                                    family=family, sup_probe=_probe(cfg),
                                    threads=threads)
        return u, {}, rep, family

    if cfg.kind == "system_bm":
        p = int(cfg.params.get("p", 1))
        block_dim = p * cfg.dim
        lifted = family.lifted(p)
        A = cfg.operator("A", dim=block_dim, plain=True)
        D = cfg.operator("D", dim=block_dim, family=lifted)
        B, warnings = build_B_from_D(A, D, p, base_family=family,
                                     window=cfg.window)
        vec_f = forcing(dim=block_dim)
        C = np.eye(block_dim, dtype=np.complex128)
        g = BiSequence.from_function(
            block_dim, lambda k: B.matrix(k + 1) @ vec_f(k))
        u, rep = solve_degenerate_vb1(B, D, C, g, vec_f, hull, tol=cfg.tol,
                                      A=A, pad_right=pad, threads=threads)
        rep.warnings.extend(warnings)
        return u, {}, rep, lifted

    if cfg.kind == "heat":
        n = int(cfg.params["n"])
        problem = discretization.heat_problem(
            n, float(cfg.params.get("h", 1.0)),
            cfg.sequence(cfg.sequences.get("m"), dim=1),
            cfg.sequence(cfg.sequences.get("b"), dim=1),
            forcing(dim=n),
            family=cfg.family(n) if cfg.seminorms else None,
            window=hull)
        v, u, rep = problem.solve(hull, tol=cfg.tol, threads=threads)
        return u, {"v": v, "grid": True}, rep, problem.family

    if cfg.kind == "wave":
        n = int(cfg.params["n"])
        problem = discretization.wave_problem(
            n, float(cfg.params.get("h", 1.0)),
            cfg.sequence(cfg.sequences.get("m1"), dim=1),
            cfg.sequence(cfg.sequences.get("m2"), dim=1),
            cfg.sequence(cfg.sequences.get("b"), dim=1),
            forcing(dim=n),
            family=cfg.family(n) if cfg.seminorms else None,
            window=hull)
        u, rep = problem.solve(hull, tol=cfg.tol, threads=threads)
        return u, {"grid": True}, rep, problem.family

    if cfg.kind == "analyze":
        target = cfg.sequences.get("target", cfg.forcing)
        x = cfg.sequence(target)
        return x, {"analysis_only": True}, None, family

    raise InputContractError(f"unhandled kind {cfg.kind!r}")


def _write_grid_csv(path, x: BiSequence, window: Window) -> None:
    vals = x.window_values(window)
    with open(path, "w", newline="") as fh:
        fh.write("k,idx,re,im\n")
        for i, k in enumerate(window):
            for j in range(x.dim):
                fh.write(f"{k},{j},{FLOAT_FMT.format(vals[i, j].real)},"
                         f"{FLOAT_FMT.format(vals[i, j].imag)}\n")


def _summary_lines(cfg, rep, analysis) -> list[str]:
    lines = [f"kind: {cfg.kind}",
             f"window: [{cfg.window.start}, {cfg.window.end}]  tol: {cfg.tol:g}"]
    if rep is not None:
        for lbl, r in sorted(rep.max_residual.items()):
            lines.append(f"residual[{lbl}] = {r:.3e}  ({rep.residual_form})")
        lines.append(f"uniqueness: {rep.uniqueness}")
        for w in rep.warnings:
            lines.append(f"warning: {w}")
    for name, payload in sorted(analysis.items()):
        if name == "omega_c":
            lines.append(f"omega_c defect = {payload['defect']:.3e}")
        elif name == "bohr":
            lines.append(f"bohr verdict = {payload['verdict']} "
                         f"(max defect {payload['max_defect']:.3e})")
        elif name == "besicovitch":
            lines.append(f"besicovitch limsup estimate = "
                         f"{payload['limsup_estimate']:.3e}")
        elif name == "weyl":
            lines.append(f"weyl value = {payload['value']:.3e}")
    return lines


def run(cfg: ScenarioConfig, out_dir, threads: int | None = None) -> int:
    """Dispatch, write solution CSV + report JSON + summary, return 0."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x, aux, rep, family = _dispatch(cfg, threads)
    analysis = _run_analysis(cfg, x, family, rep) if cfg.analysis else {}

    if not aux.get("analysis_only"):
        write_csv(out / "solution.csv", x, cfg.window)
        if "v" in aux:
            write_csv(out / "solution_v.csv", aux["v"], cfg.window)
        if aux.get("grid"):
            _write_grid_csv(out / "grid_solution.csv", x, cfg.window)

    report = {
        "schema_version": 1,
        "kind": cfg.kind,
        "generated_at": datetime.datetime.now(datetime.timezone.utc)
                        .isoformat(),
        "threads": threads,
        "config": cfg.to_dict(),
        "solve": rep.to_dict() if rep is not None else None,
        "analysis": analysis,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "summary.txt", "w") as fh:
        fh.write("\n".join(_summary_lines(cfg, rep, analysis)) + "\n")
    return 0


# ---------------------------------------------------------------------------
# canned examples
# ---------------------------------------------------------------------------

def _grid_profile_terms(n: int) -> list:
    profile = np.sin(np.pi * np.arange(1, n + 1) / (n + 1))
    return [{"frequency": 1.0,
             "coefficient": [[x / 2, 0.0] for x in profile]},
            {"frequency": -1.0,
             "coefficient": [[x / 2, 0.0] for x in profile]}]


def example_config(name: str, n: int, h: float, window: Window,
                   tol: float) -> dict:
    """Canned heat/wave scenarios with almost periodic data."""
    sin_terms = [{"frequency": 1.0, "coefficient": [0.0, -0.5]},
                 {"frequency": -1.0, "coefficient": [0.0, 0.5]}]
    b_desc = {"backend": "trig_poly",
              "terms": [{"frequency": 0.0, "coefficient": [[3.0, 0.0]]}]
                       + [{"frequency": t["frequency"],
                           "coefficient": [t["coefficient"]]}
                          for t in sin_terms]}
    f_desc = {"backend": "trig_poly", "terms": _grid_profile_terms(n)}
    base = {
        "schema_version": 1,
        "dim": n,
        "window": [window.start, window.end],
        "tol": tol,
        "seminorms": [{"kind": "sup"}, {"kind": "first_difference"},
                      {"kind": "second_difference"}],
        "params": {"n": n, "h": h},
        "forcing": f_desc,
    }
    if name == "heat":
        base["kind"] = "heat"
        base["sequences"] = {
            "m": {"backend": "constant", "value": [[0.1, 0.0]]},
            "b": b_desc,
        }
    elif name == "wave":
        base["kind"] = "wave"
        base["sequences"] = {
            "m1": {"backend": "constant", "value": [[0.05, 0.0]]},
            "m2": {"backend": "constant", "value": [[0.05, 0.0]]},
            "b": {"backend": "constant", "value": [[3.0, 0.0]]},
        }
        # constant data: the solution is the constant fixed point, so the
        # plain-periodicity defect must vanish
        xs = np.arange(1, n + 1) / (n + 1)
        base["forcing"] = {"backend": "constant",
                           "value": [[x, 0.0] for x in np.sin(np.pi * xs)]}
        base["analysis"] = {"omega_c": {"omega": 1, "c": [1.0, 0.0]}}
    else:
        raise InputContractError(f"unknown example {name!r}")
    return base


def run_example(name: str, n: int, h: float, window: Window, tol: float,
                out_dir, threads: int | None) -> int:
    cfg = ScenarioConfig.from_dict(example_config(name, n, h, window, tol))
    code = run(cfg, out_dir, threads=threads)
    if name != "heat":
        return code
    # Bohr transfer check with epsilon matched to the forcing: measure the
    # forcing's minimax defect, allow the solution twice that.
    out = Path(out_dir)
    with open(out / "report.json") as fh:
        report = json.load(fh)
    f = cfg.sequence(cfg.forcing, dim=n)
    family = build_family(cfg.seminorms, n)
    sn = family.by_label("sup")
    k_window, tau_range, L = Window(-40, 40), Window(-150, 150), 40
    probe = ap_analysis.bohr_check(f, sn, float("inf"), k_window, tau_range, L)
    eps_f = probe.max_defect * (1 + 1e-9)
    # the emitted CSV covers only the config window; re-derive the solution
    # on the hull the scan consumes
    x, _, _, _ = _dispatch(
        ScenarioConfig.from_dict({**cfg.to_dict(),
                                  "window": [k_window.start + tau_range.start,
                                             k_window.end + tau_range.end + L]}),
        threads)
    check = ap_analysis.bohr_check(x, sn, 2 * eps_f, k_window, tau_range, L)
    report["analysis"]["bohr_forcing_defect"] = eps_f
    report["analysis"]["bohr"] = check.to_dict()
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "summary.txt", "a") as fh:
        fh.write(f"bohr transfer: forcing defect {eps_f:.3e}, solution "
                 f"verdict {check.verdict} at eps {2 * eps_f:.3e}\n")
    return 0 if check.verdict else 4


def run_reduce_order(cfg: ScenarioConfig, out_dir, k: int) -> int:
    """Emit the companion matrices and the reduction selection at index k."""
    p = int(cfg.params.get("p", 2))
    family = cfg.family()
    seqs = [cfg.operator(f"A{j}", plain=True) for j in range(p + 1)]
    C = _config_C(cfg, cfg.dim)
    sys_ = build_companion(p, seqs, C)
    from .higher_order import _a0_inverse_sequence
    G = _a0_inverse_sequence(seqs[0], C)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": 1,
        "kind": "reduce_order",
        "p": p,
        "k": k,
        "bold_A": mat_out(sys_.bold_A(k)),
        "bold_B_next": mat_out(sys_.bold_B(k + 1)),
        "bold_C": mat_out(sys_.bold_C()),
        "selection_D": mat_out(companion_D_block(sys_, G, k)),
    }
    with open(out / "reduction.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", type=Path, help="scenario config JSON")
    sp.add_argument("--out", type=Path, default=Path("apseq-out"),
                    help="output directory")
    sp.add_argument("--tol", type=float, default=None,
                    help="override config tolerance")
    sp.add_argument("--window", type=str, default=None,
                    help="override config window as A:B")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (fallback: APSEQ_THREADS)")


def _parse_window(text: str) -> Window:
    try:
        a, b = text.split(":")
        return Window(int(a), int(b))
    except (ValueError, TypeError) as exc:
        raise InputContractError(f"bad window {text!r}; expected A:B") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="apseq",
        description="series solutions and almost-periodicity analysis for "
                    "nonautonomous linear difference equations on Z")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "solve-inclusion", "solve-degenerate", "solve-p2",
                 "analyze"):
        _add_common(sub.add_parser(name))
    rp = sub.add_parser("reduce-order")
    _add_common(rp)
    rp.add_argument("--k", type=int, default=0, help="index to assemble at")
    ep = sub.add_parser("example")
    ep.add_argument("name", choices=("heat", "wave"))
    ep.add_argument("--n", type=int, default=5)
    ep.add_argument("--h", type=float, default=1.0)
    _add_common(ep)
    return ap


def _load_config(args) -> ScenarioConfig:
    if args.config is None:
        raise InputContractError("--config is required for this subcommand")
    cfg = ScenarioConfig.load(args.config)
    data = cfg.to_dict()
    if args.tol is not None:
        data["tol"] = args.tol
    if args.window is not None:
        w = _parse_window(args.window)
        data["window"] = [w.start, w.end]
    return ScenarioConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = _threads_from(args)
    try:
        if args.command == "example":
            window = (_parse_window(args.window) if args.window
                      else Window(-20, 20))
            return run_example(args.name, args.n, args.h, window,
                               args.tol or 1e-10, args.out, threads)
        cfg = _load_config(args)
        if args.command == "reduce-order":
            return run_reduce_order(cfg, args.out, args.k)
        allowed = SUBCOMMAND_KINDS[args.command]
        if cfg.kind not in allowed:
            raise InputContractError(
                f"subcommand {args.command} expects a config kind in "
                f"{allowed}, got {cfg.kind!r}")
        return run(cfg, args.out, threads=threads)
    except ApseqError as exc:
        print(f"apseq: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"apseq: numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
