"""Command line entry point: ``erheo solve|sweep|check|infsup --config PATH [--out DIR]``.

Exit codes: 0 ok, 2 configuration error, 3 non-convergence, 4 internal error.
Errors are printed to stderr as one JSON object.
"""
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_threads(environ=os.environ):
    """Map ``ERHEO_THREADS`` onto the BLAS thread variables (0 or unset = library default)."""
    raw = environ.get("ERHEO_THREADS", "").strip()
    if not raw:
        return None
    n = int(raw)
    if n < 0:
        raise ValueError("ERHEO_THREADS must be >= 0")
    if n > 0:
        for var in _THREAD_VARS:
            environ.setdefault(var, str(n))
    return n


try:
    _THREADS = _apply_threads()
    _THREAD_ERROR = None
except ValueError as _exc:
    _THREADS = None
    _THREAD_ERROR = str(_exc)

import argparse  # noqa: E402
import json  # noqa: E402

import numpy as np  # noqa: E402

from . import constitutive as cm  # noqa: E402
from .config import load_config  # noqa: E402
from .discretization import CoupledForms, norm_1, norm_2, norm_X, pressure_L2  # noqa: E402
from .errors import ClosureError, ConfigError, ErheoError, NonConvergenceError  # noqa: E402
from .io import HISTORY_COLUMNS, write_csv, write_history, write_json, write_vtk  # noqa: E402
from .solver import (  # noqa: E402
    ball_check,
    estimate_inf_sup,
    regularization_sweep,
    smallness_report,
    solve_coupled,
)


def _fields(spaces, triple):
    nv = spaces.mesh.n_nodes
    n2 = spaces.n2
    u = np.stack([triple.u[:nv], triple.u[n2:n2 + nv]], axis=1)
    return {"velocity": u, "pressure": triple.p.coeffs, "temperature": triple.tau, "zeta": triple.zeta.coeffs}


def _check_model(cfg, model):
    report = cm.model_condition_check(model, cfg.get("check.samples"))
    if not report.passed:
        names = ", ".join(r.name for r in report.failures())
        raise ConfigError(f"material closures violate admissibility conditions: {names}")
    return report


def _setup(cfg):
    model = cfg.build_model()
    model.validate()
    mesh = cfg.build_mesh()
    spaces = cfg.build_spaces(mesh)
    data = cfg.build_data(mesh)
    solver_cfg = cfg.build_solver_config()
    return model, mesh, spaces, data, solver_cfg


def _triple_summary(spaces, triple):
    last = triple.history[-1]
    return {
        "converged": triple.converged,
        "iterations": len(triple.history),
        "flow_residual": last["flow_residual"],
        "temp_residual": last["temp_residual"],
        "coupled_residual": last["coupled_residual"],
        "norm_X_v": norm_X(triple.v, spaces),
        "norm_L2_p": pressure_L2(triple.p, spaces),
        "norm_1_zeta": norm_1(triple.zeta, spaces),
        "norm_2_zeta": norm_2(triple.zeta, spaces),
        "ball_radius": triple.ball_radius,
        "ball_check": ball_check(triple),
        "apriori_bound": triple.bound,
        "kernel_radius": triple.kernel_radius,
    }


def run_solve(cfg):
    model, mesh, spaces, data, solver_cfg = _setup(cfg)
    report = _check_model(cfg, model)
    kernel = cfg.build_kernel()
    forms = CoupledForms(spaces, data, model)
    triple = solve_coupled(data, model, spaces, solver_cfg, kernel, forms)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "command": "solve",
        "variant": solver_cfg.variant,
        "mesh": {"nodes": mesh.n_nodes, "triangles": mesh.n_triangles, "h_max": mesh.h_max},
        "condition_check": report.passed,
        "smallness": smallness_report(data, forms.model, spaces, 4, forms=forms),
    }
    summary.update(_triple_summary(spaces, triple))
    if cfg.get("infsup.report"):
        summary["beta1"] = estimate_inf_sup(spaces)
    if cfg.get("output.vtk"):
        write_vtk(out / "fields.vtk", mesh, _fields(spaces, triple))
    if cfg.get("output.csv"):
        write_history(out / "history.csv", triple.history)
    if cfg.get("output.json"):
        write_json(out / "summary.json", summary)
    return summary


SWEEP_COLUMNS = ["index", "radius", "failed", "dv_X", "dp_L2", "dzeta_2", "unreg_residual", "iterations"]


def run_sweep(cfg):
    model, mesh, spaces, data, solver_cfg = _setup(cfg)
    _check_model(cfg, model)
    kernels = cfg.build_kernels()
    forms = CoupledForms(spaces, data, model)
    triples, table = regularization_sweep(data, model, spaces, solver_cfg, kernels, forms)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    for k, t in enumerate(triples):
        if t is not None and cfg.get("output.vtk"):
            write_vtk(out / f"fields_k{k}.vtk", mesh, _fields(spaces, t))
    if cfg.get("output.csv"):
        write_csv(out / "sweep.csv", table, SWEEP_COLUMNS)
    summary = {"command": "sweep", "variant": solver_cfg.variant, "table": table,
               "all_converged": all(t is not None for t in triples)}
    if cfg.get("output.json"):
        write_json(out / "summary.json", summary)
    if not summary["all_converged"]:
        raise NonConvergenceError("one or more sweep members failed", history=table)
    return summary


def run_check(cfg):
    model = cfg.build_model()
    report = cm.model_condition_check(model, cfg.get("check.samples"))
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": "check", **report.as_dict()}
    if cfg.get("output.json"):
        write_json(out / "check.json", summary)
    if not report.passed:
        names = ", ".join(r.name for r in report.failures())
        raise ClosureError(f"admissibility conditions violated: {names}")
    return summary


def run_infsup(cfg):
    rows = []
    lx, ly = cfg.get("mesh.lx"), cfg.get("mesh.ly")
    for n in cfg.get("infsup.levels"):
        ny = max(1, int(round(n * ly / lx)))
        mesh = cfg.build_mesh(n, ny)
        rows.append({"n": n, "h": mesh.h_max, "beta1": estimate_inf_sup(cfg.build_spaces(mesh))})
    betas = [r["beta1"] for r in rows]
    spread = (max(betas) - min(betas)) / max(betas) if betas else 0.0
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if cfg.get("output.csv"):
        write_csv(out / "infsup.csv", rows, ["n", "h", "beta1"])
    summary = {"command": "infsup", "levels": rows, "relative_spread": spread}
    if cfg.get("output.json"):
        write_json(out / "summary.json", summary)
    return summary


COMMANDS = {"solve": run_solve, "sweep": run_sweep, "check": run_check, "infsup": run_infsup}


def _error_payload(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("location", "hint"):
        val = getattr(exc, attr, None)
        if val is not None:
            payload[attr] = val
    hist = getattr(exc, "history", None)
    if hist:
        payload["history"] = [{k: h.get(k) for k in HISTORY_COLUMNS if k in h} or h for h in hist]
    return payload


def build_parser():
    p = argparse.ArgumentParser(prog="erheo", description="Coupled thermal non-Newtonian flow solver.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if _THREAD_ERROR:
            raise ConfigError(_THREAD_ERROR)
        cfg = load_config(args.config, args.out)
        summary = COMMANDS[args.command](cfg)
    except ErheoError as exc:
        code = exc.exit_code
        print(json.dumps(_error_payload(exc, code), sort_keys=True, default=str), file=sys.stderr)
        return code
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 4
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 4}), file=sys.stderr)
        return 4
    brief = {k: summary[k] for k in ("command", "converged", "iterations", "passed", "relative_spread",
                                     "all_converged") if k in summary}
    print(json.dumps(brief, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
