"""Command-line frontend: ``ibsolve COMMAND --config run.json [--out DIR]``.

Exit codes: 0 success, 2 configuration error (message names the field),
3 solver error.
"""
from __future__ import annotations

import argparse
import copy
import datetime as _dt
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .io import (
    COMMANDS,
    ConfigError,
    ResultRecord,
    validate_config,
    load_config,
    write_csv,
    write_grid_csv,
    write_json_atomic,
)

__all__ = ["run", "sweep", "main", "SolverFailure"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class SolverFailure(RuntimeError):
    """Any failure after the configuration was accepted."""


def _iteration(cfg: dict):
    from .solver import IterationConfig

    return IterationConfig(**cfg.get("iteration", {}))


def _build(fn, block: str):
    # constructor ValueErrors are invariant violations in the named block
    try:
        return fn()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), block) from exc


# ---------------------------------------------------------------------------
# single runs; each returns (result dict, grids {name: (x, f)}, plot specs)
# ---------------------------------------------------------------------------

def _run_sg(cfg):
    from .sg_nlie import (
        RootConfig,
        check_counting_equation,
        classify_theory,
        energy_momentum,
        hole_quantization_residual,
        make_state,
        solve_sg,
    )

    b = cfg["sg"]
    rc = _build(lambda: RootConfig(
        holes=tuple(b.get("holes", ())),
        specials=tuple(b.get("specials", ())),
        close_pairs=tuple(tuple(p) for p in b.get("close_pairs", ())),
        wide_pairs=tuple(tuple(p) for p in b.get("wide_pairs", ())),
        self_conjugate=tuple(b.get("self_conjugate", ())),
        delta=b.get("delta", 0),
        spin=b.get("spin", 0),
    ), "sg")
    if not check_counting_equation(rc, b["p"]):
        raise ConfigError("counting equation violated; check holes, pairs and spin against each other", "sg")
    state = _build(lambda: make_state(b["p"], b["l"], rc, b.get("eta"), b.get("n_points", 4096)), "sg")
    it = _build(lambda: _iteration(cfg), "iteration")
    st = solve_sg(state, it)
    E, P = energy_momentum(st)
    res = {
        "E": E,
        "P": P,
        "holes": [] if st.holes is None else st.holes,
        "hole_residual": hole_quantization_residual(st),
        "eta": st.eta,
        "theories": sorted(classify_theory(rc)),
        "config": rc.to_dict(),
        "report": st.report.to_dict(),
    }
    x = st.grid.x
    grids = {"sg_Z": (x, st.Z)}
    plots = [("sg_Z.png", [("Z(x + i eta)", x, st.Z)], "counting function", "x")]
    return res, grids, plots


def _run_tba(cfg):
    from .tba import (
        StripState,
        TBAModel,
        conformal_energy_closed_form,
        integrals_of_motion,
        scaling_energy,
        solve_tba,
    )

    b = cfg["tba"]
    kw = {k: b[k] for k in ("x_min", "x_max", "n_points") if k in b}
    model = _build(lambda: TBAModel(b["L"], boundary_xi=b.get("boundary_xi"), **kw), "tba")
    strips = model.strips
    state = _build(lambda: StripState(tuple(b.get("m", (0,) * strips)),
                                      tuple(tuple(r) for r in b.get("I", ((),) * strips))), "tba")
    if len(state.m) != strips:
        raise ConfigError(f"m needs {strips} entries for L = {model.L}", "tba.m")
    it = _build(lambda: _iteration(cfg), "iteration")
    sol = solve_tba(model, state, it)
    res = {
        "E": scaling_energy(model, sol),
        "zeros": [list(z) for z in sol.zeros],
        "quantization_residual": sol.quantization_residual,
        "min_one_plus_d": float(np.min(np.exp(sol.log1p_d()))),
        "report": sol.report.to_dict(),
    }
    if model.boundary_xi is None:
        res["E_closed_form"] = conformal_energy_closed_form(model, state)
    n_int = b.get("integrals", 0)
    if n_int:
        res["integrals"] = [integrals_of_motion(model, sol, n) for n in range(1, n_int + 1)]
    x = sol.grid.x
    L1p = sol.log1p_d()
    grids = {f"tba_log1p_d{q + 1}": (x, L1p[q]) for q in range(strips)}
    plots = [("tba_log1p_d.png", [(f"log(1 + d^{q + 1})", x, L1p[q]) for q in range(strips)],
              "TBA strip functions", "x")]
    return res, grids, plots


def _run_hubbard(cfg):
    from .hubbard import HubbardModel, lieb_wu_continuation, solve_hubbard, solve_xxx_limit

    b = cfg["hubbard"]
    model = _build(lambda: HubbardModel(b["L"], b.get("t", 1.0), b["U"], b.get("phi", 0.0)), "hubbard")
    it = _build(lambda: _iteration(cfg), "iteration")
    grid_kw = {"n_u": b.get("n_u", 4096), "n_k": b.get("n_k", 1024)}
    sol = solve_hubbard(model, it, **grid_kw)
    E_L, E_Z, E_W1, E_W2 = sol.energy_parts
    res = {
        "E": sol.energy,
        "E_L": E_L,
        "E_Z": E_Z,
        "E_W1": E_W1,
        "E_W2": E_W2,
        "roots_u": sol.roots_u,
        "roots_k": sol.roots_k,
        "report": sol.report.to_dict(),
    }
    if b.get("oracle", False):
        if model.L > 8:
            raise ConfigError("the Lieb-Wu oracle is limited to L <= 8", "hubbard.oracle")
        lw = lieb_wu_continuation(model)[-1]
        res["oracle"] = {"E": lw.energy, "k": lw.k, "u": lw.u, "residual": lw.residual,
                         "dE": sol.energy - lw.energy}
    if b.get("surrogate", False):
        xs = solve_xxx_limit(model, it, **grid_kw)
        res["surrogate"] = {"E": xs.energy, "dE": sol.energy - xs.energy}
    grids = {"hubbard_Z": (sol.u, sol.Z), "hubbard_W": (sol.k, sol.W)}
    plots = [
        ("hubbard_Z.png", [("Z(u)", sol.u, sol.Z)], "spin counting function", "u"),
        ("hubbard_W.png", [("W(k)", sol.k, sol.W)], "charge counting function", "k"),
    ]
    return res, grids, plots


def _run_rsos(cfg):
    from .lattice import (
        RSOSLattice,
        closure_residual,
        commutation_residual,
        crossing_residual,
        eigenvalue_zero_pattern,
        periodicity_residual,
        verify_t_system,
        verify_y_system,
    )

    b = cfg["rsos"]
    lat = _build(lambda: RSOSLattice(b["L"], b["N"]), "rsos")
    rng = np.random.default_rng(b.get("seed", 0))
    u, v = (complex(a, c) for a, c in rng.uniform(-0.6, 0.6, size=(2, 2)))
    qs = range(1, lat.L - 1)
    res = {
        "dim": lat.dim,
        "points": [u, v],
        "commutation": max(commutation_residual(lat, u, v, q) for q in qs),
        "crossing": max(crossing_residual(lat, u, q) for q in qs),
        "periodicity": max(periodicity_residual(lat, u, q) for q in qs),
        "t_system": max(verify_t_system(lat, u, q) for q in range(1, lat.L)),
        "y_system": max(verify_y_system(lat, u, q) for q in range(1, lat.L - 1)),
        "closure": closure_residual(lat, u),
    }
    res["max_residual"] = max(res[k] for k in ("commutation", "crossing", "periodicity", "t_system",
                                               "y_system", "closure"))
    if b.get("zeros", False):
        if lat.N > 8:
            raise ConfigError("zero patterns are limited to N <= 8", "rsos.zeros")
        pats = eigenvalue_zero_pattern(lat)
        total = sum(len(p.zeros) for p in pats)
        res["zero_patterns"] = [p.to_dict() for p in pats]
        res["anomaly_fraction"] = sum(len(p.anomalies) for p in pats) / max(total, 1)
    return res, {}, []


def _run_ybe(cfg):
    from .lattice import (
        SPEC_GL2,
        SPEC_GL11,
        SPEC_GL22,
        build_hubbard_r,
        build_universal_r,
        graded_permutation,
        hubbard_ybe_residual,
        ybe_residual,
    )

    b = cfg["ybe"]
    rng = np.random.default_rng(b.get("seed", 0))
    pts = rng.uniform(-1.5, 1.5, size=(b.get("points", 20), 3))
    name = b["spec"]
    if name == "hubbard":
        U = b.get("U", 1.0)
        res_list = [hubbard_ybe_residual(SPEC_GL11, SPEC_GL11, *p, U) for p in pts]
        g = [0, 1, 1, 0]
        R0 = build_hubbard_r(SPEC_GL11, SPEC_GL11, 0.4, 0.4, U)
    else:
        spec = {"gl2": SPEC_GL2, "gl11": SPEC_GL11, "gl22": SPEC_GL22}[name]
        res_list = [ybe_residual(spec, *p) for p in pts]
        g = list(spec.grading)
        R0 = build_universal_r(spec, lambda_spectral=0.0)
    reg = float(np.max(np.abs(R0 - graded_permutation([g, g], [1, 0]))))
    res = {"spec": name, "max_residual": max(res_list), "residuals": res_list, "regularity": reg}
    return res, {}, []


_RUNNERS = {
    "solve-sg": _run_sg,
    "solve-tba": _run_tba,
    "solve-hubbard": _run_hubbard,
    "oracle-rsos": _run_rsos,
    "oracle-ybe": _run_ybe,
}


def _execute(command: str, cfg: dict):
    try:
        return _RUNNERS[command](cfg)
    except ConfigError:
        raise
    except (ArithmeticError, RuntimeError, NotImplementedError, ValueError, np.linalg.LinAlgError) as exc:
        raise SolverFailure(f"{type(exc).__name__}: {exc}") from exc


def _emit(out: Path | None, command: str, grids: dict, plots: list, cfg: dict) -> list:
    files = []
    if out is None:
        return files
    opts = cfg.get("output", {})
    if opts.get("grids", True):
        for name, (x, f) in grids.items():
            files.append(str(write_grid_csv(out / f"{name}.csv", x, f)))
    if opts.get("plots", False):
        from .plots import plot_curves

        for fname, curves, title, xlabel in plots:
            files.append(str(plot_curves(out / fname, curves, title, xlabel)))
    return files


def run(command: str, config: dict, out: str | Path | None = None, jobs: int = 1,
        timestamp: bool = True) -> ResultRecord:
    """Validate ``config``, run ``command`` and return the record.

    With ``out`` the record (record.json), grid dumps and optional figures
    are written there.  Raises ConfigError or SolverFailure.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", "command")
    cfg = validate_config(config, command)
    out = Path(out) if out is not None else None
    t0 = time.perf_counter()
    if command == "sweep":
        result, files = sweep(cfg, out, jobs)
    else:
        result, grids, plots = _execute(command, cfg)
        files = _emit(out, command, grids, plots, cfg)
    rec = ResultRecord(command, cfg, result, __version__, time.perf_counter() - t0,
                       _dt.datetime.now(_dt.timezone.utc).isoformat() if timestamp else None, files)
    if out is not None:
        write_json_atomic(out / "record.json", rec.to_dict())
    return rec


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

_SWEEP_COLUMNS = {
    "solve-hubbard": ["U", "t", "L", "E", "E_L", "E_Z", "E_W1", "E_W2", "iterations"],
    "solve-sg": ["l", "E", "P", "iterations"],
    "solve-tba": ["value", "E", "iterations"],
}


def _set_axis(cfg: dict, target: str, axis: str, value):
    block_name = {"solve-sg": "sg", "solve-tba": "tba", "solve-hubbard": "hubbard"}[target]
    path = axis.split(".")
    if len(path) == 1:
        path = [block_name] + path
    node = cfg
    for key in path[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"axis {axis!r} does not name a config field", "sweep.axis")
        node = node[key]
    old = node.get(path[-1])
    if old is not None and (isinstance(old, bool) or not isinstance(old, (int, float))):
        raise ConfigError(f"axis {axis!r} is not numeric", "sweep.axis")
    node[path[-1]] = int(value) if isinstance(old, int) and float(value).is_integer() else value


def _row_config(cfg: dict, value) -> dict:
    sw = cfg["sweep"]
    row = copy.deepcopy({k: v for k, v in cfg.items() if k != "sweep"})
    row["command"] = sw["command"]
    _set_axis(row, sw["command"], sw["axis"], value)
    return row


def _sweep_row(args):
    target, row_cfg = args
    try:
        row_cfg = validate_config(row_cfg, target)
        result, _, _ = _execute(target, row_cfg)
        return row_cfg, result, None
    except (ConfigError, SolverFailure) as exc:
        return row_cfg, None, str(exc)


def _csv_row(target: str, row_cfg: dict, value, result, error):
    nan = float("nan")
    if target == "solve-hubbard":
        h = row_cfg["hubbard"]
        head = [h["U"], h.get("t", 1.0), h["L"]]
        if result is None:
            return head + [nan] * 5 + [0, error]
        return head + [result[k] for k in ("E", "E_L", "E_Z", "E_W1", "E_W2")] + \
            [result["report"]["iterations_used"], ""]
    if target == "solve-sg":
        head = [row_cfg["sg"]["l"]]
        if result is None:
            return head + [nan, nan, 0, error]
        return head + [result["E"], result["P"], result["report"]["iterations_used"], ""]
    if result is None:
        return [value, nan, 0, error]
    return [value, result["E"], result["report"]["iterations_used"], ""]


def sweep(cfg: dict, out: Path | None = None, jobs: int = 1):
    """One row per value; failures are recorded in the row, not raised."""
    sw = cfg["sweep"]
    if not sw["values"]:
        raise ConfigError("values must not be empty", "sweep.values")
    target = sw["command"]
    rows_cfg = [_row_config(cfg, v) for v in sw["values"]]
    tasks = [(target, r) for r in rows_cfg]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_sweep_row, tasks))
    else:
        outcomes = [_sweep_row(t) for t in tasks]
    header = _SWEEP_COLUMNS[target] + ["error"]
    table, rows, files = [], [], []
    for i, (value, (row_cfg, result, error)) in enumerate(zip(sw["values"], outcomes)):
        table.append(_csv_row(target, row_cfg, value, result, error))
        rows.append({"value": value, "result": result, "error": error})
        if out is not None:
            files.append(str(write_json_atomic(out / "rows" / f"row_{i:03d}.json",
                                               {"input": row_cfg, "result": result, "error": error})))
    csv_text = write_csv(out / "sweep.csv" if out is not None else None, header, table)
    if out is not None:
        files.append(str(out / "sweep.csv"))
        if cfg.get("output", {}).get("plots", False):
            from .plots import plot_sweep

            energies = [r["result"]["E"] if r["result"] else math.nan for r in rows]
            files.append(str(plot_sweep(out / "sweep.png", sw["axis"], sw["values"], energies,
                                        f"{target} sweep")))
    return {"axis": sw["axis"], "command": target, "rows": rows, "csv": csv_text}, files


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ibsolve", description="Finite-size spectra of integrable models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory for record.json, CSV dumps and figures")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep rows")
    p.add_argument("--tol", type=float, help="override iteration.tol_function")
    p.add_argument("--max-iter", type=int, help="override iteration.max_iter")
    p.add_argument("--plots", action="store_true", help="render matplotlib figures into --out")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("must be >= 1", "--jobs")
        cfg = load_config(args.config, args.command)
        it = cfg.setdefault("iteration", {})
        if args.tol is not None:
            it["tol_function"] = args.tol
        if args.max_iter is not None:
            it["max_iter"] = args.max_iter
        if args.plots:
            cfg.setdefault("output", {})["plots"] = True
        rec = run(args.command, cfg, args.out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.out is None:
        sys.stdout.write(rec.to_json())
    else:
        summary = rec.result.get("E", rec.result.get("max_residual", f"{len(rec.result.get('rows', []))} rows"))
        print(f"{args.command}: wrote {Path(args.out) / 'record.json'} ({summary})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
