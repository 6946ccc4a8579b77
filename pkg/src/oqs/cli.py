"""Command-line front end.

Each subcommand merges, in increasing priority, a preset, a ``--config`` JSON
file and explicit flags; validates the result against the schema shipped in
``oqs/schemas``; runs; and writes CSV files plus a JSON summary
(``<command>_summary.json``, also echoed to stdout). Failures print a JSON
object on stderr and exit with 2 (bad input) or 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import continuum as cont
from . import dynamics as dyn
from . import feshbach as fb
from . import lattice as lat
from . import qep as qp
from .errors import DomainError, InputError, OqsError
from .numerics import Tolerance

PRESETS: dict[str, tuple[str, dict[str, Any]]] = {
    "table1": ("qep", {"v0": 0.0, "w1": 0.5}),
    "fig4": ("transmission", {"alpha0": 0.0, "alpha1": 1.0}),
    "fig6": ("transmission", {"alpha0": 3.0, "alpha1": 1.0}),
    "fig3": ("poles", {"alpha0": 0.0, "alpha1": 1.0}),
    "fig5": ("poles", {"alpha0": 3.0, "alpha1": 1.0}),
    "fig11": ("sweep", {"w1": 0.5, "v0_min": -3.0, "v0_max": 3.0, "steps": 601}),
    "figB1": ("ep", {"alpha1": 1.0, "alpha0_min": 0.0, "alpha0_max": 1.5, "steps": 151}),
    "fig16": ("survival", {"v0": 0.0, "w1": 0.5, "psi0": [1.0, 1.0],
                           "tmin": -20.0, "tmax": 20.0, "points": 81}),
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "transmission": {"kmin": 0.0, "kmax": 20.0, "points": 2001, "xi_max": 20.0},
    "poles": {"xi_max": 20.0, "eta_min": -3.0, "eta_max": 0.0, "n_xi": 400, "n_eta": 120,
              "density_points": 0},
    "sweep": {"steps": 601},
    "ep": {"alpha0_min": 0.0, "alpha0_max": 1.5, "steps": 151},
    "qep": {},
    "survival": {"points": 81, "method": "k", "oracle": False, "quad_abs_tol": 1e-10},
    "zeno": {"n_max": 100},
    "continuum-limit": {"n_per_ell": [8, 16, 32]},
}


class UsageError(InputError):
    pass


def _schema(command: str) -> dict:
    text = resources.files("oqs").joinpath("schemas", f"{command}.json").read_text()
    return json.loads(text)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _c(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


class Run:
    """Collects files and the summary for one command invocation."""

    def __init__(self, command: str, cfg: dict[str, Any]):
        self.command = command
        self.cfg = cfg
        self.out_dir = Path(cfg.get("out_dir") or ".")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.outputs: dict[str, Any] = {}
        self.residuals: dict[str, float | None] = {}
        self.tolerances: dict[str, float] = {}
        self.t0 = time.perf_counter()

    def csv(self, name: str, header: list[str], rows: list[list[Any]]) -> Path:
        path = self.out_dir / name
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        self.files.append(str(path))
        return path

    def text(self, name: str, body: str) -> Path:
        path = self.out_dir / name
        path.write_text(body)
        self.files.append(str(path))
        return path

    def gnuplot(self, csv_path: Path, xcol: int, ycols: list[int], xlabel: str, logy: bool = False) -> None:
        if self.cfg.get("plot") != "gnuplot":
            return
        lines = ["set datafile separator ','", "set key autotitle columnhead",
                 f"set xlabel '{xlabel}'"]
        if logy:
            lines.append("set logscale y")
        plots = ", ".join(f"'{csv_path.name}' using {xcol}:{y} with lines" for y in ycols)
        lines.append(f"plot {plots}")
        self.text(csv_path.stem + ".gp", "\n".join(lines) + "\n")

    def summary(self) -> dict[str, Any]:
        inputs = {k: v for k, v in self.cfg.items() if k not in ("out_dir", "plot")}
        out = {
            "command": self.command,
            "inputs": inputs,
            "outputs": self.outputs,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "wall_time": time.perf_counter() - self.t0,
        }
        path = self.out_dir / f"{self.command}_summary.json"
        out["files"] = self.files + [str(path)]
        path.write_text(json.dumps(out, indent=2) + "\n")
        return out


# ---------------------------------------------------------------------------
# commands


def cmd_transmission(run: Run) -> None:
    c = run.cfg
    model = cont.ContinuumModel(c["alpha0"], c["alpha1"])
    k = np.linspace(c["kmin"], c["kmax"], c["points"])
    k = k[k > 0]
    T = [cont.transmission(model, float(x)) for x in k]
    rel = max(abs(cont.transfer_matrix(model, x).t11 - cont.t11_closed(model, x)) / abs(cont.t11_closed(model, x))
              for x in k[:: max(1, k.size // 200)])
    p = run.csv("transmission.csv", ["k_ell", "T"], [[float(a), b] for a, b in zip(k, T)])
    run.gnuplot(p, 1, [2], "k l")
    poles = cont.poles_general(model, cont.SearchBox(xi_max=c["xi_max"]))
    rows = [[p_.K.real, p_.K.imag, p_.kind.value, p_.parity.value] for p_ in poles
            if 0 < p_.K.real <= c["kmax"]]
    run.csv("transmission_poles.csv", ["xi", "eta", "kind", "parity"], rows)
    run.outputs["n_poles"] = len(rows)
    run.outputs["max_T"] = float(max(T)) if T else None
    run.residuals["t11_product_vs_closed_rel"] = float(rel)
    if c["alpha0"] == 0:
        pts = cont.perfect_transmission_points(c["alpha1"], 3)
        run.outputs["perfect_transmission_k"] = pts
        run.residuals["perfect_transmission"] = float(max(abs(1 - cont.transmission(model, x)) for x in pts))
    run.tolerances["perfect_transmission"] = 1e-10


def _t11_residual(model: cont.ContinuumModel, poles: list) -> float:
    return float(max(abs(cont.t11_closed(model, p.K)) for p in poles))


def cmd_poles(run: Run) -> None:
    c = run.cfg
    model = cont.ContinuumModel(c["alpha0"], c["alpha1"])
    box = cont.SearchBox(c["xi_max"], c["eta_min"], c["eta_max"], c["n_xi"], c["n_eta"])
    search = cont.poles_symmetric if c["alpha0"] == 0 else cont.poles_general
    poles = search(model, box)
    rows = [[p.K.real, p.K.imag, p.E.real, p.E.imag, p.kind.value, p.parity.value] for p in poles]
    run.csv("poles.csv", ["xi", "eta", "Re_E", "Im_E", "kind", "parity"], rows)
    if c["density_points"]:
        n = c["density_points"]
        xi = np.linspace(-c["xi_max"], c["xi_max"], 2 * n)
        eta = np.linspace(c["eta_min"], c["eta_max"], n)
        D = cont.density_function(model, xi, eta)
        p = run.csv("density.csv", ["xi", "eta", "log_density"],
                    [[float(x), float(y), float(D[i, j])] for i, x in enumerate(xi) for j, y in enumerate(eta)])
        if run.cfg.get("plot") == "gnuplot":
            run.text("density.gp", "set datafile separator ','\nset view map\n"
                     f"splot '{p.name}' using 1:2:3 with points palette pt 5 ps 0.5\n")
    run.outputs["n_poles"] = len(poles)
    run.outputs["poles"] = [p.as_dict() for p in poles]
    run.residuals["max_abs_t11_at_poles"] = _t11_residual(model, poles)
    run.tolerances["t11_at_poles"] = 1e-9


def cmd_sweep(run: Run) -> None:
    c = run.cfg
    rows_ = lat.pole_sweep(lat.DimerModel(0.0, c["w1"]), (c["v0_min"], c["v0_max"]), c["steps"])
    header = ["v0"]
    for n in range(1, 5):
        header += [f"Re_lambda{n}", f"Im_lambda{n}", f"Re_E{n}", f"Im_E{n}", f"kind{n}"]
    header.append("collision")
    rows, det_res = [], 0.0
    for r in rows_:
        row: list[Any] = [r.v0]
        model = fb.dimer_lattice(lat.DimerModel(r.v0, c["w1"]))
        for p in r.poles:
            row += [p.lam.real, p.lam.imag, p.E.real, p.E.imag, p.kind.value]
            det_res = max(det_res, abs(fb.pole_determinant(model, p.lam)))
        row.append(";".join(f"{i + 1}-{j + 1}" for i, j in r.collisions))
        rows.append(row)
    p = run.csv("sweep.csv", header, rows)
    run.gnuplot(p, 1, [4, 9, 14, 19], "v0")
    run.outputs["collisions"] = [[r.v0, [list(x) for x in r.collisions]] for r in rows_ if r.collisions]
    run.residuals["max_abs_det_at_poles"] = float(det_res)
    run.tolerances["det_at_poles"] = 1e-10


def cmd_ep(run: Run) -> None:
    c = run.cfg
    res = cont.ep_trajectory(c["alpha1"], (c["alpha0_min"], c["alpha0_max"]), c["steps"])
    rows = []
    for a0, poles in res.trajectory:
        rows.append([a0] + [v for p in poles for v in (p.K.real, p.K.imag)] + [p.kind.value for p in poles])
    p = run.csv("ep.csv", ["alpha0", "Re_K1", "Im_K1", "Re_K2", "Im_K2", "kind1", "kind2"], rows)
    run.gnuplot(p, 2, [3, 5], "Re K")
    F, _ = cont._ep_system(c["alpha1"], res.alpha0_star, res.eta_star)
    run.outputs["alpha0_star"] = res.alpha0_star
    run.outputs["eta_star"] = res.eta_star
    run.residuals["ep_equations"] = float(np.max(np.abs(F)))
    run.tolerances["ep_equations"] = 1e-12


def _qep_model(c: dict[str, Any]) -> fb.OpenLattice:
    if "lattice" in c:
        if "v0" in c or "w1" in c:
            raise UsageError("give either a lattice or v0/w1, not both")
        return fb.OpenLattice.from_json(c["lattice"])
    if "v0" in c and "w1" in c:
        return fb.dimer_lattice(lat.DimerModel(c["v0"], c["w1"]))
    raise UsageError("qep needs v0 and w1, or a lattice")


def cmd_qep(run: Run) -> None:
    model = _qep_model(run.cfg)
    spec = qp.qep_solve(model)
    rows = [[n + 1, p.pole.kind.value, p.pole.parity.value, *_c(p.lam), *_c(p.K), *_c(p.E)]
            for n, p in enumerate(spec.pairs)]
    run.csv("qep.csv", ["n", "kind", "parity", "Re_lambda", "Im_lambda", "Re_K", "Im_K", "Re_E", "Im_E"], rows)
    run.text("qep_spectrum.json", json.dumps(spec.to_json(), indent=2) + "\n")
    run.outputs["spectrum"] = spec.to_json()["pairs"]
    dA, dB = qp.orthogonality_check(spec)
    scale = max(1.0, float(np.max(np.abs(spec.lambdas))) ** 2)
    run.residuals["qep_equation"] = qp.qep_residual(spec)
    run.residuals["completeness_frobenius"] = qp.completeness_check(spec)
    run.residuals["orthogonality_A"] = dA
    run.residuals["orthogonality_B"] = dB
    run.residuals["max_abs_det_at_poles"] = float(
        max(abs(fb.pole_determinant(model, p.lam)) for p in spec.pairs) / scale)
    run.tolerances["completeness"] = 1e-10


def cmd_survival(run: Run) -> None:
    c = run.cfg
    model = fb.dimer_lattice(lat.DimerModel(c["v0"], c["w1"]))
    psi0 = dyn.initial_state(c.get("psi0", [1.0] * model.n_sites))
    if c["tmax"] < c["tmin"]:
        raise UsageError("tmax must not be below tmin")
    times = np.linspace(c["tmin"], c["tmax"], c["points"])
    spec = qp.qep_solve(model)
    tmax = float(np.max(np.abs(times)))
    M = c.get("oracle_m", int(np.ceil(2 * model.W * tmax)) + 64) if c["oracle"] else None
    tol = Tolerance(c["quad_abs_tol"], 0.0)
    series = dyn.survival_series(spec, psi0, times, c["method"], M, tol)
    p = run.text("survival.csv", series.to_csv())
    ncol = 2 * len(series.poles) + 2
    run.gnuplot(p, 1, [ncol] + ([ncol + 1] if M else []), "t")
    ps = series.p_surv
    run.outputs["p_surv_min"] = float(ps.min())
    run.outputs["p_surv_max"] = float(ps.max())
    run.outputs["poles"] = [pl.as_dict() for pl in series.poles]
    zero = np.flatnonzero(times == 0.0)
    run.residuals["p_surv_at_zero"] = float(abs(ps[zero[0]] - 1)) if zero.size else None
    if np.allclose(times, -times[::-1], rtol=0, atol=1e-12):
        run.residuals["evenness"] = float(np.max(np.abs(ps - ps[::-1])))
    if M:
        run.outputs["oracle_M"] = M
        run.residuals["oracle_max_abs_diff"] = float(np.max(np.abs(ps - series.p_oracle)))
        run.tolerances["oracle"] = 1e-6
    run.tolerances["quad_abs_tol"] = c["quad_abs_tol"]


def cmd_zeno(run: Run) -> None:
    c = run.cfg
    g2, T = c["gamma2"], c["T"]
    n_min = c.get("n_min", int(np.floor(np.sqrt(g2) * T)) + 1)
    if n_min > c["n_max"]:
        raise UsageError("n_min exceeds n_max")
    rows, worst = [], -np.inf
    for N in range(n_min, c["n_max"] + 1):
        P = dyn.zeno_product(g2, T, N)
        bound = g2 * T * T / N
        worst = max(worst, (1 - P) - bound)
        rows.append([N, P, 1 - P, bound])
    p = run.csv("zeno.csv", ["N", "P_N", "one_minus_P", "bound"], rows)
    run.gnuplot(p, 1, [2], "N")
    run.outputs["P_at_n_max"] = rows[-1][1]
    run.outputs["monotone"] = bool(all(b[1] >= a[1] for a, b in zip(rows, rows[1:])))
    run.residuals["max_excess_over_bound"] = float(worst)


def cmd_continuum_limit(run: Run) -> None:
    c = run.cfg
    model = cont.ContinuumModel(c["alpha0"], c["alpha1"])
    target = min((p for p in cont.poles_general(model) if p.kind.value == "Resonant"),
                 key=lambda p: p.K.real)
    rows, a_s, errs = [], [], []
    for n in c["n_per_ell"]:
        a = 1.0 / n
        K = fb.discretized_pole_near(model, a, target.K)
        err = abs(K - target.K)
        rows.append([n, a, K.real, K.imag, err])
        a_s.append(a)
        errs.append(err)
    p = run.csv("continuum_limit.csv", ["n_per_ell", "a", "Re_K", "Im_K", "error"], rows)
    run.gnuplot(p, 2, [5], "a", logy=True)
    run.outputs["continuum_K"] = _c(target.K)
    run.outputs["order"] = fb.convergence_order(a_s, errs)
    run.residuals["finest_error"] = float(errs[-1])


COMMANDS: dict[str, Callable[[Run], None]] = {
    "transmission": cmd_transmission,
    "poles": cmd_poles,
    "sweep": cmd_sweep,
    "ep": cmd_ep,
    "qep": cmd_qep,
    "survival": cmd_survival,
    "zeno": cmd_zeno,
    "continuum-limit": cmd_continuum_limit,
}

# flag name -> type; every flag defaults to None so unset flags don't override
FLAGS: dict[str, dict[str, Any]] = {
    "transmission": {"alpha0": float, "alpha1": float, "kmin": float, "kmax": float, "points": int,
                     "xi_max": float},
    "poles": {"alpha0": float, "alpha1": float, "xi_max": float, "eta_min": float, "eta_max": float,
              "n_xi": int, "n_eta": int, "density_points": int},
    "sweep": {"w1": float, "v0_min": float, "v0_max": float, "steps": int},
    "ep": {"alpha1": float, "alpha0_min": float, "alpha0_max": float, "steps": int},
    "qep": {"v0": float, "w1": float, "lattice": "json"},
    "survival": {"v0": float, "w1": float, "psi0": "floats", "tmin": float, "tmax": float,
                 "points": int, "method": str, "oracle": bool, "oracle_m": int, "quad_abs_tol": float},
    "zeno": {"gamma2": float, "T": float, "n_min": int, "n_max": int},
    "continuum-limit": {"alpha0": float, "alpha1": float, "n_per_ell": "ints"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oqs", description="Discrete eigenstates and survival dynamics of open 1-D systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, flags in FLAGS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with parameters (flags override)")
        sp.add_argument("--preset", choices=sorted(k for k, v in PRESETS.items() if v[0] == name))
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--plot", choices=["gnuplot"])
        for flag, kind in flags.items():
            opt = "--" + flag.replace("_", "-")
            if kind is bool:
                sp.add_argument(opt, dest=flag, action="store_true", default=None)
            elif kind == "floats":
                sp.add_argument(opt, dest=flag, type=float, nargs="+")
            elif kind == "ints":
                sp.add_argument(opt, dest=flag, type=int, nargs="+")
            elif kind == "json":
                sp.add_argument(opt, dest=flag, help="path to an OpenLattice JSON file")
            else:
                sp.add_argument(opt, dest=flag, type=kind)
        if name == "continuum-limit":
            sp.add_argument("--a", dest="a_values", type=float, nargs="+",
                            help="lattice constants (alternative to --n-per-ell)")
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cmd = args.command
    cfg: dict[str, Any] = {}
    if args.preset:
        cfg.update(PRESETS[args.preset][1])
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    for flag, kind in FLAGS[cmd].items():
        val = getattr(args, flag, None)
        if val is None:
            continue
        if kind == "json":
            try:
                val = json.loads(Path(val).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read lattice: {exc}") from exc
        cfg[flag] = val
    if getattr(args, "a_values", None):
        ns = [1.0 / a for a in args.a_values]
        if any(abs(n - round(n)) > 1e-9 * n for n in ns):
            raise DomainError("1/a must be an integer")
        cfg["n_per_ell"] = [int(round(n)) for n in ns]
    for key in ("out_dir", "plot"):
        if getattr(args, key):
            cfg[key] = getattr(args, key)
    try:
        jsonschema.validate(cfg, _schema(cmd))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise UsageError(f"config invalid at '{path}': {exc.message}") from exc
    return {**DEFAULTS[cmd], **cfg}


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        run = Run(args.command, cfg)
        with np.errstate(all="ignore"):
            COMMANDS[args.command](run)
        sys.stdout.write(json.dumps(run.summary(), indent=2) + "\n")
        return 0
    except OqsError as exc:
        return _fail(exc, exc.exit_code)
    except (ValueError, ArithmeticError) as exc:
        return _fail(exc, 3)


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
