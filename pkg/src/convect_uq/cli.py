"""Command-line front end: deterministic runs, grid verification, and
the staged UQ workflow (ensemble -> fit/train -> propagate/sobol).

Every subcommand reads the same INI configuration (see runconfig), works
under one artifact directory, and is deterministic for fixed config,
seeds, and thread count. Exit codes: 0 success, 1 bad configuration,
2 non-convergence, 3 missing prerequisite artifact, 4 other toolkit
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import runconfig
from .errors import (
    ConfigError,
    EnsembleError,
    FitError,
    MissingPrerequisiteError,
    NonConvergenceError,
    ToolkitError,
)
from .dnn import load_mlp, save_mlp
from .grid import make_grid, nearest_layer, write_plane_csv
from .pce import load_pce, response_surface, total_sobol
from .solver.driver import richardson_extrapolate, run_to_steady
from .solver.nusselt import mean_nusselt, nusselt_hot_wall
from .uq import case_a, case_b
from .uq.ensemble import (
    FILE_KEYS,
    PLANE_AXES,
    SCALAR_NAMES,
    read_manifest,
    run_ensemble,
    sample_outputs,
)

log = logging.getLogger("convect_uq.cli")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _configure_logging() -> None:
    raw = os.environ.get("CONVECT_UQ_LOG", "warn").strip().lower()
    if raw not in _LOG_LEVELS:
        raise ConfigError(
            f"CONVECT_UQ_LOG must be one of {sorted(_LOG_LEVELS)}, got {raw!r}"
        )
    root = logging.getLogger("convect_uq")
    root.setLevel(_LOG_LEVELS[raw])
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(levelname)s %(name)s: %(message)s")
        )
        root.addHandler(handler)


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(obj) + "\n")


def _render_planes(rc, csv_paths) -> None:
    if not rc["output"]["figures"]:
        return
    from . import report

    for path in csv_paths:
        report.render_plane(path, Path(path).parent)


def _missing(path: Path, producer: str) -> MissingPrerequisiteError:
    return MissingPrerequisiteError(
        f"missing {path}; run the {producer} subcommand first"
    )


def cmd_simulate(rc, out_dir: Path) -> int:
    grid = make_grid(rc["grid"]["n"])
    cfg = runconfig.solver_config(rc)
    bc = runconfig.boundary_spec(rc)
    state, rep = run_to_steady(cfg, bc, grid)
    planes, scalars = sample_outputs(state, bc, grid)

    out_dir.mkdir(parents=True, exist_ok=True)
    for key in FILE_KEYS:
        write_plane_csv(out_dir / f"{key}.csv", planes[key], PLANE_AXES[key],
                        grid)
    with open(out_dir / "residual_history.csv", "w") as fh:
        fh.write("step,u,v,w,theta\n")
        for row in rep.history:
            fh.write("%d" % row[0]
                     + "".join(",%.17g" % v for v in row[1:]) + "\n")
    _write_json(out_dir / "summary.json", {
        "mean_nu": float(scalars[0]),
        "steps": rep.steps,
        "time": rep.time,
        "div_max": rep.div_max,
    })
    _render_planes(rc, [out_dir / f"{key}.csv" for key in FILE_KEYS])
    print(f"mean Nu {scalars[0]:.3f} after {rep.steps} steps "
          f"(t={rep.time:.3f}, max |div| {rep.div_max:.2e})")
    return 0


def cmd_verify(rc, out_dir: Path) -> int:
    sizes = rc["grid"]["sizes"]
    if len(sizes) < 3:
        raise ConfigError(
            "[grid] sizes must list at least three grids for the verify study"
        )
    cfg = runconfig.solver_config(rc)
    bc = runconfig.boundary_spec(rc)
    out_dir.mkdir(parents=True, exist_ok=True)

    nus = []
    profiles = []  # (n, centers, theta_x, v_x, u_y)
    for n in sizes:
        grid = make_grid(n)
        state, _ = run_to_steady(cfg, bc, grid)
        nu = mean_nusselt(nusselt_hot_wall(state.theta, bc, grid), grid)
        nus.append(nu)
        print(f"n={n}  mean Nu {nu:.6f}")
        mid = nearest_layer(grid, 0.5)
        c = grid.cell_centers()
        theta_x = state.theta[:, mid, mid]
        v_x = state.v[:, mid, mid]
        u_y = state.u[mid, :, mid]
        with open(out_dir / f"centerline_x_n{n}.csv", "w") as fh:
            fh.write("x,theta,v\n")
            for row in zip(c, theta_x, v_x):
                fh.write(",".join("%.17g" % v for v in row) + "\n")
        with open(out_dir / f"centerline_y_n{n}.csv", "w") as fh:
            fh.write("y,u\n")
            for row in zip(c, u_y):
                fh.write(",".join("%.17g" % v for v in row) + "\n")
        profiles.append((n, c, theta_x, v_x, u_y))

    with open(out_dir / "grid_study.csv", "w") as fh:
        fh.write("n,mean_nu\n")
        for n, nu in zip(sizes, nus):
            fh.write("%d,%.17g\n" % (n, nu))

    extrapolated = None
    order = None
    try:
        extrapolated, order = richardson_extrapolate(
            nus[-3:], [1.0 / n for n in sizes[-3:]]
        )
        print(f"extrapolated mean Nu {extrapolated:.6f} "
              f"(observed order {order:.2f})")
    except FitError as exc:
        # steady-state stopping leaves O(steady_tol) noise in each Nu, so
        # "already converged" must tolerate a few ulps of that, not zero
        diffs = np.abs(np.diff(nus))
        if diffs.max() <= 1.0e-5 * max(1.0, abs(nus[-1])):
            extrapolated = nus[-1]
            print("observed order exact (grid sequence already converged)")
        else:
            print(f"observed order undefined ({exc})")
    _write_json(out_dir / "summary.json", {
        "sizes": list(sizes),
        "mean_nu": nus,
        "richardson": extrapolated,
        "observed_order": order,
    })

    if rc["output"]["figures"]:
        from . import report

        fig_dir = out_dir / "figures"
        for label, idx in (("theta", 2), ("v", 3)):
            report.render_profiles(
                [(p[1], p[idx], f"n={p[0]}") for p in profiles],
                "x", label, fig_dir / f"centerline_{label}_x.png",
            )
        report.render_profiles(
            [(p[1], p[4], f"n={p[0]}") for p in profiles],
            "y", "u", fig_dir / "centerline_u_y.png",
        )
    return 0


def cmd_ensemble(rc, out_dir: Path) -> int:
    grid = make_grid(rc["grid"]["n"])
    cfg = runconfig.solver_config(rc)
    workers = rc["solver"]["workers"]
    sets = []
    if rc["output"]["case"] == "a":
        spec = runconfig.case_a_spec(rc)
        sets.append(("ensemble", run_ensemble(
            spec, case_a.collocation_design(spec), cfg, grid,
            out_dir / "ensemble", workers=workers,
        )))
        n_test = rc["case_a"]["n_test"]
        if n_test > 0 and spec.sigma_fraction > 0.0:
            sets.append(("test", run_ensemble(
                spec, case_a.test_design(spec, n_test), cfg, grid,
                out_dir / "test", workers=workers,
            )))
    else:
        spec = runconfig.case_b_spec(rc)
        for name in ("train", "val", "test"):
            sets.append((name, run_ensemble(
                spec, case_b.set_design(spec, name), cfg, grid,
                out_dir / name, workers=workers,
            )))
    print(f"{'set':<10}{'samples':>8}{'done':>6}{'failed':>8}")
    for name, man in sets:
        print(f"{name:<10}{man.n_samples:>8}{man.n_done:>6}{man.n_failed:>8}")
    return 0


def cmd_fit_pce(rc, out_dir: Path) -> int:
    if rc["output"]["case"] != "a":
        raise ConfigError("fit-pce drives the (Ra, Pr) study; "
                          "set [output] case = a")
    spec = runconfig.case_a_spec(rc)
    manifest_path = out_dir / "ensemble" / "manifest.csv"
    if not manifest_path.is_file():
        raise _missing(manifest_path, "ensemble")
    manifest = read_manifest(manifest_path)

    field_models, scalar_model = case_a.fit_study_models(spec, manifest)
    case_a.save_study_models(out_dir / "models", field_models, scalar_model)
    degenerate = spec.sigma_fraction == 0.0

    print(f"{'quantity':<10}{'max fit residual':>18}")
    for key in FILE_KEYS:
        print(f"{key:<10}{field_models[key].fit_residual.max():>18.3e}")
    print(f"{'scalars':<10}{scalar_model.fit_residual.max():>18.3e}")

    if not degenerate:
        surface = response_surface(scalar_model, output=0)
        surface_path = out_dir / "response_surface_nu_mean.csv"
        case_a.write_response_surface_csv(surface_path, surface)
        if rc["output"]["figures"]:
            from . import report

            report.render_surface(surface_path, out_dir)

    test_error = None
    test_path = out_dir / "test" / "manifest.csv"
    if test_path.is_file() and not degenerate:
        test_error = case_a.mean_nu_test_error(
            scalar_model, read_manifest(test_path)
        )
        print(f"test error (mean Nu): {test_error:.3e}")
    _write_json(out_dir / "summary.json", {
        "mu_ra": spec.mu_ra,
        "level": spec.level,
        "order": spec.order,
        "n_samples": manifest.n_samples,
        "n_failed": manifest.n_failed,
        "fit_residual": 0.0 if degenerate
        else float(scalar_model.fit_residual[0]),
        "test_error": test_error,
    })
    return 0


def cmd_train_dnn(rc, out_dir: Path) -> int:
    if rc["output"]["case"] != "b":
        raise ConfigError("train-dnn drives the strip study; "
                          "set [output] case = b")
    spec = runconfig.case_b_spec(rc)
    inputs = {}
    planes = {}
    for name in ("train", "val", "test"):
        path = out_dir / name / "manifest.csv"
        if not path.is_file():
            raise _missing(path, "ensemble")
        man = read_manifest(path)
        if not man.done_rows():
            raise EnsembleError(f"every sample in the {name} set failed")
        inputs[name], planes[name] = case_b.set_arrays(man)

    scale = rc["dnn"]["scale"]
    networks, histories, error_table, warnings = case_b.train_quantity_networks(
        spec, scale, runconfig.train_config(rc), inputs, planes
    )
    models_dir = out_dir / "models"
    models_dir.mkdir(exist_ok=True)
    for key, net in networks.items():
        save_mlp(models_dir / f"{key}.mlp", net)
    case_b.write_error_table(out_dir / "error_table.json", scale, error_table,
                             warnings)

    for key, hist in histories.items():
        with open(out_dir / f"training_history_{key}.csv", "w") as fh:
            fh.write("epoch,train,val\n")
            for e, (tr, va) in enumerate(zip(hist["train"], hist["val"]), 1):
                fh.write("%d,%.17g,%.17g\n" % (e, tr, va))
    if rc["output"]["figures"]:
        from . import report

        for key, hist in histories.items():
            report.render_history(
                hist, out_dir / "figures" / f"training_history_{key}.png"
            )

    print(f"{'quantity':<10}{'train %':>10}{'test %':>10}")
    for key, errs in error_table.items():
        print(f"{key:<10}{errs['train']:>10.3g}{errs['test']:>10.3g}")
    for warning in warnings:
        print(f"warning: {warning}")
    return 0


def cmd_propagate(rc, out_dir: Path) -> int:
    grid = make_grid(rc["grid"]["n"])
    cfg = runconfig.solver_config(rc)
    if rc["output"]["case"] == "a":
        spec = runconfig.case_a_spec(rc)
        models = {}
        for key in FILE_KEYS:
            path = out_dir / "models" / f"{key}.pce"
            if not path.is_file():
                raise _missing(path, "fit-pce")
            models[key] = load_pce(path)
        _, summaries = case_a.propagate_study(
            spec, cfg, grid, models, out_dir, rc["case_a"]["mc_samples"]
        )
    else:
        spec = runconfig.case_b_spec(rc)
        networks = {}
        for key in FILE_KEYS:
            path = out_dir / "models" / f"{key}.mlp"
            if not path.is_file():
                raise _missing(path, "train-dnn")
            networks[key] = load_mlp(path)
        _, summaries = case_b.propagate_study(
            spec, cfg, grid, networks, out_dir, rc["case_b"]["mc_samples"]
        )
    print(f"{'quantity':<10}{'shift of mean %':>16}{'max std':>12}")
    for key, s in summaries.items():
        print(f"{key:<10}{s['relative_shift_percent']:>16.3g}"
              f"{s['max_std']:>12.3g}")
    _render_planes(rc, sorted((out_dir / "stats").glob("*.csv")))
    return 0


def cmd_sobol(rc, out_dir: Path) -> int:
    path = out_dir / "models" / "scalars.pce"
    if not path.is_file():
        raise _missing(path, "fit-pce")
    model = load_pce(path)
    sobol = total_sobol(model)
    dims, n_out = sobol.shape
    if (dims, n_out) == (2, len(SCALAR_NAMES)):
        outputs, inputs = SCALAR_NAMES, ("ra", "pr")
    else:
        outputs = tuple(f"output_{j}" for j in range(n_out))
        inputs = tuple(f"xi_{i + 1}" for i in range(dims))
    case_a.write_sobol_table(out_dir / "sobol.csv", sobol, outputs, inputs)
    for j, name in enumerate(outputs):
        cells = " ".join(f"S{i + 1}_T={sobol[i, j]:.2f}" for i in range(dims))
        print(f"{name}: {cells}")
    return 0


class _Parser(argparse.ArgumentParser):
    """Usage errors surface as ConfigError so main() can map them to 1."""

    def error(self, message):
        raise ConfigError(message)


_COMMANDS = (
    ("simulate", cmd_simulate,
     "run one deterministic case and write its fields"),
    ("verify", cmd_verify,
     "grid study with Richardson extrapolation and centerline profiles"),
    ("ensemble", cmd_ensemble,
     "run the sample design of the selected case"),
    ("fit-pce", cmd_fit_pce,
     "fit polynomial chaos expansions from the ensemble manifest"),
    ("train-dnn", cmd_train_dnn,
     "train the per-quantity networks from the three sample sets"),
    ("propagate", cmd_propagate,
     "Monte Carlo statistics through the fitted surrogates"),
    ("sobol", cmd_sobol,
     "total Sobol indices of the scalar expansion"),
)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="convect-uq",
        description="UQ toolkit for buoyancy-driven cavity flow",
        epilog=runconfig.help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    for name, func, help_ in _COMMANDS:
        p = sub.add_parser(
            name, help=help_, epilog=runconfig.help_text(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", required=True,
                       help="path to the INI run configuration")
        p.add_argument("--out-dir",
                       help="artifact root (default: [output] directory)")
        p.add_argument("--workers", type=int,
                       help="override [solver] workers")
        p.add_argument("--seed-override", type=int,
                       help="override the seed of both case sections")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        _configure_logging()
        rc = runconfig.load_config(args.config)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            rc = runconfig.override(rc, "solver", "workers", args.workers)
        if args.seed_override is not None:
            if args.seed_override < 0:
                raise ConfigError("--seed-override must be >= 0")
            rc = runconfig.override(rc, "case_a", "seed", args.seed_override)
            rc = runconfig.override(rc, "case_b", "seed", args.seed_override)
        out_dir = Path(args.out_dir if args.out_dir
                       else rc["output"]["directory"])
        log.info("%s -> %s", args.command, out_dir)
        return args.func(rc, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MissingPrerequisiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
