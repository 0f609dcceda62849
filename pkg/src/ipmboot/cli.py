"""Command-line entry point: ``ipmboot {design,simulate,fit,bootstrap}``.

Exit codes: 0 ok, 2 validation failure, 3 converged but unstable fit,
4 no convergence, 5 too many non-convergent bootstrap replicates.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bootstrap as bs
from . import diagnostics as dg
from . import doe, fileio, plotting
from . import gauss_newton as gn
from .errors import ExcessDropError, IpmBootError, SingularStartError
from .ipm import CONFIG_NAMES, PHI_MIN, Dataset, ModelSpec, grid_start, linearized_start, phi
from .rng import gaussian_generator

log = logging.getLogger("ipmboot")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNSTABLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_EXCESS_DROP = 5

SOLVER_KEYS = ("delta", "sse_rel_tol", "max_iter", "max_halvings", "restart_on_stall")
BOOTSTRAP_KEYS = ("B", "seed", "alpha_level", "center", "max_drop_frac", "residuals")
DEFAULT_GRID = {"bounds": None, "steps": 5}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _error(message: str) -> None:
    print(f"ipmboot: error: {message}", file=sys.stderr)


def _parse_alpha(text: str):
    if text == doe.ROTATABLE:
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--alpha must be a number or {doe.ROTATABLE!r}, got {text!r}") from None


def _parse_range(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--range expects LOW,HIGH, got {text!r}") from None
    return lo, hi


def _parse_floats(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _build_design(args) -> doe.Design:
    d = doe.augment_ccd(doe.generate_factorial(args.k), args.n0, _parse_alpha(args.alpha))
    if args.range:
        ranges = [_parse_range(r) for r in args.range]
        if len(ranges) == 1 and d.k > 1:
            ranges = ranges * d.k
        d = d.with_ranges(ranges)
    return d


# -- design -----------------------------------------------------------------


def cmd_design(args) -> int:
    d = _build_design(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_design_csv(d, out / "design.csv")
    fileio.write_json(d.to_dict(), out / "design.json")
    fileio.write_json(doe.audit(d), out / "audit.json")
    log.info("wrote %d-run design to %s", d.n_runs, out)
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = ModelSpec.from_name(args.model)
    theta = np.array(_parse_floats(args.theta))
    if theta.size != spec.p:
        raise UsageError(f"--theta needs {spec.p} values for {spec.config_name}, got {theta.size}")
    if not args.sigma >= 0:
        raise UsageError(f"--sigma must be >= 0, got {args.sigma}")
    if args.k != 2:
        raise UsageError("inverse polynomial simulation needs --k 2")
    if not args.range:
        raise UsageError("--range is required to decode the design into natural units")
    d = _build_design(args)
    nat = doe.decode(d)
    if np.any(nat <= 0):
        i = int(np.flatnonzero(np.any(nat <= 0, axis=1))[0])
        raise UsageError(f"design run {i + 1} decodes to a nonpositive level {nat[i].tolist()}")
    ph = phi(spec, theta, nat[:, 0], nat[:, 1])
    bad = np.flatnonzero(~(ph > PHI_MIN))
    if bad.size:
        i = int(bad[0])
        raise UsageError(f"phi <= 0 at design run {i + 1} (x1={nat[i, 0]!r}, x2={nat[i, 1]!r}, phi={ph[i]!r})")
    y = 1.0 / ph
    if args.sigma > 0:
        y = y + args.sigma * gaussian_generator(args.seed).standard_normal(d.n_runs)
    data = Dataset(y, nat[:, 0], nat[:, 1])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.write_dataset(data, out)
    truth = {
        "model": spec.config_name,
        "theta": dict(zip(spec.param_names, map(float, theta))),
        "sigma": float(args.sigma),
        "seed": int(args.seed),
        "design": d.to_dict(),
    }
    fileio.write_json(truth, out.with_suffix(".truth.json"))
    log.info("wrote %d observations to %s", data.n, out)
    return EXIT_OK


# -- fit / bootstrap --------------------------------------------------------


def _load_config(args) -> dict:
    cfg = {"solver": {}, "bootstrap": {}, "grid": dict(DEFAULT_GRID), "emit_plots": False}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            doc = fileio.read_json(path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        base = path.parent
        for key in ("model", "data_path", "design_path", "output_dir", "emit_plots", "threads"):
            if key in doc:
                cfg[key] = doc[key]
        for key in ("solver", "bootstrap", "grid"):
            cfg[key].update(doc.get(key, {}))
        for key in ("data_path", "design_path", "output_dir"):
            if cfg.get(key) is not None:
                cfg[key] = str(base / cfg[key])
    if args.data:
        cfg["data_path"] = args.data
    if args.model:
        cfg["model"] = args.model
    if args.out:
        cfg["output_dir"] = args.out
    if getattr(args, "design", None):
        cfg["design_path"] = args.design
    if getattr(args, "plots", False):
        cfg["emit_plots"] = True
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    for key in SOLVER_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg["solver"][key] = v
    for key in BOOTSTRAP_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg["bootstrap"][key] = v
    cfg.setdefault("model", "ipm2-second")
    if cfg["model"] not in CONFIG_NAMES:
        raise UsageError(f"unknown model {cfg['model']!r}; choose from {sorted(CONFIG_NAMES)}")
    for key in ("data_path", "output_dir"):
        if not cfg.get(key):
            raise UsageError(f"{key} is required (flag or config)")
    if not Path(cfg["data_path"]).is_file():
        raise UsageError(f"data file {cfg['data_path']} does not exist")
    unknown = set(cfg["solver"]) - set(SOLVER_KEYS)
    unknown |= set(cfg["bootstrap"]) - set(BOOTSTRAP_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _start(spec, data, grid_cfg):
    try:
        return linearized_start(spec, data), "linearized"
    except SingularStartError as exc:
        log.warning("linearized start failed (%s); using grid search", exc)
    bounds = grid_cfg.get("bounds") or [(-1.0, 1.0)] * spec.p
    return grid_start(spec, data, bounds, int(grid_cfg.get("steps", 5))), "grid"


def _fit_stage(cfg):
    spec = ModelSpec.from_name(cfg["model"])
    data = fileio.read_dataset(cfg["data_path"], min_rows=spec.p)
    scfg = gn.SolverConfig(**cfg["solver"])
    start, how = _start(spec, data, cfg["grid"])
    result = gn.fit(spec, data, start, scfg)
    check = gn.verify_global(spec, data, result, scfg) if result.converged else None
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    doc = {"model": spec.config_name, **result.to_dict(), "start": how}
    if check is not None:
        doc["global_check"] = {
            "stable": check.stable,
            "refit_agrees": check.refit_agrees,
            "multistart_best_sse": float(check.multistart_best.sse),
            "multistart_sse": [None if not np.isfinite(s) else float(s) for s in check.multistart_sse],
        }
    fileio.write_json(doc, out / "fit.json")
    fileio.write_sse_trace(result.sse_trace, out / "sse_trace.csv")
    if not result.converged:
        code = EXIT_NOT_CONVERGED
    elif not check.stable:
        code = EXIT_UNSTABLE
    else:
        code = EXIT_OK
    return spec, data, scfg, result, code


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    _, _, _, result, code = _fit_stage(cfg)
    log.info("fit %s after %d iterations, SSE %.6g", result.status, result.iterations, result.sse)
    return code


def _load_design(path):
    doc = fileio.read_json(path)
    return doe.Design.from_dict(doc.get("design", doc))


def _emit_plots(out: Path, data, result, design_path):
    qq = dg.qq_normal(result.residuals)
    plotting.render_svg(qq.series, out / "qq.svg", "Normal QQ plot of residuals")
    plotting.write_series_csv(qq.series, out / "qq.csv")
    rp = dg.residual_vs_predictor(data, result.residuals)
    for s in rp.series:
        plotting.render_svg([s], out / f"residuals_{s.name}.svg", f"Residuals against {s.name}")
    plotting.write_series_csv(rp.series, out / "residuals.csv")
    trace = dg.sse_trace_series(result.sse_trace)
    plotting.render_svg([trace], out / "sse_trace.svg", "SSE by accepted iteration")
    if design_path:
        d = _load_design(design_path)
        m = doe.model_matrix(d, "second")
        radii = np.linspace(0.0, d.alpha, 41)
        prof = dg.varfcn_profile(m, dg.default_directions(d.k), radii)
        plotting.render_svg(prof, out / "varfcn.svg", "Scaled prediction variance")
        plotting.write_series_csv(prof, out / "varfcn.csv")
        grid = dg.contour_grid(m, d.alpha)
        plotting.write_table_csv(["x1", "x2", "scaled_variance"], grid.tolist(), out / "contour.csv")


def cmd_bootstrap(args) -> int:
    cfg = _load_config(args)
    bcfg = bs.BootstrapConfig(**cfg["bootstrap"])
    spec, data, scfg, result, code = _fit_stage(cfg)
    if code == EXIT_NOT_CONVERGED:
        _error(f"fit did not converge ({result.status}); bootstrap skipped")
        return code
    out = Path(cfg["output_dir"])
    try:
        res = bs.run(spec, data, result, scfg, bcfg, threads=cfg.get("threads"))
    except ExcessDropError as exc:
        _error(str(exc))
        return EXIT_EXCESS_DROP
    fileio.write_json({"model": spec.config_name, **res.to_dict()}, out / "bootstrap.json")
    fileio.write_theta_star(res.param_names, res.theta_star, res.replicate_index, out / "theta_star.csv")
    if cfg.get("emit_plots"):
        _emit_plots(out, data, result, cfg.get("design_path"))
    log.info("bootstrap: %d replicates kept, %d dropped", res.theta_star.shape[0], res.dropped)
    return code


# -- parser -----------------------------------------------------------------


def _design_args(p, required=True):
    p.add_argument("--k", type=int, required=required, default=None if required else 2, help="factor count")
    p.add_argument("--n0", type=int, default=5, help="center runs")
    p.add_argument("--alpha", default=doe.ROTATABLE, help="axial distance or 'rotatable'")
    p.add_argument("--range", action="append", metavar="LOW,HIGH",
                   help="natural-unit bounds for coded -1/+1; repeat per factor")


def _model_args(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--data", help="CSV with columns y,x1,x2")
    p.add_argument("--model", help=f"one of {', '.join(sorted(CONFIG_NAMES))}")
    p.add_argument("--out", help="output directory")
    p.add_argument("--delta", type=float)
    p.add_argument("--sse-rel-tol", dest="sse_rel_tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--max-halvings", dest="max_halvings", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ipmboot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", parents=[common], help="generate a central composite design and audit it")
    _design_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", parents=[common], help="simulate inverse polynomial data on a design")
    _design_args(p, required=False)
    p.add_argument("--model", default="ipm2-second")
    p.add_argument("--theta", required=True, help="comma-separated parameters in model order")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit an inverse polynomial by Gauss-Newton")
    _model_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", parents=[common], help="fit, then residual-bootstrap the estimates")
    _model_args(p)
    p.add_argument("--B", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha-level", dest="alpha_level", type=float)
    p.add_argument("--center", choices=(bs.BOOTSTRAP_MEAN, bs.ORIGINAL_ESTIMATE))
    p.add_argument("--residuals", choices=bs.RESIDUAL_MODES)
    p.add_argument("--max-drop-frac", dest="max_drop_frac", type=float)
    p.add_argument("--design", help="design JSON (or simulation truth JSON) for varfcn plots")
    p.add_argument("--plots", action="store_true", help="emit SVG and CSV diagnostics")
    p.add_argument("--threads", type=int, help="worker threads for replicate refits")
    p.set_defaults(func=cmd_bootstrap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, IpmBootError) as exc:
        _error(str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
