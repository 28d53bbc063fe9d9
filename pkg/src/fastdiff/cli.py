"""Command-line entry point: ``fastdiff <command> [--config FILE] [overrides]``.

Every command writes CSV/JSON artifacts and a ``manifest.json`` (resolved
parameters, library versions, timings, SHA-256 of every file) into ``--out``.
Exit status: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .asymptotics_pipeline import TheoremConfig, c_integral, profile_for_problem, verify_theorem
from .blowup_elliptic import DEFAULT_BLOWUP_GRID, boundary_rate_report, solve_blowup
from .domains import GridSpec, RadialDomain, Shape
from .geometry import TouchingBallConfig, lemma71_limit_check, level_area, monte_carlo_level_area
from .io import sha256_file, write_csv, write_json
from .models import ConvergenceError, DiffusionModel, ParameterError
from .radial_pde import EvolutionSpec, ProblemKind, simulate
from .similarity_profiles import Perturbation, ProfileVariant, Side, profile_for

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

_MODEL_KEYS = {"p", "m"}
_DOMAIN_KEYS = {"shape", "rho", "rho_in", "rho_out", "N"}
_GRID_KEYS = {"n_space", "n_time", "refinement_ratio", "regularization_sigma", "truncation_radius", "d_min", "t_start"}

SCHEMAS = {
    "profile": _MODEL_KEYS | {"beta", "side", "perturbation", "epsilon", "xi_max", "n", "eta"},
    "blowup": _MODEL_KEYS | _DOMAIN_KEYS | {"delta", "r_infinity", "n_space", "refinement_ratio"},
    "simulate": _MODEL_KEYS | _DOMAIN_KEYS | _GRID_KEYS | {"problem", "beta", "times", "scheme"},
    "geometry": _DOMAIN_KEYS | {"R", "touch", "s", "mc_samples", "mc_s"},
    "constant": _MODEL_KEYS | {"alpha", "N", "beta", "problem"},
    "verify": _MODEL_KEYS | _DOMAIN_KEYS | _GRID_KEYS | {"alpha", "R", "touch", "beta", "problem", "times", "scheme"},
}

DEFAULTS = {
    "beta": 1.0, "shape": "exterior_ball", "rho": 1.0, "N": 2, "problem": "initial_boundary",
    "side": "half_line", "perturbation": "none", "epsilon": 0.0, "alpha": 1.0, "R": 0.5,
}


# ------------------------------------------------------------------ builders

def _model(par) -> DiffusionModel:
    has_p, has_m = par.get("p") is not None, par.get("m") is not None
    if has_p == has_m:
        raise ParameterError("give exactly one of p (p-Laplacian) or m (porous medium)")
    return DiffusionModel.plaplace(par["p"]) if has_p else DiffusionModel.porous_medium(par["m"])


def _domain(par) -> RadialDomain:
    try:
        shape = Shape(par.get("shape", DEFAULTS["shape"]))
    except ValueError:
        raise ParameterError(f"unknown shape {par.get('shape')!r}") from None
    N = par.get("N", DEFAULTS["N"])
    if shape is Shape.ANNULUS:
        if par.get("rho_in") is None or par.get("rho_out") is None:
            raise ParameterError("annulus needs rho_in and rho_out")
        return RadialDomain.annulus(par["rho_in"], par["rho_out"], N)
    rho = par.get("rho", DEFAULTS["rho"])
    return RadialDomain(shape, N, (rho,))


def _grid(par, base: GridSpec = GridSpec()) -> GridSpec:
    kw = base.to_dict()
    kw.update({k: par[k] for k in _GRID_KEYS if par.get(k) is not None})
    return GridSpec(**kw)


def _times(par, default):
    t = par.get("times")
    if t is None:
        return default
    if isinstance(t, dict):
        return tuple(np.geomspace(t["start"], t["stop"], int(t["num"])).tolist())
    return tuple(float(x) for x in t)


def _problem(par) -> ProblemKind:
    try:
        return ProblemKind(par.get("problem", DEFAULTS["problem"]))
    except ValueError:
        raise ParameterError(f"unknown problem {par.get('problem')!r}") from None


# ------------------------------------------------------------------ commands

def cmd_profile(par, out: Path, seed):
    model = _model(par)
    try:
        variant = ProfileVariant(Side(par.get("side", "half_line")), Perturbation(par.get("perturbation", "none")),
                                 par.get("epsilon", 0.0))
    except ValueError as exc:
        raise ParameterError(str(exc)) from None
    kw = {k: par[k] for k in ("xi_max", "n") if par.get(k) is not None}
    if par.get("eta") is not None:
        if model.is_plaplace:
            raise ParameterError("eta applies to porous-medium profiles only")
        kw["eta"] = par["eta"]
    prof = profile_for(model, variant, par.get("beta", DEFAULTS["beta"]), **kw)
    prof.to_csv(out / "profile.csv")
    write_json(out / "profile.json", prof.metadata())
    return {"lambda": prof.lam, "plateau": prof.plateau}


def cmd_blowup(par, out: Path, seed):
    model, dom = _model(par), _domain(par)
    grid = GridSpec(**{**DEFAULT_BLOWUP_GRID.to_dict(),
                       **{k: par[k] for k in ("n_space", "refinement_ratio") if par.get(k) is not None}})
    field = solve_blowup(model, dom, par.get("delta", 1e-4), grid, par.get("r_infinity"))
    write_csv(out / "blowup.csv", ("r", "value"), (field.r, field.values))
    rates = boundary_rate_report(field, model)
    write_csv(out / "rates.csv", ("boundary", "d", "ratio"),
              (np.concatenate([np.full(b.d.size, b.boundary_radius) for b in rates]),
               np.concatenate([b.d for b in rates]), np.concatenate([b.ratio for b in rates])))
    meta = {"model": model.to_dict(), "domain": dom.to_dict(), "delta": field.meta["delta"],
            "r_infinity": field.meta["r_infinity"], "residual": field.meta["residual"],
            "iterations": field.meta["iterations"], "monotone_rates": [b.monotone for b in rates]}
    write_json(out / "blowup.json", meta)
    return {"residual": field.meta["residual"]}


def cmd_simulate(par, out: Path, seed):
    model, dom = _model(par), _domain(par)
    spec = EvolutionSpec(model, dom, _problem(par), par.get("beta", DEFAULTS["beta"]),
                         _times(par, (1e-6, 1e-5, 1e-4, 1e-3)), _grid(par), par.get("scheme", "bdf2"))
    fields = simulate(spec)
    files = []
    for i, f in enumerate(fields):
        name = f"u_{i:03d}.csv"
        write_csv(out / name, ("r", "u"), (f.r, f.values))
        files.append({"file": name, "t": f.time, "residual": f.meta["residual"]})
    write_json(out / "run.json", {"spec": spec.to_dict(), "outputs": files})
    return {"max_residual": max(f["residual"] for f in files)}


def _touching(par) -> TouchingBallConfig:
    return TouchingBallConfig(_domain(par), par.get("R", DEFAULTS["R"]), par.get("touch"))


def cmd_geometry(par, out: Path, seed):
    cfg = _touching(par)
    s = par.get("s") or [float(x) * cfg.R for x in (1e-1, 1e-2, 1e-3, 1e-4)]
    table = lemma71_limit_check(cfg, s)
    pred = np.full(table.s.shape, np.inf if table.divergent else table.predicted)
    write_csv(out / "geometry.csv", ("s", "area", "scaled", "predicted"), (table.s, table.area, table.scaled, pred))
    n_mc = int(par.get("mc_samples", 0) or 0)
    meta = {"config": cfg.to_dict(), "predicted": table.predicted, "divergent": table.divergent, "seed": seed}
    if n_mc > 0:
        rng = np.random.default_rng(seed)
        mc_s = par.get("mc_s") or [1e-1 * cfg.R, 1e-2 * cfg.R]
        rows = [(x, level_area(cfg, x), *monte_carlo_level_area(cfg, x, n_mc, rng)) for x in mc_s]
        cols = list(zip(*rows))
        write_csv(out / "geometry_mc.csv", ("s", "area", "mc_estimate", "mc_stderr"), cols)
        meta["mc_samples"] = n_mc
    write_json(out / "geometry.json", meta)
    return {"predicted": None if table.divergent else table.predicted}


def cmd_constant(par, out: Path, seed):
    model = _model(par)
    N = par.get("N", DEFAULTS["N"])
    alpha = par.get("alpha", DEFAULTS["alpha"])
    if not alpha > model.alpha_threshold(N):
        raise ParameterError(f"alpha={alpha} must exceed the threshold {model.alpha_threshold(N)!r} for N={N}")
    prof = profile_for_problem(model, _problem(par), par.get("beta", DEFAULTS["beta"]))
    c, frac = c_integral(prof, alpha, N)
    res = {"model": model.to_dict(), "alpha": alpha, "N": N, "beta": prof.beta, "problem": _problem(par).value,
           "c": c, "tail_fraction": frac, "alpha_threshold": model.alpha_threshold(N)}
    write_json(out / "constant.json", res)
    return {"c": c}


def cmd_verify(par, out: Path, seed):
    model = _model(par)
    tc = TheoremConfig(model, par.get("alpha", DEFAULTS["alpha"]), _touching(par), par.get("beta", DEFAULTS["beta"]),
                       _problem(par), _times(par, TheoremConfig.__dataclass_fields__["times"].default),
                       _grid(par), par.get("scheme", "bdf2"))
    rep = verify_theorem(tc)
    d = rep.to_dict()
    d["diagnostics"].pop("wall_time_s", None)  # keep the report byte-stable; timing lives in the manifest
    write_json(out / "report.json", d)
    rep.to_csv(out / "report.csv")
    return {"relative_error": rep.relative_error, "divergent": rep.divergent}


COMMANDS = {
    "profile": cmd_profile, "blowup": cmd_blowup, "simulate": cmd_simulate,
    "geometry": cmd_geometry, "constant": cmd_constant, "verify": cmd_verify,
}


# ------------------------------------------------------------------- driver

def validate(command: str, par: dict) -> dict:
    unknown = set(par) - SCHEMAS[command]
    if unknown:
        raise ParameterError(f"unknown parameter(s) for {command}: {', '.join(sorted(unknown))}")
    if command != "geometry":
        _model(par)
    if command in ("blowup", "simulate", "geometry", "verify"):
        _domain(par)
    return par


def _run_job(command, par, out, seed):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary = COMMANDS[command](par, out, seed)
    return {"parameters": par, "summary": summary, "wall_time_s": time.perf_counter() - t0}


def _versions():
    import numba
    import scipy
    return {"fastdiff": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "backend": _accel.get_backend()}


def run(command: str, parameters: dict, out_dir, seed: int = 0, jobs: int = 1, sweep=None) -> int:
    """Execute one command (or a sweep of jobs) and write the manifest; returns the exit status."""
    out = Path(out_dir)
    t0 = time.perf_counter()
    try:
        jobs_par = [validate(command, {**parameters, **s}) for s in (sweep or [{}])]
        out.mkdir(parents=True, exist_ok=True)
        if len(jobs_par) == 1:
            results = [_run_job(command, jobs_par[0], out, seed)]
        else:
            dirs = [out / f"job_{i:03d}" for i in range(len(jobs_par))]
            if jobs > 1:
                with ProcessPoolExecutor(max_workers=jobs) as ex:
                    results = list(ex.map(_run_job, [command] * len(dirs), jobs_par, dirs, [seed] * len(dirs)))
            else:
                results = [_run_job(command, p, d, seed) for p, d in zip(jobs_par, dirs)]
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "command": command, "seed": seed, "jobs": jobs, "parameters": parameters, "sweep": sweep,
        "results": results, "versions": _versions(),
        "timings": {"total_wall_time_s": time.perf_counter() - t0},
        "files": [{"path": str(p.relative_to(out)), "sha256": sha256_file(p), "bytes": p.stat().st_size}
                  for p in files],
    }
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fastdiff", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON file with parameters (flags override it)")
    ap.add_argument("--out", type=Path, default=Path("fastdiff_out"), help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (default 0)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for a parameter sweep")
    for name in ("p", "m", "alpha", "beta", "R", "rho", "rho_in", "rho_out", "epsilon", "delta", "eta",
                 "xi_max", "r_infinity", "touch", "d_min", "truncation_radius", "regularization_sigma"):
        ap.add_argument(f"--{name}", type=float)
    for name in ("N", "n", "n_space", "n_time", "mc_samples"):
        ap.add_argument(f"--{name}", type=int)
    ap.add_argument("--shape", choices=[s.value for s in Shape])
    ap.add_argument("--problem", choices=[p.value for p in ProblemKind])
    ap.add_argument("--side", choices=[s.value for s in Side])
    ap.add_argument("--perturbation", choices=[p.value for p in Perturbation])
    ap.add_argument("--scheme", choices=["bdf2", "euler"])
    ap.add_argument("--times", type=float, nargs="+")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    par, sweep, seed = {}, None, 0
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_INVALID
        if cfg.pop("command", args.command) != args.command:
            print("error: config command does not match the command line", file=sys.stderr)
            return EXIT_INVALID
        sweep = cfg.pop("sweep", None)
        seed = cfg.pop("seed", 0)
        par.update(cfg)
    skip = {"command", "config", "out", "seed", "jobs"}
    par.update({k: v for k, v in vars(args).items() if k not in skip and v is not None})
    if args.seed is not None:
        seed = args.seed
    return run(args.command, par, args.out, seed, max(1, args.jobs), sweep)


if __name__ == "__main__":
    sys.exit(main())
