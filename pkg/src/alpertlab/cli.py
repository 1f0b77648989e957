"""Batch experiment runner: JSON config in, deterministic CSV reports out.

Config schema (JSON):

{
  "seed": 12345,
  "experiments": [
    {"kind": "basis_checks", "n": 1, "depth": 5, "kappas": [1, 2]},
    {"kind": "norm_equivalence", "n": 1, "depth": 5, "measure": {"kind": "power", "exponents": [1.0]},
     "s_values": [0.1, -0.1], "count": 40, "shift": 3, "continuous": true},
    {"kind": "goodbad", "eps_values": [0.25, 0.5], "r_values": [2,3,4,5,6], "depth_gap": 8, "trials": 2000},
    {"kind": "constants", "n": 1, "depth": 5,
     "sigma": {"kind": "lebesgue"}, "omega": {"kind": "power", "exponents": [1.0]},
     "alpha": 0.5, "family": "fractional_integral", "s": 0.1, "kappa": 1},
    {"kind": "t1", "n": 1, "depth": 5, "pairs": [[{"kind":"lebesgue"}, {"kind":"power","exponents":[1.0]}]],
     "kernels": [{"alpha": 0.0, "family": "riesz"}], "s_values": [0.0, 0.1]},
    {"kind": "corona", "n": 1, "depth": 5, "sigma": {"kind": "power", "exponents": [1.0]},
     "omega": {"kind": "lebesgue"}, "kappa": 2, "alpha": 0.0, "eps": 0.25, "tau": 2},
    {"kind": "energy", "n": 1, "depth": 5, "measure": {"kind": "lebesgue"},
     "kappa": 1, "s": 0.1, "trials": 50}
  ]
}

Measure specs: {"kind": "lebesgue"} | {"kind": "power", "exponents": [a, ...]} |
{"kind": "cascade", "seed": int} | {"kind": "table", "source": path}.
One CSV per experiment kind; a run manifest records seed, parameters and
status. Identical config and seed give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .checks import basis_quality, doubling_suite, parseval_error
from .corona import build_corona, carleson_constant, quasiorthogonality_ratio, shifted_corona_assign
from .energy import energy_pivotal_ratio, modulus_wavelet_ratio, monotonicity_terms
from .goodbad import bad_probability_mc, bad_probability_slope
from .grid import make_grid
from .leaffunc import LeafFunction
from .measure import make_measure
from .operator import (
    KernelSpec,
    assemble_sobolev_matrix,
    default_kernel,
    operator_norm,
    testing_constant,
    wbp_constant,
)
from .poisson import PivotalParams, muckenhoupt_a2, pivotal_constant
from .sobolev import (
    equivalence_ratio,
    make_ensemble,
    make_wavelet_ensemble,
    norm_continuous,
    norm_difference,
    norm_dyadic,
)
from .t1 import run_t1_experiment
from .wavelet import get_system

ENV_PREFIX = "ALPERTLAB_"

_KINDS = ("basis_checks", "norm_equivalence", "goodbad", "constants", "t1", "corona", "energy")

_MEASURE_KINDS = ("lebesgue", "power", "cascade", "table")
_KERNEL_FAMILIES = ("fractional_integral", "riesz")


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _validate_measure(spec, where: str):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where}: measure spec must be an object with a 'kind' field")
    if spec["kind"] not in _MEASURE_KINDS:
        raise ConfigError(f"{where}.kind: unknown measure kind {spec['kind']!r}")
    if spec["kind"] == "power" and "exponents" not in spec:
        raise ConfigError(f"{where}.exponents: power measures need exponents")
    if spec["kind"] == "cascade" and "seed" not in spec:
        raise ConfigError(f"{where}.seed: cascade measures need a seed")
    if spec["kind"] == "table" and "source" not in spec:
        raise ConfigError(f"{where}.source: table measures need a source path")


def _validate_kernel(spec, where: str):
    fam = spec.get("family", "fractional_integral")
    if fam not in _KERNEL_FAMILIES:
        raise ConfigError(f"{where}.family: unknown kernel family {fam!r}")
    if "alpha" not in spec:
        raise ConfigError(f"{where}.alpha: kernels need alpha")


def validate_config(cfg: dict) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    exps = cfg.get("experiments", [])
    if not isinstance(exps, list):
        raise ConfigError("experiments: must be a list")
    for i, exp in enumerate(exps):
        where = f"experiments[{i}]"
        if not isinstance(exp, dict) or "kind" not in exp:
            raise ConfigError(f"{where}: each experiment needs a 'kind'")
        kind = exp["kind"]
        if kind not in _KINDS:
            raise ConfigError(f"{where}.kind: unknown experiment kind {kind!r}")
        for key in ("sigma", "omega", "measure"):
            if key in exp:
                _validate_measure(exp[key], f"{where}.{key}")
        if "pairs" in exp:
            for j, pair in enumerate(exp["pairs"]):
                _validate_measure(pair[0], f"{where}.pairs[{j}][0]")
                _validate_measure(pair[1], f"{where}.pairs[{j}][1]")
        if "kernels" in exp:
            for j, k in enumerate(exp["kernels"]):
                _validate_kernel(k, f"{where}.kernels[{j}]")
        if "family" in exp and exp["family"] not in _KERNEL_FAMILIES:
            raise ConfigError(f"{where}.family: unknown kernel family {exp['family']!r}")


def _measure_from(spec: dict, grid):
    kw = {k: v for k, v in spec.items() if k != "kind"}
    if "exponents" in kw:
        kw["exponents"] = tuple(kw["exponents"])
    return make_measure(spec["kind"], grid, **kw)


def _kernel_from(spec: dict, grid, kappa: int) -> KernelSpec:
    base = default_kernel(
        grid, spec["alpha"], spec.get("family", "fractional_integral"),
        spec.get("component", 0), kappa,
    )
    from dataclasses import replace

    over = {k: spec[k] for k in ("delta", "big_r", "bump_order") if k in spec}
    return replace(base, **over) if over else base


# ------------------------------------------------------------------ experiment runners


def _run_basis_checks(exp: dict, seed: int, depth_cap: int | None):
    n = exp.get("n", 1)
    depth = min(exp.get("depth", 5), depth_cap or 99)
    grid = make_grid(n, depth)
    rng = np.random.default_rng(seed)
    rows = []
    measures = (
        [_measure_from(m, grid) for m in exp["measures"]]
        if "measures" in exp
        else doubling_suite(grid)
    )
    for kappa in exp.get("kappas", [1, 2]):
        for mu in measures:
            q = basis_quality(mu, kappa, rng)
            q["parseval_err"] = parseval_error(mu, kappa, rng)
            rows.append({"n": n, "depth": depth, "kappa": kappa, "measure": mu.name, **q})
    return rows


def _run_norm_equivalence(exp: dict, seed: int, depth_cap: int | None):
    n = exp.get("n", 1)
    depth = min(exp.get("depth", 5), depth_cap or 99)
    grid = make_grid(n, depth)
    mu = _measure_from(exp.get("measure", {"kind": "lebesgue"}), grid)
    rng = np.random.default_rng(seed)
    count = exp.get("count", 40)
    ensemble = make_ensemble(mu, 2, count, rng)
    rows = []
    for s in exp.get("s_values", [0.1, -0.1]):
        sys1, sys2 = get_system(mu, 1), get_system(mu, 2)
        rep = equivalence_ratio(
            lambda f: norm_dyadic(sys1.analyze(f), s),
            lambda f: norm_dyadic(sys2.analyze(f), s),
            ensemble,
            names=("kappa1", "kappa2"),
        )
        rows.append({"s": s, "comparison": "kappa1_vs_kappa2",
                     "ratio_min": rep.ratio_min, "ratio_max": rep.ratio_max, "skipped": rep.skipped})
        shift = exp.get("shift", max(1, grid.n_leaves // 8))
        gshift = make_grid(n, depth, (shift,) * n)
        sys_sh = get_system(mu, 1, gshift)
        rep = equivalence_ratio(
            lambda f: norm_dyadic(sys1.analyze(f), s),
            lambda f: norm_dyadic(sys_sh.analyze(f), s),
            ensemble,
            names=("standard", "shifted"),
        )
        rows.append({"s": s, "comparison": "standard_vs_shifted",
                     "ratio_min": rep.ratio_min, "ratio_max": rep.ratio_max, "skipped": rep.skipped})
        if s > 0 and exp.get("continuous", True):
            rep = equivalence_ratio(
                lambda f: norm_continuous(mu, f, s),
                lambda f: norm_difference(mu, f, s, 1),
                ensemble[: min(count, 20)],
                names=("continuous", "difference"),
            )
            rows.append({"s": s, "comparison": "continuous_vs_difference",
                         "ratio_min": rep.ratio_min, "ratio_max": rep.ratio_max, "skipped": rep.skipped})
    return rows


def _run_goodbad(exp: dict, seed: int, depth_cap: int | None):
    rows = []
    r_values = exp.get("r_values", [2, 3, 4, 5, 6, 7, 8])
    for eps in exp.get("eps_values", [0.25, 0.5]):
        est = bad_probability_mc(
            r_values, eps, exp.get("depth_gap", 8), exp.get("trials", 10000), seed,
            n=exp.get("n", 1),
        )
        for r, p in est.items():
            rows.append({"eps": eps, "r": r, "p_bad": p, "slope": ""})
        try:
            slope = bad_probability_slope(est)
        except ValueError:
            slope = float("nan")
        rows.append({"eps": eps, "r": "fit", "p_bad": "", "slope": slope})
    return rows


def _run_constants(exp: dict, seed: int, depth_cap: int | None):
    n = exp.get("n", 1)
    depth = min(exp.get("depth", 5), depth_cap or 99)
    grid = make_grid(n, depth)
    sigma = _measure_from(exp["sigma"], grid)
    omega = _measure_from(exp["omega"], grid)
    kappa = exp.get("kappa", 1)
    s = exp.get("s", 0.0)
    spec = _kernel_from(exp, grid, kappa)
    rows = []
    a2 = muckenhoupt_a2(sigma, omega, spec.alpha)
    rows.append({"constant": "A2", "value": a2.value, "witness": str(a2.witness)})
    piv = pivotal_constant(sigma, omega, PivotalParams(spec.alpha, kappa, exp.get("eps", 0.25)))
    rows.append({"constant": "pivotal_lb_sq", "value": piv.value, "witness": str(piv.witness)})
    opmat = assemble_sobolev_matrix(spec, sigma, omega, s, kappa)
    nrep = operator_norm(opmat)
    rows.append({"constant": "operator_norm", "value": nrep.value,
                 "witness": f"iterations={nrep.witness.get('iterations')}"})
    for mode in ("cube", "triple"):
        t = testing_constant(spec, sigma, omega, s, kappa, mode=mode)
        rows.append({"constant": f"testing_{mode}", "value": t.value, "witness": str(t.witness)})
    td = testing_constant(spec, sigma, omega, s, kappa, dual=True)
    rows.append({"constant": "testing_cube_dual", "value": td.value, "witness": str(td.witness)})
    w = wbp_constant(spec, sigma, omega, s, kappa)
    rows.append({"constant": "wbp", "value": w.value, "witness": str(w.witness)})
    return rows


def _run_t1(exp: dict, seed: int, depth_cap: int | None):
    n = exp.get("n", 1)
    depth = min(exp.get("depth", 5), depth_cap or 99)
    grid = make_grid(n, depth)
    rows = []
    kappa = exp.get("kappa", 1)
    for pair in exp["pairs"]:
        sigma = _measure_from(pair[0], grid)
        omega = _measure_from(pair[1], grid)
        for kern in exp["kernels"]:
            spec = _kernel_from(kern, grid, kappa)
            for s in exp.get("s_values", [0.0]):
                rep = run_t1_experiment(sigma, omega, spec, s, kappa)
                rows.append({
                    "sigma": sigma.name, "omega": omega.name,
                    "family": spec.family, "alpha": spec.alpha, "s": s,
                    "N": rep.n_value, "T_fwd": rep.t_fwd, "T_dual": rep.t_dual,
                    "T_fwd_quot": rep.t_fwd_quot, "T_dual_quot": rep.t_dual_quot,
                    "sqrtA2": rep.sqrt_a2, "ratio_lower": rep.ratio_lower,
                    "ratio_upper": rep.ratio_upper, "a2_over_norm": rep.a2_over_norm,
                })
    return rows


def _run_corona(exp: dict, seed: int, depth_cap: int | None):
    n = exp.get("n", 1)
    depth = min(exp.get("depth", 5), depth_cap or 99)
    grid = make_grid(n, depth)
    sigma = _measure_from(exp["sigma"], grid)
    omega = _measure_from(exp["omega"], grid)
    kappa = exp.get("kappa", 2)
    alpha = exp.get("alpha", 0.0)
    eps = exp.get("eps", 0.25)
    tau = exp.get("tau", 2)
    gamma = exp.get("gamma")
    if gamma is None:
        from .poisson import poisson_integral

        restricted = sigma.masked_leaf_masses(grid.root)
        single = max(
            poisson_integral(q, sigma, kappa, alpha, masses=restricted) ** 2
            * omega.cube_mass(q) / sigma.cube_mass(q)
            for d in range(1, depth) for q in grid.cubes_at_depth(d)
            if sigma.cube_mass(q) > 0
        )
        gamma = exp.get("gamma_factor", 0.25) * single
    forest = build_corona(grid.root, sigma, omega, gamma, kappa, alpha)
    car = carleson_constant(forest, sigma, eps)
    shifted = shifted_corona_assign(forest, tau)
    rng = np.random.default_rng(seed)
    ensemble = make_wavelet_ensemble(sigma, kappa, exp.get("count", 20), rng)
    quasi = quasiorthogonality_ratio(forest, ensemble, eps / 4, kappa, sigma)
    return [{
        "gamma": gamma, "n_stopping": len(forest.stopping_cubes()),
        "generations": len(forest.generations), "carleson": car.value,
        "max_overlap": shifted.max_overlap(), "tau": tau,
        "quasiorthogonality": quasi, "eps": eps,
    }]


def _run_energy(exp: dict, seed: int, depth_cap: int | None):
    n = exp.get("n", 1)
    depth = min(exp.get("depth", 5), depth_cap or 99)
    grid = make_grid(n, depth)
    omega = _measure_from(exp.get("measure", {"kind": "lebesgue"}), grid)
    kappa = exp.get("kappa", 1)
    s = exp.get("s", 0.1)
    spec = _kernel_from(exp if "alpha" in exp else {"alpha": 0.5}, grid, kappa)
    rng = np.random.default_rng(seed)
    trials = exp.get("trials", 30)
    j = grid.cube(grid.max_depth - 2, (1,) * n)
    rows = []
    ratios = []
    for _ in range(trials):
        masses = np.zeros((grid.n_leaves,) * n)
        flat = masses.reshape(-1)
        far = np.flatnonzero(_far_mask(grid, j, 2.0))
        picks = rng.choice(far, size=min(3, len(far)), replace=False)
        flat[picks] = rng.uniform(0.5, 2.0, size=len(picks))
        terms = monotonicity_terms(j, masses, omega, kappa, s, 0.5, spec)
        ratios.append(terms.ratio)
    rows.append({"quantity": "monotonicity_max_ratio", "value": float(np.nanmax(ratios)),
                 "gamma": "", "s": s, "kappa": kappa})
    system = get_system(omega, kappa)
    basis = system.basis(j)
    psi = basis.combine(grid, np.ones(basis.dim) / np.sqrt(basis.dim))
    for gamma in exp.get("gammas", [2.0, 4.0, 8.0]):
        vals = []
        far = np.flatnonzero(_far_mask(grid, j, 8.0))
        for idx in far[: exp.get("far_cells", 10)]:
            masses = np.zeros((grid.n_leaves,) * n)
            masses.reshape(-1)[idx] = 1.0
            vals.append(energy_pivotal_ratio(j, masses, psi, kappa, s, spec, omega, gamma=gamma))
        rows.append({"quantity": "energy_ratio", "value": float(np.max(vals)) if vals else float("nan"),
                     "gamma": gamma, "s": s, "kappa": kappa})
    mod = modulus_wavelet_ratio(omega, j, kappa, s)
    rows.append({"quantity": "modulus_wavelet_ratio", "value": mod, "gamma": "", "s": s, "kappa": kappa})
    return rows


def _far_mask(grid, j, factor: float) -> np.ndarray:
    from .poisson import _leaf_centers

    pts = _leaf_centers(grid)
    c = np.asarray(j.center())
    half = factor * j.side / 2.0
    outside = np.zeros(pts.shape[0], dtype=bool)
    for ax in range(grid.dimension):
        outside |= np.abs(pts[:, ax] - c[ax]) > half
    return outside


_RUNNERS = {
    "basis_checks": _run_basis_checks,
    "norm_equivalence": _run_norm_equivalence,
    "goodbad": _run_goodbad,
    "constants": _run_constants,
    "t1": _run_t1,
    "corona": _run_corona,
    "energy": _run_energy,
}

_CSV_NAMES = {
    "basis_checks": "basis_checks.csv",
    "norm_equivalence": "norm_equivalence.csv",
    "goodbad": "goodbad.csv",
    "constants": "constants.csv",
    "t1": "t1.csv",
    "corona": "corona.csv",
    "energy": "energy.csv",
}


def _execute(args):
    index, exp, seed, depth_cap = args
    kind = exp["kind"]
    try:
        rows = _RUNNERS[kind](exp, seed, depth_cap)
        return index, kind, rows, None
    except (MemoryError, ValueError, np.linalg.LinAlgError) as e:
        return index, kind, [], f"{type(e).__name__}: {e}"


def run(
    config_path: str | Path,
    out_dir: str | Path,
    seed: int | None = None,
    jobs: int = 1,
    depth_cap: int | None = None,
) -> int:
    """Run every experiment in the config; returns a process exit status."""
    config_path = Path(config_path)
    out = Path(out_dir)
    try:
        cfg = json.loads(config_path.read_text())
    except FileNotFoundError:
        print(f"error: config file {config_path} does not exist", file=sys.stderr)
        return 2
    except json.JSONDecodeError as e:
        print(f"error: {config_path}:{e.lineno}:{e.colno}: {e.msg}", file=sys.stderr)
        return 2
    try:
        validate_config(cfg)
    except ConfigError as e:
        print(f"error: {config_path}: {e}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    master_seed = seed if seed is not None else cfg.get("seed", 0)
    exps = cfg.get("experiments", [])
    child_seeds = [
        int(ss.generate_state(1)[0])
        for ss in np.random.SeedSequence(master_seed).spawn(max(len(exps), 1))
    ]
    tasks = [(i, exp, child_seeds[i], depth_cap) for i, exp in enumerate(exps)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    by_kind: dict[str, list[dict]] = {}
    statuses = []
    for index, kind, rows, error in results:
        statuses.append({
            "index": index, "kind": kind, "seed": child_seeds[index],
            "status": "ok" if error is None else "failed",
            **({"error": error} if error else {}),
        })
        if error is None:
            for r in rows:
                by_kind.setdefault(kind, []).append(r)
        else:
            print(f"experiment {index} ({kind}) failed: {error}", file=sys.stderr)

    for kind, rows in by_kind.items():
        path = out / _CSV_NAMES[kind]
        cols = list(rows[0].keys())
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for r in rows:
                writer.writerow([_fmt(r.get(c, "")) for c in cols])

    manifest = {
        "version": __version__,
        "seed": master_seed,
        "jobs": jobs,
        "depth_cap": depth_cap,
        "config": cfg,
        "experiments": statuses,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="alpertlab", description="Batch runner for the wavelet laboratory."
    )
    parser.add_argument("--config", default=os.environ.get(ENV_PREFIX + "CONFIG"))
    parser.add_argument("--out", default=os.environ.get(ENV_PREFIX + "OUT", "out"))
    parser.add_argument(
        "--seed", type=int,
        default=int(os.environ[ENV_PREFIX + "SEED"]) if ENV_PREFIX + "SEED" in os.environ else None,
    )
    parser.add_argument("--jobs", type=int, default=int(os.environ.get(ENV_PREFIX + "JOBS", "1")))
    parser.add_argument(
        "--depth-cap", type=int,
        default=int(os.environ[ENV_PREFIX + "DEPTH_CAP"]) if ENV_PREFIX + "DEPTH_CAP" in os.environ else None,
    )
    args = parser.parse_args(argv)
    if not args.config:
        parser.error("--config is required (or set " + ENV_PREFIX + "CONFIG)")
    return run(args.config, args.out, seed=args.seed, jobs=args.jobs, depth_cap=args.depth_cap)


if __name__ == "__main__":
    sys.exit(main())
