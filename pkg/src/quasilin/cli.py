"""Batch experiment driver.

Parses a TOML experiment file, dispatches to the pipelines and writes
reproducible artifacts: a deterministic results.json (timings and
timestamps go to metadata.json so reruns are byte-identical), field CSVs
with boundary rows, and two-column CSV curves for profiles and sweeps.

Exit codes: 0 success, 1 scientific failure, 2 config error, 3 unconverged.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import __version__
from .common import SampleSpec
from .functional import EnergyConfig
from .gamma import GammaModel, check_bounds_and_limit, check_convexity
from .grid import DomainSpec, Field, Grid, build_grid, field_from_csv, field_to_csv, \
    first_eigenpair, lambda1_closed_form, norms
from .oracle import OracleReport, brute_force_min, fd_gradient, semilinear_solve
from .reactions import Reaction, audit_linear_growth, audit_sublinear, \
    nonexistence_threshold, with_nu
from .solver import PipelineError, SolverConfig, global_minimize, minimize, \
    mu_continuation, plateau_field, two_solution_search
from .functional import gradient as assemble_gradient

EXIT_OK = 0
EXIT_SCIENTIFIC = 1
EXIT_CONFIG = 2
EXIT_UNCONVERGED = 3


class ConfigError(ValueError):
    def __init__(self, location: str, message: str):
        super().__init__(f"config [{location}]: {message}")
        self.location = location


@dataclass
class ExperimentConfig:
    raw: dict
    digest: str
    seed: int

    # -- block builders ---------------------------------------------------

    def domain(self) -> DomainSpec:
        blk = self._need("domain")
        dim = self._get(blk, "domain", "dim", int)
        extent = blk.get("extent", 1.0)
        n = self._get(blk, "domain", "n", None)
        if isinstance(extent, list):
            extent = tuple(float(v) for v in extent)
        if isinstance(n, list):
            n = tuple(int(v) for v in n)
        try:
            return DomainSpec(dim=dim, extent=extent, n=n)
        except (TypeError, ValueError) as exc:
            raise ConfigError("domain", str(exc))

    def gamma(self) -> GammaModel:
        blk = self._need("gamma")
        kind = self._get(blk, "gamma", "kind", str)
        try:
            if kind == "constant":
                return GammaModel.constant(blk.get("c", 1.0))
            if kind == "double_phase":
                return GammaModel.double_phase(blk.get("A", 1.0), blk.get("B", 1.0),
                                               blk.get("p", 1.5))
            if kind == "rational_decay":
                return GammaModel.rational_decay(blk.get("a", 1.0), blk.get("b", 1.0),
                                                 require_convex=blk.get("require_convex", True))
            if kind == "user_tabulated":
                return GammaModel.tabulated(np.asarray(blk["knots_t"], dtype=float),
                                            np.asarray(blk["knots_g"], dtype=float))
        except (KeyError, ValueError) as exc:
            raise ConfigError("gamma", str(exc))
        raise ConfigError("gamma", f"unknown kind {kind!r}")

    def gamma_sample(self) -> SampleSpec:
        blk = self.raw.get("gamma", {})
        return SampleSpec(t_max=float(blk.get("tmax", 1e8)),
                          n_samples=int(blk.get("samples", 10_000)))

    def reaction(self) -> Optional[Reaction]:
        blk = self.raw.get("reaction")
        if blk is None:
            return None
        kind = self._get(blk, "reaction", "kind", str)
        family = self._get(blk, "reaction", "family", str)
        params = {k: blk[k] for k in ("a", "alpha", "beta", "lam") if k in blk}
        try:
            if kind == "sublinear_g":
                return Reaction.sublinear(family, nu=blk.get("nu", 1.0), **params)
            if kind == "linear_growth_f":
                return Reaction.linear_growth(family, **params)
            if kind == "pure_linear":
                return Reaction.linear(blk.get("lam", 1.0))
        except ValueError as exc:
            raise ConfigError("reaction", str(exc))
        raise ConfigError("reaction", f"unknown kind {kind!r}")

    def h_field(self, grid: Grid, phi1: Optional[Field] = None) -> Optional[Field]:
        blk = self.raw.get("h")
        if blk is None:
            return None
        direction = self._get(blk, "h", "direction", str)
        amplitude = float(blk.get("amplitude", 1.0))
        if direction == "plateau":
            base = plateau_field(grid, blk.get("plateau_t0", 1.0),
                                 blk.get("plateau_margin", 0.2))
        elif direction == "phi1":
            if phi1 is None:
                phi1 = first_eigenpair(grid).phi1
            base = phi1
        elif direction == "file":
            path = blk.get("file")
            if path is None:
                raise ConfigError("h", "direction 'file' needs a 'file' path")
            base = field_from_csv(grid, path)
        else:
            raise ConfigError("h", f"unknown direction {direction!r}")
        vals = amplitude * base.values
        if np.any(vals < 0):
            raise ConfigError("h", "datum must be nonnegative")
        return Field(grid, vals)

    def solver(self) -> SolverConfig:
        blk = self.raw.get("solver", {})
        try:
            return SolverConfig(
                tol_residual=float(blk.get("tol_residual", 1e-8)),
                max_iters=int(blk.get("max_iters", 5000)),
                ball_radius=blk.get("ball_radius"),
                seed=int(blk.get("seed", self.seed)),
                n_starts=int(blk.get("n_starts", 8)))
        except (TypeError, ValueError) as exc:
            raise ConfigError("solver", str(exc))

    def run_block(self) -> dict:
        return self.raw.get("run", {})

    def validate(self) -> None:
        """Structurally validate every present block before any computation."""
        self.domain()
        self.gamma()
        self.gamma_sample()
        self.reaction()
        self.solver()
        blk = self.raw.get("h")
        if blk is not None:
            direction = self._get(blk, "h", "direction", str)
            if direction not in ("plateau", "phi1", "file"):
                raise ConfigError("h", f"unknown direction {direction!r}")
            if direction == "file" and not Path(str(blk.get("file", ""))).exists():
                raise ConfigError("h", "direction 'file' needs an existing 'file' path")
            float(blk.get("amplitude", 1.0))

    # -- helpers -----------------------------------------------------------

    def _need(self, name: str) -> dict:
        blk = self.raw.get(name)
        if blk is None:
            raise ConfigError(name, "missing block")
        return blk

    @staticmethod
    def _get(blk: dict, where: str, key: str, typ):
        if key not in blk:
            raise ConfigError(f"{where}.{key}", "missing key")
        val = blk[key]
        if typ is not None:
            try:
                return typ(val)
            except (TypeError, ValueError):
                raise ConfigError(f"{where}.{key}", f"cannot interpret {val!r}")
        return val


def load_config(path: str, seed_override: Optional[int] = None) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError("file", f"no config file at {path}")
    data = p.read_bytes()
    try:
        raw = tomli.loads(data.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("file", f"parse error: {exc}")
    seed = int(raw.get("run", {}).get("seed", 0)) if seed_override is None else seed_override
    return ExperimentConfig(raw=raw, digest=hashlib.sha256(data).hexdigest(), seed=seed)


# ---------------------------------------------------------------------------
# output plumbing


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_results(out: Path, scenario: str, cfg: ExperimentConfig, payload: dict,
                  t_start: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"scenario": scenario, "config_digest": cfg.digest, "seed": cfg.seed,
           "results": payload}
    (out / "results.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n")
    meta = {"written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "elapsed_s": time.time() - t_start,
            "package_version": __version__}
    (out / "metadata.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def write_curve(path: Path, xlabel: str, ylabel: str, xs, ys) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([xlabel, ylabel])
        for x, y in zip(xs, ys):
            w.writerow([repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg: ExperimentConfig, out: Path) -> int:
    t0 = time.time()
    gm = cfg.gamma()
    sample = cfg.gamma_sample()
    grid = build_grid(cfg.domain())
    reaction = cfg.reaction()

    reports = list(check_bounds_and_limit(gm, sample))
    required = {"bounds"}
    if reaction is not None and reaction.kind == "sublinear_g":
        reports.append(check_convexity(gm, sample, strict=False))
        required.add("q2-convexity")
        g_reports = audit_sublinear(reaction)
        reports.extend(g_reports)
        required.add("g1")
    elif reaction is not None:
        reports.append(check_convexity(gm, sample, strict=True))
        required |= {"q4-strict-convexity", "limit-at-infinity"}
        lam1 = lambda1_closed_form(grid)
        f_reports = audit_linear_growth(reaction, gm, lam1)
        reports.extend(f_reports)
        required |= {"f1", "f3", "f4"}
    else:
        reports.append(check_convexity(gm, sample, strict=False))
        required.add("q2-convexity")

    failing = sorted(r.hypothesis for r in reports
                     if r.hypothesis in required and not r.holds)
    payload = {"reports": [r.to_dict() for r in reports],
               "required": sorted(required), "failing": failing}
    write_results(out, "check", cfg, payload, t0)
    if failing:
        print(f"check: FAILED hypotheses: {', '.join(failing)}")
        return EXIT_SCIENTIFIC
    print(f"check: all required hypotheses hold on sample ({len(reports)} reports)")
    return EXIT_OK


def cmd_eig(cfg: ExperimentConfig, out: Path) -> int:
    t0 = time.time()
    grid = build_grid(cfg.domain())
    eig = first_eigenpair(grid)
    out.mkdir(parents=True, exist_ok=True)
    field_to_csv(eig.phi1, out / "phi1.csv")
    payload = {"lambda1": eig.lambda1, "lambda1_closed_form": lambda1_closed_form(grid),
               "phi1_l2": norms(eig.phi1).l2, "phi1_min": float(eig.phi1.values.min())}
    write_results(out, "eig", cfg, payload, t0)
    print(f"eig: lambda1 = {eig.lambda1:.12g}")
    return EXIT_OK


def _energy_config(cfg: ExperimentConfig, grid: Grid, phi1: Optional[Field] = None,
                   mu: float = 1.0) -> EnergyConfig:
    return EnergyConfig(grid=grid, gamma=cfg.gamma(), reaction=cfg.reaction(),
                        h_field=cfg.h_field(grid, phi1), mu=mu)


def cmd_solve_min(cfg: ExperimentConfig, out: Path) -> int:
    t0 = time.time()
    grid = build_grid(cfg.domain())
    eig = first_eigenpair(grid)
    ecfg = _energy_config(cfg, grid, eig.phi1)
    s = cfg.solver()
    if ecfg.reaction is not None and ecfg.reaction.kind == "sublinear_g":
        res = global_minimize(ecfg, s)
    else:
        res = minimize(ecfg, s, Field(grid, np.zeros(grid.n_dof)))
    out.mkdir(parents=True, exist_ok=True)
    field_to_csv(res.u, out / "u.csv")
    write_results(out, "solve-min", cfg, {"solution": res.to_dict()}, t0)
    print(f"solve-min: E={res.energy:.8g} residual={res.residual:.3g} "
          f"[{res.classification}]")
    return EXIT_OK if res.converged else EXIT_UNCONVERGED


def _run_two_solutions(cfg: ExperimentConfig, out: Path, saddle_only: bool) -> int:
    t0 = time.time()
    grid = build_grid(cfg.domain())
    eig = first_eigenpair(grid)
    ecfg = _energy_config(cfg, grid, eig.phi1)
    s = cfg.solver()
    T_max = float(cfg.run_block().get("T_max", 1e3))
    out.mkdir(parents=True, exist_ok=True)
    try:
        two = two_solution_search(ecfg, s, eig, T_max=T_max)
    except PipelineError as exc:
        write_results(out, "two-solutions", cfg,
                      {"error": str(exc), "stage": exc.stage, "detail": exc.detail}, t0)
        print(f"pipeline failed at stage {exc.stage}: {exc}")
        return EXIT_SCIENTIFIC
    write_curve(out / "endpoint_profile.csv", "t", "energy",
                two.endpoint.profile_t, two.endpoint.profile_E)
    field_to_csv(two.u_mp.u, out / "u_mp.csv")
    payload = two.to_dict()
    if not saddle_only:
        field_to_csv(two.u_min.u, out / "u_min.csv")
    write_results(out, "solve-mp" if saddle_only else "two-solutions", cfg, payload, t0)
    print(f"two-solutions: E(u_min)={two.u_min.energy:.8g} "
          f"E(u_mp)={two.u_mp.energy:.8g} mp_gap={two.mountain.mp_gap:.4g}")
    converged = two.u_min.converged and two.u_mp.converged
    return EXIT_OK if converged else EXIT_UNCONVERGED


def cmd_solve_mp(cfg: ExperimentConfig, out: Path) -> int:
    return _run_two_solutions(cfg, out, saddle_only=True)


def cmd_two_solutions(cfg: ExperimentConfig, out: Path) -> int:
    return _run_two_solutions(cfg, out, saddle_only=False)


def _nu_point(args) -> dict:
    raw, seed, nu = args
    cfg = ExperimentConfig(raw=raw, digest="", seed=seed)
    grid = build_grid(cfg.domain())
    ecfg = _energy_config(cfg, grid)
    ecfg = EnergyConfig(grid=grid, gamma=ecfg.gamma,
                        reaction=with_nu(ecfg.reaction, nu), h_field=ecfg.h_field)
    try:
        res = global_minimize(ecfg, cfg.solver())
        return {"param": nu, "best_energy": res.energy, "l2": norms(res.u).l2,
                "residual": res.residual, "classification": res.classification,
                "ok": bool(res.converged)}
    except (ValueError, PipelineError) as exc:
        return {"param": nu, "error": str(exc), "ok": False}


def cmd_sweep(cfg: ExperimentConfig, out: Path, workers: int = 1) -> int:
    t0 = time.time()
    run = cfg.run_block()
    grids = [k for k in ("nu_grid", "mu_grid", "h_grid") if k in run]
    if len(grids) != 1:
        raise ConfigError("run", "sweep needs exactly one of nu_grid, mu_grid, h_grid")
    name = grids[0]
    values = [float(v) for v in run[name]]
    if len(values) == 0 or np.any(np.diff(values) <= 0):
        raise ConfigError(f"run.{name}", "grid must be nonempty and strictly increasing")

    rows = []
    if name == "nu_grid":
        react = cfg.reaction()
        if react is None or react.kind != "sublinear_g":
            raise ConfigError("reaction", "a nu sweep needs a sublinear reaction block")
        jobs = [(cfg.raw, cfg.seed, nu) for nu in values]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_nu_point, jobs))
        else:
            rows = [_nu_point(j) for j in jobs]
    elif name == "mu_grid":
        if cfg.reaction() is None:
            raise ConfigError("reaction", "a mu sweep needs a reaction block")
        grid = build_grid(cfg.domain())
        eig = first_eigenpair(grid)
        ecfg = _energy_config(cfg, grid, eig.phi1)
        entries = mu_continuation(ecfg, cfg.solver(), values, eig=eig,
                                  T_max=float(run.get("T_max", 1e3)))
        for e in entries:
            if e.result is None:
                rows.append({"param": e.mu, "error": e.error, "ok": False})
            else:
                rows.append({"param": e.mu, "best_energy": e.result.level_c,
                             "l2": norms(e.result.saddle.u).l2,
                             "residual": e.result.saddle.residual,
                             "classification": e.result.saddle.classification,
                             "ok": bool(e.result.converged)})
    else:
        grid = build_grid(cfg.domain())
        eig = first_eigenpair(grid)
        base = cfg.h_field(grid, eig.phi1)
        if base is None:
            raise ConfigError("h", "h_grid sweep needs an h block direction")
        s = cfg.solver()
        for amp in values:
            ecfg = EnergyConfig(grid=grid, gamma=cfg.gamma(), reaction=cfg.reaction(),
                                h_field=Field(grid, amp * base.values))
            res = minimize(ecfg, s, Field(grid, np.zeros(grid.n_dof)))
            rows.append({"param": amp, "best_energy": res.energy,
                         "l2": norms(res.u).l2, "residual": res.residual,
                         "classification": res.classification, "ok": bool(res.converged)})

    out.mkdir(parents=True, exist_ok=True)
    cols = ["param", "best_energy", "l2", "residual", "classification", "ok", "error"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({c: row.get(c, "") for c in cols})
    if name == "mu_grid":
        done = [r for r in rows if r.get("ok")]
        write_curve(out / "mu_curve.csv", "mu", "c_mu",
                    [r["param"] for r in done], [r["best_energy"] for r in done])
    write_results(out, "sweep", cfg, {"grid": name, "rows": rows}, t0)
    n_ok = sum(1 for row in rows if row.get("ok"))
    print(f"sweep: {n_ok}/{len(rows)} points completed")
    return EXIT_OK if n_ok >= 0.9 * len(rows) else EXIT_SCIENTIFIC


def cmd_threshold(cfg: ExperimentConfig, out: Path) -> int:
    t0 = time.time()
    reaction = cfg.reaction()
    if reaction is None:
        raise ConfigError("reaction", "threshold needs a sublinear reaction block")
    try:
        nu0 = nonexistence_threshold(reaction, cfg.gamma())
    except ValueError as exc:
        raise ConfigError("reaction", str(exc))
    write_results(out, "threshold", cfg, {"nu0": nu0, "C_lin": reaction.C_lin}, t0)
    print(f"nu0 = {nu0:.12g}")
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig, out: Path) -> int:
    """Cross-validate the independent oracles against the solver surfaces."""
    t0 = time.time()
    grid = build_grid(cfg.domain())
    eig = first_eigenpair(grid)
    reports = []

    lam = 0.5 * (1.0 + eig.lambda1)
    oracle_u = semilinear_solve(grid, lam, eig.phi1)
    ecfg_lin = EnergyConfig(grid=grid, gamma=GammaModel.constant(1.0),
                            reaction=Reaction.linear(lam), h_field=eig.phi1)
    solver_u = minimize(ecfg_lin, replace(cfg.solver(), tol_residual=1e-11, ball_radius=None),
                        Field(grid, np.zeros(grid.n_dof)))
    reports.append(OracleReport.compare("semilinear-eigen-expansion",
                                        oracle_u.values, solver_u.u.values))

    ecfg = _energy_config(cfg, grid, eig.phi1)
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(3):
        u = Field(grid, rng.uniform(0.2, 1.0, grid.n_dof)
                  * rng.choice([-1.0, 1.0], grid.n_dof))
        fd = fd_gradient(ecfg, u, 1e-5)
        an = assemble_gradient(ecfg, u)
        worst = max(worst, float(np.max(np.abs(fd - an)) / (1.0 + np.max(np.abs(an)))))
    reports.append(OracleReport.compare("fd-gradient-max-rel-err", 0.0, worst))

    # coercive scenario: exhaustive sweep must agree with multistart descent
    tiny = build_grid(DomainSpec(1, 1.0, 3))
    ecfg_tiny = EnergyConfig(grid=tiny, gamma=cfg.gamma(),
                             reaction=Reaction.sublinear("log1p", nu=50.0))
    bf = brute_force_min(ecfg_tiny, box=25.0, steps=101)
    gm_res = global_minimize(ecfg_tiny, cfg.solver())
    reports.append(OracleReport.compare("brute-force-energy", bf.energy, gm_res.energy))

    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle").mkdir(exist_ok=True)
    for rep in reports:
        (out / "oracle" / f"{rep.quantity}.json").write_text(
            json.dumps(rep.to_dict(), sort_keys=True, indent=2) + "\n")
    write_results(out, "oracle", cfg, {"reports": [r.to_dict() for r in reports]}, t0)

    ok = (reports[0].abs_err <= 1e-8 and reports[1].candidate_value <= 1e-6
          and abs(reports[2].abs_err) <= max(10.0 * bf.cell_diameter, 1e-6))
    print("oracle: " + ("agreement" if ok else "MISMATCH"))
    return EXIT_OK if ok else EXIT_SCIENTIFIC


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quasilin",
        description="Quasilinear elliptic energy experiments: audits, solves, sweeps.")
    parser.add_argument("command",
                        choices=["check", "eig", "solve-min", "solve-mp",
                                 "two-solutions", "sweep", "threshold", "oracle"])
    parser.add_argument("--config", required=True, help="TOML experiment file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override run seed")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for sweep points")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed)
        cfg.validate()
        out = Path(args.out if args.out is not None
                   else cfg.run_block().get("out", "results"))
        if args.command == "check":
            return cmd_check(cfg, out)
        if args.command == "eig":
            return cmd_eig(cfg, out)
        if args.command == "solve-min":
            return cmd_solve_min(cfg, out)
        if args.command == "solve-mp":
            return cmd_solve_mp(cfg, out)
        if args.command == "two-solutions":
            return cmd_two_solutions(cfg, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, workers=args.workers)
        if args.command == "threshold":
            return cmd_threshold(cfg, out)
        if args.command == "oracle":
            return cmd_oracle(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCIENTIFIC
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
