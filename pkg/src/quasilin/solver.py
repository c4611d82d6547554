"""Solution pipelines: descent minimization, mountain pass, continuation, scans.

The descent direction is the Sobolev gradient (the (K+M)-lift of the
assembled gradient) with Armijo backtracking, so stopping rules and rates
are mesh-independent.  The saddle search deforms an elastic path between
the two low points: descend at the path's energy argmax, re-parametrize to
equal arclength, repeat until the argmax residual meets the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .functional import EnergyConfig, dual_solve, energy_value, energy_value_batch, gradient
from .grid import EigenPair, Field, Grid, first_eigenpair, negative_part, norms
from .reactions import audit_linear_growth, audit_sublinear, g2_witness, \
    nonexistence_threshold, with_nu

TRIVIAL_RTOL = 1e-8


class PipelineError(RuntimeError):
    """Failure of a named stage of a multi-stage pipeline."""

    def __init__(self, stage: str, message: str, detail: Optional[dict] = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.detail = detail or {}


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-8
    max_iters: int = 5000
    armijo_c1: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_max_backtracks: int = 50
    ball_radius: Optional[float] = None
    seed: int = 0
    n_starts: int = 8

    def __post_init__(self):
        if self.tol_residual <= 0 or self.max_iters <= 0:
            raise ValueError("tolerances and iteration caps must be positive")


@dataclass
class SolveResult:
    u: Field
    energy: float
    residual: float
    iters: int
    classification: str          # trivial | nontrivial
    nonneg_violation: float      # |u_-|_2
    converged: bool
    status: str = "ok"
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"energy": self.energy, "residual": self.residual,
                "iters": self.iters, "classification": self.classification,
                "nonneg_violation": self.nonneg_violation,
                "converged": self.converged, "status": self.status}


@dataclass
class MountainPassResult:
    path: list                    # Fields sigma(t_k)
    level_c: float
    saddle: SolveResult
    endpoints: tuple              # (E(sigma(0)), E(sigma(1)))
    mp_gap: float
    converged: bool
    iters: int
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"level_c": self.level_c, "endpoints": list(self.endpoints),
                "mp_gap": self.mp_gap, "converged": self.converged,
                "iters": self.iters, "status": self.status,
                "saddle": self.saddle.to_dict()}


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def _k_norm(grid: Grid, v: np.ndarray) -> float:
    return float(np.sqrt(max(v @ (grid.K @ v), 0.0)))


def _m_norm(grid: Grid, v: np.ndarray) -> float:
    return float(np.sqrt(max(v @ (grid.M @ v), 0.0)))


def _h_l2(cfg: EnergyConfig) -> float:
    h = cfg.h_values()
    return 0.0 if h is None else _m_norm(cfg.grid, h)


def classify(cfg: EnergyConfig, v: np.ndarray) -> str:
    return "trivial" if _m_norm(cfg.grid, v) <= TRIVIAL_RTOL * (1.0 + _h_l2(cfg)) \
        else "nontrivial"


def _project_ball(grid: Grid, v: np.ndarray, r: float) -> np.ndarray:
    nrm = _k_norm(grid, v)
    if nrm > r:
        return v * (r / nrm)
    return v


def _make_result(cfg: EnergyConfig, v: np.ndarray, e: float, res: float,
                 iters: int, converged: bool, status: str) -> SolveResult:
    u = Field(cfg.grid, v)
    return SolveResult(u=u, energy=e, residual=res, iters=iters,
                       classification=classify(cfg, v),
                       nonneg_violation=norms(negative_part(u)).l2,
                       converged=converged, status=status)


def minimize(cfg: EnergyConfig, s: SolverConfig, u0,
             trace: Optional[list] = None) -> SolveResult:
    """Preconditioned Armijo descent, optionally projected onto a K-norm ball.

    Accepted steps decrease the energy (up to a roundoff allowance).
    Non-convergence is reported in the result flags, never raised.  When a
    list is passed as trace, per-step records {energy, k_norm} are appended.
    """
    g = cfg.grid
    v = _values(u0).copy()
    rball = s.ball_radius
    if rball is not None:
        v = _project_ball(g, v, rball)
    e = energy_value(cfg, v)
    if trace is not None:
        trace.append({"energy": e, "k_norm": _k_norm(g, v)})
    status, converged = "max-iters", False
    res = np.inf
    it = 0
    for it in range(s.max_iters):
        r = gradient(cfg, v)
        z = dual_solve(cfg, r)
        res = float(np.sqrt(max(r @ z, 0.0)))
        if res <= s.tol_residual:
            status, converged = "ok", True
            break
        d = -z
        slope = -res * res          # r . d for the Sobolev direction
        t = 1.0
        accepted = False
        cand, ec = v, e
        # roundoff allowance: sufficient decrease below the float noise of the
        # energy cannot be resolved, so do not reject steps over it
        eta = 1e-14 * (1.0 + abs(e))
        for _ in range(s.armijo_max_backtracks):
            cand = v + t * d
            if rball is not None:
                cand = _project_ball(g, cand, rball)
            ec = energy_value(cfg, cand)
            if ec <= e + s.armijo_c1 * t * slope + eta:
                accepted = True
                break
            t *= s.armijo_backtrack
        if not accepted:
            status = "line-search-failure"
            break
        step = _k_norm(g, cand - v)
        on_boundary = rball is not None and _k_norm(g, cand) >= rball * (1.0 - 1e-12)
        v, e = cand, ec
        if trace is not None:
            trace.append({"energy": e, "k_norm": _k_norm(g, v)})
        if on_boundary and step <= 1e-13 * max(rball, 1.0):
            status = "boundary-stall"
            break
    if not converged:
        r = gradient(cfg, v)
        res = float(np.sqrt(max(r @ dual_solve(cfg, r), 0.0)))
        converged = res <= s.tol_residual
        if converged:
            status = "ok"
    return _make_result(cfg, v, e, res, it + 1, converged, status)


def random_starts(grid: Grid, rng: np.random.Generator, n: int) -> list:
    """Seeded i.i.d.-uniform nodal fields rescaled to |u|_2 in [0.1, 10]."""
    out = []
    for _ in range(n):
        v = rng.uniform(-1.0, 1.0, grid.n_dof)
        amp = 10.0 ** rng.uniform(-1.0, 1.0)
        nrm = _m_norm(grid, v)
        out.append(Field(grid, v * (amp / nrm)))
    return out


def plateau_field(grid: Grid, t0: float, margin: float = 0.2) -> Field:
    """Height-t0 plateau on the centered (1-margin) sub-box, linear ramps to 0."""
    if not (0.0 < margin < 1.0):
        raise ValueError("margin must lie in (0, 1)")
    profiles = []
    for L, h, x in zip(grid.extent, grid.h, grid.coords()):
        ramp = 0.5 * margin * L
        if ramp < h:
            raise ValueError(
                f"margin {margin} gives a {ramp:g}-wide ramp, thinner than one cell {h:g}")
        profiles.append(np.minimum(1.0, np.minimum(x / ramp, (L - x) / ramp)))
    if grid.dim == 1:
        vals = t0 * profiles[0]
    else:
        vals = t0 * np.minimum(profiles[0][:, None], profiles[1][None, :]).ravel()
    return Field(grid, vals)


def global_minimize(cfg: EnergyConfig, s: SolverConfig) -> SolveResult:
    """Multistart descent for coercive (sublinear) energies.

    Starts from the deterministic plateau built on the positive-mass
    witness plus seeded random fields; the lowest-energy converged run
    wins, ties broken by start index.
    """
    r = cfg.reaction
    if r is None or r.kind != "sublinear_g":
        raise ValueError("global minimization targets sublinear reactions")
    reports = {rep.hypothesis: rep for rep in audit_sublinear(r)}
    if not reports["g1"].holds:
        raise ValueError("reaction fails the sublinear-decay audit (g1); "
                         "the energy is not certifiably coercive")
    starts = []
    if reports["g2"].holds:
        try:
            starts.append(plateau_field(cfg.grid, reports["g2"].witness_t, margin=0.2))
        except ValueError:
            pass    # grid too coarse for a ramp; random starts only
    rng = np.random.default_rng(s.seed)
    starts.extend(random_starts(cfg.grid, rng, s.n_starts))

    results = [minimize(cfg, s, u0) for u0 in starts]
    converged = [(res.energy, i) for i, res in enumerate(results) if res.converged]
    summary = [{"start": i, "energy": res.energy, "residual": res.residual,
                "converged": res.converged} for i, res in enumerate(results)]
    if not converged:
        best = min(range(len(results)), key=lambda i: results[i].energy)
        out = results[best]
        out.status = "all-starts-unconverged"
        out.detail["starts"] = summary
        return out
    _, best = min(converged)
    out = results[best]
    out.detail["starts"] = summary
    return out


@dataclass
class EndpointResult:
    T: float
    energy_at_T: float
    profile_t: np.ndarray
    profile_E: np.ndarray

    def far_field(self, eig: EigenPair) -> Field:
        return Field(eig.phi1.grid, self.T * eig.phi1.values)


def find_endpoint(cfg: EnergyConfig, eig: EigenPair, T_max: float = 1e3,
                  e_ref: float = 0.0, gap: float = 0.1,
                  n_scan: int = 160) -> EndpointResult:
    """Smallest T on a geometric grid with E(T phi1) below min(0, e_ref) - gap.

    Emits the whole ray profile; failure to drop below the threshold within
    T_max reports the sampled superlinearity margin (the ray stays high when
    the liminf condition fails at this mesh).
    """
    ts = np.geomspace(1e-2, T_max, n_scan)
    phi = eig.phi1.values
    Es = energy_value_batch(cfg, ts[:, None] * phi[None, :])
    threshold = min(0.0, e_ref) - gap
    hit = np.nonzero(Es < threshold)[0]
    if hit.size == 0:
        margin = None
        if cfg.reaction is not None and cfg.gamma.gamma_inf is not None:
            for rep in audit_linear_growth(cfg.reaction, cfg.gamma, eig.lambda1):
                if rep.hypothesis == "f3":
                    margin = rep.margin
        raise PipelineError(
            "find-endpoint",
            f"E(t phi1) never drops below {threshold:g} for t <= {T_max:g}; "
            f"sampled (f3) margin: {margin}",
            detail={"profile_t": ts.tolist(), "profile_E": Es.tolist(),
                    "f3_margin": margin})
    i = int(hit[0])
    return EndpointResult(T=float(ts[i]), energy_at_T=float(Es[i]),
                          profile_t=ts, profile_E=Es)


def _resample_path(grid: Grid, path: np.ndarray, P: int) -> np.ndarray:
    """Piecewise-linear resampling to P+1 points at equal K-norm arclength."""
    seg = path[1:] - path[:-1]
    lens = np.sqrt(np.maximum(np.einsum("ij,ij->i", seg, (grid.K @ seg.T).T), 0.0))
    cum = np.concatenate(([0.0], np.cumsum(lens)))
    total = cum[-1]
    if total <= 0.0:
        return np.repeat(path[:1], P + 1, axis=0)
    targets = np.linspace(0.0, total, P + 1)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(lens) - 1)
    theta = (targets - cum[idx]) / np.where(lens[idx] > 0.0, lens[idx], 1.0)
    out = path[idx] + theta[:, None] * seg[idx]
    out[0] = path[0]
    out[-1] = path[-1]
    return out


def _fd_hessian_apply(cfg: EnergyConfig, v: np.ndarray, w: np.ndarray,
                      fd_eps: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian-vector product of the discrete energy."""
    delta = fd_eps * (1.0 + float(np.abs(v).max()))
    return (gradient(cfg, v + delta * w) - gradient(cfg, v - delta * w)) / (2.0 * delta)


def refine_saddle(cfg: EnergyConfig, s: SolverConfig, u0,
                  tangent: Optional[np.ndarray] = None) -> SolveResult:
    """Drive the dual residual to zero near an index-1 saddle.

    First-order dimer-style iteration: the unstable direction is tracked by
    Rayleigh-Ritz rotation in the (K+M) metric using finite-difference
    Hessian products, the step is the Sobolev gradient with its component
    along that direction reversed, and backtracking enforces monotone
    decrease of the residual norm.  Intended to start near the saddle (the
    crest of a relaxed path).
    """
    g = cfg.grid
    KM = (g.K + g.M).tocsr()
    v = _values(u0).copy()

    def km_normalize(w: np.ndarray) -> np.ndarray:
        n = float(np.sqrt(max(w @ (KM @ w), 0.0)))
        return w / n if n > 0 else w

    tau = None if tangent is None else km_normalize(np.asarray(tangent, dtype=float))
    status, converged = "max-iters", False
    res = np.inf
    t_init = 1.0
    it = 0
    for it in range(s.max_iters):
        r = gradient(cfg, v)
        z = dual_solve(cfg, r)
        res = float(np.sqrt(max(r @ z, 0.0)))
        if res <= s.tol_residual:
            status, converged = "ok", True
            break
        if tau is None:
            tau = km_normalize(z)

        # one Rayleigh-Ritz rotation in span{tau, residual of A tau}
        Htau = _fd_hessian_apply(cfg, v, tau)
        Atau = dual_solve(cfg, Htau)
        rho = float(tau @ Htau)
        w = Atau - rho * tau                   # (K+M)-orthogonal to tau
        wn = float(np.sqrt(max(w @ (Htau - rho * (KM @ tau)), 0.0)))
        if wn > 1e-12 * max(1.0, abs(rho)):
            b2 = w / wn
            Hb2 = _fd_hessian_apply(cfg, v, b2)
            a12 = float(tau @ Hb2)
            a22 = float(b2 @ Hb2)
            small = np.array([[rho, a12], [a12, a22]])
            vals, vecs = np.linalg.eigh(small)
            c = vecs[:, 0]                     # smallest local eigenvector
            tau = km_normalize(c[0] * tau + c[1] * b2)

        zt = float(z @ (KM @ tau))
        d = -z + 2.0 * zt * tau
        t = t_init
        accepted = False
        cand = v
        res_c = res
        for _ in range(s.armijo_max_backtracks):
            cand = v + t * d
            rc = gradient(cfg, cand)
            res_c = float(np.sqrt(max(rc @ dual_solve(cfg, rc), 0.0)))
            if res_c <= res * (1.0 - 1e-4 * t):
                accepted = True
                break
            t *= s.armijo_backtrack
        if not accepted:
            status = "line-search-failure"
            break
        v = cand
        t_init = min(1.0, 2.0 * t)
    e = energy_value(cfg, v)
    return _make_result(cfg, v, e, res, it + 1, converged, status)


def mountain_pass(cfg: EnergyConfig, s: SolverConfig, u_low, u_far,
                  P: int = 40, init_path: Optional[np.ndarray] = None,
                  stall_window: int = 80) -> MountainPassResult:
    """Elastic-path minimax between two low points.

    Deforms the discretized path by one preconditioned Armijo descent step
    at the energy argmax per sweep, re-parametrizing to equal arclength.
    The piecewise-linear crest can only localize the pass to the path
    resolution, so once the argmax residual meets the tolerance or stops
    improving, the saddle is refined by residual minimization (no ball)
    from the crest, and rejected if it collapses onto the low endpoint.
    """
    g = cfg.grid
    low = _values(u_low).copy()
    far = _values(u_far).copy()
    dist = _k_norm(g, far - low)
    if dist <= 1e-10 * max(1.0, _k_norm(g, low)):
        raise ValueError("mountain pass endpoints coincide")

    if init_path is None:
        theta = np.linspace(0.0, 1.0, P + 1)[:, None]
        path = (1.0 - theta) * low[None, :] + theta * far[None, :]
    else:
        path = np.array(init_path, dtype=float)
        path[0], path[-1] = low, far
        path = _resample_path(g, path, P)

    path_status = "max-iters"
    it = 0
    k = P // 2
    res = np.inf
    best_res = np.inf
    stall = 0
    E = energy_value_batch(cfg, path)
    for it in range(s.max_iters):
        k = 1 + int(np.argmax(E[1:-1]))
        if E[k] <= max(E[0], E[-1]):
            path_status = "path-collapse"
            break
        v = path[k]
        r = gradient(cfg, v)
        z = dual_solve(cfg, r)
        res = float(np.sqrt(max(r @ z, 0.0)))
        if res <= s.tol_residual:
            path_status = "ok"
            break
        if res < 0.98 * best_res:
            best_res = res
            stall = 0
        else:
            stall += 1
            if stall >= stall_window:
                path_status = "crest-resolved"
                break
        d = -z
        dn = _k_norm(g, d)
        seg_scale = _k_norm(g, path[k + 1] - v) + _k_norm(g, v - path[k - 1])
        t = min(1.0, seg_scale / dn) if dn > 0 else 1.0
        slope = float(r @ d)
        e0 = E[k]
        accepted = False
        eta = 1e-14 * (1.0 + abs(e0))
        for _ in range(s.armijo_max_backtracks):
            cand = v + t * d
            ec = energy_value(cfg, cand)
            if ec <= e0 + s.armijo_c1 * t * slope + eta:
                accepted = True
                break
            t *= s.armijo_backtrack
        if not accepted:
            path_status = "line-search-failure"
            break
        path[k] = cand
        path = _resample_path(g, path, P)
        E = energy_value_batch(cfg, path)

    if path_status == "path-collapse":
        saddle = _make_result(cfg, path[k], float(E[k]), res, it + 1, False, path_status)
        converged = False
        status = path_status
    else:
        saddle = refine_saddle(cfg, s, path[k], tangent=path[k + 1] - path[k - 1])
        if saddle.converged and _k_norm(g, saddle.u.values - low) < 10.0 * s.tol_residual:
            status = "saddle-collapsed-to-low-endpoint"
            converged = False
            saddle = _make_result(cfg, path[k], float(E[k]), res, it + 1, False, status)
        else:
            converged = saddle.converged
            status = "ok" if converged else f"refine:{saddle.status}"
            path[k] = saddle.u.values

    # the converged saddle is the crest of the limiting path; the raw
    # piecewise-linear crest only bounds it from above
    level_c = saddle.energy if converged else float(E[k])
    endpoints = (float(E[0]), float(E[-1]))
    mp_gap = level_c - max(endpoints)
    fields = [Field(g, row.copy()) for row in path]
    return MountainPassResult(path=fields, level_c=level_c, saddle=saddle,
                              endpoints=endpoints, mp_gap=mp_gap,
                              converged=converged,
                              iters=it + 1, status=status)


@dataclass
class SphereScan:
    r_grid: np.ndarray
    alpha_grid: np.ndarray       # measured sphere minima per radius

    def certified(self) -> np.ndarray:
        return self.alpha_grid > 0.0


def sphere_scan(cfg: EnergyConfig, s: SolverConfig, eig: EigenPair,
                r_grid: Optional[np.ndarray] = None, n_dirs: int = 32) -> SphereScan:
    """Measured minimum of E over K-norm spheres, scanned over radii.

    Directions: the first eigenfunction, a plateau, the datum direction and
    seeded random fields, all K-normalized.  The measurement overestimates
    the true sphere minimum, so it is most trustworthy at small radii where
    the energy is dominated by its quadratic part.
    """
    g = cfg.grid
    if r_grid is None:
        r_grid = np.geomspace(0.05, 5.0, 14)
    rng = np.random.default_rng(s.seed + 7)
    dirs = [eig.phi1.values, plateau_field(g, 1.0, 0.2).values]
    h = cfg.h_values()
    if h is not None and np.any(h != 0.0):
        dirs.append(h.copy())
    dirs.extend(rng.uniform(-1.0, 1.0, (n_dirs, g.n_dof)))
    D = []
    for v in dirs:
        nrm = _k_norm(g, np.asarray(v, dtype=float))
        if nrm > 0:
            D.append(np.asarray(v, dtype=float) / nrm)
    D = np.array(D)
    alphas = np.array([float(energy_value_batch(cfg, r * D).min()) for r in r_grid])
    return SphereScan(r_grid=np.asarray(r_grid, dtype=float), alpha_grid=alphas)


@dataclass
class LocalGeometry:
    """Certified ball/sphere structure around the origin: the smallest scanned
    radius with a positive measured sphere level whose constrained minimizer
    stays strictly interior."""
    r: float
    alpha: float
    u_min: SolveResult
    scan: SphereScan


def certify_local_geometry(cfg: EnergyConfig, s: SolverConfig, eig: EigenPair,
                           r_grid: Optional[np.ndarray] = None,
                           n_dirs: int = 32) -> LocalGeometry:
    """Locate (r, alpha) with the ball minimizer interior and below the level.

    Scans radii upward: small certified radii keep the sampled sphere level
    faithful and the minimax level safely above it.  Raises PipelineError
    naming the failing stage when no radius certifies or no interior
    minimizer exists.
    """
    scan = sphere_scan(cfg, s, eig, r_grid=r_grid, n_dirs=n_dirs)
    ok = scan.certified()
    if not ok.any():
        raise PipelineError("sphere-scan",
                            "no radius certifies a positive sphere level; "
                            "is |h|_2 small enough?",
                            detail={"r_grid": scan.r_grid.tolist(),
                                    "alpha_grid": scan.alpha_grid.tolist()})
    zero = Field(cfg.grid, np.zeros(cfg.grid.n_dof))
    for i in np.nonzero(ok)[0]:
        r = float(scan.r_grid[i])
        alpha = float(scan.alpha_grid[i])
        res = minimize(cfg, replace(s, ball_radius=r), zero)
        interior = _k_norm(cfg.grid, res.u.values) <= 0.9 * r
        if res.converged and interior and res.energy < alpha:
            return LocalGeometry(r=r, alpha=alpha, u_min=res, scan=scan)
    raise PipelineError("ball-minimize",
                        "no certified radius admits an interior constrained "
                        "minimizer below the sphere level")


@dataclass
class TwoSolutionResult:
    u_min: SolveResult
    u_mp: SolveResult
    c: float
    r: float
    alpha: float
    endpoint: EndpointResult
    mountain: MountainPassResult

    def to_dict(self) -> dict:
        return {"u_min": self.u_min.to_dict(), "u_mp": self.u_mp.to_dict(),
                "c": self.c, "r": self.r, "alpha": self.alpha,
                "endpoint_T": self.endpoint.T,
                "mp_gap": self.mountain.mp_gap}


def two_solution_search(cfg: EnergyConfig, s: SolverConfig,
                        eig: Optional[EigenPair] = None,
                        T_max: float = 1e3, P: int = 40,
                        check_hypotheses: bool = True) -> TwoSolutionResult:
    """Local-minimum + mountain-pass pipeline for linear-growth reactions.

    Stages: sphere scan for (r, alpha); ball-constrained descent from zero;
    far endpoint on the first-eigenfunction ray; elastic-path saddle search.
    Stage failures raise PipelineError with the stage tag.
    """
    if eig is None:
        eig = first_eigenpair(cfg.grid)

    if check_hypotheses:
        from .gamma import check_bounds_and_limit, check_convexity
        for rep in check_bounds_and_limit(cfg.gamma):
            if not rep.holds:
                raise PipelineError("hypotheses", f"gamma audit failed: {rep.hypothesis}")
        rep = check_convexity(cfg.gamma, strict=True)
        if not rep.holds:
            raise PipelineError("hypotheses", "gamma fails strict convexity (q4)",
                                detail=rep.to_dict())
        if cfg.reaction is None:
            raise PipelineError("hypotheses", "the two-solution pipeline needs a reaction")
        for rep in audit_linear_growth(cfg.reaction, cfg.gamma, eig.lambda1):
            if rep.hypothesis in ("f1", "f3", "f4") and not rep.holds:
                raise PipelineError("hypotheses", f"reaction audit failed: {rep.hypothesis}",
                                    detail=rep.to_dict())

    geo = certify_local_geometry(cfg, s, eig)
    u_min = geo.u_min

    endpoint = find_endpoint(cfg, eig, T_max=T_max, e_ref=u_min.energy)
    u_far = endpoint.far_field(eig)

    mp = mountain_pass(cfg, s, u_min.u, u_far, P=P)
    if not mp.converged:
        raise PipelineError("mountain-pass", f"saddle search failed: {mp.status}")
    if mp.mp_gap <= 0.0:
        raise PipelineError("mountain-pass", "minimax level does not exceed the endpoints")

    h_zero = _h_l2(cfg) == 0.0
    if h_zero:
        if mp.saddle.classification == "trivial":
            raise PipelineError("mountain-pass", "saddle collapsed to the trivial state")
    elif not (mp.saddle.energy >= geo.alpha > u_min.energy):
        raise PipelineError("mountain-pass",
                            "energy ordering E(u_mp) >= alpha > E(u_min) failed",
                            detail={"E_mp": mp.saddle.energy, "alpha": geo.alpha,
                                    "E_min": u_min.energy})

    return TwoSolutionResult(u_min=u_min, u_mp=mp.saddle, c=mp.level_c,
                             r=geo.r, alpha=geo.alpha, endpoint=endpoint,
                             mountain=mp)


@dataclass
class MuContinuationEntry:
    mu: float
    result: Optional[MountainPassResult]
    error: Optional[str] = None


def mu_continuation(cfg: EnergyConfig, s: SolverConfig, mu_grid,
                    eig: Optional[EigenPair] = None, T_max: float = 1e3,
                    P: int = 40) -> list:
    """Mountain-pass levels along an increasing mu-grid, warm-starting paths.

    Per-mu failures are recorded and the continuation proceeds; the level
    curve mu -> c_mu is nonincreasing whenever the runs stay on one branch.
    """
    mu_grid = np.asarray(list(mu_grid), dtype=float)
    if mu_grid.size == 0 or np.any(np.diff(mu_grid) <= 0):
        raise ValueError("mu grid must be nonempty and strictly increasing")
    if cfg.reaction is None:
        raise ValueError("mu continuation needs a reaction with a split")
    if eig is None:
        eig = first_eigenpair(cfg.grid)

    entries = []
    prev_path = None
    for mu in mu_grid:
        cfg_mu = EnergyConfig(grid=cfg.grid, gamma=cfg.gamma, reaction=cfg.reaction,
                              h_field=cfg.h_field, mu=float(mu), alpha_J=cfg.alpha_J,
                              split=cfg.split)
        try:
            geo = certify_local_geometry(cfg_mu, s, eig)
            u_min = geo.u_min
            endpoint = find_endpoint(cfg_mu, eig, T_max=T_max, e_ref=u_min.energy)
            init = prev_path if prev_path is not None else None
            mp = mountain_pass(cfg_mu, s, u_min.u, endpoint.far_field(eig),
                               P=P, init_path=init)
            if not mp.converged:
                raise PipelineError("mountain-pass", f"unconverged at mu={mu}: {mp.status}")
            prev_path = np.array([f.values for f in mp.path])
            entries.append(MuContinuationEntry(mu=float(mu), result=mp))
        except (PipelineError, ValueError) as exc:
            entries.append(MuContinuationEntry(mu=float(mu), result=None, error=str(exc)))
    return entries


@dataclass
class ScanReport:
    nu: float
    nu0: float
    runs: list
    verdict: Optional[str]

    def to_dict(self) -> dict:
        return {"nu": self.nu, "nu0": self.nu0, "runs": self.runs,
                "verdict": self.verdict}


def nonexistence_scan(cfg: EnergyConfig, s: SolverConfig, nu: float,
                      n_starts: Optional[int] = None) -> ScanReport:
    """Multistart search for nontrivial states at a given nu, h == 0.

    Absence of solutions cannot be proven by search; the certified
    threshold is the proof surrogate, and no verdict is claimed exactly at
    the boundary nu == nu_0.
    """
    r = cfg.reaction
    if r is None or r.kind != "sublinear_g":
        raise ValueError("the nonexistence scan applies to sublinear reactions")
    if _h_l2(cfg) != 0.0:
        raise ValueError("the nonexistence scan requires h == 0")
    nu0 = nonexistence_threshold(r, cfg.gamma)
    cfg_nu = EnergyConfig(grid=cfg.grid, gamma=cfg.gamma, reaction=with_nu(r, nu),
                          h_field=None, mu=1.0, alpha_J=cfg.alpha_J)

    n = s.n_starts if n_starts is None else n_starts
    starts = [plateau_field(cfg.grid, g2_witness(cfg_nu.reaction), 0.2)]
    starts.extend(random_starts(cfg.grid, np.random.default_rng(s.seed), n))
    runs = []
    all_trivial = True
    for i, u0 in enumerate(starts):
        res = minimize(cfg_nu, s, u0)
        runs.append({"start": i, "l2": norms(res.u).l2, "residual": res.residual,
                     "converged": res.converged,
                     "classification": res.classification})
        if res.converged and res.classification == "nontrivial":
            all_trivial = False
    if abs(nu - nu0) <= 1e-12 * max(nu0, 1.0):
        verdict = None
    else:
        verdict = "consistent-with-nonexistence" if all_trivial \
            else "nontrivial-solution-found"
    return ScanReport(nu=float(nu), nu0=float(nu0), runs=runs, verdict=verdict)


@dataclass
class Nu1Estimate:
    nu1: float                   # smallest scanned nu with a negative minimum
    bracket: tuple               # (largest trivial nu seen, nu1)
    energy_at_nu1: float


def nu1_search(cfg: EnergyConfig, s: SolverConfig, nu_lo: float = 1.0,
               nu_hi: float = 1e3, n_scan: int = 12,
               bisections: int = 6) -> Nu1Estimate:
    """Empirical onset of negative-energy states for the homogeneous problem.

    Scans nu on a geometric grid with multistart minimization (plateau start
    included), then bisects the first sign change of the global minimum.
    The true onset is nonconstructive; this is a reproducible bracket, not
    a certificate.
    """
    r = cfg.reaction
    if r is None or r.kind != "sublinear_g":
        raise ValueError("the nu1 search applies to sublinear reactions")
    if _h_l2(cfg) != 0.0:
        raise ValueError("the nu1 search requires h == 0")

    def negative_at(nu: float) -> Optional[float]:
        cfg_nu = EnergyConfig(grid=cfg.grid, gamma=cfg.gamma, reaction=with_nu(r, nu),
                              alpha_J=cfg.alpha_J)
        res = global_minimize(cfg_nu, s)
        return res.energy if res.converged and res.energy < 0.0 else None

    lo, hi, e_hi = None, None, None
    for nu in np.geomspace(nu_lo, nu_hi, n_scan):
        e = negative_at(float(nu))
        if e is None:
            lo = float(nu)
        else:
            hi, e_hi = float(nu), e
            break
    if hi is None:
        raise PipelineError("nu1-search",
                            f"no negative-energy state found up to nu = {nu_hi:g}")
    if lo is None:
        lo = 0.0
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        e = negative_at(mid)
        if e is None:
            lo = mid
        else:
            hi, e_hi = mid, e
    return Nu1Estimate(nu1=hi, bracket=(lo, hi), energy_at_nu1=e_hi)


@dataclass
class HSmallnessResult:
    beta_star: float
    r: float
    alpha: float


def h_smallness_search(cfg_template: EnergyConfig, s: SolverConfig,
                       eig: Optional[EigenPair] = None) -> HSmallnessResult:
    """Largest datum amplitude (within factor 2) keeping a positive sphere level.

    The datum direction is the template's h field normalized to unit L2
    norm; doubling/halving brackets the admissible amplitude.
    """
    if eig is None:
        eig = first_eigenpair(cfg_template.grid)
    h = cfg_template.h_values()
    if h is None or not np.any(h != 0.0):
        raise ValueError("h smallness search needs a nonzero datum direction")
    direction = h / _m_norm(cfg_template.grid, h)

    def certify_at(beta: float) -> Optional[LocalGeometry]:
        cfg = EnergyConfig(grid=cfg_template.grid, gamma=cfg_template.gamma,
                           reaction=cfg_template.reaction,
                           h_field=Field(cfg_template.grid, beta * direction),
                           mu=cfg_template.mu, alpha_J=cfg_template.alpha_J,
                           split=cfg_template.split)
        try:
            return certify_local_geometry(cfg, s, eig)
        except PipelineError:
            return None

    beta = 1.0
    best = certify_at(beta)
    if best is not None:
        while beta < 2.0 ** 30:
            nxt = certify_at(2.0 * beta)
            if nxt is None:
                break
            beta *= 2.0
            best = nxt
    else:
        while best is None:
            beta *= 0.5
            if beta < 2.0 ** -40:
                raise PipelineError(
                    "h-smallness", "no admissible amplitude at the smallest probe; "
                                   "the hypothesis margins are too thin at this mesh")
            best = certify_at(beta)
    return HSmallnessResult(beta_star=beta, r=best.r, alpha=best.alpha)
