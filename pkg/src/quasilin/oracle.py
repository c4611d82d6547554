"""Independent ground-truth generators for tests and cross-validation.

Nothing here shares code paths with the solver beyond the energy assembly
it is meant to check: the semilinear solve is a direct linear solve against
the closed-form discrete spectrum, the gradient check is plain central
differences of the energy, and the brute-force minimizer is an exhaustive
nodal grid sweep on tiny instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse.linalg as spla

from .functional import EnergyConfig, energy_value, energy_value_batch
from .grid import Field, Grid, pencil_eigenvalues


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    oracle_value: object
    candidate_value: object
    abs_err: float
    rel_err: float

    @classmethod
    def compare(cls, quantity: str, oracle, candidate) -> "OracleReport":
        o = np.asarray(oracle, dtype=float)
        c = np.asarray(candidate, dtype=float)
        abs_err = float(np.max(np.abs(o - c)))
        rel_err = float(abs_err / max(float(np.max(np.abs(o))), 1e-300))
        return cls(quantity=quantity,
                   oracle_value=o.tolist() if o.ndim else float(o),
                   candidate_value=c.tolist() if c.ndim else float(c),
                   abs_err=abs_err, rel_err=rel_err)

    def to_dict(self) -> dict:
        return {"quantity": self.quantity, "oracle_value": self.oracle_value,
                "candidate_value": self.candidate_value,
                "abs_err": self.abs_err, "rel_err": self.rel_err}


@dataclass(frozen=True)
class NoSolution:
    """Resonance sentinel: lam hits an eigenvalue of the discrete pencil."""
    resonant_eigenvalue: float


def semilinear_solve(grid: Grid, lam: float, h: Field,
                     resonance_rtol: float = 1e-12) -> Union[Field, NoSolution]:
    """Direct solve of (K + M) u = lam M u + M h in the constant-density case.

    Detects resonance against the closed-form pencil spectrum instead of
    relying on the factorization to fail.
    """
    eigs = 1.0 + pencil_eigenvalues(grid)
    gap = np.abs(eigs - lam)
    i = int(np.argmin(gap))
    if gap[i] <= resonance_rtol * max(abs(lam), 1.0):
        return NoSolution(resonant_eigenvalue=float(eigs[i]))
    A = (grid.K + (1.0 - lam) * grid.M).tocsc()
    u = spla.spsolve(A, grid.M @ h.values)
    return Field(grid, u)


def fd_gradient(cfg: EnergyConfig, u: Field, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of the energy, one dof at a time."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    out = np.empty_like(v)
    for i in range(v.size):
        vp = v.copy()
        vm = v.copy()
        vp[i] += eps
        vm[i] -= eps
        out[i] = (energy_value(cfg, vp) - energy_value(cfg, vm)) / (2.0 * eps)
    return out


def fd_directional(cfg: EnergyConfig, u, v, eps: float = 1e-5) -> float:
    """Central finite difference of t -> E(u + t v) at t = 0."""
    uu = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    vv = v.values if isinstance(v, Field) else np.asarray(v, dtype=float)
    return float((energy_value(cfg, uu + eps * vv)
                  - energy_value(cfg, uu - eps * vv)) / (2.0 * eps))


@dataclass(frozen=True)
class BruteForceResult:
    u: Field
    energy: float
    cell_diameter: float    # tolerance bound of the refined sweep


def brute_force_min(cfg: EnergyConfig, box: float, steps: int,
                    budget: int = 10 ** 8, chunk: int = 1 << 18) -> BruteForceResult:
    """Exhaustive nodal sweep over [-box, box]^n_dof, refined once.

    Only meaningful on tiny grids; the returned cell diameter bounds how
    far the true discrete minimizer can sit from the reported one.
    """
    d = cfg.grid.n_dof
    if d > 4:
        raise ValueError("brute force is restricted to grids with <= 4 dofs")
    if steps ** d > budget:
        raise ValueError(f"sweep budget exceeded: {steps}^{d} > {budget}")

    center = np.zeros(d)
    half = float(box)
    best_u, best_e = None, np.inf
    step_len = 2.0 * half / (steps - 1)
    for _ in range(2):   # initial sweep + one refinement around the best cell
        axes = [np.linspace(center[k] - half, center[k] + half, steps) for k in range(d)]
        step_len = 2.0 * half / (steps - 1)
        total = steps ** d
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total))
            U = np.empty((idx.size, d))
            rem = idx
            for k in range(d - 1, -1, -1):
                U[:, k] = axes[k][rem % steps]
                rem = rem // steps
            E = energy_value_batch(cfg, U)
            j = int(np.argmin(E))
            if E[j] < best_e:
                best_e = float(E[j])
                best_u = U[j].copy()
        center = best_u.copy()
        half = step_len
    diam = step_len * np.sqrt(d)    # diagonal of the final sweep's cell
    return BruteForceResult(u=Field(cfg.grid, best_u), energy=best_e,
                            cell_diameter=float(diam))
