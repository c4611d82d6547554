"""Discrete energy, its mu-family, first variations and the dual residual.

The quadrature is nodal: per dof i the collocation state is
s_i = (u_i^2 + |grad u|^2_i) / 2 with the cell-share gradient collocation
from the grid module, so the discrete energy is C^1 in the nodal values
and its gradient assembles exactly by the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .gamma import GammaModel, eval_Gamma, eval_gamma
from .grid import Field, Grid
from .reactions import Reaction, ReactionSplit, eval_F, eval_f, split as make_split

ArrayLike = Union[Field, np.ndarray]


@dataclass
class EnergyConfig:
    """Bundle (gamma model, reaction, datum h, family parameter mu).

    mu must stay in J = (1 - alpha_J, 1 + alpha_J); whenever mu != 1 the
    reaction split is required (computed on demand if not supplied).
    The datum h must be nodally nonnegative.
    """

    grid: Grid
    gamma: GammaModel
    reaction: Optional[Reaction] = None
    h_field: Optional[Field] = None
    mu: float = 1.0
    alpha_J: float = 0.1
    split: Optional[ReactionSplit] = None

    def __post_init__(self):
        if self.h_field is not None:
            if self.h_field.values.size != self.grid.n_dof:
                raise ValueError("datum field lives on a different grid")
            if np.any(self.h_field.values < 0.0):
                raise ValueError("the datum h must be nonnegative nodally")
        if not (1.0 - self.alpha_J <= self.mu <= 1.0 + self.alpha_J):
            raise ValueError(f"mu={self.mu} outside J=[1-{self.alpha_J}, 1+{self.alpha_J}]")
        if self.mu != 1.0 and self.reaction is not None and self.split is None:
            self.split = make_split(self.reaction)

    def h_values(self) -> Optional[np.ndarray]:
        return None if self.h_field is None else self.h_field.values


@dataclass
class EnergyReport:
    value: float
    quasilinear: float
    reaction: float
    datum: float
    mu: float

    def to_dict(self) -> dict:
        return {"value": self.value, "quasilinear": self.quasilinear,
                "reaction": self.reaction, "datum": self.datum, "mu": self.mu}


def _values(u: ArrayLike) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def collocation_state(cfg: EnergyConfig, u: ArrayLike) -> np.ndarray:
    v = _values(u)
    return 0.5 * (v * v + cfg.grid.nodal_gradsq(v))


def boundary_state(cfg: EnergyConfig, u: ArrayLike) -> np.ndarray:
    return 0.5 * cfg.grid.boundary_gradsq(_values(u))


def _reaction_energy(cfg: EnergyConfig, up: np.ndarray) -> np.ndarray:
    """Per-dof reaction integrand: mu F1(u+) - F2(u+)  (== F(u+) at mu=1)."""
    if cfg.reaction is None:
        return np.zeros_like(up)
    if cfg.mu == 1.0:
        return np.asarray(eval_F(cfg.reaction, up))
    sp = cfg.split
    return cfg.mu * np.asarray(sp.F1(up)) - np.asarray(sp.F2(up))


def _reaction_force(cfg: EnergyConfig, up: np.ndarray) -> np.ndarray:
    """Per-dof reaction force: mu f1(u+) - f2(u+)  (== f(u+) at mu=1).

    Vanishes wherever u <= 0 since every admissible reaction has f(0) = 0,
    so no subgradient handling is needed at the kink of u -> F(u+).
    """
    if cfg.reaction is None:
        return np.zeros_like(up)
    if cfg.mu == 1.0:
        return np.asarray(eval_f(cfg.reaction, up))
    sp = cfg.split
    return cfg.mu * np.asarray(sp.f1(up)) - np.asarray(sp.f2(up))


def energy(cfg: EnergyConfig, u: ArrayLike) -> EnergyReport:
    """Assembled E_mu(u) with its additive parts (value = q - r - d exactly)."""
    v = _values(u)
    w = cfg.grid.weight
    s = collocation_state(cfg, v)
    q = w * float(np.sum(np.asarray(eval_Gamma(cfg.gamma, s))))
    q += cfg.grid.boundary_weight * float(
        np.sum(np.asarray(eval_Gamma(cfg.gamma, boundary_state(cfg, v)))))
    up = np.maximum(v, 0.0)
    r = w * float(np.sum(_reaction_energy(cfg, up)))
    h = cfg.h_values()
    d = 0.0 if h is None else w * float(np.sum(h * v))
    return EnergyReport(value=q - r - d, quasilinear=q, reaction=r, datum=d, mu=cfg.mu)


def energy_value(cfg: EnergyConfig, u: ArrayLike) -> float:
    return energy(cfg, u).value


def energy_value_batch(cfg: EnergyConfig, U: np.ndarray) -> np.ndarray:
    """E_mu for a batch of nodal vectors, shape (N, n_dof) -> (N,)."""
    U = np.asarray(U, dtype=float)
    w = cfg.grid.weight
    s = 0.5 * (U * U + cfg.grid.nodal_gradsq(U))
    q = w * np.sum(np.asarray(eval_Gamma(cfg.gamma, s)), axis=-1)
    sb = 0.5 * cfg.grid.boundary_gradsq(U)
    q = q + cfg.grid.boundary_weight * np.sum(np.asarray(eval_Gamma(cfg.gamma, sb)), axis=-1)
    up = np.maximum(U, 0.0)
    r = w * np.sum(_reaction_energy(cfg, up), axis=-1)
    h = cfg.h_values()
    d = 0.0 if h is None else w * (U @ h)
    return q - r - d


def phi(cfg: EnergyConfig, u: ArrayLike) -> float:
    """Quasilinear part: weighted sum of Gamma at the collocation state."""
    s = collocation_state(cfg, u)
    out = cfg.grid.weight * float(np.sum(np.asarray(eval_Gamma(cfg.gamma, s))))
    out += cfg.grid.boundary_weight * float(
        np.sum(np.asarray(eval_Gamma(cfg.gamma, boundary_state(cfg, u)))))
    return out


def _quasilinear_gradient(cfg: EnergyConfig, v: np.ndarray) -> np.ndarray:
    s = collocation_state(cfg, v)
    gs = np.asarray(eval_gamma(cfg.gamma, s))
    gsb = np.asarray(eval_gamma(cfg.gamma, boundary_state(cfg, v)))
    return cfg.grid.weight * gs * v + cfg.grid.weighted_stiffness_apply(gs, gsb, v)


def phi_prime(cfg: EnergyConfig, u: ArrayLike, v: ArrayLike) -> float:
    """Directional derivative of phi at base point u in direction v (linear in v)."""
    return float(_quasilinear_gradient(cfg, _values(u)) @ _values(v))


def gradient(cfg: EnergyConfig, u: ArrayLike) -> np.ndarray:
    """Exact gradient of the discrete E_mu with respect to nodal values."""
    v = _values(u)
    w = cfg.grid.weight
    r = _quasilinear_gradient(cfg, v)
    up = np.maximum(v, 0.0)
    r = r - w * _reaction_force(cfg, up)
    h = cfg.h_values()
    if h is not None:
        r = r - w * h
    return r


def dual_solve(cfg: EnergyConfig, r: np.ndarray) -> np.ndarray:
    """z = (K + M)^{-1} r, the Riesz lift of the residual."""
    return cfg.grid.solve_KM(r)


def residual_norm(cfg: EnergyConfig, u: ArrayLike) -> float:
    """Dual norm sqrt(r' (K+M)^{-1} r); zero iff the gradient vanishes."""
    r = gradient(cfg, u)
    z = dual_solve(cfg, r)
    val = float(r @ z)
    if val < 0:
        raise RuntimeError("dual solve produced a negative quadratic form; "
                           "the (K+M) factorization is corrupted")
    return float(np.sqrt(val))
