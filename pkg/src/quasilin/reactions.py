"""Reaction nonlinearities, their antiderivatives, splits and audits.

A Reaction is either nu * g with g of sublinear decay, a nonlinearity of
linear growth at infinity, or the purely linear lam * t.  Everything is
extended by zero to t <= 0 (solutions are sought through the positive
part, so negative arguments never carry reaction force).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate

from .common import HOLDS, VIOLATED, AccuracyError, HypothesisReport, SampleSpec, \
    decade_maxima, decade_minima
from .gamma import GammaModel, eval_gamma

CLIP = 1e300
QUAD_RTOL = 1e-10

SUBLINEAR_FAMILIES = ("sin_a", "power_ratio_ab", "min_powers_ab", "log1p",
                      "exp_logpow_a", "exp_loglog", "user")
LINEAR_GROWTH_FAMILIES = ("asymlinear_lambda", "linear_lambda", "user")


@dataclass(frozen=True)
class Reaction:
    kind: str        # sublinear_g | linear_growth_f | pure_linear
    family: str
    params: dict
    nu: float = 1.0
    # certified constant with |g(t)| <= C_lin |t| (unscaled by nu); None if
    # no closed-form certificate exists for the family
    C_lin: Optional[float] = None
    p_growth: float = 1.5
    _quad_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def sublinear(cls, family: str, nu: float = 1.0, **params) -> "Reaction":
        if family not in SUBLINEAR_FAMILIES:
            raise ValueError(f"unknown sublinear family {family!r}")
        if nu <= 0:
            raise ValueError("nu must be positive")
        _validate(family, params)
        return cls(kind="sublinear_g", family=family, params=params, nu=float(nu),
                   C_lin=_certified_C(family, params))

    @classmethod
    def linear_growth(cls, family: str, **params) -> "Reaction":
        if family not in LINEAR_GROWTH_FAMILIES:
            raise ValueError(f"unknown linear-growth family {family!r}")
        _validate(family, params)
        return cls(kind="linear_growth_f", family=family, params=params,
                   C_lin=_certified_C(family, params))

    @classmethod
    def linear(cls, lam: float) -> "Reaction":
        return cls(kind="pure_linear", family="linear_lambda", params={"lam": float(lam)},
                   C_lin=abs(float(lam)))


def _validate(family: str, params: dict):
    if family == "sin_a":
        if params.get("a", 0.0) == 0.0:
            raise ValueError("sin_a needs a != 0")
    elif family == "power_ratio_ab":
        a_, b_ = params.get("alpha"), params.get("beta")
        if a_ is None or b_ is None or not (1.0 <= a_ < b_ + 1.0):
            raise ValueError("power_ratio_ab needs 1 <= alpha < beta + 1")
    elif family == "min_powers_ab":
        a_, b_ = params.get("alpha"), params.get("beta")
        if a_ is None or b_ is None or not (0.0 < a_ < 1.0 < b_):
            raise ValueError("min_powers_ab needs 0 < alpha < 1 < beta")
    elif family == "exp_logpow_a":
        a_ = params.get("alpha")
        if a_ is None or not (0.0 < a_ < 1.0):
            raise ValueError("exp_logpow_a needs alpha in (0, 1)")
    elif family == "asymlinear_lambda":
        if params.get("lam", 0.0) <= 0:
            raise ValueError("asymlinear_lambda needs lam > 0")
    elif family == "user":
        if not callable(params.get("f")):
            raise ValueError("user family needs a callable f")


def _certified_C(family: str, params: dict) -> Optional[float]:
    if family == "sin_a":
        return abs(params["a"])
    if family == "log1p" or family == "min_powers_ab":
        return 1.0
    if family == "power_ratio_ab":
        a_, b_ = params["alpha"], params["beta"]
        c = a_ - 1.0
        if c == 0.0:
            return 1.0
        # maximize t^c / (1 + t^b): stationary at t^b = c / (b - c)
        x_b = c / (b_ - c)
        x = x_b ** (1.0 / b_)
        return x ** c * (b_ - c) / b_
    if family == "asymlinear_lambda":
        return params["lam"]
    if family == "linear_lambda":
        return abs(params["lam"])
    if family == "user":
        return params.get("C_lin")
    return None  # exp_logpow_a, exp_loglog: the ratio is unbounded near 0


def _eval_g(r: Reaction, t: np.ndarray) -> np.ndarray:
    """Family formula on t >= 0 (no positivity masking, no nu)."""
    p = r.params
    with np.errstate(over="ignore", invalid="ignore"):
        if r.family == "sin_a":
            out = np.sin(p["a"] * t)
        elif r.family == "power_ratio_ab":
            out = t ** p["alpha"] / (1.0 + t ** p["beta"])
        elif r.family == "min_powers_ab":
            out = np.minimum(t ** p["alpha"], t ** p["beta"])
        elif r.family == "log1p":
            out = np.log1p(t)
        elif r.family == "exp_logpow_a":
            out = np.expm1(np.log1p(t) ** p["alpha"])
        elif r.family == "exp_loglog":
            out = np.expm1(np.log1p(t) / np.log(np.log(2.0 + t)))
        elif r.family == "asymlinear_lambda":
            out = p["lam"] * t * t / (1.0 + t)
        elif r.family == "linear_lambda":
            out = p["lam"] * t
        elif r.family == "user":
            out = np.asarray(p["f"](t), dtype=float)
        else:
            raise ValueError(f"unknown family {r.family!r}")
    return np.clip(np.nan_to_num(out, nan=0.0, posinf=CLIP, neginf=-CLIP), -CLIP, CLIP)


def eval_f(r: Reaction, t):
    """f(t); zero for t <= 0 and nu-scaled in the sublinear case."""
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0.0, _eval_g(r, np.maximum(t, 0.0)), 0.0)
    scale = r.nu if r.kind == "sublinear_g" else 1.0
    out = scale * out
    return out if out.ndim else float(out)


def _closed_G(r: Reaction, t: np.ndarray) -> Optional[np.ndarray]:
    """Antiderivative of the unscaled family formula where a closed form exists."""
    p = r.params
    if r.family == "sin_a":
        return (1.0 - np.cos(p["a"] * t)) / p["a"]
    if r.family == "log1p":
        return (1.0 + t) * np.log1p(t) - t
    if r.family == "min_powers_ab":
        a_, b_ = p["alpha"], p["beta"]
        low = t ** (b_ + 1.0) / (b_ + 1.0)
        high = 1.0 / (b_ + 1.0) + (t ** (a_ + 1.0) - 1.0) / (a_ + 1.0)
        return np.where(t <= 1.0, low, high)
    if r.family == "asymlinear_lambda":
        return p["lam"] * (t * t / 2.0 - t + np.log1p(t))
    if r.family == "linear_lambda":
        return p["lam"] * t * t / 2.0
    if r.family == "user" and callable(p.get("F")):
        return np.asarray(p["F"](t), dtype=float)
    return None


def _quad_G(r: Reaction, t: float) -> float:
    key = float(t)
    cached = r._quad_cache.get(key)
    if cached is not None:
        return cached
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda s: float(_eval_g(r, np.asarray(s))), 0.0, key,
                                  epsabs=0.0, epsrel=QUAD_RTOL, limit=500)
    if err > QUAD_RTOL * max(abs(val), 1e-300) * 10.0:
        raise AccuracyError(
            f"F quadrature at t={t:g}: error estimate {err:g} exceeds "
            f"relative tolerance {QUAD_RTOL:g}")
    r._quad_cache[key] = val
    return val


def eval_F(r: Reaction, t):
    """F(t) = int_0^t f; zero for t <= 0."""
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    G = _closed_G(r, tp)
    if G is None:
        G = np.vectorize(lambda x: _quad_G(r, x) if x > 0 else 0.0)(tp)
    scale = r.nu if r.kind == "sublinear_g" else 1.0
    out = scale * np.where(t > 0.0, G, 0.0)
    return out if out.ndim else float(out)


@dataclass
class ReactionSplit:
    """f = f1 - f2 with f1 = max(f, 0) and f2 compactly supported (sampled).

    F2 is reconstructed as F1 - F so the split identity is exact wherever
    F1 is; for reactions nonnegative on the scan the split is trivial.
    """

    reaction: Reaction
    T2: float
    K_bound: float
    trivial: bool
    _t: Optional[np.ndarray] = None
    _F1: Optional[np.ndarray] = None

    def f1(self, t):
        return np.maximum(eval_f(self.reaction, t), 0.0)

    def f2(self, t):
        return self.f1(t) - eval_f(self.reaction, t)

    def F1(self, t):
        if self.trivial:
            return eval_F(self.reaction, t)
        t = np.asarray(t, dtype=float)
        inside = np.interp(np.maximum(t, 0.0), self._t, self._F1)
        # beyond the scanned support f1 == f, so F1 grows by F increments
        over = t > self._t[-1]
        if np.any(over):
            tail = self._F1[-1] + np.asarray(eval_F(self.reaction, t)) \
                - eval_F(self.reaction, float(self._t[-1]))
            inside = np.where(over, tail, inside)
        out = np.where(t > 0.0, inside, 0.0)
        return out if out.ndim else float(out)

    def F2(self, t):
        if self.trivial:
            t = np.asarray(t, dtype=float)
            out = np.zeros_like(t)
            return out if out.ndim else 0.0
        return self.F1(t) - eval_F(self.reaction, t)


def split(r: Reaction, t_scan: float = 1e3, n_scan: int = 200_001) -> ReactionSplit:
    """Decompose f into nonnegative f1 and compactly supported f2.

    Requires linear growth with sampled liminf f(t)/t > 0 at the horizon,
    so that f is eventually nonnegative and f2 vanishes for large t.
    """
    if r.kind not in ("linear_growth_f", "pure_linear"):
        raise ValueError("split is defined for reactions of linear growth")
    t = np.linspace(0.0, t_scan, n_scan)
    fv = np.asarray(eval_f(r, t))

    neg = fv < 0.0
    tail = t >= t_scan / 10.0
    if (neg & tail).any() or float(fv[-1]) <= 0.0:
        worst = float(t[neg][-1]) if neg.any() else t_scan
        raise ValueError(
            f"f2 support looks unbounded: f < 0 at sampled t = {worst:g}; "
            "the split needs sampled liminf f(t)/t > 0")
    if not neg.any():
        return ReactionSplit(reaction=r, T2=0.0, K_bound=0.0, trivial=True)

    T2 = float(t[neg][-1]) * 1.05
    f1v = np.maximum(fv, 0.0)
    F1v = integrate.cumulative_trapezoid(f1v, t, initial=0.0)
    # sampled estimate of min F2 on the scan grid (F2 = int of f1 - f)
    F2v = integrate.cumulative_trapezoid(f1v - fv, t, initial=0.0)
    K_bound = max(0.0, -float(F2v.min())) * 1.1
    return ReactionSplit(reaction=r, T2=T2, K_bound=K_bound, trivial=False,
                         _t=t, _F1=F1v)


def _sublinear_sample(sample: Optional[SampleSpec]) -> SampleSpec:
    # (g2) scans (0, 1e3]; keep the sublinear default horizon there
    return sample if sample is not None else SampleSpec(t_max=1e3, n_samples=10_000, t_min=1e-6)


def audit_sublinear(r: Reaction, sample: Optional[SampleSpec] = None,
                    g1_tol: float = 0.05) -> list[HypothesisReport]:
    """Sampled verdicts for the sublinear-decay, positive-mass and linear-bound hypotheses.

    g1: |g(t)|/t must have strictly decreasing per-decade maxima over the
        last three decades and fall below g1_tol at the horizon.
    g2: reports a witness t0 with G(t0) > 0, chosen to maximize the
        plateau utility G(t) / (1 + t)^2 over the scan.
    g3: reports the sampled supremum of |g(t)|/t as candidate C; the
        certified constant, when available, is carried separately.
    """
    if r.kind != "sublinear_g":
        raise ValueError("audit_sublinear expects a sublinear reaction")
    spec = _sublinear_sample(sample)
    t = spec.grid(include_zero=False)
    g = np.asarray(_eval_g(r, t))
    ratio = np.abs(g) / t
    reports = []

    dmax = decade_maxima(t, ratio, 3)
    final = float(ratio[-1])
    decreasing = bool(np.all(np.diff(dmax) < 0.0))
    if decreasing and final <= g1_tol:
        reports.append(HypothesisReport(
            "g1", HOLDS, margin=float(g1_tol - final),
            detail={"decade_maxima": dmax.tolist(), "ratio_at_horizon": final}))
    else:
        i = int(np.argmax(ratio * (t >= spec.t_max / 10.0)))
        reports.append(HypothesisReport(
            "g1", VIOLATED, witness_t=float(t[i]), margin=float(g1_tol - final),
            detail={"decade_maxima": dmax.tolist(), "ratio_at_horizon": final}))

    G = integrate.cumulative_trapezoid(g, t, initial=0.0)
    score = G / (1.0 + t) ** 2
    i = int(np.argmax(score))
    if G[i] > 0.0:
        reports.append(HypothesisReport(
            "g2", HOLDS, witness_t=float(t[i]), margin=float(G[i]),
            detail={"G_at_witness": float(G[i])}))
    else:
        reports.append(HypothesisReport(
            "g2", VIOLATED, margin=float(G.max()),
            detail={"max_sampled_G": float(G.max())}))

    sup = float(ratio.max())
    i = int(np.argmax(ratio))
    detail = {"sampled_C": sup, "argmax_t": float(t[i]), "certified_C": r.C_lin}
    if r.C_lin is not None and sup > r.C_lin * (1.0 + 1e-9):
        reports.append(HypothesisReport("g3", VIOLATED, witness_t=float(t[i]),
                                        margin=float(r.C_lin - sup), detail=detail))
    else:
        reports.append(HypothesisReport("g3", HOLDS, margin=sup, detail=detail))
    return reports


def g2_witness(r: Reaction, sample: Optional[SampleSpec] = None) -> float:
    """Witness height t0 with G(t0) > 0, for plateau construction."""
    for rep in audit_sublinear(r, sample):
        if rep.hypothesis == "g2":
            if not rep.holds:
                raise ValueError("no positive-mass witness found on the sample grid")
            return rep.witness_t
    raise AssertionError("unreachable")


def _stabilized(values: np.ndarray, rel: float = 0.01) -> bool:
    lo, hi = float(values.min()), float(values.max())
    return (hi - lo) <= rel * max(abs(hi), abs(lo), 1e-30)


def audit_linear_growth(r: Reaction, gm: GammaModel, lambda1: float,
                        sample: Optional[SampleSpec] = None) -> list[HypothesisReport]:
    """Sampled verdicts for the four linear-growth ratio conditions.

    Limits are replaced by per-decade extrema of f(t)/t on a log grid with
    a three-decade stabilization criterion; margins are reported against
    the thresholds built from gamma(0), gamma_min, gamma(inf) and lambda1.
    """
    if r.kind not in ("linear_growth_f", "pure_linear"):
        raise ValueError("audit_linear_growth expects linear growth")
    spec = sample if sample is not None else SampleSpec(t_max=1e6, n_samples=10_000, t_min=1e-8)
    t = spec.grid(include_zero=False)
    ratio = np.asarray(eval_f(r, t)) / t
    reports = []

    g0 = float(np.asarray(eval_gamma(gm, 0.0)))
    thr1 = g0 + gm.gamma_min * lambda1
    near0 = t <= spec.t_min * 10.0
    est0 = float(ratio[near0].max())
    margin1 = thr1 - est0
    reports.append(HypothesisReport(
        "f1", HOLDS if margin1 > 0 else VIOLATED,
        witness_t=None if margin1 > 0 else float(t[np.argmax(ratio * near0)]),
        margin=float(margin1),
        detail={"limsup0_estimate": est0, "threshold": thr1}))

    ratio_p = np.abs(np.asarray(eval_f(r, t))) / t ** r.p_growth
    dmax_p = decade_maxima(t, ratio_p, 3)
    ok2 = bool(np.all(np.diff(dmax_p) < 0.0))
    reports.append(HypothesisReport(
        "f2", HOLDS if ok2 else VIOLATED,
        witness_t=None if ok2 else float(t[-1]),
        margin=float(-dmax_p[-1]) if ok2 else float(dmax_p[-1] - dmax_p[0]),
        detail={"p": r.p_growth, "decade_maxima": dmax_p.tolist()}))

    dmin = decade_minima(t, ratio, 3)
    est_inf = float(dmin[-1])
    stable3 = _stabilized(dmin)
    if gm.gamma_inf is None:
        raise ValueError("(f3) needs a gamma model with a limit at infinity")
    thr3 = gm.gamma_inf * (1.0 + lambda1)
    margin3 = est_inf - thr3
    reports.append(HypothesisReport(
        "f3", HOLDS if (margin3 > 0 and stable3) else VIOLATED,
        witness_t=None if margin3 > 0 else float(t[-1]),
        margin=float(margin3),
        detail={"liminf_estimate": est_inf, "threshold": thr3, "stabilized": stable3}))

    dmax = decade_maxima(t, ratio, 3)
    stable4 = _stabilized(dmax)
    growing = bool(np.all(np.diff(dmax) > 0.0)) and not stable4
    reports.append(HypothesisReport(
        "f4", VIOLATED if growing else HOLDS,
        witness_t=float(t[-1]) if growing else None,
        margin=float(dmax[-1]),
        detail={"limsup_estimate": float(dmax[-1]), "decade_maxima": dmax.tolist(),
                "stabilized": stable4}))
    return reports


def nonexistence_threshold(r: Reaction, gm: GammaModel) -> float:
    """Certified nu_0 = gamma_min / C: below it the discrete problem is trivial-only.

    Any discrete critical point u with h == 0 satisfies
    gamma_min (|u|_2^2 + |u|^2) <= nu C |u|_2^2, which forces u = 0 for
    nu < nu_0.  Needs the closed-form certificate, not a sampled constant.
    """
    if r.kind != "sublinear_g":
        raise ValueError("the nonexistence threshold applies to sublinear reactions")
    if r.C_lin is None:
        raise ValueError(
            "no certified linear bound for this family: supply C_lin with "
            "|g(t)| <= C_lin |t| to enable the threshold (a sampled constant "
            "is not a certificate)")
    return gm.gamma_min / r.C_lin


def with_nu(r: Reaction, nu: float) -> Reaction:
    if r.kind != "sublinear_g":
        raise ValueError("nu applies to sublinear reactions")
    return replace(r, nu=float(nu), _quad_cache={})


def sampled_metadata(r: Reaction, sample: Optional[SampleSpec] = None) -> dict:
    """Sampled growth estimates: ratios f(t)/t near 0 and at the horizon."""
    spec = sample if sample is not None else SampleSpec(t_max=1e6, n_samples=10_000, t_min=1e-8)
    t = spec.grid(include_zero=False)
    ratio = np.asarray(eval_f(r, t)) / t
    near0 = t <= spec.t_min * 10.0
    return {"limsup0": float(ratio[near0].max()),
            "liminf_inf": float(decade_minima(t, ratio, 1)[-1]),
            "limsup_inf": float(decade_maxima(t, ratio, 1)[-1]),
            "p_growth": r.p_growth}
