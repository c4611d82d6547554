"""Diffusion densities gamma, their antiderivatives and structural audits.

A GammaModel carries a positive bounded density gamma on [0, inf) together
with Gamma(t) = int_0^t gamma.  The audits check, on finite sample grids,
the bound sandwich gamma_min <= gamma <= gamma_max, the limit at infinity,
and the (strict) convexity of t -> Gamma(t^2) through the equivalent
monotonicity of m(t) = t * gamma(t^2 / 2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .common import HOLDS, VIOLATED, AccuracyError, HypothesisReport, SampleSpec

QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class GammaModel:
    """Density gamma with bounds metadata.  Build via the class methods."""

    kind: str
    params: dict
    gamma_min: float
    gamma_max: float
    gamma_inf: Optional[float] = None
    has_closed_gamma_integral: bool = True
    # knots for the tabulated kind; None otherwise
    knots_t: Optional[np.ndarray] = None
    knots_g: Optional[np.ndarray] = None
    _quad_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def constant(cls, c: float) -> "GammaModel":
        if c <= 0:
            raise ValueError("constant density must be positive")
        return cls(kind="constant", params={"c": float(c)},
                   gamma_min=float(c), gamma_max=float(c), gamma_inf=float(c))

    @classmethod
    def double_phase(cls, A: float, B: float, p: float) -> "GammaModel":
        """Gamma(t) = A t + B ((1 + t)^(p/2) - 1) with A, B > 0, 1 < p < 2."""
        if A <= 0 or B <= 0:
            raise ValueError("double_phase needs A > 0 and B > 0")
        if not (1.0 < p < 2.0):
            raise ValueError("double_phase needs p in (1, 2)")
        return cls(kind="double_phase", params={"A": float(A), "B": float(B), "p": float(p)},
                   gamma_min=float(A), gamma_max=float(A + B * p / 2.0), gamma_inf=float(A))

    @classmethod
    def rational_decay(cls, a: float, b: float, require_convex: bool = True) -> "GammaModel":
        """gamma(t) = a + b / (1 + t).

        The monotonicity function m(t) = t gamma(t^2/2) has derivative
        a + b (1 - s) / (1 + s)^2 at s = t^2/2, minimized at s = 3 with
        value a - b/8, so b < 8a guarantees strict convexity.  Pass
        require_convex=False to build a deliberately non-convex witness
        model.
        """
        if a <= 0 or b <= 0:
            raise ValueError("rational_decay needs a > 0 and b > 0")
        if require_convex and b >= 8.0 * a:
            raise ValueError("rational_decay needs b < 8a for strict convexity "
                             "(pass require_convex=False to override)")
        return cls(kind="rational_decay", params={"a": float(a), "b": float(b)},
                   gamma_min=float(a), gamma_max=float(a + b), gamma_inf=float(a))

    @classmethod
    def tabulated(cls, t: np.ndarray, g: np.ndarray,
                  closed_integral: bool = True) -> "GammaModel":
        """Piecewise-linear density through (t_i, g_i); constant beyond the last knot.

        With closed_integral=False the antiderivative falls back to adaptive
        quadrature (exercises the generic integration path).
        """
        t = np.asarray(t, dtype=float)
        g = np.asarray(g, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 2:
            raise ValueError("need matching 1-d knot arrays with >= 2 points")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("knots must start at 0 and strictly increase")
        return cls(kind="user_tabulated", params={},
                   gamma_min=float(g.min()), gamma_max=float(g.max()),
                   gamma_inf=float(g[-1]),
                   has_closed_gamma_integral=closed_integral,
                   knots_t=t, knots_g=g)


def eval_gamma(model: GammaModel, t):
    """gamma(t) for scalar or array t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("gamma is defined on [0, inf)")
    if model.kind == "constant":
        out = np.full_like(t, model.params["c"])
    elif model.kind == "double_phase":
        A, B, p = model.params["A"], model.params["B"], model.params["p"]
        out = A + B * (p / 2.0) * (1.0 + t) ** (p / 2.0 - 1.0)
    elif model.kind == "rational_decay":
        a, b = model.params["a"], model.params["b"]
        out = a + b / (1.0 + t)
    elif model.kind == "user_tabulated":
        out = np.interp(t, model.knots_t, model.knots_g)
    else:
        raise ValueError(f"unknown gamma kind {model.kind!r}")
    return out if out.ndim else float(out)


def _gamma_quad(model: GammaModel, t: float) -> float:
    key = float(t)
    cached = model._quad_cache.get(key)
    if cached is not None:
        return cached
    breaks = None
    if model.knots_t is not None:
        inside = model.knots_t[(model.knots_t > 0.0) & (model.knots_t < key)]
        if inside.size:
            breaks = inside[:: max(1, inside.size // 90 + 1)]   # quad caps breakpoints
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda s: eval_gamma(model, s), 0.0, key,
                                  epsabs=0.0, epsrel=QUAD_RTOL, limit=200, points=breaks)
    if err > QUAD_RTOL * max(abs(val), 1e-300) * 10.0:
        raise AccuracyError(
            f"Gamma quadrature at t={t:g}: error estimate {err:g} exceeds "
            f"relative tolerance {QUAD_RTOL:g}")
    model._quad_cache[key] = val
    return val


def eval_Gamma(model: GammaModel, t):
    """Gamma(t) = int_0^t gamma(s) ds; closed form where available."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("Gamma is defined on [0, inf)")
    if model.kind == "constant":
        out = model.params["c"] * t
    elif model.kind == "double_phase":
        A, B, p = model.params["A"], model.params["B"], model.params["p"]
        out = A * t + B * ((1.0 + t) ** (p / 2.0) - 1.0)
    elif model.kind == "rational_decay":
        a, b = model.params["a"], model.params["b"]
        out = a * t + b * np.log1p(t)
    elif model.kind == "user_tabulated" and model.has_closed_gamma_integral:
        out = _tabulated_integral(model, t)
    else:
        out = np.vectorize(lambda x: _gamma_quad(model, x))(t)
    return out if out.ndim else float(out)


def _tabulated_integral(model: GammaModel, t: np.ndarray) -> np.ndarray:
    # exact integral of the piecewise-linear interpolant
    kt, kg = model.knots_t, model.knots_g
    seg = 0.5 * (kg[1:] + kg[:-1]) * np.diff(kt)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    idx = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, kt.size - 1)
    base = cum[idx]
    t0, g0 = kt[idx], kg[idx]
    inside = idx < kt.size - 1
    dt = t - t0
    out = np.where(
        inside,
        base + g0 * dt + np.where(inside, 0.5 * _slope(model, idx) * dt * dt, 0.0),
        base + kg[-1] * (t - kt[-1]),
    )
    return out


def _slope(model: GammaModel, idx: np.ndarray) -> np.ndarray:
    kt, kg = model.knots_t, model.knots_g
    i = np.clip(idx, 0, kt.size - 2)
    return (kg[i + 1] - kg[i]) / (kt[i + 1] - kt[i])


def eval_K(model: GammaModel, t):
    """K(t) = Gamma(t) - gamma(t) t, a boundedness diagnostic only."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(eval_Gamma(model, t)) - np.asarray(eval_gamma(model, t)) * t
    return out if out.ndim else float(out)


def monotonicity_function(model: GammaModel, t):
    """m(t) = t gamma(t^2 / 2); strictly increasing iff Gamma(t^2) strictly convex."""
    t = np.asarray(t, dtype=float)
    out = t * np.asarray(eval_gamma(model, t * t / 2.0))
    return out if out.ndim else float(out)


def check_bounds_and_limit(model: GammaModel, sample: SampleSpec = SampleSpec()) -> list[HypothesisReport]:
    """Sampled verdicts for the bound sandwich and, when set, the limit at infinity."""
    t = sample.grid(include_zero=True)
    g = np.asarray(eval_gamma(model, t))
    reports = []

    slack = 1e-12
    low_bad = (g < model.gamma_min - slack) | (g <= 0.0)    # density must stay positive
    high_bad = g > model.gamma_max + slack
    bad = low_bad | high_bad
    if bad.any():
        i = int(np.argmax(bad))
        reports.append(HypothesisReport(
            "bounds", VIOLATED, witness_t=float(t[i]),
            margin=float(min(g[i] - model.gamma_min, model.gamma_max - g[i])),
            detail={"gamma_at_witness": float(g[i])}))
    else:
        reports.append(HypothesisReport(
            "bounds", HOLDS,
            margin=float(min((g - model.gamma_min).min(), (model.gamma_max - g).min())),
            detail={"t_max": sample.t_max, "n_samples": sample.n_samples}))

    if model.gamma_inf is not None:
        pos = t[1:]
        dev = np.abs(np.asarray(eval_gamma(model, pos)) - model.gamma_inf)
        at_horizon = float(dev[-1])
        last = pos >= sample.t_max / 10.0
        monotone_tail = bool(np.all(np.diff(dev[last]) <= 1e-12))
        if at_horizon <= sample.limit_tol and monotone_tail:
            reports.append(HypothesisReport(
                "limit-at-infinity", HOLDS, margin=float(sample.limit_tol - at_horizon),
                detail={"deviation_at_horizon": at_horizon, "gamma_inf": model.gamma_inf}))
        else:
            reports.append(HypothesisReport(
                "limit-at-infinity", VIOLATED, witness_t=float(pos[-1]),
                margin=float(sample.limit_tol - at_horizon),
                detail={"deviation_at_horizon": at_horizon,
                        "tail_monotone": monotone_tail, "gamma_inf": model.gamma_inf}))
    return reports


def check_convexity(model: GammaModel, sample: SampleSpec = SampleSpec(),
                    strict: bool = False) -> HypothesisReport:
    """Convexity of t -> Gamma(t^2) via monotonicity of m(t) = t gamma(t^2/2).

    Strict mode demands a positive increment between consecutive samples.
    The reported witness is the left point of the first violating pair.
    """
    # m(t) probes gamma at t^2/2, so cover the configured horizon in s
    t = np.logspace(np.log10(max(sample.t_min, 1e-8)),
                    0.5 * np.log10(2.0 * sample.t_max), sample.n_samples)
    m = np.asarray(monotonicity_function(model, t))
    dm = np.diff(m)
    name = "q4-strict-convexity" if strict else "q2-convexity"
    if strict:
        bad = dm <= 0.0
    else:
        bad = dm < -1e-12 * np.maximum(np.abs(m[:-1]), 1.0)
    if bad.any():
        i = int(np.argmax(bad))
        return HypothesisReport(
            name, VIOLATED, witness_t=float(t[i]), margin=float(dm[i]),
            detail={"pair": [float(t[i]), float(t[i + 1])],
                    "m_pair": [float(m[i]), float(m[i + 1])]})
    return HypothesisReport(name, HOLDS, margin=float(dm.min()),
                            detail={"n_samples": sample.n_samples})


def bounded_remainder_diagnostic(model: GammaModel,
                                 sample: SampleSpec = SampleSpec()) -> HypothesisReport:
    """Sampled verdict on whether K(t) = Gamma(t) - gamma(t) t stays bounded.

    Monotone growth of |K| across the last three decades is reported as a
    violation with the horizon as witness; a stabilized tail only means
    'plausibly bounded on this horizon', never a proof.
    """
    decades = np.logspace(max(0.0, np.log10(sample.t_max) - 3.0),
                          np.log10(sample.t_max), 4)
    ks = np.abs(np.asarray(eval_K(model, decades)))
    growing = bool(np.all(np.diff(ks) > 0.0)) and ks[-1] > 10.0 * max(ks[0], 1e-300)
    if growing:
        return HypothesisReport("bounded-remainder", VIOLATED,
                                witness_t=float(decades[-1]), margin=float(ks[-1]),
                                detail={"sampled_t": decades.tolist(), "K": ks.tolist()})
    return HypothesisReport("bounded-remainder", HOLDS, margin=float(ks[-1]),
                            detail={"sampled_t": decades.tolist(), "K": ks.tolist()})


def beta(model: GammaModel, xi: np.ndarray) -> np.ndarray:
    """beta(xi) = gamma(|xi|^2 / 2) xi, vectorized over leading axes."""
    xi = np.asarray(xi, dtype=float)
    s = 0.5 * np.sum(xi * xi, axis=-1)
    return np.asarray(eval_gamma(model, s))[..., None] * xi


def beta_violation_from_convexity(model: GammaModel, dim: int = 2,
                                  sample: SampleSpec = SampleSpec()) -> Optional[tuple]:
    """A colinear pair (xi, xi_bar) violating strict monotonicity of beta, if any.

    Uses the convexity-check witness: for xi = t e, xi_bar = t_bar e the
    monotonicity inner product reduces to (m(t) - m(t_bar)) (t - t_bar).
    The far point is picked at the sampled minimum of m beyond the witness,
    which maximizes the violation.
    """
    rep = check_convexity(model, sample, strict=True)
    if rep.holds:
        return None
    t1 = rep.detail["pair"][0]
    scan = np.linspace(t1, 8.0 * t1, 400)
    m = np.asarray(monotonicity_function(model, scan))
    t2 = float(scan[np.argmin(m)])
    e = np.zeros(dim)
    e[0] = 1.0
    return t1 * e, t2 * e


def zero_modulus_profile(model: GammaModel, s: np.ndarray) -> np.ndarray:
    """G(s) = 2 H(s/2) / s with H(s) = gamma(0) s - Gamma(s), for s > 0.

    Diagnostic for the continuity modulus of gamma at 0; the audit can
    report its sampled decay but cannot certify the limit.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("profile needs s > 0")
    g0 = eval_gamma(model, 0.0)
    return g0 - 2.0 * np.asarray(eval_Gamma(model, s / 2.0)) / s
