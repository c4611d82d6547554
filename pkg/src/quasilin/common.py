"""Shared report types and sampling helpers used by the audit machinery."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

HOLDS = "holds-on-sample"
VIOLATED = "violated-at-t"


class AccuracyError(RuntimeError):
    """Raised when a quadrature cannot reach its requested tolerance."""


@dataclass(frozen=True)
class SampleSpec:
    """Log-spaced sampling grid for hypothesis audits.

    The grid covers [t_min, t_max] with n_samples points; bound checks
    prepend t = 0.  limit_tol is the acceptance band for limit checks
    at the largest decade.
    """

    t_max: float = 1e8
    n_samples: int = 10_000
    t_min: float = 1e-8
    limit_tol: float = 1e-2

    def __post_init__(self):
        if self.t_max <= self.t_min or self.t_min <= 0:
            raise ValueError("need 0 < t_min < t_max")
        if self.n_samples < 10:
            raise ValueError("n_samples too small for a meaningful audit")

    def grid(self, include_zero: bool = True) -> np.ndarray:
        g = np.logspace(np.log10(self.t_min), np.log10(self.t_max), self.n_samples)
        if include_zero:
            g = np.concatenate(([0.0], g))
        return g


@dataclass
class HypothesisReport:
    """Sampled verdict for one structural hypothesis.

    Verdicts are falsification-only: 'holds-on-sample' never certifies
    the hypothesis on all of [0, inf).
    """

    hypothesis: str
    verdict: str
    witness_t: Optional[float] = None
    margin: Optional[float] = None
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "verdict": self.verdict,
            "witness_t": self.witness_t,
            "margin": self.margin,
            "detail": self.detail,
        }


def decade_maxima(t: np.ndarray, y: np.ndarray, n_decades: int) -> np.ndarray:
    """Per-decade maxima of y over the last n_decades of the positive grid t."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    top = np.log10(t[-1])
    out = []
    for k in range(n_decades, 0, -1):
        mask = (t > 10.0 ** (top - k)) & (t <= 10.0 ** (top - k + 1))
        if not mask.any():
            raise ValueError("sample grid too coarse for decade statistics")
        out.append(float(y[mask].max()))
    return np.array(out)


def decade_minima(t: np.ndarray, y: np.ndarray, n_decades: int) -> np.ndarray:
    return -decade_maxima(t, -np.asarray(y, dtype=float), n_decades)
