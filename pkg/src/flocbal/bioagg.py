"""Particles built from elementary sediment grains joined by biological links.

A particle of length lam contains n grains of length lambda_min separated by
n - 1 biological particles of length lambda_bio. The weight f returned by
`f_bio` makes f(lam) m(lam) additive under aggregation, so the weighted
relaxation operator conserves the matching functional.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class BioParams:
    lambda_min: float
    lambda_bio: float
    M_min: float
    M_bio: float
    d: float = 1.0

    def __post_init__(self):
        if not self.lambda_min > 0.0:
            raise ValueError("lambda_min must be > 0")
        if self.lambda_bio < 0.0:
            raise ValueError("lambda_bio must be >= 0")
        if not self.M_min > 0.0:
            raise ValueError("M_min must be > 0")
        if self.M_bio < 0.0:
            raise ValueError("M_bio must be >= 0")
        if self.d < 1.0:
            raise ValueError("d must be >= 1")


def _checked(p: BioParams, lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < p.lambda_min):
        raise ValueError(f"size below lambda_min={p.lambda_min}: {np.min(lam)}")
    return lam


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def n_of_lambda(p: BioParams, lam):
    """Number of elementary grains in a particle of length lam (real-valued)."""
    lam = _checked(p, lam)
    return _out((lam + p.lambda_bio) / (p.lambda_min + p.lambda_bio))


def theta(p: BioParams, lam):
    """Length fraction of sediment grains; 1 at lambda_min, decreasing after."""
    lam = _checked(p, lam)
    return _out((lam + p.lambda_bio) * p.lambda_min / ((p.lambda_min + p.lambda_bio) * lam))


def mass_bio(p: BioParams, lam):
    lam = _checked(p, lam)
    th = theta(p, lam)
    vol = lam ** p.d
    return _out(th * vol * p.M_min + (1.0 - th) * vol * p.M_bio)


def _sediment_content(p: BioParams, x: float) -> float:
    # theta(x) x^d, the quantity that adds up under aggregation
    return (x + p.lambda_bio) * p.lambda_min * x ** (p.d - 1.0) / (p.lambda_min + p.lambda_bio)


def aggregate_length(p: BioParams, lam: float, lam2: float) -> float:
    """Length of the particle formed when lam and lam2 join.

    For d = 1 this is lam + lam2 + lambda_bio. For other d the result is the
    root of theta(x) x^d = theta(lam) lam^d + theta(lam2) lam2^d, with the
    one-dimensional form of theta.
    """
    lam, lam2 = float(lam), float(lam2)
    _checked(p, [lam, lam2])
    if p.d == 1.0:
        return lam + lam2 + p.lambda_bio
    target = _sediment_content(p, lam) + _sediment_content(p, lam2)
    lo = max(lam, lam2)
    hi = (lam ** p.d + lam2 ** p.d) ** (1.0 / p.d) + p.lambda_bio
    while _sediment_content(p, hi) < target:
        hi *= 2.0
    return brentq(lambda x: _sediment_content(p, x) - target, lo, hi,
                  xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=200)


def f_bio(p: BioParams, lam):
    """Weight theta M_min / (theta M_min + (1 - theta) M_bio), in (0, 1]."""
    th = np.asarray(theta(p, lam))
    return _out(th * p.M_min / (th * p.M_min + (1.0 - th) * p.M_bio))


def f_bio_approx(p: BioParams, lam):
    """First-order form of `f_bio` for thin, light biological links."""
    lam = _checked(p, lam)
    ratio = p.lambda_bio * p.M_bio / (p.lambda_min * p.M_min)
    return _out(1.0 - (lam - p.lambda_min) / lam * ratio)


def weight_function(p: BioParams):
    """`f_bio` as a plain callable of lam, for the weighted relaxation operator."""
    def f(lam):
        return f_bio(p, np.maximum(lam, p.lambda_min))
    return f
