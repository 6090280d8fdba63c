"""Continuous aggregation-fragmentation operator, evaluated pointwise by quadrature.

Four contributions make up the rate at size lam:

    G = - rho B_f                                   (fragmentation loss)
        - rho int rho'/m' B_a(lam, lam') dlam'       (aggregation loss)
        + m int rho'/m' B_f' [B_e(lam', lam) + large-fragment branch] dlam'
        + 1/2 m int rho'/m' rho''/m'' B_a(lam', lam'') J dlam'

with lam''^d = lam^d - lam'^d and J = (lam^d - lam'^d)^((1-d)/d) lam^(d-1).
The gain of products larger than lambda_max is dropped; `truncation_leak`
measures it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fluid import FluidField
from .kernels import KernelSet
from .quadrature import QuadSpec, adaptive_gl, adaptive_gl_log

HEAD_FRACTION = 1e-9


@dataclass(frozen=True)
class ContinuousDensity:
    """A density on [lambda_min, lambda_max], zero outside.

    `breakpoints` lists sizes where fn has kinks or jumps (for instance the
    end of its support); quadrature panels are split there.
    """

    fn: Callable
    lambda_min: float
    lambda_max: float
    breakpoints: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.lambda_min < self.lambda_max:
            raise ValueError("need 0 < lambda_min < lambda_max")
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        inside = (lam >= self.lambda_min) & (lam <= self.lambda_max)
        safe = np.clip(lam, self.lambda_min, self.lambda_max)
        return np.where(inside, self.fn(safe), 0.0)

    @property
    def cuts(self) -> tuple:
        return (self.lambda_min, self.lambda_max, *self.breakpoints)


@dataclass(frozen=True)
class GTerms:
    loss_frag: float
    loss_agg: float
    gain_frag_small: float
    gain_frag_large: float
    gain_agg: float

    @property
    def gain_frag(self) -> float:
        return self.gain_frag_small + self.gain_frag_large

    @property
    def total(self) -> float:
        return -self.loss_frag - self.loss_agg + self.gain_frag + self.gain_agg


def _integrate(fn, a, b, cuts, quad: QuadSpec, tol: float):
    return adaptive_gl(fn, a, b, tol=tol, order=quad.order,
                       max_refine=quad.max_refine, breakpoints=cuts)


def g_terms(ks: KernelSet, F: FluidField, rho: ContinuousDensity, lam: float,
            quad: QuadSpec = QuadSpec(), _tol: float | None = None) -> GTerms:
    """The individual contributions to the operator at one size."""
    lam = float(lam)
    tol = quad.tol if _tol is None else _tol
    d = ks.d
    lo, hi = rho.lambda_min, rho.lambda_max
    cuts = rho.cuts + (ks.fragmentation_threshold,)
    m = float(ks.mass_of(lam))
    r = float(rho(lam))

    loss_frag = r * float(ks.B_f(F, lam))

    loss_agg = 0.0
    if r != 0.0 and ks.has_aggregation:
        loss_agg = r * _integrate(
            lambda x: rho(x) / ks.mass_of(x) * ks.B_a(F, lam, x), lo, hi, cuts, quad, tol)

    small = large = 0.0
    if ks.has_fragmentation:
        thr = ks.fragmentation_threshold
        # lam is the smaller fragment of a parent lam' >= 2^(1/d) lam
        a = max(2.0 ** (1.0 / d) * lam, thr, lo)
        if a < hi:
            # daughter densities may blow up like 1/(x - thr) as the parent
            # approaches the fragmentation threshold; a log map absorbs that.
            # At lam = lambda_min exactly the integral may diverge; it is then
            # taken from a few ulps above the threshold, i.e. the lambda_min+ limit.
            fn = lambda x: rho(x) / ks.mass_of(x) * ks.B_f(F, x) * ks.B_e(F, x, lam)
            a = max(a, thr * (1.0 + 4.0 * np.finfo(float).eps))
            small = m * adaptive_gl_log(fn, thr, a, hi, tol=tol, order=quad.order,
                                        max_refine=quad.max_refine, breakpoints=cuts)
        # lam is the larger fragment: its partner (lam'^d - lam^d)^(1/d) >= lambda_min
        a = max((lam ** d + ks.lambda_min ** d) ** (1.0 / d), thr, lo)
        b = min(2.0 ** (1.0 / d) * lam, hi)
        if a < b:
            def large_integrand(x):
                gap = x ** d - lam ** d
                partner = gap ** (1.0 / d)
                jac = gap ** ((1.0 - d) / d) * lam ** (d - 1.0)
                return rho(x) / ks.mass_of(x) * ks.B_f(F, x) * ks.B_e(F, x, partner) * jac
            large = m * _integrate(large_integrand, a, b, cuts, quad, tol)

    gain = 0.0
    if ks.has_aggregation and lam ** d > 2.0 * lo ** d:
        # partner (lam^d - x^d)^(1/d) must lie in [lo, hi]
        a = max(lo, (max(lam ** d - hi ** d, 0.0)) ** (1.0 / d))
        b = min(hi, (lam ** d - lo ** d) ** (1.0 / d))
        if a < b:
            mapped = tuple((lam ** d - c ** d) ** (1.0 / d) for c in rho.cuts if c ** d < lam ** d)

            def agg_integrand(x):
                gap = lam ** d - x ** d
                partner = gap ** (1.0 / d)
                jac = gap ** ((1.0 - d) / d) * lam ** (d - 1.0)
                return (rho(x) / ks.mass_of(x) * rho(partner) / ks.mass_of(partner)
                        * ks.B_a(F, x, partner) * jac)
            gain = 0.5 * m * _integrate(agg_integrand, a, b, rho.cuts + mapped, quad, tol)

    return GTerms(loss_frag, loss_agg, small, large, gain)


def g_continuous(ks: KernelSet, F: FluidField, rho: ContinuousDensity, lam: float,
                 quad: QuadSpec = QuadSpec()) -> float:
    """Net mass-density rate at size lam."""
    if not rho.lambda_min <= lam <= rho.lambda_max:
        raise ValueError(f"size {lam} outside [{rho.lambda_min}, {rho.lambda_max}]")
    return g_terms(ks, F, rho, lam, quad).total


def _outer_cuts(ks: KernelSet, rho: ContinuousDensity) -> tuple:
    d = ks.d
    s = 2.0 ** (1.0 / d)
    base = rho.cuts + (ks.fragmentation_threshold,)
    derived = []
    for c in base:
        derived += [c * s, c / s]
        for c2 in base:
            derived.append((c ** d + c2 ** d) ** (1.0 / d))
            if c > c2:
                derived.append((c ** d - c2 ** d) ** (1.0 / d))
    return base + tuple(derived)


def integrate_terms(ks: KernelSet, F: FluidField, rho: ContinuousDensity,
                    a: float, b: float, quad: QuadSpec = QuadSpec(),
                    select: Callable[[GTerms], float] = lambda t: t.total) -> float:
    """Integral over [a, b] of a chosen combination of the operator terms."""
    inner_tol = 0.1 * quad.tol / (b - a)

    def f(xs):
        return np.array([select(g_terms(ks, F, rho, x, quad, inner_tol)) for x in xs])
    cuts = _outer_cuts(ks, rho)
    if a == rho.lambda_min and ks.has_fragmentation:
        # The small-fragment gain behaves like A + B log(lam - lambda_min). A log
        # map covers [a + delta, first]; on the sliver [a, a + delta] that model
        # integrates to delta * (G(a + delta) - B), with B read off G at delta and
        # e * delta. Sampling closer would only see daughter densities dominated
        # by cancellation near the fragmentation threshold.
        first = min([c for c in cuts if a + 1e-6 * (b - a) < c < b] + [b])
        delta = HEAD_FRACTION * (first - a)
        g1, g2 = f(np.array([a + delta, a + np.e * delta]))
        sliver = delta * (2.0 * g1 - g2)
        head = adaptive_gl_log(f, a, a + delta, first, tol=quad.tol * (first - a) / (b - a),
                               order=quad.order, max_refine=quad.max_refine)
        return sliver + head + adaptive_gl(f, first, b, tol=quad.tol * (b - first) / (b - a),
                                           order=quad.order, max_refine=quad.max_refine,
                                           breakpoints=cuts)
    return adaptive_gl(f, a, b, tol=quad.tol, order=quad.order,
                       max_refine=quad.max_refine, breakpoints=cuts)


def mass_balance(ks: KernelSet, F: FluidField, rho: ContinuousDensity,
                 quad: QuadSpec = QuadSpec()) -> float:
    """Integral of the operator over [lambda_min, lambda_max].

    Zero up to quadrature error when no aggregate outgrows lambda_max;
    otherwise about minus `truncation_leak`.
    """
    return integrate_terms(ks, F, rho, rho.lambda_min, rho.lambda_max, quad)


def truncation_leak(ks: KernelSet, F: FluidField, rho: ContinuousDensity,
                    quad: QuadSpec = QuadSpec()) -> float:
    """Mass rate of aggregates formed above lambda_max (dropped by the operator)."""
    top = 2.0 ** (1.0 / ks.d) * rho.lambda_max
    masked = ContinuousDensity(lambda x: np.where(x <= rho.lambda_max, rho.fn(np.minimum(x, rho.lambda_max)), 0.0),
                               rho.lambda_min, top, rho.breakpoints + (rho.lambda_max,))
    return integrate_terms(ks, F, masked, rho.lambda_max, top, quad, select=lambda t: t.gain_agg)
