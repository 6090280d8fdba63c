"""Gauss-Legendre rules: fixed per-interval rules and a small adaptive integrator."""
from __future__ import annotations

from dataclasses import dataclass
import heapq
import math
from functools import lru_cache

import numpy as np

_EPS = np.finfo(float).eps
_MAX_STALL = 6
_MAX_ROUNDOFF = 24


@lru_cache(maxsize=64)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the `order`-point rule on [-1, 1]."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    return _reference_rule(int(order))


def mapped_rule(a, b, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Map the reference rule onto intervals [a, b].

    `a` and `b` may be arrays of the same shape S; the result has shape
    S + (order,). Degenerate intervals (b <= a) get zero weights.
    """
    x, w = gauss_legendre(order)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    half = np.where(half > 0.0, half, 0.0)
    nodes = a + half * (x + 1.0)
    return nodes, half * w


@dataclass(frozen=True)
class QuadSpec:
    """Settings for adaptive quadrature of the continuous operator."""

    tol: float = 1e-8
    order: int = 10
    max_refine: int = 50


class QuadratureError(RuntimeError):
    pass


def adaptive_gl(f, a: float, b: float, tol: float = 1e-10, order: int = 10,
                max_refine: int = 50, breakpoints=(), max_panels: int = 20000) -> float:
    """Integrate a vectorized scalar function on [a, b] to absolute error `tol`.

    Global adaptive bisection: the panel with the largest error estimate
    (difference between its `order`-point value and the sum over its two
    halves) is split until the summed estimate drops below `tol`. Interior
    `breakpoints` seed the initial panels so known kinks never sit inside one.
    """
    if not b > a:
        return 0.0
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *cuts, b]

    def rule(lo, hi):
        nodes, weights = mapped_rule(lo, hi, order)
        vals = f(nodes)
        return float(np.dot(vals, weights)), float(np.dot(np.abs(vals), weights))

    def assess(lo, hi, depth, whole, stall):
        mid = 0.5 * (lo + hi)
        left, left_abs = rule(lo, mid)
        right, right_abs = rule(mid, hi)
        err = abs(left + right - whole)
        # panels at their rounding floor cannot improve by splitting
        if (err <= 64.0 * _EPS * (left_abs + right_abs)
                or hi - lo <= 1e-13 * max(abs(lo), abs(hi)) or stall >= _MAX_STALL):
            err = 0.0
        return (-err, lo, hi, depth, left + right, left, right, stall)

    heap = [assess(lo, hi, 0, rule(lo, hi)[0], 0) for lo, hi in zip(edges[:-1], edges[1:])]
    heapq.heapify(heap)
    total_err = -sum(p[0] for p in heap)
    n_panels = len(heap)
    roundoff = 0
    while total_err > tol:
        neg_err, lo, hi, depth, _, left, right, stall = heapq.heappop(heap)
        if depth >= max_refine or n_panels >= max_panels:
            raise QuadratureError(
                f"adaptive quadrature did not converge on [{a:g}, {b:g}]: error estimate "
                f"{total_err:.3e} > {tol:.3e} after {depth} refinements of [{lo:g}, {hi:g}]")
        mid = 0.5 * (lo + hi)
        kids = [assess(lo, mid, depth + 1, left, stall + 1), assess(mid, hi, depth + 1, right, stall + 1)]
        kid_err = -(kids[0][0] + kids[1][0])
        kid_val = kids[0][4] + kids[1][4]
        # error estimates that stop shrinking under bisection are rounding noise
        # (or a non-integrable endpoint); give up on them after a few tries
        if kid_err < 0.8 * -neg_err:
            kids = [k[:-1] + (0,) for k in kids]
        elif abs(kid_val - (left + right)) <= 1e-5 * abs(kid_val):
            roundoff += 1
            if roundoff >= _MAX_ROUNDOFF:
                heap.extend(kids)
                break
        total_err += neg_err - kids[0][0] - kids[1][0]
        for kid in kids:
            heapq.heappush(heap, kid)
        n_panels += 1
        if total_err < 0.0:
            total_err = -sum(p[0] for p in heap)
    return math.fsum(p[4] for p in heap)


def adaptive_gl_log(f, anchor: float, a: float, b: float, tol: float = 1e-10,
                    order: int = 10, max_refine: int = 50, breakpoints=()) -> float:
    """`adaptive_gl` after the change of variable x = anchor + exp(s).

    Suited to integrands behaving like 1 / (x - anchor) when a sits just
    above `anchor`.
    """
    if not b > a:
        return 0.0
    if not a > anchor:
        raise ValueError("log map needs a > anchor")

    def g(s):
        shift = np.exp(s)
        return f(anchor + shift) * shift

    cuts = [np.log(p - anchor) for p in breakpoints if a < p < b]
    return adaptive_gl(g, np.log(a - anchor), np.log(b - anchor), tol=tol, order=order,
                       max_refine=max_refine, breakpoints=cuts)


def adaptive_gl_graded(f, a: float, b: float, power: float = 3.0, tol: float = 1e-10,
                       order: int = 10, max_refine: int = 50, breakpoints=()) -> float:
    """`adaptive_gl` after x = a + (b - a) u^power, clustering nodes at a.

    Tames integrable endpoint singularities (log or weak power) at x = a.
    """
    if not b > a:
        return 0.0
    span = b - a

    def g(u):
        return f(a + span * u ** power) * span * power * u ** (power - 1.0)

    cuts = [((p - a) / span) ** (1.0 / power) for p in breakpoints if a < p < b]
    return adaptive_gl(g, 0.0, 1.0, tol=tol, order=order, max_refine=max_refine,
                       breakpoints=cuts)
