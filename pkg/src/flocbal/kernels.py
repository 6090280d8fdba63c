"""Mass law and size maps, plus the aggregation / fragmentation kernels.

All kernels are evaluated with numpy broadcasting. Built-in families:

* aggregation: ``constant`` beta0; ``sum`` beta0 (lam^d + lam2^d);
  ``shear`` beta0 (lam + lam2)^3 sqrt(eps / nu_w)
* fragmentation rate: ``constant`` k_f; ``power`` k_f (lam / lambda_min)^p sqrt(eps)
* daughter density of the smaller fragment: ``uniform`` in length or
  ``uniform_volume`` in lam'^d, both on [lambda_min, (lam^d / 2)^(1/d)]

The fragmentation rate is forced to zero when lam^d < 2 lambda_min^d, since
no admissible pair of fragments exists there.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .fluid import FluidField
from .quadrature import adaptive_gl


# -- aggregation families ----------------------------------------------------

@dataclass(frozen=True)
class ConstantAggregation:
    beta0: float = 1.0
    name = "constant"

    def __call__(self, F, lam, lam2, ks):
        return np.full(np.broadcast(lam, lam2).shape, self.beta0)


@dataclass(frozen=True)
class SumAggregation:
    beta0: float = 1.0
    name = "sum"

    def __call__(self, F, lam, lam2, ks):
        return self.beta0 * (np.power(lam, ks.d) + np.power(lam2, ks.d))


@dataclass(frozen=True)
class ShearAggregation:
    beta0: float = 1.0
    nu_w: float = 1.0e-6
    name = "shear"

    def __call__(self, F, lam, lam2, ks):
        return self.beta0 * (np.asarray(lam) + lam2) ** 3 * np.sqrt(F.eps / self.nu_w)


# -- fragmentation rate families --------------------------------------------

@dataclass(frozen=True)
class ConstantFragmentation:
    k_f: float = 1.0
    name = "constant"

    def __call__(self, F, lam, ks):
        return np.full(np.shape(lam), self.k_f)


@dataclass(frozen=True)
class PowerFragmentation:
    k_f: float = 1.0
    p: float = 1.0
    name = "power"

    def __call__(self, F, lam, ks):
        return self.k_f * (np.asarray(lam) / ks.lambda_min) ** self.p * np.sqrt(F.eps)


@dataclass(frozen=True)
class NoFragmentation:
    name = "none"

    def __call__(self, F, lam, ks):
        return np.zeros(np.shape(lam))


@dataclass(frozen=True)
class NoAggregation:
    name = "none"

    def __call__(self, F, lam, lam2, ks):
        return np.zeros(np.broadcast(lam, lam2).shape)


# -- daughter distributions --------------------------------------------------

@dataclass(frozen=True)
class UniformDaughter:
    """Smaller fragment uniform in length on [lambda_min, (lam^d/2)^(1/d)]."""

    name = "uniform"

    def __call__(self, F, lam, lam2, ks):
        lam, lam2 = np.broadcast_arrays(np.asarray(lam, float), np.asarray(lam2, float))
        h = ks.half_size(lam)
        span = h - ks.lambda_min
        inside = (lam2 >= ks.lambda_min) & (lam2 <= h) & (span > 0.0)
        return np.where(inside, 1.0 / np.where(span > 0.0, span, 1.0), 0.0)

    def sample(self, lam, u, ks):
        return ks.lambda_min + u * (ks.half_size(lam) - ks.lambda_min)


@dataclass(frozen=True)
class UniformVolumeDaughter:
    """Smaller fragment uniform in lam'^d on the same support."""

    name = "uniform_volume"

    def __call__(self, F, lam, lam2, ks):
        lam, lam2 = np.broadcast_arrays(np.asarray(lam, float), np.asarray(lam2, float))
        d = ks.d
        h = ks.half_size(lam)
        span = h ** d - ks.lambda_min ** d
        inside = (lam2 >= ks.lambda_min) & (lam2 <= h) & (span > 0.0)
        dens = d * np.power(np.where(inside, lam2, 1.0), d - 1.0) / np.where(span > 0.0, span, 1.0)
        return np.where(inside, dens, 0.0)

    def sample(self, lam, u, ks):
        d = ks.d
        return (ks.lambda_min ** d + u * (ks.half_size(lam) ** d - ks.lambda_min ** d)) ** (1.0 / d)


@dataclass(frozen=True)
class _Custom:
    fn: Callable
    name: str = "custom"

    def __call__(self, F, *args):
        return np.asarray(self.fn(F, *args[:-1]), dtype=float)


AGGREGATION_FAMILIES = {"constant": ConstantAggregation, "sum": SumAggregation,
                        "shear": ShearAggregation, "none": NoAggregation}
FRAGMENTATION_FAMILIES = {"constant": ConstantFragmentation, "power": PowerFragmentation,
                          "none": NoFragmentation}
DAUGHTER_FAMILIES = {"uniform": UniformDaughter, "uniform_volume": UniformVolumeDaughter}


def _wrap(obj):
    if hasattr(obj, "name"):
        return obj
    if callable(obj):
        return _Custom(obj)
    raise TypeError(f"kernel must be callable, got {type(obj).__name__}")


@dataclass(frozen=True)
class KernelSet:
    """The kernels of one model for d-dimensional particles: rates plus a daughter density.

    Plain callables are accepted for any of the three kernels, with the
    signatures ``B_a(F, lam, lam2)``, ``B_f(F, lam)``, ``B_e(F, lam, lam2)``.
    """

    lambda_min: float
    d: float = 1.0
    N_d: float = 1.0
    aggregation: object = field(default_factory=ConstantAggregation)
    fragmentation: object = field(default_factory=NoFragmentation)
    daughter: object = field(default_factory=UniformDaughter)

    def __post_init__(self):
        if not self.lambda_min > 0.0:
            raise ValueError("lambda_min must be > 0")
        if self.d < 1.0:
            raise ValueError("d must be >= 1")
        if not self.N_d > 0.0:
            raise ValueError("N_d must be > 0")
        for name in ("aggregation", "fragmentation", "daughter"):
            object.__setattr__(self, name, _wrap(getattr(self, name)))

    # kernel evaluation
    def B_a(self, F: FluidField, lam, lam2):
        return self.aggregation(F, lam, lam2, self)

    def B_f(self, F: FluidField, lam):
        lam = np.asarray(lam, dtype=float)
        rate = self.fragmentation(F, lam, self)
        return np.where(self.can_fragment(lam), rate, 0.0)

    def B_e(self, F: FluidField, lam, lam2):
        return self.daughter(F, lam, lam2, self)

    def can_fragment(self, lam):
        return np.power(lam, self.d) >= 2.0 * self.lambda_min ** self.d

    @property
    def fragmentation_threshold(self) -> float:
        """Smallest size able to break into two admissible fragments."""
        return 2.0 ** (1.0 / self.d) * self.lambda_min

    @property
    def has_aggregation(self) -> bool:
        return not isinstance(self.aggregation, NoAggregation)

    @property
    def has_fragmentation(self) -> bool:
        return not isinstance(self.fragmentation, NoFragmentation)

    # geometry
    def mass_of(self, lam):
        return self.N_d * np.power(lam, self.d)

    def agg_size(self, lam, lam2):
        return (np.power(lam, self.d) + np.power(lam2, self.d)) ** (1.0 / self.d)

    def frag_complement(self, lam, lam2):
        lam, lam2 = np.asarray(lam, float), np.asarray(lam2, float)
        if np.any(lam2 > lam):
            raise ValueError("fragment larger than its parent")
        out = (lam ** self.d - lam2 ** self.d) ** (1.0 / self.d)
        return float(out) if out.ndim == 0 else out

    def half_size(self, lam):
        """(lam^d / 2)^(1/d): upper bound of the smaller fragment."""
        return np.asarray(lam, float) * 0.5 ** (1.0 / self.d)

    def b_e_tilde(self, F: FluidField, lam, lam2):
        """Density of the larger fragment lam2 on [(lam^d/2)^(1/d), lam]."""
        lam, lam2 = np.broadcast_arrays(np.asarray(lam, float), np.asarray(lam2, float))
        h = self.half_size(lam)
        if np.any(lam2 < h * (1.0 - 1e-14)) or np.any(lam2 > lam):
            raise ValueError("larger fragment outside [(lam^d/2)^(1/d), lam]")
        return self._b_e_tilde(F, lam, lam2)

    def _b_e_tilde(self, F, lam, lam2):
        d = self.d
        gap = np.maximum(lam ** d - lam2 ** d, 0.0)
        small = gap ** (1.0 / d)
        ok = small >= self.lambda_min
        small_safe = np.where(ok, small, self.lambda_min)
        jac = np.power(np.where(ok, gap, 1.0), (1.0 - d) / d) * np.power(lam2, d - 1.0)
        out = np.where(ok, self.B_e(F, lam, small_safe) * jac, 0.0)
        return float(out) if out.ndim == 0 else out

    def describe(self) -> dict:
        def fam(obj):
            if isinstance(obj, _Custom):
                return {"family": "custom", "fn": getattr(obj.fn, "__qualname__", repr(obj.fn))}
            return {"family": obj.name, **asdict(obj)}
        return {"lambda_min": self.lambda_min, "d": self.d, "N_d": self.N_d,
                "aggregation": fam(self.aggregation),
                "fragmentation": fam(self.fragmentation),
                "daughter": fam(self.daughter)}

    def digest(self, F: FluidField | None = None) -> bytes:
        payload = self.describe()
        if F is not None:
            payload["fluid"] = list(F.as_tuple())
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).digest()


def make_kernels(lambda_min: float, d: float = 1.0, N_d: float = 1.0,
                 aggregation: str = "constant", aggregation_params: dict | None = None,
                 fragmentation: str = "none", fragmentation_params: dict | None = None,
                 daughter: str = "uniform") -> KernelSet:
    """Build a KernelSet from family names, as used by config files."""
    try:
        agg = AGGREGATION_FAMILIES[aggregation](**(aggregation_params or {}))
        frag = FRAGMENTATION_FAMILIES[fragmentation](**(fragmentation_params or {}))
        dau = DAUGHTER_FAMILIES[daughter]()
    except KeyError as exc:
        raise ValueError(f"unknown kernel family {exc.args[0]!r}") from None
    return KernelSet(lambda_min, d, N_d, agg, frag, dau)


# -- validation --------------------------------------------------------------

@dataclass
class Violation:
    check: str
    where: tuple
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    max_normalization_error: float = 0.0
    max_tilde_normalization_error: float = 0.0
    n_probes: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [f"kernel validation: {'PASS' if self.ok else 'FAIL'} "
               f"({self.n_probes} probe sizes, {len(self.violations)} violations)",
               f"  max |int B_e - 1|       = {self.max_normalization_error:.3e}",
               f"  max |int B_e_tilde - 1| = {self.max_tilde_normalization_error:.3e}"]
        out += [f"  {v.check} at {v.where}: {v.detail}" for v in self.violations]
        return out


def validate(ks: KernelSet, F: FluidField, probe_grid, norm_tol: float = 1e-10,
             tilde_tol: float = 1e-8, max_reported: int = 20) -> ValidationReport:
    """Check symmetry, support, the fragmentation guard and normalization.

    Violations are collected, not raised.
    """
    rep = ValidationReport()
    probes = np.unique(np.concatenate([probe_grid.edges, probe_grid.midpoints]))
    rep.n_probes = probes.size

    def add(check, where, detail):
        if len(rep.violations) < max_reported:
            rep.violations.append(Violation(check, where, detail))

    a, b = np.meshgrid(probes, probes, indexing="ij")
    fwd = np.asarray(ks.B_a(F, a, b))
    bwd = np.asarray(ks.B_a(F, b, a))
    for i, j in zip(*np.nonzero(fwd != bwd)):
        add("symmetry", (float(a[i, j]), float(b[i, j])),
            f"B_a={fwd[i, j]!r} but swapped B_a={bwd[i, j]!r}")
    if np.any(fwd < 0.0):
        i, j = np.argwhere(fwd < 0.0)[0]
        add("positivity", (float(a[i, j]), float(b[i, j])), "negative aggregation rate")

    bf = np.asarray(ks.B_f(F, probes))
    if np.any(bf < 0.0):
        add("positivity", (float(probes[bf < 0.0][0]),), "negative fragmentation rate")
    below = ~ks.can_fragment(probes)
    for lam in probes[below & (bf != 0.0)]:
        add("guard", (float(lam),), "B_f > 0 where no admissible fragments exist")

    frac = np.linspace(0.0, 1.0, 33)
    for lam, rate in zip(probes, bf):
        h = float(ks.half_size(lam))
        lmin = ks.lambda_min
        outside = np.concatenate([lmin * (0.5 + 0.5 * frac[:-1]),
                                  h + (lam - h) * frac[1:]]) if lam > h else lmin * frac[:-1]
        vals = np.asarray(ks.B_e(F, np.full_like(outside, lam), outside))
        bad = outside[vals != 0.0]
        bad = bad[(bad < lmin) | (bad > h)]
        if bad.size:
            add("support", (float(lam), float(bad[0])), f"B_e={float(ks.B_e(F, lam, bad[0]))!r} outside support")
        if rate <= 0.0 or h <= lmin:
            continue
        fn = lambda x, lam=lam: ks.B_e(F, np.full_like(x, lam), x)
        norm = adaptive_gl(fn, lmin, h, tol=1e-13, order=12)
        err = abs(norm - 1.0)
        rep.max_normalization_error = max(rep.max_normalization_error, err)
        if err > norm_tol:
            add("normalization", (float(lam),), f"int B_e = {norm!r}")
        top = (lam ** ks.d - lmin ** ks.d) ** (1.0 / ks.d)
        fn_t = lambda x, lam=lam: ks._b_e_tilde(F, np.full_like(x, lam), x)
        norm_t = adaptive_gl(fn_t, h, top, tol=1e-11, order=12)
        err_t = abs(norm_t - 1.0)
        rep.max_tilde_normalization_error = max(rep.max_tilde_normalization_error, err_t)
        if err_t > tilde_tol:
            add("tilde_normalization", (float(lam),), f"int B_e_tilde = {norm_t!r}")
    return rep
