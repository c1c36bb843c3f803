"""Parametric service and interarrival laws.

Each family exposes its tail ``P{X > x}``, the integrated tail
``min(1, int_x^inf tail)``, an inverse-CDF sampler and the exact mean.
Families with infinite mean are rejected at construction because every
tail formula in :mod:`heavyq.asymp` needs a finite mean.

Configuration files describe a law as a table with a ``family`` key plus
named parameters, e.g. ``{ family = "pareto", alpha = 2.5, xm = 1.0 }``.
For most families ``mean`` may replace the scale parameter.
"""

import functools
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import optimize, special

from . import quad
from .errors import ConfigError, NonIntegrableTail

QUAD_REL_TOL = 1e-11


class DistributionSpec:
    """Common interface of the families below."""

    family = ""
    closed_form_integral = False

    def tail(self, x):
        raise NotImplementedError

    def pdf(self, x):
        """Density of the absolutely continuous part."""
        raise NotImplementedError

    def atoms(self):
        """List of ``(location, mass)`` point masses."""
        return []

    def ppf(self, u):
        raise NotImplementedError

    @property
    def mean(self):
        raise NotImplementedError

    @property
    def support_min(self):
        return 0.0

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def integrated_tail_raw(self, x):
        """Untruncated ``int_x^inf tail(y) dy``."""
        if self.closed_form_integral:
            return self._integral_closed(x)
        return _integral_by_quadrature(self, x)

    def integrated_tail(self, x):
        return np.minimum(1.0, self.integrated_tail_raw(x))

    def sample(self, rng, size=None):
        """Inverse-CDF draws using ``rng.random``; one uniform per draw."""
        u = rng.random(size)
        return self.ppf(u)

    def to_dict(self):
        d = {"family": self.family}
        d.update(asdict(self))
        return d

    def _integral_closed(self, x):
        raise NotImplementedError


def _as_array(x):
    return np.asarray(x, dtype=float)


def _scalarize(x, value):
    return float(value) if np.ndim(x) == 0 else value


@dataclass(frozen=True)
class Pareto(DistributionSpec):
    alpha: float
    xm: float = 1.0

    family = "pareto"
    closed_form_integral = True

    def __post_init__(self):
        if not self.xm > 0:
            raise ValueError("Pareto scale xm must be positive")
        if not self.alpha > 1:
            raise NonIntegrableTail(f"Pareto shape alpha={self.alpha} gives an infinite mean")

    @classmethod
    def with_mean(cls, alpha, mean):
        return cls(alpha, mean * (alpha - 1.0) / alpha)

    @property
    def mean(self):
        return self.xm * self.alpha / (self.alpha - 1.0)

    @property
    def support_min(self):
        return self.xm

    def tail(self, x):
        x = _as_array(x)
        with np.errstate(divide="ignore"):
            t = np.where(x < self.xm, 1.0, (self.xm / np.maximum(x, self.xm)) ** self.alpha)
        return _scalarize(x, t)

    def pdf(self, x):
        x = _as_array(x)
        d = np.where(x < self.xm, 0.0,
                     self.alpha * self.xm ** self.alpha / np.maximum(x, self.xm) ** (self.alpha + 1))
        return _scalarize(x, d)

    def ppf(self, u):
        return self.xm * (1.0 - _as_array(u)) ** (-1.0 / self.alpha)

    def _integral_closed(self, x):
        x = _as_array(x)
        a, xm = self.alpha, self.xm
        xc = np.maximum(x, xm)
        v = np.where(x < xm, (xm - x) + xm / (a - 1.0), xm ** a * xc ** (1.0 - a) / (a - 1.0))
        return _scalarize(x, v)


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    rate: float

    family = "exponential"
    closed_form_integral = True

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    @classmethod
    def with_mean(cls, mean):
        return cls(1.0 / mean)

    @property
    def mean(self):
        return 1.0 / self.rate

    def tail(self, x):
        x = _as_array(x)
        return _scalarize(x, np.where(x < 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0))))

    def pdf(self, x):
        x = _as_array(x)
        return _scalarize(x, np.where(x < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0))))

    def ppf(self, u):
        return -np.log1p(-_as_array(u)) / self.rate

    def _integral_closed(self, x):
        x = _as_array(x)
        xc = np.maximum(x, 0.0)
        v = np.exp(-self.rate * xc) / self.rate + (xc - x)
        return _scalarize(x, v)


@dataclass(frozen=True)
class Deterministic(DistributionSpec):
    value: float

    family = "deterministic"
    closed_form_integral = True

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("deterministic value must be non-negative")

    @classmethod
    def with_mean(cls, mean):
        return cls(mean)

    @property
    def mean(self):
        return self.value

    @property
    def support_min(self):
        return self.value

    def tail(self, x):
        x = _as_array(x)
        return _scalarize(x, np.where(x < self.value, 1.0, 0.0))

    def pdf(self, x):
        x = _as_array(x)
        return _scalarize(x, np.zeros_like(x))

    def atoms(self):
        return [(self.value, 1.0)]

    def ppf(self, u):
        return np.full(np.shape(u), self.value) if np.ndim(u) else self.value

    def _integral_closed(self, x):
        x = _as_array(x)
        return _scalarize(x, np.maximum(self.value - x, 0.0))


@dataclass(frozen=True)
class Lognormal(DistributionSpec):
    mu: float
    sigma: float

    family = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("lognormal sigma must be positive")

    @classmethod
    def with_mean(cls, sigma, mean):
        return cls(math.log(mean) - 0.5 * sigma * sigma, sigma)

    @property
    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    def _z(self, x):
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma

    def tail(self, x):
        x = _as_array(x)
        return _scalarize(x, np.where(x <= 0, 1.0, special.ndtr(-self._z(x))))

    def pdf(self, x):
        x = _as_array(x)
        safe = np.where(x > 0, x, 1.0)
        z = self._z(safe)
        d = np.exp(-0.5 * z * z) / (safe * self.sigma * math.sqrt(2 * math.pi))
        return _scalarize(x, np.where(x > 0, d, 0.0))

    def ppf(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(_as_array(u)))


@dataclass(frozen=True)
class WeibullTail(DistributionSpec):
    """Weibull-type tail with shape ``beta`` in (0, 1).

    The default form has tail ``exp(-(x/scale)**beta)``.  With
    ``integrated=True`` the law is built so that its integrated tail equals
    ``exp(-x**beta)`` exactly for ``x >= cutoff``: the tail is 1 below
    ``cutoff`` (an atom sits there) and ``beta x**(beta-1) exp(-x**beta)``
    above it.  Use :meth:`from_integrated_weibull` to construct that form.
    """

    beta: float
    scale: float = 1.0
    integrated: bool = False
    cutoff: float = 0.0

    family = "weibull"

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("Weibull-tail shape beta must lie in (0, 1)")
        if not self.scale > 0:
            raise ValueError("Weibull scale must be positive")
        if self.integrated:
            if self.scale != 1.0:
                raise ValueError("integrated Weibull form uses unit scale")
            floor = _integrated_weibull_floor(self.beta)
            if self.cutoff < floor * (1 - 1e-12):
                raise ValueError(f"cutoff must be >= {floor:.6g} so that the tail stays <= 1")

    @property
    def closed_form_integral(self):
        return self.integrated

    @classmethod
    def from_integrated_weibull(cls, beta, mean=None):
        """Law whose integrated tail is ``exp(-x**beta)`` beyond a cutoff.

        With ``mean=None`` the smallest admissible cutoff is used; otherwise
        the cutoff is solved so that the mean equals ``mean``.
        """
        floor = _integrated_weibull_floor(beta)
        if mean is None:
            return cls(beta, integrated=True, cutoff=floor)
        smallest = floor + math.exp(-floor ** beta)
        if mean < smallest:
            raise ValueError(f"mean must be >= {smallest:.6g} for beta={beta}")
        c = optimize.brentq(lambda c: c + math.exp(-c ** beta) - mean, floor, mean + 1.0,
                            xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return cls(beta, integrated=True, cutoff=max(c, floor))

    @property
    def mean(self):
        if self.integrated:
            return self.cutoff + math.exp(-self.cutoff ** self.beta)
        return self.scale * math.gamma(1.0 + 1.0 / self.beta)

    def _density_tail(self, x):
        # beta x^(beta-1) exp(-x^beta), for x > 0
        b = self.beta
        return b * x ** (b - 1.0) * np.exp(-x ** b)

    def tail(self, x):
        x = _as_array(x)
        if self.integrated:
            safe = np.maximum(x, self.cutoff if self.cutoff > 0 else 1e-300)
            t = np.where(x < self.cutoff, 1.0, self._density_tail(safe))
        else:
            t = np.exp(-(np.maximum(x, 0.0) / self.scale) ** self.beta)
        return _scalarize(x, t)

    def pdf(self, x):
        x = _as_array(x)
        b = self.beta
        if self.integrated:
            safe = np.maximum(x, max(self.cutoff, 1e-300))
            d = b * np.exp(-safe ** b) * (b * safe ** (2 * b - 2) - (b - 1) * safe ** (b - 2))
            return _scalarize(x, np.where(x < self.cutoff, 0.0, d))
        safe = np.maximum(x, 1e-300) / self.scale
        d = (b / self.scale) * safe ** (b - 1) * np.exp(-safe ** b)
        return _scalarize(x, np.where(x <= 0, 0.0, d))

    def atoms(self):
        if self.integrated:
            mass = 1.0 - float(self._density_tail(self.cutoff)) if self.cutoff > 0 else 0.0
            return [(self.cutoff, mass)] if mass > 0 else []
        return []

    @property
    def support_min(self):
        return self.cutoff if self.integrated else 0.0

    def ppf(self, u):
        u = _as_array(u)
        if not self.integrated:
            return self.scale * (-np.log1p(-u)) ** (1.0 / self.beta)
        v = 1.0 - u
        x = np.full(u.shape, float(self.cutoff))
        cont = v < float(self._density_tail(self.cutoff))
        if np.any(cont):
            x[cont] = _invert_decreasing(lambda t: np.log(self._density_tail(t)),
                                         np.log(v[cont]), self.cutoff, self.beta)
        return x if np.ndim(u) else float(x)

    def _integral_closed(self, x):
        x = _as_array(x)
        c = self.cutoff
        xc = np.maximum(x, c)
        v = np.exp(-xc ** self.beta) + (xc - x)
        return _scalarize(x, v)


def _integrated_weibull_floor(beta):
    """Smallest x with beta x^(beta-1) exp(-x^beta) <= 1."""
    g = lambda x: math.log(beta) + (beta - 1) * math.log(x) - x ** beta
    return optimize.brentq(g, 1e-300, 10.0, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def _invert_decreasing(log_tail, target, lo, beta):
    """Solve ``log_tail(x) = target`` for decreasing ``log_tail`` on ``[lo, inf)``."""
    lo_arr = np.full(target.shape, float(lo))
    hi = np.maximum(lo_arr, 1.0)
    while True:
        over = log_tail(hi) > target
        if not np.any(over):
            break
        hi = np.where(over, hi * 2.0, hi)
    for _ in range(200):
        mid = 0.5 * (lo_arr + hi)
        above = log_tail(mid) > target
        lo_arr = np.where(above, mid, lo_arr)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo_arr <= 4 * np.finfo(float).eps * hi):
            break
    return 0.5 * (lo_arr + hi)


@functools.lru_cache(maxsize=65536)
def _integral_cached(d, x):
    lo_scale = max(1.0, abs(x), d.mean)
    return quad.integral(d.tail, x, math.inf, QUAD_REL_TOL, scale=lo_scale,
                         points=[p for p, _ in d.atoms()] + [d.support_min])


def _integral_by_quadrature(d, x):
    x = _as_array(x)
    if x.ndim == 0:
        return _integral_cached(d, float(x))
    return np.array([_integral_cached(d, float(v)) for v in x.ravel()]).reshape(x.shape)


@dataclass(frozen=True)
class IntegratedTail:
    """Integrated tail ``min(1, int_x^inf tail)`` of ``base``.

    ``mode`` is ``"closed-form"`` or ``"quadrature"``; ``None`` picks the
    closed form when the family has one.
    """

    base: DistributionSpec
    mode: str = None

    def __post_init__(self):
        if self.mode is None:
            object.__setattr__(self, "mode", "closed-form" if self.base.closed_form_integral
                               else "quadrature")
        if self.mode not in ("closed-form", "quadrature"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "closed-form" and not self.base.closed_form_integral:
            raise ValueError(f"{self.base.family} has no closed-form integrated tail")
        if not math.isfinite(self.base.mean):
            raise NonIntegrableTail("base law has an infinite mean")

    def raw(self, x):
        if self.mode == "closed-form":
            return self.base._integral_closed(x)
        return _integral_by_quadrature(self.base, x)

    def value(self, x):
        return np.minimum(1.0, self.raw(x))

    __call__ = value


@dataclass(frozen=True)
class ClassDiagnostic:
    grid: np.ndarray
    shift: float
    long_tailed_ratio_curve: np.ndarray
    subexp_ratio_curve: np.ndarray
    rv_index_estimate: float = None
    irv_factors: tuple = ()
    irv_indicator: np.ndarray = field(default=None)


# -- functional interface ----------------------------------------------------

def tail(d, x):
    return d.tail(x)


def integrated_tail(d, x):
    if np.any(_as_array(x) < 0):
        raise ValueError("integrated tail is defined for x >= 0")
    return d.integrated_tail(x)


def sample(d, rng, size=None):
    return d.sample(rng, size)


def mean(d):
    return d.mean


def convolution_tail(d, x):
    """``P{X1 + X2 > x}`` for two independent copies, by quadrature."""
    x = float(x)
    lo = d.support_min
    total = float(d.tail(x))
    for loc, mass in d.atoms():
        if loc <= x:
            total += mass * float(d.tail(x - loc))
    if x > lo:
        kink = x - lo
        total += quad.integral(lambda y: d.tail(x - y) * d.pdf(y), lo, x, 1e-10,
                               points=[kink] if lo < kink < x else ())
    return total


def diagnose_class(d, grid, shift=1.0, irv_factors=(2.0, 1.5, 1.1, 1.01)):
    """Ratio curves that help judge heavy-tail class membership.

    Returns data only: the long-tailed ratio ``tail(x+shift)/tail(x)``, the
    convolution ratio ``P{X1+X2>x}/tail(x)``, the log-log slope of the tail
    over the top two decades of the grid (reported as a positive index),
    and ``tail(c x)/tail(x)`` for each factor ``c``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty ascending array of positive values")
    t = d.tail(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        lt = np.where(t > 0, d.tail(grid + shift) / t, np.nan)
        conv = np.array([convolution_tail(d, x) for x in grid])
        sub = np.where(t > 0, conv / t, np.nan)
        irv = np.array([np.where(t > 0, d.tail(c * grid) / t, np.nan) for c in irv_factors])

    top = (grid >= grid[-1] / 100.0) & (t > 0)
    index = None
    if np.count_nonzero(top) >= 2:
        slope = np.polyfit(np.log(grid[top]), np.log(t[top]), 1)[0]
        index = float(-slope)
    return ClassDiagnostic(grid, float(shift), lt, sub, index, tuple(irv_factors), irv)


# -- configuration -----------------------------------------------------------

FAMILIES = {
    "pareto": Pareto,
    "exponential": Exponential,
    "deterministic": Deterministic,
    "lognormal": Lognormal,
    "weibull": WeibullTail,
}


def from_dict(spec):
    """Build a law from a config table; ``mean`` may replace the scale."""
    spec = dict(spec)
    try:
        family = spec.pop("family")
    except KeyError:
        raise ConfigError("distribution table needs a 'family' key") from None
    family = str(family).lower()
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")
    cls = FAMILIES[family]
    m = spec.pop("mean", None)
    try:
        if m is not None:
            if family == "pareto":
                law = Pareto.with_mean(spec.pop("alpha"), m)
            elif family == "exponential":
                law = Exponential.with_mean(m)
            elif family == "deterministic":
                law = Deterministic(m)
            elif family == "lognormal":
                law = Lognormal.with_mean(spec.pop("sigma"), m)
            elif spec.pop("integrated", False):
                law = WeibullTail.from_integrated_weibull(spec.pop("beta"), m)
            else:
                beta = spec.pop("beta")
                law = WeibullTail(beta, m / math.gamma(1 + 1 / beta))
            if spec:
                _reject(spec)
            return law
        names = {f.name for f in fields(cls)}
        unknown = set(spec) - names
        if unknown:
            _reject({k: spec[k] for k in unknown})
        if family == "weibull" and spec.get("integrated") and "cutoff" not in spec:
            return WeibullTail.from_integrated_weibull(spec["beta"])
        return cls(**spec)
    except KeyError as exc:
        raise ConfigError(f"{family}: missing parameter {exc.args[0]!r}") from None
    except (TypeError, ValueError, NonIntegrableTail) as exc:
        raise ConfigError(f"{family}: {exc}") from None


def _reject(extra):
    raise ConfigError(f"unexpected parameters {sorted(extra)}")
