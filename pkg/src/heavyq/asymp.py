"""Heavy-tail asymptotics and bounds for the stationary GI/GI/s waiting time.

Every evaluator returns a :class:`Prediction`: the numerical value of one
named formula at the query point together with the regime it is valid in,
the distributional assumptions it rests on, and a pre-asymptotic indicator
``B(x)/B_I(x)``.  The formulas are equivalences (or bounds) as ``x -> inf``;
the indicator is small when the query point is far enough out for them to
be meaningful.

Notation: ``a`` is the mean interarrival time, ``b`` the mean service time,
``B`` the service tail and ``B_I(x) = min(1, int_x^inf B)`` the integrated
tail.
"""

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import quad
from .dist import Pareto
from .errors import ArgumentOrder, RegimeError
from .regime import Regime, classify

QUAD_REL_TOL = 1e-8
ALT_LOWER_GRID = (1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5, 1.0)


class Kind(str, enum.Enum):
    EXACT = "exact-asymptotic"
    LOWER = "lower-bound"
    UPPER = "upper-bound"


@dataclass(frozen=True)
class Prediction:
    """One formula evaluated at one query point.

    ``value`` is capped at 1; ``raw_value`` is the formula itself.  When
    ``constant_known`` is false the value is only the order function (the
    multiplying constant is unknown) and must not be read as a probability.
    ``proven`` is false for formulas stated without proof.
    """

    formula_id: str
    value: float
    kind: Kind
    regime: Regime
    assumptions: tuple
    proven: bool = True
    raw_value: float = None
    constant_known: bool = True
    warning_ratio: float = math.nan
    args: dict = field(default_factory=dict)
    notes: str = ""

    def to_dict(self):
        return {
            "formula_id": self.formula_id, "value": self.value,
            "raw_value": self.raw_value, "kind": self.kind.value,
            "regime": self.regime.value, "assumptions": list(self.assumptions),
            "proven": self.proven, "constant_known": self.constant_known,
            "warning_ratio": self.warning_ratio, "args": dict(self.args),
            "notes": self.notes,
        }


@dataclass(frozen=True)
class FormulaInfo:
    formula_id: str
    kind: Kind
    regimes: tuple
    assumptions: tuple
    description: str
    servers: str = "2"
    proven: bool = True


_S, _L, _IRV = "B_I in S", "B_I in L", "B_I in IRV"
_BS, _BRV = "B in S", "B in RV"

CATALOG = {f.formula_id: f for f in [
    FormulaInfo("single_server_exact", Kind.EXACT, (Regime.MAXIMAL,), (_S,),
                "single-server waiting-time tail: B_I_raw(x)/(a-b)", servers="1"),
    FormulaInfo("max_stab_exact", Kind.EXACT, (Regime.MAXIMAL,), (_S,),
                "two servers, b<a: [B_I(x)^2 + b int_0^inf B_I(x+ya) B(x+y(a-b)) dy]"
                " / (a(2a-b))"),
    FormulaInfo("max_stab_lower_const", Kind.LOWER, (Regime.MAXIMAL,), (_S,),
                "two servers, b<a: (2a+b)/(2a^2(2a-b)) B_I(x)^2"),
    FormulaInfo("max_stab_upper_const", Kind.UPPER, (Regime.MAXIMAL,), (_S,),
                "two servers, b<a: B_I(x)^2 / (2a(a-b))"),
    FormulaInfo("max_stab_rv_exact", Kind.EXACT, (Regime.MAXIMAL,), (_BRV,),
                "two servers, b<a, regularly varying service of index g: c' B_I(x)^2 with"
                " c' = [1 + b(g-1) int_0^inf (1+za)^(1-g)(1+z(a-b))^(-g) dz]/(a(2a-b))"),
    FormulaInfo("min_stab_exact", Kind.EXACT, (Regime.MINIMAL,), (_BS, _IRV),
                "two servers, a<b<2a: B_I(bx/(b-a)) / (2a-b)"),
    FormulaInfo("min_stab_lower", Kind.LOWER, (Regime.MINIMAL,), (_BS,),
                "two servers, a<b<2a, delta>=0: B_I((b+delta)x/(b-a)) / (2a-b)"),
    FormulaInfo("min_stab_irv_lower", Kind.LOWER, (Regime.MINIMAL,), (_IRV,),
                "two servers, a<b<2a: B_I(bx/(b-a)) / (2a-b) as a lower bound"),
    FormulaInfo("min_stab_upper", Kind.UPPER, (Regime.INTERMEDIATE, Regime.MINIMAL),
                (_BS, _S), "two servers, a<=b<2a: B_I(2x) / (2a-b)"),
    FormulaInfo("min_stab_alt_lower", Kind.LOWER, (Regime.INTERMEDIATE, Regime.MINIMAL),
                (_L,), "two servers, a<=b<2a, c>b/a: (2ca+b)/(2c^2a^2(2ca-b)) B_I(x)^2"),
    FormulaInfo("majorant_upper", Kind.UPPER, (Regime.MAXIMAL,), (_S,),
                "s servers, b<a: B_I(x)^s / (a-b)^s", servers="s"),
    FormulaInfo("s_server_lower_order", Kind.LOWER, (Regime.MAXIMAL,), (_S,),
                "s servers, b<a: order B_I(x)^s, constant unknown", servers="s"),
    FormulaInfo("s_server_lower_minimal", Kind.LOWER, (Regime.MINIMAL,), (_BS,),
                "s servers, (s-1)a<b<sa, delta>=0:"
                " B_I(((s-1)b - s(s-2)a + delta)x/(b-(s-1)a)) / (sa-b)", servers="s"),
    FormulaInfo("s_server_upper", Kind.UPPER,
                (Regime.MAXIMAL, Regime.INTERMEDIATE, Regime.MINIMAL), (_BS, _S),
                "s servers, b<sa: B_I(sx) / (sa-b)", servers="s"),
    FormulaInfo("joint_max_lower", Kind.LOWER, (Regime.MAXIMAL,), (_L,),
                "two servers, b<a, x<=y: P{W1>x, W2>y} >= B_I(x)B_I(y)/a^2"),
    FormulaInfo("joint_max_upper", Kind.UPPER, (Regime.MAXIMAL,), (_L,),
                "two servers, b<a, x<=y: P{W1>x, W2>y} <= 2B_I(x)B_I(y)/(a-b)^2"),
    FormulaInfo("joint_max_exact", Kind.EXACT, (Regime.MAXIMAL,), (_S,),
                "two servers, b<a, x<=y: R(y,y)/(a(2a-b)) + (R(x,y)-R(y,y))/a^2 with"
                " R(x,y) = B_I(x)B_I(y) + b int_0^inf B_I(y+za) B(x+z(a-b)) dz",
                proven=False),
    FormulaInfo("joint_min_exact", Kind.EXACT, (Regime.MINIMAL,), (_BS, _IRV),
                "two servers, a<b<2a, y/x->c in [1,inf]: B_I(y(1+a/(c(b-a))))/a"
                " + (b-a)/(a(2a-b)) B_I(yb/(b-a))"),
    FormulaInfo("second_workload_tail", Kind.EXACT, (Regime.MINIMAL,), (_BS, _S),
                "two servers, a<b<2a: P{W2>y} ~ B_I(y)/a + (b-a)/(a(2a-b)) B_I(yb/(b-a))"),
]}

JOINT_IDS = ("joint_max_lower", "joint_max_upper", "joint_max_exact", "joint_min_exact")


def catalog_json(indent=2):
    """Formula catalog as JSON: id, kind, regimes, assumptions, citation."""
    rows = [{"formula_id": f.formula_id, "kind": f.kind.value,
             "regime": [r.value for r in f.regimes], "servers": f.servers,
             "assumptions": list(f.assumptions), "proven": f.proven,
             "citation": f.description} for f in CATALOG.values()]
    return json.dumps(rows, indent=indent)


# -- helpers -----------------------------------------------------------------

def _bi(service, x):
    return float(service.integrated_tail(float(x)))


def _warning(service, x):
    bi = _bi(service, x)
    return float(service.tail(float(x))) / bi if bi > 0 else math.inf


def _check_x(x):
    x = float(x)
    if not x >= 0:
        raise ValueError(f"x must be >= 0, got {x}")
    return x


def _close(u, v):
    return abs(u - v) <= 1e-12 * max(1.0, abs(u), abs(v))


def _require_maximal(a, b, s=2):
    if classify(a, b, s) is not Regime.MAXIMAL:
        raise RegimeError(f"needs b < a (got a={a}, b={b})")


def _require_minimal(a, b, s=2):
    if classify(a, b, s) is not Regime.MINIMAL:
        raise RegimeError(f"needs {s - 1}a < b < {s}a (got a={a}, b={b})")


def _require_min_upper_range(a, b):
    if not ((b > a or _close(a, b)) and b < 2 * a and not _close(b, 2 * a)):
        raise RegimeError(f"needs a <= b < 2a (got a={a}, b={b})")


def _make(fid, raw, x, service, regime, args, **kw):
    info = CATALOG[fid]
    raw = float(raw)
    return Prediction(
        formula_id=fid, value=min(1.0, raw), kind=info.kind, regime=regime,
        assumptions=info.assumptions, proven=info.proven, raw_value=raw,
        warning_ratio=_warning(service, x), args=args, **kw)


def _atom_points(service, shift, slope):
    """Break points y where shift + slope*y hits an atom of the service law."""
    if slope <= 0:
        return []
    return [(p - shift) / slope for p, _ in service.atoms() if p > shift]


# -- single server -------------------------------------------------------------

def single_server_tail(x, a, service):
    x = _check_x(x)
    b = service.mean
    if not b < a:
        raise RegimeError(f"single server needs b < a (got a={a}, b={b})")
    raw = float(service.integrated_tail_raw(x)) / (a - b)
    return _make("single_server_exact", raw, x, service, Regime.MAXIMAL,
                 {"x": x, "a": a, "s": 1})


# -- two servers, maximal stability ---------------------------------------------

def _R(x, y, a, service, literal=False):
    """R(x, y) = B_I(x)B_I(y) + b int_0^inf B_I(y+za) B(x + z(a-b)) dz.

    ``literal=True`` evaluates the variant whose second factor is the
    constant ``B(x + x(a-b))``.
    """
    b = service.mean
    head = _bi(service, x) * _bi(service, y)
    scale = max(1.0, x, y) / a
    if literal:
        inner = quad.integral(lambda z: service.integrated_tail(y + z * a), 0.0, math.inf,
                              QUAD_REL_TOL, scale=scale)
        return head + b * float(service.tail(x + x * (a - b))) * inner
    points = _atom_points(service, x, a - b)
    integral = quad.integral(
        lambda z: service.integrated_tail(y + z * a) * service.tail(x + z * (a - b)),
        0.0, math.inf, QUAD_REL_TOL, scale=scale, points=points)
    return head + b * integral


def max_stab_exact(x, a, service):
    x = _check_x(x)
    b = service.mean
    _require_maximal(a, b)
    raw = _R(x, x, a, service) / (a * (2 * a - b))
    return _make("max_stab_exact", raw, x, service, Regime.MAXIMAL, {"x": x, "a": a})


def max_stab_constants(a, b):
    """Lower and upper constants multiplying ``B_I(x)^2`` for b < a."""
    _require_maximal(a, b)
    return (2 * a + b) / (2 * a * a * (2 * a - b)), 1.0 / (2 * a * (a - b))


def max_stab_bounds(x, a, service):
    x = _check_x(x)
    b = service.mean
    lo, hi = max_stab_constants(a, b)
    bi2 = _bi(service, x) ** 2
    args = {"x": x, "a": a}
    return (_make("max_stab_lower_const", lo * bi2, x, service, Regime.MAXIMAL,
                  dict(args, constant=lo)),
            _make("max_stab_upper_const", hi * bi2, x, service, Regime.MAXIMAL,
                  dict(args, constant=hi)))


def max_stab_rv_constant(gamma, a, b):
    """Constant c' with P{W > x} ~ c' B_I(x)^2 for tails regularly varying of index gamma."""
    if not gamma > 1:
        raise ValueError(f"index must exceed 1, got {gamma}")
    _require_maximal(a, b)
    if b == 0:
        return 1.0 / (2 * a * a)
    integral = quad.integral(
        lambda z: (1 + z * a) ** (1 - gamma) * (1 + z * (a - b)) ** (-gamma),
        0.0, math.inf, QUAD_REL_TOL)
    return (1 + b * (gamma - 1) * integral) / (a * (2 * a - b))


def max_stab_rv_exact(x, a, service, gamma=None):
    x = _check_x(x)
    if gamma is None:
        if not isinstance(service, Pareto):
            raise ValueError("tail index required for non-Pareto service")
        gamma = service.alpha
    c = max_stab_rv_constant(gamma, a, service.mean)
    raw = c * _bi(service, x) ** 2
    return _make("max_stab_rv_exact", raw, x, service, Regime.MAXIMAL,
                 {"x": x, "a": a, "gamma": gamma, "constant": c})


# -- two servers, minimal stability ----------------------------------------------

def min_stab_exact(x, a, service):
    x = _check_x(x)
    b = service.mean
    _require_minimal(a, b)
    raw = _bi(service, b * x / (b - a)) / (2 * a - b)
    return _make("min_stab_exact", raw, x, service, Regime.MINIMAL, {"x": x, "a": a})


def min_stab_irv_lower(x, a, service):
    x = _check_x(x)
    b = service.mean
    _require_minimal(a, b)
    raw = _bi(service, b * x / (b - a)) / (2 * a - b)
    return _make("min_stab_irv_lower", raw, x, service, Regime.MINIMAL, {"x": x, "a": a})


def _check_delta(delta):
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    return float(delta)


def min_stab_lower(x, a, service, delta=0.1):
    x = _check_x(x)
    delta = _check_delta(delta)
    b = service.mean
    _require_minimal(a, b)
    raw = _bi(service, (b + delta) * x / (b - a)) / (2 * a - b)
    return _make("min_stab_lower", raw, x, service, Regime.MINIMAL,
                 {"x": x, "a": a, "delta": delta})


def min_stab_upper(x, a, service):
    x = _check_x(x)
    b = service.mean
    _require_min_upper_range(a, b)
    raw = _bi(service, 2 * x) / (2 * a - b)
    return _make("min_stab_upper", raw, x, service, classify(a, b, 2), {"x": x, "a": a})


def alt_lower_constant(a, b, c):
    if not c > b / a:
        raise ValueError(f"scaling c must exceed b/a = {b / a}, got {c}")
    return (2 * c * a + b) / (2 * c * c * a * a * (2 * c * a - b))


def min_stab_alt_lower(x, a, service, c=None):
    """Lower bound from a slowed-down copy of the queue (interarrivals scaled by c).

    Without ``c`` the best constant over ``c = (b/a)(1 + t)``,
    ``t`` in ``ALT_LOWER_GRID``, is used.
    """
    x = _check_x(x)
    b = service.mean
    _require_min_upper_range(a, b)
    if c is None:
        c = max(((b / a) * (1 + t) for t in ALT_LOWER_GRID),
                key=lambda cc: alt_lower_constant(a, b, cc))
    const = alt_lower_constant(a, b, c)
    raw = const * _bi(service, x) ** 2
    return _make("min_stab_alt_lower", raw, x, service, classify(a, b, 2),
                 {"x": x, "a": a, "c": c, "constant": const})


# -- s servers --------------------------------------------------------------------

def _check_s(s):
    if int(s) != s or s < 1:
        raise ValueError("server count must be a positive integer")
    return int(s)


def s_server_upper_maximal(x, a, s, service):
    x = _check_x(x)
    s = _check_s(s)
    b = service.mean
    if not (b < a and not _close(a, b)):
        raise RegimeError(f"needs b < a (got a={a}, b={b})")
    raw = _bi(service, x) ** s / (a - b) ** s
    return _make("majorant_upper", raw, x, service, Regime.MAXIMAL, {"x": x, "a": a, "s": s})


def s_server_lower_maximal_order(x, a, s, service):
    """Order function ``B_I(x)^s`` of the lower bound; the constant is unknown."""
    x = _check_x(x)
    s = _check_s(s)
    b = service.mean
    if not (b < a and not _close(a, b)):
        raise RegimeError(f"needs b < a (got a={a}, b={b})")
    raw = _bi(service, x) ** s
    return _make("s_server_lower_order", raw, x, service, Regime.MAXIMAL,
                 {"x": x, "a": a, "s": s}, constant_known=False,
                 notes="order only: P{W>x} >= (K + o(1)) * value with K unknown")


def s_server_lower_minimal(x, a, s, service, delta=0.1):
    x = _check_x(x)
    s = _check_s(s)
    delta = _check_delta(delta)
    if s < 2:
        raise RegimeError("needs at least two servers")
    b = service.mean
    _require_minimal(a, b, s)
    mult = ((s - 1) * b - s * (s - 2) * a + delta) / (b - (s - 1) * a)
    raw = _bi(service, mult * x) / (s * a - b)
    return _make("s_server_lower_minimal", raw, x, service, Regime.MINIMAL,
                 {"x": x, "a": a, "s": s, "delta": delta, "multiplier": mult})


def s_server_upper(x, a, s, service):
    x = _check_x(x)
    s = _check_s(s)
    b = service.mean
    regime = classify(a, b, s)
    raw = _bi(service, s * x) / (s * a - b)
    return _make("s_server_upper", raw, x, service, regime, {"x": x, "a": a, "s": s},
                 notes="requires B in S or service times >= (s-1)a almost surely")


# -- joint workload tails ------------------------------------------------------------

def _check_order(x, y):
    x, y = _check_x(x), _check_x(y)
    if x > y:
        raise ArgumentOrder(f"need x <= y, got x={x}, y={y}")
    return x, y


def joint_bounds_max(x, y, a, service):
    x, y = _check_order(x, y)
    b = service.mean
    _require_maximal(a, b)
    prod = _bi(service, x) * _bi(service, y)
    args = {"x": x, "y": y, "a": a}
    return (_make("joint_max_lower", prod / a ** 2, x, service, Regime.MAXIMAL, args),
            _make("joint_max_upper", 2 * prod / (a - b) ** 2, x, service, Regime.MAXIMAL,
                  args))


def joint_exact_max(x, y, a, service, literal=False):
    """Joint tail of the two ordered workloads, b < a.

    The default evaluates R with ``B(x + z(a-b))`` inside the integral, the
    reading under which ``R(x, x)`` is exactly the marginal formula of
    :func:`max_stab_exact`; ``literal=True`` selects the constant-factor
    variant ``B(x + x(a-b))``.
    """
    x, y = _check_order(x, y)
    b = service.mean
    _require_maximal(a, b)
    ryy = _R(y, y, a, service, literal)
    rxy = ryy if x == y else _R(x, y, a, service, literal)
    raw = ryy / (a * (2 * a - b)) + (rxy - ryy) / a ** 2
    return _make("joint_max_exact", raw, x, service, Regime.MAXIMAL,
                 {"x": x, "y": y, "a": a, "literal": literal},
                 notes="stated without proof; literal reading" if literal
                 else "stated without proof")


def joint_min(x, y, a, service, c_ratio=None):
    """Joint tail in the minimal regime; ``c_ratio`` defaults to ``y/x``
    (``inf`` when ``x == 0``)."""
    x, y = _check_order(x, y)
    b = service.mean
    _require_minimal(a, b)
    if c_ratio is None:
        c_ratio = y / x if x > 0 else math.inf
    c_ratio = float(c_ratio)
    if not c_ratio >= 1:
        raise ValueError(f"c_ratio must lie in [1, inf], got {c_ratio}")
    first_arg = y if math.isinf(c_ratio) else y * (1 + a / (c_ratio * (b - a)))
    raw = (_bi(service, first_arg) / a
           + (b - a) / (a * (2 * a - b)) * _bi(service, y * b / (b - a)))
    return _make("joint_min_exact", raw, x, service, Regime.MINIMAL,
                 {"x": x, "y": y, "a": a, "c_ratio": c_ratio})


def second_workload_tail(y, a, service):
    y = _check_x(y)
    b = service.mean
    _require_minimal(a, b)
    raw = _bi(service, y) / a + (b - a) / (a * (2 * a - b)) * _bi(service, y * b / (b - a))
    return _make("second_workload_tail", raw, y, service, Regime.MINIMAL, {"y": y, "a": a})


# -- regime dispatch --------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeInfo:
    regime: Regime
    formula_ids: tuple
    has_exact: bool


def classify_regime(a, b, s):
    """Regime and the formula ids that apply to it.

    Raises
    ------
    UnstableError
        If ``b >= s*a``.
    """
    regime = classify(a, b, s)
    ids = []
    for f in CATALOG.values():
        if regime not in f.regimes:
            continue
        if f.servers == "1" and s != 1:
            continue
        if f.servers == "2" and s != 2:
            continue
        if f.formula_id == "s_server_lower_minimal" and s < 2:
            continue
        ids.append(f.formula_id)
    has_exact = any(CATALOG[i].kind is Kind.EXACT and i not in JOINT_IDS
                    and i != "second_workload_tail" for i in ids)
    return RegimeInfo(regime, tuple(ids), has_exact)


def predict_marginal(x, a, s, service, formula_ids=None, delta=0.1):
    """Every applicable marginal prediction for P{W > x}.

    Formulas that need extra structure (a tail index) are skipped when the
    service law does not provide it.
    """
    info = classify_regime(a, service.mean, s)
    wanted = [i for i in info.formula_ids if i not in JOINT_IDS
              and i != "second_workload_tail"]
    if formula_ids is not None:
        wanted = [i for i in wanted if i in formula_ids]
    out = []
    for fid in wanted:
        if fid == "single_server_exact":
            out.append(single_server_tail(x, a, service))
        elif fid == "max_stab_exact":
            out.append(max_stab_exact(x, a, service))
        elif fid == "max_stab_lower_const":
            out.append(max_stab_bounds(x, a, service)[0])
        elif fid == "max_stab_upper_const":
            out.append(max_stab_bounds(x, a, service)[1])
        elif fid == "max_stab_rv_exact":
            if isinstance(service, Pareto):
                out.append(max_stab_rv_exact(x, a, service))
        elif fid == "min_stab_exact":
            out.append(min_stab_exact(x, a, service))
        elif fid == "min_stab_lower":
            out.append(min_stab_lower(x, a, service, delta))
        elif fid == "min_stab_irv_lower":
            out.append(min_stab_irv_lower(x, a, service))
        elif fid == "min_stab_upper":
            out.append(min_stab_upper(x, a, service))
        elif fid == "min_stab_alt_lower":
            out.append(min_stab_alt_lower(x, a, service))
        elif fid == "majorant_upper":
            out.append(s_server_upper_maximal(x, a, s, service))
        elif fid == "s_server_lower_order":
            out.append(s_server_lower_maximal_order(x, a, s, service))
        elif fid == "s_server_lower_minimal":
            out.append(s_server_lower_minimal(x, a, s, service, delta))
        elif fid == "s_server_upper":
            out.append(s_server_upper(x, a, s, service))
    return out


def predict_joint(x, y, a, service, formula_ids=None):
    """Applicable joint predictions for P{W1 > x, W2 > y} (two servers)."""
    regime = classify(a, service.mean, 2)
    out = []
    if regime is Regime.MAXIMAL:
        lo, hi = joint_bounds_max(x, y, a, service)
        out = [lo, hi, joint_exact_max(x, y, a, service)]
    elif regime is Regime.MINIMAL:
        out = [joint_min(x, y, a, service)]
    if formula_ids is not None:
        out = [p for p in out if p.formula_id in formula_ids]
    return out


def envelope(predictions):
    """(lower envelope, upper envelope) over usable predictions.

    The lower envelope is the largest lower bound, falling back to the
    smallest exact value; the upper is the smallest upper bound, falling
    back to the largest exact value.  ``None`` where nothing applies.
    """
    usable = [p for p in predictions if p.constant_known]
    lows = [p.value for p in usable if p.kind is Kind.LOWER]
    highs = [p.value for p in usable if p.kind is Kind.UPPER]
    exact = [p.value for p in usable if p.kind is Kind.EXACT]
    lo = max(lows) if lows else (min(exact) if exact else None)
    hi = min(highs) if highs else (max(exact) if exact else None)
    return lo, hi


def loglog_slope(xs, values):
    """Least-squares slope of log(values) against log(xs)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
