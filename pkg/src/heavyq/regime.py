"""Load regimes of the s-server FCFS queue."""

import enum

from .errors import UnstableError

EQUALITY_TOL = 1e-12


class Regime(str, enum.Enum):
    MAXIMAL = "maximal"
    INTERMEDIATE = "intermediate"
    MINIMAL = "minimal"


def _close(u, v):
    return abs(u - v) <= EQUALITY_TOL * max(1.0, abs(u), abs(v))


def classify(a, b, s):
    """Regime for mean interarrival ``a``, mean service ``b`` and ``s`` servers.

    Maximal: ``b < a``.  Minimal: ``(s-1)a < b < sa``.  Anything in between
    (for two servers, ``b == a`` up to a relative 1e-12) is intermediate.
    A single server with ``b < a`` counts as maximal.
    """
    if s < 1:
        raise ValueError("need at least one server")
    if not (a > 0 and b >= 0):
        raise ValueError("means must satisfy a > 0, b >= 0")
    if b >= s * a or _close(b, s * a):
        raise UnstableError(f"unstable: b={b} >= s*a={s * a}")
    if b < a and not _close(b, a):
        return Regime.MAXIMAL
    if s >= 2 and b > (s - 1) * a and not _close(b, (s - 1) * a):
        return Regime.MINIMAL
    return Regime.INTERMEDIATE
