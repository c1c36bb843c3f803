"""Command-line front end: scenario files in, predictions and estimates out.

Scenarios are TOML files::

    name = "maximal-pareto"
    seed = 1
    slack = 1.5

    [queue]
    servers = 2
    interarrival = { family = "exponential", mean = 1.0 }
    service = { family = "pareto", alpha = 2.5, mean = 0.8 }

    [query]
    x = [3.0, 5.0]
    joint = [[2.0, 3.0]]
    levels = [1, 3]

    [simulation]
    customers = 1000000
    batches = 50

Exit codes: 0 success, 1 usage or configuration error, 2 bracket failure
under ``--strict``, 3 numerical failure.
"""

import argparse
import csv
import io
import json
import math
import re
import sys
import warnings
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from . import asymp, dist, kw, mc, quad
from .errors import (ConfigError, CouplingViolation, HeavyQError, InsufficientSamples,
                     MajorantViolation, NonConvergent, RegimeError)

EXIT_OK, EXIT_USAGE, EXIT_BRACKET, EXIT_NUMERIC = 0, 1, 2, 3

_TOP_KEYS = {"name", "seed", "slack", "delta", "formulas", "queue", "query", "simulation",
             "output"}
_SECTION_KEYS = {
    "queue": {"servers", "interarrival", "service"},
    "query": {"x", "joint", "levels"},
    "simulation": {"customers", "burn_in", "batches", "replications", "threads"},
    "output": {"directory"},
}


@dataclass(frozen=True)
class Scenario:
    name: str
    servers: int
    interarrival: dist.DistributionSpec
    service: dist.DistributionSpec
    x: tuple = ()
    joint: tuple = ()
    levels: tuple = ()
    customers: int = 10**6
    burn_in: int = None
    batches: int = 50
    replications: int = 1
    threads: int = 1
    seed: int = 0
    out: str = None
    formulas: tuple = None
    slack: float = mc.DEFAULT_SLACK
    delta: float = 0.1

    def queue_config(self):
        return kw.QueueConfig(self.servers, self.interarrival, self.service)


def _line_of(text, key):
    if text is None:
        return None
    pat = re.compile(rf"^\s*(\[+\s*)?{re.escape(key)}\b")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _ascending(seq):
    return all(u < v for u, v in zip(seq[:-1], seq[1:]))


def scenario_from_dict(data, text=None):
    """Validate a parsed scenario table; ``text`` locates errors by line."""

    def fail(msg, key):
        raise ConfigError(msg, _line_of(text, key))

    for key in data:
        if key not in _TOP_KEYS:
            fail(f"unknown key {key!r}", key)
    for sect, allowed in _SECTION_KEYS.items():
        table = data.get(sect, {})
        if not isinstance(table, dict):
            fail(f"[{sect}] must be a table", sect)
        for key in table:
            if key not in allowed:
                fail(f"unknown key {key!r} in [{sect}]", key)
    queue = data.get("queue")
    if not queue:
        fail("missing [queue] table", "queue")
    kwargs = {}
    try:
        for key in ("interarrival", "service"):
            if key not in queue:
                fail(f"[queue] needs {key!r}", "queue")
            try:
                kwargs[key] = dist.from_dict(queue[key])
            except ConfigError as exc:
                fail(f"{key}: {exc}", key)
        servers = queue.get("servers", 1)
        if not isinstance(servers, int) or servers < 1:
            fail("servers must be a positive integer", "servers")
        query = data.get("query", {})
        xs = tuple(float(v) for v in query.get("x", ()))
        joint = tuple((float(p[0]), float(p[1])) for p in query.get("joint", ()))
        levels = tuple(int(v) for v in query.get("levels", ()))
        if not (xs or joint or levels):
            fail("[query] needs at least one of x, joint, levels", "query")
        if not _ascending(xs) or any(v < 0 for v in xs):
            fail("x grid must be non-negative and strictly ascending", "x")
        if not _ascending(joint) or any(p[0] > p[1] or p[0] < 0 for p in joint):
            fail("joint grid must hold pairs [x, y] with 0 <= x <= y, ascending", "joint")
        if not _ascending(levels) or any(v < 0 for v in levels):
            fail("levels must be non-negative and strictly ascending", "levels")
        if joint and servers < 2:
            fail("joint queries need at least two servers", "joint")
        sim = data.get("simulation", {})
        formulas = data.get("formulas")
        if formulas is not None:
            formulas = tuple(str(f) for f in formulas)
            bad = [f for f in formulas if f not in asymp.CATALOG]
            if bad:
                fail(f"unknown formula ids {bad}", "formulas")
        sc = Scenario(
            name=str(data.get("name", "scenario")), servers=servers, x=xs, joint=joint,
            levels=levels, customers=int(sim.get("customers", 10**6)),
            burn_in=None if sim.get("burn_in") is None else int(sim["burn_in"]),
            batches=int(sim.get("batches", 50)),
            replications=int(sim.get("replications", 1)),
            threads=int(sim.get("threads", 1)), seed=int(data.get("seed", 0)),
            out=data.get("output", {}).get("directory"), formulas=formulas,
            slack=float(data.get("slack", mc.DEFAULT_SLACK)),
            delta=float(data.get("delta", 0.1)), **kwargs)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"invalid value: {exc}") from None
    _validate(sc, text)
    return sc


def _validate(sc, text=None):
    try:
        sc.queue_config()
    except RegimeError as exc:
        raise ConfigError(str(exc), _line_of(text, "service")) from None
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(text, "servers")) from None
    if sc.customers < 1:
        raise ConfigError("customers must be positive", _line_of(text, "customers"))
    if sc.burn_in is not None and not 0 <= sc.burn_in < sc.customers:
        raise ConfigError("burn_in must lie in [0, customers)", _line_of(text, "burn_in"))
    if not 10 <= sc.batches <= 1000:
        raise ConfigError("batches must lie in [10, 1000]", _line_of(text, "batches"))
    if sc.replications < 1 or sc.threads < 1:
        raise ConfigError("replications and threads must be positive",
                          _line_of(text, "replications"))
    if sc.slack < 1:
        raise ConfigError("slack is a factor >= 1", _line_of(text, "slack"))
    if sc.delta < 0:
        raise ConfigError("delta must be >= 0", _line_of(text, "delta"))


def parse_scenario(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", int(m.group(1)) if m else None) from None
    return scenario_from_dict(data, text)


def load_scenario(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text)


def scenario_to_dict(sc):
    data = {"name": sc.name, "seed": sc.seed, "slack": sc.slack, "delta": sc.delta}
    if sc.formulas is not None:
        data["formulas"] = list(sc.formulas)
    data["queue"] = {"servers": sc.servers, "interarrival": sc.interarrival.to_dict(),
                     "service": sc.service.to_dict()}
    query = {}
    if sc.x:
        query["x"] = list(sc.x)
    if sc.joint:
        query["joint"] = [list(p) for p in sc.joint]
    if sc.levels:
        query["levels"] = list(sc.levels)
    data["query"] = query
    sim = {"customers": sc.customers, "batches": sc.batches,
           "replications": sc.replications, "threads": sc.threads}
    if sc.burn_in is not None:
        sim["burn_in"] = sc.burn_in
    data["simulation"] = sim
    if sc.out is not None:
        data["output"] = {"directory": sc.out}
    return data


def dump_scenario(sc):
    return tomli_w.dumps(scenario_to_dict(sc))


# -- commands ------------------------------------------------------------------

PREDICTION_COLUMNS = ("query_x", "query_y", "formula_id", "kind", "regime", "value",
                      "raw_value", "proven", "constant_known", "warning_ratio")


def predictions_for(sc):
    """(query, Prediction) pairs for every applicable formula and grid point."""
    cfg = sc.queue_config()
    out = []
    for x in sc.x:
        for p in asymp.predict_marginal(x, cfg.a, cfg.s, cfg.service, sc.formulas, sc.delta):
            out.append(((x, ""), p))
    if cfg.s == 2:
        for x, y in sc.joint:
            for p in asymp.predict_joint(x, y, cfg.a, cfg.service, sc.formulas):
                out.append(((x, y), p))
    return out


def cmd_predict(sc, as_json=False):
    rows = predictions_for(sc)
    if as_json:
        return json.dumps([dict(p.to_dict(), query=[q[0], q[1] or None]) for q, p in rows],
                          indent=2)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(PREDICTION_COLUMNS)
    for (qx, qy), p in rows:
        out.writerow([qx, qy, p.formula_id, p.kind.value, p.regime.value, repr(p.value),
                      repr(p.raw_value), str(p.proven).lower(),
                      str(p.constant_known).lower(), repr(p.warning_ratio)])
    return buf.getvalue()


def _simulate(sc, **extra):
    return dict(n_customers=sc.customers, burn_in=sc.burn_in, n_batches=sc.batches,
                seed=sc.seed, replications=sc.replications, threads=sc.threads, **extra)


def cmd_simulate(sc, as_json=False):
    res = mc.estimate_tails(sc.queue_config(), sc.x, sc.joint, sc.levels, **_simulate(sc))
    if as_json:
        tables = {"waiting": res.marginal, "joint": res.joint, "queue": res.queue,
                  "system": res.system}
        return json.dumps({k: [e.to_dict() for e in t.values()] for k, t in tables.items()},
                          indent=2)
    return mc.estimates_to_csv(res)


def cmd_compare(sc, as_json=False):
    rows = mc.compare(sc.queue_config(), sc.x, sc.joint, sc.levels,
                      formula_ids=sc.formulas, slack=sc.slack, delta=sc.delta,
                      **_simulate(sc))
    text = mc.rows_to_json(rows) if as_json else mc.rows_to_csv(rows)
    return text, rows


def summarize(rows):
    lines = []
    for r in rows:
        e = r.estimate
        status = {True: "pass", False: "FAIL", None: "n/a"}[r.bracket_pass]
        flag = " (no exact formula)" if r.no_exact_formula and e.statistic == "waiting" else ""
        lines.append(f"{e.statistic:8s} {str(r.query):24s} p_hat={e.p_hat:.4g} "
                     f"[{e.ci_low:.4g}, {e.ci_high:.4g}] bracket={status}{flag}")
    checked = [r for r in rows if r.bracket_pass is not None]
    lines.append(f"{sum(bool(r.bracket_pass) for r in checked)}/{len(checked)} brackets pass")
    return "\n".join(lines)


# -- self test -------------------------------------------------------------------

def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "passed": bool(ok), "detail": detail}


def _rel(u, v):
    return abs(u - v) / max(abs(v), 1e-300)


def selftest_checks():
    P3 = dist.Pareto.with_mean(3.0, 1.5)
    Pmin = dist.Pareto.with_mean(2.2, 1.5)
    E = dist.Exponential(1.0)

    def quad_identity():
        worst = 0.0
        for f in (lambda y: np.exp(-(1.0 + y)), lambda y: (2.0 + y) ** -2.5):
            for alpha, beta in ((2.0, 1.0), (1.0, 0.7)):
                worst = max(worst, quad.verify_integral_identity(f, alpha, beta, 1e-7))
        return worst <= 1e-5, f"max residual {worst:.2e}"

    def reductions():
        xs = np.linspace(2.0, 40.0, 5)
        errs = []
        for x in xs:
            errs.append(_rel(asymp.joint_exact_max(x, x, 2.0, P3).raw_value,
                             asymp.max_stab_exact(x, 2.0, P3).raw_value))
            errs.append(_rel(asymp.joint_min(x, x, 1.0, Pmin, 1.0).raw_value,
                             asymp.min_stab_exact(x, 1.0, Pmin).raw_value))
            errs.append(_rel(asymp.s_server_upper(x, 1.0, 2, Pmin).raw_value,
                             asymp.min_stab_upper(x, 1.0, Pmin).raw_value))
            errs.append(_rel(asymp.s_server_lower_minimal(x, 1.0, 2, Pmin, 0.2).raw_value,
                             asymp.min_stab_lower(x, 1.0, Pmin, 0.2).raw_value))
        return max(errs) <= 1e-10, f"max relative error {max(errs):.1e}"

    def constants():
        lo, hi = asymp.max_stab_constants(2.0, 1.0)
        ok = _rel(lo, 5 / 24) < 1e-14 and _rel(hi, 0.25) < 1e-14
        return ok, f"lower={lo!r} upper={hi!r}"

    def exponential_oracle():
        a, b, x = 2.0, 1.0, 1.5
        exact = math.exp(-2 * x) * (1 + b / (2 * a - b)) / (a * (2 * a - b))
        got = asymp.max_stab_exact(x, a, E).raw_value
        single = asymp.single_server_tail(10.0, 4.0, dist.Pareto(2.0, 1.0)).raw_value
        return _rel(got, exact) < 1e-8 and _rel(single, 0.05) < 1e-12, \
            f"two-server rel err {_rel(got, exact):.1e}, single-server {single!r}"

    def rv_constant():
        c = asymp.max_stab_rv_constant(3.0, 2.0, 1.5)
        lo, hi = asymp.max_stab_constants(2.0, 1.5)
        x = 1e4
        ratio = asymp.max_stab_exact(x, 2.0, P3).raw_value / float(P3.integrated_tail(x)) ** 2
        return lo < c < hi and _rel(ratio, c) < 1e-6, f"c'={c:.6f} in ({lo:.4f}, {hi:.4f})"

    def couplings():
        total = 0
        for b in (0.8, 1.5):
            cfg = kw.QueueConfig(2, dist.Exponential.with_mean(1.0), dist.Pareto.with_mean(2.5, b))
            total += kw.simulate_coupled(cfg, (1.0 + b / 2) / 2, "upper", 20_000, 1,
                                         check=False).violations
            total += kw.simulate_coupled(cfg, 1.3, "lower", 20_000, 1, check=False).violations
            dcfg = kw.QueueConfig(2, dist.Deterministic(1.0), dist.Pareto.with_mean(2.5, b))
            total += sum(kw.simulate_majorants(dcfg, 20_000, 2, check=False).violations.values())
            total += kw.check_block_recursion(dcfg, 20, 500, 3)
        return total == 0, f"{total} violations"

    def monotonicity():
        g = np.random.default_rng(0)
        bad = 0
        for _ in range(10):
            sig = g.exponential(1.5, 500)
            tau = g.exponential(1.0, 500)
            bad += kw.monotonicity_violations(sig, tau, sig + g.exponential(0.1, 500),
                                              tau * g.uniform(0.5, 1.0, 500), 2)
        return bad == 0, f"{bad} violations"

    def lindley():
        cfg = kw.QueueConfig(1, dist.Exponential.with_mean(2.0), dist.Exponential(1.0))
        path = kw.simulate_path(cfg, 5000, 7, record=())
        d = kw._Draws(cfg, 7)
        _, sig, _, tau_next = next(d.chunks(5000))
        w = np.zeros(5000)
        for n in range(4999):
            w[n + 1] = max(0.0, w[n] + sig[n] - tau_next[n])
        err = float(np.max(np.abs(w - path.waiting_times)))
        return err <= 1e-12, f"max deviation {err:.1e}"

    return [
        ("quadrature identity", quad_identity),
        ("reduction identities", reductions),
        ("two-server constants", constants),
        ("closed-form oracles", exponential_oracle),
        ("regular-variation constant", rv_constant),
        ("pathwise couplings", couplings),
        ("monotonicity", monotonicity),
        ("single-server recursion", lindley),
    ]


def cmd_selftest():
    return [_check(name, fn) for name, fn in selftest_checks()]


# -- entry point -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario file (TOML)")
    common.add_argument("--seed", type=int)
    common.add_argument("--customers", type=int)
    common.add_argument("--burn-in", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", metavar="DIR", help="write results into DIR")
    common.add_argument("--strict", action="store_true",
                        help="exit with status 2 if any bracket check fails")
    common.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    parser = _Parser(prog="heavyq", description="Heavy-tailed multi-server queue toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("predict", parents=[common], help="evaluate asymptotic formulas")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo tail estimates")
    sub.add_parser("compare", parents=[common], help="simulation against theory")
    sub.add_parser("selftest", parents=[common], help="run built-in consistency checks")
    sub.add_parser("catalog", parents=[common], help="print the formula catalog")
    return parser


def _apply_overrides(sc, args):
    changes = {}
    for flag, key in (("seed", "seed"), ("customers", "customers"), ("burn_in", "burn_in"),
                      ("threads", "threads"), ("out", "out")):
        v = getattr(args, flag)
        if v is not None:
            changes[key] = v
    sc = replace(sc, **changes)
    _validate(sc)
    return sc


def _emit(text, sc, args, stem):
    directory = args.out or (sc.out if sc is not None else None)
    if directory:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        name = f"{sc.name}_{stem}" if sc is not None else stem
        target = path / f"{name}.{'json' if args.json else 'csv'}"
        target.write_text(text)
        print(f"wrote {target}", file=sys.stderr)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "catalog":
            print(asymp.catalog_json())
            return EXIT_OK
        if args.command == "selftest":
            results = cmd_selftest()
            if args.json:
                print(json.dumps(results, indent=2))
            else:
                for r in results:
                    print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}")
            return EXIT_OK if all(r["passed"] for r in results) else EXIT_NUMERIC
        if not args.config:
            parser.error(f"{args.command} needs --config")
        sc = _apply_overrides(load_scenario(args.config), args)
        info = asymp.classify_regime(sc.queue_config().a, sc.queue_config().b, sc.servers)
        if not info.has_exact:
            print(f"warning: no exact asymptotic for the {info.regime.value} regime; "
                  "bounds only", file=sys.stderr)
        with warnings.catch_warnings():
            warnings.simplefilter("always", InsufficientSamples)
            if args.command == "predict":
                _emit(cmd_predict(sc, args.json), sc, args, "predictions")
            elif args.command == "simulate":
                _emit(cmd_simulate(sc, args.json), sc, args, "estimates")
            elif args.command == "compare":
                text, rows = cmd_compare(sc, args.json)
                _emit(text, sc, args, "comparison")
                print(summarize(rows), file=sys.stderr)
                if args.strict and any(r.bracket_pass is False for r in rows):
                    return EXIT_BRACKET
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergent, CouplingViolation, MajorantViolation, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HeavyQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
