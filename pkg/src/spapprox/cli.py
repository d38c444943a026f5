"""Command-line front end.

Every command reads a descriptor (``--config``), optionally overridden by
``--set key=value`` pairs that land in ``params``, evaluates one module
operation per sweep point and writes a CSV or JSON table, a manifest and
optionally an SVG plot into ``--out``.  Sweep points are independent, so
``--jobs`` only changes the wall time, never the bytes written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .config import (
    canonical_hash,
    load_descriptor,
    parse_element,
    parse_float,
    parse_index,
    parse_range,
    parse_value,
)
from .errors import DescriptorError, SpApproxError

Row = dict[str, Any]


# ---------------------------------------------------------------------------
# descriptor helpers (run inside workers)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _system_from_json(blob: str):
    from .psi_system import build_system

    return build_system(json.loads(blob))


def _system(desc: dict) -> Any:
    spec = desc.get("system")
    if spec is None:
        raise DescriptorError("system: missing")
    if spec == "unit":
        return "unit"
    return _system_from_json(json.dumps(spec, sort_keys=True))


def _element(desc: dict):
    return parse_element(desc.get("element"), desc.get("_base"))


def _param(desc: dict, key: str, default: Any = ...) -> Any:
    params = desc.get("params", {})
    if key in params:
        return params[key]
    if default is ...:
        raise DescriptorError(f"params.{key}: missing")
    return default


def _num(desc: dict, key: str, default: Any = ...) -> float:
    return parse_float(_param(desc, key, default), key)


def _int(desc: dict, key: str, default: Any = ...) -> int:
    value = _param(desc, key, default)
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DescriptorError(f"params.{key}: expected an integer, got {value!r}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Command:
    name: str
    items: Callable[[dict], list]
    run: Callable[[dict, Any], list[Row]]
    operation: str
    x: str | None = None
    y: tuple[str, ...] = ()


def _single(desc: dict) -> list:
    return [None]


def _n_sweep(desc: dict) -> list:
    return parse_range(_param(desc, "n"), "n", integer=True)


def _charseq(desc, _):
    from .psi_system import char_sequences

    cs = char_sequences(_system(desc), _int(desc, "levels"))
    return [{"n": i, "epsilon": float(cs.epsilon[i - 1]), "delta": cs.delta[i]}
            for i in range(1, cs.levels + 1)]


def _rearrange(desc, _):
    from .psi_system import rearrangement

    vals = rearrangement(_system(desc), _int(desc, "count"))
    return [{"k": i, "value": float(v)} for i, v in enumerate(vals, start=1)]


REGION_FIELDS = {"triangular": ("d", "m"), "ball": ("d", "r", "m"), "cross": ("d", "n"),
                 "gn": ("n",), "explicit": ()}


def _region(desc, _):
    from .psi_system import region

    kind = _param(desc, "kind")
    wanted = REGION_FIELDS.get(kind)
    if wanted is None:
        raise DescriptorError(f"params.kind: unknown region kind {kind!r}")
    params = {}
    for key in wanted:
        params[key] = _num(desc, key) if key == "r" else _int(desc, key)
    if kind == "gn":
        params["psi"] = _system(desc)
    elif kind == "explicit":
        params["items"] = [parse_index(x) for x in _param(desc, "items")]
    reg = region(kind, **params)
    try:
        members = sorted(reg.members())
    except NotImplementedError:
        return [{"cardinality": reg.cardinality()}]
    rows = []
    for k in members:
        ks = (k,) if isinstance(k, int) else k
        rows.append({f"k{j + 1}": x for j, x in enumerate(ks)})
    return rows


def _count_items(desc):
    return parse_range(_param(desc, "m"), "m", integer=True)


def _count(desc, m):
    from .psi_system import lattice_count

    d, r = _int(desc, "d"), _num(desc, "r")
    return [{"d": d, "r": r, "m": m, "V_m": lattice_count(d, r, m)}]


def _gamma(desc, _):
    from .extremal import ellipsoid_gamma_error

    gamma = [parse_index(x) for x in _param(desc, "gamma")]
    res = ellipsoid_gamma_error(_system(desc), gamma, _num(desc, "p"), _num(desc, "q"))
    return [{"value": res.value, "formula": res.formula}]


def _widths(desc, n):
    from .extremal import widths

    res = widths(_system(desc), n, _num(desc, "p"), _num(desc, "q"))
    return [{"n": n, "value": res.value}]


def _kwidth(desc, _):
    from .extremal import kolmogorov_width_table

    q = _param(desc, "q", None)
    table = kolmogorov_width_table(_system(desc), _num(desc, "p"), _int(desc, "levels"),
                                   None if q is None else parse_float(q, "q"))
    return [{"level": s.level, "m_low": s.m_low, "m_high": s.m_high, "value": float(s.value)}
            for s in table]


def _nterm(desc, n):
    from .extremal import nterm

    res = nterm(_system(desc), n, _num(desc, "p"), _num(desc, "q"))
    return [{"n": n, "value": res.value, "s_star": res.witness}]


def _constrained(desc, n):
    from .extremal import constrained_nterm

    res = constrained_nterm(_system(desc), n, _num(desc, "p"), _num(desc, "q"),
                            _param(desc, "family", "G1"), bool(_param(desc, "strict", False)))
    return [{"n": n, "value": res.value, "upper_bound": bool(res.details.get("upper_bound", False))}]


def _identity_direct(desc, n):
    from .identities import direct_identity_residual

    rep = direct_identity_residual(_element(desc), _system(desc), _num(desc, "p"), n)
    return [{"n": n, "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
             "relative_residual": rep.relative_residual}]


def _identity_inverse(desc, n):
    from .identities import inverse_identity_check

    series, rep = inverse_identity_check(_element(desc), _system(desc), _num(desc, "p"), n)
    return [{"n": n, "series": series, "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
             "relative_residual": rep.relative_residual}]


def _t_sweep(desc):
    return parse_range(_param(desc, "t"), "t")


def _modulus(desc, t):
    from .identities import ModulusQuery, smoothness_modulus

    query = ModulusQuery(_num(desc, "alpha"), t, _num(desc, "p"), _int(desc, "resolution", 16),
                         _param(desc, "shift", "diagonal"))
    return [{"t": t, "value": smoothness_modulus(_element(desc), query)}]


def _bernstein(desc, n):
    from .identities import bernstein_check

    rep = bernstein_check(_element(desc), _system(desc), _num(desc, "p"), n)
    return [{"n": n, "lhs": rep.lhs, "rhs": rep.rhs, "holds": rep.holds}]


def _inverse_bound(desc, n):
    from .identities import inverse_bound_check

    rep = inverse_bound_check(_element(desc), _num(desc, "alpha"), _num(desc, "p"), n,
                              _param(desc, "shift", "diagonal"))
    return [{"n": n, "lhs": rep.lhs, "rhs_exact": rep.rhs_exact, "rhs_relaxed": rep.rhs_relaxed,
             "holds": rep.holds, "relaxation_valid": rep.relaxation_valid}]


def _lambda_sweep(desc):
    return parse_range(_param(desc, "lambda"), "lambda")


def _In_items(desc):
    return [(lam, n) for lam in _lambda_sweep(desc) for n in _n_sweep(desc)]


def _In(desc, item):
    from .jackson import In_integral, closed_form_In

    lam, n = item
    res = In_integral(n, lam)
    return [{"lambda": lam, "n": n, "value": res.value, "argmin_nu": res.argmin_nu,
             "limit": res.limit_candidate, "closed_form": closed_form_In(lam)}]


def _sigma(desc, lam):
    from .jackson import SIGMA_TOL, closed_form_In, sigma_series

    tol = desc.get("_tol") or SIGMA_TOL
    sig = sigma_series(lam, tol)
    bound = (lam + 1) / (2 ** (2 * lam) + 2 ** (lam - 1) * (lam + 1) * sig)
    return [{"lambda": lam, "sigma": sig, "closed_form": closed_form_In(lam), "constant_bound": bound}]


def _jackson_check(desc, n):
    from .jackson import jackson_checks

    rep = jackson_checks(_element(desc), _num(desc, "alpha"), _num(desc, "p"), n)
    row = {"n": n, "best_approximation_p": rep.best_approximation_p, "omega": rep.modulus_at_pi_over_n,
           "In": rep.In, "integral_rhs": rep.data["integral_rhs"], "uniform_rhs": rep.data["uniform_rhs"]}
    for key in ("integral", "uniform", "integer", "strict", "sigma"):
        row[f"holds_{key}"] = rep.checks.get(key, "")
    return [row]


def _cnap(desc, n):
    from .jackson import cnap_upper_bound

    res = cnap_upper_bound(n, _num(desc, "alpha"), _num(desc, "p"), _num(desc, "tau", math.pi),
                           _int(desc, "atom_budget", 4))
    return [{"n": n, "bound": res.bound, "atoms_used": res.atoms_used, "lower_In": res.lower_In}]


def _rules(desc):
    rules = _param(desc, "rules", None)
    if rules is None:
        rules = [_param(desc, "rule")]
    return rules


def _classify(desc, rule):
    from .func_classes import classify

    lab = classify(rule)
    ev = lab.evidence
    return [{"rule": json.dumps(rule, sort_keys=True), "label": lab.label,
             "mu_min": ev["mu_range"][0], "mu_max": ev["mu_range"][1], "mu_trend": ev["mu_trend"],
             "alpha_trend": ev["alpha_trend"], "ratio_trend": ev["ratio_trend"],
             "delta2": ev["delta2"], "convex": ev["convex"]}]


def _order_args(desc):
    d = _param(desc, "d", None)
    return dict(d=None if d is None else int(d), r=_num(desc, "r", math.inf),
                argument=_param(desc, "argument", "volume"))


def _order(desc, n):
    from .func_classes import order_formula

    ov = order_formula(_param(desc, "kind"), _num(desc, "p"), _num(desc, "q"), _param(desc, "rule"), n,
                       **_order_args(desc))
    return [{"n": n, "value": ov.value, "statement": ov.statement, "tag": ov.tag}]


def _ratio(desc, n):
    from .func_classes import exact_class_values, order_formula

    args = _order_args(desc)
    if args["d"] is None:
        raise DescriptorError("params.d: the ratio command needs a lattice dimension")
    kind, p, q, rule = _param(desc, "kind"), _num(desc, "p"), _num(desc, "q"), _param(desc, "rule")
    exact = exact_class_values(kind, p, q, rule, [n], d=args["d"], r=args["r"])[0]
    order = order_formula(kind, p, q, rule, n, **args).value
    return [{"n": n, "exact": exact, "order": order, "ratio": exact / order}]


def _method(desc, **override):
    from .linmethods import method_multipliers

    spec = dict(_param(desc, "method"))
    spec.update(override)
    tag = spec.pop("tag")
    return method_multipliers(tag, **spec)


def _lin_apply(desc, _):
    from .linmethods import apply_method

    out = apply_method(_element(desc), _method(desc))
    rows = []
    for k, c in out.items():
        ks = (k,) if isinstance(k, int) else k
        row = {f"k{j + 1}": x for j, x in enumerate(ks)}
        row.update({"re": c.real, "im": c.imag})
        rows.append(row)
    return rows


def _lin_error_items(desc):
    key = _param(desc, "sweep")
    return parse_range(_param(desc, key), key, integer=(key == "n"))


def _lin_error(desc, value):
    from .linmethods import method_error

    key = _param(desc, "sweep")
    return [{key: value, "error": method_error(_element(desc), _method(desc, **{key: value}), _num(desc, "p"))}]


def _lin_rate(desc, _):
    from .identities import power_majorant
    from .linmethods import method_rate_report

    family = _param(desc, "family")
    key = "n" if family == "fejer" else "rho"
    sweep = parse_range(_param(desc, key), key, integer=(key == "n"))
    rep = method_rate_report(_element(desc), family, power_majorant(_num(desc, "omega_exponent", 1.0)),
                             sweep, _num(desc, "p", 1.0), _int(desc, "r", 1), _int(desc, "s", 1))
    names = sorted(rep.columns)
    return [{key: x, **{c: rep.columns[c][i] for c in names}} for i, x in enumerate(sweep)]


def _oracle(desc, n):
    from .extremal import ellipsoid_gamma_error, nterm
    from .oracles import diagonal_norm_oracle
    from .psi_system import build_system

    moduli = [float(x) for x in _param(desc, "moduli")]
    task = _param(desc, "task")
    p, q = _num(desc, "p"), _num(desc, "q")
    seed = int(desc.get("_seed", 0))
    value = diagonal_norm_oracle(moduli, n, p, q, task, restarts=_int(desc, "restarts", 64), seed=seed)
    system = build_system({"mode": "table", "table": [[i + 1, m] for i, m in enumerate(moduli)]})
    if task == "nterm":
        closed = nterm(system, n, p, q).value
    else:
        closed = ellipsoid_gamma_error(system, list(range(1, n + 1)), p, q).value
    return [{"n": n, "oracle": value, "closed_form": closed}]


COMMANDS: dict[str, Command] = {c.name: c for c in [
    Command("charseq", _single, _charseq, "psi_system.char_sequences", "n", ("epsilon",)),
    Command("rearrange", _single, _rearrange, "psi_system.rearrangement", "k", ("value",)),
    Command("region", _single, _region, "psi_system.region"),
    Command("count", _count_items, _count, "psi_system.lattice_count", "m", ("V_m",)),
    Command("extremal gamma", _single, _gamma, "extremal.ellipsoid_gamma_error"),
    Command("extremal widths", _n_sweep, _widths, "extremal.widths", "n", ("value",)),
    Command("extremal kwidth", _single, _kwidth, "extremal.kolmogorov_width_table", "level", ("value",)),
    Command("extremal nterm", _n_sweep, _nterm, "extremal.nterm", "n", ("value",)),
    Command("extremal constrained", _n_sweep, _constrained, "extremal.constrained_nterm", "n", ("value",)),
    Command("identity direct", _n_sweep, _identity_direct, "identities.direct_identity_residual", "n",
            ("lhs", "rhs")),
    Command("identity inverse", _n_sweep, _identity_inverse, "identities.inverse_identity_check", "n",
            ("lhs", "rhs")),
    Command("modulus", _t_sweep, _modulus, "identities.smoothness_modulus", "t", ("value",)),
    Command("bernstein", _n_sweep, _bernstein, "identities.bernstein_check", "n", ("lhs", "rhs")),
    Command("inverse-bound", _n_sweep, _inverse_bound, "identities.inverse_bound_check", "n",
            ("lhs", "rhs_exact", "rhs_relaxed")),
    Command("jackson In", _In_items, _In, "jackson.In_integral", "n", ("value",)),
    Command("jackson sigma", _lambda_sweep, _sigma, "jackson.sigma_series", "lambda", ("sigma",)),
    Command("jackson check", _n_sweep, _jackson_check, "jackson.jackson_checks", "n",
            ("best_approximation_p", "uniform_rhs")),
    Command("jackson cnap", _n_sweep, _cnap, "jackson.cnap_upper_bound", "n", ("bound",)),
    Command("classify", _rules, _classify, "func_classes.classify"),
    Command("order", _n_sweep, _order, "func_classes.order_formula", "n", ("value",)),
    Command("ratio", _n_sweep, _ratio, "func_classes.ratio_validation", "n", ("exact", "order")),
    Command("linmethod apply", _single, _lin_apply, "linmethods.apply_method"),
    Command("linmethod error", _lin_error_items, _lin_error, "linmethods.method_error"),
    Command("linmethod rate", _single, _lin_rate, "linmethods.method_rate_report"),
    Command("oracle", _n_sweep, _oracle, "oracles.diagonal_norm_oracle", "n", ("oracle", "closed_form")),
]}

GROUPS = {
    "extremal": ("gamma", "widths", "kwidth", "nterm", "constrained"),
    "identity": ("direct", "inverse"),
    "jackson": ("In", "sigma", "check", "cnap"),
    "linmethod": ("apply", "error", "rate"),
}


def _worker(task: tuple[str, dict, Any]) -> list[Row]:
    name, desc, item = task
    return COMMANDS[name].run(desc, item)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _plain(value: Any) -> Any:
    # numpy scalars would otherwise print as np.float64(...)
    if hasattr(value, "item") and not isinstance(value, (list, dict, str)):
        return value.item()
    return value


def format_cell(value: Any) -> str:
    """Shortest round-trip text for floats, lower-case booleans, empty for None."""
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _columns(rows: list[Row]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def render_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    cols = _columns(rows)
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def render_json(rows: list[Row]) -> str:
    def clean(v: Any) -> Any:
        v = _plain(v)
        if isinstance(v, float) and not math.isfinite(v):
            return format_cell(v)
        return v

    return json.dumps([{k: clean(v) for k, v in row.items()} for row in rows], indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spapprox", description="Approximation characteristics in S^p spaces.")
    parser.add_argument("command", help="command name, e.g. 'charseq' or 'jackson In'")
    parser.add_argument("subcommand", nargs="?", help="subcommand for grouped commands")
    parser.add_argument("--config", help="YAML or JSON descriptor")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override params.KEY (repeatable)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--plot", action="store_true", help="also write an SVG plot")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--tol", type=float, default=None, help="series tolerance where applicable")
    parser.add_argument("--seed", type=int, default=0, help="oracle restart seed")
    return parser


def _resolve(args: argparse.Namespace) -> str:
    name = args.command
    if name in GROUPS:
        if args.subcommand not in GROUPS[name]:
            raise DescriptorError(f"{name}: subcommand must be one of {', '.join(GROUPS[name])}")
        return f"{name} {args.subcommand}"
    if args.subcommand is not None:
        raise DescriptorError(f"{name} takes no subcommand")
    if name not in COMMANDS:
        raise DescriptorError(f"unknown command {name!r}")
    return name


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        key = _resolve(args)
        if args.jobs < 1:
            raise DescriptorError("--jobs must be at least 1")
        desc = load_descriptor(args.config)
        params = dict(desc.get("params") or {})
        for item in args.set:
            if "=" not in item:
                raise DescriptorError(f"--set {item!r}: expected KEY=VALUE")
            k, v = item.split("=", 1)
            params[k.strip()] = parse_value(v)
        desc["params"] = params
        desc["_seed"] = args.seed
        desc["_tol"] = args.tol
        command = COMMANDS[key]
        items = command.items(desc)
        tasks = [(key, desc, item) for item in items]
        if args.jobs == 1 or len(tasks) == 1:
            chunks = [_worker(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                chunks = list(pool.map(_worker, tasks))
        rows = [row for chunk in chunks for row in chunk]
    except DescriptorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SpApproxError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as exc:
        # malformed descriptor values that slipped past field parsing
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    slug = key.replace(" ", "_")
    table = out / f"{slug}.{args.format}"
    table.write_text(render_csv(rows) if args.format == "csv" else render_json(rows), encoding="utf-8",
                     newline="")
    outputs = [table.name]
    if args.plot and command.x and rows:
        from .plotting import write_svg

        xs = [row[command.x] for row in rows]
        series = {y: [row[y] for row in rows] for y in command.y if all(isinstance(row.get(y), (int, float)) for row in rows)}
        if series:
            write_svg(out / f"{slug}.svg", xs, series, command.x, log_y=True)
            outputs.append(f"{slug}.svg")
    inputs = {k: v for k, v in desc.items() if not k.startswith("_")}
    manifest = {
        "version": __version__,
        "command": key,
        "operation": f"spapprox.{command.operation}",
        "config-hash": canonical_hash(inputs),
        "inputs": inputs,
        "tolerances": {"tol": args.tol, **_tolerances()},
        "seed": args.seed,
        "outputs": outputs,
        "rows": len(rows),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                                       encoding="utf-8")
    return 0


def _tolerances() -> dict[str, float]:
    from .jackson import QUAD_TOL, SIGMA_TOL
    from .rules import TAIL_RTOL

    return {"quadrature": QUAD_TOL, "sigma": SIGMA_TOL, "tail_rtol": TAIL_RTOL}


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
