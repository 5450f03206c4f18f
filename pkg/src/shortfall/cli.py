"""Command-line front end.

    shortfall table1|table2|table3 [--format csv|markdown|json]
    shortfall estimate --alpha 0.8 --input losses.csv
    shortfall choquet --law chi2 --k 1 --alpha 0.9
    shortfall simulate --x-law normal --v-law gaussian --deltas 0,0.05 --n 100000

Exit codes: 0 success, 2 domain error, 3 numerical failure, 64 usage error.
The default output format can be set with SHORTFALL_FORMAT.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import heavy_tail, measurement_error, montecarlo
from .choquet import CvarDistortion, choquet_expected_loss, cvar_quantile_integral
from .distributions import ChiSquareLaw, NormalLaw, UniformLaw
from .empirical import MODES, empirical_cvar
from .errors import DomainError, InputError, NumericalError
from .quadrature import QuadratureConfig

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64

FORMATS = ("csv", "markdown", "json")
FORMAT_ENV = "SHORTFALL_FORMAT"
COMMANDS = ("table1", "table2", "table3", "estimate", "choquet", "simulate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass(frozen=True)
class CliConfig:
    command: str
    alpha: Optional[float] = None
    input_path: Optional[str] = None
    output_format: str = "csv"
    seed: int = 0
    digits: int = 4
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    options: dict = field(default_factory=dict)

    def quadrature(self) -> QuadratureConfig:
        overrides = {k: v for k, v in (("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)) if v is not None}
        return QuadratureConfig(**overrides)


# ---------------------------------------------------------------- formatting

def _cell(value, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{digits}g}"
    return str(value)


def _json_value(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def render(table: Table, fmt: str, digits: int = 4) -> str:
    if fmt == "json":
        records = [{c: _json_value(v) for c, v in zip(table.columns, row)} for row in table.rows]
        return json.dumps(records, indent=2) + "\n"
    cells = [[_cell(v, digits) for v in row] for row in table.rows]
    if fmt == "markdown":
        lines = ["| " + " | ".join(table.columns) + " |", "|" + "---|" * len(table.columns)]
        lines += ["| " + " | ".join(r) + " |" for r in cells]
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    writer.writerows(cells)
    return buf.getvalue()


# ---------------------------------------------------------------- input

def read_losses(text: str, strict: bool = False) -> list[float]:
    """Parse a one-column CSV of losses; the ``loss`` header is optional unless strict."""
    reader = csv.reader(io.StringIO(text))
    values: list[float] = []
    column = 0
    seen_first = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not f.strip() for f in row):
            continue
        fields = [f.strip() for f in row]
        if not seen_first:
            seen_first = True
            lowered = [f.lower() for f in fields]
            if "loss" in lowered:
                column = lowered.index("loss")
                width = len(fields)
                continue
            if strict:
                raise InputError("missing header with a 'loss' column", line=lineno)
            width = 1
        if len(fields) != width:
            raise InputError(f"expected {width} field(s), found {len(fields)}", line=lineno)
        try:
            x = float(fields[column])
        except ValueError:
            raise InputError(f"not a number: {fields[column]!r}", line=lineno) from None
        if not math.isfinite(x):
            raise InputError(f"non-finite loss {fields[column]!r}", line=lineno)
        values.append(x)
    if not values:
        raise InputError("no loss values found")
    return values


def _load_input(path: Optional[str], strict: bool) -> list[float]:
    if path is None or path == "-":
        return read_losses(sys.stdin.read(), strict)
    try:
        with open(path, newline="") as fh:
            return read_losses(fh.read(), strict)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------- commands

def _make_law(opts: dict):
    name = opts["law"]
    if name == "normal":
        return NormalLaw(opts["mu"], opts["sigma"])
    if name == "chi2":
        return ChiSquareLaw(opts["k"])
    if name == "uniform":
        return UniformLaw(opts["lo"], opts["hi"])
    raise DomainError(f"unknown law {name!r}")


def _require_alpha(cfg: CliConfig) -> float:
    if cfg.alpha is None:
        raise UsageError(f"{cfg.command}: one of --alpha or --tail-mass is required")
    return cfg.alpha


def _table1(cfg: CliConfig) -> Table:
    alpha = 0.96 if cfg.alpha is None else cfg.alpha
    deltas, ks = cfg.options["deltas"], cfg.options["ks"]
    reports = measurement_error.table1(alpha, deltas, ks, cfg=cfg.quadrature())
    table = Table(["Delta"] + [f"K={k:g}" for k in ks])
    for i, d in enumerate(deltas):
        table.rows.append([d] + [r.value for r in reports[i * len(ks):(i + 1) * len(ks)]])
    return table


def _gamma_label(g: float) -> str:
    return "gamma=inf" if math.isinf(g) else f"gamma={g:g}"


def _table2(cfg: CliConfig) -> Table:
    gammas = cfg.options.get("gammas") or heavy_tail.TABLE2_GAMMAS
    alphas = heavy_tail.TABLE2_ALPHAS if cfg.alpha is None else (cfg.alpha,)
    rows = heavy_tail.table2(alphas, gammas, cfg=cfg.quadrature())
    table = Table(["alpha", "F0_quantile", "cvar_F0"] + [_gamma_label(g) for g in gammas])
    for r in rows:
        table.rows.append([r.alpha, r.tau, r.cvar_F0, *r.values])
    return table


def _table3(cfg: CliConfig) -> Table:
    gammas = cfg.options.get("gammas") or heavy_tail.TABLE3_GAMMAS
    alpha = heavy_tail.TABLE3_ALPHA if cfg.alpha is None else cfg.alpha
    rows = heavy_tail.table3(heavy_tail.TABLE3_EPSILONS, gammas, alpha, cfg=cfg.quadrature(),
                             direct=cfg.options.get("direct", False))
    cols = ["epsilon"] + [_gamma_label(g) for g in gammas]
    if cfg.options.get("direct"):
        cols += ["direct_" + _gamma_label(g) for g in gammas]
    table = Table(cols)
    for r in rows:
        table.rows.append([r.epsilon, *r.values, *r.direct])
    return table


def _estimate(cfg: CliConfig) -> Table:
    alpha = _require_alpha(cfg)
    losses = _load_input(cfg.input_path, cfg.options.get("strict", False))
    rep = empirical_cvar(losses, alpha, cfg.options.get("mode", "default"))
    return Table(["alpha", "n", "m", "mode", "cvar"],
                 [[alpha, rep.inputs["n"], rep.inputs["m"], rep.inputs["mode"], rep.value]])


def _choquet(cfg: CliConfig) -> Table:
    alpha = _require_alpha(cfg)
    law = _make_law(cfg.options)
    q = cfg.quadrature()
    rep_c = choquet_expected_loss(law, CvarDistortion(alpha), q)
    rep_q = cvar_quantile_integral(law, alpha, q)
    return Table(["law", "alpha", "choquet", "quantile_integral", "difference"],
                 [[law.describe(), alpha, rep_c.value, rep_q.value, rep_c.value - rep_q.value]])


def _simulate(cfg: CliConfig) -> Table:
    alpha = _require_alpha(cfg)
    opts = cfg.options
    x_law = _make_law({**opts, "law": opts["x_law"]})
    v_law = montecarlo.error_law(opts["v_law"])
    rows = montecarlo.error_sensitivity_sweep(x_law, v_law, opts["deltas"], alpha, opts["n"],
                                              seed=cfg.seed, repetitions=opts["replicates"])
    return Table(["delta", "replicate", "empirical_cvar", "member_cvar"],
                 [[r.delta, r.replicate, r.empirical, r.member] for r in rows])


HANDLERS = {
    "table1": _table1,
    "table2": _table2,
    "table3": _table3,
    "estimate": _estimate,
    "choquet": _choquet,
    "simulate": _simulate,
}


def run(cfg: CliConfig) -> Table:
    return HANDLERS[cfg.command](cfg)


# ---------------------------------------------------------------- parsing

def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    level = common.add_mutually_exclusive_group()
    level.add_argument("--alpha", type=float, help="confidence level alpha")
    level.add_argument("--tail-mass", type=float, help="tail mass 1 - alpha")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--format", choices=FORMATS, default=None)
    fmt.add_argument("--markdown", action="store_const", const="markdown", dest="format")
    common.add_argument("--digits", type=int, default=4, help="significant digits for csv/markdown")
    common.add_argument("--rel-tol", type=float)
    common.add_argument("--abs-tol", type=float)
    common.add_argument("--seed", type=int, default=0)

    parser = _Parser(prog="shortfall", description="Expected shortfall and distortion risk measures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("table1", parents=[common], help="upper CVaR bounds under measurement error")
    p.add_argument("--deltas", type=_float_list, default=list(measurement_error.TABLE1_DELTAS))
    p.add_argument("--ks", type=_float_list, default=list(measurement_error.TABLE1_KS))
    p = sub.add_parser("table2", parents=[common], help="CVaR with a spliced Pareto tail")
    p.add_argument("--gammas", type=_float_list, help="Pareto indices, 'inf' allowed")
    p = sub.add_parser("table3", parents=[common], help="CVaR under Pareto-tail contamination")
    p.add_argument("--gammas", type=_float_list, help="Pareto indices, 'inf' allowed")
    p.add_argument("--direct", action="store_true", help="add the quadrature columns")

    p = sub.add_parser("estimate", parents=[common], help="empirical CVaR from a loss file")
    p.add_argument("--input", dest="input_path", help="CSV with a 'loss' column ('-' for stdin)")
    p.add_argument("--strict", action="store_true", help="require the header line")
    p.add_argument("--mode", choices=MODES, default="default")

    for name, helptext in (("choquet", "CVaR of a parametric law by two routes"),
                           ("simulate", "contaminated-sample sensitivity sweep")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--mu", type=float, default=0.0)
        p.add_argument("--sigma", type=float, default=1.0)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--lo", type=float, default=0.0)
        p.add_argument("--hi", type=float, default=1.0)
        if name == "choquet":
            p.add_argument("--law", choices=("normal", "chi2", "uniform"), default="normal")
        else:
            p.add_argument("--x-law", choices=("normal", "chi2", "uniform"), default="normal")
            p.add_argument("--v-law", choices=measurement_error.V_LAWS, default="gaussian")
            p.add_argument("--deltas", type=_float_list, default=[0.0, 0.05, 0.1])
            p.add_argument("--n", type=int, default=100_000)
            p.add_argument("--replicates", type=int, default=1)
    return parser


_GLOBAL_KEYS = {"command", "alpha", "tail_mass", "format", "digits", "rel_tol", "abs_tol", "seed", "input_path"}


def parse_config(argv: Optional[Sequence[str]] = None, environ=None) -> CliConfig:
    environ = os.environ if environ is None else environ
    ns = build_parser().parse_args(argv)
    alpha = ns.alpha
    if ns.tail_mass is not None:
        alpha = 1.0 - ns.tail_mass
    fmt = ns.format or environ.get(FORMAT_ENV, "csv")
    if fmt not in FORMATS:
        raise UsageError(f"{FORMAT_ENV}={fmt!r} is not one of {FORMATS}")
    if ns.digits < 1:
        raise UsageError("--digits must be >= 1")
    opts = {k: v for k, v in vars(ns).items() if k not in _GLOBAL_KEYS}
    return CliConfig(ns.command, alpha, getattr(ns, "input_path", None), fmt, ns.seed, ns.digits,
                     ns.rel_tol, ns.abs_tol, opts)


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        cfg = parse_config(argv)
        table = run(cfg)
    except UsageError as exc:
        print(exc, file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"domain error: {exc}", file=stderr)
        return EXIT_DOMAIN
    stdout.write(render(table, cfg.output_format, cfg.digits))
    return EXIT_OK
