"""Command-line front end: CSV in, JSON (or text) out.

Exit codes: 0 success, 1 statistical degeneracy (the data defeated the
test), 2 input errors (bad file, bad columns, bad flags).  Results go to
stdout, diagnostics to stderr.  The only environment variable consulted is
EMPBRIDGE_THREADS (simulation replicate parallelism).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .bridge import empirical_bridge, write_bridge_tsv
from .chisq import prepared_design, run_test
from .errors import (
    DegeneracyError,
    DuplicateColumn,
    InputError,
    InvalidSpec,
    NonNumericField,
    ParseError,
)
from .model import Dataset, fit_lse
from .simulate import (
    ModelSpec,
    empirical_bridge_covariance,
    monte_carlo_level,
    monte_carlo_power,
)


def ingest_csv(path: str, response: str, order_by: str = "none",
               covariates: list[str] | None = None):
    """Read a headed CSV into a Dataset, preserving file row order.

    Returns ``(dataset, order_mode)`` where order_mode is ``None`` (rows
    used as given), ``"key"`` (external order column, kept out of the
    design) or a column index into the design (ordering by a covariate,
    which stays in the design).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: file is empty, expected a header row") from None
            header = [name.strip() for name in header]
            seen = set()
            for name in header:
                if name in seen:
                    raise DuplicateColumn(f"{path}: column name {name!r} appears twice in the header")
                seen.add(name)
            rows = []
            for line_no, record in enumerate(reader, start=2):
                if len(record) != len(header):
                    raise ParseError(
                        f"{path}: line {line_no} has {len(record)} fields, expected {len(header)}"
                    )
                parsed = []
                for name, field in zip(header, record):
                    try:
                        value = float(field)
                    except ValueError:
                        raise NonNumericField(
                            f"{path}: line {line_no}, column {name!r}: {field!r} is not numeric"
                        ) from None
                    if not math.isfinite(value):
                        raise NonNumericField(
                            f"{path}: line {line_no}, column {name!r}: {field!r} is not finite"
                        )
                    parsed.append(value)
                rows.append(parsed)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    if response not in header:
        raise InputError(f"response column {response!r} not found in header {header}")
    columns = {name: np.array([row[j] for row in rows]) for j, name in enumerate(header)}

    if covariates is None:
        covariate_names = [name for name in header if name != response]
    else:
        covariate_names = covariates
        for name in covariate_names:
            if name not in header:
                raise InputError(f"covariate column {name!r} not found in header {header}")
            if name == response:
                raise InputError(f"column {name!r} cannot be both covariate and response")

    order_mode: int | str | None
    order_key = None
    if order_by == "none":
        order_mode = None
    elif order_by in covariate_names:
        order_mode = covariate_names.index(order_by)
    elif order_by in header:
        order_mode = "key"
        order_key = columns[order_by]
    else:
        raise InputError(f"order column {order_by!r} not found in header {header}")

    n = len(rows)
    if covariate_names:
        x = np.column_stack([columns[name] for name in covariate_names])
    else:
        x = np.empty((n, 0))
    dataset = Dataset(x=x, y=columns[response], order_key=order_key)
    return dataset, order_mode


def write_csv(dataset: Dataset, path: str, *, key_name: str = "key",
              covariate_names: list[str] | None = None,
              response_name: str = "y") -> None:
    """Write a Dataset back to CSV (repr floats, so re-ingestion is exact)."""
    names = covariate_names or [f"x{j + 1}" for j in range(dataset.m)]
    if len(names) != dataset.m:
        raise InputError(f"need {dataset.m} covariate names, got {len(names)}")
    header = ([key_name] if dataset.order_key is not None else []) + names + [response_name]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = []
            if dataset.order_key is not None:
                row.append(repr(float(dataset.order_key[i])))
            row.extend(repr(float(v)) for v in dataset.x[i])
            row.append(repr(float(dataset.y[i])))
            writer.writerow(row)


def _format_text(result, alpha: float) -> str:
    lines = [
        f"{'n':<12}{result.n}",
        f"{'m':<12}{result.m}",
        f"{'d':<12}{result.d}",
        f"{'statistic':<12}{result.statistic:.10g}",
        f"{'p_value':<12}{result.p_value:.10g}",
        f"{'sigma_hat2':<12}{result.sigma_hat2:.10g}",
        f"{'theta_hat':<12}{'  '.join(f'{v:.10g}' for v in result.theta_hat)}",
        f"{'grid':<12}{'  '.join(f'{v:.10g}' for v in result.grid)}",
        f"{'q':<12}{'  '.join(f'{v:.10g}' for v in result.q)}",
    ]
    for i, row in enumerate(result.q_matrix):
        label = "Q" if i == 0 else ""
        lines.append(f"{label:<12}{'  '.join(f'{v:.10g}' for v in row)}")
    verdict = "reject" if result.p_value < alpha else "no rejection"
    lines.append(f"{'decision':<12}{verdict} at alpha={alpha:g}")
    return "\n".join(lines)


def _parse_name_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    if text.strip() == "none":
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_family(text: str | None, flag: str) -> tuple | None:
    # "uniform:0,1" -> ("uniform", 0.0, 1.0)
    if text is None:
        return None
    name, _, params = text.partition(":")
    name = name.strip()
    if not name:
        raise InputError(f"{flag}: missing family name in {text!r}")
    return (name,) + (_parse_floats(params) if params else ())


def cmd_test(args) -> int:
    if not 0.0 < args.alpha < 1.0:
        raise InputError(f"--alpha must lie strictly inside (0, 1), got {args.alpha}")
    dataset, order_mode = ingest_csv(
        args.input, args.response, args.order_by, _parse_name_list(args.covariates)
    )
    intercept = not args.no_intercept
    result = run_test(dataset, d=args.d, intercept=intercept, order_by=order_mode)
    if args.emit_bridge:
        design = prepared_design(dataset, intercept=intercept, order_by=order_mode)
        write_bridge_tsv(empirical_bridge(fit_lse(design)), args.emit_bridge)
    if args.output == "json":
        print(json.dumps(result.to_dict()))
    else:
        print(_format_text(result, args.alpha))
    return 0


def _spec_from_args(args) -> ModelSpec:
    try:
        return ModelSpec(
            kind=args.kind,
            theta=_parse_floats(args.theta),
            intercept=not args.no_intercept,
            noise_sd=args.noise_sd,
            covariate_dist=_parse_family(args.covariate_dist, "--covariate-dist"),
            h=tuple(_parse_floats(part) for part in args.h.split(";")) if args.h else None,
            error_dist=args.error_dist,
            mean_shift=_parse_family(args.mean_shift, "--mean-shift"),
        )
    except IndexError:
        raise InvalidSpec("malformed simulation spec flags") from None


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    if args.subcommand == "level":
        report = monte_carlo_level(spec, args.n, args.reps, args.d, args.alpha, args.seed)
    elif args.subcommand == "power":
        report = monte_carlo_power(spec, args.n, args.reps, args.d, args.alpha, args.seed)
    else:
        grid = _parse_floats(args.grid)
        report = empirical_bridge_covariance(spec, args.n, args.reps, grid, args.seed)
    print(json.dumps(report))
    return 0


def _add_spec_flags(parser) -> None:
    parser.add_argument("--kind", choices=("order-by-covariate", "external-order"),
                        default="order-by-covariate")
    parser.add_argument("--theta", default="1,1",
                        help="coefficients, intercept last when present (default: 1,1)")
    parser.add_argument("--no-intercept", action="store_true")
    parser.add_argument("--noise-sd", type=float, default=1.0)
    parser.add_argument("--covariate-dist", default="uniform:0,1",
                        help="uniform:a,b | normal:mu,s | exponential:rate")
    parser.add_argument("--h", default=None,
                        help="external-order polynomials, ascending coefficients, "
                             "';' between columns (e.g. '0,1;1,0,2')")
    parser.add_argument("--error-dist", choices=("normal", "uniform", "student-t5"),
                        default="normal")
    parser.add_argument("--mean-shift", default=None,
                        help="quadratic:amp | changepoint:amp (power runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="empbridge",
        description="Goodness-of-fit test for linear regression on ordered data, "
                    "via the empirical bridge of residual partial sums.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run the test on a CSV file")
    t.add_argument("--input", required=True, help="CSV file with a header row")
    t.add_argument("--response", required=True, help="response column name")
    t.add_argument("--order-by", default="none",
                   help="ordering column; 'none' means rows are already ordered "
                        "(the test is meaningless under arbitrary row order)")
    t.add_argument("--covariates", default=None,
                   help="comma-separated covariate columns; default all remaining; "
                        "'none' for an intercept-only design")
    t.add_argument("--no-intercept", action="store_true")
    t.add_argument("--d", type=int, default=3, help="degrees of freedom (default 3)")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--emit-bridge", default=None, metavar="PATH",
                   help="write the bridge path as TSV")
    t.add_argument("--output", choices=("json", "text"), default="json")

    s = sub.add_parser("simulate", help="Monte Carlo experiments")
    ssub = s.add_subparsers(dest="subcommand", required=True)
    for name, description in (
        ("level", "rejection rate under the null"),
        ("covariance", "bridge covariance vs the closed-form kernel"),
        ("power", "rejection rate under a mean-shift alternative"),
    ):
        sp = ssub.add_parser(name, help=description)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--reps", type=int, required=True)
        sp.add_argument("--seed", type=int, default=0)
        if name == "covariance":
            sp.add_argument("--grid", default="0.25,0.5,0.75",
                            help="comma-separated points in (0,1)")
        else:
            sp.add_argument("--d", type=int, default=3)
            sp.add_argument("--alpha", type=float, default=0.05)
        _add_spec_flags(sp)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "test":
            return cmd_test(args)
        return cmd_simulate(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
