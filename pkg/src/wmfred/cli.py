"""Command-line front end.

Every subcommand writes a report with the columns

    method,N,a,t,h,value,error,warnings,seed,wall_time_ms

(``kernel-dump`` writes x,xprime,value instead).  Floats use 17 significant
digits.  Wall times go to stderr unless ``--timing`` is given, so reruns with
the same configuration produce byte-identical files.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import NonConvergent, WMError

SCHEMA = ("method", "N", "a", "t", "h", "value", "error", "warnings", "seed", "wall_time_ms")
KERNEL_SCHEMA = ("x", "xprime", "value")
METHODS = ("fredholm", "series", "bc_contour", "cbm", "direct_oracle", "ncbm_oracle", "moment")

EXIT_CONFIG = 1
EXIT_NONCONVERGENT = 2
EXIT_SELFTEST = 3


class CliConfigError(Exception):
    pass


# --------------------------------------------------------------- configuration

@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    nu_hat: tuple[float, ...] = (-0.5, 0.5)
    a: float = 0.5
    t: float = 1.0
    h: tuple[float, ...] = (0.0,)
    seed: int = 0
    samples: int = 100_000
    gh_order: int = 64
    gl_order: int = 200
    contour: str = "shifted"
    workers: int = 1
    kappa: int = 2
    a_values: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    grid: tuple[float, ...] = (-2.0, 2.0, 0.5)
    out: str | None = None
    format: str = "csv"
    timing: bool = False

    def validate(self):
        if self.format not in ("csv", "json"):
            raise CliConfigError(f"format: expected csv or json, got {self.format!r}")
        if not self.nu_hat:
            raise CliConfigError("nu_hat: at least one entry required")
        if not 1 <= len(self.nu_hat) <= 3:
            raise CliConfigError(f"nu_hat: 1 to 3 entries supported, got {len(self.nu_hat)}")
        if not self.a > 0:
            raise CliConfigError(f"a: must be positive, got {self.a}")
        if not self.t > 0:
            raise CliConfigError(f"t: must be positive, got {self.t}")
        if not self.h:
            raise CliConfigError("h: empty grid")
        if not 0 <= self.seed < 2 ** 64:
            raise CliConfigError("seed: must be an unsigned 64-bit integer")
        if self.samples < 100:
            raise CliConfigError(f"samples: need at least 100, got {self.samples}")
        if self.gh_order < 2 or self.gh_order % 2:
            raise CliConfigError("gh_order: must be even and >= 2")
        if self.gl_order < 2:
            raise CliConfigError("gl_order: must be >= 2")
        if self.contour not in ("shifted", "real"):
            raise CliConfigError(f"contour: expected shifted or real, got {self.contour!r}")
        if self.workers < 1:
            raise CliConfigError("workers: must be >= 1")
        if not 1 <= self.kappa <= 3:
            raise CliConfigError("kappa: must be 1, 2 or 3")
        if any(v <= 0 for v in self.a_values):
            raise CliConfigError("a_values: must be positive")
        if len(self.grid) != 3 or self.grid[2] <= 0 or self.grid[1] < self.grid[0]:
            raise CliConfigError("grid: expected lo:hi:step with step > 0")
        return self

    def drift(self):
        from .kernel import DriftSpec

        return DriftSpec(tuple(self.nu_hat), self.a)

    def quad(self):
        from .numkit import QuadConfig

        return QuadConfig(gh_order=self.gh_order, gl_order=self.gl_order)


def parse_range(text: str) -> tuple[float, ...]:
    """'x' or 'lo:hi:step' (inclusive of hi up to rounding)."""
    parts = str(text).split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise CliConfigError(f"cannot parse {text!r} as a number or lo:hi:step") from exc
    if len(vals) == 1:
        return (vals[0],)
    if len(vals) != 3:
        raise CliConfigError(f"expected lo:hi:step, got {text!r}")
    lo, hi, step = vals
    if step <= 0 or hi < lo:
        raise CliConfigError(f"bad range {text!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(float(lo + i * step) for i in range(n))


def parse_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise CliConfigError(f"cannot parse {text!r} as a comma list") from exc


def _coerce(name: str, value):
    """Config-file values to RunConfig field types."""
    if name in ("nu_hat", "a_values"):
        return parse_list(value) if isinstance(value, str) else tuple(float(v) for v in value)
    if name == "h":
        if isinstance(value, (list, tuple)):
            return tuple(float(v) for v in value)
        return parse_range(value) if isinstance(value, str) else (float(value),)
    if name == "grid":
        if isinstance(value, str):
            vals = tuple(float(v) for v in value.split(":"))
        else:
            vals = tuple(float(v) for v in value)
        return vals
    if name in ("a", "t"):
        return float(value)
    if name in ("seed", "samples", "gh_order", "gl_order", "workers", "kappa"):
        if isinstance(value, bool) or float(value) != int(value):
            raise CliConfigError(f"{name}: expected an integer, got {value!r}")
        return int(value)
    if name == "timing":
        return bool(value)
    return value


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < command-line flags."""
    known = {f.name for f in fields(RunConfig)} - {"subcommand"}
    values: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise CliConfigError("config: top level must be an object")
        for key, val in data.items():
            name = key.replace("-", "_")
            if name not in known:
                raise CliConfigError(f"config: unknown field {key!r}")
            values[name] = _coerce(name, val)
    flag_map = {
        "nu_hat": args.nu_hat, "a": args.a, "t": args.t, "h": args.h, "seed": args.seed,
        "samples": args.samples, "gh_order": args.gh_order, "gl_order": args.gl_order,
        "contour": args.contour, "workers": args.workers, "kappa": args.kappa,
        "a_values": args.a_values, "grid": args.grid, "out": args.out, "format": args.format,
    }
    for name, val in flag_map.items():
        if val is not None:
            values[name] = _coerce(name, val)
    if args.timing:
        values["timing"] = True
    return RunConfig(subcommand=args.subcommand, **values).validate()


# -------------------------------------------------------------------- reports

@dataclass
class ReportRow:
    method: str
    N: int
    a: float
    t: float
    h: float
    value: float
    error: float
    warnings: str = ""
    seed: int = 0
    wall_time_ms: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown report method {self.method!r}")


def fmt_float(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return fmt_float(v)
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _json_value(v) -> str:
    if isinstance(v, float):
        s = fmt_float(v)
        return {"nan": "NaN", "inf": "Infinity", "-inf": "-Infinity"}.get(s, s)
    return json.dumps(v)


def emit_report(rows, fmt: str = "csv", columns=SCHEMA) -> str:
    """Render rows (ReportRow or dicts keyed by ``columns``) as CSV or JSON text."""
    if not rows:
        raise ValueError("no rows to report")
    dicts = [asdict(r) if isinstance(r, ReportRow) else dict(r) for r in rows]
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(columns) + "\n")
        for d in dicts:
            out.write(",".join(_csv_cell(d[c]) for c in columns) + "\n")
        return out.getvalue()
    if fmt == "json":
        items = []
        for d in dicts:
            items.append("{" + ", ".join(f"{json.dumps(c)}: {_json_value(d[c])}" for c in columns) + "}")
        return "[\n  " + ",\n  ".join(items) + "\n]\n"
    raise ValueError(f"unknown format {fmt!r}")


def read_csv_report(text: str) -> list[dict]:
    """Parse a report written by emit_report back into typed dicts."""
    import csv

    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for r in reader:
        rows.append({
            "method": r["method"], "N": int(r["N"]), "a": float(r["a"]), "t": float(r["t"]),
            "h": float(r["h"]), "value": float(r["value"]), "error": float(r["error"]),
            "warnings": r["warnings"], "seed": int(r["seed"]), "wall_time_ms": float(r["wall_time_ms"]),
        })
    return rows


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.start) * 1000.0
        return False


def _row(cfg: RunConfig, method: str, h: float, value: float, error: float, warnings, timer, a=None):
    row = ReportRow(method, len(cfg.nu_hat), float(cfg.a if a is None else a), float(cfg.t), float(h),
                    float(value), float(error), ";".join(warnings), cfg.seed, 0.0)
    print(f"[{method} h={fmt_float(h)}] {timer.ms:.1f} ms", file=sys.stderr)
    if cfg.timing:
        row.wall_time_ms = round(timer.ms, 3)
    return row


# ----------------------------------------------------------------- subcommands

def cmd_fredholm(cfg: RunConfig):
    from .fredholm import gram_matrix
    from .kernel import ObservablePoint

    drift, quad = cfg.drift(), cfg.quad()
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            G = gram_matrix(drift, ObservablePoint(cfg.t, h), quad, cfg.contour)
            val = float(np.linalg.det(np.eye(drift.N) - G.entries))
        rows.append(_row(cfg, "fredholm", h, val, G.error, (f"contour={cfg.contour}",) + G.warnings, tm))
    return rows


def cmd_series(cfg: RunConfig):
    from .fredholm import fredholm_series_direct
    from .kernel import ObservablePoint

    drift, quad = cfg.drift(), cfg.quad()
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            val = fredholm_series_direct(drift, ObservablePoint(cfg.t, h), quad, contour=cfg.contour)
        rows.append(_row(cfg, "series", h, val, float("nan"), (f"contour={cfg.contour}",), tm))
    return rows


def cmd_cbm(cfg: RunConfig):
    from .cbm import MCConfig, cbm_estimate
    from .kernel import ObservablePoint

    drift = cfg.drift()
    mc = MCConfig(sample_count=cfg.samples, seed=cfg.seed, workers=cfg.workers)
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            est = cbm_estimate(drift, ObservablePoint(cfg.t, h), mc)
        notes = (
            f"median_of_means={fmt_float(est.median_of_means)}",
            f"imag={fmt_float(est.imag_residual)}",
            f"imag_se={fmt_float(est.imag_std_error)}",
            f"rejected={est.rejected}",
            f"samples={est.n}",
        )
        rows.append(_row(cfg, "cbm", h, est.value, est.std_error, notes, tm))
    return rows


def cmd_oracle_direct(cfg: RunConfig):
    from .errors import UnsupportedN
    from .kernel import ObservablePoint
    from .measure import direct_observable

    if len(cfg.nu_hat) > 2:
        raise UnsupportedN("oracle-direct supports N <= 2")
    drift, quad = cfg.drift(), cfg.quad()
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            val = direct_observable(drift, ObservablePoint(cfg.t, h), quad)
        rows.append(_row(cfg, "direct_oracle", h, val, float("nan"), (), tm))
    return rows


def cmd_oracle_ncbm(cfg: RunConfig):
    from .ncbm import gap_probability, gap_probability_drifted

    quad = cfg.quad()
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            val = gap_probability_drifted(cfg.nu_hat, cfg.t, h, quad)
            notes = ["origin_start_drifted"]
            if cfg.t != 1.0:
                notes.append(f"start_at_drift_threshold_ht={fmt_float(gap_probability(cfg.nu_hat, cfg.t, h, quad))}")
        rows.append(_row(cfg, "ncbm_oracle", h, val, float("nan"), notes, tm, a=0.0))
    return rows


def cmd_bc_contour(cfg: RunConfig):
    from .fredholm import bc_fredholm_det
    from .kernel import ObservablePoint

    drift = cfg.drift()
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            res = bc_fredholm_det(drift, ObservablePoint(cfg.t, h))
        for L, (s, m, im) in enumerate(zip(res.partial_sums, res.term_magnitudes, res.imag_parts)):
            rows.append(_row(cfg, "bc_contour", h, s, m, (f"L={L}", f"imag={fmt_float(im)}"), tm))
    return rows


def cmd_moments(cfg: RunConfig):
    from .measure import moment_first, moment_kappa, moment_second_residue

    drift, quad = cfg.drift(), cfg.quad()
    rows = []
    nan = float("nan")
    for k in range(1, cfg.kappa + 1):
        with _Timer() as tm:
            contour = moment_kappa(drift, cfg.t, k, quad)
            if k == 1:
                residue = moment_first(drift, cfg.t, quad).residue
            elif k == 2:
                residue = moment_second_residue(drift, cfg.t)
            else:
                residue = nan
        rows.append(_row(cfg, "moment", nan, contour, abs(contour - residue) if k < 3 else nan,
                         (f"kappa={k}", "route=contour"), tm))
        if k < 3:
            rows.append(_row(cfg, "moment", nan, residue, abs(contour - residue),
                             (f"kappa={k}", "route=residue"), tm))
    return rows


def cmd_limit_sweep(cfg: RunConfig):
    from .fredholm import fredholm_rank_det
    from .kernel import DriftSpec, ObservablePoint
    from .ncbm import gap_probability_drifted

    quad = cfg.quad()
    rows = []
    for h in cfg.h:
        with _Timer() as tm:
            target = gap_probability_drifted(cfg.nu_hat, cfg.t, h, quad)
        rows.append(_row(cfg, "ncbm_oracle", h, target, float("nan"), ("limit",), tm, a=0.0))
        for a in cfg.a_values:
            with _Timer() as tm:
                val = fredholm_rank_det(DriftSpec(tuple(cfg.nu_hat), a), ObservablePoint(cfg.t, h), quad, cfg.contour)
            rows.append(_row(cfg, "fredholm", h, val, abs(val - target), ("error=|E_a-limit|",), tm, a=a))
    return rows


def cmd_kernel_dump(cfg: RunConfig):
    from .kernel import ObservablePoint, kernel_calK_grid

    lo, hi, step = cfg.grid
    xs = np.array(parse_range(f"{lo}:{hi}:{step}"))
    with _Timer() as tm:
        K = kernel_calK_grid(cfg.drift(), ObservablePoint(cfg.t, 0.0), xs, xs, cfg.quad(), cfg.contour)
    print(f"[kernel-dump] {tm.ms:.1f} ms", file=sys.stderr)
    return [{"x": float(x), "xprime": float(xp), "value": float(K[i, j])}
            for i, x in enumerate(xs) for j, xp in enumerate(xs)]


COMMANDS = {
    "fredholm": cmd_fredholm,
    "series": cmd_series,
    "cbm": cmd_cbm,
    "oracle-direct": cmd_oracle_direct,
    "oracle-ncbm": cmd_oracle_ncbm,
    "bc-contour": cmd_bc_contour,
    "moments": cmd_moments,
    "limit-sweep": cmd_limit_sweep,
    "kernel-dump": cmd_kernel_dump,
}


# ----------------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="report path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--nu-hat", dest="nu_hat", help="comma list, e.g. -0.5,0.5")
    common.add_argument("--a", type=float)
    common.add_argument("--t", type=float)
    common.add_argument("--h", help="value or lo:hi:step")
    common.add_argument("--samples", type=int)
    common.add_argument("--gh-order", dest="gh_order", type=int)
    common.add_argument("--gl-order", dest="gl_order", type=int)
    common.add_argument("--contour", choices=("shifted", "real"))
    common.add_argument("--workers", type=int)
    common.add_argument("--kappa", type=int)
    common.add_argument("--a-values", dest="a_values", help="comma list for limit-sweep")
    common.add_argument("--grid", help="lo:hi:step for kernel-dump")
    common.add_argument("--timing", action="store_true", help="write wall times into the report")

    parser = _Parser(prog="wmfred", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in list(COMMANDS) + ["selftest"]:
        sub.add_parser(name, parents=[common])
    return parser


def run(cfg: RunConfig) -> str:
    rows = COMMANDS[cfg.subcommand](cfg)
    columns = KERNEL_SCHEMA if cfg.subcommand == "kernel-dump" else SCHEMA
    text = emit_report(rows, cfg.format, columns)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


_VALUE_FLAGS = ("--h", "--nu-hat", "--a", "--t", "--grid", "--a-values")


def _attach_negative_values(argv):
    """Rewrite '--h -1:1:0.5' as '--h=-1:1:0.5' so argparse does not read
    a leading minus sign as an option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok in _VALUE_FLAGS and nxt is not None and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    try:
        cfg = build_config(args)
    except CliConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.subcommand == "selftest":
        from .selftest import run_selftest

        return run_selftest(stream=sys.stdout, timing=cfg.timing)
    try:
        run(cfg)
    except NonConvergent as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    except (WMError, ValueError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
