"""Command-line experiment runner.

Subcommands: ``fixtures | stability | bench | identify``.  Settings come
from a flat ``key=value`` config file (``--config``) with command-line
overrides; every effective setting is echoed into the CSV header as a
``# key=value`` comment, so a result file is self-describing.  The same
config and seed produce byte-identical CSV, timing columns aside.
"""

from __future__ import annotations

import argparse
import sys

from .errors import GivsepError
from .experiments import (
    METHOD_NAMES,
    BenchConfig,
    IdentifyConfig,
    StabilityConfig,
    run_bench,
    run_fixtures,
    run_identify,
    run_stability,
)
from .kernels import InputSignal

_FLOAT_FMT = "%.17g"


class ConfigError(GivsepError):
    """Bad config file or setting value."""


# defaults mirror the reference experimental setup; values are kept as
# strings until use so the header echoes exactly what was configured
_STABILITY_DEFAULTS = {
    "n": "600",
    "trials": "80",
    "kernel": "dc",
    "rho": "0.6",
    "gamma": "1e-4",
    "lambdas": "0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
    "input": "impulse",
    "alpha": "0.5",
    "snr": "10",
    "order": "10",
    "pole_lo": "0.1",
    "pole_hi": "0.9",
    "seed": "0",
    "threads": "1",
}

_BENCH_DEFAULTS = {
    "n_list": "300,600,1200,2400,4800",
    "repeats": "10",
    "evals": "200",
    "ref_evals": "20",
    "methods": "GR,GRs,GvR,GvRt,Ref",
    "input": "impulse",
    "alpha": "0.5",
    "snr": "10",
    "order": "10",
    "pole_lo": "0.1",
    "pole_hi": "0.9",
    "seed": "0",
}

_IDENTIFY_DEFAULTS = {
    "n": "600",
    "trials": "80",
    "kernel": "dc",
    "criterion": "gcv",
    "n_eta": "5",
    "eta_lo": "0.05",
    "eta_hi": "0.95",
    "n_gamma": "8",
    "gamma_lo": "1e-8",
    "gamma_hi": "1",
    "methods": "GR,GRs,GvR,GvRt,Ref",
    "input": "impulse",
    "alpha": "0.5",
    "snr": "10",
    "order": "10",
    "pole_lo": "0.1",
    "pole_hi": "0.9",
    "seed": "0",
    "threads": "1",
}

_DEFAULTS = {
    "fixtures": {},
    "stability": _STABILITY_DEFAULTS,
    "bench": _BENCH_DEFAULTS,
    "identify": _IDENTIFY_DEFAULTS,
}

#: command-line flag -> config key, per subcommand quirks
_FLAG_KEYS = {
    "stability": {"seed": "seed", "threads": "threads", "n": "n", "trials": "trials"},
    "identify": {"seed": "seed", "threads": "threads", "n": "n", "trials": "trials"},
    "bench": {"seed": "seed", "n": "n_list", "trials": "repeats"},
    "fixtures": {},
}


def _parse_config_file(path: str, allowed) -> dict:
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _effective_config(command: str, args) -> dict:
    values = dict(_DEFAULTS[command])
    if args.config is not None:
        values.update(_parse_config_file(args.config, values.keys()))
    for flag, key in _FLAG_KEYS[command].items():
        given = getattr(args, flag)
        if given is not None:
            values[key] = str(given)
    return values


def _as_int(values, key, minimum=None):
    try:
        v = int(values[key])
    except ValueError:
        raise ConfigError(f"{key}={values[key]!r}: expected an integer") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}={v}: must be >= {minimum}")
    return v


def _as_float(values, key):
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"{key}={values[key]!r}: expected a number") from None


def _as_float_list(values, key):
    try:
        return tuple(float(part.strip()) for part in values[key].split(","))
    except ValueError:
        raise ConfigError(f"{key}={values[key]!r}: expected comma-separated numbers") from None


def _as_int_list(values, key):
    try:
        return tuple(int(part.strip()) for part in values[key].split(","))
    except ValueError:
        raise ConfigError(f"{key}={values[key]!r}: expected comma-separated integers") from None


def _as_methods(values, key):
    methods = tuple(part.strip() for part in values[key].split(","))
    for m in methods:
        if m not in METHOD_NAMES:
            raise ConfigError(f"{key}: unknown method {m!r}; expected from {METHOD_NAMES}")
    return methods


def _as_signal(values) -> InputSignal:
    kind = values["input"]
    if kind == "impulse":
        return InputSignal.unit_impulse()
    if kind == "exponential":
        return InputSignal.exponential(_as_float(values, "alpha"))
    raise ConfigError(f"input={kind!r}: expected 'impulse' or 'exponential'")


def _as_pole_range(values):
    lo, hi = _as_float(values, "pole_lo"), _as_float(values, "pole_hi")
    if not 0.0 <= lo <= hi < 1.0:
        raise ConfigError(f"pole range [{lo}, {hi}] must satisfy 0 <= lo <= hi < 1")
    return (lo, hi)


def _fmt(value) -> str:
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def _write_csv(out_path, comments, columns, rows, trailing=()):
    def emit(stream):
        for c in comments:
            stream.write(f"# {c}\n")
        stream.write(",".join(columns) + "\n")
        for row in rows:
            stream.write(",".join(_fmt(v) for v in row) + "\n")
        for c in trailing:
            stream.write(f"# {c}\n")

    if out_path is None:
        emit(sys.stdout)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            emit(fh)


def _header(command: str, values: dict) -> list:
    lines = [f"command={command}"]
    lines += [f"{key}={values[key]}" for key in _DEFAULTS[command]]
    return lines


def cmd_fixtures(args) -> int:
    values = _effective_config("fixtures", args)
    rows, ok = run_fixtures()
    _write_csv(
        args.out,
        _header("fixtures", values),
        ["fixture", "method", "metric", "value", "threshold", "op", "status"],
        rows,
    )
    return 0 if ok else 1


def cmd_stability(args) -> int:
    values = _effective_config("stability", args)
    if values["kernel"] != "dc":
        raise ConfigError(f"kernel={values['kernel']!r}: the sweep varies lambda, "
                          "which only the dc family has")
    cfg = StabilityConfig(
        n=_as_int(values, "n", minimum=1),
        trials=_as_int(values, "trials", minimum=1),
        rho=_as_float(values, "rho"),
        gamma=_as_float(values, "gamma"),
        lambdas=_as_float_list(values, "lambdas"),
        signal=_as_signal(values),
        snr=_as_float(values, "snr"),
        order=_as_int(values, "order", minimum=1),
        pole_range=_as_pole_range(values),
        seed=_as_int(values, "seed", minimum=0),
        threads=_as_int(values, "threads", minimum=1),
    )
    rows = run_stability(cfg)
    _write_csv(
        args.out,
        _header("stability", values)
        + ["mean_diff is the trial mean of the difference norm vs the dense reference"],
        ["lambda", "method", "quantity", "mean_diff", "log10_mean_diff", "failures"],
        rows,
    )
    return 0


def cmd_bench(args) -> int:
    values = _effective_config("bench", args)
    cfg = BenchConfig(
        n_list=_as_int_list(values, "n_list"),
        repeats=_as_int(values, "repeats", minimum=1),
        evals=_as_int(values, "evals", minimum=1),
        ref_evals=_as_int(values, "ref_evals", minimum=1),
        signal=_as_signal(values),
        snr=_as_float(values, "snr"),
        order=_as_int(values, "order", minimum=1),
        pole_range=_as_pole_range(values),
        seed=_as_int(values, "seed", minimum=0),
        methods=_as_methods(values, "methods"),
    )
    rows, notes = run_bench(cfg)
    _write_csv(
        args.out,
        _header("bench", values)
        + ["seconds is wall time per criteria evaluation (timed block / evaluations)",
           "the Ref route times ref_evals evaluations per block; timing loops run sequentially"],
        ["method", "N", "repeat", "seconds"],
        rows,
        trailing=notes,
    )
    return 0


def cmd_identify(args) -> int:
    values = _effective_config("identify", args)
    criterion = values["criterion"]
    cfg = IdentifyConfig(
        n=_as_int(values, "n", minimum=1),
        trials=_as_int(values, "trials", minimum=1),
        signal=_as_signal(values),
        snr=_as_float(values, "snr"),
        order=_as_int(values, "order", minimum=1),
        pole_range=_as_pole_range(values),
        family=values["kernel"],
        criterion=criterion,
        n_eta=_as_int(values, "n_eta", minimum=2),
        eta_range=(_as_float(values, "eta_lo"), _as_float(values, "eta_hi")),
        n_gamma=_as_int(values, "n_gamma", minimum=2),
        gamma_range=(_as_float(values, "gamma_lo"), _as_float(values, "gamma_hi")),
        seed=_as_int(values, "seed", minimum=0),
        threads=_as_int(values, "threads", minimum=1),
        methods=_as_methods(values, "methods"),
    )
    rows, notes = run_identify(cfg)
    _write_csv(
        args.out,
        _header("identify", values)
        + ["gcv is the generalized cross-validation value at each optimum"],
        ["trial", "method", "fit", "gcv", "lam", "rho", "gamma"],
        rows,
        trailing=notes,
    )
    return 0


_COMMANDS = {
    "fixtures": cmd_fixtures,
    "stability": cmd_stability,
    "bench": cmd_bench,
    "identify": cmd_identify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="givsep",
        description="Numerical experiments with semiseparable kernel algebra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fixtures": "run the two N=5 showcase instances against their thresholds",
        "stability": "sweep lambda and record difference norms vs the dense reference",
        "bench": "time criteria evaluations per method over a range of N",
        "identify": "per-method hyper-parameter optimization and impulse-response fits",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="flat key=value settings file")
        p.add_argument("--seed", type=int, metavar="U64", help="master seed")
        p.add_argument("--threads", type=int, metavar="N", help="worker threads for trials")
        p.add_argument("--out", metavar="PATH", help="output CSV path (default stdout)")
        p.add_argument("--n", type=int, metavar="N", help="data length override")
        p.add_argument("--trials", type=int, metavar="K", help="trial/repeat count override")
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
