"""Batch front end: ``svgreeks run <config-file> [--format json|csv] [--out DIR] [--oracles on|off]``.

The job file is flat ``key=value`` text, one pair per line, ``#`` starts a
comment.  Every key has a default (the field defaults of :class:`RunConfig`); the model-parameter keys
are passed to the chosen preset, which rejects keys it does not use.

The environment variable ``SVGREEKS_SEED`` overrides the ``seed`` key and
nothing else.

Exit codes: 0 ok, 2 configuration, 3 numeric failure, 4 oracle gate failed,
5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .engine import evaluate
from .errors import ConfigurationError, OracleGateFailure, ReportIOError, SVGreeksError
from .estimators import (
    GREEKS,
    VARIANTS,
    MAX_GAMMA_STEPS,
    Payoff,
    WeightProcess,
    check_request,
    default_eps_den,
    delta_weights,
    estimate_from,
    required_params,
)
from .models import PRESETS, preset
from .oracles import OracleReport, bs_reference, duality_check, fd_greek
from .paths import TimeGrid

SEED_ENV = "SVGREEKS_SEED"
CSV_HEADER = ("greek", "variant", "value", "std_error", "n_paths", "n_rejected")
ORACLE_CSV_HEADER = ("name", "oracle", "estimate", "std_error", "tolerance", "passed")
MODEL_KEYS = (
    "x0", "y0", "r", "mu", "sigma0", "beta", "rho", "a", "b", "alpha",
    "kappa", "theta", "vol_of_vol", "mpr_b",
)
WEIGHTS = ("constant", "front_loaded", "back_loaded")
FD_PARAM = {"delta": "x", "gamma": "xx", "rho": "rho", "vega": "vega"}


def _on_off(text: str) -> bool:
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _name_list(valid):
    def parse(text: str) -> tuple:
        items = tuple(s.strip() for s in text.split(",") if s.strip())
        if not items:
            raise ValueError("empty list")
        for s in items:
            if s not in valid:
                raise ValueError(f"{s!r} is not one of {', '.join(valid)}")
        return tuple(dict.fromkeys(items))

    return parse


def _choice(valid):
    def parse(text: str) -> str:
        if text not in valid:
            raise ValueError(f"{text!r} is not one of {', '.join(valid)}")
        return text

    return parse


def _optional_float(text: str):
    return None if text in ("auto", "none", "") else float(text)


PARSERS = {
    "model": _choice(tuple(PRESETS)),
    "payoff": _choice(("call", "put", "digital_call")),
    "strike": float,
    "T": float,
    "n": int,
    "n_paths": int,
    "seed": int,
    "greeks": _name_list(GREEKS),
    "variants": _name_list(VARIANTS),
    "weight": _choice(WEIGHTS),
    "discounting": _on_off,
    "eps_den": _optional_float,
    "workers": int,
    "oracles": _on_off,
    "format": _choice(("json", "csv")),
    "out": str,
}
PARSERS.update({k: float for k in MODEL_KEYS})


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved job. ``model_params`` holds only the keys the file set."""

    model: str = "black_scholes"
    model_params: tuple = ()
    payoff: str = "call"
    strike: float = 100.0
    T: float = 1.0
    n: int = 64
    n_paths: int = 100_000
    seed: int = 0
    greeks: tuple = ("price", "delta")
    variants: tuple = ("corrected",)
    weight: str = "constant"
    discounting: bool = True
    eps_den: float | None = None
    workers: int = 1
    oracles: bool = False
    format: str = "csv"
    out: str = "."

    def validate(self) -> "RunConfig":
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.n_paths < 100:
            raise ConfigurationError("n_paths must be >= 100")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError("T must be positive")
        if not self.strike > 0:
            raise ConfigurationError("strike must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.eps_den is not None and self.eps_den < 0:
            raise ConfigurationError("eps_den must be non-negative")
        if "gamma" in self.greeks and self.n > MAX_GAMMA_STEPS:
            raise ConfigurationError(f"gamma requested with n={self.n}; gamma needs n <= {MAX_GAMMA_STEPS}")
        params = dict(self.model_params)
        if "rho" in params and not abs(params["rho"]) <= 1:
            raise ConfigurationError(f"rho must lie in [-1, 1], got {params['rho']}")
        return self

    def echo(self) -> dict:
        """Plain-data view used for the JSON config echo."""
        d = asdict(self)
        d["model_params"] = dict(self.model_params)
        d["greeks"] = list(self.greeks)
        d["variants"] = list(self.variants)
        return d

    @classmethod
    def from_echo(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["model_params"] = tuple(sorted(d["model_params"].items()))
        d["greeks"] = tuple(d["greeks"])
        d["variants"] = tuple(d["variants"])
        return cls(**d).validate()


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key=value`` text into a validated :class:`RunConfig`."""
    values: dict = {}
    params: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in PARSERS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values or key in params:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        try:
            parsed = PARSERS[key](val)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: key {key!r}: {exc}") from None
        if key in MODEL_KEYS:
            params[key] = parsed
        else:
            values[key] = parsed
    try:
        return RunConfig(model_params=tuple(sorted(params.items())), **values).validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"invalid configuration: {exc}") from None


@dataclass
class RunManifest:
    config: RunConfig
    version: str
    wall_clock: float
    estimates: list = field(default_factory=list)
    oracle_rows: list = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return max((e.n_rejected for e in self.estimates), default=0)

    @property
    def oracles_passed(self) -> bool:
        return all(r.passed for r in self.oracle_rows)


def _variant_identity_row(F, payoff) -> OracleReport:
    """Per-path check: verbatim minus corrected Delta weight is ``-(X_T (1 - J/I^2) + J/I^2) / x``."""
    I, J = F.I, F.J
    expected = -(F.X_T * (1.0 - J / I**2) + J / I**2) / F.x0
    got = delta_weights(F, "paper_verbatim") - delta_weights(F, "corrected")
    err = float(np.max(np.abs(got - expected)) / max(float(np.max(np.abs(expected))), 1e-300))
    return OracleReport("delta_variant_identity_max_rel", 0.0, err, 0.0, 1e-12)


def run_job(config: RunConfig) -> RunManifest:
    """Simulate once and evaluate every requested (greek, variant) on the same paths."""
    t0 = time.perf_counter()
    model = preset(config.model, **dict(config.model_params))
    grid = TimeGrid(config.T, config.n)
    payoff = Payoff(config.payoff, config.strike)
    u = WeightProcess.named(config.weight)
    greeks = config.greeks
    check_request(model, grid, greeks)
    sensitivities = [g for g in greeks if g != "price"]
    order = 3 if "gamma" in greeks else (2 if sensitivities else 1)
    F = evaluate(model, grid, config.n_paths, config.seed, u=u, order=order,
                 params=required_params(greeks), workers=config.workers)
    eps = default_eps_den(model, grid.T) if config.eps_den is None else config.eps_den
    manifest = RunManifest(config=config, version=__version__, wall_clock=0.0)
    for g in greeks:
        variants = ("corrected",) if g in ("price", "rho", "vega") else config.variants
        for v in variants:
            manifest.estimates.append(estimate_from(F, payoff, g, v, config.discounting, eps))
    if config.oracles:
        manifest.oracle_rows.extend(_oracle_rows(config, model, grid, payoff, manifest.estimates))
        if "delta" in greeks and "paper_verbatim" in config.variants:
            manifest.oracle_rows.append(_variant_identity_row(F, payoff))
    manifest.wall_clock = time.perf_counter() - t0
    return manifest


def _oracle_rows(config, model, grid, payoff, estimates) -> list:
    rows = []
    for est in estimates:
        if est.variant != "corrected":
            continue
        ref = bs_reference(model, payoff, grid.T, est.greek) if config.discounting else None
        if ref is not None:
            rows.append(OracleReport(f"{est.greek}_closed_form", ref, est.value, est.std_error))
        elif est.greek in FD_PARAM:
            fd = fd_greek(model, payoff, grid, config.n_paths, config.seed, FD_PARAM[est.greek],
                          discounting=config.discounting)
            se = math.hypot(fd.std_error, est.std_error)
            rows.append(OracleReport(f"{est.greek}_fd_crn", fd.value, est.value, se))
    rows.extend(duality_check(config.n_paths, config.seed, config.T))
    return rows


# reports ---------------------------------------------------------------------------


def _num(x) -> str:
    return format(float(x), ".17g")


def _to_json(obj, indent: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj) if math.isfinite(obj) else json.dumps(None)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{pad}{json.dumps(str(k))}: {_to_json(v, indent + 1)}" for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _oracle_dict(r: OracleReport) -> dict:
    return {"name": r.name, "oracle": r.oracle, "estimate": r.estimate, "std_error": r.std_error,
            "tolerance": r.tolerance, "passed": r.passed}


def report_json(manifest: RunManifest) -> str:
    doc = {
        "version": manifest.version,
        "config": manifest.config.echo(),
        "estimates": [asdict(e) for e in manifest.estimates],
        "oracles": [_oracle_dict(r) for r in manifest.oracle_rows],
        "n_rejected": manifest.n_rejected,
        "wall_clock_seconds": manifest.wall_clock,
    }
    return _to_json(doc) + "\n"


def report_csv(manifest: RunManifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in manifest.estimates:
        w.writerow((e.greek, e.variant, _num(e.value), _num(e.std_error), e.n_paths, e.n_rejected))
    return buf.getvalue()


def oracle_csv(manifest: RunManifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ORACLE_CSV_HEADER)
    for r in manifest.oracle_rows:
        tol = "" if r.tolerance is None else _num(r.tolerance)
        w.writerow((r.name, _num(r.oracle), _num(r.estimate), _num(r.std_error), tol, int(r.passed)))
    return buf.getvalue()


def emit_report(manifest: RunManifest, fmt: str, out_dir) -> list[Path]:
    """Write ``report.json`` or ``report.csv`` (plus ``oracles.csv``) under ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            files = {out / "report.json": report_json(manifest)}
        elif fmt == "csv":
            files = {out / "report.csv": report_csv(manifest)}
            if manifest.oracle_rows:
                files[out / "oracles.csv"] = oracle_csv(manifest)
        else:
            raise ConfigurationError(f"unknown report format {fmt!r}")
        for path, text in files.items():
            path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {out}: {exc}") from exc
    return list(files)


# entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svgreeks", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a job file")
    run.add_argument("config", help="path of a key=value job file")
    run.add_argument("--format", choices=("json", "csv"), help="report format (default: config key, else csv)")
    run.add_argument("--out", help="output directory (default: config key, else .)")
    run.add_argument("--oracles", choices=("on", "off"), help="run the oracle suite (default: config key, else off)")
    return parser


def load_config(path, env=None) -> RunConfig:
    env = os.environ if env is None else env
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot read config {path}: {exc}") from exc
    config = parse_config(text)
    if env.get(SEED_ENV, "") != "":
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
        config = replace(config, seed=seed).validate()
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.format:
            overrides["format"] = args.format
        if args.out:
            overrides["out"] = args.out
        if args.oracles:
            overrides["oracles"] = args.oracles == "on"
        config = replace(config, **overrides)
        manifest = run_job(config)
        for path in emit_report(manifest, config.format, config.out):
            print(path)
        if not manifest.oracles_passed:
            failed = ", ".join(r.name for r in manifest.oracle_rows if not r.passed)
            raise OracleGateFailure(f"oracle gates failed: {failed}")
    except SVGreeksError as exc:
        print(f"svgreeks: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
