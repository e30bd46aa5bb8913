"""Command-line entry point: ``pseudoabel <command> [options]``.

Exit status 0 on success, 1 for an invalid configuration, 2 for a numerical
failure (a JSON error report goes to stderr).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import jseries as js
from .errors import PseudoabelError
from .fixtures import random_jseries
from .foliation import (TraceOptions, find_center, integral_scan, system_from_dict,
                        trace_oval)
from .mellin import (ContourSpec, inverse_mellin, mellin_forward, mellin_to_series, petrov_series,
                     principal_parts, rep_from_dict)
from .sweep import SweepSpec, sweep_zero_counts
from .zerocount import (count_zeros_interval, count_zeros_unit, petrov_numeric, reduction_chain,
                        verify_petrov)

SCHEMA = "pseudoabel/1"
COMMANDS = ("eval-series", "mellin-table", "invert-mellin", "petrov", "reduce", "count-zeros",
            "verify-petrov", "trace-oval", "integrate", "sweep")


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> tuple:
    """``a,b,c`` | ``linear:a:b:n`` | ``geometric:a:b:n``."""
    try:
        if text.startswith(("linear:", "geometric:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ConfigError("grid needs at least one point")
            if kind == "geometric":
                if a <= 0 or b <= 0:
                    raise ConfigError("geometric grid needs positive endpoints")
                return tuple(float(v) for v in np.geomspace(a, b, n))
            return tuple(float(v) for v in np.linspace(a, b, n))
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError("grid is empty")
    return vals


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    t_grid: tuple = ()
    t: float | None = None
    kappa: float | None = None
    seed: int = 0
    tol: float | None = None
    threads: int = 1
    schema_check: bool = False
    center: tuple | None = None
    relative: bool = False
    deltas: tuple = ()
    indices: tuple | None = None
    reduction: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.input is None:
            raise ConfigError("--input is required")
        if not self.input.startswith("random") and not os.path.isfile(self.input):
            raise ConfigError(f"input file {self.input!r} does not exist")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("--tol must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        needs_grid = {"eval-series", "invert-mellin", "integrate"}
        if self.command in needs_grid and not self.t_grid:
            raise ConfigError(f"{self.command} needs --t-grid")
        if self.command in {"petrov", "verify-petrov"} and self.kappa is None:
            raise ConfigError(f"{self.command} needs --kappa")
        if self.command == "trace-oval" and self.t is None:
            raise ConfigError("trace-oval needs --t")
        if self.command == "sweep" and not self.deltas:
            raise ConfigError("sweep needs --deltas")


# -- input --------------------------------------------------------------------------------------

_SERIES_KEYS = {"spectrum"}
_SYSTEM_KEYS = {"polys", "exponents"}


def _load_json(cfg: RunConfig) -> dict:
    try:
        with open(cfg.input) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {cfg.input}: {exc}") from exc


def load_series(cfg: RunConfig) -> js.JSeries:
    if cfg.input.startswith("random"):
        # random[:n] draws a seeded random real series
        parts = cfg.input.split(":")
        n = int(parts[1]) if len(parts) > 1 else None
        return random_jseries(np.random.default_rng(cfg.seed), n=n)
    d = _load_json(cfg)
    d = d.get("series", d)
    if not _SERIES_KEYS <= set(d):
        raise ConfigError("input is not a J-series document (missing 'spectrum')")
    try:
        return js.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid J-series: {exc}") from exc


def load_system(cfg: RunConfig):
    d = _load_json(cfg)
    if not _SYSTEM_KEYS <= set(d):
        raise ConfigError("input is not a Darboux system document (missing 'polys'/'exponents')")
    try:
        system, omega = system_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid system: {exc}") from exc
    center = tuple(d["seed"]) if "seed" in d else None
    return system, omega, center


# -- output ---------------------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def to_json(payload: dict) -> str:
    return json.dumps({"schema": SCHEMA, **payload}, indent=1, sort_keys=False) + "\n"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands -------------------------------------------------------------------------------------

def _eval_series(cfg):
    sigma = load_series(cfg)
    rows = []
    for t in cfg.t_grid:
        v, tail = js.jseries_eval(sigma, t)
        rows.append((t, v.real, v.imag, tail))
    return to_csv(("t", "re", "im", "tail_bound"), rows)


def _mellin_table(cfg):
    g, _ = load_rep(cfg)
    rows = [(pole, c2.real, c2.imag, c1.real, c1.imag, 0.0) for pole, c2, c1 in principal_parts(g)]
    return to_csv(("pole", "c2_re", "c2_im", "c1_re", "c1_im", "err"), rows)


def load_rep(cfg: RunConfig):
    """A Mellin representation, given directly (``poles``) or as the transform of a series."""
    if not cfg.input.startswith("random"):
        d = _load_json(cfg)
        if "poles" in d:
            try:
                g = rep_from_dict(d)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid Mellin representation: {exc}") from exc
            return g, mellin_to_series(g)
    sigma = load_series(cfg)
    return mellin_forward(sigma), sigma


def _invert_mellin(cfg):
    g, sigma = load_rep(cfg)
    t = np.array(cfg.t_grid)
    if np.any((t <= 0) | (t >= 1)):
        raise ConfigError("invert-mellin needs t in (0, 1)")
    contour = ContourSpec.for_rep(g, float(t.max()), quad_tol=cfg.tol or 1e-8)
    vals, errs = inverse_mellin(g, t, contour, return_error=True)
    rows = [(ti, v.real, v.imag, e + js.tail_bound(sigma, float(ti))) for ti, v, e in zip(t, vals, errs)]
    return to_csv(("t", "re", "im", "est_error"), rows)


def _petrov(cfg):
    sigma = load_series(cfg)
    psig = petrov_series(sigma, cfg.kappa)
    samples = []
    for t in cfg.t_grid:
        v, tail = js.jseries_eval(psig, t)
        num = petrov_numeric(sigma, cfg.kappa, t)
        samples.append({"t": t, "re": v.real, "im": v.imag, "numeric_re": num.real,
                        "numeric_im": num.imag, "err": abs(v - num) + tail})
    return to_json({"command": "petrov", "kappa": cfg.kappa, "series": js.to_dict(psig), "samples": samples})


def _reduce(cfg):
    sigma = load_series(cfg)
    res = reduction_chain(sigma, with_deltas=True)
    grid = np.linspace(0.1, 0.9, 33)
    rows = []
    for k, ser in enumerate(res.chain):
        sup = float(np.max(np.abs(ser(grid)))) if not ser.is_zero else 0.0
        tail = max(js.tail_bound(ser, float(t)) for t in grid)
        st = res.steps[k - 1] if k else None
        rows.append((k, st.spectrum_index if st else None, st.kappa if st else None,
                     st.applications if st else None,
                     " ".join(map(str, sorted(ser.progressions()))), sup, tail))
    return to_csv(("step", "index", "kappa", "applications", "progressions", "sup_abs", "tail"), rows)


def _count_zeros(cfg):
    sigma = load_series(cfg)
    if cfg.t_grid:
        rep = count_zeros_interval(sigma, min(cfg.t_grid), max(cfg.t_grid))
    else:
        rep = count_zeros_unit(sigma)
    d = rep.to_dict()
    d["margins"] = [d.pop("margin")]
    return to_json({"command": "count-zeros", **d})


def _verify_petrov(cfg):
    sigma = load_series(cfg)
    return to_json({"command": "verify-petrov", **verify_petrov(sigma, cfg.kappa).to_dict()})


def _trace_opts(cfg):
    return TraceOptions(level_tol=cfg.tol) if cfg.tol else TraceOptions()


def _system_and_center(cfg):
    system, omega, seed = load_system(cfg)
    seed = cfg.center or seed
    if seed is None:
        b = system.box
        seed = (0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3]))
    return system, omega, find_center(system, seed)


def _trace_oval(cfg):
    system, _, center = _system_and_center(cfg)
    t = cfg.t * center.t_center if cfg.relative else cfg.t
    oval = trace_oval(system, t, center, _trace_opts(cfg))
    rows = [(x, y, r) for (x, y), r in zip(oval.points, oval.residuals)]
    return to_csv(("x", "y", "level_residual"), rows)


def _integrate(cfg):
    system, omega, center = _system_and_center(cfg)
    if omega is None:
        raise ConfigError("integrate needs an 'omega' entry in the input")
    grid = [t * center.t_center for t in cfg.t_grid] if cfg.relative else list(cfg.t_grid)
    samples = integral_scan(system, omega, grid, center, opts=_trace_opts(cfg), threads=cfg.threads)
    return to_csv(("t", "I", "err", "traceStatus"), [(s.t, s.value, s.err, s.status) for s in samples])


def _sweep(cfg):
    sigma = load_series(cfg)
    spec = SweepSpec(cfg.deltas, indices=cfg.indices, relative=not cfg.extra.get("absolute", False),
                     with_reduction=cfg.reduction)
    try:
        res = sweep_zero_counts(spec, sigma, threads=cfg.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [(r.delta, r.scale, " ".join(repr(v) for v in r.spectrum), r.count, r.certified,
             " ".join(r.flags)) for r in res.rows]
    rows.append(("max", "", "", res.max_count, res.all_certified, ""))
    return to_csv(("delta", "scale", "spectrum", "count", "certified", "flags"), rows)


_DISPATCH = {
    "eval-series": _eval_series, "mellin-table": _mellin_table, "invert-mellin": _invert_mellin,
    "petrov": _petrov, "reduce": _reduce, "count-zeros": _count_zeros, "verify-petrov": _verify_petrov,
    "trace-oval": _trace_oval, "integrate": _integrate, "sweep": _sweep,
}


def _schema_check(cfg) -> str:
    if cfg.command in {"trace-oval", "integrate"}:
        system, omega, _ = load_system(cfg)
        return to_json({"command": "schema-check", "kind": "system", "n": system.n,
                        "omega": omega is not None})
    sigma = load_series(cfg)
    return to_json({"command": "schema-check", "kind": "jseries", "n": sigma.n,
                    "terms": len(sigma.a) + len(sigma.b)})


def run_command(cfg: RunConfig) -> int:
    """Run one command; returns the process exit status."""
    try:
        cfg.validate()
        text = _schema_check(cfg) if cfg.schema_check else _DISPATCH[cfg.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"pseudoabel: invalid configuration: {exc}\n")
        return 1
    except PseudoabelError as exc:
        sys.stderr.write(to_json({"command": cfg.command, "error": type(exc).__name__, "message": str(exc)}))
        return 2
    _emit(cfg, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pseudoabel", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input", help="J-series or system JSON; 'random[:n]' draws a seeded series")
    ap.add_argument("--output", help="output path (stdout by default)")
    ap.add_argument("--t-grid", help="a,b,c | linear:a:b:n | geometric:a:b:n")
    ap.add_argument("--t", type=float, help="single level for trace-oval")
    ap.add_argument("--kappa", type=float)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--schema-check", action="store_true", help="validate the input and stop")
    ap.add_argument("--center", help="seed point x,y for the center search")
    ap.add_argument("--relative", action="store_true", help="levels are fractions of the center level")
    ap.add_argument("--deltas", help="sweep grid of exponent perturbations (grid syntax)")
    ap.add_argument("--index", type=int, action="append", help="spectrum entry to perturb (repeatable)")
    ap.add_argument("--absolute", action="store_true", help="sweep values replace the exponents")
    ap.add_argument("--reduction", action="store_true", help="record reduction-chain data in sweeps")
    return ap


def config_from_args(argv=None) -> RunConfig:
    ap = build_parser()
    ns = ap.parse_args(argv)
    threads = ns.threads
    if threads is None:
        env = os.environ.get("PSEUDOABEL_THREADS")
        try:
            threads = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"PSEUDOABEL_THREADS={env!r} is not an integer") from exc
    center = None
    if ns.center:
        try:
            center = tuple(float(v) for v in ns.center.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --center {ns.center!r}") from exc
        if len(center) != 2:
            raise ConfigError("--center needs two numbers")
    return RunConfig(
        command=ns.command, input=ns.input, output=ns.output,
        t_grid=parse_grid(ns.t_grid) if ns.t_grid else (), t=ns.t, kappa=ns.kappa, seed=ns.seed,
        tol=ns.tol, threads=threads, schema_check=ns.schema_check, center=center, relative=ns.relative,
        deltas=parse_grid(ns.deltas) if ns.deltas else (), indices=tuple(ns.index) if ns.index else None,
        reduction=ns.reduction, extra={"absolute": ns.absolute},
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        sys.stderr.write(f"pseudoabel: invalid configuration: {exc}\n")
        return 1
    except SystemExit as exc:  # argparse usage errors
        return 1 if exc.code else 0
    return run_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
