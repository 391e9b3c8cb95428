"""Experiment runner: flat config files in, plot-ready CSV out.

Configs are one key=value pair per line with '#' comment lines. Every
output file starts with a comment carrying the full normalized config and
the PRNG identifier, so a file is reproducible from its own header. Writes
are atomic (temp file, then rename) and byte-identical across reruns of
the same config unless the opt-in timestamp line is enabled.

Exit codes: 0 success, 2 config or argument problems, 3 numerical
failures, 4 I/O failures.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from ._rng import PRNG_NAME
from .analysis import (cauchy_diagnostics, convergence_table, rate_from_errors,
                       solve_example_stage, weyl_cos_mean, weyl_fraction)
from .errors import (ConfigError, EmptyGroupError, InvalidArgumentError,
                     NumericalBreakdownError, UndefinedRateError)
from .femsolve import (center_flux_sum, center_identity_residual,
                       edge_identity_residual)
from .forcing import FAMILY_IDS
from .stargraph import GROUP_PROBS, GROUP_VALUES, TWO_PI
from .upscale import (build_upscaled, center_limit, predicted_edge_flux,
                      solve_upscaled)

EMITS = ("table", "cauchy", "solution", "weyl", "identity", "upscaled", "rate")
OUT_DIR_ENV = "STARFEM_OUT_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    example: str
    emit: str = "table"
    stages: tuple = (10, 20, 100, 1000)
    centers: tuple = (500, 1000)
    n: int = 100
    window: int = 10
    mesh: int = 100
    coeff: str = "deterministic"
    probs: tuple = GROUP_PROBS
    values: tuple = GROUP_VALUES
    seed: int = 0
    h_coeff: float = 0.0
    h_linear: bool = False
    reference: str = "oracle"
    out: str = ""
    noise: float = -1.0
    c: float = 0.0
    orientation: str = "center"
    interval: tuple = (0.0, TWO_PI)
    errors: tuple = ()
    full_h1: bool = False
    timestamp: bool = False
    threads: int = 1

    def h_of(self, n: int) -> float:
        return self.h_coeff * n if self.h_linear else self.h_coeff

    def parameters(self) -> dict:
        p = {}
        if self.example == "ex2" and self.noise >= 0:
            p["noise"] = self.noise
        if self.example == "constant":
            p["c"] = self.c
        if self.orientation != "center":
            p["orientation"] = self.orientation
        return p

    def normalized(self) -> str:
        h = f"{self.h_coeff!r}*n" if self.h_linear else repr(self.h_coeff)
        parts = {
            "example": self.example, "emit": self.emit,
            "stages": ",".join(str(v) for v in self.stages),
            "centers": ",".join(str(v) for v in self.centers),
            "n": self.n, "window": self.window, "mesh": self.mesh,
            "coeff": self.coeff,
            "probs": ",".join(repr(v) for v in self.probs),
            "values": ",".join(repr(v) for v in self.values),
            "seed": self.seed, "h": h, "reference": self.reference,
            "orientation": self.orientation,
            "interval": ",".join(repr(v) for v in self.interval),
            "full_h1": str(self.full_h1).lower(), "threads": self.threads,
        }
        if self.noise >= 0:
            parts["noise"] = repr(self.noise)
        if self.example == "constant":
            parts["c"] = repr(self.c)
        if self.errors:
            parts["errors"] = ",".join(repr(v) for v in self.errors)
        body = " ".join(f"{k}={parts[k]}" for k in sorted(parts))
        return f"{body} prng={PRNG_NAME}"


_PI_TOKENS = {"pi": np.pi, "2pi": TWO_PI, "2*pi": TWO_PI}


def _float(raw: str, line: int) -> float:
    token = raw.strip().lower()
    if token in _PI_TOKENS:
        return _PI_TOKENS[token]
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"not a number: {raw!r}", line=line) from None


def _int(raw: str, line: int) -> int:
    try:
        return int(raw.strip(), 10)
    except ValueError:
        raise ConfigError(f"not an integer: {raw!r}", line=line) from None


def _bool(raw: str, line: int) -> bool:
    token = raw.strip().lower()
    if token in ("true", "yes", "1"):
        return True
    if token in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}", line=line)


def _int_list(raw: str, line: int) -> tuple:
    return tuple(_int(v, line) for v in raw.split(","))


def _float_list(raw: str, line: int) -> tuple:
    return tuple(_float(v, line) for v in raw.split(","))


_H_RE = re.compile(r"^(?P<c>[^*]+?)\s*(?P<lin>\*\s*n)?$")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a flat key=value config."""
    fields: dict = {}
    seen: dict = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})",
                              line=lineno)
        seen[key] = lineno
        if key == "example":
            if raw not in FAMILY_IDS:
                raise ConfigError(f"unknown example {raw!r}", line=lineno)
            fields["example"] = raw
        elif key == "emit":
            if raw not in EMITS:
                raise ConfigError(f"emit must be one of {'|'.join(EMITS)}",
                                  line=lineno)
            fields["emit"] = raw
        elif key == "stages":
            fields["stages"] = _int_list(raw, lineno)
        elif key == "centers":
            fields["centers"] = _int_list(raw, lineno)
        elif key in ("n", "window", "mesh", "threads"):
            fields[key] = _int(raw, lineno)
        elif key == "seed":
            seed = _int(raw, lineno)
            if not 0 <= seed < 2**64:
                raise ConfigError("seed must fit in an unsigned 64-bit value",
                                  line=lineno)
            fields["seed"] = seed
        elif key == "coeff":
            if raw not in ("deterministic", "random"):
                raise ConfigError("coeff must be deterministic or random",
                                  line=lineno)
            fields["coeff"] = raw
        elif key == "probs":
            fields["probs"] = _float_list(raw, lineno)
        elif key == "values":
            fields["values"] = _float_list(raw, lineno)
        elif key == "h":
            match = _H_RE.match(raw)
            if match is None:
                raise ConfigError("h must look like '2.5' or '2.5*n'",
                                  line=lineno)
            fields["h_coeff"] = _float(match.group("c"), lineno)
            fields["h_linear"] = match.group("lin") is not None
        elif key == "reference":
            if raw not in ("oracle", "printed", "upscaled"):
                raise ConfigError("reference must be oracle, printed or upscaled",
                                  line=lineno)
            fields["reference"] = raw
        elif key == "out":
            fields["out"] = raw
        elif key == "noise":
            noise = _float(raw, lineno)
            if noise < 0:
                raise ConfigError("noise must be >= 0", line=lineno)
            fields["noise"] = noise
        elif key == "c":
            fields["c"] = _float(raw, lineno)
        elif key == "orientation":
            if raw not in ("center", "rim"):
                raise ConfigError("orientation must be center or rim", line=lineno)
            fields["orientation"] = raw
        elif key == "interval":
            pair = _float_list(raw, lineno)
            if len(pair) != 2:
                raise ConfigError("interval needs exactly two endpoints",
                                  line=lineno)
            fields["interval"] = pair
        elif key == "errors":
            fields["errors"] = _float_list(raw, lineno)
        elif key == "full_h1":
            fields["full_h1"] = _bool(raw, lineno)
        elif key == "timestamp":
            fields["timestamp"] = _bool(raw, lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
    if "example" not in fields:
        raise ConfigError("missing required key 'example'")
    config = ExperimentConfig(**fields)
    _validate(config)
    return config


def _validate(config: ExperimentConfig):
    if config.mesh < 2:
        raise ConfigError("mesh must be >= 2 elements per edge")
    if config.window < 2:
        raise ConfigError("window must be >= 2")
    if config.threads < 1:
        raise ConfigError("threads must be >= 1")
    if config.n < 1:
        raise ConfigError("n must be >= 1")
    if len(config.probs) != len(config.values):
        raise ConfigError("probs and values must pair up")
    if any(p < 0 for p in config.probs) or abs(sum(config.probs) - 1.0) > 1e-12:
        raise ConfigError("probs must be >= 0 and sum to 1")
    if any(b <= a for a, b in zip(config.stages, config.stages[1:])):
        raise ConfigError("stages must be strictly increasing")
    if any(b <= a for a, b in zip(config.centers, config.centers[1:])):
        raise ConfigError("centers must be strictly increasing")
    c, d = config.interval
    if not 0.0 <= c < d <= TWO_PI:
        raise ConfigError("interval must satisfy 0 <= c < d <= 2*pi")


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


FLOAT_FMT = "{:.5e}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return FLOAT_FMT.format(v)
    return str(v)


def _out_path(config: ExperimentConfig) -> str:
    path = config.out or f"{config.emit}.csv"
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return path


def _write_csv(config: ExperimentConfig, path: str, comments: list,
               header: list, rows: list) -> str:
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# {config.normalized()}\n")
            if config.timestamp:
                import datetime
                stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
                fh.write(f"# generated {stamp}\n")
            for line in comments:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except OSError:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def _prefetch(config: ExperimentConfig, stage_list):
    """Warm the stage cache in parallel; results land in fixed order later."""
    if config.threads < 2:
        return
    from concurrent.futures import ThreadPoolExecutor

    def one(n):
        solve_example_stage(config.example, n, config.mesh,
                            coeff=config.coeff, seed=config.seed,
                            probs=config.probs, values=config.values,
                            parameters=config.parameters(), h=config.h_of(n))

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        list(pool.map(one, stage_list))


def _stage_kwargs(config: ExperimentConfig) -> dict:
    return dict(coeff=config.coeff, seed=config.seed, probs=config.probs,
                values=config.values, parameters=config.parameters())


def _run_table(config: ExperimentConfig) -> str:
    _prefetch(config, config.stages)
    rows = convergence_table(config.example, config.stages, config.mesh,
                             config.reference, h=config.h_of,
                             full_h1=config.full_h1, **_stage_kwargs(config))
    out = [(r.n, r.group, r.l2_error, r.h1_error, r.center_value,
            r.reference_id, r.m, r.seed) for r in rows]
    return _write_csv(config, _out_path(config), [],
                      ["n", "group", "l2_error", "h1_error", "center_value",
                       "reference", "m", "seed"], out)


def _run_cauchy(config: ExperimentConfig) -> str:
    half = config.window // 2
    needed = sorted({j for n in config.centers
                     for j in range(n - half, n + config.window - half + 1)})
    _prefetch(config, needed)
    rows = cauchy_diagnostics(config.example, config.centers, config.window,
                              config.mesh, h=config.h_of,
                              full_h1=config.full_h1, **_stage_kwargs(config))
    out = [(r.n, r.group, r.epsilon, r.delta, r.window) for r in rows]
    return _write_csv(config, _out_path(config), [],
                      ["n", "group", "epsilon", "delta", "window"], out)


def _run_solution(config: ExperimentConfig) -> str:
    sol = solve_example_stage(config.example, config.n, config.mesh,
                              h=config.h_of(config.n), **_stage_kwargs(config))
    rows = []
    for e in range(sol.stage.n):
        for j in range(config.mesh + 1):
            rows.append((e + 1, j, j / config.mesh, sol.values[e, j]))
    return _write_csv(config, _out_path(config),
                      [f"center_value={FLOAT_FMT.format(sol.center)}"],
                      ["edge_index", "node_index", "t", "value"], rows)


def _run_identity(config: ExperimentConfig) -> str:
    sol = solve_example_stage(config.example, config.n, config.mesh,
                              h=config.h_of(config.n), **_stage_kwargs(config))
    center_res = center_identity_residual(sol)
    edge_res = max(edge_identity_residual(sol, ell)
                   for ell in range(1, sol.stage.n + 1))
    flux_gap = abs(center_flux_sum(sol) + sol.h + float(sol.node_loads[:, 0].sum()))
    rows = [(config.n, config.mesh, center_res, edge_res, flux_gap)]
    return _write_csv(config, _out_path(config), [],
                      ["n", "m", "center_identity", "max_edge_identity",
                       "flux_gap"], rows)


def _run_upscaled(config: ExperimentConfig) -> str:
    problem = build_upscaled(config.example, config.parameters(),
                             config.probs, config.values)
    hom = solve_upscaled(problem, config.mesh)
    limit = center_limit(problem)
    comments = [
        f"center_value={FLOAT_FMT.format(hom.center)}",
        f"center_limit={FLOAT_FMT.format(limit)}",
    ]
    for i in range(1, problem.groups + 1):
        comments.append(
            f"group {i}: predicted_flux={FLOAT_FMT.format(predicted_edge_flux(problem, i))}"
            f" discrete_flux={FLOAT_FMT.format(hom.edge_flux(i))}")
    rows = []
    for i, grid in enumerate(hom.grids, start=1):
        for j in range(config.mesh + 1):
            rows.append((i, j, j / config.mesh, grid.values[j]))
    return _write_csv(config, _out_path(config), comments,
                      ["group", "node_index", "t", "value"], rows)


def _run_weyl(config: ExperimentConfig) -> str:
    c, d = config.interval
    frac = weyl_fraction(config.n, (c, d))
    rows = [(config.n, c, d, frac, weyl_cos_mean(config.n))]
    return _write_csv(config, _out_path(config), [],
                      ["n", "c", "d", "fraction", "cos_mean"], rows)


def _run_rate(config: ExperimentConfig) -> str:
    if len(config.errors) < 4:
        raise InvalidArgumentError("rate needs at least four errors")
    gaps = np.abs(np.diff(np.asarray(config.errors, dtype=float)))
    alphas = rate_from_errors(config.errors)
    rows = [(k + 1, gaps[k], gaps[k + 1], gaps[k + 2], alphas[k])
            for k in range(len(alphas))]
    return _write_csv(config, _out_path(config), [],
                      ["k", "d_minus", "d_zero", "d_plus", "alpha"], rows)


_RUNNERS = {
    "table": _run_table,
    "cauchy": _run_cauchy,
    "solution": _run_solution,
    "identity": _run_identity,
    "upscaled": _run_upscaled,
    "weyl": _run_weyl,
    "rate": _run_rate,
}


def run(config: ExperimentConfig) -> list:
    """Execute one experiment; returns the list of files written."""
    return [_RUNNERS[config.emit](config)]


_SUBCOMMAND_EMIT = {
    "solve": "solution",
    "table": "table",
    "cauchy": "cauchy",
    "upscaled": "upscaled",
    "weyl": "weyl",
    "identity": "identity",
    "rate": "rate",
}

_NEEDS_CONFIG = ("solve", "table", "cauchy", "upscaled", "identity")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starfem",
        description="Star-graph diffusion experiments: stage solves, "
                    "group-average convergence tables, window diagnostics, "
                    "and the upscaled limit problem.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, emit in _SUBCOMMAND_EMIT.items():
        p = sub.add_parser(name, help=f"emit {emit} CSV")
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--out", help="output file path")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--mesh", type=int, help="override elements per edge")
        p.add_argument("--threads", type=int, help="solver worker threads")
        p.add_argument("--timestamp", action="store_true",
                       help="add a generation timestamp comment")
        if name in ("solve", "identity", "weyl"):
            p.add_argument("--n", type=int, help="stage size (weyl: count)")
        if name == "weyl":
            p.add_argument("--interval",
                           help="subinterval of [0,2pi], e.g. '0,pi'")
        if name == "rate":
            p.add_argument("--errors",
                           help="comma-separated error sequence, length >= 4")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    elif args.command in _NEEDS_CONFIG:
        raise ConfigError(f"{args.command} requires --config")
    else:
        config = ExperimentConfig(example="ex1")
    updates = {"emit": _SUBCOMMAND_EMIT[args.command]}
    if args.out is not None:
        updates["out"] = args.out
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit value")
        updates["seed"] = args.seed
    if args.mesh is not None:
        updates["mesh"] = args.mesh
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.timestamp:
        updates["timestamp"] = True
    if getattr(args, "n", None) is not None:
        updates["n"] = args.n
    if getattr(args, "interval", None) is not None:
        updates["interval"] = _float_list(args.interval, 0)
    if getattr(args, "errors", None) is not None:
        updates["errors"] = _float_list(args.errors, 0)
    config = dataclasses.replace(config, **updates)
    _validate(config)
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        paths = run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvalidArgumentError, EmptyGroupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalBreakdownError, UndefinedRateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        name = getattr(exc, "filename", None) or "output"
        verb = "read" if name == getattr(args, "config", None) else "write"
        print(f"error: cannot {verb} {name}: {exc.strerror or exc}",
              file=sys.stderr)
        return 4
    for path in paths:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
