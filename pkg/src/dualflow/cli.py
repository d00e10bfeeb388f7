"""Command line front end: config parsing, run orchestration, output files.

A run is described by a flat key=value config (strings quoted, lists
bracketed).  `run` integrates and writes diagnostics.csv,
snapshots.json and plot.dat into the configured output directory;
`verify` performs the static duality and concavity checks without time
stepping; `spherical` prints the closed-form table; `sweep` fans a
directory of configs onto a process pool.  Exit codes: 0 success, 2
invariant or configuration violation, 3 numerical abort (with a
machine-readable failure.json).
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curvfn, diagnostics
from .diagnostics import CSV_FIELDS, compute_record, compute_record_dual, pinching_epsilon
from .dualmap import DualityBrokenError, CausalityError, dual_to_primal, gauss_dual, verify_duality
from .flow import (
    ConvexityError,
    FlowConfig,
    StiffnessError,
    estimate_Tstar_dual,
    make_initial,
    run_dual_flow,
    run_flow,
    spherical_T_star,
    spherical_theta,
)
from .hgeom import HyperbolicGraph, geometry_of
from .sphere_grid import ReparametrizationError, make_grid

__all__ = ["ConfigError", "RunManifest", "parse_config", "serialize_manifest",
           "execute", "write_outputs", "main"]

MODES = ("primal", "dual", "both", "verify")

_REQUIRED_KEYS = ("F", "n", "m", "initial")
_ALL_KEYS = ("F", "n", "m", "initial", "initial.params", "cfl", "u_stop",
             "mode", "record_every", "sigma", "out", "seed")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunManifest:
    config: FlowConfig
    sigma: float
    mode: str
    out: str
    seed: int


_TOKEN = re.compile(
    r"""([A-Za-z_][A-Za-z0-9_.]*)\s*=\s*("[^"]*"|\[[^\]]*\]|[^\s#]+)"""
)


def _parse_value(raw: str):
    if raw.startswith('"'):
        return raw[1:-1]
    if raw.startswith("["):
        body = raw[1:-1].strip()
        if not body:
            return ()
        return tuple(float(p) for p in body.split(","))
    try:
        if re.fullmatch(r"[+-]?\d+", raw):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}; strings must be double-quoted")


def parse_config(text: str) -> RunManifest:
    """Parse a flat key=value config into a validated manifest.

    Unknown keys are rejected by name; missing required keys, malformed
    curvature-function strings, and out-of-range parameters each get a
    distinct message.
    """
    seen = {}
    stripped = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    pos = 0
    for match in _TOKEN.finditer(stripped):
        if stripped[pos:match.start()].strip():
            raise ConfigError(f"unparseable config fragment {stripped[pos:match.start()].strip()!r}")
        key, raw = match.group(1), match.group(2)
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"duplicate config key {key!r}")
        seen[key] = _parse_value(raw)
        pos = match.end()
    if stripped[pos:].strip():
        raise ConfigError(f"unparseable config fragment {stripped[pos:].strip()!r}")
    for key in _REQUIRED_KEYS:
        if key not in seen:
            raise ConfigError(f"missing required config key {key!r}")

    n = seen["n"]
    m = seen["m"]
    if not isinstance(n, int) or not isinstance(m, int):
        raise ConfigError("n and m must be integers")
    F_name = seen["F"]
    if not isinstance(F_name, str):
        raise ConfigError("F must be a quoted curvature-function name")
    try:
        curvfn.make_function(F_name, n)
    except Exception as exc:
        raise ConfigError(f"malformed curvature-function string {F_name!r}: {exc}")
    try:
        make_grid(n, m)
    except Exception as exc:
        raise ConfigError(f"grid parameters out of range: {exc}")

    mode = seen.get("mode", "primal")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    sigma = float(seen.get("sigma", 0.1))
    if not 0.0 < sigma < 1.0:
        raise ConfigError(f"sigma out of range (0, 1): {sigma}")
    seed = int(seen.get("seed", 0))
    params = seen.get("initial.params", ())
    if not isinstance(params, tuple):
        params = (float(params),)
    initial = seen["initial"]
    if not isinstance(initial, str):
        raise ConfigError("initial must be a quoted name")
    try:
        config = FlowConfig(
            F=F_name, n=n, m=m,
            initial=initial, initial_params=params,
            cfl=float(seen.get("cfl", 0.2)),
            u_stop=float(seen.get("u_stop", 0.02)),
            record_every=int(seen.get("record_every", 10)),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"parameter out of range: {exc}")
    out = seen.get("out", ".")
    if not isinstance(out, str):
        raise ConfigError("out must be a quoted path")
    return RunManifest(config=config, sigma=sigma, mode=mode, out=out, seed=seed)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def serialize_manifest(man: RunManifest) -> str:
    """Emit a config text that parses back to an equal manifest."""
    cfg = man.config
    parts = [
        f'F="{cfg.F}"',
        f"n={cfg.n}",
        f"m={cfg.m}",
        f'initial="{cfg.initial}"',
        "initial.params=[" + ",".join(_fmt(p) for p in cfg.initial_params) + "]",
        f"cfl={_fmt(cfg.cfl)}",
        f"u_stop={_fmt(cfg.u_stop)}",
        f"record_every={cfg.record_every}",
        f"sigma={_fmt(man.sigma)}",
        f'mode="{man.mode}"',
        f'out="{man.out}"',
        f"seed={man.seed}",
    ]
    return "\n".join(parts) + "\n"


# ----------------------------------------------------------------------
# output writers
# ----------------------------------------------------------------------

def _json_value(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, str):
        return '"' + x + '"'
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ",".join(_json_value(v) for v in x) + "]"
    return _fmt(x)


def write_outputs(out_dir: Path, grid, records: list, snapshots: list) -> None:
    """diagnostics.csv, snapshots.json and plot.dat under out_dir.

    records are DiagnosticsRecord rows; snapshots are (t, u, u_star)
    triples with u or u_star possibly None.  All numbers carry 17
    significant digits so binary64 values survive the round trip.
    """
    csv_path = out_dir / "diagnostics.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_FIELDS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(v) for v in rec.as_row()) + "\n")

    kind = "circle" if grid.n == 1 else "axisym"
    with open(out_dir / "snapshots.json", "w") as fh:
        fh.write('{"n":%d,"m":%d,"grid":"%s",\n' % (grid.n, grid.m, kind))
        fh.write('"theta":%s,\n"records":[\n' % _json_value(grid.theta))
        rows = []
        for t, u, u_star in snapshots:
            rows.append('{"t":%s,"u":%s,"u_star":%s}' % (
                _fmt(t), _json_value(u), _json_value(u_star)))
        fh.write(",\n".join(rows))
        fh.write("\n]}\n")

    with open(out_dir / "plot.dat", "w") as fh:
        fh.write("# tau  osc_u_tilde\n")
        for rec in records:
            if math.isfinite(rec.tau):
                osc = (rec.u_max - rec.u_min) * math.exp(rec.tau)
                fh.write(f"{_fmt(rec.tau)} {_fmt(osc)}\n")


def _write_failure(out_dir: Path, kind: str, message: str, t: float, steps: int) -> None:
    with open(out_dir / "failure.json", "w") as fh:
        fh.write('{"error":"%s","message":%s,"t":%s,"steps":%d}\n' % (
            kind, _json_value(message), _fmt(t), steps))


_FAILURE_NAMES = {
    "convexity": "ConvexityError",
    "stiffness": "StiffnessError",
    "causality": "CausalityError",
}


# ----------------------------------------------------------------------
# execution modes
# ----------------------------------------------------------------------

def _theta_of(t: float, T_star) -> float:
    if T_star is None or t >= T_star:
        return math.nan
    return spherical_theta(t, math.acosh(math.exp(T_star)))


def _execute_run(man: RunManifest, out_dir: Path) -> int:
    cfg = man.config
    grid = make_grid(cfg.n, cfg.m)
    F = curvfn.make_function(cfg.F, cfg.n)

    if man.mode == "dual":
        u0 = make_initial(cfg.initial, cfg.initial_params, grid, cfg.seed)
        d0 = gauss_dual(HyperbolicGraph(grid, u0)).dual
        dtraj = run_dual_flow(cfg, d0)
        T_star = None
        if dtraj.failure is None and sum(-s.u_star.min() < 0.1 for s in dtraj.states) >= 3:
            T_star = estimate_Tstar_dual(dtraj).value
        F_dual = curvfn.invert(F)
        records = [
            compute_record_dual(s.t, type(d0)(grid, s.u_star), F_dual,
                                Theta=_theta_of(s.t, T_star), sigma=man.sigma)
            for s in dtraj.states
        ]
        snaps = [(s.t, None, s.u_star) for s in dtraj.states]
        write_outputs(out_dir, grid, records, snaps)
        if dtraj.failure is not None:
            last = dtraj.states[-1]
            _write_failure(out_dir, _FAILURE_NAMES[dtraj.failure],
                           f"dual run aborted: {dtraj.failure}", last.t, dtraj.steps_taken)
            return 3
        return 0

    traj = run_flow(cfg)
    eps = pinching_epsilon(traj.states[0].geometry, cfg.n)
    duals = [None] * len(traj.states)
    if man.mode == "both":
        d0 = gauss_dual(HyperbolicGraph(grid, traj.states[0].u)).dual
        times = [s.t for s in traj.states[1:]]
        dtraj = run_dual_flow(cfg, d0, t_targets=times)
        by_t = {round(s.t, 12): s for s in dtraj.states}
        duals[0] = d0
        for i, s in enumerate(traj.states[1:], start=1):
            match = by_t.get(round(s.t, 12))
            if match is not None:
                duals[i] = type(d0)(grid, match.u_star)
    records = [
        compute_record(s, duals[i], Theta=_theta_of(s.t, traj.T_star_estimate),
                       epsilon=eps, sigma=man.sigma, grid=grid)
        for i, s in enumerate(traj.states)
    ]
    snaps = [(s.t, s.u, None if duals[i] is None else duals[i].u_star)
             for i, s in enumerate(traj.states)]
    write_outputs(out_dir, grid, records, snaps)
    if traj.failure is not None:
        last = traj.states[-1]
        _write_failure(out_dir, _FAILURE_NAMES[traj.failure],
                       f"run aborted: {traj.failure}", last.t, traj.steps_taken)
        return 3
    return 0


def _execute_verify(man: RunManifest, out_dir: Path) -> int:
    """Static checks on the initial surface: duality identities, the
    involution, and the concavity classification of the speed."""
    cfg = man.config
    grid = make_grid(cfg.n, cfg.m)
    F = curvfn.make_function(cfg.F, cfg.n)
    u0 = make_initial(cfg.initial, cfg.initial_params, grid, cfg.seed)
    g = HyperbolicGraph(grid, u0)
    if not geometry_of(g).convex:
        _write_failure(out_dir, "ConvexityError", "initial datum is not strictly convex", 0.0, 0)
        return 3
    try:
        pair = gauss_dual(g)
        rep = verify_duality(pair)
        back = dual_to_primal(pair.dual)
    except (DualityBrokenError, CausalityError, ReparametrizationError) as exc:
        _write_failure(out_dir, type(exc).__name__, str(exc), 0.0, 0)
        return 2
    inv_err = float(np.abs(back.u - u0).max())
    rng = np.random.default_rng(man.seed)
    kappa = np.exp(rng.uniform(-1.0, 1.0, size=(64, cfg.n)))
    F_dd = curvfn.invert(curvfn.invert(F))
    invol_err = max(
        abs(float(F_dd.value(k)) - float(F.value(k))) for k in kappa
    )
    verdicts = {curvfn.check_strict_concavity(F, k) for k in kappa}
    if curvfn.NOT_CONCAVE in verdicts:
        verdict = curvfn.NOT_CONCAVE
    elif curvfn.CONCAVE_DEGENERATE in verdicts:
        verdict = curvfn.CONCAVE_DEGENERATE
    else:
        verdict = curvfn.STRICTLY_CONCAVE
    with open(out_dir / "verify.json", "w") as fh:
        fh.write(
            '{"duality_err":%s,"kappa_product_err":%s,"h_mismatch":%s,'
            '"relation_err":%s,"graph_involution_err":%s,'
            '"inverse_involution_err":%s,"concavity":"%s"}\n' % (
                _fmt(rep.worst()), _fmt(rep.max_kappa_product_error),
                _fmt(rep.max_h_mismatch), _fmt(rep.relation_u_ustar_error),
                _fmt(inv_err), _fmt(invol_err), verdict))
    return 0


def execute(man: RunManifest) -> int:
    """Run one manifest; returns the process exit code."""
    out_dir = Path(man.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {man.out!r}: {exc}", file=sys.stderr)
        return 2
    try:
        if man.mode == "verify":
            return _execute_verify(man, out_dir)
        return _execute_run(man, out_dir)
    except (ConvexityError, StiffnessError, CausalityError, DualityBrokenError,
            ReparametrizationError, curvfn.DomainError) as exc:
        _write_failure(out_dir, type(exc).__name__, str(exc), 0.0, 0)
        return 3
    except ValueError as exc:
        print(f"invalid run setup: {exc}", file=sys.stderr)
        return 2


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def _load_manifest(path: str) -> RunManifest:
    return parse_config(Path(path).read_text())


def _cmd_run(args) -> int:
    try:
        man = _load_manifest(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return execute(man)


def _cmd_verify(args) -> int:
    try:
        man = _load_manifest(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    man = RunManifest(config=man.config, sigma=man.sigma, mode="verify",
                      out=man.out, seed=man.seed)
    return execute(man)


def _cmd_spherical(args) -> int:
    r0 = args.r0
    if r0 <= 0.0:
        print("r0 must be positive", file=sys.stderr)
        return 2
    T = spherical_T_star(r0)
    print(f"# r0 = {_fmt(r0)}  T* = ln cosh r0 = {_fmt(T)}")
    print("# t  Theta  coth(Theta)")
    for k in range(21):
        t = T * k / 21.0
        th = spherical_theta(t, r0)
        print(f"{_fmt(t)} {_fmt(th)} {_fmt(1.0 / math.tanh(th))}")
    return 0


def _sweep_one(path: str) -> tuple:
    try:
        man = _load_manifest(path)
    except (ConfigError, OSError) as exc:
        return path, 2, str(exc)
    return path, execute(man), ""


def _cmd_sweep(args) -> int:
    paths = sorted(str(p) for p in Path(args.dir).glob("*.cfg"))
    if not paths:
        print(f"no .cfg files under {args.dir!r}", file=sys.stderr)
        return 2
    cap = os.environ.get("DUALFLOW_THREADS")
    workers = min(len(paths), int(cap) if cap else (os.cpu_count() or 1))
    worst = 0
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for path, code, msg in pool.map(_sweep_one, paths):
            suffix = f"  ({msg})" if msg else ""
            print(f"{path}: exit {code}{suffix}")
            worst = max(worst, code)
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dualflow",
        description="contracting curvature flows in hyperbolic space and their de Sitter duals",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="integrate one configured flow")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)
    p_ver = sub.add_parser("verify", help="static duality checks, no time stepping")
    p_ver.add_argument("config")
    p_ver.set_defaults(func=_cmd_verify)
    p_sph = sub.add_parser("spherical", help="closed-form sphere table")
    p_sph.add_argument("--r0", type=float, required=True)
    p_sph.set_defaults(func=_cmd_spherical)
    p_swp = sub.add_parser("sweep", help="run every *.cfg in a directory")
    p_swp.add_argument("dir")
    p_swp.set_defaults(func=_cmd_sweep)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
