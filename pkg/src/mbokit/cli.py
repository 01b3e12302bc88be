"""Command-line front end: run, sweep, check, energy.

Configs are strict ``key = value`` files; unknown or duplicated keys are
rejected with their line numbers so a typo cannot silently change an
experiment.  States are stored in a small self-describing dump format
(ASCII header, raw row-major uint8 labels) that round-trips bit for bit.

Exit codes: 0 success (and ledger PASS), 2 ledger FAIL, 3 configuration
error, 4 runtime error (degenerate states, unreadable dumps).
"""

from __future__ import annotations

import argparse
import csv
import math
import re
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import lagrange_scaling, ledger_check
from .grid import (
    DegeneratePhaseError,
    EmptyPhaseError,
    Grid,
    MultiPhaseState,
    PhaseField,
    RealField,
    random_blob,
    rasterize_ball,
    rasterize_slab,
    voronoi_labels,
)
from .oracles import ExtinctionError, circle_mcf
from .schemes import (
    SchemeConfig,
    SurfaceTensionMatrix,
    Trajectory,
    run,
)

MAGIC = "MBOF1"

EXIT_OK = 0
EXIT_LEDGER_FAIL = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4


class ConfigError(ValueError):
    """Bad experiment configuration; message carries line numbers."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# config files

_SIGMA_KEY = re.compile(r"^sigma\.(\d+)\.(\d+)$")

_SCALAR_KEYS = {
    "scheme": str,
    "init": str,
    "force": str,
    "out_dir": str,
    "dim": int,
    "n": int,
    "steps": int,
    "dump_every": int,
    "grains": int,
    "blob_seed": int,
    "slab_axis": int,
    "side": float,
    "h": float,
    "ball_radius": float,
    "ball2_radius": float,
    "slab_lo": float,
    "slab_hi": float,
    "blob_fill": float,
    "blob_smoothing": float,
    "vapor_margin": float,
    "solid_radius": float,
    "force_value": float,
    "sigma_default": float,
    "T": float,
}
_POINT_KEYS = {"ball_center", "ball2_center", "solid_center"}
_LIST_KEYS = {"h_list"}
_SEED_KEYS = {"seeds"}


@dataclass
class ExperimentConfig:
    """Typed view of a parsed config file."""

    values: dict[str, object]
    lines: dict[str, int]

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required key '{key}'")
        return self.values[key]


def parse_config(text: str) -> ExperimentConfig:
    """Parse a ``key = value`` config, one pair per line, '#' comments.

    Unknown keys are rejected with their line number; assigning a key twice
    is an error naming both lines.  Values are typed per key; surface
    tension entries use ``sigma.<i>.<j>`` with 1-based grain labels.
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not value:
            raise ConfigError(f"line {lineno}: empty value for key '{key}'")
        if key in lines:
            raise ConfigError(
                f"line {lineno}: duplicate key '{key}' (first set on line {lines[key]})"
            )
        if not _known_key(key):
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        try:
            values[key] = _parse_value(key, value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from exc
        lines[key] = lineno
    cfg = ExperimentConfig(values, lines)
    _validate_sigma_entries(cfg)
    return cfg


def _known_key(key: str) -> bool:
    return (
        key in _SCALAR_KEYS
        or key in _POINT_KEYS
        or key in _LIST_KEYS
        or key in _SEED_KEYS
        or _SIGMA_KEY.match(key) is not None
    )


def _parse_value(key: str, value: str):
    if key in _SCALAR_KEYS:
        return _SCALAR_KEYS[key](value)
    if key in _POINT_KEYS:
        return tuple(float(tok) for tok in value.split())
    if key in _LIST_KEYS:
        return tuple(float(tok.strip()) for tok in value.split(",") if tok.strip())
    if key in _SEED_KEYS:
        seeds = []
        for part in value.split(";"):
            part = part.strip()
            if part:
                seeds.append(tuple(float(tok) for tok in part.split()))
        return tuple(seeds)
    if _SIGMA_KEY.match(key):
        return float(value)
    raise ConfigError(f"unknown key '{key}'")  # unreachable, _known_key ran first


def _validate_sigma_entries(cfg: ExperimentConfig) -> None:
    for key in cfg.values:
        m = _SIGMA_KEY.match(key)
        if m and int(m.group(1)) == int(m.group(2)):
            raise ConfigError(
                f"line {cfg.lines[key]}: '{key}' sets a diagonal tension; "
                "diagonal entries are fixed at zero"
            )


def build_tensions(cfg: ExperimentConfig, num_grains: int) -> SurfaceTensionMatrix:
    """Assemble the tension matrix from sigma_default and sigma.i.j keys."""
    default = float(cfg.get("sigma_default", 1.0))
    sigma = np.full((num_grains, num_grains), default)
    np.fill_diagonal(sigma, 0.0)
    seen: dict[tuple[int, int], tuple[float, int]] = {}
    for key, value in cfg.values.items():
        m = _SIGMA_KEY.match(key)
        if not m:
            continue
        i, j = int(m.group(1)), int(m.group(2))
        if not (1 <= i <= num_grains and 1 <= j <= num_grains):
            raise ConfigError(
                f"line {cfg.lines[key]}: '{key}' is outside grains 1..{num_grains}"
            )
        pair = (min(i, j), max(i, j))
        if pair in seen and seen[pair][0] != value:
            raise ConfigError(
                f"line {cfg.lines[key]}: '{key}' contradicts the value set on "
                f"line {seen[pair][1]}"
            )
        seen[pair] = (float(value), cfg.lines[key])
        sigma[i - 1, j - 1] = sigma[j - 1, i - 1] = float(value)
    try:
        return SurfaceTensionMatrix(sigma)
    except ValueError as exc:
        raise ConfigError(f"invalid surface tensions: {exc}") from exc


def build_grid(cfg: ExperimentConfig) -> Grid:
    try:
        return Grid(
            dim=int(cfg.get("dim", 2)),
            n=int(cfg.require("n")),
            side=float(cfg.get("side", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_initial(cfg: ExperimentConfig, grid: Grid):
    """Construct the initial state described by the ``init`` key."""
    kind = cfg.require("init")
    try:
        if kind == "ball":
            return rasterize_ball(
                grid, cfg.require("ball_center"), cfg.require("ball_radius")
            )
        if kind == "two_balls":
            a = rasterize_ball(
                grid, cfg.require("ball_center"), cfg.require("ball_radius")
            )
            b = rasterize_ball(
                grid, cfg.require("ball2_center"), cfg.require("ball2_radius")
            )
            if (a.mask & b.mask).any():
                raise ConfigError("the two balls overlap")
            return PhaseField(grid, a.mask | b.mask)
        if kind == "slab":
            return rasterize_slab(
                grid,
                int(cfg.get("slab_axis", 0)),
                cfg.require("slab_lo"),
                cfg.require("slab_hi"),
            )
        if kind == "blob":
            return random_blob(
                grid,
                seed=int(cfg.require("blob_seed")),
                fill=float(cfg.get("blob_fill", 0.3)),
                smoothing=float(cfg.get("blob_smoothing", 0.05)),
            )
        if kind == "voronoi":
            seeds = cfg.require("seeds")
            if cfg.has("grains") and int(cfg.get("grains")) != len(seeds):
                raise ConfigError(
                    f"grains = {cfg.get('grains')} but {len(seeds)} seeds given"
                )
            solid = None
            if cfg.has("solid_center"):
                solid = rasterize_ball(
                    grid, cfg.require("solid_center"), cfg.require("solid_radius")
                )
            return voronoi_labels(
                grid,
                seeds,
                vapor_margin=float(cfg.get("vapor_margin", 0.0)),
                solid=solid,
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown init '{kind}'")


def build_force(cfg: ExperimentConfig):
    kind = cfg.get("force")
    if kind is None:
        return None
    if kind != "const":
        raise ConfigError(f"unknown force '{kind}' (supported: const)")
    value = float(cfg.require("force_value"))

    def force(grid: Grid, _t: float) -> RealField:
        return RealField(grid, np.full(grid.shape, value))

    return force


def build_scheme_config(cfg: ExperimentConfig, grid: Grid, initial) -> SchemeConfig:
    scheme = cfg.require("scheme")
    tensions = None
    if scheme == "grain_growth":
        if not isinstance(initial, MultiPhaseState):
            raise ConfigError("grain_growth needs init = voronoi")
        tensions = build_tensions(cfg, initial.num_grains)
    try:
        return SchemeConfig(
            scheme=scheme,
            grid=grid,
            h=float(cfg.require("h")),
            steps=int(cfg.require("steps")),
            force=build_force(cfg),
            tensions=tensions,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# dump format


def write_dump(path: Path | str, state, h: float, step: int) -> None:
    """Store a state: ASCII header, blank line, raw uint8 labels."""
    if isinstance(state, MultiPhaseState):
        labels, phases = state.labels, state.num_grains + 1
    else:
        labels, phases = state.mask.astype(np.uint8), 2
    if phases > 256:
        raise ValueError("dump format carries at most 256 labels")
    grid = state.grid
    header = (
        f"{MAGIC}\n"
        f"dim={grid.dim}\n"
        f"n={','.join(str(grid.n) for _ in range(grid.dim))}\n"
        f"side={_fmt(grid.side)}\n"
        f"h={_fmt(h)}\n"
        f"step={step}\n"
        f"phases={phases}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


def read_dump(path: Path | str):
    """Load a stored state; returns (state, h, step)."""
    blob = Path(path).read_bytes()
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise ValueError(f"{path}: missing header terminator")
    head_lines = blob[:sep].decode("ascii").splitlines()
    if not head_lines or head_lines[0] != MAGIC:
        raise ValueError(f"{path}: not a {MAGIC} dump")
    fields: dict[str, str] = {}
    for line in head_lines[1:]:
        key, _, value = line.partition("=")
        fields[key] = value
    ns = [int(tok) for tok in fields["n"].split(",")]
    dim = int(fields["dim"])
    if len(ns) != dim or len(set(ns)) != 1:
        raise ValueError(f"{path}: unsupported cell counts {ns}")
    grid = Grid(dim=dim, n=ns[0], side=float(fields["side"]))
    phases = int(fields["phases"])
    payload = np.frombuffer(blob[sep + 2 :], dtype=np.uint8)
    if payload.size != grid.total_cells:
        raise ValueError(
            f"{path}: expected {grid.total_cells} cells, got {payload.size}"
        )
    labels = payload.reshape(grid.shape)
    h = float(fields["h"])
    step = int(fields["step"])
    if phases == 2:
        return PhaseField(grid, labels.astype(bool)), h, step
    return MultiPhaseState(grid, labels.astype(np.int32), phases - 1), h, step


# ---------------------------------------------------------------------------
# commands


def _write_ledger_csv(path: Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "t", "lambda", "E_h", "D_h", "slack", "radius"])
        first_energy = (
            traj.records[0].energy_before if traj.records else float("nan")
        )
        writer.writerow(
            ["0", _fmt(0.0), "", _fmt(first_energy), "", "", _fmt(traj.initial_radius)]
        )
        for r in traj.records:
            writer.writerow(
                [
                    str(r.step),
                    _fmt(r.time),
                    "" if r.lam is None else _fmt(r.lam),
                    _fmt(r.energy_after),
                    _fmt(r.dissipation),
                    _fmt(r.ed_slack),
                    "" if r.bounding_radius is None else _fmt(r.bounding_radius),
                ]
            )


def cmd_run(config_path: str) -> int:
    """Run a configured trajectory, write dumps and the ledger CSV."""
    try:
        cfg = parse_config(Path(config_path).read_text())
        grid = build_grid(cfg)
        initial = build_initial(cfg, grid)
        scheme_cfg = build_scheme_config(cfg, grid, initial)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(str(cfg.get("out_dir", "out")))
    try:
        traj = run(scheme_cfg, initial)
        out_dir.mkdir(parents=True, exist_ok=True)
        dump_every = int(cfg.get("dump_every", 0))
        last = len(traj.states) - 1
        for idx, state in enumerate(traj.states):
            keep = idx in (0, last) or (dump_every > 0 and idx % dump_every == 0)
            if keep:
                write_dump(
                    out_dir / f"state_{idx:06d}.mbof", state, scheme_cfg.h, idx
                )
        _write_ledger_csv(out_dir / "ledger.csv", traj)
        report = ledger_check(traj)
    except (DegeneratePhaseError, EmptyPhaseError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"status: {traj.status} after {len(traj.records)} steps")
    print(f"ledger: {'PASS' if report.passed else 'FAIL'} "
          f"(tolerance {report.tolerance:.3g})")
    if not report.passed:
        print(f"first violated step: {report.first_violation}", file=sys.stderr)
        return EXIT_LEDGER_FAIL
    return EXIT_OK


def _measured_radius(state: PhaseField) -> float:
    grid = state.grid
    vol = state.cell_count * grid.cell_volume
    if grid.dim == 2:
        return math.sqrt(vol / math.pi)
    return (3.0 * vol / (4.0 * math.pi)) ** (1.0 / 3.0)


def cmd_sweep(config_path: str) -> int:
    """Bandwidth sweep: convergence order for mbo, multiplier scaling for vp."""
    try:
        cfg = parse_config(Path(config_path).read_text())
        grid = build_grid(cfg)
        scheme = cfg.require("scheme")
        h_list = cfg.require("h_list")
        horizon = float(cfg.require("T"))
        if len(h_list) < 3:
            raise ConfigError("h_list needs at least 3 entries")
        if scheme not in ("mbo", "volume_preserving"):
            raise ConfigError(f"sweep supports mbo and volume_preserving, not {scheme}")
        if scheme == "mbo" and cfg.require("init") != "ball":
            raise ConfigError("mbo sweep compares against a shrinking ball")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rows: list[dict[str, float | int | None]] = []
    lam_series: list[tuple[float, Sequence[float]]] = []
    try:
        for h in h_list:
            steps = max(1, round(horizon / h))
            initial = build_initial(cfg, grid)
            scheme_cfg = SchemeConfig(scheme=scheme, grid=grid, h=h, steps=steps)
            traj = run(scheme_cfg, initial)
            row: dict[str, float | int | None] = {
                "h": h,
                "steps": len(traj.records),
            }
            if scheme == "mbo":
                t_end = len(traj.records) * h
                measured = _measured_radius(traj.final())
                try:
                    target = circle_mcf(
                        float(cfg.require("ball_radius")), t_end, grid.dim
                    )
                except ExtinctionError:
                    target = 0.0
                row["radius"] = measured
                row["oracle"] = target
                row["error"] = abs(measured - target)
            else:
                lams = traj.lambdas
                lam_series.append((h, lams))
                offsets = np.asarray(lams) - 0.5
                row["M"] = float(h * np.sum(offsets**2))
                row["bad"] = int(np.count_nonzero(np.abs(offsets) >= 0.25))
            rows.append(row)
    except (DegeneratePhaseError, EmptyPhaseError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    distinct = sorted({r["h"] for r in rows})
    slope = None
    if scheme == "mbo":
        errs = {r["h"]: r["error"] for r in rows}
        if len(distinct) >= 3 and all(errs[h] > 0 for h in distinct):
            slope = float(
                np.polyfit(np.log(distinct), np.log([errs[h] for h in distinct]), 1)[0]
            )
    else:
        try:
            report = lagrange_scaling(lam_series)
            slope = report.slope
        except ValueError:
            slope = None

    cols = list(rows[0].keys())
    print("  ".join(f"{c:>14}" for c in cols))
    for row in rows:
        print(
            "  ".join(
                f"{row[c]:>14}" if isinstance(row[c], int) else f"{row[c]:>14.8g}"
                for c in cols
            )
        )
    print(f"fitted slope: {'n/a' if slope is None else f'{slope:.4f}'}")

    out_dir = Path(str(cfg.get("out_dir", "out")))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow(
                [
                    str(row[c]) if isinstance(row[c], int) else _fmt(float(row[c]))
                    for c in cols
                ]
            )
    return EXIT_OK


def _states_from_dumps(paths: Sequence[str]):
    loaded = []
    for p in paths:
        state, h, step = read_dump(p)
        loaded.append((step, h, state))
    loaded.sort(key=lambda item: item[0])
    hs = {item[1] for item in loaded}
    if len(hs) != 1:
        raise ValueError(f"dumps disagree on h: {sorted(hs)}")
    grids = {item[2].grid for item in loaded}
    if len(grids) != 1:
        raise ValueError("dumps live on different grids")
    return [item[2] for item in loaded], hs.pop()


def cmd_check(paths: Sequence[str], config_path: str | None = None) -> int:
    """Re-audit stored states: recompute the per-step energy ledger."""
    try:
        states, h = _states_from_dumps(paths)
    except (ValueError, FileNotFoundError) as exc:
        print(f"cannot load dumps: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    multiphase = isinstance(states[0], MultiPhaseState)
    scheme = "mbo"
    force = None
    tensions = None
    if config_path is not None:
        try:
            cfg = parse_config(Path(config_path).read_text())
            scheme = str(cfg.get("scheme", "mbo"))
            force = build_force(cfg)
            if multiphase:
                tensions = build_tensions(cfg, states[0].num_grains)
        except (ConfigError, FileNotFoundError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    elif multiphase:
        print(
            "config error: multiphase dumps need --config for the tensions",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    if multiphase:
        scheme = "grain_growth"
    elif scheme == "grain_growth":
        print("config error: two-phase dumps with a grain_growth config",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        scheme_cfg = SchemeConfig(
            scheme=scheme,
            grid=states[0].grid,
            h=h,
            steps=max(1, len(states) - 1),
            force=force if scheme == "forced" else None,
            tensions=tensions if multiphase else None,
        )
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    traj = Trajectory(
        config=scheme_cfg,
        states=list(states),
        records=[],
        status="completed",
        radius_center=(0.0,) * states[0].grid.dim,
        initial_radius=0.0,
    )
    report = ledger_check(traj)
    for row in report.rows:
        print(
            f"step {row.step}: E {row.energy_before:.9g} -> {row.energy_after:.9g}"
            f"  D {row.dissipation:.3e}  slack {row.slack:.3e}"
        )
    print(f"ledger: {'PASS' if report.passed else 'FAIL'}")
    if not report.passed:
        print(f"first violated step: {report.first_violation}", file=sys.stderr)
        return EXIT_LEDGER_FAIL
    return EXIT_OK


def cmd_energy(path: str, h: float | None, config_path: str | None = None) -> int:
    """Print the interfacial energy of one stored state."""
    try:
        state, dump_h, _step = read_dump(path)
    except (ValueError, FileNotFoundError) as exc:
        print(f"cannot load dump: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    bandwidth = dump_h if h is None else h
    if not bandwidth > 0:
        print("config error: h must be positive", file=sys.stderr)
        return EXIT_CONFIG
    from .diagnostics import energy_multiphase, energy_two_phase

    if isinstance(state, MultiPhaseState):
        if config_path is None:
            print(
                "config error: multiphase dumps need --config for the tensions",
                file=sys.stderr,
            )
            return EXIT_CONFIG
        try:
            cfg = parse_config(Path(config_path).read_text())
            tensions = build_tensions(cfg, state.num_grains)
        except (ConfigError, FileNotFoundError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        value = energy_multiphase(state, tensions, bandwidth)
    else:
        value = energy_two_phase(state, bandwidth)
    print(_fmt(value))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mbokit",
        description="Thresholding dynamics on periodic grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured trajectory")
    p_run.add_argument("config")

    p_sweep = sub.add_parser("sweep", help="bandwidth sweep against oracles")
    p_sweep.add_argument("config")

    p_check = sub.add_parser("check", help="re-audit stored trajectory dumps")
    p_check.add_argument("dumps", nargs="+")
    p_check.add_argument("--config", default=None)

    p_energy = sub.add_parser("energy", help="energy of one stored state")
    p_energy.add_argument("dump")
    p_energy.add_argument("--h", type=float, default=None)
    p_energy.add_argument("--config", default=None)

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "sweep":
        return cmd_sweep(args.config)
    if args.command == "check":
        return cmd_check(args.dumps, args.config)
    return cmd_energy(args.dump, args.h, args.config)


if __name__ == "__main__":
    sys.exit(main())
