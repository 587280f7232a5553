"""Experiment harness: configuration, canonical runs, the alpha sweep,
snapshot persistence and diagnostics output.

A run is deterministic given its configuration (fixed summation orders
throughout): re-running the same config reproduces bit-identical
snapshots.  Sweeps run the alpha = 0 reference first and compare every
member against it at the requested checkpoint times.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .elliptic import SolverSettings, StreamSolver
from .expressions import PRESETS, compile_expression
from .mesh import build_periodic_mesh
from .spaces import CgField, DgField, FemSpace
from .stepper import SimState, cfl_number, ssprk3_step
from .transport import TransportOperator

SNAPSHOT_MAGIC = b"TQGSNAP1"
SNAPSHOT_VERSION = 1


@dataclass
class SimConfig:
    """Run parameters; presets fill the field expressions unless overridden."""

    n: int = 64
    degree: int = 1
    alpha: float = 0.0
    dt: float = 0.002
    steps: int = 1000
    snapshot_every: int = 100
    diag_every: int = 10
    elliptic_tol: float = 1e-10
    elliptic_maxiter: int = 5000
    out_dir: str = "runs/out"
    preset: str = "canonical"
    buoyancy: str = ""
    pv: str = ""
    bathymetry: str = ""
    rotation: str = ""
    bathymetry_form: str = "skew"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.dt <= 0 or self.steps < 0:
            raise ValueError("dt must be positive and steps nonnegative")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.snapshot_every < 1 or self.diag_every < 1:
            raise ValueError("output intervals must be positive")

    def field_expressions(self) -> dict:
        if self.preset not in PRESETS:
            raise ValueError(
                f"unknown preset {self.preset!r}; available: {sorted(PRESETS)}"
            )
        exprs = dict(PRESETS[self.preset])
        for key in ("buoyancy", "pv", "bathymetry", "rotation"):
            override = getattr(self, key)
            if override:
                exprs[key] = override
        return exprs


def serialize_config(cfg: SimConfig) -> str:
    lines = ["# tqg run configuration"]
    for f in dataclasses.fields(cfg):
        lines.append(f"{f.name} = {getattr(cfg, f.name)!r}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> SimConfig:
    """Parse the flat key = value format written by serialize_config."""
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(SimConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        ftype = fields[key].type
        if ftype in ("int",):
            kwargs[key] = int(value)
        elif ftype in ("float",):
            kwargs[key] = float(value)
        else:
            if value and value[0] in "'\"" and value[-1] == value[0]:
                value = value[1:-1]
            kwargs[key] = value
    return SimConfig(**kwargs)


def config_hash(cfg: SimConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


# ---------------------------------------------------------------- snapshots


def write_snapshot(path, field_, name: str, alpha: float, t: float) -> None:
    """Write one field in the binary snapshot format (little endian).

    Layout: magic "TQGSNAP1", u32 version, u32 n, u32 k, f64 alpha, f64 t,
    u32 name length, UTF-8 name, u64 dof count, dof-count f64 coefficients.
    """
    space = field_.space
    coeffs = np.ascontiguousarray(field_.coeffs, dtype="<f8")
    name_b = name.encode("utf-8")
    buf = io.BytesIO()
    buf.write(SNAPSHOT_MAGIC)
    buf.write(struct.pack("<III", SNAPSHOT_VERSION, space.mesh.n, space.degree))
    buf.write(struct.pack("<dd", alpha, t))
    buf.write(struct.pack("<I", len(name_b)))
    buf.write(name_b)
    buf.write(struct.pack("<Q", coeffs.size))
    buf.write(coeffs.tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_snapshot(path):
    """Read a snapshot file; returns (header dict, coefficient array)."""
    raw = Path(path).read_bytes()
    if raw[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic)")
    off = len(SNAPSHOT_MAGIC)
    version, n, k = struct.unpack_from("<III", raw, off)
    off += 12
    alpha, t = struct.unpack_from("<dd", raw, off)
    off += 16
    (name_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    name = raw[off : off + name_len].decode("utf-8")
    off += name_len
    (count,) = struct.unpack_from("<Q", raw, off)
    off += 8
    coeffs = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
    header = {
        "version": version, "n": n, "k": k, "alpha": alpha, "t": t, "name": name,
        "count": count,
    }
    return header, coeffs


# ------------------------------------------------------------ initial state


def initial_state(cfg: SimConfig, space: FemSpace | None = None,
                  solver: StreamSolver | None = None) -> SimState:
    """Project/interpolate the configured fields and perform the t=0 solve."""
    if space is None:
        space = FemSpace(build_periodic_mesh(cfg.n), cfg.degree)
    exprs = cfg.field_expressions()
    b0 = space.project_dg(compile_expression(exprs["buoyancy"]))
    w0 = space.project_dg(compile_expression(exprs["pv"]))
    h = space.interpolate_cg(compile_expression(exprs["bathymetry"]))
    f = space.interpolate_cg(compile_expression(exprs["rotation"]))
    if solver is None:
        solver = StreamSolver(
            space, cfg.alpha,
            SolverSettings(rtol=cfg.elliptic_tol, maxiter=cfg.elliptic_maxiter),
        )
    tilde, palpha = solver.solve(w0, f)
    return SimState(
        b=b0, omega=w0, psi_tilde=tilde, psi_alpha=palpha, h=h, f=f,
        alpha=cfg.alpha, t=0.0,
    )


def canonical_initial_state(cfg: SimConfig, **kw) -> SimState:
    """The canonical analytic initial conditions (preset 'canonical')."""
    if cfg.preset != "canonical":
        raise ValueError(f"expected the 'canonical' preset, got {cfg.preset!r}")
    return initial_state(cfg, **kw)


# -------------------------------------------------------------------- runs


@dataclass
class RunResult:
    config: SimConfig
    out_dir: Path
    records: list
    final_state: SimState
    checkpoint_states: dict = field(default_factory=dict)  # step -> SimState


def run(cfg: SimConfig, checkpoint_steps=(), reference_states=None,
        state: SimState | None = None, quiet: bool = True) -> RunResult:
    """Advance the configured simulation, writing snapshots and diagnostics.

    `checkpoint_steps` requests in-memory copies of the state at those step
    indices; `reference_states` (step -> SimState) adds relative-error
    columns against a reference run at matching steps.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_config(cfg))

    space = state.space if state is not None else FemSpace(
        build_periodic_mesh(cfg.n), cfg.degree
    )
    solver = StreamSolver(
        space, cfg.alpha,
        SolverSettings(rtol=cfg.elliptic_tol, maxiter=cfg.elliptic_maxiter),
    )
    transport = TransportOperator(space, cfg.bathymetry_form)
    if state is None:
        state = initial_state(cfg, space=space, solver=solver)

    monitors = diag.BkmMonitors()
    records = []
    checkpoints = {}
    want = set(int(s) for s in checkpoint_steps)
    refs = reference_states or {}

    def snapshot(step: int) -> None:
        for name, f in (("b", state.b), ("omega", state.omega)):
            path = out / f"snap_{name}_step{step:06d}.tqg"
            write_snapshot(path, f, name, cfg.alpha, state.t)
            meta = {"config_hash": config_hash(cfg), "step": step}
            path.with_suffix(".json").write_text(json.dumps(meta))

    def record(step: int, rec) -> None:
        if step in refs:
            rec.e_b, rec.e_omega = diag.relative_errors(state, refs[step])
        records.append(rec)
        writer.write(rec)

    with diag.DiagnosticsWriter(out / "diagnostics.csv") as writer:
        snapshot(0)
        record(0, monitors.update(state))
        if 0 in want:
            checkpoints[0] = state
        for step in range(1, cfg.steps + 1):
            state = ssprk3_step(state, cfg.dt, transport, solver)
            rec = monitors.update(state, cfg.dt)
            if step % cfg.snapshot_every == 0 or step == cfg.steps:
                snapshot(step)
            if step % cfg.diag_every == 0 or step == cfg.steps or step in refs:
                record(step, rec)
            if step in want:
                checkpoints[step] = state
            if not quiet and step % 100 == 0:
                print(f"  step {step}/{cfg.steps}  t={state.t:.4f}  "
                      f"cfl={cfl_number(state, cfg.dt):.3f}")
    return RunResult(
        config=cfg, out_dir=out, records=records, final_state=state,
        checkpoint_states=checkpoints,
    )


# ------------------------------------------------------------------- sweep


@dataclass
class SweepResult:
    checkpoints: list  # requested times
    checkpoint_steps: dict  # time -> step index
    alphas: list  # positive members, ascending
    errors: dict  # (time, alpha) -> (e_b, e_omega)
    slopes: dict  # time -> (slope_e_b, slope_e_omega) or None
    report_path: Path


class SweepError(RuntimeError):
    def __init__(self, message: str, partial: "SweepResult"):
        super().__init__(message)
        self.partial = partial


def checkpoint_step(t: float, dt: float, steps: int) -> int:
    """Nearest step at or before time t; warns beyond a dt/2 mismatch."""
    step = min(int(np.floor(t / dt + 1e-9)), steps)
    if abs(step * dt - t) > dt / 2 + 1e-12:
        warnings.warn(
            f"checkpoint t={t} matched to step {step} (t={step * dt}); "
            f"mismatch exceeds dt/2"
        )
    return step


def fit_slope(alphas, errors):
    """Least-squares slope of log10(error) vs log10(alpha)."""
    if len(alphas) < 2:
        return None
    return float(np.polyfit(np.log10(alphas), np.log10(errors), 1)[0])


def alpha_sweep(base: SimConfig, alphas, checkpoints) -> SweepResult:
    """Convergence study of the regularised model against the alpha=0 run.

    All members share the reference run's initial state (byte-identical
    t=0 snapshots).  Emits <out>/sweep_report.csv with per-checkpoint
    relative errors and fitted log-log slopes.
    """
    alphas = sorted(float(a) for a in alphas)
    if not alphas or alphas[0] != 0.0:
        raise ValueError("the alpha list must contain 0 (the reference run)")
    members = alphas[1:]
    if not members:
        raise ValueError("the alpha list needs at least one positive member")
    checkpoints = sorted(float(t) for t in checkpoints)
    base_out = Path(base.out_dir)
    steps_by_time = {
        t: checkpoint_step(t, base.dt, base.steps) for t in checkpoints
    }

    ref_cfg = dataclasses.replace(
        base, alpha=0.0, out_dir=str(base_out / "alpha_0")
    )
    ref = run(ref_cfg, checkpoint_steps=steps_by_time.values())
    ref_states = ref.checkpoint_states

    errors = {}
    slopes = {}
    failed = None
    for a in members:
        cfg = dataclasses.replace(
            base, alpha=a, out_dir=str(base_out / f"alpha_{a:.10g}")
        )
        try:
            res = run(cfg, checkpoint_steps=steps_by_time.values(),
                      reference_states=ref_states)
        except Exception as exc:  # preserve partial results
            failed = (a, exc)
            break
        for t, step in steps_by_time.items():
            errors[(t, a)] = diag.relative_errors(
                res.checkpoint_states[step], ref_states[step]
            )

    done_alphas = [a for a in members if (checkpoints[0], a) in errors]
    for t in checkpoints:
        avail = [a for a in done_alphas if (t, a) in errors]
        if len(avail) >= 2:
            slopes[t] = (
                fit_slope(avail, [errors[(t, a)][0] for a in avail]),
                fit_slope(avail, [errors[(t, a)][1] for a in avail]),
            )
        else:
            slopes[t] = None

    report = base_out / "sweep_report.csv"
    base_out.mkdir(parents=True, exist_ok=True)
    with open(report, "w", newline="") as fh:
        fh.write("checkpoint,alpha,e_b,e_omega\n")
        for t in checkpoints:
            for a in done_alphas:
                if (t, a) in errors:
                    eb, ew = errors[(t, a)]
                    fh.write(f"{t:.10g},{a:.17g},{eb:.17g},{ew:.17g}\n")
        fh.write("# fitted log10-log10 slopes over positive alpha\n")
        fh.write("checkpoint,slope_e_b,slope_e_omega\n")
        for t in checkpoints:
            if slopes[t] is None:
                fh.write(f"{t:.10g},undefined,undefined\n")
            else:
                fh.write(f"{t:.10g},{slopes[t][0]:.6g},{slopes[t][1]:.6g}\n")

    result = SweepResult(
        checkpoints=checkpoints, checkpoint_steps=steps_by_time,
        alphas=done_alphas, errors=errors, slopes=slopes, report_path=report,
    )
    if failed is not None:
        raise SweepError(
            f"sweep member alpha={failed[0]} failed: {failed[1]}", result
        ) from failed[1]
    return result
