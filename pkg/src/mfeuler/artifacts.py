"""On-disk artifact formats: field/trajectory binaries, CSVs, run manifests.

Binary layout is a short structured-text header (terminated by a blank line)
followed by raw little-endian float64 payloads in row-major order.  CSV floats
are written with ``repr`` so rerunning a configuration reproduces files
byte-for-byte.
"""

from __future__ import annotations

import datetime
import os

import numpy as np

from .fields import GridField, PeriodicGrid
from .particles import ParticleState

FIELD_MAGIC = "mfeuler-field v1"
TRAJ_MAGIC = "mfeuler-particles v1"


def _fmt(x) -> str:
    return repr(float(x))


def write_field(path, field: GridField):
    header = (
        f"{FIELD_MAGIC}\n"
        f"dim = {field.grid.dim}\n"
        f"points_per_dim = {field.grid.points_per_dim}\n"
        f"period = {_fmt(field.grid.period)}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> GridField:
    with open(path, "rb") as fh:
        data = fh.read()
    head, _, payload = data.partition(b"\n\n")
    lines = head.decode("ascii").splitlines()
    if lines[0] != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field file")
    meta = dict(line.split(" = ") for line in lines[1:])
    grid = PeriodicGrid(int(meta["dim"]), int(meta["points_per_dim"]), float(meta["period"]))
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape)
    return GridField(grid, values.copy())


def write_field_csv(path, field: GridField):
    if field.grid.dim != 1:
        raise ValueError("CSV export is defined for 1-d fields")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,value\n")
        for x, v in zip(field.grid.axis_coords, field.values):
            fh.write(f"{_fmt(x)},{_fmt(v)}\n")


def write_particles(path, state: ParticleState):
    header = (
        f"{TRAJ_MAGIC}\n"
        f"n = {state.n_particles}\n"
        f"dim = {state.dim}\n"
        f"time = {_fmt(state.time)}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(state.positions, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.velocities, dtype="<f8").tobytes())


def read_particles(path) -> ParticleState:
    with open(path, "rb") as fh:
        data = fh.read()
    head, _, payload = data.partition(b"\n\n")
    lines = head.decode("ascii").splitlines()
    if lines[0] != TRAJ_MAGIC:
        raise ValueError(f"{path}: not a particle snapshot")
    meta = dict(line.split(" = ") for line in lines[1:])
    n, dim = int(meta["n"]), int(meta["dim"])
    flat = np.frombuffer(payload, dtype="<f8")
    pos = flat[: n * dim].reshape(n, dim).copy()
    vel = flat[n * dim :].reshape(n, dim).copy()
    return ParticleState(pos, vel, float(meta["time"]))


def write_q_series(path, records):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("time,kinetic_term,density_term,q_total,stopped\n")
        for r in records:
            fh.write(
                f"{_fmt(r.time)},{_fmt(r.kinetic_term)},{_fmt(r.density_term)},"
                f"{_fmt(r.q_total)},{int(r.stopped)}\n"
            )


def write_mass_trace(path, rows):
    """rows: iterable of (step, time, mass, min_rho)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("step,time,mass,min_rho\n")
        for step, time, mass, min_rho in rows:
            fh.write(f"{step},{_fmt(time)},{_fmt(mass)},{_fmt(min_rho)}\n")


def write_rate_csv(path, result):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("N,mean_q,se_q,mean_dist_S,mean_dist_V,censored_count\n")
        for i, n in enumerate(result.n_values):
            fh.write(
                f"{n},{_fmt(result.mean_q[i])},{_fmt(result.se_q[i])},"
                f"{_fmt(result.mean_dist_s[i])},{_fmt(result.mean_dist_v[i])},"
                f"{int(result.censored_counts[i])}\n"
            )


def rate_summary_text(result) -> str:
    def fmt_slope(s):
        return "degenerate" if s is None else _fmt(s)

    lines = [
        "mfeuler rate study summary",
        f"beta: {_fmt(result.beta)}",
        f"dim: {result.dim}",
        f"alpha: {_fmt(result.alpha)}",
        f"t_final: {_fmt(result.t_final)}",
        f"guard_m: {_fmt(result.guard_m)}",
        f"samples: {result.samples}",
        f"n_values: {','.join(str(n) for n in result.n_values)}",
        f"freq_cutoff: {result.freq_cutoff}",
        f"dist_tail_bound: {_fmt(result.dist_tail_bound)}",
        f"target_slope: {_fmt(result.target_slope)}",
        f"slope_q: {fmt_slope(result.slope_q)}",
        f"slope_q_adjusted: {fmt_slope(result.slope_q_adjusted)}",
        f"slope_dist_s: {fmt_slope(result.slope_dist_s)}",
        f"slope_dist_v: {fmt_slope(result.slope_dist_v)}",
        f"r2_q: {fmt_slope(result.r2_q)}",
        f"mean_q0: {','.join(_fmt(v) for v in result.mean_q0)}",
        f"censored_total: {int(result.censored_counts.max()) if len(result.censored_counts) else 0}",
    ]
    for note in result.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def write_rate_summary(path, result):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(rate_summary_text(result))


def write_manifest(path, config_text, version, stopping=None, extra=None, timestamp=True):
    lines = ["mfeuler run manifest", f"version: {version}"]
    if timestamp:
        lines.append(f"written_at: {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
    if stopping is None:
        lines.append("stopping: none")
    else:
        lines.append(
            "stopping: "
            f"step={stopping.step_index} time={_fmt(stopping.time)} "
            f"norm={_fmt(stopping.norm_value)} threshold={_fmt(stopping.threshold)} "
            f"reason={stopping.reason}"
        )
    for key, value in (extra or {}).items():
        lines.append(f"{key}: {value}")
    lines.append("")
    lines.append("[resolved config]")
    lines.append(config_text.rstrip("\n"))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
