"""Physical-frame integration of u_t = Lap u + |u|^{p-1} u to blowup.

Explicit RK2 (Heun) with homogeneous Neumann walls and an adaptive step
dt = min(h^2/(2 n safety), rate_factor / sup|u|^{p-1}): the first bound is
the diffusion CFL, the second caps the per-step logarithmic growth of the
reaction so the scheme tracks the singularity with bounded relative error
per step.  The default rate_factor = 0.05 sits at half the stability cap
0.1: at cap the Heun rate bias for the exact ODE solution is about 1.06%,
just outside the 1% slope tolerance the constant-data oracle is held to,
while at 0.05 the bias is 0.26%.

Blowup bookkeeping relies on the type I law: for ODE-type blowup,
sup|u|^{-(p-1)} is asymptotically (p-1)(T-t), so a linear fit of the tail
gives T as the zero crossing and -(p-1) as the slope.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .nonlinearity import signed_power
from .weighted_space import Field, FrameParams, Grid

__all__ = [
    "PhysicalRun",
    "BlowupReport",
    "step_physical",
    "run_to_blowup",
    "rescale_to_similarity",
    "save_snapshot",
    "load_snapshot",
    "report_to_json",
]

DEFAULT_M_STOP = 1e6
DEFAULT_SAFETY = 1.1
RATE_CAP = 0.1  # stability precondition: dt * sup|u|^{p-1} must stay below this
DEFAULT_RATE_FACTOR = 0.05


@dataclass
class PhysicalRun:
    """Mutable physical-frame solver state with its sup/argmax history."""

    u: Field
    t: float
    dt: float
    fp: FrameParams
    safety: float = DEFAULT_SAFETY
    rate_factor: float = DEFAULT_RATE_FACTOR
    history: list = dc_field(default_factory=list)  # (t, sup|u|, argmax coords)

    def __post_init__(self) -> None:
        if self.u.frame != "physical":
            raise ValueError("physical solver needs a physical-frame field")
        if not 0.0 < self.rate_factor <= RATE_CAP:
            raise ValueError(f"rate_factor must lie in (0, {RATE_CAP}]")
        if not self.history:
            self.history.append(self._observe())

    def _observe(self):
        vals = self.u.values
        sup = float(np.max(np.abs(vals)))
        loc = np.unravel_index(int(np.argmax(np.abs(vals))), vals.shape)
        coords = tuple(float(self.u.grid.axis(j)[loc[j]]) for j in range(self.u.grid.dim))
        return (self.t, sup, coords)


@dataclass
class BlowupReport:
    """Outcome of a run: T estimate, blowup point, rate fit, snapshots."""

    blew_up: bool
    T_est: float | None
    point_est: tuple | None
    rate_slope: float | None
    r_squared: float | None
    final_sup: float
    final_time: float
    snapshots: list  # (t, Field)
    history: list
    warnings: list = dc_field(default_factory=list)
    message: str = ""

    def __post_init__(self) -> None:
        if self.blew_up:
            if self.T_est is None or self.T_est <= self.final_time:
                raise ValueError("blowup time estimate must exceed the last sample time")
            if self.rate_slope is None or self.rate_slope >= 0:
                raise ValueError("blowup rate slope must be negative")


def _laplacian(grid: Grid, v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    for j in range(grid.dim):
        h2 = grid.h[j] ** 2
        vm = np.moveaxis(v, j, 0)
        d = np.empty_like(vm)
        d[1:-1] = vm[2:] - 2.0 * vm[1:-1] + vm[:-2]
        d[0] = 2.0 * (vm[1] - vm[0])  # mirror ghost: zero normal derivative
        d[-1] = 2.0 * (vm[-2] - vm[-1])
        out += np.moveaxis(d, 0, j) / h2
    return out


def _rhs(grid: Grid, v: np.ndarray, p: float) -> np.ndarray:
    return _laplacian(grid, v) + signed_power(v, p)


def _choose_dt(r: PhysicalRun) -> float:
    grid = r.u.grid
    diff = min(h * h for h in grid.h) / (2.0 * grid.dim * r.safety)
    sup = float(np.max(np.abs(r.u.values)))
    if sup == 0.0:
        return diff
    return min(diff, r.rate_factor / sup ** (r.fp.p - 1.0))


def step_physical(r: PhysicalRun) -> PhysicalRun:
    """One adaptive Heun step in place; returns the same run object."""
    dt = _choose_dt(r)
    grid = r.u.grid
    v = r.u.values
    k1 = _rhs(grid, v, r.fp.p)
    k2 = _rhs(grid, v + dt * k1, r.fp.p)
    v_new = v + 0.5 * dt * (k1 + k2)
    if not np.all(np.isfinite(v_new)):
        raise FloatingPointError(
            f"non-finite values at t = {r.t + dt:.6g} with sup|u| = "
            f"{np.max(np.abs(v)):.3g}; the step cap should have prevented this"
        )
    r.u = Field(grid, v_new, "physical")
    r.t += dt
    r.dt = dt
    r.history.append(r._observe())
    return r


def run_to_blowup(
    u0: Field,
    fp: FrameParams,
    M_stop: float = DEFAULT_M_STOP,
    t_max: float = 10.0,
    safety: float = DEFAULT_SAFETY,
    rate_factor: float = DEFAULT_RATE_FACTOR,
    snapshot_sups: tuple = (1e1, 10**1.5, 1e2, 10**2.5, 1e3),
) -> BlowupReport:
    """Integrate until sup|u| >= M_stop (blowup declared) or t >= t_max.

    On blowup the tail with sup in [M_stop/10, M_stop] is fit as
    sup^{-(p-1)} = a + s t; T_est is the zero crossing -a/s, the blowup
    point is the median recent argmax.  Snapshots are recorded the first
    time sup crosses each threshold in snapshot_sups.
    """
    run = PhysicalRun(u=u0.copy(), t=0.0, dt=0.0, fp=fp, safety=safety, rate_factor=rate_factor)
    snapshots = []
    pending = sorted(snapshot_sups)
    sup = run.history[-1][1]
    while sup < M_stop and run.t < t_max:
        step_physical(run)
        sup = run.history[-1][1]
        while pending and sup >= pending[0]:
            snapshots.append((run.t, run.u.copy()))
            pending.pop(0)
    history = run.history
    if sup < M_stop:
        return BlowupReport(
            blew_up=False,
            T_est=None,
            point_est=None,
            rate_slope=None,
            r_squared=None,
            final_sup=sup,
            final_time=run.t,
            snapshots=snapshots,
            history=history,
            message="no blowup detected",
        )
    ts = np.array([hh[0] for hh in history])
    sups = np.array([hh[1] for hh in history])
    window = sups >= M_stop / 10.0
    tw, yw = ts[window], sups[window] ** -(fp.p - 1.0)
    A = np.vstack([np.ones_like(tw), tw]).T
    (a, s), *_ = np.linalg.lstsq(A, yw, rcond=None)
    fit = a + s * tw
    ss_res = float(np.sum((yw - fit) ** 2))
    ss_tot = float(np.sum((yw - np.mean(yw)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    T_est = -a / s
    locs = np.array([hh[2] for hh in history])[window]
    point = tuple(float(np.median(locs[:, j])) for j in range(locs.shape[1]))
    warnings = []
    drift = np.max(locs, axis=0) - np.min(locs, axis=0)
    if np.any(drift > 10.0 * np.array(u0.grid.h)):
        warnings.append("blowup point unresolved: argmax drifts across the fit window")
    return BlowupReport(
        blew_up=True,
        T_est=float(T_est),
        point_est=point,
        rate_slope=float(s),
        r_squared=r_squared,
        final_sup=sup,
        final_time=run.t,
        snapshots=snapshots,
        history=history,
        warnings=warnings,
    )


def rescale_to_similarity(
    u_snapshot: Field,
    t: float,
    T: float,
    a,
    fp: FrameParams,
    L: float = 20.0,
    h: float = 0.05,
) -> tuple[Field, float]:
    """Similarity-frame view of a physical snapshot around center a.

    w(z) = (T-t)^{1/(p-1)} u(a + z sqrt(T-t)) on a symmetric z-grid of
    extent L and spacing h, with tau = -log(T-t).  The z-grid must map
    inside the physical box; the error message reports the largest usable L.
    """
    if t >= T:
        raise ValueError("snapshot time must precede the blowup time")
    if u_snapshot.frame != "physical":
        raise ValueError("rescaling expects a physical-frame snapshot")
    a = np.asarray(a, dtype=float).reshape(u_snapshot.grid.dim)
    scale = math.sqrt(T - t)
    L_max = min(
        (u_snapshot.grid.extents[j] - abs(a[j])) / scale
        for j in range(u_snapshot.grid.dim)
    )
    if L > L_max:
        raise ValueError(
            f"requested extent L = {L:g} maps outside the physical data; "
            f"largest usable L is {L_max:.6g}"
        )
    zgrid = Grid.make(u_snapshot.grid.dim, L, h)
    pts = zgrid.points() * scale + a
    vals = u_snapshot.evaluate(pts).reshape(zgrid.npts)
    w = (T - t) ** (1.0 / (fp.p - 1.0)) * vals
    tau = -math.log(T - t)
    return Field(zgrid, w, "similarity"), tau


# ---------------------------------------------------------------------------
# persistence

_MAGIC_NOTE = "little-endian header: n (int64), sizes (n int64), extents (n f64), t, p"


def save_snapshot(path, field: Field, t: float, fp: FrameParams) -> None:
    """Flat binary snapshot: header (n, sizes, extents, t, p), then row-major f64."""
    grid = field.grid
    n = grid.dim
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", n))
        fh.write(struct.pack(f"<{n}q", *grid.npts))
        fh.write(struct.pack(f"<{n}d", *grid.extents))
        fh.write(struct.pack("<2d", t, fp.p))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_snapshot(path) -> tuple[Field, float, float]:
    """Inverse of save_snapshot; returns (physical field, t, p)."""
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<q", fh.read(8))
        sizes = struct.unpack(f"<{n}q", fh.read(8 * n))
        extents = struct.unpack(f"<{n}d", fh.read(8 * n))
        t, p = struct.unpack("<2d", fh.read(16))
        count = int(np.prod(sizes))
        data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(sizes)
    grid = Grid(extents=tuple(extents), npts=tuple(int(m) for m in sizes))
    return Field(grid, np.array(data, dtype=float), "physical"), t, p


def report_to_json(report: BlowupReport, path=None) -> str:
    """Serialize a report (sans field data) to JSON; snapshots appear as times."""
    payload = {
        "blew_up": report.blew_up,
        "T_est": report.T_est,
        "point_est": list(report.point_est) if report.point_est else None,
        "rate_slope": report.rate_slope,
        "r_squared": report.r_squared,
        "final_sup": report.final_sup,
        "final_time": report.final_time,
        "snapshot_times": [t for t, _ in report.snapshots],
        "history": [[t, s, list(loc)] for t, s, loc in report.history],
        "warnings": report.warnings,
        "message": report.message,
    }
    text = json.dumps(payload, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
