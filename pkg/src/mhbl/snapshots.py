"""Binary snapshots and CSV plot data.

Snapshot layout (little endian throughout):

    bytes 0..3   magic "MHBL"
    bytes 4..7   format version, u32 (currently 1)
    bytes 8..11  nx, u32
    bytes 12..15 second grid size, u32 (neta for transformed states, ny for
                 physical ones)
    bytes 16..23 time, f64
    byte  24     field-set tag, u8: 1 = transformed (u1, theta, q),
                 2 = physical (rho, u1, u2, theta, h1, h2)
    then the fields in that order, f64, eta (or y) index fastest.

Writing the same state twice produces byte-identical files; reading returns
exactly the written arrays.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np

from .errors import SnapshotFormatError
from .fields import FloatArray, State
from .picard import IterationReport
from .stepper import Trajectory
from .transform import PhysicalState

MAGIC = b"MHBL"
VERSION = 1
TAG_TRANSFORMED = 1
TAG_PHYSICAL = 2
_TRANSFORMED_FIELDS = ("u1", "theta", "q")
_PHYSICAL_FIELDS = ("rho", "u1", "u2", "theta", "h1", "h2")
_HEADER = struct.Struct("<4sIIIdB")


@dataclass(frozen=True)
class Snapshot:
    """Decoded snapshot: a tag, the grid sizes, the time and the fields."""

    tag: int
    nx: int
    n2: int
    time: float
    fields: Dict[str, FloatArray]

    @property
    def kind(self) -> str:
        return "transformed" if self.tag == TAG_TRANSFORMED else "physical"


def write_snapshot(state: Union[State, PhysicalState], path: str) -> None:
    """Serialize a transformed or physical state."""
    if isinstance(state, State):
        tag, names = TAG_TRANSFORMED, _TRANSFORMED_FIELDS
    elif isinstance(state, PhysicalState):
        tag, names = TAG_PHYSICAL, _PHYSICAL_FIELDS
    else:
        raise SnapshotFormatError(f"cannot snapshot a {type(state).__name__}")
    arrays = [np.ascontiguousarray(getattr(state, n), dtype="<f8") for n in names]
    nx, n2 = arrays[0].shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, nx, n2, float(state.time), tag))
        for arr in arrays:
            fh.write(arr.tobytes(order="C"))


def read_snapshot(path: str) -> Snapshot:
    """Decode a snapshot; malformed input raises SnapshotFormatError."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(
            f"truncated header: {len(raw)} bytes < {_HEADER.size}")
    magic, version, nx, n2, time, tag = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise SnapshotFormatError(
            f"unsupported snapshot version {version} (expected {VERSION})")
    if tag == TAG_TRANSFORMED:
        names = _TRANSFORMED_FIELDS
    elif tag == TAG_PHYSICAL:
        names = _PHYSICAL_FIELDS
    else:
        raise SnapshotFormatError(f"unknown field-set tag {tag} at offset 24")
    per_field = 8 * nx * n2
    expected = _HEADER.size + per_field * len(names)
    if len(raw) != expected:
        raise SnapshotFormatError(
            f"payload length {len(raw)} != expected {expected} "
            f"(truncation at offset {min(len(raw), expected)})")
    fields: Dict[str, FloatArray] = {}
    off = _HEADER.size
    for name in names:
        flat = np.frombuffer(raw, dtype="<f8", count=nx * n2, offset=off)
        fields[name] = flat.reshape(nx, n2).copy()
        off += per_field
    return Snapshot(tag=tag, nx=nx, n2=n2, time=time, fields=fields)


def _write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def emit_plot_data(obj, out_dir: str, grid=None, xi_index: int = 0) -> List[str]:
    """Write plain CSV plot data for a Trajectory, an IterationReport or a
    residual report, plus a gnuplot script referencing the files.

    Trajectories produce one profile file per component (eta against the
    field at the selected xi index, one column per stored time level).
    Iteration reports produce the contraction history.  Returns the list of
    files written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []
    if isinstance(obj, Trajectory):
        if obj.nlevels == 0 or obj.data.size == 0:
            raise SnapshotFormatError("cannot plot an empty trajectory")
        if grid is None:
            raise SnapshotFormatError("trajectory plots need the grid")
        eta = grid.eta
        names = ("u1", "theta", "q")
        for c, name in enumerate(names):
            path = os.path.join(out_dir, f"profile_{name}.csv")
            header = ["eta"] + [f"t={t:.6g}" for t in obj.times]
            cols = [eta] + [obj.data[k, xi_index, :, c] for k in range(obj.nlevels)]
            rows = list(zip(*[np.asarray(col) for col in cols]))
            _write_csv(path, header, rows)
            written.append(path)
        gp = os.path.join(out_dir, "plots.gp")
        with open(gp, "w") as fh:
            fh.write("set datafile separator ','\nset key autotitle columnhead\n")
            for name in names:
                fh.write(f"plot for [c=2:*] 'profile_{name}.csv' "
                         f"using 1:c with lines title columnhead\npause -1\n")
        written.append(gp)
        return written
    if isinstance(obj, IterationReport):
        path = os.path.join(out_dir, "iterations.csv")
        rows = []
        for n, d in enumerate(obj.distances, start=1):
            ratio = obj.ratios[n - 2] if n >= 2 and n - 2 < len(obj.ratios) else ""
            adm = obj.admissible[n] if n < len(obj.admissible) else ""
            rows.append([n, f"{d:.12e}", ratio, adm])
        _write_csv(path, ["iteration", "distance", "ratio", "admissible"], rows)
        written.append(path)
        return written
    # fall through: any object with max_norm/l2_norm pairs counts as residuals
    if hasattr(obj, "max_norm"):
        path = os.path.join(out_dir, "residuals.csv")
        maxn = np.atleast_1d(np.asarray(obj.max_norm, dtype=float))
        l2 = getattr(obj, "l2_norm", None)
        l2 = np.full_like(maxn, np.nan) if l2 is None else np.atleast_1d(np.asarray(l2))
        rows = [[i, f"{m:.12e}", f"{l:.12e}"] for i, (m, l) in enumerate(zip(maxn, l2))]
        _write_csv(path, ["equation", "max_norm", "l2_norm"], rows)
        written.append(path)
        return written
    raise SnapshotFormatError(f"do not know how to plot {type(obj).__name__}")
