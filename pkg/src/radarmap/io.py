"""File formats: energy-matrix CSV, belief CSV, PGM bitmaps, JSON reports, manifests.

Floats are written with ``repr`` (shortest round-trip form), so re-running a
seeded pipeline reproduces files byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .frontend import EnergyMatrix
from .geometry import Pose
from .mapping import Bitmap


class MatrixFormatError(ValueError):
    """Unparseable energy-matrix CSV; carries the offending path and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def _fmt(x) -> str:
    return repr(float(x))


def save_energy_matrix(matrix: EnergyMatrix, path) -> None:
    """Write one scan as CSV: two metadata lines, then one row per steering."""
    path = Path(path)
    lines = [
        "pose_x,pose_y,heading_deg,bin_duration_ns,n_bins",
        ",".join(
            [
                _fmt(matrix.pose.x),
                _fmt(matrix.pose.y),
                _fmt(matrix.pose.heading_deg),
                _fmt(matrix.bin_duration_ns),
                str(matrix.n_bins),
            ]
        ),
        "steering_deg," + ",".join(f"bin_{j}" for j in range(matrix.n_bins)),
    ]
    for steer, row in zip(matrix.steering_degs, matrix.values):
        lines.append(_fmt(steer) + "," + ",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_energy_matrix(path) -> EnergyMatrix:
    path = Path(path)
    text = path.read_text().splitlines()
    if len(text) < 4:
        raise MatrixFormatError(path, len(text), "file too short for an energy matrix")
    try:
        meta = text[1].split(",")
        pose = Pose(float(meta[0]), float(meta[1]), float(meta[2]))
        bin_duration = float(meta[3])
        n_bins = int(meta[4])
    except (ValueError, IndexError) as exc:
        raise MatrixFormatError(path, 2, f"bad metadata line: {exc}") from exc

    steerings = []
    rows = []
    for line_no, line in enumerate(text[3:], start=4):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_bins + 1:
            raise MatrixFormatError(path, line_no, f"expected {n_bins + 1} columns, got {len(parts)}")
        try:
            steerings.append(float(parts[0]))
            rows.append([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise MatrixFormatError(path, line_no, f"non-numeric value: {exc}") from exc
    if not rows:
        raise MatrixFormatError(path, len(text), "no steering rows found")
    return EnergyMatrix(
        values=np.array(rows),
        bin_duration_ns=bin_duration,
        pose=pose,
        steering_degs=tuple(steerings),
    )


def save_belief_csv(values: np.ndarray, width: int, height: int, path) -> None:
    """Write a per-cell belief grid as CSV, top image row first."""
    img = np.asarray(values).reshape(height, width)[::-1]
    lines = [",".join(_fmt(v) for v in row) for row in img]
    Path(path).write_text("\n".join(lines) + "\n")


def save_pgm(bitmap: Bitmap, path) -> None:
    """Binary PGM (P5, maxval 255): occupied cells black, free cells white."""
    img = bitmap.image()[::-1]  # top image row first
    header = f"P5\n{bitmap.width} {bitmap.height}\n255\n".encode("ascii")
    pixels = np.where(img, 0, 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + pixels)


def load_pgm(path) -> Bitmap:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM file")
    width, height = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=width * height)
    occupied = (pixels.reshape(height, width)[::-1] == 0).ravel()
    return Bitmap(occupied=occupied, width=width, height=height)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(out_dir, files, extra: dict | None = None) -> Path:
    """Manifest of emitted files with content hashes, written into ``out_dir``."""
    out_dir = Path(out_dir)
    entries = [
        {"file": str(Path(f).relative_to(out_dir)), "sha256": file_sha256(f)}
        for f in sorted(Path(f) for f in files)
    ]
    manifest = {"files": entries}
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    write_json(manifest, path)
    return path
