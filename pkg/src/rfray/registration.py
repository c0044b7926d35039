"""Rigid point-to-point ICP and cloud-to-cloud distance statistics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


class RegistrationError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    id: str = "cloud"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3) if len(self.points) else np.zeros((0, 3))
        if len(pts) == 0:
            raise RegistrationError(f"point cloud {self.id!r} is empty")
        if not np.all(np.isfinite(pts)):
            raise RegistrationError(f"point cloud {self.id!r} has non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
            raise RegistrationError("rotation must be a proper orthonormal matrix")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def rotation_angle(self) -> float:
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return math.acos(max(-1.0, min(1.0, c)))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


@dataclass(frozen=True)
class RegistrationReport:
    transform: RigidTransform
    rms_m: float
    iterations: int
    converged: bool
    c2c_mean_m: float
    c2c_std_m: float
    energy_history: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "transform": self.transform.to_dict(),
            "rms_m": self.rms_m,
            "iterations": self.iterations,
            "converged": self.converged,
            "c2c_mean_m": self.c2c_mean_m,
            "c2c_std_m": self.c2c_std_m,
            "energy_history": list(self.energy_history),
        }


class NearestIndex:
    """Exact nearest-neighbour lookup over a fixed target cloud."""

    def __init__(self, target):
        pts = target.points if isinstance(target, PointCloud) else np.asarray(target, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise RegistrationError("nearest-neighbour target is empty")
        self.points = pts
        self._tree = cKDTree(pts)

    def query(self, queries) -> tuple[np.ndarray, np.ndarray]:
        q = np.asarray(queries, dtype=float).reshape(-1, 3)
        dist, idx = self._tree.query(q, k=1)
        return np.asarray(idx, dtype=np.int64), np.asarray(dist, dtype=float)


def nearest_neighbor(index: NearestIndex, query) -> tuple[int, float]:
    idx, dist = index.query(query)
    return int(idx[0]), float(dist[0])


def best_rigid_transform(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares (R, t) mapping src onto dst for fixed correspondences (Kabsch)."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, cd - r @ cs)


def _check_nondegenerate(pts: np.ndarray, name: str) -> None:
    if len(pts) < 3:
        raise RegistrationError(f"{name} needs at least 3 points")
    sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise RegistrationError(f"{name} is degenerate (coincident or collinear points)")


def icp(source: PointCloud, target: PointCloud, max_iters: int = 50, tol: float = 1e-8,
        trim: float = 0.0, initial: RigidTransform | None = None) -> RegistrationReport:
    """Point-to-point ICP aligning ``source`` onto ``target``.

    The energy recorded per iteration is the mean squared correspondence distance
    for the current transform; without trimming it never increases.
    """
    _check_nondegenerate(source.points, "source")
    _check_nondegenerate(target.points, "target")
    if not 0.0 <= trim < 1.0:
        raise RegistrationError("trim must lie in [0, 1)")
    if max_iters < 1:
        raise RegistrationError("max_iters must be >= 1")
    index = NearestIndex(target)
    src = source.points
    keep = max(3, int(round(len(src) * (1.0 - trim))))
    xf = initial or RigidTransform()
    history: list[float] = []
    converged = False
    prev_rms = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        moved = xf.apply(src)
        idx, dist = index.query(moved)
        sel = np.argsort(dist, kind="stable")[:keep] if keep < len(src) else np.arange(len(src))
        energy = float(np.mean(dist[sel] ** 2))
        history.append(energy)
        rms = math.sqrt(energy)
        if abs(prev_rms - rms) < tol or rms == 0.0:
            converged = True
            break
        prev_rms = rms
        step = best_rigid_transform(moved[sel], index.points[idx[sel]])
        xf = step.compose(xf)
    else:
        # the loop ended on a solve; score the final transform
        moved = xf.apply(src)
        _, dist = index.query(moved)
        sel = np.sort(dist)[:keep]
        energy = float(np.mean(sel ** 2))
        history.append(energy)
        converged = abs(prev_rms - math.sqrt(energy)) < tol
    aligned = PointCloud(xf.apply(src), source.id)
    mean, std = cloud_distance_stats(aligned, target)
    return RegistrationReport(xf, math.sqrt(history[-1]), it, converged, mean, std, tuple(history))


def cloud_distance_stats(a: PointCloud, b: PointCloud) -> tuple[float, float]:
    """Mean and population standard deviation of each point of ``a`` to its nearest point of ``b``."""
    _, dist = NearestIndex(b).query(a.points)
    return float(dist.mean()), float(dist.std())


# --- I/O ------------------------------------------------------------------------


def read_ply_ascii(path) -> np.ndarray:
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise RegistrationError(f"{path}: not a PLY file")
        n_vertex = None
        props: list[str] = []
        in_vertex = False
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise RegistrationError(f"{path}: only ascii PLY is supported")
            if tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n_vertex is None or not {"x", "y", "z"} <= set(props):
            raise RegistrationError(f"{path}: missing vertex element with x, y, z")
        cols = [props.index(c) for c in "xyz"]
        pts = []
        for _ in range(n_vertex):
            tok = fh.readline().split()
            pts.append([float(tok[c]) for c in cols])
    return np.asarray(pts, dtype=float).reshape(-1, 3)


def read_xyz_csv(path) -> np.ndarray:
    pts = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                pts.append([float(v) for v in row[:3]])
            except ValueError:
                if pts:
                    raise RegistrationError(f"{path}: non-numeric row {row!r}") from None
                continue  # header
    return np.asarray(pts, dtype=float).reshape(-1, 3)


def load_cloud(path) -> PointCloud:
    p = Path(path)
    pts = read_ply_ascii(p) if p.suffix.lower() == ".ply" else read_xyz_csv(p)
    return PointCloud(pts, p.stem)


def save_cloud(cloud: PointCloud, path) -> None:
    p = Path(path)
    with open(p, "w", newline="") as fh:
        if p.suffix.lower() == ".ply":
            fh.write(f"ply\nformat ascii 1.0\nelement vertex {len(cloud)}\n"
                     "property double x\nproperty double y\nproperty double z\nend_header\n")
            for x, y, z in cloud.points:
                fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")
        else:
            fh.write("x,y,z\n")
            for x, y, z in cloud.points:
                fh.write(f"{x:.9g},{y:.9g},{z:.9g}\n")
