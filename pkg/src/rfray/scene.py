"""Scene description: material-tagged triangle meshes, transmitters and receivers.

Scenes are loaded from a JSON descriptor::

    {"frequency_hz": 2.437e9,
     "meshes": [{"object_id": "walls", "material": "concrete", "thickness_m": 0.1,
                 "vertices": [[x, y, z], ...], "triangles": [[i, j, k], ...]}],
     "transmitters": [{"id": "tx", "position": [x, y, z], "power_dbm": 20, "gain_dbi": 0}],
     "receivers": [{"id": "rx", "position": [x, y, z], "gain_dbi": 0}]}

A top-level ``"vertices_obj": "file.obj"`` may supply geometry for mesh entries that
carry no ``vertices``; OBJ groups (``g``/``o``) are matched to ``object_id``.
All lengths are in meters.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .materials import RadioMaterial, material_catalog

logger = logging.getLogger(__name__)

MIN_TRIANGLE_AREA = 1e-12
MAX_SCENE_EXTENT_M = 1000.0
FREQUENCY_WINDOW_HZ = (1e9, 1e11)
DEFAULT_THICKNESS_M = 0.1
DEFAULT_GLASS_THICKNESS_M = 0.01


class SceneError(ValueError):
    """Base class for scene loading problems."""


class SceneParseError(SceneError):
    pass


class SceneValidationError(SceneError):
    pass


def default_thickness(material_name: str) -> float:
    return DEFAULT_GLASS_THICKNESS_M if material_name == "glass" else DEFAULT_THICKNESS_M


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    object_id: str
    material_name: str
    vertices: np.ndarray
    triangles: np.ndarray
    thickness_m: float = DEFAULT_THICKNESS_M

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def is_closed(self) -> bool:
        """True when every undirected edge is shared by exactly two triangles.

        Vertices are welded by position first, so per-face vertex copies still close.
        """
        if self.n_triangles == 0:
            return False
        _, weld = np.unique(np.round(self.vertices, 9), axis=0, return_inverse=True)
        tris = weld.reshape(-1)[self.triangles]
        edges = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool(np.all(counts == 2))


@dataclass(frozen=True)
class Transmitter:
    id: str
    position: tuple[float, float, float]
    power_dbm: float = 0.0
    gain_dbi: float = 0.0


@dataclass(frozen=True)
class Receiver:
    id: str
    position: tuple[float, float, float]
    gain_dbi: float = 0.0


@dataclass(frozen=True, eq=False)
class Scene:
    meshes: tuple[TriangleMesh, ...]
    transmitters: tuple[Transmitter, ...]
    receivers: tuple[Receiver, ...]
    frequency_hz: float
    metadata: dict = field(default_factory=dict)

    @property
    def wavelength_m(self) -> float:
        return 299792458.0 / self.frequency_hz

    @cached_property
    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        pts = [m.vertices for m in self.meshes if len(m.vertices)]
        if not pts:
            return None
        allv = np.concatenate(pts)
        return allv.min(axis=0), allv.max(axis=0)

    def contains(self, point, tol: float = 1e-9) -> bool:
        if self.bounds is None:
            return True
        lo, hi = self.bounds
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def mesh(self, object_id: str) -> TriangleMesh:
        for m in self.meshes:
            if m.object_id == object_id:
                return m
        raise KeyError(object_id)

    def transmitter(self, tx_id: str) -> Transmitter:
        for t in self.transmitters:
            if t.id == tx_id:
                return t
        raise KeyError(f"unknown transmitter {tx_id!r}")

    def receiver(self, rx_id: str) -> Receiver:
        for r in self.receivers:
            if r.id == rx_id:
                return r
        raise KeyError(f"unknown receiver {rx_id!r}")

    @property
    def n_triangles(self) -> int:
        return sum(m.n_triangles for m in self.meshes)

    def with_frequency(self, frequency_hz: float) -> "Scene":
        return replace(self, frequency_hz=float(frequency_hz))

    def with_nodes(self, transmitters=None, receivers=None) -> "Scene":
        return replace(
            self,
            transmitters=self.transmitters if transmitters is None else tuple(transmitters),
            receivers=self.receivers if receivers is None else tuple(receivers),
        )


def validate_scene(scene: Scene, catalog: dict[str, RadioMaterial] | None = None) -> Scene:
    """Check every scene invariant; raise SceneValidationError naming the offending entity."""
    catalog = material_catalog() if catalog is None else catalog
    lo_f, hi_f = FREQUENCY_WINDOW_HZ
    if not lo_f <= scene.frequency_hz <= hi_f:
        raise SceneValidationError(
            f"frequency_hz {scene.frequency_hz:g} outside material model window [{lo_f:g}, {hi_f:g}]"
        )
    seen: set[str] = set()
    for m in scene.meshes:
        if m.object_id in seen:
            raise SceneValidationError(f"duplicate object_id {m.object_id!r}")
        seen.add(m.object_id)
        if m.material_name not in catalog:
            raise SceneValidationError(
                f"mesh {m.object_id!r}: unknown material {m.material_name!r}"
            )
        if m.thickness_m < 0:
            raise SceneValidationError(f"mesh {m.object_id!r}: negative thickness_m")
        if not np.all(np.isfinite(m.vertices)):
            raise SceneValidationError(f"mesh {m.object_id!r}: non-finite vertex coordinates")
        if m.n_triangles:
            if m.triangles.min() < 0 or m.triangles.max() >= len(m.vertices):
                raise SceneValidationError(
                    f"mesh {m.object_id!r}: triangle index out of range (vertex count {len(m.vertices)})"
                )
            areas = m.triangle_areas()
            bad = np.flatnonzero(areas <= MIN_TRIANGLE_AREA)
            if len(bad):
                raise SceneValidationError(
                    f"mesh {m.object_id!r}: degenerate triangle {int(bad[0])} (area {areas[bad[0]]:.3g} m^2)"
                )
    if scene.bounds is not None:
        lo, hi = scene.bounds
        if np.any(hi - lo > MAX_SCENE_EXTENT_M):
            raise SceneValidationError(
                f"scene extent {np.round(hi - lo, 3).tolist()} m exceeds {MAX_SCENE_EXTENT_M:g} m (unit error?)"
            )
    for kind, nodes in (("transmitter", scene.transmitters), ("receiver", scene.receivers)):
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise SceneValidationError(f"duplicate {kind} id in {ids}")
        for n in nodes:
            if len(n.position) != 3 or not np.all(np.isfinite(n.position)):
                raise SceneValidationError(f"{kind} {n.id!r}: invalid position {n.position}")
            if not scene.contains(n.position):
                raise SceneValidationError(
                    f"{kind} {n.id!r}: position {list(n.position)} outside scene bounds"
                )
    return scene


def read_obj_groups(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Parse a Wavefront OBJ file into ``{group: (vertices, triangles)}``.

    Polygons are fan-triangulated; each group gets its own compact vertex list.
    """
    verts: list[list[float]] = []
    faces: dict[str, list[list[int]]] = {}
    group = "default"
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif tag in ("g", "o"):
                group = " ".join(parts[1:]) or "default"
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for k in range(1, len(idx) - 1):
                    faces.setdefault(group, []).append([idx[0], idx[k], idx[k + 1]])
        except ValueError as exc:
            raise SceneParseError(f"{path}:{lineno}: {exc}") from exc
    allv = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    out = {}
    for name, tris in faces.items():
        t = np.asarray(tris, dtype=np.int64)
        if t.min() < 0 or t.max() >= len(allv):
            raise SceneParseError(f"{path}: group {name!r} references a missing vertex")
        used, inverse = np.unique(t, return_inverse=True)
        out[name] = (allv[used], inverse.reshape(-1, 3))
    return out


def scene_from_dict(doc: dict, base_dir: str | Path = ".",
                    catalog: dict[str, RadioMaterial] | None = None) -> Scene:
    if not isinstance(doc, dict):
        raise SceneParseError("scene descriptor must be a JSON object")
    obj_groups = None
    if "vertices_obj" in doc:
        obj_groups = read_obj_groups(Path(base_dir) / doc["vertices_obj"])
    try:
        meshes = []
        for i, entry in enumerate(doc.get("meshes", [])):
            oid = str(entry["object_id"])
            material = str(entry["material"])
            if "vertices" in entry:
                verts, tris = entry["vertices"], entry["triangles"]
            elif obj_groups is not None and oid in obj_groups:
                verts, tris = obj_groups[oid]
            else:
                raise SceneParseError(f"mesh {oid!r}: no vertices and no OBJ group of that name")
            thickness = entry.get("thickness_m")
            meshes.append(TriangleMesh(
                object_id=oid,
                material_name=material,
                vertices=verts,
                triangles=tris,
                thickness_m=default_thickness(material) if thickness is None else float(thickness),
            ))
        txs = tuple(
            Transmitter(str(t["id"]), tuple(float(x) for x in t["position"]),
                        float(t.get("power_dbm", 0.0)), float(t.get("gain_dbi", 0.0)))
            for t in doc.get("transmitters", [])
        )
        rxs = tuple(
            Receiver(str(r["id"]), tuple(float(x) for x in r["position"]), float(r.get("gain_dbi", 0.0)))
            for r in doc.get("receivers", [])
        )
        scene = Scene(tuple(meshes), txs, rxs, float(doc["frequency_hz"]),
                      metadata=dict(doc.get("metadata", {})))
    except SceneError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneParseError(f"malformed scene descriptor: {exc!r}") from exc
    if not scene.meshes:
        logger.warning("scene has no meshes (free space)")
    return validate_scene(scene, catalog)


def load_scene(path: str | Path, catalog: dict[str, RadioMaterial] | None = None) -> Scene:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}: invalid JSON ({exc})") from exc
    return scene_from_dict(doc, path.parent, catalog)


def scene_to_dict(scene: Scene) -> dict:
    return {
        "frequency_hz": scene.frequency_hz,
        **({"metadata": scene.metadata} if scene.metadata else {}),
        "meshes": [
            {
                "object_id": m.object_id,
                "material": m.material_name,
                "thickness_m": m.thickness_m,
                "vertices": m.vertices.tolist(),
                "triangles": m.triangles.tolist(),
            }
            for m in scene.meshes
        ],
        "transmitters": [
            {"id": t.id, "position": list(t.position), "power_dbm": t.power_dbm, "gain_dbi": t.gain_dbi}
            for t in scene.transmitters
        ],
        "receivers": [
            {"id": r.id, "position": list(r.position), "gain_dbi": r.gain_dbi}
            for r in scene.receivers
        ],
    }


def bundled_scene_path(name: str = "office") -> Path:
    from importlib import resources

    return Path(str(resources.files("rfray").joinpath("data", f"{name}.scene.json")))
