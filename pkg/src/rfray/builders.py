"""Programmatic scene construction: axis-aligned rooms, boxes, and the bundled office.

Run ``python -m rfray.builders`` to regenerate the bundled ``office.scene.json``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scene import Receiver, Scene, TriangleMesh, Transmitter, default_thickness, scene_to_dict

OFFICE_SIZE_M = (15.0, 3.5, 3.3)
OFFICE_FREQUENCY_HZ = 2.437e9


def rect(axis: int, offset: float, lo: tuple[float, float], hi: tuple[float, float]) -> np.ndarray:
    """Corners of an axis-aligned rectangle on the plane ``coord[axis] == offset``.

    ``lo``/``hi`` are bounds on the two remaining axes, in increasing axis order.
    """
    others = [a for a in range(3) if a != axis]
    corners = []
    for u, v in ((lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])):
        p = [0.0, 0.0, 0.0]
        p[axis] = offset
        p[others[0]] = u
        p[others[1]] = v
        corners.append(p)
    return np.asarray(corners, dtype=float)


def mesh_from_quads(object_id: str, material: str, quads, thickness_m: float | None = None) -> TriangleMesh:
    verts, tris = [], []
    for q in quads:
        base = len(verts)
        verts.extend(np.asarray(q, dtype=float).tolist())
        tris.extend([[base, base + 1, base + 2], [base, base + 2, base + 3]])
    return TriangleMesh(object_id, material, np.asarray(verts), np.asarray(tris, dtype=np.int64),
                        default_thickness(material) if thickness_m is None else thickness_m)


def box_quads(lo, hi) -> list[np.ndarray]:
    """Six faces of a closed axis-aligned box."""
    lo = [float(x) for x in lo]
    hi = [float(x) for x in hi]
    quads = []
    for axis in range(3):
        o = [a for a in range(3) if a != axis]
        for off in (lo[axis], hi[axis]):
            quads.append(rect(axis, off, (lo[o[0]], lo[o[1]]), (hi[o[0]], hi[o[1]])))
    return quads


def shoebox_scene(size=OFFICE_SIZE_M, material: str = "metal", tx=(2.3, 1.1, 1.7), rx=(11.7, 2.45, 1.2),
                  frequency_hz: float = OFFICE_FREQUENCY_HZ, object_id: str = "box") -> Scene:
    """Closed rectangular room built from a single material."""
    lx, ly, lz = size
    quads = [
        rect(0, 0.0, (0, 0), (ly, lz)), rect(0, lx, (0, 0), (ly, lz)),
        rect(1, 0.0, (0, 0), (lx, lz)), rect(1, ly, (0, 0), (lx, lz)),
        rect(2, 0.0, (0, 0), (lx, ly)), rect(2, lz, (0, 0), (lx, ly)),
    ]
    return Scene((mesh_from_quads(object_id, material, quads),),
                 (Transmitter("tx", tuple(tx)),), (Receiver("rx", tuple(rx)),), frequency_hz)


def free_space_scene(distance_m: float = 10.0, frequency_hz: float = OFFICE_FREQUENCY_HZ) -> Scene:
    return Scene((), (Transmitter("tx", (0.0, 0.0, 0.0)),), (Receiver("rx", (distance_m, 0.0, 0.0)),),
                 frequency_hz)


def office_scene(frequency_hz: float = OFFICE_FREQUENCY_HZ) -> Scene:
    """A 15 x 3.5 x 3.3 m office with walls, door, floor, ceiling, desk and glass.

    The door sits in the y = 0 wall, a window band of glass in the y = 3.5 wall.
    Three ceiling-height access points share one receiver at desk height.
    """
    lx, ly, lz = OFFICE_SIZE_M
    door = ((1.0, 0.0), (2.0, 2.1))  # (x, z) extent in the y = 0 wall
    window = ((3.0, 1.0), (12.0, 2.5))  # (x, z) extent in the y = ly wall
    walls = [
        rect(0, 0.0, (0, 0), (ly, lz)),
        rect(0, lx, (0, 0), (ly, lz)),
        rect(1, 0.0, (0, 0), (door[0][0], lz)),
        rect(1, 0.0, (door[1][0], 0), (lx, lz)),
        rect(1, 0.0, (door[0][0], door[1][1]), (door[1][0], lz)),
        rect(1, ly, (0, 0), (window[0][0], lz)),
        rect(1, ly, (window[1][0], 0), (lx, lz)),
        rect(1, ly, (window[0][0], 0), (window[1][0], window[0][1])),
        rect(1, ly, (window[0][0], window[1][1]), (window[1][0], lz)),
    ]
    meshes = (
        mesh_from_quads("walls", "concrete", walls),
        mesh_from_quads("door", "wood", [rect(1, 0.0, door[0], door[1])], thickness_m=0.04),
        mesh_from_quads("floor", "concrete", [rect(2, 0.0, (0, 0), (lx, ly))]),
        mesh_from_quads("ceiling", "ceiling_board", [rect(2, lz, (0, 0), (lx, ly))], thickness_m=0.02),
        mesh_from_quads("desk", "wood", box_quads((6.0, 2.3, 0.70), (8.0, 3.1, 0.75))),
        mesh_from_quads("glass", "glass", [rect(1, ly, window[0], window[1])]),
    )
    txs = (
        Transmitter("tx", (7.5, 1.75, 2.8), power_dbm=5.0),
        Transmitter("tx1", (0.6, 0.5, 2.8), power_dbm=5.0),
        Transmitter("tx2", (14.4, 3.0, 2.8), power_dbm=5.0),
    )
    rxs = (Receiver("rx", (8.6, 1.2, 1.2)),)
    return Scene(meshes, txs, rxs, frequency_hz,
                 metadata={"name": "office", "note": "synthetic office, approximate dimensions only"})


def office_document() -> dict:
    return scene_to_dict(office_scene())


def write_office(path: str | Path) -> None:
    Path(path).write_text(json.dumps(office_document(), indent=1) + "\n")


if __name__ == "__main__":
    target = Path(__file__).with_name("data") / "office.scene.json"
    write_office(target)
    print(target)
