"""Density field to printable solid: contours, prism mesh, STL/OBJ, preview.

Contours come from marching squares over the element-center samples with a
zero-valued border ring around the grid, so a fully solid field traces the
grid outline (linear interpolation chamfers the four corners by half an
element; everything else lies exactly on the boundary).  Outer boundaries
and holes are told apart by winding: traced loops keep material on the
left, which in the y-down grid frame gives outers negative shoelace area.

Extrusion converts to a y-up model frame, caps both faces with an ear-clip
triangulation (holes bridged into their outer polygon), and closes the
sides with wall quads, producing a watertight mesh with outward normals.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .model import DensityField

DEFAULT_ISO = 0.5


class DegenerateContour(ValueError):
    """A polygon has fewer than 3 distinct vertices."""


@dataclass(frozen=True, eq=False)
class Polygon:
    points: np.ndarray  # (n+1, 2), closed: first row equals last row
    kind: str  # "outer" or "hole"

    @property
    def vertex_count(self) -> int:
        return self.points.shape[0] - 1


@dataclass(frozen=True, eq=False)
class ContourSet:
    polygons: tuple

    def __iter__(self):
        return iter(self.polygons)

    def __len__(self):
        return len(self.polygons)


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray  # (n, 3)
    faces: np.ndarray  # (m, 3) int32

    @property
    def triangle_count(self) -> int:
        return self.faces.shape[0]


def shoelace(points: np.ndarray) -> float:
    """Signed area of a closed polygon (positive = counter-clockwise in a
    y-up frame; our y-down grid frame flips the sign)."""
    x, y = points[:-1, 0], points[:-1, 1]
    xn, yn = points[1:, 0], points[1:, 1]
    return 0.5 * float(np.sum(x * yn - xn * y))


def net_area(contours: ContourSet) -> float:
    """Total enclosed area: outers count positive, holes negative."""
    total = 0.0
    for poly in contours:
        a = abs(shoelace(poly.points))
        total += a if poly.kind == "outer" else -a
    return total


# marching-squares case table: corner bits (TL=1, TR=2, BR=4, BL=8) map to
# directed edge-to-edge segments keeping the >= iso region on the left
_SEGMENTS = {
    1: (("L", "T"),),
    2: (("T", "R"),),
    3: (("L", "R"),),
    4: (("R", "B"),),
    6: (("T", "B"),),
    7: (("L", "B"),),
    8: (("B", "L"),),
    9: (("B", "T"),),
    11: (("B", "R"),),
    12: (("R", "L"),),
    13: (("R", "T"),),
    14: (("T", "L"),),
}
_SADDLE = {
    (5, True): (("R", "T"), ("L", "B")),
    (5, False): (("L", "T"), ("R", "B")),
    (10, True): (("T", "L"), ("B", "R")),
    (10, False): (("T", "R"), ("B", "L")),
}


def extract_contours(density: DensityField, iso: float = DEFAULT_ISO) -> ContourSet:
    """Closed iso-contours of the density field in grid coordinates."""
    if not (0.0 < iso < 1.0):
        raise ValueError("iso must lie in (0, 1)")
    nelx, nely = density.dims.nelx, density.dims.nely
    samples = np.zeros((nely + 2, nelx + 2))
    samples[1:-1, 1:-1] = density.as_grid()
    # values exactly at the threshold would place crossings on top of
    # samples and collapse contour edges; nudge them inside instead
    samples[samples == iso] += 1e-12
    inside = samples >= iso

    def sample_pos(i, j):
        return (i - 0.5, j - 0.5)

    crossings: dict = {}

    def crossing(i0, j0, i1, j1):
        key = (i0, j0, i1, j1)
        pt = crossings.get(key)
        if pt is None:
            v0, v1 = samples[j0, i0], samples[j1, i1]
            t = (iso - v0) / (v1 - v0)
            x0, y0 = sample_pos(i0, j0)
            x1, y1 = sample_pos(i1, j1)
            pt = (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
            crossings[key] = pt
        return key, pt

    def cell_edge(name, i, j):
        if name == "T":
            return crossing(i, j, i + 1, j)
        if name == "B":
            return crossing(i, j + 1, i + 1, j + 1)
        if name == "L":
            return crossing(i, j, i, j + 1)
        return crossing(i + 1, j, i + 1, j + 1)

    next_key: dict = {}
    points: dict = {}
    for j in range(nely + 1):
        for i in range(nelx + 1):
            case = (
                int(inside[j, i])
                | int(inside[j, i + 1]) << 1
                | int(inside[j + 1, i + 1]) << 2
                | int(inside[j + 1, i]) << 3
            )
            if case in (0, 15):
                continue
            if case in (5, 10):
                center = (
                    samples[j, i]
                    + samples[j, i + 1]
                    + samples[j + 1, i]
                    + samples[j + 1, i + 1]
                ) / 4.0
                segs = _SADDLE[(case, bool(center >= iso))]
            else:
                segs = _SEGMENTS[case]
            for frm, to in segs:
                k_from, p_from = cell_edge(frm, i, j)
                k_to, p_to = cell_edge(to, i, j)
                next_key[k_from] = k_to
                points[k_from] = p_from
                points[k_to] = p_to

    polygons = []
    visited = set()
    for start in next_key:
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = next_key[start]
        while cur != start:
            loop.append(cur)
            visited.add(cur)
            cur = next_key[cur]
        pts = np.array([points[k] for k in loop] + [points[start]])
        kind = "outer" if shoelace(pts) < 0.0 else "hole"
        polygons.append(Polygon(pts, kind))
    return ContourSet(tuple(polygons))


def _point_in_polygon(pt, points) -> bool:
    x, y = pt
    inside = False
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def _segments_cross(a, b, c, d) -> bool:
    """Proper intersection of open segments ab and cd."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def _bridge_holes(outer: list, holes: list) -> list:
    """Merge holes into the outer ring via mutually visible bridge pairs."""
    combined = list(outer)
    remaining = sorted(holes, key=lambda h: -max(p[0] for p in h))
    for hole in remaining:
        hi = max(range(len(hole)), key=lambda k: (hole[k][0], hole[k][1]))
        m = hole[hi]
        blockers = [combined] + [h for h in remaining if h is not hole]

        def visible(v):
            for ring in blockers:
                n = len(ring)
                for k in range(n):
                    a, b = ring[k], ring[(k + 1) % n]
                    if a in (m, v) or b in (m, v):
                        continue
                    if _segments_cross(m, v, a, b):
                        return False
            n = len(hole)
            for k in range(n):
                a, b = hole[k], hole[(k + 1) % n]
                if a in (m, v) or b in (m, v):
                    continue
                if _segments_cross(m, v, a, b):
                    return False
            return True

        order = sorted(
            range(len(combined)),
            key=lambda k: (combined[k][0] - m[0]) ** 2 + (combined[k][1] - m[1]) ** 2,
        )
        pick = next((k for k in order if visible(combined[k])), None)
        if pick is None:
            raise DegenerateContour("cannot bridge hole into outer polygon")
        # splice: outer[..pick], hole[hi..], hole[..hi], back to outer[pick..]
        combined = (
            combined[: pick + 1]
            + hole[hi:]
            + hole[: hi + 1]
            + combined[pick:]
        )
        remaining = [h for h in remaining if h is not hole]
    return combined


def _ear_clip(ring: list) -> list:
    """Triangulate a simple (bridged) polygon, keeping every vertex."""
    n = len(ring)
    if n < 3:
        raise DegenerateContour(f"polygon needs 3 vertices, got {n}")
    idx = list(range(n))
    tris = []

    def cross_at(k):
        a, b, c = ring[idx[k - 1]], ring[idx[k]], ring[idx[(k + 1) % len(idx)]]
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def ear_ok(k):
        a, b, c = ring[idx[k - 1]], ring[idx[k]], ring[idx[(k + 1) % len(idx)]]
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if area2 <= 1e-12:
            return False
        for j in idx:
            p = ring[j]
            if p in (a, b, c):
                continue
            d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
            d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
            if d1 > 1e-12 and d2 > 1e-12 and d3 > 1e-12:
                return False
        return True

    guard = 0
    while len(idx) > 3:
        clipped = False
        for k in range(len(idx)):
            if ear_ok(k):
                tris.append((idx[k - 1], idx[k], idx[(k + 1) % len(idx)]))
                del idx[k]
                clipped = True
                break
        if not clipped:
            # numerically stuck: clip the flattest corner to make progress
            k = min(range(len(idx)), key=lambda k: abs(cross_at(k)))
            tris.append((idx[k - 1], idx[k], idx[(k + 1) % len(idx)]))
            del idx[k]
        guard += 1
        if guard > 4 * n:
            raise DegenerateContour("triangulation did not terminate")
    tris.append(tuple(idx))
    return tris


def extrude(contours: ContourSet, height: float) -> TriMesh:
    """Prism mesh between z=0 and z=height in a y-up model frame."""
    if height <= 0.0:
        raise ValueError("height must be positive")
    for poly in contours:
        if poly.vertex_count < 3:
            raise DegenerateContour(
                f"contour with {poly.vertex_count} vertices cannot be extruded"
            )
    outers = []
    holes = []
    for poly in contours:
        pts = [(float(x), float(-y)) for x, y in poly.points[:-1]]
        area = shoelace(np.array(pts + [pts[0]]))
        if poly.kind == "outer":
            if area < 0.0:
                pts.reverse()
            outers.append(pts)
        else:
            if area > 0.0:
                pts.reverse()
            holes.append(pts)

    def containing_outer(hole):
        best, best_area = None, np.inf
        for k, outer in enumerate(outers):
            ring = outer + [outer[0]]
            if _point_in_polygon(hole[0], ring):
                a = abs(shoelace(np.array(ring)))
                if a < best_area:
                    best, best_area = k, a
        return best

    grouped = {k: [] for k in range(len(outers))}
    for hole in holes:
        k = containing_outer(hole)
        if k is not None:
            grouped[k].append(hole)

    vertex_index: dict = {}
    vertices: list = []
    faces: list = []

    def vid(x, y, z):
        key = (x, y, z)
        i = vertex_index.get(key)
        if i is None:
            i = len(vertices)
            vertex_index[key] = i
            vertices.append(key)
        return i

    h = float(height)
    for k, outer in enumerate(outers):
        ring = _bridge_holes(outer, grouped[k]) if grouped[k] else outer
        tris = _ear_clip(ring)
        for a, b, c in tris:
            pa, pb, pc = ring[a], ring[b], ring[c]
            # top cap keeps the ccw winding (+z normal), bottom reverses
            faces.append((vid(*pa, h), vid(*pb, h), vid(*pc, h)))
            faces.append((vid(*pa, 0.0), vid(*pc, 0.0), vid(*pb, 0.0)))
        for loop in [outer] + grouped[k]:
            n = len(loop)
            for i in range(n):
                p, q = loop[i], loop[(i + 1) % n]
                a0, b0 = vid(*p, 0.0), vid(*q, 0.0)
                a1, b1 = vid(*p, h), vid(*q, h)
                faces.append((a0, b0, b1))
                faces.append((a0, b1, a1))
    return TriMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int32).reshape(-1, 3),
    )


def mesh_volume(mesh: TriMesh) -> float:
    """Signed volume by the divergence theorem; positive for outward normals."""
    v = mesh.vertices
    if mesh.triangle_count == 0:
        return 0.0
    a = v[mesh.faces[:, 0]]
    b = v[mesh.faces[:, 1]]
    c = v[mesh.faces[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def edge_use_counts(mesh: TriMesh) -> dict:
    """Undirected edge -> number of incident triangles (2 = watertight)."""
    counts: dict = {}
    for f in mesh.faces:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(int(a), int(b)), max(int(a), int(b)))
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_watertight(mesh: TriMesh) -> bool:
    if mesh.triangle_count == 0:
        return True
    return all(c == 2 for c in edge_use_counts(mesh).values())


def write_stl(mesh: TriMesh) -> bytes:
    """Binary STL: 80-byte header, uint32 count, 50 bytes per triangle."""
    out = io.BytesIO()
    out.write(b"topostudio 2.5d export".ljust(80, b" "))
    out.write(struct.pack("<I", mesh.triangle_count))
    v = mesh.vertices
    for f in mesh.faces:
        a, b, c = v[f[0]], v[f[1]], v[f[2]]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        n = n / norm if norm > 0 else np.zeros(3)
        out.write(struct.pack("<3f", *n))
        out.write(struct.pack("<3f", *a))
        out.write(struct.pack("<3f", *b))
        out.write(struct.pack("<3f", *c))
        out.write(struct.pack("<H", 0))
    return out.getvalue()


def write_obj(mesh: TriMesh) -> str:
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for a, b, c in mesh.faces:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return "\n".join(lines) + "\n"


def read_obj(text: str) -> TriMesh:
    """Parse the v/f subset written by write_obj (triangles only)."""
    vertices = []
    faces = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            vertices.append(tuple(float(p) for p in parts[1:4]))
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            if len(idx) != 3:
                raise ValueError("only triangular faces are supported")
            faces.append(tuple(idx))
    return TriMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int32).reshape(-1, 3),
    )


def render_preview(
    density: DensityField,
    mask: np.ndarray | None = None,
    scale: int = 4,
) -> bytes:
    """Grayscale PNG of the field (0 = white, 1 = black), mask cells tinted
    toward cyan, upscaled by an integer factor."""
    from PIL import Image

    if scale < 1 or scale != int(scale):
        raise ValueError("scale must be a positive integer")
    gray = np.round((1.0 - density.as_grid()) * 255.0)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    if mask is not None:
        m = np.asarray(mask, dtype=bool).reshape(density.dims.nely, density.dims.nelx)
        g = rgb[m, 0]
        tinted = np.stack([g * 0.4, g * 0.75 + 60.0, g * 0.75 + 60.0], axis=1)
        rgb[m] = np.clip(tinted, 0.0, 255.0)
    img = np.kron(rgb.astype(np.uint8), np.ones((scale, scale, 1), dtype=np.uint8))
    buf = io.BytesIO()
    Image.fromarray(img, "RGB").save(buf, format="PNG")
    return buf.getvalue()
