"""Fitted triangulations of the square with a duplicated disc interface.

The disc boundary is replaced by an inscribed polygon with `n_interface`
sides.  Inside the polygon the points sit on concentric rings, outside on a
regular lattice; both point sets are triangulated together by
`scipy.spatial.Delaunay`.  Points are kept away from the polygon so that
every polygon side is a Gabriel edge and therefore an edge of the
triangulation.  The polygon vertices are then duplicated: the S triangles
keep the original indices, the O triangles refer to the copies, so a P1
field may jump across ∂O.

Cocircular lattice cells are split with an arbitrary diagonal, so meshes
are only ever triangulated for c_x <= 0.5.  A disc with c_x > 0.5 gets the
reflection of its mirror image's mesh, and for a disc centered on x = 0.5 only
the left half is triangulated and the right half is its mirror image.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay, cKDTree

from .errors import MeshError
from .geometry import (
    GAMMA_0, GAMMA_N, DiscGeometry, DomainSpec, interface_frames, project_to_circle,
)

logger = logging.getLogger(__name__)

REGION_S = 0
REGION_O = 1

MIN_AREA_FACTOR = 1e-3
INSIDE_TOL = 1e-10


@dataclass(frozen=True)
class MeshParams:
    h: float = 0.02
    n_interface: int = 64

    def check(self, geom):
        if self.n_interface < 16:
            raise MeshError(f"n_interface must be at least 16, got {self.n_interface}")
        if not 0 < self.h <= geom.radius / 2:
            raise MeshError(
                f"mesh size h={self.h} must lie in (0, radius/2 = {geom.radius / 2}]")

    def refined(self):
        return MeshParams(self.h / 2, self.n_interface * 2)


@dataclass(frozen=True, eq=False)
class InterfaceMesh:
    """Represents a fitted mesh of S ∪ O.

    Interface arrays are indexed by polygon side j, which joins polygon
    vertices j and j+1 counterclockwise.
    """
    geometry: object
    params: MeshParams
    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    iface_s: np.ndarray
    iface_o: np.ndarray
    iface_tri_s: np.ndarray
    iface_tri_o: np.ndarray
    iface_length: np.ndarray
    iface_mid: np.ndarray
    iface_arc: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    areas: np.ndarray = field(repr=False)

    @property
    def h(self):
        return self.params.h

    @property
    def n_nodes(self):
        return len(self.vertices)

    @property
    def n_interface(self):
        return len(self.iface_s)

    @property
    def node_region(self):
        """REGION_O for nodes of O triangles, REGION_S otherwise."""
        regions = np.full(self.n_nodes, REGION_S, dtype=np.int8)
        regions[self.triangles[self.region == REGION_O].ravel()] = REGION_O
        return regions

    @property
    def dirichlet_nodes(self):
        edges = self.boundary_edges[self.boundary_tags == GAMMA_0]
        return np.unique(edges.ravel())

    def region_area(self, region):
        return float(self.areas[self.region == region].sum())

    def perimeter(self):
        return float(self.iface_length.sum())

    def arrays(self):
        """Plain arrays for serialization; see `from_arrays`."""
        return {
            "center": np.array(self.geometry.center),
            "radius": np.array(self.geometry.radius),
            "h": np.array(self.params.h),
            "n_interface": np.array(self.params.n_interface),
            "vertices": self.vertices,
            "triangles": self.triangles,
            "region": self.region,
            "iface_s": self.iface_s,
            "iface_o": self.iface_o,
        }

    @classmethod
    def from_arrays(cls, arrays):
        geom = DiscGeometry(tuple(arrays["center"]), float(arrays["radius"]))
        params = MeshParams(float(arrays["h"]), int(arrays["n_interface"]))
        return _finish(geom, params, arrays["vertices"], arrays["triangles"],
                       arrays["region"], arrays["iface_s"], arrays["iface_o"])


class InterfaceQuadrature(NamedTuple):
    """Midpoint rule on the interface polygon."""
    points: np.ndarray
    weights: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    arc: np.ndarray


def generate_mesh(geom, params, domain=DomainSpec()):
    """Builds the fitted mesh of the square for the given disc.

    The result is a pure function of its arguments.  A disc with c_x > 0.5
    gets the exact reflection of the mesh for the mirrored disc, so mirror
    image discs see mirror image meshes.  When the disc center lies on
    x = 0.5 the mesh is its own mirror image.

    Raises:
        MeshError: for infeasible geometry or parameters, or when the
            triangulation misses an interface side.
    """
    params.check(geom)
    if not geom.is_interior(domain.margin):
        raise MeshError(
            f"disc not interior: center {geom.center}, radius {geom.radius}, "
            f"margin {domain.margin}")

    left = 0.5 - abs(geom.center[0] - 0.5)
    key = _mirror_key(left)
    vertices, triangles, region, iface_s, iface_o = _triangulate(
        geom.moved((key, geom.center[1])), params, left - key)
    if geom.center[0] > 0.5:
        vertices, triangles = _reflect(vertices, triangles, iface_s, iface_o)

    mesh = _finish(geom, params, vertices, triangles, region, iface_s, iface_o)
    min_area = mesh.areas.min()
    if min_area < MIN_AREA_FACTOR * params.h ** 2:
        raise MeshError(f"degenerate triangle with area {min_area:.3g}")
    logger.debug("mesh for center %s: %d nodes, %d triangles",
                 geom.center, mesh.n_nodes, len(mesh.triangles))
    return mesh


def _triangulate(geom, params, shift=0.0):
    """Triangulates for `geom`, then moves the disc nodes right by `shift`."""
    n = params.n_interface
    r = geom.radius
    chord = 2 * r * math.sin(math.pi / n)
    clearance = 0.75 * max(params.h, chord)

    polygon = _circle_points(geom.c, r, n)
    outer = _lattice_points(geom.c, r + clearance, params.h)
    inner = _ring_points(geom.c, r - clearance, params.h)

    symmetric = geom.center[0] == 0.5
    if symmetric:
        outer = _symmetrize(outer, 0.5)
        inner = _symmetrize(inner, 0.5)
    points = np.vstack([outer, polygon, inner])
    if symmetric:
        simplices = _mirrored_delaunay(points, 0.5)
    else:
        simplices = _delaunay(points)

    triangles = _orient(points, simplices)
    n_outer = len(outer)
    inside = np.all(triangles >= n_outer, axis=1)

    # duplicate the polygon vertices for the O side
    n_points = len(points)
    vertices = np.vstack([points, points[n_outer:n_outer + n]])
    on_polygon = (triangles >= n_outer) & (triangles < n_outer + n)
    o_triangles = triangles.copy()
    o_triangles[on_polygon] += n_points - n_outer
    triangles = np.where(inside[:, None], o_triangles, triangles)
    region = np.where(inside, REGION_O, REGION_S).astype(np.int8)

    j = np.arange(n)
    iface_s = np.column_stack([n_outer + j, n_outer + (j + 1) % n])
    iface_o = iface_s + (n_points - n_outer)
    vertices[n_outer:, 0] += shift
    return vertices, triangles, region, iface_s, iface_o


def _mirror_key(x):
    """The abscissa the triangulation is built for.

    Rounding to 12 decimals absorbs last-bit differences between the two
    members of a mirror pair computed separately, such as 0.5 ± δ, so both
    get the same triangulation.
    """
    return round(x, 12)


def _reflect(vertices, triangles, iface_s, iface_o):
    """Reflects a mesh about x = 0.5, keeping polygon sides counterclockwise.

    Polygon vertex j of the result is the image of vertex n - j, which keeps
    vertex 0 on top; every other node keeps its index.
    """
    n = len(iface_s)
    j = np.arange(n)
    perm = np.arange(len(vertices))
    for sides in (iface_s, iface_o):
        perm[sides[j, 0]] = sides[(n - j) % n, 0]
    reflected = vertices[perm]
    reflected[:, 0] = 1.0 - reflected[:, 0]
    # perm is an involution
    return reflected, perm[triangles][:, [0, 2, 1]]


def deform_mesh(mesh, shift, domain=DomainSpec()):
    """Translates the disc by `shift`, dragging the S vertices smoothly.

    Vertices of the closed disc move rigidly, vertices on ∂Ω stay put and
    the displacement decays in between as a smoothstep in the distance to
    the center.  The topology is unchanged.

    Raises:
        MeshError: if the moved disc is infeasible or a triangle flips.
    """
    geom = mesh.geometry
    shift = np.asarray(shift, dtype=float)
    moved = geom.moved(geom.c + shift)
    if not moved.is_interior(domain.margin):
        raise MeshError(f"disc not interior after shift {tuple(shift)}")

    r = geom.radius
    reach = min(geom.center[0], 1 - geom.center[0], geom.center[1], 1 - geom.center[1])
    d = mesh.vertices - geom.c
    rho = np.hypot(d[:, 0], d[:, 1])
    s = np.clip((rho - r) / (reach - r), 0.0, 1.0)
    weight = 1.0 - s * s * (3.0 - 2.0 * s)
    weight[rho <= r * (1 + 1e-9)] = 1.0
    vertices = mesh.vertices + weight[:, None] * shift

    deformed = _finish(moved, mesh.params, vertices, mesh.triangles, mesh.region,
                       mesh.iface_s, mesh.iface_o)
    if deformed.areas.min() <= 0:
        raise MeshError(f"shift {tuple(shift)} inverts a triangle")
    return deformed


def interface_quadrature(mesh):
    """Midpoint rule on each interface side.

    Weights are the polygon side lengths; the frames are evaluated at the
    midpoints projected radially onto the true circle.
    """
    points = project_to_circle(mesh.geometry, mesh.iface_mid)
    tangents, normals = interface_frames(mesh.geometry, points)
    return InterfaceQuadrature(points, mesh.iface_length.copy(), tangents, normals,
                               mesh.iface_arc.copy())


def barycentric(corners, p):
    """Barycentric coordinates of p in the triangles `corners` (..., 3, 2)."""
    a = corners[..., 0, :]
    v0 = corners[..., 1, :] - a
    v1 = corners[..., 2, :] - a
    v2 = p - a
    det = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
    l1 = (v2[..., 0] * v1[..., 1] - v2[..., 1] * v1[..., 0]) / det
    l2 = (v0[..., 0] * v2[..., 1] - v0[..., 1] * v2[..., 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def transfer_matrix(source, points, regions):
    """Sparse P1 interpolation from `source` nodes onto `points`.

    Each point is looked up among the source triangles of its own region
    first, so S-side nodes read S-side values across the interface.

    Raises:
        MeshError: if a point lies outside every source triangle.
    """
    points = np.asarray(points, dtype=float)
    regions = np.asarray(regions)
    corners = source.vertices[source.triangles]
    centroids = corners.mean(axis=1)

    found_tri = np.full(len(points), -1, dtype=np.int64)
    found_lam = np.zeros((len(points), 3))
    for preferred in (REGION_S, REGION_O):
        for region in (preferred, 1 - preferred):
            todo = np.flatnonzero((regions == preferred) & (found_tri < 0))
            if not len(todo):
                break
            tri_ids = np.flatnonzero(source.region == region)
            tris, lams = _locate(corners[tri_ids], centroids[tri_ids], points[todo])
            hit = tris >= 0
            found_tri[todo[hit]] = tri_ids[tris[hit]]
            found_lam[todo[hit]] = lams[hit]

    missing = np.flatnonzero(found_tri < 0)
    if len(missing):
        raise MeshError(f"{len(missing)} points not locatable, first {points[missing[0]]}")

    rows = np.repeat(np.arange(len(points)), 3)
    cols = source.triangles[found_tri].ravel()
    return sparse.csr_matrix((found_lam.ravel(), (rows, cols)),
                             shape=(len(points), source.n_nodes))


def _locate(corners, centroids, points, k=8):
    """Finds a containing triangle for each point, -1 where none does."""
    tris = np.full(len(points), -1, dtype=np.int64)
    lams = np.zeros((len(points), 3))
    k = min(k, len(corners))
    _, near = cKDTree(centroids).query(points, k=k)
    near = near.reshape(len(points), k)
    lam = barycentric(corners[near], points[:, None, :])
    ok = lam.min(axis=-1) >= -INSIDE_TOL
    first = np.argmax(ok, axis=1)
    hit = ok[np.arange(len(points)), first]
    tris[hit] = near[hit, first[hit]]
    lams[hit] = lam[hit, first[hit]]

    for i in np.flatnonzero(~hit):
        lam = barycentric(corners, points[i])
        best = int(np.argmax(lam.min(axis=-1)))
        if lam[best].min() >= -INSIDE_TOL:
            tris[i] = best
            lams[i] = lam[best]
    return tris, lams


def _circle_points(center, rho, count):
    """`count` points on a circle, counterclockwise from the top.

    Point j and point count - j are exact mirror images about x = center_x.
    """
    theta = np.pi / 2 + 2 * np.pi * np.arange(count) / count
    points = center + rho * np.column_stack([np.cos(theta), np.sin(theta)])
    points[0, 0] = center[0]
    if count % 2 == 0:
        points[count // 2, 0] = center[0]
    j = np.arange(1, (count + 1) // 2)
    points[count - j, 0] = 2 * center[0] - points[j, 0]
    points[count - j, 1] = points[j, 1]
    return points


def _lattice_points(center, exclusion, h):
    # even tick count so that x = 0.5 is a lattice column
    half = math.ceil(0.5 / h)
    left = np.arange(half + 1) / (2 * half)
    ticks = np.concatenate([left, 2 * 0.5 - left[-2::-1]])
    x, y = np.meshgrid(ticks, ticks)
    x, y = x.ravel(), y.ravel()
    on_boundary = (x == 0) | (x == 1) | (y == 0) | (y == 1)
    far = np.hypot(x - center[0], y - center[1]) > exclusion
    keep = on_boundary | far
    return np.column_stack([x[keep], y[keep]])


def _ring_points(center, rho_max, h):
    rings = max(1, math.ceil(rho_max / h))
    points = [center[None, :]]
    for i in range(1, rings + 1):
        rho = rho_max * i / rings
        count = max(6, int(round(2 * math.pi * rho / h)))
        points.append(_circle_points(center, rho, count))
    return np.vstack(points)


def _symmetrize(points, axis):
    """Keeps the points left of `axis` and on it, and adds exact mirrors."""
    points = points.copy()
    points[np.abs(points[:, 0] - axis) < 1e-12, 0] = axis
    left = points[points[:, 0] < axis]
    on = points[points[:, 0] == axis]
    right = np.column_stack([2 * axis - left[:, 0], left[:, 1]])
    return np.vstack([left, on, right])


def _delaunay(points):
    triangulation = Delaunay(points)
    if len(triangulation.coplanar):
        raise MeshError(f"{len(triangulation.coplanar)} points dropped by the triangulation")
    return triangulation.simplices.astype(np.int64)


def _mirrored_delaunay(points, axis):
    """Triangulates the half x <= axis and reflects it onto the other half.

    The point set must be exactly mirror symmetric about `axis`.
    """
    left = np.flatnonzero(points[:, 0] <= axis)
    half = left[_delaunay(points[left])]
    index = {(x, y): i for i, (x, y) in enumerate(points.tolist())}
    mirror = np.arange(len(points))
    try:
        for i in np.flatnonzero(points[:, 0] < axis):
            x, y = points[i]
            mirror[i] = index[(2 * axis - x, y)]
    except KeyError as missing:
        raise MeshError(f"point set is not mirror symmetric, no image for {missing}") from None
    return np.vstack([half, mirror[half]])


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _orient(vertices, triangles):
    flipped = _signed_areas(vertices, triangles) < 0
    triangles[flipped] = triangles[flipped][:, [0, 2, 1]]
    return triangles


def _edge_owners(triangles):
    owners = {}
    for t, (a, b, c) in enumerate(triangles.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            owners.setdefault((min(u, v), max(u, v)), []).append(t)
    return owners


def _finish(geom, params, vertices, triangles, region, iface_s, iface_o):
    """Computes the derived interface and boundary arrays of a mesh."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    region = np.asarray(region, dtype=np.int8)
    iface_s = np.asarray(iface_s, dtype=np.int64)
    iface_o = np.asarray(iface_o, dtype=np.int64)

    owners = _edge_owners(triangles)
    iface_tri_s = np.empty(len(iface_s), dtype=np.int64)
    iface_tri_o = np.empty(len(iface_o), dtype=np.int64)
    for j, (s, o) in enumerate(zip(iface_s.tolist(), iface_o.tolist())):
        s_owner = owners.get((min(s), max(s)), [])
        o_owner = owners.get((min(o), max(o)), [])
        if len(s_owner) != 1 or len(o_owner) != 1:
            raise MeshError(f"interface side {j} is not an edge of exactly one S and one O triangle")
        iface_tri_s[j] = s_owner[0]
        iface_tri_o[j] = o_owner[0]
        if region[s_owner[0]] != REGION_S or region[o_owner[0]] != REGION_O:
            raise MeshError(f"interface side {j} has mislabelled neighbours")

    interface_keys = {(min(e), max(e)) for e in iface_s.tolist() + iface_o.tolist()}
    boundary = sorted(e for e, ts in owners.items()
                      if len(ts) == 1 and e not in interface_keys)
    boundary_edges = np.array(boundary, dtype=np.int64).reshape(-1, 2)
    tags = np.array([DomainSpec.boundary_tag(vertices[a], vertices[b]) for a, b in boundary],
                    dtype=object)

    a = vertices[iface_s[:, 0]]
    b = vertices[iface_s[:, 1]]
    lengths = np.hypot(*(b - a).T)
    mids = 0.5 * (a + b)
    rel = mids - geom.c
    arc = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi)

    areas = _signed_areas(vertices, triangles)
    return InterfaceMesh(geom, params, vertices, triangles, region, iface_s, iface_o,
                         iface_tri_s, iface_tri_o, lengths, mids, arc, boundary_edges,
                         tags, areas)


__all__ = [
    "GAMMA_0", "GAMMA_N", "REGION_O", "REGION_S", "InterfaceMesh",
    "InterfaceQuadrature", "MeshParams", "barycentric", "deform_mesh", "generate_mesh",
    "interface_quadrature", "transfer_matrix",
]
