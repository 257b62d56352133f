"""Conforming P1 triangle meshes over solvability domains.

Three meshing strategies, picked automatically by triangulate():

* exact axis-aligned rectangles get a structured criss-cross grid
  (alternating diagonals, 45 degree angles throughout),
* periodic bands (annulus domains, whose loops are graphs over the
  x-axis by construction) get a mapped structured grid over one period
  with a duplicated seam column; the duplicates are recorded as
  (slave, master) pairs so assembly can identify them,
* everything else gets boundary polylines resampled to a power-of-two
  edge count plus a hexagonal interior lattice, run through a Delaunay
  triangulation and clipped to the domain.

Boundary arcs are resampled with n = 4 * 2**k edges, k chosen from the
target edge length h, so halving h doubles every per-arc edge count
exactly. Vertex markers: -1 interior, 0..n_arcs-1 for vertices interior
to a boundary arc (flat index in domain.arcs() order), n_arcs + j for
corner j (order of domain.corner_table()).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .domain import JSDomain, points_in_polygon

__all__ = [
    "TriMesh", "MeshError", "triangulate", "mesh_quality",
    "save_mesh", "load_mesh",
]

INTERIOR = -1

# area floor relative to h^2, below which a triangle counts as degenerate
_AREA_FLOOR = 1e-14


class MeshError(RuntimeError):
    pass


def _signed_areas(points, tris):
    p0 = points[tris[:, 0]]
    p1 = points[tris[:, 1]]
    p2 = points[tris[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


@dataclass
class TriMesh:
    """Triangle mesh with boundary markers and optional seam pairing.

    points   (nv, 2) vertex coordinates
    tris     (nt, 3) vertex indices, counterclockwise
    marker   (nv,)   -1 interior, arc flat id, or n_arcs + corner id
    n_arcs   number of boundary arcs of the source domain
    h        target edge length the mesh was built for
    periodic_pairs  (k, 2) (slave, master) vertex ids; slave column sits
                    one period to the right of the master column
    period   chart period when periodic_pairs is nonempty, else 0
    """

    points: np.ndarray
    tris: np.ndarray
    marker: np.ndarray
    n_arcs: int
    h: float
    periodic_pairs: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 2), dtype=np.int32))
    period: float = 0.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.tris = np.asarray(self.tris, dtype=np.int32)
        self.marker = np.asarray(self.marker, dtype=np.int32)
        self.periodic_pairs = np.asarray(self.periodic_pairs,
                                         dtype=np.int32).reshape(-1, 2)
        a = _signed_areas(self.points, self.tris)
        flip = a < 0.0
        if np.any(flip):
            self.tris[flip, 1:] = self.tris[flip, :0:-1]
            a = np.abs(a)
        if np.any(a <= _AREA_FLOOR * self.h ** 2):
            k = int(np.argmin(a))
            raise MeshError(
                f"degenerate triangle {k} (area {a[k]:.3e})")

    @property
    def n_vertices(self):
        return self.points.shape[0]

    @property
    def n_triangles(self):
        return self.tris.shape[0]

    def canonical_map(self):
        """Vertex id -> canonical id with periodic slaves folded onto
        their masters. Identity when the mesh has no seam."""
        cmap = np.arange(self.n_vertices, dtype=np.int32)
        if self.periodic_pairs.size:
            cmap[self.periodic_pairs[:, 0]] = self.periodic_pairs[:, 1]
        return cmap

    def _edge_counts(self):
        cmap = self.canonical_map()
        t = cmap[self.tris]
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e = np.sort(e, axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def edges(self):
        """Unique edges of the identified complex, as canonical ids."""
        return self._edge_counts()[0]

    def boundary_edges(self):
        """(m, 3) array of [v0, v1, tri]: edges on exactly one triangle.

        v0, v1 are original (unfolded) ids taken from the owning
        triangle, oriented so that the triangle lies on the left.
        """
        cmap = self.canonical_map()
        t = cmap[self.tris]
        counts = {}
        for a, b in ((0, 1), (1, 2), (2, 0)):
            e = np.sort(np.stack([t[:, a], t[:, b]], axis=1), axis=1)
            for row in e:
                key = (int(row[0]), int(row[1]))
                counts[key] = counts.get(key, 0) + 1
        out = []
        for k in range(self.n_triangles):
            for a, b in ((0, 1), (1, 2), (2, 0)):
                va, vb = int(t[k, a]), int(t[k, b])
                key = (va, vb) if va < vb else (vb, va)
                if counts[key] == 1:
                    out.append((int(self.tris[k, a]),
                                int(self.tris[k, b]), k))
        return np.array(out, dtype=np.int32).reshape(-1, 3)

    def boundary_loops(self):
        """Ordered closed loops of boundary vertices (canonical ids),
        each traversed with the mesh on the left."""
        be = self.boundary_edges()
        cmap = self.canonical_map()
        nxt = {int(cmap[a]): int(cmap[b]) for a, b, _ in be}
        loops = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            v = nxt[start]
            while v != start:
                loop.append(v)
                seen.add(v)
                v = nxt[v]
            loops.append(np.array(loop, dtype=np.int32))
        return loops

    def euler_characteristic(self):
        cmap = self.canonical_map()
        nv = np.unique(cmap[self.tris]).size
        ne = self.edges().shape[0]
        return nv - ne + self.n_triangles

    def validate(self):
        """Raise MeshError on a broken invariant; return self."""
        uniq, counts = self._edge_counts()
        if np.any(counts > 2):
            raise MeshError("nonconforming mesh: edge shared by >2 triangles")
        bnd = uniq[counts == 1]
        bad = np.unique(bnd[self.marker[bnd.ravel()].reshape(bnd.shape)
                            < 0])
        on_bnd = np.unique(bnd)
        if np.any(self.marker[on_bnd] < 0):
            raise MeshError("boundary vertex without marker")
        del bad
        mmax = self.marker.max(initial=-1)
        tab_hi = self.n_arcs + 10 ** 9
        if mmax >= tab_hi:
            raise MeshError("marker out of range")
        return self


def _quantized_edges(length, spacing):
    """Edge count 4 * 2**k with length/count <= spacing; k >= 0.

    Raises MeshError when even 4 edges would exceed the spacing, which
    is the 'h too large' condition.
    """
    r = length / (4.0 * spacing)
    if r > 1.0 + 1e-12:
        k = int(math.ceil(math.log2(r) - 1e-12))
    elif r <= 0.0:
        raise MeshError("empty boundary arc")
    else:
        k = 0
        if length / 4.0 > spacing * (1.0 + 1e-9):
            raise MeshError(
                f"h too large: arc of length {length:.4g} cannot be "
                f"split into 4 edges of length <= {spacing:.4g}")
    return 4 * (1 << k)


def _resample_polyline(pts, n_edges):
    """n_edges+1 points spaced uniformly in chord length, ends exact."""
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    t = np.concatenate([[0.0], np.cumsum(seg)])
    tt = np.linspace(0.0, t[-1], n_edges + 1)
    out = np.column_stack([np.interp(tt, t, pts[:, 0]),
                           np.interp(tt, t, pts[:, 1])])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def _polyline_length(pts):
    return float(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1])).sum())


# ---------------------------------------------------------------- dispatch

def triangulate(dom: JSDomain, h: float) -> TriMesh:
    """Mesh the domain with target edge length h.

    Postconditions: counterclockwise triangles, no edge longer than h,
    every boundary vertex marked with its arc or corner id, conforming,
    and (annulus) seam duplicates recorded in periodic_pairs.
    """
    if not isinstance(dom, JSDomain):
        raise TypeError("triangulate expects a JSDomain")
    if h <= 0.0:
        raise ValueError("h must be positive")
    if h > 0.5 * dom.diameter:
        raise MeshError(
            f"h too large: {h:.4g} exceeds half the domain diameter")
    if dom.kind == "annulus":
        return _mesh_band(dom, h)
    rect = _detect_rectangle(dom)
    if rect is not None:
        return _mesh_rectangle(dom, h, rect)
    return _mesh_hex(dom, h)


# ------------------------------------------------------- structured rect

def _detect_rectangle(dom):
    """Side table for a 4-arc axis-aligned rectangle, else None."""
    arcs = dom.arcs()
    if dom.kind != "disk" or len(arcs) != 4:
        return None
    tol = 1e-12 * (1.0 + dom.diameter)
    x0, x1, y0, y1 = dom.bbox()
    sides = {}
    for k, (_, _, a) in enumerate(arcs):
        px, py = a.points[:, 0], a.points[:, 1]
        if np.ptp(py) <= tol:
            yy = float(py[0])
            if abs(yy - y0) <= tol:
                sides["bottom"] = k
            elif abs(yy - y1) <= tol:
                sides["top"] = k
            else:
                return None
        elif np.ptp(px) <= tol:
            xx = float(px[0])
            if abs(xx - x0) <= tol:
                sides["left"] = k
            elif abs(xx - x1) <= tol:
                sides["right"] = k
            else:
                return None
        else:
            return None
    if len(sides) != 4:
        return None
    return {"bbox": (x0, x1, y0, y1), "sides": sides}


def _corner_marker_lookup(dom):
    """point -> corner marker (n_arcs + global corner index)."""
    base = len(dom.arcs())
    out = []
    for j, row in enumerate(dom.corner_table()):
        out.append((np.asarray(row["point"]), base + j))
    return out


def _criss_cross_tris(nx, ny):
    tris = np.empty((2 * nx * ny, 3), dtype=np.int32)

    def vid(i, j):
        return j * (nx + 1) + i

    k = 0
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                tris[k] = (v00, v10, v11)
                tris[k + 1] = (v00, v11, v01)
            else:
                tris[k] = (v00, v10, v01)
                tris[k + 1] = (v10, v11, v01)
            k += 2
    return tris


def _mesh_rectangle(dom, h, rect):
    x0, x1, y0, y1 = rect["bbox"]
    sides = rect["sides"]
    s = h / math.sqrt(2.0)
    nx = _quantized_edges(x1 - x0, s)
    ny = _quantized_edges(y1 - y0, s)
    gx = np.linspace(x0, x1, nx + 1)
    gy = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(gx, gy)
    points = np.column_stack([X.ravel(), Y.ravel()])
    marker = np.full(points.shape[0], INTERIOR, dtype=np.int32)

    def vid(i, j):
        return j * (nx + 1) + i

    for i in range(1, nx):
        marker[vid(i, 0)] = sides["bottom"]
        marker[vid(i, ny)] = sides["top"]
    for j in range(1, ny):
        marker[vid(0, j)] = sides["left"]
        marker[vid(nx, j)] = sides["right"]
    corners = _corner_marker_lookup(dom)
    tol = 1e-9 * (1.0 + dom.diameter)
    for i, j in ((0, 0), (nx, 0), (nx, ny), (0, ny)):
        p = points[vid(i, j)]
        hit = [m for q, m in corners if np.hypot(*(p - q)) <= tol]
        if len(hit) != 1:
            raise MeshError("rectangle corner does not match domain corner")
        marker[vid(i, j)] = hit[0]
    return TriMesh(points, _criss_cross_tris(nx, ny), marker,
                   n_arcs=len(dom.arcs()), h=h)


# ------------------------------------------------------- periodic band

def _mesh_band(dom, h):
    c = dom.chart
    if not c.periodic:
        raise MeshError("annulus meshing needs a periodic chart")
    P = c.region.period
    xa = c.region.x0
    top = dom.loop_points(0)
    bot = dom.loop_points(1)

    def interp_loop(pts, xq):
        order = np.argsort(pts[:, 0])
        return np.interp(xq, pts[order, 0], pts[order, 1], period=P)

    # stretch factor so that mapped column spacing keeps physical edges
    # below h even when the loops slope
    smax = 0.0
    for pts in (top, bot):
        dx = np.diff(pts[:, 0])
        dy = np.diff(pts[:, 1])
        ok = np.abs(dx) > 1e-14
        if np.any(ok):
            smax = max(smax, float(np.max(np.abs(dy[ok] / dx[ok]))))
    s = h / math.sqrt(2.0)
    nx = _quantized_edges(P * math.sqrt(1.0 + smax ** 2), s)
    xcols = xa + P * np.arange(nx + 1) / nx
    ytop = interp_loop(top, xcols)
    ybot = interp_loop(bot, xcols)
    hgt = ytop - ybot
    if np.any(hgt <= 0.0):
        raise MeshError("band loops cross")
    ny = _quantized_edges(float(hgt.max()), s)

    jj = np.arange(ny + 1) / ny
    X = np.repeat(xcols[None, :], ny + 1, axis=0)
    Y = ybot[None, :] + jj[:, None] * hgt[None, :]
    points = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    marker = np.full(points.shape[0], INTERIOR, dtype=np.int32)
    # loops are stored top first, so arc flat id 0 is the top loop
    marker[[vid(i, ny) for i in range(nx + 1)]] = 0
    marker[[vid(i, 0) for i in range(nx + 1)]] = 1
    pairs = np.array([(vid(nx, j), vid(0, j)) for j in range(ny + 1)],
                     dtype=np.int32)
    return TriMesh(points, _criss_cross_tris(nx, ny), marker,
                   n_arcs=2, h=h, periodic_pairs=pairs, period=P)


# ------------------------------------------------------- hex Delaunay

def _boundary_vertices(dom, spacing):
    """Resampled loop polylines with markers; every arc gets 4*2**k
    edges so refinement invariants hold."""
    base = len(dom.arcs())
    flat = {}
    for k, (li, ai, _) in enumerate(dom.arcs()):
        flat[(li, ai)] = k
    corner_id = {}
    for j, row in enumerate(dom.corner_table()):
        corner_id[(row["loop"], row["local"])] = base + j

    all_pts, all_mark, loop_polys = [], [], []
    for li, loop in enumerate(dom.loops):
        lpts, lmark = [], []
        for ai, arc in enumerate(loop):
            pts = arc.points
            if arc.closed:
                pts = np.vstack([pts, pts[:1]])
            n_e = _quantized_edges(_polyline_length(pts), spacing)
            rs = _resample_polyline(pts, n_e)
            lpts.append(rs[:-1])
            m = np.full(n_e, flat[(li, ai)], dtype=np.int32)
            if not arc.closed:
                m[0] = corner_id[(li, ai)]
            lmark.append(m)
        lpts = np.vstack(lpts)
        loop_polys.append(lpts)
        all_pts.append(lpts)
        all_mark.append(np.concatenate(lmark))
    return np.vstack(all_pts), np.concatenate(all_mark), loop_polys


def _hex_lattice(bbox, pitch):
    x0, x1, y0, y1 = bbox
    rowstep = pitch * math.sqrt(3.0) / 2.0
    ys = np.arange(y0 + 0.5 * rowstep, y1, rowstep)
    pts = []
    for r, y in enumerate(ys):
        off = 0.25 * pitch if r % 2 else -0.25 * pitch
        xs = np.arange(x0 + 0.5 * pitch + off, x1, pitch)
        pts.append(np.column_stack([xs, np.full(xs.shape, y)]))
    if not pts:
        return np.zeros((0, 2))
    return np.vstack(pts)


def _smooth(points, tris, movable, iters=3):
    """Laplacian smoothing of the movable vertices (uniform weights)."""
    n = points.shape[0]
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    for _ in range(iters):
        acc = np.zeros((n, 2))
        cnt = np.zeros(n)
        np.add.at(acc, e[:, 0], points[e[:, 1]])
        np.add.at(acc, e[:, 1], points[e[:, 0]])
        np.add.at(cnt, e[:, 0], 1.0)
        np.add.at(cnt, e[:, 1], 1.0)
        upd = movable & (cnt > 0)
        points[upd] = acc[upd] / cnt[upd, None]
    return points


def _mesh_hex(dom, h, _attempt=0):
    shrink = 0.85 ** _attempt
    spacing = 0.5 * h
    pitch = 0.62 * h * shrink
    clearance = 0.55 * pitch
    bpts, bmark, loop_polys = _boundary_vertices(dom, spacing)

    lat = _hex_lattice(dom.bbox(), pitch)
    if lat.shape[0]:
        keep = dom.contains(lat[:, 0], lat[:, 1], margin=clearance)
        # clip against the resampled polygon as well, so lattice points
        # cannot fall into the sliver between it and the true boundary
        inside = points_in_polygon(lat[:, 0], lat[:, 1], loop_polys[0])
        for poly in loop_polys[1:]:
            inside &= ~points_in_polygon(lat[:, 0], lat[:, 1], poly)
        lat = lat[keep & inside]

    points = np.vstack([bpts, lat])
    dl = Delaunay(points)
    tris = dl.simplices.astype(np.int32)
    cx = points[tris].mean(axis=1)
    keep = points_in_polygon(cx[:, 0], cx[:, 1], loop_polys[0])
    for poly in loop_polys[1:]:
        keep &= ~points_in_polygon(cx[:, 0], cx[:, 1], poly)
    keep &= np.abs(_signed_areas(points, tris)) > _AREA_FLOOR * h ** 2
    tris = tris[keep]

    used = np.zeros(points.shape[0], dtype=bool)
    used[tris.ravel()] = True
    nb = bpts.shape[0]
    if not np.all(used[:nb]):
        raise MeshError("boundary vertex dropped during triangulation")
    movable = used.copy()
    movable[:nb] = False
    points = _smooth(points.copy(), tris, movable)
    remap = -np.ones(points.shape[0], dtype=np.int32)
    remap[used] = np.arange(int(used.sum()), dtype=np.int32)
    marker = np.full(int(used.sum()), INTERIOR, dtype=np.int32)
    marker[remap[:nb]] = bmark
    mesh = TriMesh(points[used], remap[tris], marker,
                   n_arcs=len(dom.arcs()), h=h)
    q = mesh_quality(mesh)
    if q["max_edge"] > h * (1.0 + 1e-9) and _attempt < 3:
        return _mesh_hex(dom, h, _attempt + 1)
    if q["max_edge"] > h * (1.0 + 1e-9):
        raise MeshError(f"max edge {q['max_edge']:.4g} exceeds h={h:.4g}")
    return mesh


# ------------------------------------------------------------- quality

def mesh_quality(mesh, corner_radius=None):
    """Edge-length and angle statistics.

    min_angle_interior skips triangles with a vertex within
    corner_radius (default 2h) of any corner vertex, matching the
    guarantee that angles may degrade right at reentrant corners.
    """
    p = mesh.points
    t = mesh.tris
    v0, v1, v2 = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    e = np.stack([np.hypot(*(v1 - v0).T), np.hypot(*(v2 - v1).T),
                  np.hypot(*(v0 - v2).T)])
    areas = np.abs(_signed_areas(p, t))
    angles = np.empty((3, t.shape[0]))
    for k in range(3):
        a, b, c = e[k], e[(k + 1) % 3], e[(k + 2) % 3]
        cosv = np.clip((b ** 2 + c ** 2 - a ** 2) / (2 * b * c), -1.0, 1.0)
        angles[k] = np.degrees(np.arccos(cosv))
    amin = angles.min(axis=0)

    if corner_radius is None:
        corner_radius = 2.0 * mesh.h
    cpts = p[mesh.marker >= mesh.n_arcs]
    if cpts.shape[0]:
        cen = p[t].reshape(-1, 2)
        d = np.full(cen.shape[0], np.inf)
        for q in cpts:
            d = np.minimum(d, np.hypot(cen[:, 0] - q[0], cen[:, 1] - q[1]))
        near = d.reshape(-1, 3).min(axis=1) <= corner_radius
    else:
        near = np.zeros(t.shape[0], dtype=bool)
    far = ~near
    return {
        "max_edge": float(e.max()),
        "min_angle": float(amin.min()),
        "min_angle_interior": float(amin[far].min()) if np.any(far)
        else float(amin.min()),
        "min_area": float(areas.min()),
    }


# ------------------------------------------------------------- file io

_HEADER = """\
# triangle mesh, text format
# line 1 (after comments): nv nt npairs n_arcs h period
# then nv vertex lines:    x y marker
#   marker: -1 interior, 0..n_arcs-1 boundary arc, n_arcs+j corner j
# then nt triangle lines:  i j k   (0-based, counterclockwise)
# then npairs seam lines:  slave master
"""


def save_mesh(mesh, path):
    with open(path, "w") as f:
        f.write(_HEADER)
        f.write(f"{mesh.n_vertices} {mesh.n_triangles} "
                f"{mesh.periodic_pairs.shape[0]} {mesh.n_arcs} "
                f"{mesh.h:.17g} {mesh.period:.17g}\n")
        for (x, y), m in zip(mesh.points, mesh.marker):
            f.write(f"{x:.17g} {y:.17g} {m}\n")
        for i, j, k in mesh.tris:
            f.write(f"{i} {j} {k}\n")
        for s, m in mesh.periodic_pairs:
            f.write(f"{s} {m}\n")


def load_mesh(path):
    with open(path) as f:
        rows = [ln.split() for ln in f
                if ln.strip() and not ln.startswith("#")]
    nv, nt, npairs, n_arcs = (int(v) for v in rows[0][:4])
    h, period = float(rows[0][4]), float(rows[0][5])
    if len(rows) != 1 + nv + nt + npairs:
        raise MeshError("mesh file is truncated")
    vert = np.array([[float(a), float(b), float(c)]
                     for a, b, c in rows[1:1 + nv]])
    tris = np.array([[int(a) for a in r]
                     for r in rows[1 + nv:1 + nv + nt]], dtype=np.int32)
    pairs = np.array([[int(a) for a in r]
                      for r in rows[1 + nv + nt:]],
                     dtype=np.int32).reshape(-1, 2)
    return TriMesh(vert[:, :2], tris, vert[:, 2].astype(np.int32),
                   n_arcs=n_arcs, h=h, periodic_pairs=pairs, period=period)
