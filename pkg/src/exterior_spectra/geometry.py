"""Structured triangulations of truncated exterior domains.

The computational region is ``{|x| < R}`` minus an obstacle (a disk centred at
the origin or a polygon star-shaped with respect to it). Obstacle edges are
tagged ``omega`` (Robin part) or ``omega_prime`` (Dirichlet part); edges on the
outer circle are tagged ``trunc`` and always carry a Dirichlet condition.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi


class MeshError(ValueError):
    pass


class Tag(enum.IntEnum):
    OMEGA = 0
    OMEGA_PRIME = 1
    TRUNC = 2

    @property
    def label(self) -> str:
        return ("omega", "omega_prime", "trunc")[self]

    @classmethod
    def from_label(cls, s: str) -> "Tag":
        return {"omega": cls.OMEGA, "omega_prime": cls.OMEGA_PRIME, "trunc": cls.TRUNC}[s]


@dataclass(frozen=True)
class Disk:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise MeshError("disk obstacle needs a positive radius")

    @property
    def extent(self) -> float:
        return self.radius

    @property
    def area(self) -> float:
        return np.pi * self.radius ** 2

    def project(self, pts: np.ndarray) -> np.ndarray:
        r = np.hypot(pts[:, 0], pts[:, 1])
        return pts * (self.radius / r)[:, None]


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, counter-clockwise, star-shaped with respect to the origin."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise MeshError("polygon obstacle needs at least three 2D vertices")
        object.__setattr__(self, "vertices", tuple(map(tuple, v.tolist())))
        ang = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
        steps = np.diff(np.append(ang, ang[0] + TWO_PI))
        if np.any(steps <= 0) or not np.isclose(steps.sum(), TWO_PI):
            raise MeshError("polygon must be counter-clockwise and star-shaped about the origin")

    @property
    def extent(self) -> float:
        return float(np.max(np.hypot(*np.asarray(self.vertices).T)))

    @property
    def area(self) -> float:
        x, y = np.asarray(self.vertices).T
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def project(self, pts: np.ndarray) -> np.ndarray:
        # midpoints of straight polygon edges already lie on the boundary
        return pts


@dataclass(frozen=True)
class DomainSpec:
    obstacle: Disk | Polygon
    trunc_radius: float
    refinement_level: int = 0
    grading: float = 1.0
    n_theta: int = 16
    n_r: int = 8
    # radii forced onto mesh rings at every level (disk obstacles only)
    interfaces: tuple[float, ...] = ()

    def validate(self) -> None:
        if not self.obstacle.extent < self.trunc_radius:
            raise MeshError(f"obstacle (extent {self.obstacle.extent}) is not strictly inside "
                            f"the truncation disk of radius {self.trunc_radius}")
        if self.refinement_level < 0 or int(self.refinement_level) != self.refinement_level:
            raise MeshError("refinement_level must be a nonnegative integer")
        if self.grading < 1:
            raise MeshError("grading must be >= 1")
        if self.n_theta < 3 or self.n_r < 1:
            raise MeshError("need n_theta >= 3 and n_r >= 1")
        if self.interfaces:
            if not isinstance(self.obstacle, Disk):
                raise MeshError("interface radii are only supported for disk obstacles")
            for b in self.interfaces:
                if not self.obstacle.radius < b < self.trunc_radius:
                    raise MeshError(f"interface radius {b} outside (r0, R)")

    @property
    def exact_area(self) -> float:
        return np.pi * self.trunc_radius ** 2 - self.obstacle.area


@dataclass(frozen=True)
class BoundarySpec:
    """Angular intervals ``[a, b)`` of the obstacle boundary forming omega, and alpha."""

    omega: tuple[tuple[float, float], ...] = ()
    alpha: float = 0.0

    def __post_init__(self):
        iv = tuple(sorted((float(a), float(b)) for a, b in self.omega))
        for a, b in iv:
            if not 0.0 <= a < b <= TWO_PI:
                raise ValueError(f"selector interval [{a}, {b}) not inside [0, 2pi)")
        for (_, b0), (a1, _) in zip(iv, iv[1:]):
            if a1 < b0:
                raise ValueError("selector intervals overlap")
        object.__setattr__(self, "omega", iv)

    @classmethod
    def full(cls, alpha: float = 0.0) -> "BoundarySpec":
        return cls(((0.0, TWO_PI),), alpha)

    @property
    def covers_boundary(self) -> bool:
        return np.isclose(sum(b - a for a, b in self.omega), TWO_PI)

    @property
    def is_neumann(self) -> bool:
        return self.covers_boundary and self.alpha == 0.0

    def selects(self, theta: np.ndarray) -> np.ndarray:
        theta = np.mod(theta, TWO_PI)
        hit = np.zeros(theta.shape, dtype=bool)
        for a, b in self.omega:
            hit |= (theta >= a) & (theta < b)
        return hit


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray          # (N, 2)
    triangles: np.ndarray         # (T, 3), counter-clockwise
    boundary_edges: np.ndarray    # (E, 2)
    edge_tags: np.ndarray         # (E,) Tag values
    obstacle: Disk | Polygon | None = None
    trunc_radius: float | None = None
    level: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas().sum())

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique sorted vertex pairs of all triangle edges."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def h(self) -> float:
        e = self.edges()
        d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    def edges_tagged(self, *tags: Tag) -> np.ndarray:
        return self.boundary_edges[np.isin(self.edge_tags, [int(t) for t in tags])]

    def vertices_tagged(self, *tags: Tag) -> np.ndarray:
        return np.unique(self.edges_tagged(*tags))

    @property
    def obstacle_edges(self) -> np.ndarray:
        return self.edges_tagged(Tag.OMEGA, Tag.OMEGA_PRIME)

    def tag_counts(self) -> dict[str, int]:
        return {t.label: int(np.sum(self.edge_tags == t)) for t in Tag}


# ---------------------------------------------------------------------------
# construction


def _radial_parameters(spec: DomainSpec, nr: int) -> np.ndarray:
    """Graded layer parameters ``s in [0, 1]`` with interface radii on rings."""
    t = np.arange(nr + 1) / nr
    g = spec.grading
    if not spec.interfaces:
        return t ** g
    r0, R = spec.obstacle.radius, spec.trunc_radius
    knots_t, knots_s = [0.0], [0.0]
    for b in sorted(spec.interfaces):
        s_b = ((b - r0) / (R - r0)) ** (1.0 / g)
        i_b = min(max(int(round(s_b * spec.n_r)), 1), spec.n_r - 1)
        if i_b / spec.n_r <= knots_t[-1]:
            raise MeshError(f"interface radius {b} needs more base radial layers (n_r)")
        knots_t.append(i_b / spec.n_r)
        knots_s.append(s_b)
    knots_t.append(1.0)
    knots_s.append(1.0)
    if knots_t[-2] >= 1.0:
        raise MeshError("interface radii need more base radial layers (n_r)")
    return np.interp(t, knots_t, knots_s) ** g


def _inner_outer_rings(spec: DomainSpec, nt: int):
    R = spec.trunc_radius
    obs = spec.obstacle
    if isinstance(obs, Disk):
        theta = TWO_PI * np.arange(nt) / nt
        inner = obs.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return inner, R * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    v = np.asarray(obs.vertices)
    nv = len(v)
    if nt < nv:
        raise MeshError(f"n_theta={nt} smaller than the polygon's {nv} vertices")
    ang = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    span = np.diff(np.append(ang, ang[0] + TWO_PI))
    # split n_theta among edges by subtended angle (largest remainder, >= 1 each)
    ideal = span / TWO_PI * nt
    counts = np.maximum(np.floor(ideal).astype(int), 1)
    while counts.sum() < nt:
        counts[np.argmax(ideal - counts)] += 1
    while counts.sum() > nt:
        counts[np.argmax(np.where(counts > 1, counts - ideal, -np.inf))] -= 1
    inner = []
    for k in range(nv):
        a, b = v[k], v[(k + 1) % nv]
        for j in range(counts[k]):
            inner.append(a + (b - a) * j / counts[k])
    inner = np.asarray(inner)
    theta = np.arctan2(inner[:, 1], inner[:, 0])
    return inner, R * np.stack([np.cos(theta), np.sin(theta)], axis=1)


def build_mesh(spec: DomainSpec) -> Mesh:
    """Structured polar (disk) or layered transfinite (polygon) mesh.

    Level ``L`` uses ``n_theta * 2**L`` angular and ``n_r * 2**L`` radial
    divisions; each quadrilateral cell is split into two triangles.
    """
    spec.validate()
    nt = spec.n_theta * 2 ** spec.refinement_level
    nr = spec.n_r * 2 ** spec.refinement_level
    s = _radial_parameters(spec, nr)
    inner, outer = _inner_outer_rings(spec, nt)
    verts = (inner[None, :, :] + s[:, None, None] * (outer - inner)[None, :, :]).reshape(-1, 2)
    if isinstance(spec.obstacle, Disk):
        # exact ring radii; the convex combination above is only exact up to rounding
        theta = TWO_PI * np.arange(nt) / nt
        radii = spec.obstacle.radius + s * (spec.trunc_radius - spec.obstacle.radius)
        verts = (radii[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)[None]).reshape(-1, 2)

    i, j = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jn = (j + 1) % nt
    v00, v01 = i * nt + j, i * nt + jn
    v10, v11 = (i + 1) * nt + j, (i + 1) * nt + jn
    tris = np.empty((2 * len(i), 3), dtype=np.int64)
    tris[0::2] = np.stack([v00, v10, v11], axis=1)
    tris[1::2] = np.stack([v00, v11, v01], axis=1)

    ring = np.arange(nt)
    inner_e = np.stack([ring, (ring + 1) % nt], axis=1)
    outer_e = inner_e + nr * nt
    edges = np.concatenate([inner_e, outer_e])
    tags = np.concatenate([np.full(nt, Tag.OMEGA_PRIME), np.full(nt, Tag.TRUNC)]).astype(np.int8)
    mesh = Mesh(verts, tris, edges, tags, spec.obstacle, spec.trunc_radius,
                spec.refinement_level, {"n_theta": nt, "n_r": nr})
    validate_mesh(mesh)
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement; new boundary midpoints are projected onto the curves.

    Projection moves an obstacle midpoint by the chord sagitta. When the first
    radial layer is thinner than a few sagittas (strong grading on a coarse
    angular grid) a child triangle flips and :class:`MeshError` is raised;
    build that level directly with :func:`build_mesh` instead.
    """
    validate_mesh(mesh)
    edges = mesh.edges()
    n = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    def edge_ids(pairs):
        keys = np.sort(pairs, axis=1)
        idx = np.searchsorted(edges[:, 0] * n + edges[:, 1], keys[:, 0] * n + keys[:, 1])
        return idx

    bids = edge_ids(mesh.boundary_edges)
    obst = np.isin(mesh.edge_tags, [Tag.OMEGA, Tag.OMEGA_PRIME])
    if mesh.obstacle is not None:
        mid[bids[obst]] = mesh.obstacle.project(mid[bids[obst]])
    if mesh.trunc_radius is not None:
        tr = bids[~obst]
        mid[tr] = Disk(mesh.trunc_radius).project(mid[tr])

    t = mesh.triangles
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    mab = n + edge_ids(t[:, [0, 1]])
    mbc = n + edge_ids(t[:, [1, 2]])
    mca = n + edge_ids(t[:, [2, 0]])
    children = np.stack([
        np.stack([a, mab, mca], 1), np.stack([mab, b, mbc], 1),
        np.stack([mca, mbc, c], 1), np.stack([mab, mbc, mca], 1)], axis=1).reshape(-1, 3)

    be = mesh.boundary_edges
    m = n + bids
    new_edges = np.stack([np.stack([be[:, 0], m], 1), np.stack([m, be[:, 1]], 1)], 1).reshape(-1, 2)
    new_tags = np.repeat(mesh.edge_tags, 2)
    meta = dict(mesh.meta)
    meta["refined_from_level"] = mesh.level
    out = Mesh(np.concatenate([mesh.vertices, mid]), children, new_edges, new_tags,
               mesh.obstacle, mesh.trunc_radius, mesh.level + 1, meta)
    validate_mesh(out)
    return out


def tag_boundary(mesh: Mesh, bc: BoundarySpec, require_omega: bool = False) -> Mesh:
    """Tag obstacle edges by the angle of their midpoint."""
    obst = mesh.edge_tags != Tag.TRUNC
    e = mesh.boundary_edges
    mid = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
    hit = bc.selects(np.arctan2(mid[:, 1], mid[:, 0]))
    tags = mesh.edge_tags.copy()
    tags[obst & hit] = Tag.OMEGA
    tags[obst & ~hit] = Tag.OMEGA_PRIME
    if require_omega and not np.any(tags == Tag.OMEGA):
        raise MeshError("omega selector matches no obstacle edge; omega must be nonempty")
    return replace(mesh, edge_tags=tags)


def validate_mesh(mesh: Mesh) -> None:
    """Raise :class:`MeshError` unless areas, conformity and tags are sound."""
    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        raise MeshError(f"{int(np.sum(areas <= 0))} triangles with nonpositive area")
    t = mesh.triangles
    all_e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(all_e, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("an edge is shared by more than two triangles")
    single = uniq[counts == 1]
    be = np.unique(np.sort(mesh.boundary_edges, axis=1), axis=0)
    if len(be) != len(mesh.boundary_edges) or not np.array_equal(single, be):
        raise MeshError("boundary edge list does not match the one-triangle edges (non-conforming?)")
    if len(mesh.edge_tags) != len(mesh.boundary_edges):
        raise MeshError("one tag per boundary edge required")
    if mesh.trunc_radius is not None:
        r = np.hypot(*mesh.vertices[mesh.edges_tagged(Tag.TRUNC)].reshape(-1, 2).T)
        if not np.allclose(r, mesh.trunc_radius, rtol=1e-12):
            raise MeshError("trunc-tagged edge off the truncation circle")
        obs_r = np.hypot(*mesh.vertices[mesh.obstacle_edges].reshape(-1, 2).T)
        if np.any(obs_r >= mesh.trunc_radius):
            raise MeshError("obstacle-tagged edge on the truncation circle")


# ---------------------------------------------------------------------------
# plain-text export


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles} "
                 f"edges {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.edge_tags):
            fh.write(f"{a} {b} {Tag(tag).label}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        head = fh.readline().split()
        if head[0::2] != ["vertices", "triangles", "edges"]:
            raise MeshError(f"bad mesh header: {' '.join(head)}")
        nv, nt, ne = (int(x) for x in head[1::2])
        lines = fh.read().splitlines()
    verts = np.array([[float(x) for x in ln.split()] for ln in lines[:nv]]).reshape(-1, 2)
    tris = np.array([[int(x) for x in ln.split()] for ln in lines[nv:nv + nt]], dtype=np.int64)
    rows = [ln.split() for ln in lines[nv + nt:nv + nt + ne]]
    edges = np.array([[int(a), int(b)] for a, b, _ in rows], dtype=np.int64).reshape(-1, 2)
    tags = np.array([Tag.from_label(t) for *_, t in rows], dtype=np.int8)
    return Mesh(verts, tris.reshape(-1, 3), edges, tags)
