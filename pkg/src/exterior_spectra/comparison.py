"""Gap certificates between a "weak" and a "strong" operator on mesh sequences.

The weak operator has the larger form domain or the smaller form (Robin or
Neumann versus Dirichlet; ``A1`` versus ``A2`` for ordered coefficients).
Single-mesh checks (eigenvalue ordering, counting inequality) are exact
consequences of subspace nesting and must hold on every mesh. Strictness of
the gaps is a numerical verdict backed by Richardson extrapolation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import assembly
from .fields import EllipticFields, OrderingError, Potential, check_ordering
from .geometry import BoundarySpec, Mesh, Tag, tag_boundary
from .spectral import SpectralResult, cluster_multiplicity, counting_report, eigs_below

log = logging.getLogger(__name__)

ORDER_TOL = 1e-10
TRACE_MIN = 1e-6
STRICT_MARGIN = 3.0


# ---------------------------------------------------------------------------
# Richardson extrapolation


@dataclass(frozen=True)
class Extrapolation:
    limit: float
    error: float
    order: float | None
    status: str  # "ok", "constant", "inconclusive"


def _order_from_ratios(h, g) -> float:
    d1, d2 = g[0] - g[1], g[1] - g[2]
    q = d1 / d2
    r1, r2 = h[0] / h[1], h[1] / h[2]
    if np.isclose(r1, r2, rtol=1e-12):
        return float(np.log(q) / np.log(r1))

    def f(p):
        return (h[0] ** p - h[1] ** p) / (h[1] ** p - h[2] ** p) - q

    return float(brentq(f, 1e-3, 20.0))


def richardson_extrapolate(gaps_by_mesh: Sequence[tuple[float, float]]) -> Extrapolation:
    """Fit ``g(h) = g_inf + C h**p`` through the three finest ``(h, g)`` pairs.

    A sign-changing or non-monotone sequence of differences is reported as
    ``"inconclusive"`` and not extrapolated.
    """
    pts = sorted(gaps_by_mesh, key=lambda t: -t[0])
    if len(pts) < 3:
        raise ValueError("Richardson extrapolation needs at least three meshes")
    h = np.array([p[0] for p in pts[-3:]], dtype=float)
    g = np.array([p[1] for p in pts[-3:]], dtype=float)
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    d1, d2 = g[0] - g[1], g[1] - g[2]
    scale = max(abs(g).max(), 1e-300)
    if abs(d1) <= 1e-15 * scale and abs(d2) <= 1e-15 * scale:
        return Extrapolation(float(g[-1]), 0.0, None, "constant")
    if d1 * d2 <= 0 or abs(d2) >= abs(d1):
        return Extrapolation(float(g[-1]), float("nan"), None, "inconclusive")
    if np.sign(g[0]) != np.sign(g[-1]) or np.sign(g[1]) != np.sign(g[-1]):
        return Extrapolation(float(g[-1]), float("nan"), None, "inconclusive")
    try:
        p = _order_from_ratios(h, g)
    except ValueError:
        return Extrapolation(float(g[-1]), float("nan"), None, "inconclusive")
    # g1 - g2 = C (h1^p - h2^p)
    c = d2 / (h[1] ** p - h[2] ** p)
    limit = g[2] - c * h[2] ** p
    return Extrapolation(float(limit), float(abs(g[2] - limit)), p, "ok")


# ---------------------------------------------------------------------------
# certificate records


@dataclass(frozen=True)
class PairRow:
    k: int
    weak: float
    strong: float

    @property
    def gap(self) -> float:
        return self.strong - self.weak

    @property
    def ordered(self) -> bool:
        return self.weak <= self.strong + ORDER_TOL


@dataclass(frozen=True)
class CountRow:
    mu: float
    n_weak_open: int
    n_strong_closed: int
    n_strong_at_mu: int

    @property
    def holds(self) -> bool:
        return self.n_weak_open >= self.n_strong_closed


@dataclass
class MeshRecord:
    level: int
    h: float
    n_free_weak: int
    n_free_strong: int
    weak: SpectralResult
    strong: SpectralResult
    pairs: list[PairRow]
    counts: list[CountRow]
    trace_norms: np.ndarray | None = None
    multiplicities: list[tuple[float, int]] = field(default_factory=list)

    @property
    def ordering_holds(self) -> bool:
        return len(self.weak) >= len(self.strong) and all(p.ordered for p in self.pairs)

    @property
    def counting_holds(self) -> bool:
        return all(c.holds for c in self.counts)


@dataclass(frozen=True)
class StrictVerdict:
    k: int
    hs: tuple[float, ...]
    gaps: tuple[float, ...]
    extrapolation: Extrapolation | None
    verdict: str  # "strict", "inconclusive", "not_strict"


@dataclass
class GapCertificate:
    kind: str
    summary: dict
    meshes: list[MeshRecord]
    strict: list[StrictVerdict]
    status: str  # "ok" or "nothing to compare"
    sensitivity: list[tuple[float, int, float]] = field(default_factory=list)

    @property
    def ordering_holds(self) -> bool:
        return all(m.ordering_holds for m in self.meshes)

    @property
    def counting_holds(self) -> bool:
        return all(m.counting_holds for m in self.meshes)

    @property
    def min_trace_norm(self) -> float | None:
        norms = [m.trace_norms for m in self.meshes if m.trace_norms is not None and len(m.trace_norms)]
        return float(min(n.min() for n in norms)) if norms else None

    @property
    def trace_holds(self) -> bool:
        t = self.min_trace_norm
        return t is None or t > TRACE_MIN

    def verdict_for(self, k: int) -> StrictVerdict | None:
        return next((v for v in self.strict if v.k == k), None)

    def strict_for(self, ks) -> bool:
        return all((v := self.verdict_for(k)) is not None and v.verdict == "strict" for k in ks)


# ---------------------------------------------------------------------------
# operations


def trace_norm(mesh: Mesh, u: np.ndarray, dof: assembly.DofMap, boundary_mass=None) -> float:
    """Discrete L2 norm of the trace of ``u`` on the whole obstacle boundary."""
    B = boundary_mass if boundary_mass is not None else obstacle_mass(mesh)
    full = dof.expand(u)
    return float(np.sqrt(max(full @ (B @ full), 0.0)))


def obstacle_mass(mesh: Mesh):
    return assembly.assemble_robin_boundary(mesh, alpha=1.0, tags=(Tag.OMEGA, Tag.OMEGA_PRIME))


def _unique_probes(values, cluster_tol) -> list[float]:
    return [v for v, _ in cluster_multiplicity(np.asarray(values, dtype=float), cluster_tol)]


def _compare_on_mesh(mesh: Mesh, weak: assembly.AssembledSystem, strong: assembly.AssembledSystem,
                     probes, threshold, tol, cluster_tol, with_trace: bool) -> MeshRecord:
    rs = eigs_below(strong.A, strong.M, threshold, tol)
    rw = eigs_below(weak.A, weak.M, threshold, tol)
    pairs = [PairRow(k + 1, float(rw.eigenvalues[k]) if k < len(rw) else np.inf,
                     float(rs.eigenvalues[k])) for k in range(len(rs))]
    mus = list(probes) if probes is not None else []
    mus = _unique_probes(list(mus) + list(rs.eigenvalues), cluster_tol) if len(mus) or len(rs) else []
    counts = []
    for mu in mus:
        cw = counting_report(weak.A, weak.M, mu, cluster_tol)
        cs = counting_report(strong.A, strong.M, mu, cluster_tol)
        counts.append(CountRow(float(mu), cw.n_strictly_below, cs.n_below_or_equal, cs.n_at_mu))
    traces = None
    if with_trace:
        B = obstacle_mass(mesh)
        traces = np.array([trace_norm(mesh, rw.eigenvectors[:, j], weak.dof, B) for j in range(len(rw))])
    return MeshRecord(mesh.level, mesh.h, weak.n, strong.n, rw, rs, pairs, counts, traces,
                      cluster_multiplicity(rs, cluster_tol))


def _strict_verdicts(records: list[MeshRecord]) -> list[StrictVerdict]:
    if not records:
        return []
    n_k = max(len(r.pairs) for r in records)
    out = []
    for k in range(1, n_k + 1):
        data = [(r.h, r.pairs[k - 1].gap) for r in records if len(r.pairs) >= k]
        hs = tuple(h for h, _ in data)
        gaps = tuple(g for _, g in data)
        if len(data) < 3:
            out.append(StrictVerdict(k, hs, gaps, None, "inconclusive"))
            continue
        ex = richardson_extrapolate(data)
        fine, margin = gaps[-1], STRICT_MARGIN * ex.error
        # both the finest gap and the extrapolated gap must clear the margin
        if ex.status == "inconclusive":
            verdict = "inconclusive"
        elif ex.limit <= 0:
            verdict = "not_strict"
        elif fine > margin and ex.limit > margin:
            verdict = "strict"
        else:
            verdict = "inconclusive"
        out.append(StrictVerdict(k, hs, gaps, ex, verdict))
    return out


def _certify(kind, meshes, build_pair, probes, threshold, tol, cluster_tol, with_trace, summary,
             sensitivity_meshes=()) -> GapCertificate:
    if probes is not None and any(mu >= 0 for mu in probes):
        raise ValueError("all probes must lie strictly below 0")
    if threshold is None:
        threshold = max(probes) if probes else 0.0
    records = []
    for mesh in meshes:
        weak, strong = build_pair(mesh)
        rec = _compare_on_mesh(mesh, weak, strong, probes, threshold, tol, cluster_tol, with_trace)
        log.info("%s level %d: %d strong / %d weak eigenvalues below %g", kind, mesh.level,
                 len(rec.strong), len(rec.weak), threshold)
        records.append(rec)
    sens = []
    for mesh in sensitivity_meshes:
        weak, strong = build_pair(mesh)
        rs = eigs_below(strong.A, strong.M, threshold, tol)
        rw = eigs_below(weak.A, weak.M, threshold, tol)
        sens.extend((float(mesh.trunc_radius), k + 1, float(rs.eigenvalues[k] - rw.eigenvalues[k]))
                    for k in range(min(len(rs), len(rw))))
    status = "ok" if any(len(r.strong) for r in records) else "nothing to compare"
    summary = dict(summary, threshold=threshold, levels=[m.level for m in meshes])
    return GapCertificate(kind, summary, records, _strict_verdicts(records), status, sens)


def compare_dirichlet_vs_mixed(meshes: Sequence[Mesh], V: Potential, bc: BoundarySpec,
                               mu_probes=None, threshold: float | None = None, tol: float = 1e-8,
                               cluster_tol: float = 1e-8, sensitivity_meshes=()) -> GapCertificate:
    """Robin on omega / Dirichlet on omega' against full Dirichlet, mesh by mesh.

    With ``omega`` the whole obstacle and ``alpha = 0`` the weak operator is
    assembled through the dedicated Neumann path.
    """
    if not bc.omega:
        raise ValueError("omega must be nonempty for a mixed comparison")
    neumann = bc.is_neumann

    def pair(mesh):
        if neumann:
            weak = assembly.neumann_system(mesh, V)
        else:
            weak = assembly.mixed_system(tag_boundary(mesh, bc, require_omega=True), V, bc)
        return weak, assembly.dirichlet_system(mesh, V)

    kind = "dirichlet_vs_neumann" if neumann else "dirichlet_vs_mixed"
    summary = {"potential": repr(V), "omega": bc.omega, "alpha": bc.alpha}
    return _certify(kind, meshes, pair, mu_probes, threshold, tol, cluster_tol, True, summary,
                    sensitivity_meshes)


def compare_coefficient_pairs(meshes: Sequence[Mesh], f1: EllipticFields, f2: EllipticFields,
                              strict_ball, mu_probes=None, threshold: float | None = None,
                              tol: float = 1e-8, cluster_tol: float = 1e-8,
                              sensitivity_meshes=()) -> GapCertificate:
    """Dirichlet operators ``A1 <= A2`` on the same free space.

    The ordering witness is checked at the barycenters of every mesh before
    anything is assembled; an invalid witness raises :class:`OrderingError`.
    Without ``strict_ball`` only the non-strict checks are meaningful.
    """
    witnesses = []
    for mesh in list(meshes) + list(sensitivity_meshes):
        if strict_ball is not None:
            _check_ball_inside(mesh, strict_ball)
        w = check_ordering(f1, f2, mesh.barycenters(), strict_ball)
        if not (w.pointwise_psd and w.pointwise_scalar):
            raise OrderingError(f"fields are not ordered on level {mesh.level}")
        witnesses.append(w)

    def pair(mesh):
        s1 = assembly.dirichlet_system(mesh, f1.potential, f1.coefficient)
        s2 = assembly.dirichlet_system(mesh, f2.potential, f2.coefficient)
        return s1, s2

    summary = {"f1": repr(f1), "f2": repr(f2), "strict_ball": strict_ball,
               "strict_condition": witnesses[0].strict_condition if witnesses else None}
    return _certify("coefficient_pair", meshes, pair, mu_probes, threshold, tol, cluster_tol, False,
                    summary, sensitivity_meshes)


def _check_ball_inside(mesh: Mesh, ball) -> None:
    (cx, cy), rad = ball
    d = np.hypot(cx, cy)
    inner = np.hypot(*mesh.vertices[mesh.obstacle_edges].reshape(-1, 2).T).max()
    if mesh.trunc_radius is not None and d + rad >= mesh.trunc_radius:
        raise OrderingError("strict ball leaves the truncated domain")
    if d - rad <= inner:
        raise OrderingError("strict ball intersects the obstacle")


def neumann_reduction_identical(mesh: Mesh, V: Potential) -> bool:
    """Mixed assembly with omega = whole obstacle, alpha = 0 equals the Neumann path bitwise."""
    bc = BoundarySpec.full(0.0)
    a = assembly.mixed_system(tag_boundary(mesh, bc), V, bc)
    b = assembly.neumann_system(mesh, V)
    return (np.array_equal(a.dof.free, b.dof.free) and (a.A != b.A).nnz == 0
            and (a.M != b.M).nnz == 0)


def dirichlet_counts_by_radius(build: Callable[[float], Mesh], V: Potential, radii, mu: float) -> list[int]:
    """Inertia counts of the Dirichlet operator below ``mu`` for each truncation radius."""
    from .spectral import inertia_count
    out = []
    for R in radii:
        s = assembly.dirichlet_system(build(R), V)
        out.append(inertia_count(s.A, s.M, mu))
    return out
