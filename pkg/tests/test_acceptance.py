"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints.
Run directly with ``python3 tests/test_acceptance.py`` or via pytest.
"""
import time

import numpy as np
import pytest
import scipy.linalg as sl

from conftest import record_acceptance
from exterior_spectra import assembly
from exterior_spectra.cli import certify, radius_sweep
from exterior_spectra.comparison import richardson_extrapolate
from exterior_spectra.config import PRESETS, load
from exterior_spectra.fields import RadialWell
from exterior_spectra.geometry import Mesh, Tag, build_mesh, tag_boundary
from exterior_spectra.radial import RadialProblem, ground_state
from exterior_spectra.spectral import eigs_below, inertia_count

# Richardson limits of the radial ground state over n_r = 512, 1024, 2048 (frozen)
GOLDEN_DIRICHLET = -3.104779776712072
GOLDEN_NEUMANN = -6.1790549321058394
ORACLE_NR = (512, 1024, 2048)
WELL = RadialWell(8.0, 1.0, 2.0)
FULL_RUNS = ("neumann-vs-dirichlet-well", "mixed-robin-halfcircle",
             "coefficient-potential-bump", "coefficient-matrix-bump")
WEAK_IS_MIXED = ("neumann-vs-dirichlet-well", "mixed-robin-halfcircle", "slow-decay", "free-laplacian")


@pytest.fixture(scope="module")
def full():
    """Certificates on the configured levels, computed once per preset."""
    cache = {}

    def get(name):
        if name not in cache:
            t0 = time.perf_counter()
            cache[name] = (certify(load(name), sensitivity=False), time.perf_counter() - t0)
        return cache[name]
    return get


@pytest.fixture(scope="module")
def coarse():
    """Certificates on levels 0 and 1 for every preset, with wall times."""
    out = {}
    for name in PRESETS:
        t0 = time.perf_counter()
        cert = certify(load(name), levels=[0, 1], sensitivity=False)
        out[name] = (cert, time.perf_counter() - t0)
    return out


def test_criterion_1_exact_ordering(coarse, full):
    bad, slow = [], []
    for name, (cert, secs) in coarse.items():
        if not cert.ordering_holds:
            bad.append(f"{name} levels 0-1")
        if secs >= 60.0:
            slow.append(f"{name} {secs:.1f}s")
    for name in FULL_RUNS:
        cert, _ = full(name)
        bad += [f"{name} level {m.level}" for m in cert.meshes if not m.ordering_holds]
    worst = max(coarse.values(), key=lambda c: c[1])[1]
    ok = not bad and not slow
    record_acceptance(1, ok, f"ordering on every preset and level; slowest levels 0-1 run {worst:.1f}s"
                      + (f"; violations {bad}" if bad else "") + (f"; over 1 min {slow}" if slow else ""))
    assert ok


def test_criterion_2_counting_inequality(full):
    lines, ok = [], True
    for name in ("neumann-vs-dirichlet-well", "mixed-robin-halfcircle"):
        cert, _ = full(name)
        for m in cert.meshes:
            probed = {round(c.mu, 12) for c in m.counts}
            covered = all(round(v, 12) in probed for v, _ in m.multiplicities)
            holds = m.counting_holds and covered and len(m.counts) > 0
            ok &= holds
            lines.append(f"{name}@{m.level}:{len(m.counts)} probes")
    record_acceptance(2, ok, "N_weak(open) >= N_strong(closed) at every Dirichlet eigenvalue; " + ", ".join(lines))
    assert ok


def test_criterion_3_strict_gap_and_oracle(full):
    cert, secs = full("neumann-vs-dirichlet-well")
    v = cert.verdict_for(1)
    ex = v.extrapolation
    strict = v.verdict == "strict" and ex.limit > 3.0 * ex.error
    seq = {bc: richardson_extrapolate([(11.0 / n, ground_state(RadialProblem(1.0, 12.0, WELL, bc, n_r=n)))
                                       for n in ORACLE_NR]).limit for bc in ("dirichlet", "neumann")}
    pinned = (seq["dirichlet"] == pytest.approx(GOLDEN_DIRICHLET, rel=1e-12)
              and seq["neumann"] == pytest.approx(GOLDEN_NEUMANN, rel=1e-12))
    fine = cert.meshes[-1]
    err_d = abs(fine.strong.eigenvalues[0] - GOLDEN_DIRICHLET) / abs(GOLDEN_DIRICHLET)
    err_n = abs(fine.weak.eigenvalues[0] - GOLDEN_NEUMANN) / abs(GOLDEN_NEUMANN)
    ok = strict and pinned and err_d < 1e-3 and err_n < 1e-3 and secs <= 600
    record_acceptance(3, ok, f"k=1 gap {ex.limit:.6g} +- {ex.error:.2g} ({v.verdict}); oracle rel err "
                      f"D {err_d:.2e} N {err_n:.2e}; {secs:.0f}s")
    assert ok


def test_criterion_4_obstacle_traces(coarse, full):
    norms = []
    for name in WEAK_IS_MIXED:
        certs = [coarse[name][0]] + ([full(name)[0]] if name in FULL_RUNS else [])
        for cert in certs:
            norms += [m.trace_norms for m in cert.meshes if m.trace_norms is not None]
    values = np.concatenate(norms) if norms else np.empty(0)
    ok = len(values) > 0 and bool(np.all(values > 1e-6))
    record_acceptance(4, ok, f"{len(values)} weak eigenvectors, smallest obstacle trace norm "
                      f"{values.min():.3e}")
    assert ok


def test_criterion_5_count_growth():
    cfg = load("slow-decay")
    assert tuple(cfg.radii) == (8.0, 16.0, 32.0, 64.0) and cfg.count_mu == -1e-3
    counts = radius_sweep(cfg)
    ok = all(bool(np.all(np.diff(c) >= 0)) and c[-1] > c[0] for c in counts.values())
    record_acceptance(5, ok, f"Dirichlet counts below -1e-3 over R=8,16,32,64: {counts}")
    assert ok


def test_criterion_6_coefficient_pairs(full):
    parts, ok = [], True
    for name in ("coefficient-potential-bump", "coefficient-matrix-bump"):
        cert, _ = full(name)
        v = cert.verdict_for(1)
        good = cert.ordering_holds and cert.counting_holds and v.verdict == "strict"
        ok &= good
        parts.append(f"{name} k=1 gap {v.extrapolation.limit:.5g} +- {v.extrapolation.error:.1g} ({v.verdict})")
    record_acceptance(6, ok, "; ".join(parts))
    assert ok


def _systems(cfg, mesh):
    if cfg.kind == "coefficient_pair":
        return [assembly.dirichlet_system(mesh, f.potential, f.coefficient) for f in cfg.fields]
    V = cfg.fields[0].potential
    weak = (assembly.neumann_system(mesh, V) if cfg.bc.is_neumann
            else assembly.mixed_system(tag_boundary(mesh, cfg.bc, require_omega=True), V, cfg.bc))
    return [assembly.dirichlet_system(mesh, V), weak]


def test_criterion_7_solver_consistency():
    n_sys, n_probe, worst, bad = 0, 0, 0.0, []
    for name in PRESETS:
        cfg = load(name)
        for level in (0, 1):
            mesh = build_mesh(cfg.mesh_spec(level))
            for s in _systems(cfg, mesh):
                if s.n > 600:
                    continue
                n_sys += 1
                dense = sl.eigh(s.A.toarray(), s.M.toarray(), eigvals_only=True)
                ref = dense[dense < cfg.threshold]
                for cutoff in (0, 600):  # forced shift-invert, default dense path
                    got = eigs_below(s.A, s.M, cfg.threshold, dense_cutoff=cutoff).eigenvalues
                    if len(got) != len(ref):
                        bad.append(f"{name}@{level} count")
                        continue
                    if len(ref):
                        rel = float(np.max(np.abs(got - ref) / np.abs(ref)))
                        worst = max(worst, rel)
                        if rel > 1e-9:
                            bad.append(f"{name}@{level} rel {rel:.1e}")
                probes = [cfg.threshold] + list(0.5 * (dense[:-1] + dense[1:])[dense[1:] < cfg.threshold])
                for mu in probes:
                    n_probe += 1
                    if len(eigs_below(s.A, s.M, mu, dense_cutoff=0)) != inertia_count(s.A, s.M, mu):
                        bad.append(f"{name}@{level} probe {mu:.4g}")
    ok = n_sys > 0 and not bad
    record_acceptance(7, ok, f"{n_sys} systems, {n_probe} probes, worst relative deviation {worst:.1e}"
                      + (f"; failures {bad}" if bad else ""))
    assert ok


def test_criterion_8_reference_elements():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tri = Mesh(v, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]),
               np.array([Tag.OMEGA, Tag.OMEGA_PRIME, Tag.OMEGA_PRIME], dtype=np.int8))
    K = assembly.assemble_stiffness(tri).toarray()
    M = assembly.assemble_mass(tri).toarray()
    B = assembly.assemble_robin_boundary(tri, alpha=1.0).toarray()
    k_ref = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    m_ref = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0
    b_ref = np.zeros((3, 3))
    b_ref[:2, :2] = (1.0 / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
    ok = np.array_equal(K, k_ref) and np.array_equal(M, m_ref) and np.array_equal(B, b_ref)
    record_acceptance(8, ok, "stiffness, mass and edge Robin matrices bit-identical to hand values")
    assert ok


def test_criterion_9_convergence_orders(full):
    orders = {}
    for bc in ("dirichlet", "neumann"):
        orders[f"oracle {bc}"] = richardson_extrapolate(
            [(11.0 / n, ground_state(RadialProblem(1.0, 12.0, WELL, bc, n_r=n))) for n in ORACLE_NR]).order
    cert, _ = full("neumann-vs-dirichlet-well")
    orders["fem dirichlet"] = richardson_extrapolate(
        [(m.h, float(m.strong.eigenvalues[0])) for m in cert.meshes]).order
    orders["fem neumann"] = richardson_extrapolate(
        [(m.h, float(m.weak.eigenvalues[0])) for m in cert.meshes]).order
    ok = (all(p is not None and 1.8 <= p <= 2.2 for k, p in orders.items() if k.startswith("oracle"))
          and all(p is not None and 1.7 <= p <= 2.3 for k, p in orders.items() if k.startswith("fem")))
    record_acceptance(9, ok, "observed orders " + ", ".join(f"{k} {p:.3f}" if p else f"{k} n/a"
                                                           for k, p in orders.items()))
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
