"""Command-line experiment runner.

``run`` executes a preset or configuration file and writes ``report.txt``,
CSV tables and ``summary.txt`` (key = value) to the output directory. The
exit status is 0 iff every requested verdict is ``holds`` or ``vacuous``;
a violated exact invariant (ordering or counting) exits with 4.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import comparison, radial
from .comparison import GapCertificate
from .config import ConfigError, ExperimentConfig, list_presets, load
from .geometry import Disk, build_mesh, validate_mesh, write_mesh
from .spectral import SpectralError

log = logging.getLogger("exterior_spectra")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 1, 2, 3, 4
PASSING = ("holds", "vacuous")
EXACT = ("ordering", "counting")


def _g(x) -> str:
    return f"{x:.17g}"


@dataclass
class RunResult:
    config: ExperimentConfig
    certificate: GapCertificate
    verdicts: dict[str, str]
    radius_counts: dict[int, list[int]] = field(default_factory=dict)
    oracle: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    @property
    def exit_status(self) -> int:
        if any(self.verdicts.get(k) == "violated" for k in EXACT):
            return EXIT_INVARIANT
        return EXIT_OK if all(v in PASSING for v in self.verdicts.values()) else EXIT_VERDICT


# ---------------------------------------------------------------------------
# execution


def _meshes(cfg: ExperimentConfig, levels=None):
    out = []
    for L in levels if levels is not None else cfg.levels:
        mesh = build_mesh(cfg.mesh_spec(L))
        validate_mesh(mesh)
        out.append(mesh)
    return out


def certify(cfg: ExperimentConfig, levels=None, sensitivity: bool = True) -> GapCertificate:
    """Run the configured comparison on ``levels`` (default: the configured ones)."""
    meshes = _meshes(cfg, levels)
    extra = []
    if sensitivity and cfg.sensitivity > 0:
        R = cfg.domain.trunc_radius * cfg.sensitivity
        extra = [build_mesh(cfg.mesh_spec(meshes[0].level, R))]
    common = dict(mu_probes=list(cfg.probes) if cfg.probes else None, threshold=cfg.threshold,
                  tol=cfg.tol, cluster_tol=cfg.cluster_tol, sensitivity_meshes=extra)
    if cfg.kind == "coefficient_pair":
        return comparison.compare_coefficient_pairs(meshes, cfg.fields[0], cfg.fields[1],
                                                    cfg.strict_ball, **common)
    return comparison.compare_dirichlet_vs_mixed(meshes, cfg.fields[0].potential, cfg.bc, **common)


def radius_sweep(cfg: ExperimentConfig, levels=None) -> dict[int, list[int]]:
    """Dirichlet counts below ``count_mu`` per truncation radius, for each level."""
    V = cfg.fields[0].potential
    out = {}
    for L in levels if levels is not None else cfg.levels:
        out[L] = comparison.dirichlet_counts_by_radius(
            lambda R: build_mesh(cfg.mesh_spec(L, R)), V, cfg.radii, cfg.count_mu)
    return out


def oracle_problems(cfg: ExperimentConfig, n_r: int | None = None):
    """Radial problems for the strong (Dirichlet) and weak operators, or ``None``."""
    V = cfg.fields[0].potential
    if not (isinstance(cfg.domain.obstacle, Disk) and getattr(V, "radial", False)
            and cfg.kind != "coefficient_pair" and cfg.bc.covers_boundary):
        return None
    n_r = n_r or cfg.oracle_n_r
    r0, R = cfg.domain.obstacle.radius, cfg.domain.trunc_radius
    weak_bc = "neumann" if cfg.bc.alpha == 0 else "robin"
    return (radial.RadialProblem(r0, R, V, "dirichlet", n_r=n_r),
            radial.RadialProblem(r0, R, V, weak_bc, cfg.bc.alpha, n_r=n_r))


def _oracle_ground(cfg: ExperimentConfig, cert: GapCertificate):
    probs = oracle_problems(cfg)
    if probs is None:
        raise ConfigError("oracle check needs a disk obstacle, a radial potential and full omega",
                          key="oracle.check")
    fine = cert.meshes[-1]
    out = {}
    for name, p, res in (("strong", probs[0], fine.strong), ("weak", probs[1], fine.weak)):
        ref = radial.ground_state(p)
        fem = float(res.eigenvalues[0]) if len(res) else float("nan")
        out[name] = (fem, ref, abs(fem - ref) / abs(ref))
    return out


def _strict_verdict(cfg: ExperimentConfig, cert: GapCertificate) -> str | None:
    if cert.status == "nothing to compare":
        return "vacuous"
    available = len(cert.meshes[-1].pairs)
    ks = cfg.strict_indices(available)
    if not ks:
        return None
    worst = "holds"
    for k in ks:
        v = cert.verdict_for(k)
        if v is None or k > available:
            return "missing"
        if v.verdict != "strict":
            worst = v.verdict
    return worst


def execute(cfg: ExperimentConfig) -> RunResult:
    cert = certify(cfg)
    verdicts: dict[str, str] = {}
    any_pairs = any(m.pairs for m in cert.meshes)
    verdicts["ordering"] = ("holds" if cert.ordering_holds else "violated") if any_pairs else "vacuous"
    any_counts = any(m.counts for m in cert.meshes)
    verdicts["counting"] = ("holds" if cert.counting_holds else "violated") if any_counts else "vacuous"
    if cfg.kind != "coefficient_pair":
        verdicts["trace"] = ("vacuous" if cert.min_trace_norm is None
                             else "holds" if cert.trace_holds else "violated")
    strict = _strict_verdict(cfg, cert)
    if strict is not None:
        verdicts["strict"] = strict
    counts = {}
    if cfg.radii:
        counts = radius_sweep(cfg)
        ok = all(all(np.diff(c) >= 0) and c[-1] > c[0] for c in counts.values())
        verdicts["count_growth"] = "holds" if ok else "violated"
    oracle = {}
    if cfg.oracle_check == "ground":
        if cert.status == "nothing to compare":
            verdicts["oracle"] = "vacuous"
        else:
            oracle = _oracle_ground(cfg, cert)
            ok = all(err <= cfg.oracle_rel_tol for *_, err in oracle.values())
            verdicts["oracle"] = "holds" if ok else "failed"
    return RunResult(cfg, cert, verdicts, counts, oracle)


# ---------------------------------------------------------------------------
# artifacts


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_artifacts(result: RunResult, outdir) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cert, cfg = result.certificate, result.config
    _write_csv(out / "gaps.csv", ["level", "h", "k", "weak", "strong", "gap"],
               [[m.level, _g(m.h), p.k, _g(p.weak), _g(p.strong), _g(p.gap)]
                for m in cert.meshes for p in m.pairs])
    _write_csv(out / "counts.csv",
               ["level", "h", "mu", "n_weak_open", "n_strong_closed", "n_strong_at_mu", "holds"],
               [[m.level, _g(m.h), _g(c.mu), c.n_weak_open, c.n_strong_closed, c.n_strong_at_mu,
                 int(c.holds)] for m in cert.meshes for c in m.counts])
    _write_csv(out / "traces.csv", ["level", "index", "eigenvalue", "trace_norm"],
               [[m.level, j + 1, _g(m.weak.eigenvalues[j]), _g(t)]
                for m in cert.meshes if m.trace_norms is not None
                for j, t in enumerate(m.trace_norms)])
    _write_csv(out / "strict.csv", ["k", "limit", "error", "order", "status", "verdict", "gaps"],
               [[v.k, _g(v.extrapolation.limit) if v.extrapolation else "",
                 _g(v.extrapolation.error) if v.extrapolation else "",
                 _g(v.extrapolation.order) if v.extrapolation and v.extrapolation.order else "",
                 v.extrapolation.status if v.extrapolation else "too_few_meshes", v.verdict,
                 " ".join(_g(g) for g in v.gaps)] for v in cert.strict])
    if result.radius_counts:
        _write_csv(out / "radii.csv", ["level", "radius", "mu", "count"],
                   [[L, _g(R), _g(cfg.count_mu), n] for L, c in result.radius_counts.items()
                    for R, n in zip(cfg.radii, c)])
    (out / "report.txt").write_text(format_report(result))
    (out / "summary.txt").write_text(format_summary(result))


def format_summary(result: RunResult) -> str:
    cert = result.certificate
    lines = {"name": result.config.name, "kind": result.config.kind, "status": cert.status,
             "levels": ",".join(str(m.level) for m in cert.meshes)}
    lines.update({f"verdict.{k}": v for k, v in result.verdicts.items()})
    if cert.meshes and cert.meshes[-1].pairs:
        p = cert.meshes[-1].pairs[0]
        lines["finest.lambda1_weak"] = _g(p.weak)
        lines["finest.lambda1_strong"] = _g(p.strong)
    if cert.min_trace_norm is not None:
        lines["min_trace_norm"] = _g(cert.min_trace_norm)
    for name, (fem, ref, err) in result.oracle.items():
        lines[f"oracle.{name}.fem"] = _g(fem)
        lines[f"oracle.{name}.reference"] = _g(ref)
        lines[f"oracle.{name}.rel_error"] = _g(err)
    lines["exit_status"] = str(result.exit_status)
    return "".join(f"{k} = {v}\n" for k, v in lines.items())


def format_report(result: RunResult) -> str:
    cfg, cert = result.config, result.certificate
    out = [f"experiment {cfg.name}: {cfg.description}", f"kind {cfg.kind}; status {cert.status}",
           f"threshold {_g(cert.summary['threshold'])}", ""]
    out.append("exact discrete invariants")
    for key in ("ordering", "counting", "trace", "count_growth"):
        if key in result.verdicts:
            out.append(f"  {key}: {result.verdicts[key]}")
    out.append("")
    out.append("strictness verdicts (gap > 3 x Richardson error on the finest mesh)")
    for v in cert.strict:
        ex = v.extrapolation
        tail = (f"limit {_g(ex.limit)} error {_g(ex.error)} order {ex.order if ex.order else 'n/a'}"
                if ex else "fewer than 3 meshes")
        out.append(f"  k={v.k}: {v.verdict} ({tail})")
    if "strict" in result.verdicts:
        out.append(f"  requested: {result.verdicts['strict']}")
    for m in cert.meshes:
        out.append("")
        out.append(f"level {m.level}: h={_g(m.h)} free weak={m.n_free_weak} strong={m.n_free_strong}")
        for p in m.pairs:
            out.append(f"  k={p.k} weak={_g(p.weak)} strong={_g(p.strong)} gap={_g(p.gap)}")
        for c in m.counts:
            out.append(f"  mu={_g(c.mu)} N_weak(<mu)={c.n_weak_open} "
                       f"N_strong(<=mu)={c.n_strong_closed} {'holds' if c.holds else 'VIOLATED'}")
        if m.trace_norms is not None and len(m.trace_norms):
            out.append(f"  min trace norm {_g(m.trace_norms.min())}")
    if cert.sensitivity:
        out.append("")
        out.append("truncation sensitivity (reported only)")
        for R, k, gap in cert.sensitivity:
            out.append(f"  R={_g(R)} k={k} gap={_g(gap)}")
    if result.radius_counts:
        out.append("")
        out.append(f"Dirichlet counts below {_g(cfg.count_mu)} by radius {list(cfg.radii)}")
        for L, c in result.radius_counts.items():
            out.append(f"  level {L}: {c}")
    if result.oracle:
        out.append("")
        out.append("radial oracle ground states")
        for name, (fem, ref, err) in result.oracle.items():
            out.append(f"  {name}: fem {_g(fem)} oracle {_g(ref)} rel error {_g(err)}")
    out.append("")
    out.append(f"exit status {result.exit_status}")
    return "\n".join(out) + "\n"


def run(cfg: ExperimentConfig, outdir=None) -> int:
    """Run an experiment, write its artifacts and return the exit status."""
    result = execute(cfg)
    write_artifacts(result, outdir or cfg.output_dir)
    return result.exit_status


# ---------------------------------------------------------------------------
# commands


def _cmd_run(args) -> int:
    cfg = load(args.config)
    try:
        result = execute(cfg)
    except SpectralError as exc:
        print(f"solver failure in {cfg.name}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    outdir = args.out or cfg.output_dir
    write_artifacts(result, outdir)
    for k, v in result.verdicts.items():
        print(f"{k}: {v}")
    print(f"artifacts written to {outdir}")
    return result.exit_status


def _cmd_list(args) -> int:
    for name, desc in list_presets():
        print(f"{name}: {desc}")
    return EXIT_OK


def _cmd_export(args) -> int:
    cfg = load(args.config)
    level = cfg.levels[0] if args.level is None else args.level
    mesh = build_mesh(cfg.mesh_spec(level))
    if cfg.kind == "dirichlet_vs_mixed":
        from .geometry import tag_boundary
        mesh = tag_boundary(mesh, cfg.bc)
    path = Path(args.out or f"{cfg.name}-level{level}.mesh")
    write_mesh(mesh, path)
    print(f"wrote {path} ({mesh.n_vertices} vertices, {mesh.n_triangles} triangles)")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = load(args.config)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mu = cfg.threshold if cfg.threshold is not None else 0.0
    for n_r in args.n_r:
        probs = oracle_problems(cfg, n_r)
        if probs is None:
            raise ConfigError("oracle needs a disk obstacle, a radial potential and full omega")
        for name, p in zip(("dirichlet", probs[1].inner_bc), probs):
            eigs = radial.radial_eigs(p, mu)
            radial.write_csv(out / f"oracle_{name}_{n_r}.csv", eigs, n_r)
            if eigs:
                print(f"{name} n_r={n_r}: ground {_g(eigs[0].value)}, {len(radial.expand(eigs))} below {_g(mu)}")
            else:
                print(f"{name} n_r={n_r}: no eigenvalues below {_g(mu)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exterior-spectra",
                                 description="Eigenvalue comparisons on truncated exterior domains")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a preset or configuration file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: output.dir of the config)")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("list-presets", help="list shipped presets")
    p.set_defaults(func=_cmd_list)
    p = sub.add_parser("export-mesh", help="write the mesh of a configuration")
    p.add_argument("config")
    p.add_argument("--level", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_export)
    p = sub.add_parser("oracle", help="radial oracle eigenvalues for a configuration")
    p.add_argument("config")
    p.add_argument("--n-r", type=int, nargs="+", default=[512, 1024, 2048])
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, radial.OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
