import numpy as np
import pytest

from exterior_spectra.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, EXIT_VERDICT, RunResult, main
from exterior_spectra.config import (PRESETS, ConfigError, evaluate, list_presets, load,
                                     parse_config, parse_text)
from exterior_spectra.fields import BallBump, PotentialSum, RadialWell

TINY_MIXED = """
name = tiny-mixed
comparison.kind = dirichlet_vs_mixed
domain.obstacle = disk(1)
domain.trunc_radius = 12
domain.grading = 2
domain.n_theta = 16
domain.n_r = 16
domain.interfaces = 2
bc.omega = [(0, pi)]
bc.alpha = 1
field.potential = radial_well(8, 1, 2)
mesh.levels = 0
solver.threshold = -0.05
certify.strict_k = none
truncation.sensitivity = 0
"""


def read_summary(path):
    return dict(line.split(" = ", 1) for line in path.read_text().splitlines())


def test_list_presets_cover_the_named_scenarios(capsys):
    names = [n for n, _ in list_presets()]
    assert len(names) >= 5
    for required in ("neumann-vs-dirichlet-well", "mixed-robin-halfcircle", "slow-decay",
                     "coefficient-potential-bump", "coefficient-matrix-bump"):
        assert required in names
    assert all(desc for _, desc in list_presets())
    assert main(["list-presets"]) == EXIT_OK
    assert "slow-decay:" in capsys.readouterr().out


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_is_a_valid_config(name):
    cfg = load(name)
    assert cfg.name == name
    assert cfg.probes is None or all(mu < 0 for mu in cfg.probes)


def test_expression_evaluation():
    V = evaluate("radial_well(8, 1, 2) + ball_bump((1.5, 0), 0.3, 1)")
    assert isinstance(V, PotentialSum) and V.terms[0] == RadialWell(8, 1, 2)
    assert isinstance(V.terms[1], BallBump)
    assert evaluate("[(0, pi / 2)]") == ((0, np.pi / 2),)
    with pytest.raises(ValueError):
        evaluate("__import__('os').system('true')")
    with pytest.raises(ValueError):
        evaluate("radial_well(8, 1)")


@pytest.mark.parametrize("text, key", [
    (TINY_MIXED + "bogus.key = 1\n", "unknown key"),
    (TINY_MIXED.replace("domain.obstacle = disk(1)\n", ""), "domain.obstacle"),
    (TINY_MIXED + "probes.mu = -1, 0.5\n", "probes.mu"),
    (TINY_MIXED.replace("dirichlet_vs_mixed", "coefficient_pair"), "field2"),
    (TINY_MIXED.replace("bc.omega = [(0, pi)]", "bc.omega = none"), "bc.omega"),
    (TINY_MIXED.replace("trunc_radius = 12", "trunc_radius = 0.5"), "domain"),
    (TINY_MIXED.replace("mesh.levels = 0", "mesh.levels = 2, 1"), "mesh.levels"),
    (TINY_MIXED + "name = again\n", "duplicate"),
])
def test_config_errors_name_the_field(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


def test_config_error_reports_line():
    with pytest.raises(ConfigError, match=r"line \d+: field.potential"):
        parse_config(TINY_MIXED.replace("radial_well(8, 1, 2)", "radial_well(8, 1, )x"))


def test_comments_and_blank_lines():
    raw = parse_text("# header\n\nname = a  # trailing\n")
    assert raw == {"name": ("a", 3)}


def test_invalid_config_file_exits_nonzero(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text(TINY_MIXED + "solver.threshold = 1\n")
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "solver.threshold" in capsys.readouterr().err
    assert main(["run", "no-such-preset"]) == EXIT_CONFIG


def test_run_config_file(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY_MIXED)
    out = tmp_path / "out"
    assert main(["run", str(p), "--out", str(out)]) == EXIT_OK
    s = read_summary(out / "summary.txt")
    assert s["verdict.ordering"] == "holds" and s["verdict.counting"] == "holds"
    assert s["verdict.trace"] == "holds"
    gaps = (out / "gaps.csv").read_text().splitlines()
    assert gaps[0] == "level,h,k,weak,strong,gap" and len(gaps) > 1
    # 17 significant digits
    assert len(gaps[1].split(",")[3].lstrip("-").replace(".", "").lstrip("0")) >= 15
    assert "exact discrete invariants" in (out / "report.txt").read_text()


def test_vacuous_preset_exits_zero(tmp_path):
    out = tmp_path / "free"
    assert main(["run", "free-laplacian", "--out", str(out)]) == EXIT_OK
    s = read_summary(out / "summary.txt")
    assert s["status"] == "nothing to compare"
    assert {v for k, v in s.items() if k.startswith("verdict.")} == {"vacuous"}


def test_slow_decay_counts_and_reproducibility(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "slow-decay", "--out", str(a)]) == EXIT_OK
    assert main(["run", "slow-decay", "--out", str(b)]) == EXIT_OK
    rows = (a / "radii.csv").read_text().splitlines()[1:]
    counts = [int(r.split(",")[3]) for r in rows if r.startswith("0,")]
    assert counts == [0, 1, 3, 4]
    for name in ("gaps.csv", "counts.csv", "traces.csv", "strict.csv", "radii.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def _result(verdicts):
    return RunResult(config=None, certificate=None, verdicts=verdicts)


@pytest.mark.parametrize("verdicts, status", [
    ({"ordering": "holds", "counting": "holds", "strict": "holds"}, EXIT_OK),
    ({"ordering": "vacuous", "counting": "vacuous"}, EXIT_OK),
    ({"ordering": "holds", "counting": "holds", "strict": "inconclusive"}, EXIT_VERDICT),
    ({"ordering": "holds", "counting": "violated", "strict": "holds"}, EXIT_INVARIANT),
    ({"ordering": "violated", "counting": "holds", "strict": "inconclusive"}, EXIT_INVARIANT),
    ({"ordering": "holds", "counting": "holds", "oracle": "failed"}, EXIT_VERDICT),
])
def test_exit_status_contract(verdicts, status):
    assert _result(verdicts).exit_status == status


def test_export_mesh(tmp_path):
    p = tmp_path / "m.txt"
    assert main(["export-mesh", "mixed-robin-halfcircle", "--level", "0", "--out", str(p)]) == EXIT_OK
    head = p.read_text().splitlines()[0]
    assert head == "vertices 272 triangles 512 edges 32"
    assert sum(ln.endswith(" omega") for ln in p.read_text().splitlines()) == 8


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", "neumann-vs-dirichlet-well", "--n-r", "512", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "dirichlet n_r=512" in out and "neumann n_r=512" in out
    lines = (tmp_path / "oracle_dirichlet_512.csv").read_text().splitlines()
    assert lines[0] == "m,index,eigenvalue,multiplicity,n_r" and len(lines) == 5


def test_oracle_rejects_non_radial(tmp_path):
    assert main(["oracle", "coefficient-potential-bump", "--out", str(tmp_path)]) == EXIT_CONFIG
