"""Experiment configuration: flat ``section.key = value`` text and named presets.

Values are numbers, comma-separated number lists, words, or small
expressions built from the field constructors below, e.g.::

    field.potential = radial_well(8, 1, 2) + ball_bump((1.5, 0), 0.3, 1)
    bc.omega = [(0, pi)]

Expressions are evaluated by walking the ``ast`` of the value; only
literals, arithmetic, tuples/lists, ``pi`` and the whitelisted constructors
are accepted.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, replace
from pathlib import Path

from .fields import (BallBump, BallScaledCoefficient, CoefficientField, ConstantCoefficient,
                     ConstantPotential, EllipticFields, Potential, RadialPower, RadialWell, ZeroPotential)
from .geometry import BoundarySpec, Disk, DomainSpec, Polygon

KINDS = ("dirichlet_vs_neumann", "dirichlet_vs_mixed", "coefficient_pair")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        where += f"{key}: " if key else ""
        super().__init__(where + message)
        self.line = line
        self.key = key


# ---------------------------------------------------------------------------
# expression evaluation

_CONSTRUCTORS = {
    "zero": ZeroPotential,
    "constant": ConstantPotential,
    "radial_power": RadialPower,
    "radial_well": RadialWell,
    "ball_bump": BallBump,
    "identity": ConstantCoefficient,
    "constant_coefficient": ConstantCoefficient,
    "ball_scaled": BallScaledCoefficient,
    "disk": Disk,
    "polygon": lambda *v: Polygon(tuple(v)),
}
_NAMES = {"pi": math.pi}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, (ast.Tuple, ast.List)):
        return tuple(_eval(e) for e in node.elts)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _CONSTRUCTORS:
        args = [_eval(a) for a in node.args]
        kwargs = {k.arg: _eval(k.value) for k in node.keywords}
        return _CONSTRUCTORS[node.func.id](*args, **kwargs)
    raise ValueError(f"unsupported expression {ast.dump(node)[:60]}")


def evaluate(text: str):
    """Evaluate a configuration value expression."""
    try:
        return _eval(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc
    except TypeError as exc:
        raise ValueError(f"bad arguments in {text!r}: {exc}") from exc


def _numbers(text: str) -> tuple[float, ...]:
    if not text.strip():
        return ()
    v = evaluate(text if "," in text else text + ",")
    return tuple(float(x) for x in v)


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    domain: DomainSpec
    bc: BoundarySpec
    fields: tuple[EllipticFields, ...]
    levels: tuple[int, ...]
    description: str = ""
    probes: tuple[float, ...] | None = None
    threshold: float | None = None
    tol: float = 1e-8
    cluster_tol: float = 1e-8
    strict_k: str = "1"                       # "1,2", "all" or "none"
    strict_ball: tuple | None = None
    radii: tuple[float, ...] = ()             # Dirichlet count sweep
    count_mu: float = -1e-3
    sensitivity: float = 1.5                  # extra radius factor, 0 disables
    oracle_check: str = "off"                 # "ground" or "off"
    oracle_n_r: int = 4096
    oracle_rel_tol: float = 1e-3
    output_dir: str = "out"

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown comparison kind {self.kind!r}", key="comparison.kind")
        need = 2 if self.kind == "coefficient_pair" else 1
        if len(self.fields) != need:
            raise ConfigError(f"{self.kind} needs {need} field spec(s), got {len(self.fields)}",
                              key="field2.potential")
        if self.kind == "coefficient_pair" and self.strict_ball is None:
            raise ConfigError("coefficient_pair needs a strict ball", key="witness.strict_ball")
        if self.kind == "dirichlet_vs_mixed" and not self.bc.omega:
            raise ConfigError("omega must be nonempty for a mixed comparison", key="bc.omega")
        if self.kind == "dirichlet_vs_neumann" and not self.bc.is_neumann:
            raise ConfigError("dirichlet_vs_neumann needs omega = full and alpha = 0", key="bc.omega")
        if self.probes is not None and any(mu >= 0 for mu in self.probes):
            raise ConfigError("all probes must be < 0", key="probes.mu")
        if self.threshold is not None and self.threshold > 0:
            raise ConfigError("threshold must be <= 0", key="solver.threshold")
        if not self.levels or any(L < 0 for L in self.levels) or list(self.levels) != sorted(set(self.levels)):
            raise ConfigError("levels must be a nonempty increasing list of integers >= 0", key="mesh.levels")
        if self.strict_k not in ("all", "none"):
            try:
                ks = [int(k) for k in self.strict_k.split(",")]
            except ValueError:
                raise ConfigError(f"bad strict index list {self.strict_k!r}", key="certify.strict_k")
            if any(k < 1 for k in ks):
                raise ConfigError("strict indices start at 1", key="certify.strict_k")
        if self.oracle_check not in ("ground", "off"):
            raise ConfigError("oracle.check must be 'ground' or 'off'", key="oracle.check")
        try:
            self.domain.validate()
        except ValueError as exc:
            raise ConfigError(str(exc), key="domain") from exc

    def mesh_spec(self, level: int, radius: float | None = None) -> DomainSpec:
        return replace(self.domain, refinement_level=level,
                       trunc_radius=self.domain.trunc_radius if radius is None else radius)

    def strict_indices(self, available: int) -> list[int]:
        if self.strict_k == "none":
            return []
        if self.strict_k == "all":
            return list(range(1, available + 1))
        return [int(k) for k in self.strict_k.split(",")]


_DEFAULTS = {
    "domain.grading": "1",
    "domain.n_theta": "16",
    "domain.n_r": "8",
    "domain.interfaces": "",
    "bc.omega": "full",
    "bc.alpha": "0",
    "field.coefficient": "identity()",
    "field.potential": "zero()",
    "mesh.levels": "0",
}

_KEYS = {
    "name", "description", "comparison.kind", "domain.obstacle", "domain.trunc_radius",
    "domain.grading", "domain.n_theta", "domain.n_r", "domain.interfaces", "bc.omega",
    "bc.alpha", "field.potential", "field.coefficient", "field2.potential",
    "field2.coefficient", "witness.strict_ball", "mesh.levels", "probes.mu", "solver.threshold",
    "solver.tol", "solver.cluster_tol", "certify.strict_k", "truncation.radii",
    "truncation.count_mu", "truncation.sensitivity", "oracle.check", "oracle.n_r",
    "oracle.rel_tol", "output.dir",
}


def parse_text(text: str) -> dict[str, tuple[str, int]]:
    """``key -> (raw value, line number)``; ``#`` starts a comment."""
    out: dict[str, tuple[str, int]] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=n)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=n)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", line=n)
        out[key] = (value, n)
    return out


def _omega(text: str):
    t = text.strip()
    if t == "full":
        return ((0.0, 2 * math.pi),)
    if t in ("none", ""):
        return ()
    v = evaluate(t)
    if v and not isinstance(v[0], tuple):
        v = (v,)
    return tuple(tuple(float(x) for x in iv) for iv in v)


def from_mapping(raw: dict[str, tuple[str, int]]) -> ExperimentConfig:
    merged = {k: (v, None) for k, v in _DEFAULTS.items()}
    merged.update(raw)

    def get(key, conv=str, default=None, required=False):
        if key not in merged:
            if required:
                raise ConfigError("missing required key", key=key)
            return default
        text, line = merged[key]
        try:
            return conv(text)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), line=line, key=key) from exc

    def typed(cls):
        def conv(text):
            v = evaluate(text)
            if not isinstance(v, cls):
                raise ValueError(f"expected a {cls.__name__} expression, got {text!r}")
            return v
        return conv

    def potential(text):
        v = evaluate(text)
        if isinstance(v, (int, float)):
            v = ConstantPotential(float(v))
        if not isinstance(v, Potential):
            raise ValueError(f"not a potential: {text!r}")
        return v

    def ints(text):
        return tuple(int(x) for x in _numbers(text))

    fields_ = [EllipticFields(get("field.coefficient", typed(CoefficientField)),
                              get("field.potential", potential))]
    if "field2.potential" in merged or "field2.coefficient" in merged:
        fields_.append(EllipticFields(
            get("field2.coefficient", typed(CoefficientField), fields_[0].coefficient),
            get("field2.potential", potential, fields_[0].potential)))

    domain = DomainSpec(
        obstacle=get("domain.obstacle", typed((Disk, Polygon)), required=True),
        trunc_radius=get("domain.trunc_radius", float, required=True),
        grading=get("domain.grading", float),
        n_theta=get("domain.n_theta", int),
        n_r=get("domain.n_r", int),
        interfaces=get("domain.interfaces", _numbers),
    )
    probes = get("probes.mu", _numbers)
    ball = get("witness.strict_ball", evaluate)
    if ball is not None:
        ball = ((float(ball[0][0]), float(ball[0][1])), float(ball[1]))
    cfg = ExperimentConfig(
        name=get("name", str, "experiment"),
        description=get("description", str, ""),
        kind=get("comparison.kind", str, required=True),
        domain=domain,
        bc=get("bc.omega", lambda t: BoundarySpec(_omega(t), get("bc.alpha", float))),
        fields=tuple(fields_),
        levels=get("mesh.levels", ints),
        probes=probes if probes else None,
        threshold=get("solver.threshold", float),
        tol=get("solver.tol", float, 1e-8),
        cluster_tol=get("solver.cluster_tol", float, 1e-8),
        strict_k=get("certify.strict_k", lambda t: t.replace(" ", ""), "1"),
        strict_ball=ball,
        radii=get("truncation.radii", _numbers, ()),
        count_mu=get("truncation.count_mu", float, -1e-3),
        sensitivity=get("truncation.sensitivity", float, 1.5),
        oracle_check=get("oracle.check", str, "off"),
        oracle_n_r=get("oracle.n_r", int, 4096),
        oracle_rel_tol=get("oracle.rel_tol", float, 1e-3),
        output_dir=get("output.dir", str, "out"),
    )
    cfg.validate()
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    return from_mapping(parse_text(text))


def load(name_or_path: str) -> ExperimentConfig:
    """A preset name or the path of a configuration file."""
    if name_or_path in PRESETS:
        return parse_config(PRESETS[name_or_path])
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigError(f"{name_or_path!r} is neither a preset nor a readable file")
    return parse_config(path.read_text())


def to_text(raw: dict[str, tuple[str, int]]) -> str:
    return "".join(f"{k} = {v}\n" for k, (v, _) in raw.items())


# ---------------------------------------------------------------------------
# presets

_WELL_DOMAIN = """
domain.obstacle = disk(1)
domain.trunc_radius = 12
domain.grading = 2
domain.n_theta = 16
domain.n_r = 16
domain.interfaces = 2
"""

PRESETS: dict[str, str] = {
    "neumann-vs-dirichlet-well": """
name = neumann-vs-dirichlet-well
description = Strict Neumann < Dirichlet inequality for every bound state of a radial well
comparison.kind = dirichlet_vs_neumann
bc.omega = full
bc.alpha = 0
field.potential = radial_well(8, 1, 2)
mesh.levels = 2, 3, 4
solver.threshold = -0.05
certify.strict_k = all
oracle.check = ground
""" + _WELL_DOMAIN,
    "mixed-robin-halfcircle": """
name = mixed-robin-halfcircle
description = Counting-function inequality and strict Robin < Dirichlet gap with alpha = 1 on half the obstacle
comparison.kind = dirichlet_vs_mixed
bc.omega = [(0, pi)]
bc.alpha = 1
field.potential = radial_well(8, 1, 2)
mesh.levels = 2, 3, 4
solver.threshold = -0.05
certify.strict_k = 1
""" + _WELL_DOMAIN,
    "slow-decay": """
name = slow-decay
description = Infinitely many bound states for V = -r^-1.5: Dirichlet counts grow with the truncation radius
comparison.kind = dirichlet_vs_neumann
domain.obstacle = disk(1)
domain.trunc_radius = 16
domain.grading = 2
domain.n_theta = 16
domain.n_r = 16
field.potential = radial_power(1, 0.5, 1)
mesh.levels = 0, 1
solver.threshold = -0.001
certify.strict_k = none
truncation.radii = 8, 16, 32, 64
truncation.count_mu = -0.001
""",
    "coefficient-potential-bump": """
name = coefficient-potential-bump
description = Ordered potentials V2 = V1 + ball indicator give strictly ordered Dirichlet eigenvalues
comparison.kind = coefficient_pair
field.potential = radial_well(8, 1, 2)
field2.potential = radial_well(8, 1, 2) + ball_bump((1.5, 0), 0.3, 1)
witness.strict_ball = ((1.5, 0), 0.3)
mesh.levels = 2, 3, 4
solver.threshold = -0.05
certify.strict_k = 1
""" + _WELL_DOMAIN,
    "coefficient-matrix-bump": """
name = coefficient-matrix-bump
description = Ordered coefficient matrices a2 = (1 + 0.5 chi_ball) a1 give strictly ordered Dirichlet eigenvalues
comparison.kind = coefficient_pair
field.potential = radial_well(8, 1, 2)
field2.coefficient = ball_scaled(identity(), (1.5, 0), 0.3, 0.5)
witness.strict_ball = ((1.5, 0), 0.3)
mesh.levels = 2, 3, 4
solver.threshold = -0.05
certify.strict_k = 1
""" + _WELL_DOMAIN,
    "free-laplacian": """
name = free-laplacian
description = Zero potential: no bound states, so every comparison holds vacuously
comparison.kind = dirichlet_vs_neumann
domain.obstacle = disk(1)
domain.trunc_radius = 4
field.potential = zero()
mesh.levels = 0, 1, 2
solver.threshold = 0
certify.strict_k = all
""",
}


def list_presets() -> list[tuple[str, str]]:
    return [(name, parse_config(text).description) for name, text in PRESETS.items()]


def preset_mapping(name: str) -> dict[str, tuple[str, int]]:
    return parse_text(PRESETS[name])
