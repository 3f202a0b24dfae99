"""Scenario files: JSON configs naming a catalog system or defining one inline.

Schema (all keys except ``system`` optional)::

    {
      "system": "example_5_5" | {
          "name": "my_sys", "dim": 1,
          "terms": [{"expr": ["x1 + u1*cos(2*pi*t)"], "period": 1.0,
                     "bound": 3.0, "lipschitz": 1.0}, ...],
          "controls": {"lo": [-1.0], "hi": [1.0]},
          "domain": {"lo": [-2.0], "hi": [2.0]}
      },
      "eps": [0.2, 0.1, 0.05, 0.025],
      "x0": [0.0],
      "omega": {"lo": [...], "hi": [...]},
      "grids": {"directions": 128, "quad_nodes": 256, "torus_nodes": 512,
                "control_points": 101, "n_steps": null, "n_samples": 8,
                "table_points": 65},
      "seed": 0,
      "out": "out"
    }

Inline term expressions are sums of products ``c * x_i**a * cos(w t) * u_k``
built from numbers, ``pi``, ``t``, ``x1..xd``, ``u1..uk``, ``+ - * /``,
integer powers and ``cos``/``sin`` of an expression linear in ``t``.  At most
one control factor may appear per product (the system is affine in ``u``).
Missing ``period`` is inferred from the trig frequencies; missing ``bound``
or ``lipschitz`` is estimated by sampling over the domain.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .bounds import estimate_constants
from .setmap import Box, ControlSystem, ControlTerm, control_grid, control_map


class ConfigError(ValueError):
    """Invalid scenario file or inline system definition."""


DEFAULT_GRIDS = {
    "directions": 128,
    "quad_nodes": 256,
    "torus_nodes": 512,
    "control_points": 101,
    "n_steps": None,
    "n_samples": 8,
    "table_points": 65,
}
DEFAULT_EPS = [0.2, 0.1, 0.05, 0.025]


# ---------------------------------------------------------------------------
# expression grammar


_FUNCS = {"cos": np.cos, "sin": np.sin}


class _Checker:
    def __init__(self, dim: int, n_controls: int):
        self.dim = dim
        self.k = n_controls
        self.freqs: set = set()

    def names(self) -> set:
        return ({"t", "pi"} | {f"x{i + 1}" for i in range(self.dim)}
                | {f"u{i + 1}" for i in range(self.k)})

    def deg(self, node, var) -> int:
        """Polynomial degree of ``node`` in the variables selected by ``var``."""
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ConfigError(f"unsupported literal {node.value!r}")
            return 0
        if isinstance(node, ast.Name):
            if node.id not in self.names():
                raise ConfigError(f"unknown name {node.id!r}")
            return 1 if var(node.id) else 0
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            return self.deg(node.operand, var)
        if isinstance(node, ast.BinOp):
            a, b = self.deg(node.left, var), self.deg(node.right, var)
            if isinstance(node.op, (ast.Add, ast.Sub)):
                return max(a, b)
            if isinstance(node.op, ast.Mult):
                return a + b
            if isinstance(node.op, ast.Div):
                if _has_names(node.right, self.names() - {"pi"}):
                    raise ConfigError("division is only allowed by constants")
                return a
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)
                        and node.right.value >= 0):
                    raise ConfigError("exponents must be non-negative integer literals")
                return a * node.right.value
            raise ConfigError(f"operator {type(node.op).__name__} is not allowed")
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS) or node.keywords \
                    or len(node.args) != 1:
                raise ConfigError("only cos(.) and sin(.) calls are allowed")
            arg = node.args[0]
            if _has_names(arg, self.names() - {"t", "pi"}):
                raise ConfigError("trigonometric arguments may only depend on t")
            if self.deg(arg, lambda n: n == "t") > 1:
                raise ConfigError("trigonometric arguments must be linear in t")
            omega = _eval_const(arg, 1.0) - _eval_const(arg, 0.0)
            if omega != 0.0:
                self.freqs.add(abs(omega))
            return 0
        raise ConfigError(f"syntax {type(node).__name__} is not allowed")


def _has_names(node, names) -> bool:
    return any(isinstance(n, ast.Name) and n.id in names for n in ast.walk(node))


def _eval_const(node, t: float) -> float:
    code = compile(ast.Expression(node), "<expr>", "eval")
    return float(eval(code, {"__builtins__": {}}, {"t": t, "pi": math.pi}))


def compile_expression(text: str, dim: int, n_controls: int):
    """Validate ``text`` and return ``(fn, freqs)``.

    ``fn(t (nt,), x (d,), u (nu, k)) -> (nt, nu)``.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc.msg}") from None
    chk = _Checker(dim, n_controls)
    if chk.deg(tree.body, lambda n: n.startswith("u")) > 1:
        raise ConfigError(f"{text!r} is not affine in the control")
    code = compile(tree, "<expr>", "eval")

    def fn(t, x, u):
        env = {"t": t[:, None], "pi": math.pi, **_FUNCS}
        env.update({f"x{i + 1}": float(x[i]) for i in range(dim)})
        env.update({f"u{i + 1}": u[None, :, i] for i in range(u.shape[1])})
        val = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(val, dtype=float), (t.size, u.shape[0]))

    return fn, sorted(chk.freqs)


def _infer_period(freqs) -> float | None:
    if not freqs:
        return None
    periods = [2.0 * math.pi / w for w in freqs]
    # a common period exists only when all frequencies are integer multiples of the lowest
    base = max(periods)
    for p in periods:
        r = base / p
        if abs(r - round(r)) > 1e-9:
            raise ConfigError("term mixes incommensurable frequencies; split it or declare 'period'")
    return base


def _box(spec, dim: int, what: str) -> Box:
    try:
        lo = np.asarray(spec["lo"], dtype=float).reshape(-1)
        hi = np.asarray(spec["hi"], dtype=float).reshape(-1)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{what} needs numeric 'lo' and 'hi' lists") from exc
    if dim and lo.size != dim:
        raise ConfigError(f"{what} has dimension {lo.size}, expected {dim}")
    try:
        return Box(lo, hi)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def build_inline(spec: dict, control_points: int = 101) -> ControlSystem:
    try:
        dim = int(spec["dim"])
        raw_terms = list(spec["terms"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("inline systems need 'dim' and 'terms'") from exc
    if dim < 1 or not raw_terms:
        raise ConfigError("inline systems need dim >= 1 and at least one term")
    if "domain" not in spec:
        raise ConfigError("inline systems need a bounded 'domain'")
    domain = _box(spec["domain"], dim, "domain")
    if "controls" in spec:
        ubox = _box(spec["controls"], 0, "controls")
        if ubox.dim > 2:
            raise ConfigError("at most two control dimensions are supported")
        ugrid = control_grid(ubox, control_points)
    else:
        ubox = Box([0.0], [0.0])
        ugrid = np.zeros((1, 1))
    k = ubox.dim

    terms = []
    for j, tspec in enumerate(raw_terms):
        exprs = tspec.get("expr") if isinstance(tspec, dict) else None
        if isinstance(exprs, str):
            exprs = [exprs]
        if not exprs or len(exprs) != dim:
            raise ConfigError(f"term {j}: 'expr' needs {dim} entries")
        compiled = [compile_expression(e, dim, k) for e in exprs]
        fns = [c[0] for c in compiled]
        freqs = sorted({w for c in compiled for w in c[1]})
        period = tspec.get("period", _infer_period(freqs))

        def func(t, x, u, fns=fns):
            return np.stack([f(t, x, u) for f in fns], axis=-1)

        terms.append(ControlTerm(func, period, tspec.get("bound", math.inf),
                                 tspec.get("lipschitz", math.inf), tspec.get("name", f"term{j}")))

    sys = ControlSystem(dim, tuple(terms), ugrid, domain, ubox, spec.get("name", "inline"))
    if any(not math.isfinite(t.bound) or not math.isfinite(t.lipschitz) for t in terms):
        est = estimate_constants(sys, domain, sample_count=2000, seed=0)
        fixed = []
        for t, c in zip(terms, est):
            fixed.append(ControlTerm(
                t.func, t.period,
                t.bound if math.isfinite(t.bound) else c.M,
                t.lipschitz if math.isfinite(t.lipschitz) else c.K, t.name))
        sys = ControlSystem(dim, tuple(fixed), ugrid, domain, ubox, sys.name)
    return sys


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    system: str | dict
    eps: list = field(default_factory=lambda: list(DEFAULT_EPS))
    x0: list | None = None
    omega: dict | None = None
    grids: dict = field(default_factory=lambda: dict(DEFAULT_GRIDS))
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        eps = [float(e) for e in self.eps]
        if not eps or any(not (e > 0 and math.isfinite(e)) for e in eps):
            raise ConfigError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps values must be strictly decreasing")
        self.eps = eps
        unknown = set(self.grids) - set(DEFAULT_GRIDS)
        if unknown:
            raise ConfigError(f"unknown grid keys {sorted(unknown)}")
        grids = dict(DEFAULT_GRIDS)
        grids.update(self.grids)
        for key, val in grids.items():
            if val is None and key == "n_steps":
                continue
            if not isinstance(val, int) or isinstance(val, bool) or val < 1:
                raise ConfigError(f"grid {key!r} must be a positive integer")
        self.grids = grids
        if isinstance(self.system, str):
            if self.system not in catalog.CATALOG:
                raise ConfigError(f"unknown catalog system {self.system!r}; "
                                  f"choose from {sorted(catalog.CATALOG)}")
        elif not isinstance(self.system, dict):
            raise ConfigError("'system' must be a catalog name or an inline definition")
        self.seed = int(self.seed)

    @property
    def name(self) -> str:
        return self.system if isinstance(self.system, str) else self.system.get("name", "inline")

    def resolve(self) -> catalog.CatalogSystem:
        """Build the system; the domain is overridden by ``omega`` if given."""
        if isinstance(self.system, str):
            if self.system == "example_5_5":
                cs = catalog.example_5_5(self.grids["control_points"])
            else:
                cs = catalog.get(self.system)
            F, ctrl = cs.setmap, cs.control
        else:
            ctrl = build_inline(self.system, self.grids["control_points"])
            F = control_map(ctrl)
            cs = catalog.CatalogSystem(self.name, F, np.zeros(ctrl.dim), ctrl, "inline definition")
        if self.omega is not None:
            dom = _box(self.omega, F.dim, "omega")
            from dataclasses import replace
            F = replace(F, domain=dom)
            if ctrl is not None:
                ctrl = replace(ctrl, domain=dom)
        x0 = cs.x0 if self.x0 is None else np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != F.dim:
            raise ConfigError(f"x0 has dimension {x0.size}, expected {F.dim}")
        return catalog.CatalogSystem(cs.name, F, x0, ctrl, cs.description)

    def reproducibility(self) -> dict:
        return {"scenario": self.name, "seed": self.seed, "grids": dict(self.grids), "eps": list(self.eps)}

    @classmethod
    def from_dict(cls, data: dict) -> Scenario:
        if not isinstance(data, dict) or "system" not in data:
            raise ConfigError("scenario must be an object with a 'system' key")
        allowed = {"system", "eps", "x0", "omega", "grids", "seed", "out"}
        extra = set(data) - allowed
        if extra:
            raise ConfigError(f"unknown scenario keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> Scenario:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)
