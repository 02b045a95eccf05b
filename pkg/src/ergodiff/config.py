"""Plain-text experiment configuration.

One INI-style file declares the diffusion (a named built-in or drift /
diffusion expressions over x), optional coefficient-assumption parameters,
the simulation block, and the experiment block (test function, exponent,
grids, output directory).  Section and key names are case-insensitive;
inline ``#`` comments are allowed.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .diffusion import (AssumptionParams, DiffusionModel, bounded_drift,
                        brownian, ou)
from .errors import ConfigError, ExpressionError
from .expressions import parse_expression
from .quadrature import QuadratureConfig
from .simulator import InitialLaw, SimConfig

__all__ = ["ExperimentConfig", "FunctionSpec", "load_config", "parse_model",
           "parse_function", "parse_initial_law"]

_MODEL_RE = re.compile(r"^\s*(brownian|ou|bounded_drift)\s*(?:\(\s*([^)]*)\s*\))?\s*$")
_CALL_RE = re.compile(r"^\s*(point|uniform|gaussian)\s*\(\s*([^)]*)\s*\)\s*$")
_INDICATOR_RE = re.compile(r"^\s*indicator\s*\(\s*([^,]+)\s*,\s*([^)]+)\s*\)\s*$")


@dataclass(frozen=True)
class FunctionSpec:
    """A test function f with the metadata the pipelines need."""

    fn: object
    description: str
    sup: float             # sup |f| over the probed range
    support: tuple | None  # (lo, hi) where f is nonzero, if known/compact

    def __call__(self, x):
        return self.fn(x)


@dataclass
class ExperimentConfig:
    model: DiffusionModel
    assumptions: AssumptionParams | None
    sim: SimConfig | None
    f: FunctionSpec | None
    p: float
    bdg_constant: float | None
    t_grid: np.ndarray
    eps_grid: np.ndarray
    out_dir: str
    probe_limit: float
    # moments command inputs
    target: float | None
    side: str
    x_grid: np.ndarray
    orders: int
    bound_order: int | None
    constants_replicas: int | None
    mu_f: float | None           # None means estimate/quadrature at run time
    bound_kinds: tuple
    config_hash: str = ""
    label: str = ""


def _floats(text: str) -> np.ndarray:
    items = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    try:
        return np.array([float(s) for s in items])
    except ValueError as exc:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from exc


def parse_model(text: str, anchor: float = 0.0,
                quad: QuadratureConfig | None = None,
                diffusion_text: str | None = None) -> DiffusionModel:
    """Named built-in (brownian, ou(theta), bounded_drift(theta)) or an
    expression pair."""
    kw = {"anchor": anchor}
    if quad is not None:
        kw["quad"] = quad
    m = _MODEL_RE.match(text)
    if m:
        name, arg = m.group(1), m.group(2)
        value = float(arg) if arg not in (None, "") else 1.0
        factory = {"brownian": brownian, "ou": ou,
                   "bounded_drift": bounded_drift}[name]
        return factory(value, **kw)
    # otherwise: text is a drift expression, diffusion_text its partner
    if diffusion_text is None:
        raise ConfigError(
            f"unknown model {text!r}; use a built-in or give drift= and "
            "diffusion= expressions")
    drift = parse_expression(text)
    diff = parse_expression(diffusion_text)
    label = f"drift[{drift.source}]/sigma[{diff.source}]"
    return DiffusionModel(drift, diff, label=label, **kw)


def parse_function(text: str, probe_range: tuple[float, float]) -> FunctionSpec:
    """``indicator(lo, hi)`` or an expression over x."""
    m = _INDICATOR_RE.match(text)
    if m:
        lo, hi = float(m.group(1)), float(m.group(2))
        if not lo < hi:
            raise ConfigError("indicator needs lo < hi")
        fn = lambda x: np.where((np.asarray(x) >= lo) & (np.asarray(x) <= hi),
                                1.0, 0.0)
        return FunctionSpec(fn, f"indicator({lo:g},{hi:g})", 1.0, (lo, hi))
    expr = parse_expression(text)
    xs = np.linspace(probe_range[0], probe_range[1], 4001)
    vals = np.abs(np.asarray(expr(xs), dtype=float))
    sup = float(np.max(vals))
    nz = vals > 0
    support = (float(xs[nz][0]), float(xs[nz][-1])) if nz.any() else None
    if nz.any() and (nz[0] or nz[-1]):
        support = None  # not visibly compact on the probed range
    return FunctionSpec(expr, expr.source, sup, support)


def parse_initial_law(text: str) -> InitialLaw:
    m = _CALL_RE.match(text)
    if not m:
        try:
            return InitialLaw.point(float(text))
        except ValueError:
            raise ConfigError(f"cannot parse initial law {text!r}") from None
    kind, args = m.group(1), _floats(m.group(2))
    if kind == "point":
        if args.size != 1:
            raise ConfigError("point(x0) takes one argument")
        return InitialLaw.point(args[0])
    if kind == "uniform":
        if args.size != 2:
            raise ConfigError("uniform(lo, hi) takes two arguments")
        return InitialLaw.uniform(args[0], args[1])
    if args.size != 2:
        raise ConfigError("gaussian(mean, sd) takes two arguments")
    return InitialLaw.gaussian(args[0], args[1])


def load_config(path: str, seed: int | None = None,
                replicas: int | None = None, tol: float | None = None,
                out: str | None = None, threads: int | None = None
                ) -> ExperimentConfig:
    """Read and validate an experiment file; CLI overrides win.

    The config hash covers the file bytes plus the semantic overrides (seed,
    replicas, tol) but not the thread count, so outputs are byte-identical
    across thread counts.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            raw = fh.read()
        parser.read_string(raw, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    def section(name):
        return parser[name] if parser.has_section(name) else {}

    diff_sec = section("diffusion")
    exp_sec = section("experiment")
    sim_sec = section("sim")
    ass_sec = section("assumptions")

    if tol is None and "tol" in diff_sec:
        tol = float(diff_sec["tol"])
    quad = None
    if tol is not None:
        quad = QuadratureConfig(rel_tol=tol, abs_tol=tol * 1e-3)
    anchor = float(diff_sec.get("anchor", 0.0))
    probe_limit = float(diff_sec.get("probe_limit", 1e6))

    try:
        if "model" in diff_sec:
            model = parse_model(diff_sec["model"], anchor, quad)
        elif "drift" in diff_sec and "diffusion" in diff_sec:
            model = parse_model(diff_sec["drift"], anchor, quad,
                                diffusion_text=diff_sec["diffusion"])
        else:
            raise ConfigError(
                "[diffusion] needs either model= or drift= and diffusion=")
    except ExpressionError as exc:
        raise ConfigError(f"[diffusion] expression error: {exc}") from exc

    assumptions = None
    if ass_sec:
        def opt(key):
            return float(ass_sec[key]) if key in ass_sec else None
        if "m0" not in ass_sec:
            raise ConfigError("[assumptions] needs m0")
        assumptions = AssumptionParams(
            m0=float(ass_sec["m0"]), sigma0=opt("sigma0"), gamma=opt("gamma"),
            r=opt("r"), sigma1=opt("sigma1"), delta=opt("delta"),
            r_cap=opt("r_cap"))

    sim = None
    if sim_sec:
        required = ("step", "horizon", "replicas", "seed", "a", "b", "initial")
        missing = [k for k in required if k not in sim_sec]
        if missing:
            raise ConfigError(f"[sim] missing keys: {', '.join(missing)}")
        sim = SimConfig(
            step=float(sim_sec["step"]),
            horizon=float(sim_sec["horizon"]),
            replicas=int(replicas if replicas is not None
                         else int(sim_sec["replicas"])),
            seed=int(seed if seed is not None else int(sim_sec["seed"])),
            a=float(sim_sec["a"]),
            b=float(sim_sec["b"]),
            initial=parse_initial_law(sim_sec["initial"]),
            crossing=sim_sec.get("crossing", "interpolate"),
            blowup_guard=float(sim_sec.get("blowup_guard", 1e9)),
            threads=int(threads if threads is not None
                        else int(sim_sec.get("threads", 1))),
        )

    f_def = None
    if "f" in exp_sec:
        if sim is not None:
            lo = sim.a - 5.0 * (sim.b - sim.a)
            hi = sim.b + 5.0 * (sim.b - sim.a)
        else:
            lo, hi = -10.0, 10.0
        try:
            f_def = parse_function(exp_sec["f"], (lo, hi))
        except ExpressionError as exc:
            raise ConfigError(f"[experiment] f: {exc}") from exc

    t_grid = _floats(exp_sec["t_grid"]) if "t_grid" in exp_sec else np.array([])
    eps_grid = _floats(exp_sec["eps_grid"]) if "eps_grid" in exp_sec \
        else np.array([])
    if t_grid.size and np.any(np.diff(np.sort(t_grid)) <= 0):
        raise ConfigError("t_grid entries must be distinct")

    x_grid = _floats(exp_sec["x_grid"]) if "x_grid" in exp_sec else np.array([])
    mu_f_text = exp_sec.get("mu_f", "auto").strip().lower()
    mu_f = None if mu_f_text == "auto" else float(mu_f_text)
    kinds_text = exp_sec.get("bounds", "sup,l1")
    kinds = tuple(s.strip() for s in kinds_text.split(",") if s.strip())
    if any(k not in ("sup", "l1") for k in kinds):
        raise ConfigError("bounds must be a subset of: sup, l1")

    payload = raw.encode() + f"|seed={seed}|replicas={replicas}|tol={tol}".encode()
    cfg_hash = hashlib.sha256(payload).hexdigest()[:12]

    return ExperimentConfig(
        model=model,
        assumptions=assumptions,
        sim=sim,
        f=f_def,
        p=float(exp_sec.get("p", 2.0)),
        bdg_constant=(float(exp_sec["bdg_constant"])
                      if "bdg_constant" in exp_sec else None),
        t_grid=np.sort(t_grid),
        eps_grid=np.sort(eps_grid),
        out_dir=(out if out is not None else exp_sec.get("out", "results")),
        probe_limit=probe_limit,
        target=float(exp_sec["target"]) if "target" in exp_sec else None,
        side=exp_sec.get("side", "from_above"),
        x_grid=x_grid,
        orders=int(exp_sec.get("orders", 1)),
        bound_order=(int(exp_sec["bound_order"])
                     if "bound_order" in exp_sec else None),
        constants_replicas=(int(exp_sec["constants_replicas"])
                            if "constants_replicas" in exp_sec else None),
        mu_f=mu_f,
        bound_kinds=kinds,
        config_hash=cfg_hash,
        label=model.label,
    )
