"""Command-line driver: ``adversarial-pricing <subcommand> --config run.json``.

Exit status: 0 on success, 2 for invalid input (config, payoff metadata,
shape), 3 for engine failures (size caps, stability, jump feasibility).
Results are written with 12 significant digits and sorted keys so reruns
are byte-identical; wall time goes to stderr only.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import american, equilibrium, hjb, jumps, lattice, multinomial, oracle
from .errors import EngineError, ValidationError
from .payoff import Payoff, Shape, validate_metadata

SUBCOMMANDS = ("price", "american", "jump", "scan", "hjb", "check")
ENGINES = ("binomial", "exact", "grid")

_zeta = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": ["european", *SUBCOMMANDS]},
        "s0": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "integer", "minimum": 1},
        "zeta_lower": _zeta,
        "zeta_upper": _zeta,
        "payoff": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["call", "put", "forward", "straddle", "butterfly", "digital_ramp", "table"]},
                "strikes": {"type": "array", "items": {"type": "number"}},
                "table": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
                "lipschitz": {"type": "number", "exclusiveMinimum": 0},
                "monotone": {"type": "boolean"},
                "shape": {"enum": ["convex", "concave", "general"]},
            },
        },
        "approximation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "delta_target": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "engine": {"enum": list(ENGINES)},
        "threads": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "jump": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["random", "adversarial"]},
                "q": {"type": "number"},
                "y_support": {"type": "array", "items": {"type": "number"}},
                "y_weights": {"type": "array", "items": {"type": "number"}},
                "w_zeta_lower": {"type": "number"},
                "w_zeta_upper": {"type": "number"},
                "quota": {"type": "integer", "minimum": 0},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "required": ["tau_list"],
            "properties": {"tau_list": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}},
        },
        "hjb": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "dy": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "half_width": {"type": "number", "exclusiveMinimum": 0},
                "snapshots": {"type": "integer", "minimum": 2},
            },
        },
        "check": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "instances": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"format": {"enum": ["json", "csv"]}, "path": {"type": "string"}},
        },
    },
}

# which top-level fields each subcommand needs
_NEEDS = {
    "price": ("s0", "tau", "zeta_lower", "zeta_upper", "payoff"),
    "american": ("s0", "tau", "zeta_lower", "zeta_upper", "payoff"),
    "jump": ("s0", "tau", "zeta_lower", "zeta_upper", "payoff", "jump"),
    "scan": ("s0", "zeta_lower", "zeta_upper", "payoff", "scan"),
    "hjb": ("s0", "zeta_lower", "zeta_upper", "payoff"),
    "check": (),
}


class ConfigError(ValidationError):
    pass


# -- config --------------------------------------------------------------------

def load_config(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def validate_config(cfg: dict, command: str) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {exc.message}") from None
    missing = [k for k in _NEEDS[command] if k not in cfg]
    if missing:
        raise ConfigError(f"config for '{command}' is missing field(s): {', '.join(missing)}")
    approx = cfg.get("approximation", {})
    if "epsilon" in approx and "delta_target" in approx:
        raise ConfigError("config field 'approximation': give exactly one of epsilon / delta_target")


def apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = json.loads(json.dumps(cfg))  # deep copy
    if args.epsilon is not None and args.delta is not None:
        raise ConfigError("--epsilon and --delta are mutually exclusive")
    if args.epsilon is not None:
        cfg["approximation"] = {"epsilon": args.epsilon}
    if args.delta is not None:
        cfg["approximation"] = {"delta_target": args.delta}
    for name in ("engine", "threads", "seed"):
        if getattr(args, name) is not None:
            cfg[name] = getattr(args, name)
    return cfg


def build_payoff(obj: dict) -> Payoff:
    kind = obj["kind"]
    try:
        if kind == "table":
            if "table" not in obj:
                raise ConfigError("config field 'payoff/table': required for kind 'table'")
            return Payoff.from_table(
                [tuple(k) for k in obj["table"]],
                lipschitz=obj.get("lipschitz"),
                monotone_nondecreasing=obj.get("monotone"),
                shape=obj.get("shape", "general"),
            )
        base = getattr(Payoff, kind)(*obj.get("strikes", []))
    except TypeError:
        raise ConfigError(f"config field 'payoff/strikes': wrong number of strikes for '{kind}'") from None
    except ValidationError as exc:
        raise ConfigError(f"config field 'payoff': {exc}") from None
    overrides = {}
    if "lipschitz" in obj:
        overrides["lipschitz"] = obj["lipschitz"]
    if "monotone" in obj:
        overrides["monotone_nondecreasing"] = obj["monotone"]
    if "shape" in obj:
        overrides["shape"] = Shape(obj["shape"])
    if not overrides:
        return base
    return Payoff(base.kind, base.strikes, None, **{
        "lipschitz": base.lipschitz, "monotone_nondecreasing": base.monotone_nondecreasing,
        "shape": base.shape, **overrides,
    })


def build_spec(cfg: dict, payoff: Payoff) -> lattice.GameSpec:
    try:
        return lattice.GameSpec(cfg["s0"], cfg["tau"], cfg["zeta_lower"], cfg["zeta_upper"], payoff)
    except ValidationError as exc:
        raise ConfigError(f"config game fields: {exc}") from None


def _epsilon(cfg: dict, spec: lattice.GameSpec) -> float:
    approx = cfg.get("approximation", {})
    if "epsilon" in approx:
        return float(approx["epsilon"])
    if "delta_target" in approx:
        report = validate_metadata(spec.payoff, 2001)
        if not report.ok:
            v = report.violations[0]
            raise ConfigError(
                f"payoff metadata fails spot check ({v.kind} at {v.witness}: {v.detail}); "
                "refusing to pick epsilon from an unverified Lipschitz constant"
            )
        return multinomial.epsilon_for_target(approx["delta_target"], spec.payoff.lipschitz, spec.tau)
    raise ConfigError("config field 'approximation': epsilon or delta_target is required for this engine")


# -- output ------------------------------------------------------------------------

def _round(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def to_json(result: dict) -> str:
    return json.dumps(_round(result), sort_keys=True, indent=2) + "\n"


def envelope(mode: str, upper, lower=None, hedge=None, eps=None, budget=None, engine=None, **meta) -> dict:
    out = {
        "mode": mode,
        "price_upper": upper,
        "hedge": hedge,
        "epsilon": eps,
        "delta_budget": budget,
        "engine": engine,
        "meta": meta,
    }
    if lower is not None:
        out["price_lower"] = lower
    return out


# -- subcommands ------------------------------------------------------------------

def _default_engine(cfg: dict, payoff: Payoff) -> str:
    if "engine" in cfg:
        return cfg["engine"]
    return "binomial" if (payoff.is_convex or payoff.is_concave) and "approximation" not in cfg else "grid"


def run_price(cfg: dict) -> str:
    payoff = build_payoff(cfg["payoff"])
    spec = build_spec(cfg, payoff)
    engine = _default_engine(cfg, payoff)
    if engine == "binomial":
        if payoff.is_convex:
            upper, schedule = lattice.binomial_upper(spec)
            hedge = schedule.nodes[(1, 0)][1]
        elif payoff.is_concave:
            upper, hedge = lattice.concave_upper(spec), None
        else:
            raise ConfigError("engine 'binomial' needs a convex or concave payoff; use 'exact' or 'grid'")
        lower = lattice.bound_lower(spec)
        return to_json(envelope("european", upper, lower, hedge, None, None, engine, s0=spec.s0, tau=spec.tau))
    eps = _epsilon(cfg, spec)
    threads = cfg.get("threads", 1)
    up = multinomial.price_upper(spec, eps, engine, threads=threads)
    lo = multinomial.price_lower(spec, eps, engine, threads=threads)
    return to_json(envelope(
        "european", up.price, lo.price, up.hedge, up.epsilon, up.delta_budget, engine,
        s0=spec.s0, tau=spec.tau, hedge_lower=lo.hedge,
    ))


def run_american(cfg: dict) -> str:
    payoff = build_payoff(cfg["payoff"])
    spec = build_spec(cfg, payoff)
    engine = cfg.get("engine", "grid")
    if engine == "binomial":
        raise ConfigError("american pricing runs on the 'exact' or 'grid' engine")
    eps = _epsilon(cfg, spec)
    threads = cfg.get("threads", 1)
    up = american.american_upper(spec, eps, engine, threads=threads)
    lo = american.american_lower(spec, eps, engine, threads=threads)
    budget = multinomial.delta_budget(eps, payoff.lipschitz, spec.tau, spec.s0)
    out = envelope(
        "american", up.price, lo.price, up.hedge, eps, budget, engine,
        s0=spec.s0, tau=spec.tau, exercise_region_lower=[list(r) for r in lo.exercise_region],
    )
    out["exercise_region"] = [list(r) for r in up.exercise_region]
    return to_json(out)


def run_jump(cfg: dict) -> str:
    payoff = build_payoff(cfg["payoff"])
    spec = build_spec(cfg, payoff)
    j = dict(cfg["jump"])
    try:
        config = jumps.JumpConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in j.items()})
    except ValidationError as exc:
        raise ConfigError(f"config field 'jump': {exc}") from None
    if config.mode is jumps.JumpMode.RANDOM:
        price = jumps.random_jump_upper(spec, config)
        w = [list(jumps.jump_weights(zl, zu, config)) for zl, zu in zip(spec.zeta_lower, spec.zeta_upper)]
        return to_json(envelope("jump", price, None, None, None, None, "binomial",
                                jump_mode="random", q=config.q, weights=w))
    eps = _epsilon(cfg, spec)
    res = jumps.adversarial_jump_upper(spec, config, eps, threads=cfg.get("threads", 1))
    budget = multinomial.delta_budget(eps, payoff.lipschitz, spec.tau, spec.s0)
    return to_json(envelope("jump", res.price, None, res.hedge, eps, budget, "grid",
                            jump_mode="adversarial", quota=res.quota, layer_prices=list(res.layer_prices)))


def _zeta_scalar(cfg: dict, name: str) -> float:
    z = cfg[name]
    if isinstance(z, list):
        if len(set(z)) != 1:
            raise ConfigError(f"config field '{name}': scan/hjb need a single interval")
        z = z[0]
    return float(z)


def run_scan(cfg: dict) -> str:
    payoff = build_payoff(cfg["payoff"])
    rows = lattice.convergence_scan(
        cfg["s0"], payoff, _zeta_scalar(cfg, "zeta_lower"), _zeta_scalar(cfg, "zeta_upper"), cfg["scan"]["tau_list"]
    )
    if cfg.get("output", {}).get("format", "csv") == "csv":
        return lattice.scan_to_csv(rows)
    last = rows[-1]
    return to_json(envelope("scan", last.game_price, None, None, None, None, "binomial",
                            rows=[[r.tau, r.game_price, r.bs_price, r.abs_gap, r.rel_gap] for r in rows]))


def run_hjb(cfg: dict) -> str:
    payoff = build_payoff(cfg["payoff"])
    opts = dict(cfg.get("hjb", {}))
    horizon = opts.pop("horizon", 1.0)
    price, grid = hjb.hjb_solve(
        cfg["s0"], payoff, _zeta_scalar(cfg, "zeta_lower"), _zeta_scalar(cfg, "zeta_upper"), horizon, **opts
    )
    if cfg.get("output", {}).get("format", "json") == "csv":
        return grid.to_csv()
    return to_json(envelope("hjb", price, None, None, None, None, "pde",
                            dy=grid.dy, dt=grid.dt, horizon=grid.horizon, nu_bar=grid.nu_bar,
                            boundary_warning=grid.boundary_warning))


def random_instance(rng: np.random.Generator):
    """Small random game: monotone 1-Lipschitz table payoff, tau <= 3, support <= 4."""
    n = int(rng.integers(3, 7))
    xs = np.sort(rng.uniform(7.0, 13.0, n))
    xs = np.concatenate([[xs[0]], xs[1:][np.diff(xs) > 1e-3]])
    ys = np.concatenate([[0.0], np.cumsum(np.diff(xs) * rng.uniform(0, 1, xs.size - 1))])
    payoff = Payoff.from_table(list(zip(xs, ys)), lipschitz=1.0, monotone_nondecreasing=True)
    tau = int(rng.integers(1, 4))
    b = int(rng.integers(2, 5))
    zl, zu = rng.uniform(0.05, 0.2, 2)
    inner = np.sort(rng.uniform(-zl, zu, b - 2))
    returns = tuple(np.unique(np.concatenate([[-zl], inner, [zu]])))
    dset = multinomial.DiscretizedSet(float(zl + zu), returns)
    return lattice.GameSpec.uniform(10.0, tau, float(zl), float(zu), payoff), dset


def run_check(cfg: dict) -> tuple[str, str]:
    opts = cfg.get("check", {})
    n = opts.get("instances", 100)
    tol = opts.get("tolerance", 1e-8)
    rng = np.random.default_rng(cfg.get("seed", 0))
    agree = 0
    worst = 0.0
    for _ in range(n):
        spec, dset = random_instance(rng)
        vals = spec.payoff(spec.s0 * (1 + np.asarray(dset.returns)))
        support = equilibrium.DiscreteSupport(dset.returns, tuple(vals))
        diffs = [
            abs(equilibrium.solve_upper(support).price - oracle.lp_exact(support).price),
            abs(multinomial.price_upper(spec, dset, "exact").price - oracle.game_value_exact(spec, [dset] * spec.tau)),
            abs(american.american_upper(spec, dset, "exact").price
                - oracle.game_value_exact(spec, [dset] * spec.tau, american=True)),
        ]
        worst = max(worst, *diffs)
        agree += all(d <= tol for d in diffs)
    line = f"oracle agreement: {agree}/{n} within {tol:.0e}"
    out = envelope("check", None, None, None, None, None, "oracle",
                   instances=n, agreeing=agree, tolerance=tol, max_abs_diff=worst, seed=cfg.get("seed", 0))
    return to_json(out), line


# -- entry point ----------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adversarial-pricing", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--epsilon", type=float, help="return-grid step (overrides config)")
    p.add_argument("--delta", type=float, help="target relative error; epsilon = delta^2 / (8 L^2 tau^2)")
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output file (default: config output.path, else stdout)")
    p.add_argument("--seed", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = apply_overrides(cfg, args)
        validate_config(cfg, args.command)
        summary = None
        if args.command == "check":
            text, summary = run_check(cfg)
        else:
            text = {
                "price": run_price, "american": run_american, "jump": run_jump,
                "scan": run_scan, "hjb": run_hjb,
            }[args.command](cfg)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    path = args.out or cfg.get("output", {}).get("path")
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
    if summary:
        print(summary, file=sys.stderr if not path else sys.stdout)
    print(f"wall time: {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
