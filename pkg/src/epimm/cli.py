"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 missing or undefined input,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import minimax as mm
from .core import (
    GeneratorMatrix,
    ModelParams,
    SimplexPoint,
    as_generator,
    stationary_distribution,
    validate_params,
)
from .errors import EpimmError, NoConvergence, SingularResidenceMatrix, ValidationError
from .outcomes import Infinite, expected_total_size, extinction_prob_from_state, extinction_probs
from .sim import SimConfig, mc_extinction, mc_minor_outbreak, mc_total_size, set_threads
from .spectral import r0, tau
from .strategies import (
    condition_status,
    omega,
    r0_optimal_pi,
    strategy_report,
    tau_optimal_pi,
)

EXIT_OK, EXIT_INVALID, EXIT_MISSING, EXIT_IO = 0, 2, 3, 4
GRID_HEADER = "gamma1,gamma2,value,condition_ok,omega_gt_1"
SCHEMA_VERSION = 1


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- JSON


def _encode(obj) -> str:
    """JSON text with floats written to 17 significant digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return json.dumps("infinite" if x > 0 else "-infinite")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, SimplexPoint):
        return _encode(obj.probs)
    if isinstance(obj, GeneratorMatrix):
        return _encode(obj.rates)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _emit(obj) -> None:
    sys.stdout.write(_encode(obj) + "\n")


# ---------------------------------------------------------------- model file


@dataclass(frozen=True, eq=False)
class ModelFile:
    params: ModelParams
    Q: GeneratorMatrix | None = None
    R: GeneratorMatrix | None = None
    pi: SimplexPoint | None = None

    def susceptible_pi(self) -> SimplexPoint | None:
        if self.pi is not None:
            return self.pi
        if self.R is not None:
            return stationary_distribution(self.R)
        return None


def parse_model(data: dict) -> ModelFile:
    """Validate a decoded model file."""
    if not isinstance(data, dict):
        raise ValidationError("model file must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version!r}")
    for key in ("m", "beta", "gamma"):
        if key not in data:
            raise ValidationError(f"missing field {key!r}")
    params = validate_params(data["beta"], data["gamma"])
    if int(data["m"]) != params.m:
        raise ValidationError(f"m = {data['m']} but beta has {params.m} entries")
    if "pi" in data and "R" in data:
        raise ValidationError("give either pi or R, not both")
    Q = as_generator(data["Q"]) if data.get("Q") is not None else None
    R = as_generator(data["R"]) if data.get("R") is not None else None
    pi = SimplexPoint(data["pi"]) if data.get("pi") is not None else None
    for name, obj in (("Q", Q), ("R", R), ("pi", pi)):
        if obj is not None and obj.m != params.m:
            raise ValidationError(f"{name} has the wrong number of groups")
    if R is not None and not R.irreducible:
        raise ValidationError("R must be irreducible")
    return ModelFile(params, Q, R, pi)


def load_model(path: str) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_INVALID) from exc
    return parse_model(data)


def _require(obj, what):
    if obj is None:
        raise CliError(f"model file does not provide {what}", EXIT_MISSING)
    return obj


# ---------------------------------------------------------------- commands


def cmd_strategy(args) -> int:
    model = load_model(args.model)
    rep = strategy_report(model.params, model.R)
    _emit({
        "chi": rep.chi,
        "omega": rep.omega,
        "condition_ok": rep.condition_ok,
        "boundary_groups": list(rep.boundary_groups),
        "tau_optimal_pi": rep.tau_optimal_pi,
        "r0_optimal_pi": rep.r0_optimal_pi,
        "adversarial_Q": rep.adversarial_Q,
        # short aliases
        "pi_star": rep.tau_optimal_pi,
        "pi_tilde": rep.r0_optimal_pi,
        "Q_star": rep.adversarial_Q,
        "border_controls": rep.border_controls,
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    params = model.params
    wanted = [k for k in ("tau", "r0", "extinction", "total_size") if getattr(args, k)]
    if not wanted:
        wanted = ["tau", "r0", "extinction", "total_size"]
    Q = _require(model.Q, "Q")
    pi = _require(model.susceptible_pi(), "pi or R")
    out = {"pi": pi}
    try:
        if "tau" in wanted:
            out["tau"] = tau(params, pi, Q)
        if "r0" in wanted:
            out["r0"] = r0(params, pi, Q)
        if "extinction" in wanted:
            q = extinction_probs(params, pi, Q)
            out["q"] = q
            if args.y0 is not None:
                out["extinction_from_y0"] = extinction_prob_from_state(q, args.y0)
        if "total_size" in wanted:
            ts = expected_total_size(params, pi, Q)
            if isinstance(ts, Infinite):
                out["total_size"] = "infinite"
                out["total_size_rho"] = ts.rho
            else:
                out["total_size"] = ts
    except (SingularResidenceMatrix, NoConvergence) as exc:
        raise CliError(f"requested quantity is undefined: {exc}", EXIT_MISSING) from exc
    _emit(out)
    return EXIT_OK


def _box(args) -> mm.SearchBox:
    return mm.SearchBox(q_lo=args.q_lo, q_hi=args.q_hi, pi_floor=args.pi_floor,
                        multistarts=args.multistarts, tol=args.tol)


def cmd_minimax(args) -> int:
    model = load_model(args.model)
    box = _box(args)
    box.check(model.params.m)
    start = time.perf_counter()
    if args.objective == "tau":
        res = mm.minimax_tau(model.params, box)
    else:
        res = mm.minimax_r0(model.params, box)
    _emit({
        "objective": args.objective,
        "inf_sup": res.inf_sup,
        "sup_inf": res.sup_inf,
        "gap": res.gap,
        "pi_arg": res.pi_arg,
        "Q_arg": res.Q_arg,
        "lower_pi_arg": res.lower.pi_arg,
        "evaluations": res.evaluations,
        "wall_time": time.perf_counter() - start,
    })
    return EXIT_OK


@dataclass(frozen=True)
class GridSpec:
    gamma1_range: tuple = (0.01, 3.99, 64)
    gamma2_range: tuple = (0.01, 3.99, 64)
    beta: tuple = (1.0, 2.0)
    objective: str = "tau"

    def __post_init__(self):
        for lo, hi, steps in (self.gamma1_range, self.gamma2_range):
            if int(steps) < 2:
                raise ValidationError("grid needs at least 2 steps per axis")
            if not (0 < lo < hi):
                raise ValidationError("grid ranges need 0 < lo < hi")
        if self.objective not in GRID_OBJECTIVES:
            raise ValidationError(f"unknown objective {self.objective!r}")

    def points(self):
        g1 = np.linspace(*self.gamma1_range[:2], int(self.gamma1_range[2]))
        g2 = np.linspace(*self.gamma2_range[:2], int(self.gamma2_range[2]))
        return [(a, b) for a in g1 for b in g2]


def _growth_optimal_pi(params, box):
    """Closed form where it exists, otherwise the numerical upper-game minimiser."""
    ps = tau_optimal_pi(params)
    if ps is not None and ps.interior:
        return ps.probs
    return mm.inf_pi_sup_Q_tau(params, box).pi_arg.probs


def grid_value(objective: str, beta, g1: float, g2: float, box=None) -> tuple:
    """One grid row: (gamma1, gamma2, value, condition_ok, omega_gt_1)."""
    box = box or mm.SearchBox()
    params = validate_params(beta, [g1, g2])
    if objective == "tau":
        value = mm.inf_pi_sup_Q_tau(params, box).value
    elif objective == "r0ratio":
        sup_r0, _ = mm.sup_r0_over_Q(params, _growth_optimal_pi(params, box), box)
        value = math.log(sup_r0 / omega(params))
    else:
        sup_tilde, _ = mm.sup_tau_over_Q(params, r0_optimal_pi(params).probs, box)
        sup_star, _ = mm.sup_tau_over_Q(params, _growth_optimal_pi(params, box), box)
        value = sup_tilde - sup_star
    status, _ = condition_status(params)
    return (g1, g2, value, status == "interior", omega(params) > 1.0)


GRID_OBJECTIVES = ("tau", "r0ratio", "taudiff")


def _grid_task(task):
    return grid_value(*task)


def run_grid(spec: GridSpec, threads: int = 1, box=None) -> list:
    tasks = [(spec.objective, spec.beta, g1, g2, box) for g1, g2 in spec.points()]
    if threads <= 1:
        return [_grid_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        # map preserves task order, so output rows are deterministic
        return list(pool.map(_grid_task, tasks, chunksize=4))


def format_grid(rows) -> str:
    lines = [GRID_HEADER]
    for g1, g2, v, ok, om in rows:
        lines.append(f"{g1:.17g},{g2:.17g},{v:.17g},{int(ok)},{int(om)}")
    return "\n".join(lines) + "\n"


def _threads(args) -> int:
    env = os.environ.get("EPIMM_THREADS")
    if env:
        return max(1, int(env))
    if getattr(args, "threads", None):
        return max(1, args.threads)
    return os.cpu_count() or 1


def cmd_grid(args) -> int:
    spec = GridSpec(tuple(args.gamma1), tuple(args.gamma2), tuple(args.beta), args.objective)
    # open first so an unwritable path fails before any computation
    try:
        fh = open(args.out, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    with fh:
        fh.write(format_grid(run_grid(spec, _threads(args))))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    params = model.params
    if args.replicates < 1:
        raise ValidationError("--replicates must be >= 1")
    m = params.m
    y0 = args.y0 if args.y0 is not None else [1] + [0] * (m - 1)
    if len(y0) != m:
        raise ValidationError(f"--y0 needs {m} counts")
    set_threads(_threads(args))
    Q = _require(model.Q, "Q")
    start = time.perf_counter()
    if args.finite_N is not None:
        R = _require(model.R, "R (needed for finite-N runs)")
        cfg = SimConfig(seed=args.seed, replicates=args.replicates,
                        extinction_cap=args.cap if args.cap else max(1, args.finite_N))
        frac, se, limit = mc_minor_outbreak(params, R, Q, args.finite_N, y0, cfg,
                                            threshold=args.minor_threshold)
        out = {"mode": "finite_N", "N": args.finite_N, "minor_outbreak_fraction": frac,
               "stderr": se, "minor_threshold_count": limit}
    else:
        pi = _require(model.susceptible_pi(), "pi or R")
        cfg = SimConfig(seed=args.seed, replicates=args.replicates,
                        extinction_cap=args.cap or 10_000)
        p, se = mc_extinction(params, pi, Q, y0, cfg)
        out = {"mode": "branching", "extinction": p, "extinction_stderr": se}
        if args.total_size:
            mean, tse, capped = mc_total_size(params, pi, Q, y0, cfg)
            out.update(total_size=mean, total_size_stderr=tse, capped_fraction=capped)
    out.update(seed=args.seed, replicates=args.replicates, y0=list(y0),
               extinction_cap=cfg.extinction_cap,
               wall_time=time.perf_counter() - start)
    _emit(out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epimm",
        description="Minimax susceptible distributions for metapopulation epidemics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("strategy", help="closed-form optimal strategies")
    p.add_argument("model")
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("evaluate", help="growth rate, R0, extinction, total size")
    p.add_argument("model")
    p.add_argument("--tau", action="store_true")
    p.add_argument("--r0", action="store_true")
    p.add_argument("--extinction", action="store_true")
    p.add_argument("--total-size", dest="total_size", action="store_true")
    p.add_argument("--y0", type=int, nargs="+")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("minimax", help="nested numerical minimax")
    p.add_argument("model")
    p.add_argument("--objective", choices=("tau", "r0"), default="tau")
    p.add_argument("--q-lo", type=float, default=1e-6)
    p.add_argument("--q-hi", type=float, default=1e3)
    p.add_argument("--pi-floor", type=float, default=1e-9)
    p.add_argument("--multistarts", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_minimax)

    p = sub.add_parser("grid", help="value grids over (gamma1, gamma2) as CSV")
    p.add_argument("--objective", choices=GRID_OBJECTIVES, default="tau")
    p.add_argument("--gamma1", type=float, nargs=3, default=[0.01, 3.99, 64],
                   metavar=("LO", "HI", "STEPS"))
    p.add_argument("--gamma2", type=float, nargs=3, default=[0.01, 3.99, 64],
                   metavar=("LO", "HI", "STEPS"))
    p.add_argument("--beta", type=float, nargs=2, default=[1.0, 2.0])
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("simulate", help="Monte Carlo estimates")
    p.add_argument("model")
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--y0", type=int, nargs="+")
    p.add_argument("--cap", type=int)
    p.add_argument("--total-size", dest="total_size", action="store_true")
    p.add_argument("--finite-N", dest="finite_N", type=int)
    p.add_argument("--minor-threshold", type=float, default=0.05)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"epimm: {exc}", file=sys.stderr)
        return exc.code
    except (ValidationError, EpimmError, ValueError) as exc:
        print(f"epimm: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
