"""Experiment engine: single traces, termination-count tables, the
mesh-independence spread, sandwich checks, and spectral sweeps.

All outputs are CSV (17-significant-digit floats, byte-stable across runs)
plus a manifest echoing the resolved configuration. The report paths also
render a matplotlib figure next to each CSV; the CSV is the contract, the
figure a convenience.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import burgers, poisson, spectral, wave
from .bb import BBConfig, StepRule, k_star, run
from .errors import BBGradError
from .linalg import wnorm

PROBLEMS = ("poisson", "wave", "burgers", "spectral")

DESK_LEVELS = {
    "poisson": ((None, 5), (None, 6), (None, 7)),
    "wave": ((0.01, 4), (0.04, 5), (0.016, 6)),
    "burgers": ((2.0**-4, 5), (2.0**-5, 6), (2.0**-6, 7)),
    "spectral": ((None, 5), (None, 6), (None, 7)),
}

DEFAULT_EPSILONS = (1e-2, 1e-4, 1e-6, 1e-8)
DEFAULT_BETAS = {
    "poisson": (0.2, 0.05, 0.01),
    "wave": (0.5, 0.05),
    "burgers": (0.5, 0.05),
    "spectral": (1.5, 0.5, 0.05),
}

TABLE_HEADER = "problem,rule,beta,eps,level,h,dt,k_star,terminated_reason"
TRACE_HEADER = "k,grad_norm,alpha,objective"
SPREAD_HEADER = "problem,rule,beta,eps,ell,status"
SANDWICH_HEADER = "problem,rule,beta,eps,level,k_star,k_ref,lower,upper,violation"
SWEEP_HEADER = (
    "instance,shift,decay,rate,n,kappa,gamma,rho,half_life,half_life_bound,monotone"
)


def fmt(value):
    """CSV field formatting: floats at 17 significant digits, None empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


@dataclass(frozen=True)
class ExperimentSpec:
    problem: str
    rules: tuple = (StepRule.BB1,)
    betas: tuple = ()
    epsilons: tuple = DEFAULT_EPSILONS
    levels: tuple = ()  # (dt, level) pairs; dt None where not applicable
    out_dir: Path = Path("out")
    seed: int = 0
    max_iter: int = 10_000
    record_objective: bool = False
    figures: bool = True

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        betas = self.betas or DEFAULT_BETAS[self.problem]
        object.__setattr__(self, "betas", tuple(float(b) for b in betas))
        levels = self.levels or DESK_LEVELS[self.problem]
        object.__setattr__(
            self,
            "levels",
            tuple((None if d is None else float(d), int(l)) for d, l in levels),
        )
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
            raise ValueError("epsilons must be nonempty and strictly decreasing")
        object.__setattr__(self, "epsilons", eps)
        rules = tuple(
            r if isinstance(r, StepRule) else StepRule(str(r).upper()) for r in self.rules
        )
        if not rules:
            raise ValueError("at least one step rule is required")
        object.__setattr__(self, "rules", rules)


@dataclass(frozen=True)
class BuiltProblem:
    problem: object  # GradientProblem
    init: object
    h: Optional[float]
    dt: Optional[float]
    operator: Optional[spectral.SpectralOperator] = None


@dataclass(frozen=True)
class TableRow:
    problem: str
    rule: str
    beta: float
    eps: float
    level: int
    h: Optional[float]
    dt: Optional[float]
    k_star: Optional[int]
    reason: str

    def to_csv(self):
        return ",".join(
            fmt(v)
            for v in (
                self.problem,
                self.rule,
                self.beta,
                self.eps,
                self.level,
                self.h,
                self.dt,
                self.k_star,
                self.reason,
            )
        )


class _AssemblyCache:
    """Per-invocation memo of (problem, level, dt) -> back-end assembly."""

    def __init__(self):
        self._store = {}

    def get(self, problem, level, dt):
        key = (problem, level, dt)
        if key not in self._store:
            if problem == "poisson":
                self._store[key] = poisson.assemble(poisson.benchmark_config(1.0, level))
            elif problem == "wave":
                self._store[key] = wave.assemble(wave.benchmark_config(1.0, level, dt))
            elif problem == "burgers":
                self._store[key] = burgers.assemble(burgers.benchmark_config(1.0, level, dt))
            else:
                raise ValueError(problem)
        return self._store[key]


def build_problem(problem, beta, level, dt=None, seed=0, cache=None):
    """Instantiate one back-end as a GradientProblem plus run metadata.

    Spectral problems use n = 2**level eigenvalues with geometric decay and
    the canonical all-ones component initialization; PDE problems use the
    default (zero control, unit first step) initialization.
    """
    from .bb import DefaultInit

    if problem == "spectral":
        built = spectral.make_clustered_problem(beta, 2**level)
        return BuiltProblem(built.problem, built.init, None, None, built.operator)
    if problem in ("wave", "burgers") and dt is None:
        raise ValueError(f"{problem} runs need a time step paired with each level")
    cache = cache or _AssemblyCache()
    if problem == "poisson":
        asm = cache.get("poisson", level, None)
        return BuiltProblem(
            poisson.reduced_problem(asm, beta), DefaultInit(), asm.mesh.h, None
        )
    if problem == "wave":
        asm = cache.get("wave", level, dt)
        return BuiltProblem(
            wave.reduced_problem(asm, beta), DefaultInit(), asm.mesh.h, asm.dt
        )
    if problem == "burgers":
        asm = cache.get("burgers", level, dt)
        return BuiltProblem(
            burgers.reduced_problem(asm, beta), DefaultInit(), asm.h, asm.dt
        )
    raise ValueError(f"unknown problem {problem!r}")


def write_simple_manifest(path, mapping):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(f"{k} = {v}" for k, v in mapping.items()) + "\n")


def write_manifest(spec, path, extra=None):
    lines = [
        f"problem = {spec.problem}",
        f"rules = {','.join(r.value for r in spec.rules)}",
        f"betas = {','.join(fmt(b) for b in spec.betas)}",
        f"epsilons = {','.join(fmt(e) for e in spec.epsilons)}",
        f"levels = {','.join(str(l) for _, l in spec.levels)}",
        f"dts = {','.join(fmt(d) for d, _ in spec.levels)}",
        f"out_dir = {spec.out_dir}",
        f"seed = {spec.seed}",
        f"max_iter = {spec.max_iter}",
    ]
    if extra:
        lines += [f"{k} = {v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")


def _trace_lines(trace, with_objective):
    header = TRACE_HEADER if with_objective else TRACE_HEADER.rsplit(",", 1)[0]
    lines = [header]
    for rec in trace.records:
        fields = [str(rec.k), fmt(rec.grad_norm), fmt(rec.alpha)]
        if with_objective:
            fields.append(fmt(rec.objective))
        lines.append(",".join(fields))
    return lines


def run_single(spec):
    """Run one (rule, beta, level) trace and write CSV (+ figure).

    Uses the first entry of each list in the spec. Returns (trace, csv_path).
    """
    rule = spec.rules[0]
    beta = spec.betas[0]
    dt, level = spec.levels[0]
    built = build_problem(spec.problem, beta, level, dt, spec.seed)
    config = BBConfig(
        rule=rule,
        eps=spec.epsilons[-1],
        max_iter=spec.max_iter,
        init=built.init,
        record_objective=spec.record_objective,
    )
    trace = run(built.problem, config)

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"trace_{spec.problem}_{rule.value}_beta{beta:g}_L{level}"
    csv_path = spec.out_dir / f"{stem}.csv"
    csv_path.write_text("\n".join(_trace_lines(trace, spec.record_objective)) + "\n")
    write_manifest(spec, spec.out_dir / "manifest.txt", extra={"command": "run"})
    if spec.figures:
        from .figures import save_trace_figure

        save_trace_figure(
            trace,
            spec.out_dir / f"{stem}.png",
            title=f"{spec.problem} {rule.value} beta={beta:g} L={level}",
            eps=spec.epsilons[-1],
        )
    return trace, csv_path


def build_table(spec):
    """Termination counts for the full (rule, beta, level, eps) grid.

    One BB run per (rule, beta, level) at the smallest tolerance serves all
    eps entries of that group. Failed runs produce rows with an error
    reason; the table is still emitted.
    """
    cache = _AssemblyCache()
    eps_min = spec.epsilons[-1]
    rows = []
    for rule in spec.rules:
        for beta in spec.betas:
            for dt, level in spec.levels:
                built = build_problem(spec.problem, beta, level, dt, spec.seed, cache)
                config = BBConfig(
                    rule=rule, eps=eps_min, max_iter=spec.max_iter, init=built.init
                )
                try:
                    trace = run(built.problem, config)
                except BBGradError as exc:
                    for eps in spec.epsilons:
                        rows.append(
                            TableRow(
                                spec.problem, rule.value, beta, eps, level,
                                built.h, built.dt, None, f"error: {exc}",
                            )
                        )
                    continue
                for eps in spec.epsilons:
                    k = k_star(trace, eps)
                    reason = "converged" if k is not None else trace.reason
                    rows.append(
                        TableRow(
                            spec.problem, rule.value, beta, eps, level,
                            built.h, built.dt, k, reason,
                        )
                    )
    return rows


def write_table(spec, rows):
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = spec.out_dir / f"table_{spec.problem}.csv"
    csv_path.write_text(
        "\n".join([TABLE_HEADER] + [row.to_csv() for row in rows]) + "\n"
    )
    write_manifest(spec, spec.out_dir / "manifest.txt", extra={"command": "table"})
    if spec.figures:
        from .figures import save_table_figure

        for beta in spec.betas:
            save_table_figure(
                [r for r in rows if r.beta == beta],
                spec.out_dir / f"table_{spec.problem}_beta{beta:g}.png",
                title=f"{spec.problem} termination counts, beta={beta:g}",
            )
    return csv_path


def read_table(csv_path):
    """Parse a table CSV back into rows."""
    lines = Path(csv_path).read_text().strip().splitlines()
    if not lines or lines[0] != TABLE_HEADER:
        raise ValueError(f"{csv_path} is not a termination-count table")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            TableRow(
                problem=parts[0],
                rule=parts[1],
                beta=float(parts[2]),
                eps=float(parts[3]),
                level=int(parts[4]),
                h=float(parts[5]) if parts[5] else None,
                dt=float(parts[6]) if parts[6] else None,
                k_star=int(parts[7]) if parts[7] else None,
                reason=parts[8],
            )
        )
    return rows


@dataclass(frozen=True)
class SpreadRow:
    problem: str
    rule: str
    beta: float
    eps: float
    ell: Optional[int]
    status: str

    def to_csv(self):
        return ",".join(
            fmt(v) for v in (self.problem, self.rule, self.beta, self.eps, self.ell, self.status)
        )


def spread(rows):
    """Mesh-independence defect per (problem, rule, beta, eps): the maximum
    pairwise difference of k_star across levels."""
    groups = {}
    for row in rows:
        groups.setdefault((row.problem, row.rule, row.beta, row.eps), []).append(row)
    out = []
    for (problem, rule, beta, eps), members in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], -kv[0][2], -kv[0][3])
    ):
        ks = [m.k_star for m in members]
        if len(ks) >= 2 and all(k is not None for k in ks):
            out.append(SpreadRow(problem, rule, beta, eps, max(ks) - min(ks), "ok"))
        else:
            out.append(SpreadRow(problem, rule, beta, eps, None, "unavailable"))
    return out


def write_spread(rows, out_dir, figures=True):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "spread.csv"
    csv_path.write_text("\n".join([SPREAD_HEADER] + [r.to_csv() for r in rows]) + "\n")
    return csv_path


@dataclass(frozen=True)
class SandwichRow:
    problem: str
    rule: str
    beta: float
    eps: float
    level: int
    k_star: Optional[int]
    k_ref: Optional[int]
    lower: Optional[int]
    upper: Optional[int]
    violation: bool

    def to_csv(self):
        return ",".join(
            fmt(v)
            for v in (
                self.problem, self.rule, self.beta, self.eps, self.level,
                self.k_star, self.k_ref, self.lower, self.upper, self.violation,
            )
        )


def sandwich_check(rows, reference_level, slack=1, ell_bound=6):
    """Compare coarse-level counts against the finest level as the proxy for
    the limit problem: flag k outside [k_ref - ell_bound, k_ref + slack].

    Report-only: violations are returned, never raised.
    """
    ref = {
        (r.problem, r.rule, r.beta, r.eps): r.k_star
        for r in rows
        if r.level == reference_level
    }
    out = []
    for row in rows:
        if row.level == reference_level:
            continue
        k_ref = ref.get((row.problem, row.rule, row.beta, row.eps))
        if k_ref is None or row.k_star is None:
            out.append(
                SandwichRow(
                    row.problem, row.rule, row.beta, row.eps, row.level,
                    row.k_star, k_ref, None, None, True,
                )
            )
            continue
        lower = k_ref - ell_bound
        upper = k_ref + slack
        out.append(
            SandwichRow(
                row.problem, row.rule, row.beta, row.eps, row.level,
                row.k_star, k_ref, lower, upper,
                not (lower <= row.k_star <= upper),
            )
        )
    return out


def write_sandwich(rows, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sandwich.csv"
    csv_path.write_text("\n".join([SANDWICH_HEADER] + [r.to_csv() for r in rows]) + "\n")
    return csv_path


@dataclass(frozen=True)
class SweepRow:
    instance: int
    shift: float
    decay: str
    rate: float
    n: int
    kappa: float
    gamma: float
    rho: float
    half_life: Optional[int]
    half_life_bound: Optional[int]
    monotone: bool

    def to_csv(self):
        return ",".join(
            fmt(v)
            for v in (
                self.instance, self.shift, self.decay, self.rate, self.n,
                self.kappa, self.gamma, self.rho, self.half_life,
                self.half_life_bound, self.monotone,
            )
        )


def spectral_sweep(shifts, ns, rule=StepRule.BB1, decay="geometric", rate=0.5, seed=0):
    """Rate constants, empirical half-life, and monotonicity for a grid of
    clustered-spectrum instances."""
    rows = []
    idx = 0
    for shift in shifts:
        for n in ns:
            built = spectral.make_clustered_problem(
                shift, n, decay=decay, rate=rate, seed=seed + idx if seed else None
            )
            constants = spectral.rate_constants(built.operator)
            g1_norm = wnorm(built.problem.space, built.problem.gradient(built.init.u1))
            config = BBConfig(
                rule=rule,
                eps=max(1e-13 * g1_norm, 5e-300),
                max_iter=100_000,
                init=built.init,
            )
            trace = run(built.problem, config)
            norms = trace.grad_norms()
            monotone = bool(np.all(np.diff(norms) <= 0.0))
            try:
                half = spectral.empirical_half_life(built.operator, trace)
            except BBGradError:
                half = None
            rows.append(
                SweepRow(
                    idx, float(shift), decay, float(rate), int(n),
                    constants.kappa, constants.gamma, constants.rho,
                    half, spectral.half_life_bound(built.operator), monotone,
                )
            )
            idx += 1
    return rows


def write_sweep(rows, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "spectral_sweep.csv"
    csv_path.write_text("\n".join([SWEEP_HEADER] + [r.to_csv() for r in rows]) + "\n")
    return csv_path


def parse_config_file(path):
    """Flat key=value experiment manifest.

    Keys: problem, rules, betas, epsilons, levels, dt_pairs, out_dir, seed.
    Lists are comma separated; dt_pairs entries are dt:level.
    """
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()

    out = {}
    if "problem" in values:
        out["problem"] = values["problem"]
    if "rules" in values:
        out["rules"] = tuple(StepRule(r.strip().upper()) for r in values["rules"].split(","))
    if "betas" in values:
        out["betas"] = tuple(float(b) for b in values["betas"].split(","))
    if "epsilons" in values:
        out["epsilons"] = tuple(float(e) for e in values["epsilons"].split(","))
    if "dt_pairs" in values:
        pairs = []
        for chunk in values["dt_pairs"].split(","):
            dt_str, _, level_str = chunk.strip().partition(":")
            pairs.append((float(dt_str), int(level_str)))
        out["levels"] = tuple(pairs)
    elif "levels" in values:
        out["levels"] = tuple((None, int(l)) for l in values["levels"].split(","))
    if "out_dir" in values:
        out["out_dir"] = Path(values["out_dir"])
    if "seed" in values:
        out["seed"] = int(values["seed"])
    return out
