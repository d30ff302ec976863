"""Random sparse functions and the Monte Carlo sweep engine."""

from __future__ import annotations

import ast
import csv
import io
import math
import operator
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import gamma_exponent
from .marginals import DEFAULT_TOL, EXACT, FLOAT, SparseSupportFunction, Tolerance, fourier_coefficient
from .oracle import l1_witness, single_cycle_probability
from .sparsestfit import check_linear_independence, recover, unique_witness_mask
from .symgroup import LambdaShape, check_cap, sample_uniform_batch

CONDITION1 = "condition1"
FULL = "full-recovery"


@dataclass(frozen=True)
class ContinuousValues:
    a: float = 1.0
    b: float = 2.0

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")


@dataclass(frozen=True)
class IntegerValues:
    T: int = 1000

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("need T >= 1")


@dataclass(frozen=True)
class RandomModelSpec:
    n: int
    K: int
    values: ContinuousValues | IntegerValues = ContinuousValues()
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.K < 0:
            raise ValueError("need n >= 1 and K >= 0")

    @property
    def mode(self) -> str:
        return FLOAT if isinstance(self.values, ContinuousValues) else EXACT


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one trial, derived from the sweep seed and the grid key."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


def _draw(spec: RandomModelSpec, rng: np.random.Generator) -> tuple[np.ndarray, list]:
    perms = sample_uniform_batch(spec.n, spec.K, rng)
    if isinstance(spec.values, ContinuousValues):
        values = rng.uniform(spec.values.a, spec.values.b, spec.K).tolist()
    else:
        values = [Fraction(int(v)) for v in rng.integers(1, spec.values.T + 1, spec.K)]
    return perms, values


def sample_function(spec: RandomModelSpec, rng: np.random.Generator | None = None) -> SparseSupportFunction:
    """K uniform permutations with i.i.d. values; repeats merge (see ``duplicates_merged``)."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    perms, values = _draw(spec, rng)
    if spec.K == 0:
        return SparseSupportFunction(spec.n, [], spec.mode)
    return SparseSupportFunction.from_arrays(perms, values, spec.mode)


def _condition1(perms: np.ndarray, shape: LambdaShape) -> bool:
    if len(perms) == 0:
        return True
    mask, _ = unique_witness_mask(np.unique(perms, axis=0), shape)
    return bool(mask.any(axis=1).all())


def trial_condition1(spec: RandomModelSpec, shape: LambdaShape, rng: np.random.Generator) -> bool:
    """Every support permutation of a fresh sample has a unique witness.

    Linear independence holds with probability one for continuous values and
    is not re-checked here.
    """
    check_cap(shape, None)
    perms, _ = _draw(spec, rng)
    return _condition1(perms, shape)


@dataclass(frozen=True)
class TrialOutcome:
    condition1: bool
    recovered: bool


def run_trial(spec: RandomModelSpec, shape: LambdaShape, rng: np.random.Generator,
              tol: Tolerance = DEFAULT_TOL) -> TrialOutcome:
    """Condition 1 and full recovery on the same sample.

    Integer values often satisfy small integer relations, so in exact mode
    ``condition1`` also needs a verified linear-independence search.
    """
    perms, values = _draw(spec, rng)
    cond = _condition1(perms, shape)
    if spec.K == 0:
        f = SparseSupportFunction(spec.n, [], spec.mode)
    else:
        f = SparseSupportFunction.from_arrays(perms, values, spec.mode)
    if cond and spec.mode == EXACT:
        cond = check_linear_independence(f.values, f.K).status == "verified"
    result = recover(fourier_coefficient(f, shape), tol)
    if not result.recovered:
        return TrialOutcome(cond, False)
    same = result.function == f if spec.mode == EXACT else result.function.close_to(f, tol)
    return TrialOutcome(cond, same)


def trial_full_recovery(spec: RandomModelSpec, shape: LambdaShape, rng: np.random.Generator,
                        tol: Tolerance = DEFAULT_TOL) -> bool:
    return run_trial(spec, shape, rng, tol).recovered


# --- schedules ------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"log": math.log, "loglog": lambda x: math.log(math.log(x)), "sqrt": math.sqrt,
          "factorial": math.factorial, "floor": math.floor, "exp": math.exp}


def _evaluate(node, names: dict):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id in names:
        return names[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_evaluate(node.left, names), _evaluate(node.right, names))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_evaluate(node.operand, names)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
        return _FUNCS[node.func.id](*(_evaluate(a, names) for a in node.args))
    raise ValueError(f"unsupported expression element: {ast.dump(node)}")


@dataclass(frozen=True)
class Schedule:
    """A K-schedule: a formula in n, D, m, gamma or an explicit list of K."""

    tag: str
    explicit: tuple[int, ...] | None = None

    @classmethod
    def formula(cls, text: str) -> "Schedule":
        ast.parse(text, mode="eval")
        return cls(text.replace(" ", ""))

    @classmethod
    def values(cls, ks: Sequence[int]) -> "Schedule":
        return cls("explicit", tuple(int(k) for k in ks))

    def evaluate(self, shape: LambdaShape) -> list[int]:
        if self.explicit is not None:
            return list(self.explicit)
        names = {"n": shape.n, "D": shape.d, "m": shape.n - shape.parts[0],
                 "gamma": gamma_exponent(shape)[0], "pi": math.pi, "e": math.e}
        k = math.floor(_evaluate(ast.parse(self.tag, mode="eval"), names))
        if k < 1:
            raise ValueError(f"schedule {self.tag} gives K = {k} < 1 at shape ({shape})")
        return [k]


def shape_for(template: str, n: int) -> LambdaShape:
    """Shape from a comma-separated template whose parts may use n, e.g. "n-2,2"."""
    parts = [_evaluate(ast.parse(t, mode="eval"), {"n": n}) for t in template.split(",")]
    return LambdaShape(tuple(int(p) for p in parts))


@dataclass(frozen=True)
class SweepSpec:
    shape: str
    ns: tuple[int, ...]
    schedules: tuple[Schedule, ...]
    trials: int
    mode: str = CONDITION1
    seed: int = 0
    values: ContinuousValues | IntegerValues = ContinuousValues()
    tol: Tolerance = DEFAULT_TOL

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.mode not in (CONDITION1, FULL):
            raise ValueError(f"unknown sweep mode {self.mode!r}")

    def grid(self) -> list[tuple[int, LambdaShape, int, str]]:
        out = []
        for n in self.ns:
            shape = shape_for(self.shape, n)
            for sched in self.schedules:
                for k in sched.evaluate(shape):
                    out.append((n, shape, k, sched.tag))
        return out


@dataclass
class SweepPoint:
    n: int
    shape: LambdaShape
    K: int
    schedule_tag: str
    trials: int
    successes: int
    seconds: float
    implication_violations: int = 0

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass
class SweepResult:
    points: list[SweepPoint] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "shape", "K", "schedule_tag", "trials", "successes", "rate", "seconds", "seed"])
        seed = self.metadata.get("seed", "")
        for p in self.points:
            writer.writerow([p.n, str(p.shape), p.K, p.schedule_tag, p.trials, p.successes,
                             f"{p.success_rate:.6f}", f"{p.seconds:.3f}" if timing else "", seed])
        return buf.getvalue()


def _run_block(task) -> tuple[int, int, int, float]:
    """Run trials [lo, hi) of one grid point; returns (index, successes, violations, seconds)."""
    index, n, shape, K, mode, seed, values, tol, lo, hi = task
    spec = RandomModelSpec(n, K, values, seed)
    successes = violations = 0
    start = time.perf_counter()
    for trial in range(lo, hi):
        rng = trial_rng(seed, n, K, trial)
        if mode == CONDITION1:
            successes += trial_condition1(spec, shape, rng)
        else:
            out = run_trial(spec, shape, rng, tol)
            successes += out.recovered
            violations += out.condition1 and not out.recovered
    return index, successes, violations, time.perf_counter() - start


def run_sweep(spec: SweepSpec, workers: int = 1, block: int = 10) -> SweepResult:
    """Evaluate every grid point; trial t of point (n, K) always uses the same
    derived generator, so totals do not depend on ``workers``."""
    grid = spec.grid()
    tasks = []
    for index, (n, shape, K, _) in enumerate(grid):
        check_cap(shape, None)
        for lo in range(0, spec.trials, block):
            tasks.append((index, n, shape, K, spec.mode, spec.seed, spec.values, spec.tol,
                          lo, min(spec.trials, lo + block)))
    totals = [[0, 0, 0.0] for _ in grid]
    if workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_block, tasks))
    else:
        outcomes = [_run_block(t) for t in tasks]
    for index, succ, viol, secs in outcomes:
        totals[index][0] += succ
        totals[index][1] += viol
        totals[index][2] += secs
    points = [SweepPoint(n, shape, K, tag, spec.trials, s, secs, v)
              for (n, shape, K, tag), (s, v, secs) in zip(grid, totals)]
    meta = {"seed": spec.seed, "version": __version__, "mode": spec.mode, "shape": spec.shape,
            "trials": spec.trials, "values": repr(spec.values)}
    return SweepResult(points, meta)


def l1_failure_experiment(n: int, trials: int, seed: int, values: ContinuousValues = ContinuousValues()) -> float | None:
    """Fraction of K=2 samples at (n-1, 1) with a verified equal-l1 witness.

    The reference value is 1 - single_cycle_probability(n).
    """
    if n < 4:
        raise ValueError("need n >= 4")
    if trials == 0:
        return None
    shape = LambdaShape((n - 1, 1))
    spec = RandomModelSpec(n, 2, values, seed)
    hits = 0
    for t in range(trials):
        f = sample_function(spec, trial_rng(seed, n, 2, t))
        hits += f.K == 2 and l1_witness(f, shape) is not None
    return hits / trials


def predicted_l1_fraction(n: int) -> Fraction:
    return 1 - single_cycle_probability(n)
