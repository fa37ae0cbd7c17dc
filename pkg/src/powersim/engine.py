"""Monte Carlo power estimation, size calibration, sample-size search and CI widths.

Replication ``i`` of a run with seed ``s`` draws from ``RandomSource(s, offset + i)``
so every replication's data depends only on its own index. Workers receive
contiguous index ranges and return p-values; the tally happens afterwards in
index order, which keeps results bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
import secrets
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .exceptions import DesignError, ParameterError, SimulationError
from .probkit import Binomial, RandomSource
from .scenarios import Scenario, get

INVALID_LIMIT = 0.10
POLICIES = ("count", "lenient", "exclude")
DEFAULT_REPS = 5000
DEFAULT_CI_REPS = 2000
SOLVE_N_MAX = 10**6
# Streams of evaluation k in a multi-evaluation run start at k << 40.
_EVAL_SHIFT = 40


def new_seed() -> int:
    return secrets.randbits(63)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple:
    if trials <= 0:
        return (0.0, 1.0)
    z = float(special.ndtri(0.5 + level / 2))
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class PowerEstimate:
    scenario_id: str
    n: int
    alpha: float
    reps: int
    rejections: int
    invalid_count: int
    power: float
    mc_se: float
    ci95: tuple
    seed: int
    params: dict = field(default_factory=dict, compare=False)
    elapsed_ms: float = field(default=0.0, compare=False)
    p_values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def as_report(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "params": self.params,
            "n": self.n,
            "alpha": self.alpha,
            "reps": self.reps,
            "seed": self.seed,
            "power": self.power,
            "mc_se": self.mc_se,
            "ci95": [self.ci95[0], self.ci95[1]],
            "invalid": self.invalid_count,
            "elapsed_ms": round(self.elapsed_ms, 3),
        }


def _scenario_state(s: Scenario) -> tuple:
    return (s.id, dict(s.params))


def _restore(state: tuple) -> Scenario:
    sid, params = state
    return get(sid).with_params(**params)


def _p_values(s: Scenario, n: int, seed: int, start: int, stop: int, offset: int) -> np.ndarray:
    out = np.empty(stop - start)
    for j, i in enumerate(range(start, stop)):
        try:
            r = s.run_once(n, RandomSource(seed, offset + i))
        except (ParameterError, DesignError):
            raise
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise SimulationError(f"replication {i} of {s.id!r} failed: {exc}") from exc
        out[j] = r.p_value if r.valid else np.nan
    return out


def _chunk_worker(state, n, seed, start, stop, offset):
    return _p_values(_restore(state), n, seed, start, stop, offset)


def simulate_p_values(s: Scenario, n: int, reps: int, seed: int, workers: int = 1, offset: int = 0) -> np.ndarray:
    """p-value of each replication in index order (NaN for invalid results)."""
    n = s.check_n(n)
    workers = max(1, int(workers))
    if workers == 1 or reps < 2 * workers:
        return _p_values(s, n, seed, 0, reps, offset)
    bounds = np.linspace(0, reps, workers + 1).astype(int)
    state = _scenario_state(s)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_chunk_worker, state, n, seed, int(a), int(b), offset)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        return np.concatenate([f.result() for f in futures])


def summarize(s: Scenario, n: int, alpha: float, seed: int, p: np.ndarray, policy: str, elapsed_ms: float = 0.0):
    reps = p.size
    valid = ~np.isnan(p)
    invalid_count = int(reps - valid.sum())
    if policy != "lenient" and invalid_count > INVALID_LIMIT * reps:
        raise SimulationError(
            f"{invalid_count} of {reps} replications of {s.id!r} gave invalid results "
            f"(limit {INVALID_LIMIT:.0%}); the test does not suit this model"
        )
    rejections = int(np.sum(p[valid] < alpha))
    denom = int(valid.sum()) if policy == "exclude" else reps
    if denom == 0:
        raise SimulationError(f"no valid replications for {s.id!r}")
    power = rejections / denom
    return PowerEstimate(
        scenario_id=s.id,
        n=n,
        alpha=alpha,
        reps=denom,
        rejections=rejections,
        invalid_count=invalid_count,
        power=power,
        mc_se=math.sqrt(power * (1 - power) / denom),
        ci95=wilson_interval(rejections, denom),
        seed=seed,
        params=dict(s.params),
        elapsed_ms=elapsed_ms,
        p_values=p,
    )


def _check_run(alpha: float, reps: int, policy: str) -> None:
    if not 0 < alpha <= 1:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if int(reps) != reps or reps < 1:
        raise ParameterError(f"reps must be a positive integer, got {reps}")
    if policy not in POLICIES:
        raise ParameterError(f"invalid_policy must be one of {POLICIES}, got {policy!r}")


def estimate_power(
    s: Scenario,
    n: int,
    alpha: float = 0.05,
    reps: int = DEFAULT_REPS,
    seed: Optional[int] = None,
    invalid_policy: str = "count",
    workers: int = 1,
    stream_offset: int = 0,
) -> PowerEstimate:
    """Fraction of replications whose p-value is strictly below ``alpha``.

    ``invalid_policy``: ``"count"`` treats invalid results as non-rejections
    and fails when more than 10% are invalid; ``"lenient"`` does the same
    without failing; ``"exclude"`` drops them from the denominator.
    """
    _check_run(alpha, reps, invalid_policy)
    seed = new_seed() if seed is None else int(seed)
    start = time.perf_counter()
    p = simulate_p_values(s, n, int(reps), seed, workers, stream_offset)
    elapsed = (time.perf_counter() - start) * 1e3
    return summarize(s, int(n), alpha, seed, p, invalid_policy, elapsed)


def estimate_size(
    s: Scenario,
    n: int,
    alpha: float = 0.05,
    reps: int = DEFAULT_REPS,
    seed: Optional[int] = None,
    invalid_policy: str = "count",
    workers: int = 1,
) -> PowerEstimate:
    """Rejection rate under the scenario's null model."""
    return estimate_power(s.null_variant(), n, alpha, reps, seed, invalid_policy, workers)


def power_curve(
    s: Scenario,
    n_list: Sequence[int],
    alpha: float = 0.05,
    reps: int = DEFAULT_REPS,
    seed: Optional[int] = None,
    invalid_policy: str = "count",
    workers: int = 1,
) -> list:
    if len(n_list) == 0:
        raise ParameterError("n_list must not be empty")
    for n in n_list:
        s.check_n(n)
    seed = new_seed() if seed is None else int(seed)
    return [
        estimate_power(s, n, alpha, reps, seed, invalid_policy, workers, stream_offset=k << _EVAL_SHIFT)
        for k, n in enumerate(n_list)
    ]


@dataclass(frozen=True)
class SolveResult:
    scenario_id: str
    target: float
    n_star: int
    estimate: PowerEstimate
    trace: tuple  # (n, PowerEstimate) in evaluation order
    seed: int

    def sorted_trace(self) -> list:
        return sorted(self.trace, key=lambda t: (t[0], t[1].reps))


class TargetUnreachable(SimulationError):
    def __init__(self, message: str, trace: tuple):
        super().__init__(message)
        self.trace = trace


def solve_sample_size(
    s: Scenario,
    target: float,
    alpha: float = 0.05,
    reps: int = DEFAULT_REPS,
    seed: Optional[int] = None,
    invalid_policy: str = "count",
    workers: int = 1,
    n_start: Optional[int] = None,
    n_max: int = SOLVE_N_MAX,
    confirm_factor: int = 4,
) -> SolveResult:
    """Smallest grid n whose estimated power reaches ``target``.

    Doubles n until the target is met, bisects on the scenario's sample-size
    grid, then re-estimates the chosen n with ``confirm_factor`` times the
    replications. Each evaluation uses fresh streams.
    """
    if not 0 < target < 1:
        raise ParameterError(f"target must lie in (0, 1), got {target}")
    _check_run(alpha, reps, invalid_policy)
    seed = new_seed() if seed is None else int(seed)
    g = s.granularity
    trace = []

    def snap_up(n: float) -> int:
        return max(s.smallest_n(), g * math.ceil(n / g))

    def evaluate(n: int, r: int) -> PowerEstimate:
        est = estimate_power(s, n, alpha, r, seed, invalid_policy, workers, stream_offset=len(trace) << _EVAL_SHIFT)
        trace.append((n, est))
        return est

    lo = None
    hi = snap_up(n_start if n_start is not None else s.smallest_n())
    while True:
        if hi > n_max:
            raise TargetUnreachable(f"power {target} not reached for {s.id!r} below n_max={n_max}", tuple(trace))
        if evaluate(hi, reps).power >= target:
            break
        lo = hi
        hi = snap_up(2 * hi)
    if lo is not None:
        while hi - lo > g:
            mid = g * ((lo + hi) // (2 * g))
            if mid <= lo:
                mid = lo + g
            if evaluate(mid, reps).power >= target:
                hi = mid
            else:
                lo = mid
    step = g
    confirm = evaluate(hi, reps * confirm_factor)
    while confirm.power < target - confirm.mc_se:
        hi = snap_up(hi + step)
        step *= 2
        if hi > n_max:
            raise TargetUnreachable(f"power {target} not confirmed for {s.id!r} below n_max={n_max}", tuple(trace))
        confirm = evaluate(hi, reps * confirm_factor)
    return SolveResult(s.id, target, hi, confirm, tuple(trace), seed)


# ---------------------------------------------------------------------------
# Confidence-interval widths
# ---------------------------------------------------------------------------

CI_KINDS = ("binom-exact", "binom-approx", "mean-known-var", "mean-t", "variance")
CI_DEFAULTS = {"p": 0.5, "mean": 1000.0, "sigma": 7.5}


@dataclass(frozen=True)
class WidthEstimate:
    kind: str
    n: int
    level: float
    reps: int
    mean_width: float
    sd_width: float
    q90_width: float
    seed: int
    params: dict = field(default_factory=dict)
    widths: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def as_report(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "n": self.n,
            "level": self.level,
            "reps": self.reps,
            "seed": self.seed,
            "mean_width": self.mean_width,
            "sd_width": self.sd_width,
            "q90_width": self.q90_width,
        }


def clopper_pearson(x: int, n: int, level: float) -> tuple:
    tail = (1 - level) / 2
    lower = 0.0 if x == 0 else float(special.betaincinv(x, n - x + 1, tail))
    upper = 1.0 if x == n else float(special.betaincinv(x + 1, n - x, 1 - tail))
    return lower, upper


def wilson_width(x: int, n: int, level: float) -> float:
    lo, hi = wilson_interval(x, n, level)
    return hi - lo


def ci_width(
    kind: str,
    n: int,
    level: float = 0.95,
    reps: int = DEFAULT_CI_REPS,
    seed: Optional[int] = None,
    **params,
) -> WidthEstimate:
    """Distribution of confidence-interval widths over ``reps`` simulated datasets.

    ``params``: ``p`` for the binomial kinds, ``mean`` and ``sigma`` for the
    normal kinds.
    """
    if kind not in CI_KINDS:
        raise ParameterError(f"kind must be one of {CI_KINDS}, got {kind!r}")
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    if int(reps) != reps or reps < 1:
        raise ParameterError(f"reps must be a positive integer, got {reps}")
    unknown = set(params) - set(CI_DEFAULTS)
    if unknown:
        raise ParameterError(f"unknown ci-width parameters {sorted(unknown)}")
    min_n = 2 if kind in ("mean-t", "variance") else 1
    if int(n) != n or n < min_n:
        raise ParameterError(f"{kind} needs an integer n >= {min_n}, got {n}")
    n = int(n)
    par = {**CI_DEFAULTS, **params}
    seed = new_seed() if seed is None else int(seed)
    tail = (1 - level) / 2
    widths = np.empty(int(reps))
    if kind in ("binom-exact", "binom-approx"):
        dist = Binomial(n, par["p"])
        for i in range(reps):
            x = int(dist.sample_n(1, RandomSource(seed, i))[0])
            if kind == "binom-exact":
                lo, hi = clopper_pearson(x, n, level)
                widths[i] = hi - lo
            else:
                widths[i] = wilson_width(x, n, level)
    else:
        sigma = par["sigma"]
        if not sigma > 0:
            raise ParameterError("sigma must be positive")
        z = float(special.ndtri(1 - tail))
        t = float(special.stdtrit(n - 1, 1 - tail)) if n > 1 else math.nan
        chi_lo = float(special.chdtri(n - 1, 1 - tail)) if n > 1 else math.nan
        chi_hi = float(special.chdtri(n - 1, tail)) if n > 1 else math.nan
        for i in range(reps):
            x = par["mean"] + sigma * RandomSource(seed, i).standard_normal(n)
            if kind == "mean-known-var":
                widths[i] = 2 * z * sigma / math.sqrt(n)
            elif kind == "mean-t":
                widths[i] = 2 * t * x.std(ddof=1) / math.sqrt(n)
            else:
                ss = (n - 1) * x.var(ddof=1)
                widths[i] = ss / chi_lo - ss / chi_hi
    return WidthEstimate(
        kind=kind,
        n=n,
        level=level,
        reps=int(reps),
        mean_width=float(widths.mean()),
        sd_width=float(widths.std(ddof=1)) if reps > 1 else 0.0,
        q90_width=float(np.quantile(widths, 0.9)),
        seed=seed,
        params=par,
        widths=widths,
    )


def default_workers() -> int:
    return os.cpu_count() or 1
