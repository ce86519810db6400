"""Metropolis-Hastings walk over a fiber using random degree-2 sorting moves.

Each step draws an unordered pair of distinct cells uniformly, sorts the
pair's indices, and proposes ``eps * (sorted pair - drawn pair)`` with a fair
random sign ``eps``. Already-sorted pairs and moves that would make a count
negative leave the state where it is (the step still counts). The target is
``pi(x) ~ prod_i h(i)^x(i) / x(i)!`` on the fiber of the starting table.

The inner loop is compiled with numba; ``_python_step`` is the same function
run by the interpreter and is used to cross-check the kernel.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import gammaln

from .configuration import Configuration
from .errors import EmptyFiberStart
from .groebner import Move, sort_interleave
from .models import CompiledModel
from .stats import batch_means_se, estimate_p_value

STEP_CHUNK = 1 << 18  # random draws generated per block of steps
RECORD_BYTES = 1 << 25  # memory budget for buffered recorded states


@dataclass
class ChainConfig:
    seed: int
    burn_in: int
    samples: int
    thin: int = 1
    batches: int = 50

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.thin < 1:
            raise ValueError("thin must be positive")
        if self.batches < 1:
            raise ValueError("batches must be positive")


@dataclass
class ChainState:
    x: np.ndarray
    log_weight: float
    step_count: int = 0
    accept_count: int = 0


@dataclass
class ChainResult:
    statistics: np.ndarray
    observed: float
    acceptance_rate: float
    steps: int
    accepted: int
    x_final: np.ndarray = field(repr=False)
    seed: int = 0
    burn_in: int = 0
    thin: int = 1
    batches: int = 50

    @property
    def p_value(self) -> float:
        return estimate_p_value(self)[0]

    @property
    def se_batch(self) -> float:
        return estimate_p_value(self)[1]

    def batch_se_of_mean(self) -> float:
        """Batch-means standard error of the mean sampled statistic."""
        return batch_means_se(self.statistics, self.batches)

    def metadata(self) -> dict:
        p, se = estimate_p_value(self)
        return {
            "seed": int(self.seed),
            "burn_in": int(self.burn_in),
            "samples": int(len(self.statistics)),
            "thin": int(self.thin),
            "batches": int(self.batches),
            "steps": int(self.steps),
            "accepted": int(self.accepted),
            "acceptance_rate": float(self.acceptance_rate),
            "observed": float(self.observed),
            "p_mcmc": p,
            "se_batch": None if math.isnan(se) else se,
        }


def conditional_log_mass(model: CompiledModel, x) -> float:
    """``sum_i x(i) log h(i) - log x(i)!`` (fiber-constant factors dropped)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("counts must be nonnegative")
    log_h = model.configuration.log_weights
    return float(np.sum(x * log_h - gammaln(x + 1.0)))


def _draw_pair(rng, nu: int) -> tuple:
    a = int(rng.integers(nu))
    b = int(rng.integers(nu - 1))
    if b >= a:
        b += 1
    return a, b


def propose_move(config: Configuration, rng) -> Move | None:
    """Random signed sorting move, or None when the drawn pair is already sorted."""
    nu = config.nu
    if nu < 2:
        return None
    a, b = _draw_pair(rng, nu)
    sign = 1 if rng.integers(2) else -1
    ca, cb = config.cells[a], config.cells[b]
    lo, hi = sort_interleave(ca, cb)
    if sorted([lo, hi]) == sorted([ca, cb]):
        return None
    move = Move(plus=_counts([config.index(lo), config.index(hi)]), minus=_counts([a, b]))
    return move if sign > 0 else move.negated()


def _counts(idx) -> dict:
    out: dict = {}
    for i in idx:
        out[i] = out.get(i, 0) + 1
    return out


def _delta_log_mass(log_h, x, delta: dict) -> float:
    total = 0.0
    for i, dv in delta.items():
        total += dv * log_h[i] - (math.lgamma(x[i] + dv + 1) - math.lgamma(x[i] + 1))
    return total


def mh_step(model: CompiledModel, state: ChainState, rng) -> ChainState:
    config = model.configuration
    move = propose_move(config, rng)
    u = rng.random()
    nxt = ChainState(state.x, state.log_weight, state.step_count + 1, state.accept_count)
    if move is None:
        return nxt
    delta = dict(move.plus)
    for i, k in move.minus.items():
        delta[i] = delta.get(i, 0) - k
    if any(state.x[i] + dv < 0 for i, dv in delta.items()):
        return nxt
    log_ratio = _delta_log_mass(config.log_weights, state.x, delta)
    if math.log(u) < log_ratio:
        x = state.x.copy()
        for i, dv in delta.items():
            x[i] += dv
        nxt.x = x
        nxt.log_weight = state.log_weight + log_ratio
        nxt.accept_count += 1
    return nxt


# --- compiled kernel -------------------------------------------------------


def _lex_find(cells, row):
    """Index of ``row`` in the lexicographically sorted ``cells``, or -1."""
    lo, hi = 0, cells.shape[0]
    tau = cells.shape[1]
    while lo < hi:
        mid = (lo + hi) // 2
        cmp = 0
        for k in range(tau):
            if cells[mid, k] != row[k]:
                cmp = -1 if cells[mid, k] < row[k] else 1
                break
        if cmp == 0:
            return mid
        if cmp < 0:
            lo = mid + 1
        else:
            hi = mid
    return -1


def _same(u, v):
    for k in range(u.shape[0]):
        if u[k] != v[k]:
            return False
    return True


def _make_step(same, find):
    """Build the step function around the given row helpers.

    The same source serves the interpreter and the numba kernel.
    """

    def step(cells, log_h, x, a, b, s, log_u, lo, hi):
        """One MH step applied to ``x`` in place; returns 1 on acceptance.

        ``a != b`` are the drawn cells, ``s`` the sign and ``log_u`` the log of
        the uniform variate. ``lo``/``hi`` are scratch rows of length tau.
        """
        tau = cells.shape[1]
        i = 0
        j = 0
        for k in range(2 * tau):
            if j >= tau or (i < tau and cells[a, i] <= cells[b, j]):
                v = cells[a, i]
                i += 1
            else:
                v = cells[b, j]
                j += 1
            if k % 2 == 0:
                lo[k // 2] = v
            else:
                hi[k // 2] = v
        if (same(lo, cells[a]) and same(hi, cells[b])) or (same(lo, cells[b]) and same(hi, cells[a])):
            return 0
        c = find(cells, lo)
        e = find(cells, hi)
        if c < 0 or e < 0:
            raise RuntimeError("sorted cell missing from the configuration")
        if s > 0:
            if x[a] < 1 or x[b] < 1:
                return 0
        else:
            if c == e:
                if x[c] < 2:
                    return 0
            elif x[c] < 1 or x[e] < 1:
                return 0
        # a, b lose s; c and e gain s (c may equal e); {a, b} and {c, e} are disjoint
        d = 0.0
        d += -s * log_h[a] - (math.lgamma(x[a] - s + 1) - math.lgamma(x[a] + 1))
        d += -s * log_h[b] - (math.lgamma(x[b] - s + 1) - math.lgamma(x[b] + 1))
        if c == e:
            d += 2 * s * log_h[c] - (math.lgamma(x[c] + 2 * s + 1) - math.lgamma(x[c] + 1))
        else:
            d += s * log_h[c] - (math.lgamma(x[c] + s + 1) - math.lgamma(x[c] + 1))
            d += s * log_h[e] - (math.lgamma(x[e] + s + 1) - math.lgamma(x[e] + 1))
        if log_u < d:
            x[a] -= s
            x[b] -= s
            x[c] += s
            x[e] += s
            return 1
        return 0

    return step


_python_step = _make_step(_same, _lex_find)
_step_jit = numba.njit(nogil=True)(
    _make_step(numba.njit(nogil=True)(_same), numba.njit(nogil=True)(_lex_find))
)


@numba.njit(nogil=True, cache=True)
def _run_steps(cells, log_h, x, a, b, s, log_u):
    tau = cells.shape[1]
    lo = np.empty(tau, np.int64)
    hi = np.empty(tau, np.int64)
    acc = 0
    for t in range(a.shape[0]):
        acc += _step_jit(cells, log_h, x, a[t], b[t], s[t], log_u[t], lo, hi)
    return acc


@numba.njit(nogil=True, cache=True)
def _run_recording(cells, log_h, x, a, b, s, log_u, thin, out):
    """Record x into each row of ``out``, running ``thin`` steps after each."""
    tau = cells.shape[1]
    lo = np.empty(tau, np.int64)
    hi = np.empty(tau, np.int64)
    acc = 0
    t = 0
    for r in range(out.shape[0]):
        out[r, :] = x
        for _ in range(thin):
            acc += _step_jit(cells, log_h, x, a[t], b[t], s[t], log_u[t], lo, hi)
            t += 1
    return acc


def _draws(rng, nu: int, n: int) -> tuple:
    a = rng.integers(0, nu, size=n)
    b = rng.integers(0, nu - 1, size=n)
    b += b >= a
    s = rng.integers(0, 2, size=n) * 2 - 1
    log_u = np.log(rng.random(size=n))
    return a, b, s, log_u


class _Walker:
    """Chunked driver around the compiled kernels."""

    def __init__(self, config: Configuration, x0, seed: int, unit_weights: bool = False):
        self.cells = np.ascontiguousarray(np.array(config.cells, dtype=np.int64).reshape(config.nu, config.tau))
        self.log_h = np.zeros(config.nu) if unit_weights else np.ascontiguousarray(config.log_weights)
        self.nu = config.nu
        self.x = np.array(x0, dtype=np.int64)
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.accepted = 0

    def advance(self, n: int) -> None:
        if self.nu < 2:
            self.steps += n
            return
        while n > 0:
            k = min(n, STEP_CHUNK)
            self.accepted += int(_run_steps(self.cells, self.log_h, self.x, *_draws(self.rng, self.nu, k)))
            self.steps += k
            n -= k

    def record(self, count: int, thin: int) -> np.ndarray:
        out = np.empty((count, self.nu), dtype=np.int64)
        if self.nu < 2:
            out[:] = self.x
            self.steps += count * thin
            return out
        if thin > STEP_CHUNK:
            for r in range(count):
                out[r] = self.x
                self.advance(thin)
            return out
        per = max(1, STEP_CHUNK // thin)
        for r0 in range(0, count, per):
            r1 = min(count, r0 + per)
            draws = _draws(self.rng, self.nu, (r1 - r0) * thin)
            self.accepted += int(_run_recording(self.cells, self.log_h, self.x, *draws, thin, out[r0:r1]))
            self.steps += (r1 - r0) * thin
        return out


def _check_start(config: Configuration, x0) -> np.ndarray:
    x = np.asarray(x0)
    if x.ndim != 1 or x.shape[0] != config.nu:
        raise EmptyFiberStart(f"start table has shape {x.shape}, expected ({config.nu},)")
    if not np.all(np.equal(np.mod(x, 1), 0)):
        raise EmptyFiberStart("start table must be integer")
    x = x.astype(np.int64)
    if np.any(x < 0):
        raise EmptyFiberStart("start table has a negative count")
    return x


def _evaluate(statistic, states: np.ndarray) -> np.ndarray:
    if getattr(statistic, "vectorized", False):
        return np.asarray(statistic(states), dtype=float)
    return np.array([statistic(row) for row in states], dtype=float)


def run_chain(model: CompiledModel, x0, cfg: ChainConfig, statistic, unit_weights: bool = False) -> ChainResult:
    """Burn in, then record ``statistic`` on ``cfg.samples`` states ``cfg.thin`` steps apart.

    The first recorded state is the one reached after burn-in, so
    ``burn_in=0, samples=1`` returns the statistic of ``x0``.
    ``unit_weights=True`` targets ``prod 1/x(i)!``, i.e. drops ``h``; this is
    not the model's conditional distribution and exists for comparison only.
    """
    config = model.configuration
    x0 = _check_start(config, x0)
    walker = _Walker(config, x0, cfg.seed, unit_weights)
    walker.advance(cfg.burn_in)
    budget = max(1, RECORD_BYTES // (8 * config.nu))
    stats = []
    left = cfg.samples
    while left > 0:
        k = min(left, budget)
        stats.append(_evaluate(statistic, walker.record(k, cfg.thin)))
        left -= k
    statistics = np.concatenate(stats)
    return ChainResult(
        statistics=statistics,
        observed=float(_evaluate(statistic, x0[None, :])[0]),
        acceptance_rate=walker.accepted / walker.steps if walker.steps else 0.0,
        steps=walker.steps,
        accepted=walker.accepted,
        x_final=walker.x,
        seed=cfg.seed,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        batches=cfg.batches,
    )


def run_states(model: CompiledModel, x0, cfg: ChainConfig, unit_weights: bool = False) -> np.ndarray:
    """Recorded states themselves (``samples x nu``); for small fibers only."""
    config = model.configuration
    walker = _Walker(config, _check_start(config, x0), cfg.seed, unit_weights)
    walker.advance(cfg.burn_in)
    return walker.record(cfg.samples, cfg.thin)


def run_chains(model: CompiledModel, x0, cfg: ChainConfig, statistic, seeds, workers: int = 1,
               unit_weights: bool = False) -> list:
    """Independent chains, one per seed; the kernel releases the GIL so threads overlap."""
    cfgs = [ChainConfig(seed=s, burn_in=cfg.burn_in, samples=cfg.samples, thin=cfg.thin,
                        batches=cfg.batches) for s in seeds]
    if workers <= 1:
        return [run_chain(model, x0, c, statistic, unit_weights) for c in cfgs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run_chain(model, x0, c, statistic, unit_weights), cfgs))
