"""Maximum likelihood fitting, Pearson chi-square and P-value summaries."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaincc

from .errors import AllZeroData, NoConvergence, SupportViolation
from .models import CompiledModel

# relative slack when deciding that a sampled statistic ties the observed one
TIE_RTOL = 1e-9


@dataclass
class FittedModel:
    q: np.ndarray
    m_hat: np.ndarray
    support: np.ndarray  # boolean mask over cells
    iterations: int
    final_gap: float
    loglik_trace: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> float:
        return float(self.m_hat.sum())


def _loglik(x, log_m, n, support) -> float:
    # multinomial log-likelihood up to a constant: sum x log(m / n)
    return float(np.sum(x[support] * (log_m[support] - np.log(n))))


def fit_mle(
    model: CompiledModel,
    x,
    tol: float | None = None,
    max_iter: int = 100_000,
    trace: bool = False,
) -> FittedModel:
    """Fit ``p(i) = h(i) prod_j q_j^{a_ji}`` by generalized iterative scaling.

    Every column of ``A`` sums to ``tau`` so the update
    ``q_j <- q_j (t_j / mu_j)^(1/tau)`` is a valid GIS step. Rows with a zero
    marginal get ``q_j = 0`` and every cell using them is fixed at zero.
    ``tol`` defaults to ``1e-8 * n`` on the max marginal gap.
    """
    config = model.configuration
    A = config.A.astype(float)
    x = np.asarray(x, dtype=float)
    n = x.sum()
    if n <= 0:
        raise AllZeroData("all counts are zero")
    if tol is None:
        tol = 1e-8 * n
    tau = config.tau
    t = config.A @ x
    live_rows = t > 0
    support = ~np.any((config.A > 0) & ~live_rows[:, None], axis=0)

    log_h = config.log_weights
    log_q = np.zeros(config.d)
    A_s = A[:, support]
    log_t = np.log(np.where(live_rows, t, 1.0))

    def expected(log_q):
        log_m = np.full(config.nu, -np.inf)
        eta = log_h[support] + log_q @ A_s
        eta -= eta.max()
        log_m[support] = eta - np.log(np.exp(eta).sum()) + np.log(n)
        return log_m

    log_m = expected(log_q)
    lls = []
    it = 0
    while True:
        m = np.exp(log_m)
        mu = A @ m
        gap = float(np.max(np.abs(mu - t)))
        if trace:
            lls.append(_loglik(x, log_m, n, support))
        if gap <= tol or it >= max_iter:
            break
        step = np.zeros(config.d)
        step[live_rows] = (log_t[live_rows] - np.log(mu[live_rows])) / tau
        log_q += step
        log_m = expected(log_q)
        it += 1

    q = np.where(live_rows, np.exp(log_q), 0.0)
    fitted = FittedModel(q=q, m_hat=np.exp(log_m), support=support, iterations=it,
                         final_gap=gap, loglik_trace=lls)
    if gap > tol:
        raise NoConvergence(f"GIS stopped after {max_iter} iterations with gap {gap:.3g}", fitted)
    return fitted


def pearson_chi2(x, m_hat) -> float:
    x = np.asarray(x, dtype=float)
    m_hat = np.asarray(m_hat, dtype=float)
    zero = m_hat <= 0
    if np.any(x[zero] > 0):
        raise SupportViolation("positive count in a cell with zero fitted value")
    pos = ~zero
    return float(np.sum((x[pos] - m_hat[pos]) ** 2 / m_hat[pos]))


class PearsonStatistic:
    """Pearson chi-square against fixed fitted values; accepts one table or a stack of tables."""

    vectorized = True

    def __init__(self, m_hat):
        m_hat = np.asarray(m_hat, dtype=float)
        self.support = m_hat > 0
        self.m = m_hat[self.support]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x[..., ~self.support] > 0):
            raise SupportViolation("positive count in a cell with zero fitted value")
        xs = x[..., self.support]
        return np.sum((xs - self.m) ** 2 / self.m, axis=-1)


def tail_fraction(samples, observed: float) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no samples")
    return float(np.mean(samples >= observed - TIE_RTOL * max(1.0, abs(observed))))


def batch_means_se(indicator, batches: int) -> float:
    """Standard error of a chain average from ``batches`` contiguous batch means.

    The final partial batch is dropped. Returns nan with fewer than two batches.
    """
    y = np.asarray(indicator, dtype=float)
    batches = min(batches, y.size)
    if batches < 2:
        return float("nan")
    size = y.size // batches
    means = y[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def estimate_p_value(chain, observed: float | None = None, batches: int | None = None) -> tuple:
    """(p_mcmc, se_batch) from a chain's sampled statistics."""
    if observed is None:
        observed = chain.observed
    if batches is None:
        batches = chain.batches
    s = np.asarray(chain.statistics, dtype=float)
    hits = s >= observed - TIE_RTOL * max(1.0, abs(observed))
    return float(hits.mean()), batch_means_se(hits, batches)


def chi2_survival(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def default_df(model: CompiledModel, fitted: FittedModel) -> int:
    """Cells in the support minus the rank of ``A`` restricted to them."""
    A_s = model.configuration.A[:, fitted.support]
    return int(fitted.support.sum() - np.linalg.matrix_rank(A_s.astype(float)))


def haplotype_expected_counts(model: CompiledModel, fitted: FittedModel) -> dict:
    """Expected haplotype counts implied by a Hardy-Weinberg fit.

    Each locus contributes its fitted allele frequency; a haplotype's expected
    count over ``2n`` chromosomes is the product across loci.
    """
    import itertools

    from .models import haplotype_label

    loci = model.source.loci
    t_hat = model.configuration.A @ fitted.m_hat
    two_n = 2.0 * fitted.n
    freqs, k = [], 0
    for loc in loci:
        freqs.append(t_hat[k:k + len(loc.alleles)] / two_n)
        k += len(loc.alleles)
    out = {}
    for hap in itertools.product(*[range(len(loc.alleles)) for loc in loci]):
        out[haplotype_label(loci, hap)] = two_n * float(np.prod([freqs[j][a] for j, a in enumerate(hap)]))
    return out


@dataclass
class TestReport:
    chi2_observed: float
    p_mcmc: float
    se_batch: float
    p_asymptotic: float
    df: int
    acceptance_rate: float
    n: int = 0
    samples: int = 0
    burn_in: int = 0
    thin: int = 1
    seed: int = 0

    __test__ = False  # not a pytest class

    def to_json(self) -> str:
        d = asdict(self)
        d = {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}
        return json.dumps(d, indent=2)
