"""Acceptance checks against the published tables and the exact oracles.

Each test records one PASS/FAIL line per criterion; the lines are repeated
in the terminal summary.
"""

import random
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, SMALL_SPECS, raw_model, record_acceptance, segre, single_locus_hw, veronese
from reference_values import (
    CHI2_GENOTYPE_WISE,
    CHI2_HW,
    DF_HAPLOTYPE,
    NCT_COMPLETE_FIT,
    NCT_GROUPWISE_FIT,
    NCT_SOCIAL_COLUMNS,
    P_ASYMPTOTIC_HAPLOTYPE,
    P_MCMC_HAPLOTYPE,
    PTGDR_DIPLOTYPE_FIT,
    PTGDR_GENOTYPE_FIT,
    PTGDR_HAPLOTYPE_HW,
    PTGDR_HW_FIT,
    genotype_cell,
)

from svexact.datasets import ptgdr_model
from svexact.errors import NoConvergence, SizeLimit
from svexact.fiber_oracle import check_connectivity, enumerate_fiber, exact_conditional
from svexact.groebner import generate_groebner_basis, moves_matrix, normal_form, pair_is_sorted, sorted_form
from svexact.io import load_inputs
from svexact.models import compile_model
from svexact.sampler import ChainConfig, run_chain
from svexact.stats import (
    PearsonStatistic,
    chi2_survival,
    fit_mle,
    haplotype_expected_counts,
    pearson_chi2,
)

pytestmark = pytest.mark.slow


def _timed_fit(model_file, data_file):
    model, x = load_inputs(model_file, data_file)
    t0 = time.perf_counter()
    fitted = fit_mle(model, x)
    return model, x, fitted, time.perf_counter() - t0


# --- 1. NCT fitted values ---------------------------------------------------


@pytest.mark.parametrize("model_file,table", [
    ("nct_complete.json", NCT_COMPLETE_FIT),
    ("nct_groupwise.json", NCT_GROUPWISE_FIT),
])
def test_criterion_1_nct_mle(model_file, table):
    model, _, fitted, elapsed = _timed_fit(model_file, "nct2006.csv")
    worst, checked = 0.0, 0
    for pair, row in table.items():
        for (g, c), want in zip(NCT_SOCIAL_COLUMNS, row):
            got = fitted.m_hat[model.resolve(f"{g},{c};{pair}")]
            worst = max(worst, abs(got - want))
            checked += 1
    ok = checked == 108 and worst <= 0.01 and elapsed < 5
    record_acceptance(1, ok, f"{model_file}: {checked} values, max |diff| {worst:.4f} (tol 0.01), "
                             f"fit {elapsed:.2f} s (< 5 s)")
    assert ok


# --- 2. PTGDR fitted values ---------------------------------------------------


def _printed_tolerance(text):
    """0.0005, or half a unit in the last printed place when fewer decimals are shown."""
    decimals = len(text.split(".")[1]) if "." in text else 0
    return max(0.0005, 0.5 * 10.0 ** -decimals)


@pytest.mark.parametrize("model_file,grid", [
    ("ptgdr_hw.json", PTGDR_HW_FIT),
    ("ptgdr_genotype.json", PTGDR_GENOTYPE_FIT),
])
def test_criterion_2_genotype_tables(model_file, grid):
    model, _, fitted, elapsed = _timed_fit(model_file, "ptgdr_blacks_patients_genotype.csv")
    bad, strict_ok, total = [], 0, 0
    for i, row in enumerate(grid):
        for k, text in enumerate(row):
            got = fitted.m_hat[model.resolve(genotype_cell(i, k))]
            want = float(text)
            total += 1
            if want == 0:
                ok_cell = got == 0
                strict_ok += ok_cell
            else:
                strict_ok += abs(got - want) <= 0.0005
                ok_cell = abs(got - want) <= _printed_tolerance(text)
            if not ok_cell:
                bad.append((genotype_cell(i, k), text, round(float(got), 6)))
    ok = not bad and elapsed < 1
    record_acceptance(2, ok, f"{model_file}: {total - len(bad)}/{total} cells within printed precision "
                             f"({strict_ok}/{total} within a flat 0.0005), fit {elapsed:.3f} s (< 1 s)"
                             + (f", mismatches {bad}" if bad else ""))
    assert ok


def test_criterion_2_haplotype_expectations():
    model, _, fitted, elapsed = _timed_fit("ptgdr_hw.json", "ptgdr_blacks_patients_genotype.csv")
    got = haplotype_expected_counts(model, fitted)
    worst = max(abs(got[h] - v) for h, v in PTGDR_HAPLOTYPE_HW.items())
    ok = worst <= 0.0005 and elapsed < 1
    record_acceptance(2, ok, f"HW haplotype expectations: max |diff| {worst:.5f} (tol 0.0005)")
    assert ok


def test_criterion_2_diplotype_table():
    model, _, fitted, elapsed = _timed_fit("ptgdr_haplotype_hw.json", "ptgdr_blacks_patients.csv")
    worst = max(abs(fitted.m_hat[model.resolve(lab)] - v) for lab, v in PTGDR_DIPLOTYPE_FIT.items())
    ok = worst <= 0.0005 and elapsed < 1
    record_acceptance(2, ok, f"diplotype fit: max |diff| {worst:.5f} (tol 0.0005), fit {elapsed:.3f} s (< 1 s)")
    assert ok


# --- 3. observed chi-square -------------------------------------------------


@pytest.mark.parametrize("model_file,want", [
    ("ptgdr_hw.json", CHI2_HW),
    ("ptgdr_genotype.json", CHI2_GENOTYPE_WISE),
])
def test_criterion_3_chi2(model_file, want):
    _, x, fitted, _ = _timed_fit(model_file, "ptgdr_blacks_patients_genotype.csv")
    got = pearson_chi2(x, fitted.m_hat)
    ok = abs(got - want) <= 0.05
    record_acceptance(3, ok, f"{model_file}: chi2 {got:.4f} vs {want} (tol 0.05)")
    assert ok


# --- 4. Monte Carlo P-value, haplotype-wise HW --------------------------------

# Recorded states are this many steps apart; the burn-in and sample count are fixed
# by the criterion and the thinning is our choice.
HAPLOTYPE_THIN = 1000


def _haplotype_chains(unit_weights):
    model, x, fitted, _ = _timed_fit("ptgdr_haplotype_hw.json", "ptgdr_blacks_patients.csv")
    stat = PearsonStatistic(fitted.m_hat)
    chains, times = [], []
    for seed in range(10):
        cfg = ChainConfig(seed=seed, burn_in=100_000, samples=10_000, thin=HAPLOTYPE_THIN)
        t0 = time.perf_counter()
        chains.append(run_chain(model, x, cfg, stat, unit_weights=unit_weights))
        times.append(time.perf_counter() - t0)
    return chains, times


def test_criterion_4_asymptotic():
    _, x, fitted, _ = _timed_fit("ptgdr_haplotype_hw.json", "ptgdr_blacks_patients.csv")
    got = chi2_survival(pearson_chi2(x, fitted.m_hat), DF_HAPLOTYPE)
    ok = abs(got - P_ASYMPTOTIC_HAPLOTYPE) <= 0.0005
    record_acceptance(4, ok, f"asymptotic p at df={DF_HAPLOTYPE}: {got:.4f} vs {P_ASYMPTOTIC_HAPLOTYPE} (tol 0.0005)")
    assert ok


def test_criterion_4_unit_weights_diagnostic():
    """Not a criterion check: the same chains with h dropped from the target."""
    chains, _ = _haplotype_chains(unit_weights=True)
    ps = [c.p_value for c in chains]
    near = sum(abs(p - P_MCMC_HAPLOTYPE) <= 0.01 for p in ps)
    line = (f"[INFO] criterion 4 diagnostic, unit weights: {near}/10 seeds within 0.01 of "
          f"{P_MCMC_HAPLOTYPE}, mean p {np.mean(ps):.4f}, mean SE {np.mean([c.se_batch for c in chains]):.4f} (h dropped from the target)")
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_4_monte_carlo():
    chains, times = _haplotype_chains(unit_weights=False)
    ps = np.array([c.p_value for c in chains])
    ses = np.array([c.se_batch for c in chains])
    near = int(np.sum(np.abs(ps - P_MCMC_HAPLOTYPE) <= 0.01))
    se_ok = bool(np.all((ses >= 0.0015) & (ses <= 0.0045)))
    ok = near >= 9 and se_ok and max(times) < 30
    record_acceptance(4, ok, f"MCMC p {near}/10 seeds within 0.01 of {P_MCMC_HAPLOTYPE} "
                             f"(p range {ps.min():.4f}..{ps.max():.4f}), batch SE {ses.min():.4f}..{ses.max():.4f} "
                             f"(want 0.0015..0.0045), slowest chain {max(times):.1f} s (< 30 s)")
    assert ok


# --- 5. NCT chains ------------------------------------------------------------


@pytest.mark.parametrize("model_file", ["nct_complete.json", "nct_groupwise.json"])
def test_criterion_5_nct_chains(model_file):
    model, x, fitted, _ = _timed_fit(model_file, "nct2006.csv")
    cfg = ChainConfig(seed=2024, burn_in=5_000_000, samples=1000)
    t0 = time.perf_counter()
    chain = run_chain(model, x, cfg, PearsonStatistic(fitted.m_hat))
    elapsed = time.perf_counter() - t0
    A = model.configuration.A
    kept = np.array_equal(A @ chain.x_final, A @ x) and int(chain.x_final.min()) >= 0
    ok = kept and 0.01 < chain.acceptance_rate < 0.99 and elapsed < 600
    record_acceptance(5, ok, f"{model_file}: A x preserved {kept}, acceptance {chain.acceptance_rate:.3f} "
                             f"in (0.01, 0.99), {elapsed:.1f} s (< 600 s)")
    assert ok


# --- 6. MCMC against exact enumeration --------------------------------------


def _oracle_models():
    models = {name: raw_model(spec) for name, spec in SMALL_SPECS.items()}
    models["hw_2_alleles"] = single_locus_hw("AB")
    models["hw_3_alleles"] = single_locus_hw("ABC")
    models["two_locus_haplotypes"] = compile_model({
        "type": "genetics", "hypothesis": "haplotype_wise_hw", "data_kind": "diplotype",
        "loci": [{"name": "a", "alleles": ["A", "B"]}, {"name": "b", "alleles": ["C", "D"]}],
    })
    models["ptgdr_hw"] = compile_model(ptgdr_model("hardy_weinberg"))
    models["ptgdr_genotype_wise"] = compile_model(ptgdr_model("genotype_wise"))
    models["ptgdr_haplotype_wise"] = compile_model(ptgdr_model("haplotype_wise_hw"))
    return {k: m for k, m in models.items() if m.configuration.nu <= 40}


def _pick_fiber(model, seed=0, tries=400):
    """A start table whose fiber has at most 50 states and a non-degenerate exact P-value."""
    config = model.configuration
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(tries):
        n = int(rng.integers(2, 9))
        x = np.bincount(rng.integers(0, config.nu, n), minlength=config.nu)
        try:
            states = enumerate_fiber(config, config.A @ x, cap=50)
        except SizeLimit:
            continue
        if len(states) < 3:
            continue
        try:
            stat = PearsonStatistic(fit_mle(model, x, max_iter=5000).m_hat)
        except NoConvergence:  # MLE on the boundary
            continue
        dist = exact_conditional(model, config.A @ x)
        p = float(dist.tail_probability(stat, float(stat(x))))
        if not 0.05 < p < 0.95:
            continue
        if best is None or len(states) > best[1]:
            best = (x, len(states), stat, p)
    return best


@pytest.mark.parametrize("name", sorted(_oracle_models()))
def test_criterion_6_oracle_equivalence(name):
    model = _oracle_models()[name]
    picked = _pick_fiber(model)
    assert picked is not None, f"no usable fiber found for {name}"
    x, size, stat, p_exact = picked
    chain = run_chain(model, x, ChainConfig(seed=11, burn_in=10_000, samples=10**6), stat)
    diff = abs(chain.p_value - p_exact)
    ok = diff <= 3 * chain.se_batch
    record_acceptance(6, ok, f"{name} (nu={model.configuration.nu}, {size} states): p_mcmc {chain.p_value:.4f}, "
                             f"exact {p_exact:.4f}, |diff| {diff:.4f} <= 3 SE {3 * chain.se_batch:.4f}")
    assert ok


# --- 7. Markov basis correctness ----------------------------------------------


def test_criterion_7_connectivity():
    from svexact.io import load_model

    configs = {
        "veronese_2_2": raw_model(veronese(2, 2)).configuration,
        "segre_3_3": raw_model(segre(3, 3)).configuration,
        "segre_3_4": raw_model(segre(3, 4)).configuration,
        "hw_2_alleles": single_locus_hw("AB").configuration,
        "hw_3_alleles": single_locus_hw("ABC").configuration,
        "nct_complete": load_model("nct_complete.json").configuration,
    }
    t0 = time.perf_counter()
    failures = []
    summary = []
    for name, config in configs.items():
        basis = generate_groebner_basis(config)
        if basis:
            Z = moves_matrix(config, basis)
            if np.any(config.A @ Z.T != 0):
                failures.append(f"{name}: move outside ker A")
        for b in basis:
            if b.lead[0] == b.lead[1] or pair_is_sorted(*b.lead):
                failures.append(f"{name}: lead {b.lead} not squarefree nonsorted")
                break
        report = check_connectivity(config, 4, basis=basis)
        if not report.passed:
            failures.append(f"{name}: disconnected fibers {report.disconnected[:3]}")
        summary.append(f"{name} {report.fibers} fibers/{report.states} states")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    record_acceptance(7, ok, f"n <= 4: {'; '.join(summary)}; {elapsed:.1f} s (< 120 s)"
                             + (f"; failures {failures}" if failures else ""))
    assert ok


# --- 8. Groebner structure ---------------------------------------------------


def test_criterion_8_groebner_structure():
    config = raw_model(segre(3, 3)).configuration
    basis = generate_groebner_basis(config)
    rng = random.Random(8)
    mismatches = 0
    for _ in range(1000):
        degree = rng.randint(1, 5)
        monomial = [rng.choice(config.cells) for _ in range(degree)]
        got = normal_form(config, monomial, rng=rng)
        if got != sorted_form(monomial):
            mismatches += 1
    ok = len(basis) == 9 and mismatches == 0
    record_acceptance(8, ok, f"segre 3x3 basis size {len(basis)} (want 9), "
                             f"{1000 - mismatches}/1000 random reduction orders reach the sorted normal form")
    assert ok
