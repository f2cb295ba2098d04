"""Acceptance gate: the twelve headline guarantees at full scale.

Every test enforces its stated tolerance and runtime budget, and ends with a
single machine-greppable PASS line carrying the measured values (shown with
pytest -s, or in the captured output on failure).
"""

import json
import math
import subprocess
import sys
import time

import numpy as np

from ecmargin import (
    ClassStats,
    Margins,
    NEGATIVE,
    POSITIVE,
    ScoreSet,
    SyntheticConfig,
    TrainConfig,
    ap_lower,
    ap_lower_branches,
    binary_bound_check,
    bound_audit,
    dataset_stats,
    decision_logit,
    default_margin_weights,
    ecm_loss,
    evaluate,
    focal_ecm_loss,
    generate,
    margins_grid_oracle,
    optimal_margins,
    ranking_error,
    ranking_error_bruteforce,
    rare_tercile,
    run_verification,
    slope_m,
    train,
    weights,
    zipf_class_counts,
)


def _passline(name: str, elapsed: float, **measured) -> None:
    parts = ", ".join(f"{k}={v}" for k, v in measured.items())
    print(f"{name}: PASS ({parts}; {elapsed:.2f}s)")


def _checks_by_name(report: dict, suite: str) -> dict:
    (suite_report,) = [r for r in report["suites"] if r["suite"] == suite]
    return {c["name"]: c for c in suite_report["checks"]}


def _random_tied_set(rng) -> ScoreSet:
    n_pos = int(rng.integers(1, 201))
    n_neg = int(rng.integers(1, 201))
    style = rng.integers(0, 3)
    if style == 0:
        pos = rng.random(n_pos)
        neg = rng.random(n_neg)
    elif style == 1:
        levels = int(rng.integers(2, 8))
        pos = rng.integers(0, levels, n_pos) / (levels - 1)
        neg = rng.integers(0, levels, n_neg) / (levels - 1)
    else:
        base = rng.random(max(n_pos, n_neg))
        pos = base[rng.integers(0, base.size, n_pos)]
        neg = base[rng.integers(0, base.size, n_neg)]
    return ScoreSet(positives=pos, negatives=neg)


def test_criterion_01_lower_bound_branches_meet_at_two_thirds():
    started = time.monotonic()
    alphas = np.concatenate(
        [np.logspace(math.log10(1.0 / 6.0), 6.0, 200), [0.2, 1.0, 7.0, 503.0]]
    )
    worst = 0.0
    for alpha in alphas:
        r = 1.0 / (6.0 * alpha)
        b1, b2 = ap_lower_branches(float(alpha), r)
        worst = max(worst, abs(b1 - 2.0 / 3.0), abs(b2 - 2.0 / 3.0))
    assert worst <= 1e-12
    elapsed = time.monotonic() - started
    assert elapsed <= 10.0
    _passline("criterion 01 meet-point", elapsed, alphas=alphas.size, worst_gap=worst)


def test_criterion_02_bound_sandwich_on_ten_thousand_detectors():
    started = time.monotonic()
    report = run_verification("bounds", trials=10000, seed=2024)
    elapsed = time.monotonic() - started
    sandwich = _checks_by_name(report, "bounds")["sandwich"]
    assert sandwich["passed"]
    assert sandwich["detectors"] == 10000
    assert sandwich["alphas"] == [0.1, 1.0, 10.0, 1000.0]
    assert sandwich["violations"] == 0
    assert elapsed <= 60.0
    _passline(
        "criterion 02 sandwich",
        elapsed,
        detectors=sandwich["detectors"],
        violations=sandwich["violations"],
        min_slack=f"{sandwich['min_slack']:.4f}",
    )


def test_criterion_03_variational_oracles_recover_the_closed_forms():
    started = time.monotonic()
    report = run_verification("oracles", trials=1, seed=7)
    elapsed = time.monotonic() - started
    checks = _checks_by_name(report, "oracles")
    assert checks["max_oracle_agreement"]["passed"]
    assert checks["max_oracle_agreement"]["worst_gap"] <= 1e-3
    assert checks["min_oracle_agreement"]["passed"]
    assert checks["min_oracle_agreement"]["worst_gap"] <= 1e-3
    assert checks["min_oracle_boxed_within_sandwich"]["passed"]
    assert checks["degenerate_tau"]["passed"]
    assert elapsed <= 120.0
    _passline(
        "criterion 03 oracles",
        elapsed,
        min_gap=f"{checks['min_oracle_agreement']['worst_gap']:.2e}",
        max_gap=f"{checks['max_oracle_agreement']['worst_gap']:.2e}",
    )


def test_criterion_04_closed_form_margins_match_the_grid_oracle():
    started = time.monotonic()
    rng = np.random.default_rng(4)
    step = 1e-3
    worst = 0.0
    for _ in range(100):
        n_plus = int(rng.integers(1, 10**6))
        n_minus = int(rng.integers(1, 10**6))
        stats = ClassStats(n_plus=n_plus, n_minus=n_minus, alpha=n_minus / n_plus)
        gap = abs(
            optimal_margins(stats).gamma_plus
            - margins_grid_oracle(stats, step).gamma_plus
        )
        worst = max(worst, gap)
    assert worst <= step + 1e-12
    exact = optimal_margins(ClassStats(n_plus=16, n_minus=81, alpha=81 / 16))
    assert abs(exact.gamma_plus - 0.6) <= 1e-12
    elapsed = time.monotonic() - started
    assert elapsed <= 10.0
    _passline(
        "criterion 04 margins",
        elapsed,
        pairs=100,
        worst_gap=f"{worst:.2e}",
        exact_case=exact.gamma_plus,
    )


def test_criterion_05_decision_boundary_identity():
    started = time.monotonic()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        gamma_plus = float(rng.uniform(0.01, 0.99))
        w = weights(Margins(gamma_plus=gamma_plus, gamma_minus=1.0 - gamma_plus))
        plain = 1.0 / (1.0 + math.exp(-2.0 * decision_logit(w)))
        worst = max(worst, abs(plain - gamma_plus))
    assert worst <= 1e-12
    elapsed = time.monotonic() - started
    assert elapsed <= 10.0
    _passline("criterion 05 decision boundary", elapsed, margins=1000, worst_gap=f"{worst:.2e}")


def test_criterion_06_analytic_gradients_match_finite_differences():
    started = time.monotonic()
    report = run_verification("gradients", trials=1000, seed=6)
    elapsed = time.monotonic() - started
    checks = _checks_by_name(report, "gradients")
    for name in ("ecm_gradients", "focal_ecm_gradients"):
        assert checks[name]["passed"]
        assert checks[name]["trials"] == 1000
        assert checks[name]["failures"] == 0
        assert checks[name]["non_finite"] == 0
    w = weights(Margins(gamma_plus=0.7, gamma_minus=0.3))
    for f in (-1e4, -50.0, 50.0, 1e4):
        for label in (POSITIVE, NEGATIVE):
            for res in (ecm_loss(f, label, w), focal_ecm_loss(f, label, w)):
                assert math.isfinite(res.value) and math.isfinite(res.grad_logit)
    assert elapsed <= 5.0
    _passline(
        "criterion 06 gradients",
        elapsed,
        trials_per_loss=1000,
        worst_rel=f"{max(checks[n]['worst_rel'] for n in ('ecm_gradients', 'focal_ecm_gradients')):.2e}",
    )


def test_criterion_07_sorted_estimator_equals_the_brute_force():
    started = time.monotonic()
    rng = np.random.default_rng(7)
    for _ in range(1000):
        ss = _random_tied_set(rng)
        assert ranking_error(ss) == ranking_error_bruteforce(ss)
        assert ranking_error(ss, ties="strict") == ranking_error_bruteforce(
            ss, ties="strict"
        )
    elapsed = time.monotonic() - started
    assert elapsed <= 10.0
    _passline("criterion 07 estimator equivalence", elapsed, sets=1000, max_side=200)


def test_criterion_08_binary_bound_holds_at_every_candidate_threshold():
    started = time.monotonic()
    rng = np.random.default_rng(8)
    min_slack = math.inf
    thresholds_checked = 0
    for _ in range(1000):
        ss = _random_tied_set(rng)
        r = ranking_error(ss)
        for t in np.unique(np.concatenate([ss.positives, ss.negatives])):
            rhs, holds = binary_bound_check(ss, float(t))
            assert holds
            min_slack = min(min_slack, rhs - r)
            thresholds_checked += 1
    assert min_slack >= -1e-12
    elapsed = time.monotonic() - started
    assert elapsed <= 10.0
    _passline(
        "criterion 08 binary bound",
        elapsed,
        sets=1000,
        thresholds=thresholds_checked,
        min_slack=f"{min_slack:.2e}",
    )


def test_criterion_09_slope_bracket_and_asymptote():
    started = time.monotonic()
    rng = np.random.default_rng(9)
    alphas = np.exp(rng.uniform(math.log(1e-3), math.log(1e6), size=1000))
    for alpha in alphas:
        lo = slope_m(float(alpha), "lower")
        mid = slope_m(float(alpha), "meet")
        hi = slope_m(float(alpha), "upper")
        assert lo <= mid <= hi
    asym = max(abs(slope_m(1e6, "lower") - 1.0), abs(slope_m(1e6, "upper") - 1.0))
    assert asym <= 1e-5
    elapsed = time.monotonic() - started
    assert elapsed <= 10.0
    _passline(
        "criterion 09 slope bracket",
        elapsed,
        sampled=1000,
        asymptote_gap=f"{asym:.2e}",
    )


def test_criterion_10_every_checkpoint_of_the_default_run_passes_the_audit():
    started = time.monotonic()
    dataset = generate(SyntheticConfig())
    margins = default_margin_weights(dataset)
    model = train(dataset, TrainConfig(), margins)
    alphas = {c: s.alpha for c, s in dataset_stats(dataset).items()}
    epochs = [epoch for epoch, _ in model.checkpoints]
    assert epochs == [0, 5, 10, 15, 20, 25, 30]
    final_mean_ap = None
    for epoch, params in model.checkpoints:
        report = evaluate(model, dataset, alphas, params=params)
        assert bound_audit(report), f"bound audit failed at epoch {epoch}"
        final_mean_ap = report.mean_ap
    elapsed = time.monotonic() - started
    assert elapsed <= 120.0
    _passline(
        "criterion 10 sandbox audit",
        elapsed,
        checkpoints=len(epochs),
        final_mean_ap=f"{final_mean_ap:.4f}",
    )


def test_criterion_11_ecm_beats_bce_where_the_tail_lives():
    started = time.monotonic()
    rare_wins = 0
    ecm_means, bce_means = [], []
    for seed in range(5):
        dataset = generate(SyntheticConfig(seed=seed))
        margins = default_margin_weights(dataset)
        alphas = {c: s.alpha for c, s in dataset_stats(dataset).items()}
        rare = set(rare_tercile(dataset))

        def rare_mean(report):
            values = [p.ap for p in report.per_class if p.class_id in rare]
            return float(np.mean(values))

        ecm_model = train(dataset, TrainConfig(loss="ecm", seed=seed), margins)
        bce_model = train(dataset, TrainConfig(loss="bce", seed=seed), margins)
        ecm_report = evaluate(ecm_model, dataset, alphas)
        bce_report = evaluate(bce_model, dataset, alphas)
        if rare_mean(ecm_report) >= rare_mean(bce_report):
            rare_wins += 1
        ecm_means.append(ecm_report.mean_ap)
        bce_means.append(bce_report.mean_ap)
    ecm_avg = float(np.mean(ecm_means))
    bce_avg = float(np.mean(bce_means))
    assert rare_wins >= 4, f"rare-tercile wins {rare_wins}/5"
    assert ecm_avg >= bce_avg
    elapsed = time.monotonic() - started
    assert elapsed <= 600.0
    _passline(
        "criterion 11 directional improvement",
        elapsed,
        rare_wins=f"{rare_wins}/5",
        ecm_mean_ap=f"{ecm_avg:.5f}",
        bce_mean_ap=f"{bce_avg:.5f}",
    )


def test_criterion_12_verification_reports_are_byte_identical():
    started = time.monotonic()
    argv = [
        sys.executable,
        "-m",
        "ecmargin.cli",
        "verify",
        "--suite",
        "all",
        "--trials",
        "1000",
        "--seed",
        "42",
    ]
    first = subprocess.run(argv, capture_output=True)
    second = subprocess.run(argv, capture_output=True)
    assert first.returncode == 0 and second.returncode == 0
    assert first.stdout == second.stdout
    assert len(first.stdout) > 0
    report = json.loads(first.stdout)
    assert report["passed"] is True
    elapsed = time.monotonic() - started
    _passline(
        "criterion 12 determinism",
        elapsed,
        bytes=len(first.stdout),
        identical=first.stdout == second.stdout,
    )


def test_default_dataset_prior_is_the_documented_zipf_split():
    # sanity anchor shared by criteria 10 and 11: the default recipe is stable
    counts = zipf_class_counts(3, 600, 1.0)
    assert counts == (327, 164, 109)
    dataset = generate(SyntheticConfig())
    assert dataset.class_counts[0] == 4607
    assert dataset.n_background == 10000
