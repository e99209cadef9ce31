"""Run-level tests: convergence, descent guarantees, ledgers, determinism."""

import math

import numpy as np
import pytest

from dpopt.accountant import NoisePlan, account_run
from dpopt.mechanisms import SeededRng
from dpopt.objective import (Dataset, builtin_nonconvex_logistic,
                             builtin_quartic_saddle, erm_gradient, erm_hessian,
                             sensitivities)
from dpopt.harness import synth_dataset
from dpopt.optimizer import (AlgorithmConstants, LineSearchBudget, ShortStepBudget,
                             default_phase1_policy, min_dec_line_search,
                             min_dec_short, roots_t1_t2, run_line_search,
                             run_short_step, run_two_phase)

TOLS = AlgorithmConstants(eps_g=1e-2, eps_h=1e-1)


def identical_sample_quartic(n=8, d=2):
    """ERM over n identical rows (1, 0, ...): saddle at the origin with
    lambda_min(H(0)) = -1 exactly."""
    X = np.zeros((n, d))
    X[:, 0] = 1.0
    return Dataset(X, np.ones(n), 1.0), builtin_quartic_saddle(1.0, d, weight_box=4.0)


def planted_instance():
    ds = synth_dataset("planted_saddle", 400, 6, seed=5,
                       saddle_signal=1.6, saddle_noise=0.4)
    return ds, builtin_quartic_saddle(ds.feature_norm_bound, 6, weight_box=1.0)


def bounded_plan(model, ds, constants, lam=1e-8):
    """Noise multipliers sized so rejection sampling accepts quickly."""
    sens = sensitivities(model, ds.n, ds.d)
    grad_bound = min(constants.c1 * constants.eps_g,
                     constants.c2 / model.M * constants.eps_h ** 2)
    hess_bound = constants.c * constants.eps_h
    sigma_g = grad_bound / (3.0 * math.sqrt(ds.d)) / sens.delta_g
    sigma_h = hess_bound / (6.0 * math.sqrt(ds.d)) / sens.delta_h
    return NoisePlan(10.0, sigma_g, sigma_h, lambda_svt=lam)


class TestZeroNoiseConvergence:
    def test_short_step_reaches_exact_second_order_point(self):
        ds, model = identical_sample_quartic()
        out = run_short_step(model, ds, np.array([2.0, 0.0]), TOLS,
                             ShortStepBudget(0.5), SeededRng(0), noise_mode="zero")
        assert out.status == "converged_2s"
        g = erm_gradient(model, ds, out.w_final)
        lam_min = np.linalg.eigvalsh(erm_hessian(model, ds, out.w_final))[0]
        assert np.linalg.norm(g) <= TOLS.eps_g
        assert lam_min >= -TOLS.eps_h

    def test_line_search_reaches_exact_second_order_point(self):
        ds, model = identical_sample_quartic()
        out = run_line_search(model, ds, np.array([2.0, 0.0]), TOLS,
                              LineSearchBudget(0.5), SeededRng(0), noise_mode="zero")
        assert out.status == "converged_2s"
        g = erm_gradient(model, ds, out.w_final)
        lam_min = np.linalg.eigvalsh(erm_hessian(model, ds, out.w_final))[0]
        assert np.linalg.norm(g) <= TOLS.eps_g
        assert lam_min >= -TOLS.eps_h

    def test_saddle_start_takes_curvature_step_first(self):
        ds, model = identical_sample_quartic()
        out = run_short_step(model, ds, np.zeros(2), TOLS, ShortStepBudget(0.5),
                             SeededRng(1), noise_mode="zero")
        first = out.trace[0]
        assert first.kind == "negative_curvature"
        assert first.grad_norm_noisy == 0.0
        assert first.lambda_noisy == pytest.approx(-1.0, abs=1e-12)
        assert out.status == "converged_2s"

    def test_line_search_first_step_outdecreases_short_step(self):
        # with b_g > 1 the search probes longer steps than 1/G from the same point
        ds, model = identical_sample_quartic()
        w0 = np.array([2.0, 0.0])
        short = run_short_step(model, ds, w0, TOLS, ShortStepBudget(0.5),
                               SeededRng(0), noise_mode="zero")
        ls = run_line_search(model, ds, w0, TOLS, LineSearchBudget(0.5),
                             SeededRng(0), noise_mode="zero")
        dec_short = short.trace[0].loss_before - short.trace[0].loss_after
        dec_ls = ls.trace[0].loss_before - ls.trace[0].loss_after
        assert dec_ls >= dec_short

    def test_line_search_accepted_steps_satisfy_sufficient_decrease(self):
        ds, model = identical_sample_quartic()
        out = run_line_search(model, ds, np.array([2.0, 0.0]), TOLS,
                              LineSearchBudget(0.5), SeededRng(0), noise_mode="zero")
        for rec in out.trace:
            if rec.kind == "gradient":
                # SD1 with the noiseless gradient: decrease >= c_g gamma ||g||^2
                dec = rec.loss_before - rec.loss_after
                assert dec >= TOLS.c_g * rec.step_size * rec.grad_norm_noisy ** 2 - 1e-12

    def test_line_search_curvature_step_in_window(self):
        ds, model = identical_sample_quartic()
        t1, t2 = roots_t1_t2(TOLS.c, TOLS.c2, TOLS.c_h)
        out = run_line_search(model, ds, np.zeros(2), TOLS, LineSearchBudget(0.5),
                              SeededRng(1), noise_mode="zero")
        curv = [r for r in out.trace if r.kind == "negative_curvature"]
        assert curv
        for rec in curv:
            gamma_bar = t2 * abs(rec.lambda_noisy) / model.M
            assert (t1 / t2) * gamma_bar - 1e-12 <= rec.step_size
            assert rec.step_size <= TOLS.b_h * gamma_bar + 1e-12
            dec = rec.loss_before - rec.loss_after
            assert dec >= 0.5 * TOLS.c_h * rec.step_size ** 2 * abs(rec.lambda_noisy) - 1e-12


BOUNDED = AlgorithmConstants(eps_g=1e-2, eps_h=1e-1, c=0.05, c1=0.05, c2=0.05, c_h=0.3)


class TestBoundedNoiseDescent:
    def test_short_step_descent_guarantee(self):
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        min_dec = min_dec_short(model.G, model.M, BOUNDED.eps_g, BOUNDED.eps_h,
                                BOUNDED.c1, BOUNDED.c2, BOUNDED.c)
        for seed in range(3):
            out = run_short_step(model, ds, np.zeros(6), BOUNDED, plan,
                                 SeededRng(seed), noise_mode="bounded")
            assert out.status == "converged_2s"
            for rec in out.trace:
                if rec.kind != "terminate":
                    assert rec.loss_before - rec.loss_after >= min_dec - 1e-9

    def test_line_search_descent_guarantee(self):
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        _, t2 = roots_t1_t2(BOUNDED.c, BOUNDED.c2, BOUNDED.c_h)
        min_dec = min_dec_line_search(model.G, model.M, BOUNDED.eps_g, BOUNDED.eps_h,
                                      BOUNDED.c1, BOUNDED.c_g, BOUNDED.c_h, t2)
        for seed in range(3):
            out = run_line_search(model, ds, np.zeros(6), BOUNDED, plan,
                                  SeededRng(seed), noise_mode="bounded")
            assert out.status == "converged_2s"
            for rec in out.trace:
                if rec.kind != "terminate":
                    assert rec.loss_before - rec.loss_after >= min_dec - 1e-9

    def test_output_quality_under_bounded_noise(self):
        # exact derivatives at the terminal point satisfy the relaxed tolerances
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        out = run_short_step(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(0),
                             noise_mode="bounded")
        assert out.status == "converged_2s"
        g = erm_gradient(model, ds, out.w_final)
        lam_min = np.linalg.eigvalsh(erm_hessian(model, ds, out.w_final))[0]
        assert np.linalg.norm(g) <= (1.0 + BOUNDED.c1) * BOUNDED.eps_g
        assert lam_min >= -(1.0 + BOUNDED.c) * BOUNDED.eps_h

    def test_forced_fallback_still_decreases(self):
        # all SVT probes fail (test-only): steps use the fallback gamma_bar and
        # decrease the loss because the fallback query is nonnegative under
        # bounded noise
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        gamma_bar_g = 2.0 * (1.0 - BOUNDED.c1 - BOUNDED.c_g) / model.G
        out = run_line_search(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(4),
                              noise_mode="bounded", svt_noise="always_fail")
        assert out.status == "converged_2s"
        for rec in out.trace:
            if rec.kind == "gradient":
                assert rec.step_size == pytest.approx(gamma_bar_g)
                assert rec.loss_before - rec.loss_after > 0.0


class TestLedger:
    def test_zcdp_ledger_matches_account_run_exactly(self):
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        out = run_short_step(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(0),
                             noise_mode="bounded")
        recomputed = account_run(out.grad_steps, out.hess_evals, out.plan, "short")
        assert out.accounted_privacy.rho == recomputed.rho
        increments = math.fsum(r.rho_increment for r in out.trace)
        f_charge = 0.5 / out.plan.sigma_f ** 2
        assert increments + f_charge == pytest.approx(out.accounted_privacy.rho, rel=1e-12)

    def test_ledger_never_exceeds_planned_budget(self):
        ds, model = identical_sample_quartic()
        rho = 0.3
        out = run_short_step(model, ds, np.array([2.0, 0.0]), TOLS,
                             ShortStepBudget(rho), SeededRng(2), noise_mode="zero")
        assert out.accounted_privacy.rho <= rho + 1e-12
        out_ls = run_line_search(model, ds, np.array([2.0, 0.0]), TOLS,
                                 LineSearchBudget(rho), SeededRng(2), noise_mode="zero")
        assert out_ls.accounted_privacy.rho <= rho + 1e-12
        recomputed = account_run(out_ls.grad_steps, out_ls.hess_evals, out_ls.plan,
                                 "line_search")
        assert out_ls.accounted_privacy.rho == recomputed.rho

    def test_iteration_cap_and_hessian_placement(self):
        ds, model = identical_sample_quartic()
        out = run_short_step(model, ds, np.array([2.0, 0.0]), TOLS,
                             ShortStepBudget(0.5), SeededRng(0), noise_mode="zero")
        assert out.iterations <= out.t_budget
        for rec in out.trace:
            if rec.lambda_noisy is not None:
                assert rec.grad_norm_noisy <= TOLS.eps_g  # Hessian drawn only here
            else:
                assert rec.grad_norm_noisy > TOLS.eps_g


class TestDeterminism:
    def test_identical_seeds_produce_identical_traces(self):
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        a = run_short_step(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(11))
        b = run_short_step(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(11))
        assert a.trace == b.trace
        assert np.array_equal(a.w_final, b.w_final)
        assert a.z_draw == b.z_draw

    def test_different_seeds_differ(self):
        ds, model = planted_instance()
        plan = bounded_plan(model, ds, BOUNDED)
        a = run_short_step(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(11))
        b = run_short_step(model, ds, np.zeros(6), BOUNDED, plan, SeededRng(12))
        assert a.z_draw != b.z_draw


class TestLanczosPath:
    def test_zero_noise_lanczos_run_converges_with_exact_checks(self):
        ds, model = planted_instance()
        out = run_short_step(model, ds, np.zeros(6), TOLS, ShortStepBudget(0.5),
                             SeededRng(0), noise_mode="zero", lanczos=True)
        assert out.status == "converged_2s"
        g = erm_gradient(model, ds, out.w_final)
        lam_min = np.linalg.eigvalsh(erm_hessian(model, ds, out.w_final))[0]
        assert np.linalg.norm(g) <= TOLS.eps_g
        assert lam_min >= -TOLS.eps_h

    def test_missing_lambda_rejected_for_line_search(self):
        ds, model = identical_sample_quartic()
        plan = NoisePlan(10.0, 10.0, 10.0)  # no lambda_svt
        with pytest.raises(ValueError, match="lambda_svt"):
            run_line_search(model, ds, np.array([2.0, 0.0]), TOLS, plan,
                            SeededRng(0), noise_mode="zero")


class TestWeightBox:
    def test_violation_aborts_with_failed_termination(self):
        ds = synth_dataset("logistic_separable", 200, 3, seed=1)
        model = builtin_nonconvex_logistic(1e-3, 1.0, 3, weight_box=0.4)
        out = run_short_step(model, ds, np.zeros(3),
                             AlgorithmConstants(eps_g=1e-4, eps_h=0.2),
                             ShortStepBudget(0.5), SeededRng(0), noise_mode="zero")
        assert out.status == "failed_termination"
        assert any("weight box" in w for w in out.warnings)
        # the returned iterate is the last one inside the box, with a real loss
        assert np.max(np.abs(out.w_final)) <= 0.4 * (1 + 1e-12)
        assert math.isfinite(out.final_loss)


class TestTwoPhase:
    def test_phase_one_success_short_circuits(self):
        ds = synth_dataset("logistic_separable", 2000, 4, seed=3)
        model = builtin_nonconvex_logistic(1e-3, 1.0, 4)
        consts = AlgorithmConstants(eps_g=0.06, eps_h=0.245)
        rho = 0.5
        out = run_two_phase(model, ds, np.zeros(4), consts, ShortStepBudget(rho),
                            SeededRng(0), variant="short", noise_mode="zero")
        assert out.status == "converged_2s"
        assert len(out.phases) == 1
        assert out.accounted_privacy.rho <= 0.75 * rho + 1e-12

    def test_forced_fallback_warm_starts_phase_two(self):
        ds = synth_dataset("logistic_separable", 2000, 4, seed=3)
        model = builtin_nonconvex_logistic(1e-3, 1.0, 4)
        consts = AlgorithmConstants(eps_g=0.06, eps_h=0.245)
        rho = 0.5
        out = run_two_phase(model, ds, np.zeros(4), consts, ShortStepBudget(rho),
                            SeededRng(1), variant="short", noise_mode="zero",
                            phase1_t_policy=lambda t: 2)
        p1, p2 = out.phases
        assert p1.status == "budget_exhausted" and p1.iterations == 2
        assert p2.status == "converged_2s"
        assert np.array_equal(p2.trace[0].loss_before, p1.final_loss)
        assert out.accounted_privacy.rho <= rho + 1e-12
        assert out.iterations == p1.iterations + p2.iterations

    def test_default_phase_one_policy(self):
        assert default_phase1_policy(100) == 10
        assert default_phase1_policy(1) == 1
        for t in (3, 10, 1000):
            assert 1 <= default_phase1_policy(t) < t

    def test_line_search_two_phase(self):
        ds = synth_dataset("logistic_separable", 2000, 4, seed=3)
        model = builtin_nonconvex_logistic(1e-3, 1.0, 4)
        consts = AlgorithmConstants(eps_g=0.06, eps_h=0.245)
        out = run_two_phase(model, ds, np.zeros(4), consts, LineSearchBudget(0.5),
                            SeededRng(5), variant="line_search", noise_mode="zero")
        assert out.status == "converged_2s"
        assert out.accounted_privacy.rho <= 0.5 + 1e-12
