import csv
import json

import numpy as np
import pytest

from switchback.design import AssignmentDesign, draw_assignment, lag_weights, normalize, interaction_weights
from switchback.dgp import LinearPOModel, simulate, true_interaction_tau, true_tau
from switchback.exceptions import DesignError
from switchback.hac import HacConfig
from switchback.montecarlo import (
    Experiment,
    ExperimentConfig,
    analytic_variances,
    build_model,
    coverage_table,
    error_curves,
    frobenius_error,
    oracle_V,
    replicate,
    resolve_jobs,
    write_experiment,
)
from switchback.regression import RegressionSpec, estimate

from conftest import all_paths

AR_MODEL = {"type": "ar", "phi": [0.5], "mu1": 0.5, "mu0": 0.0, "eps": {"seed": 3}}


def small_config(**kw):
    base = dict(model=AR_MODEL, regression={"K": 2}, T=(60,), R=30, seed=11, R_mc=200)
    base.update(kw)
    return ExperimentConfig(**base)


def test_single_replication_matches_estimate():
    cfg = small_config(R=1)
    reps = replicate(cfg)
    exp = cfg.experiment(60)
    z = draw_assignment(exp.design, cfg.seed, 0, 60, 0)
    res = estimate(simulate(exp.model, z), z, exp.design, exp.spec, hac=HacConfig())
    np.testing.assert_array_equal(reps.tau_hat[0], res.tau_hat)
    np.testing.assert_array_equal(reps.se[0], res.vhat.standard_errors(res.n))


def test_replicate_deterministic_and_job_invariant():
    cfg = small_config(R=12)
    a = replicate(cfg, chunk=5)
    b = replicate(cfg, chunk=7)
    c = replicate(cfg, chunk=5, n_jobs=2)
    np.testing.assert_array_equal(a.tau_hat, b.tau_hat)
    np.testing.assert_array_equal(a.tau_hat, c.tau_hat)
    np.testing.assert_array_equal(a.se, c.se)
    assert a.summary() == c.summary()


def test_resolve_jobs_env(monkeypatch):
    monkeypatch.setenv("SWITCHBACK_JOBS", "3")
    assert resolve_jobs(None) == 3
    assert resolve_jobs(1) == 1
    monkeypatch.setenv("SWITCHBACK_JOBS", "x")
    with pytest.raises(DesignError):
        resolve_jobs(None)


def test_replicate_mean_near_truth():
    cfg = small_config(T=(1000,), regression={"K": 5}, R=400)
    reps = replicate(cfg)
    sd = reps.tau_hat.std(axis=0, ddof=1)
    assert np.all(np.abs(reps.tau_hat.mean(axis=0) - reps.tau) <= 4 * sd / np.sqrt(reps.R))


def test_oracle_null_model_is_zero():
    T = 30
    exp = Experiment(LinearPOModel(np.zeros((T, 2)), np.zeros(T)), AssignmentDesign.binary(0.5, T=T),
                     RegressionSpec(1))
    np.testing.assert_array_equal(oracle_V(exp, R_mc=50), 0.0)
    curves = error_curves(small_config(model={"type": "linear", "beta": [0.0], "eps": {"scale": 0.0}},
                                       regression={"K": 1}, T=(40,), R=5, R_mc=20))
    assert np.all(curves.consistency[40] == 0)
    assert all(np.all(e == 0) for e in curves.frobenius.values())


def test_oracle_symmetric_psd():
    V = oracle_V(small_config(), R_mc=300)
    np.testing.assert_array_equal(V, V.T)
    assert np.linalg.eigvalsh(V)[0] >= 0


def _exact_score_cov(model, design, spec, tau):
    """Exact covariance of the oracle scores by enumerating every path."""
    paths, probs = all_paths(design.p)
    K = spec.K
    if spec.variant == "interaction":
        w = np.r_[lag_weights(design, K), interaction_weights(design, K)]
    else:
        w = lag_weights(design, K)
        if spec.variant == "marginal":
            w = w[[spec.lag]]
    from switchback.regression import build_design

    X = build_design(normalize(paths, design), K, spec.variant, spec.lag).X
    resid = simulate(model, paths)[:, K:] - X @ (w * tau)
    S = np.einsum("bnp,bn->bp", X, resid) / np.sqrt(X.shape[1])
    mean = probs @ S
    return (S - mean).T @ (S * probs[:, None]), mean


def test_score_mean_zero_by_enumeration():
    T, K = 8, 2
    d = AssignmentDesign.binary(0.5, T=T)
    from switchback.dgp import ARPOModel

    m = ARPOModel([0.5], 0.5, 0.0, np.random.default_rng(0).standard_normal(T))
    _, mean = _exact_score_cov(m, d, RegressionSpec(K), true_tau(m, d, K))
    np.testing.assert_allclose(mean, 0.0, atol=1e-10)


def test_full_and_marginal_forms_against_enumeration():
    T, K, p = 10, 1, 0.5
    beta = [1.0, 0.5, 0.2]
    eps = np.random.default_rng(4).standard_normal(T)
    m = LinearPOModel.homogeneous(beta, eps)
    d = AssignmentDesign.binary(p, T=T)
    tau = true_tau(m, d, K)
    full, _ = _exact_score_cov(m, d, RegressionSpec(K), tau)
    shown = analytic_variances(beta, eps, K, p)
    exact = analytic_variances(beta, eps, K, p, cross_time=True)
    np.testing.assert_allclose(np.diag(full), shown.full, rtol=1e-10)
    for k in range(K + 1):
        marg, _ = _exact_score_cov(m, d, RegressionSpec(K, "marginal", lag=k), tau[[k]])
        assert marg[0, 0] == pytest.approx(exact.marginal[k], rel=1e-10)
    # the displayed marginal sum is exact at k=0, where no cross-time pairs exist
    assert shown.marginal[0] == exact.marginal[0]
    assert shown.marginal[1] < exact.marginal[1]


def test_interaction_forms_against_enumeration():
    T, K, p = 10, 1, 0.5
    beta, inter = [1.0, 0.5, 0.2], [0.0, 0.4]
    eps = np.random.default_rng(5).standard_normal(T)
    centered = build_model({"type": "linear", "beta": beta, "interaction": inter, "center": True,
                            "K": K, "p": p, "eps": {"seed": 5}}, T)
    d = AssignmentDesign.binary(p, T=T)
    n = T - K
    for m in (centered, LinearPOModel.homogeneous(beta, eps, inter)):
        tau = np.r_[true_tau(m, d, K), true_interaction_tau(m, K)]
        with_int, _ = _exact_score_cov(m, d, RegressionSpec(K, "interaction"), tau)
        without, _ = _exact_score_cov(m, d, RegressionSpec(K), tau[:K + 1])
        a = analytic_variances(beta, m.eps, K, p, interaction=inter)
        np.testing.assert_allclose(np.diag(with_int)[:K + 1], a.with_interaction, rtol=1e-10)
        # without interactions the leftover z_t z_{t-1} term pairs with the outcome
        # level one step earlier (k=0) or later (k=1)
        t = np.arange(1, T + 1)
        c = p * np.where(t >= 2, 1.5, 1.0) + p * p * np.where(t >= 2, 0.4, 0.0)
        c = np.where(t >= 3, p * 1.7 + p * p * 0.4, c) + m.eps
        rows = c[K:]
        corr = 2 * 0.4 / n * np.array([rows[:-1].sum(), rows[1:].sum()])
        np.testing.assert_allclose(np.diag(without), a.without_interaction + corr, rtol=1e-10)
        if m is centered:
            # centering leaves only one endpoint of each sum
            np.testing.assert_allclose(corr, -2 * 0.4 / n * np.array([rows[-1], rows[0]]), atol=1e-12)


def test_analytic_examples():
    eps = np.random.default_rng(0).standard_normal(50)
    a = analytic_variances([1.0, 0.5], eps, 1, 0.5)
    np.testing.assert_allclose(a.marginal - a.full, [0.25, 1.0])
    np.testing.assert_allclose(a.gap, [0.25, 1.0])
    b = analytic_variances([1.0, 0.5], eps, 1, 0.5, interaction=[0.0, 0.0])
    assert b.with_interaction == b.without_interaction
    with pytest.raises(DesignError):
        analytic_variances([1.0], eps, 1, np.linspace(0.3, 0.6, 50))


def test_analytic_hand_case():
    # K=1, beta=(1, 0.5), eps=0, p=0.5, T=4: rows t=2..4, level c_t = 0.5 * 1.5
    T, K, p = 4, 1, 0.5
    c = np.array([0.75, 0.75, 0.75])
    second = np.sum(c**2) / (p * (1 - p) * 3)
    a = analytic_variances([1.0, 0.5], np.zeros(T), K, p)
    np.testing.assert_allclose(a.full, [second, second])
    np.testing.assert_allclose(a.marginal, [0.25 + second, 1.0 + second])


def test_coverage_wide_level():
    table, _ = coverage_table(small_config(R=20), level=0.999999)
    assert np.all(table.coverage >= 0.95)


def test_frobenius_error_guard():
    assert frobenius_error(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    assert frobenius_error(np.eye(2), np.zeros((2, 2))) == np.inf
    assert frobenius_error(2 * np.eye(2), np.eye(2)) == pytest.approx(1.0)


def test_config_validation_and_round_trip(tmp_path):
    with pytest.raises(DesignError):
        small_config(R=0)
    with pytest.raises(DesignError):
        small_config(T=(2,))
    with pytest.raises(DesignError, match="unknown"):
        ExperimentConfig.from_dict({"model": AR_MODEL, "colour": 1})
    cfg = small_config()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg


def test_written_outputs_parse_back(tmp_path):
    cfg = small_config(R=4)
    table, sets = coverage_table(cfg)
    files = write_experiment(tmp_path, cfg, table=table, sets=sets)
    names = {f.name for f in files}
    assert {"coverage.csv", "replications.csv", "summary.json"} <= names
    with open(tmp_path / cfg.name / "replications.csv") as fh:
        rows = list(csv.DictReader(fh))
    reps = sets[60]
    got = np.array([float(r["tau_hat"]) for r in rows]).reshape(reps.R, -1)
    np.testing.assert_array_equal(got, reps.tau_hat)
    summary = json.loads((tmp_path / cfg.name / "summary.json").read_text())
    assert summary["coverage"]["60"] == table.coverage[0].tolist()
