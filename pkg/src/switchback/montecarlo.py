"""Design-based Monte Carlo: fixed potential outcomes, redrawn assignments.

Every experiment freezes one model (its error series is drawn once from a
seeded normal) and then replays fresh assignment paths through it. Path
``i`` of an experiment at horizon ``T`` comes from the stream
``(seed, purpose, T, i)`` where ``purpose`` is 0 for replications and 1 for
the oracle covariance, so results never depend on chunking or on how many
worker processes ran them.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from switchback.design import AssignmentDesign, Sampler, draw_assignment, draw_assignments, make_rng, normalize
from switchback.dgp import ARPOModel, LinearPOModel, MAPOModel, simulate, true_interaction_tau, true_tau
from switchback.exceptions import DesignError
from switchback.hac import HacConfig
from switchback.regression import RegressionSpec, build_design, design_weights, estimate

JOBS_ENV = "SWITCHBACK_JOBS"
REPLICATION_STREAM = 0
ORACLE_STREAM = 1
DEFAULT_BANDWIDTHS = (0, 1, 5, "auto")
# cap on floats held by one oracle batch of regressor matrices
_ORACLE_BATCH_FLOATS = 4_000_000

__all__ = [
    "AnalyticVariances",
    "CoverageTable",
    "ErrorCurves",
    "Experiment",
    "ExperimentConfig",
    "ReplicationSet",
    "analytic_variances",
    "build_design_spec",
    "build_model",
    "coverage_table",
    "error_curves",
    "oracle_V",
    "replicate",
    "write_experiment",
]


# --------------------------------------------------------------------------
# configuration


def _eps_series(spec: dict | None, T: int) -> np.ndarray:
    spec = dict(spec or {})
    scale = float(spec.get("scale", 1.0))
    eps = scale * make_rng(int(spec.get("seed", 0))).standard_normal(T) + float(spec.get("shift", 0.0))
    return eps


def build_model(spec: dict, T: int):
    """Model from a config block.

    ``type`` selects the class:

    * ``ar``: ``phi``, ``mu1``, ``mu0``
    * ``ma``: ``theta``, ``mu1``, ``mu0``, optional ``delta_eps`` (``eps1 - eps0``)
    * ``linear``: homogeneous ``beta`` list, optional ``interaction`` list
      (entry ``k`` multiplies ``z_{t-k} z_{t-k+1}``) and ``center: true`` to
      shift the errors so the outcome level has mean zero over t = K+1..T
      (needs ``K`` in the block)

    ``eps`` holds ``seed`` and ``scale`` for the frozen error series.
    """
    kind = spec.get("type")
    eps = _eps_series(spec.get("eps"), T)
    if kind == "ar":
        return ARPOModel(spec.get("phi", []), spec.get("mu1", 0.0), spec.get("mu0", 0.0), eps)
    if kind == "ma":
        return MAPOModel(spec.get("theta", []), spec.get("mu1", 0.0), spec.get("mu0", 0.0),
                         eps + float(spec.get("delta_eps", 0.0)), eps)
    if kind == "linear":
        beta = spec.get("beta", [])
        inter = spec.get("interaction")
        if spec.get("center"):
            K = int(spec["K"])
            p = float(spec["p"])
            level = _outcome_level(np.asarray(beta, dtype=float), inter, p, T)
            c = level + eps
            eps = eps - c[K:].mean()
        return LinearPOModel.homogeneous(beta, eps, inter)
    raise DesignError(f"unknown model type {kind!r}; expected 'ar', 'ma' or 'linear'")


def _outcome_level(beta: np.ndarray, interaction, p: float, T: int) -> np.ndarray:
    """``p sum_{k<t} beta_k + p^2 sum_{1<=k<t} beta_{k-1,k}`` for t = 1..T."""
    t = np.arange(1, T + 1)
    cb = np.concatenate([[0.0], np.cumsum(beta)])
    level = p * cb[np.minimum(t, beta.size)]
    if interaction is not None:
        g = np.asarray(interaction, dtype=float).copy()
        g[:1] = 0.0
        cg = np.concatenate([[0.0], np.cumsum(g)])
        level = level + p * p * cg[np.minimum(t, g.size)]
    return level


def build_design_spec(spec: dict, T: int) -> AssignmentDesign:
    """Design from a config block: ``{"kind": "binary", "p": ...}`` or a
    continuous block with ``sampler: {"kind": ..., "params": [...]}``."""
    kind = spec.get("kind", "binary")
    if kind == "binary":
        p = np.asarray(spec.get("p", 0.5), dtype=float)
        return AssignmentDesign.binary(p, T=T, epsilon=float(spec.get("epsilon", 0.01)))
    if kind == "continuous":
        s = spec["sampler"]
        return AssignmentDesign.continuous(samplers=Sampler(s["kind"], s["params"]), T=T)
    raise DesignError(f"unknown design kind {kind!r}")


@dataclass(frozen=True)
class Experiment:
    """One fully instantiated experiment at a fixed horizon."""

    model: object
    design: AssignmentDesign
    spec: RegressionSpec
    hac: HacConfig | None = HacConfig()
    seed: int = 0
    name: str = "experiment"

    def __post_init__(self):
        if self.model.T != self.design.T:
            raise DesignError(f"model has T={self.model.T}, design has T={self.design.T}")
        if self.spec.K >= self.design.T:
            raise DesignError(f"K={self.spec.K} must be below T={self.design.T}")

    @property
    def T(self) -> int:
        return self.design.T

    def truth(self) -> np.ndarray:
        """True estimand vector matching the regression's coefficients."""
        spec = self.spec
        if spec.variant == "exposure" or spec.h is not None:
            raise DesignError("closed-form truth is available for unscaled full, marginal and interaction fits")
        tau = true_tau(self.model, self.design, spec.K)
        if spec.variant == "marginal":
            return tau[[spec.lag]]
        if spec.variant == "interaction":
            return np.concatenate([tau, true_interaction_tau(self.model, spec.K)])
        return tau

    def path(self, i: int, purpose: int = REPLICATION_STREAM) -> np.ndarray:
        return draw_assignment(self.design, self.seed, purpose, self.T, i)


@dataclass(frozen=True)
class ExperimentConfig:
    """Serializable experiment description (one JSON document)."""

    model: dict
    design: dict = field(default_factory=lambda: {"kind": "binary", "p": 0.5})
    regression: dict = field(default_factory=lambda: {"K": 5, "variant": "full"})
    hac: dict = field(default_factory=lambda: {"bandwidth": "auto", "kernel": "bartlett"})
    T: tuple[int, ...] = (1000,)
    R: int = 5000
    seed: int = 0
    level: float = 0.95
    R_mc: int = 20000
    name: str = "experiment"
    outputs: tuple[str, ...] = ("coverage",)

    def __post_init__(self):
        object.__setattr__(self, "T", tuple(int(t) for t in np.atleast_1d(self.T)))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.R < 1:
            raise DesignError("R must be at least 1")
        K = int(self.regression.get("K", 0))
        bad = [t for t in self.T if t <= K]
        if bad:
            raise DesignError(f"every T must exceed K={K}; got {bad}")
        if not 0 < self.level < 1:
            raise DesignError("level must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DesignError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in d:
            raise DesignError("config needs a 'model' block")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "model": self.model, "design": self.design,
            "regression": self.regression, "hac": self.hac, "T": list(self.T), "R": self.R,
            "seed": self.seed, "level": self.level, "R_mc": self.R_mc, "outputs": list(self.outputs),
        }

    def override(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def experiment(self, T: int) -> Experiment:
        model_spec = dict(self.model)
        if model_spec.get("center"):
            model_spec.setdefault("K", self.regression.get("K", 0))
            model_spec.setdefault("p", self.design.get("p", 0.5))
        reg = dict(self.regression)
        spec = RegressionSpec(int(reg.pop("K", 0)), reg.pop("variant", "full"), reg.pop("lag", None))
        if reg:
            raise DesignError(f"unsupported regression keys in config: {sorted(reg)}")
        hac = None if self.hac is None else HacConfig(**self.hac)
        return Experiment(build_model(model_spec, T), build_design_spec(self.design, T), spec, hac,
                          self.seed, self.name)


# --------------------------------------------------------------------------
# replication


def resolve_jobs(n_jobs: int | None) -> int:
    """Worker count: explicit value, else ``$SWITCHBACK_JOBS``, else 1."""
    if n_jobs is None:
        raw = os.environ.get(JOBS_ENV, "1")
        try:
            n_jobs = int(raw)
        except ValueError:
            raise DesignError(f"{JOBS_ENV}={raw!r} is not an integer") from None
    return max(1, int(n_jobs))


@dataclass(frozen=True)
class ReplicationSet:
    """Per-replication estimates for one experiment at one horizon.

    ``vhat`` maps each requested bandwidth (``0, 1, ..., "auto"``) to the
    stacked HAC matrices, shape ``(R, P, P)``; ``se`` uses the experiment's
    own HAC configuration and is NaN when it has none.
    """

    T: int
    K: int
    labels: tuple[str, ...]
    tau: np.ndarray
    tau_hat: np.ndarray
    se: np.ndarray
    indices: np.ndarray
    seed: int
    vhat: dict = field(default_factory=dict, repr=False)

    @property
    def R(self) -> int:
        return self.tau_hat.shape[0]

    @property
    def n(self) -> int:
        return self.T - self.K

    def scaled_errors(self) -> np.ndarray:
        """``sqrt(T-K) (tau_hat - tau)`` per replication."""
        return np.sqrt(self.n) * (self.tau_hat - self.tau)

    def coverage(self, level: float = 0.95) -> np.ndarray:
        from scipy import stats

        q = stats.norm.ppf(0.5 + level / 2)
        return (np.abs(self.tau_hat - self.tau) <= q * self.se).mean(axis=0)

    def summary(self) -> dict:
        err = self.tau_hat - self.tau
        return {
            "T": self.T,
            "R": self.R,
            "labels": list(self.labels),
            "tau": self.tau.tolist(),
            "mean": self.tau_hat.mean(axis=0).tolist(),
            "sd": self.tau_hat.std(axis=0, ddof=1).tolist() if self.R > 1 else [0.0] * self.tau.size,
            "bias": err.mean(axis=0).tolist(),
            "mean_se": self.se.mean(axis=0).tolist(),
        }


def _run_chunk(exp: Experiment, indices: np.ndarray, bandwidths: tuple) -> tuple:
    P = len(exp.spec.labels)
    tau_hat = np.empty((indices.size, P))
    se = np.full((indices.size, P), np.nan)
    vhat = {b: np.empty((indices.size, P, P)) for b in bandwidths}
    paths = draw_assignments(exp.design, exp.seed, indices, REPLICATION_STREAM, exp.T)
    ys = simulate(exp.model, paths)
    for j in range(indices.size):
        res = estimate(ys[j], paths[j], exp.design, exp.spec)
        tau_hat[j] = res.tau_hat
        if exp.hac is not None:
            own = res.with_hac(exp.hac)
            se[j] = own.vhat.standard_errors(res.n)
        for b in bandwidths:
            cfg = HacConfig(b, exp.hac.kernel if exp.hac else "bartlett")
            vhat[b][j] = res.with_hac(cfg).vhat.matrix
    return tau_hat, se, vhat


def replicate(exp: Experiment | ExperimentConfig, R: int | None = None, T: int | None = None,
              bandwidths: Sequence = (), n_jobs: int | None = None, chunk: int = 250) -> ReplicationSet:
    """Redraw ``R`` assignment paths and refit on each.

    Parameters
    ----------
    exp : Experiment or ExperimentConfig
        A config is instantiated at ``T`` (default: its first horizon).
    R : int, optional
        Defaults to the config's ``R`` (required for a bare Experiment).
    bandwidths : sequence
        Extra HAC bandwidths whose full matrices are kept.
    n_jobs : int, optional
        Worker processes; see :func:`resolve_jobs`. Output is identical for
        any value.
    """
    if isinstance(exp, ExperimentConfig):
        R = exp.R if R is None else R
        exp = exp.experiment(exp.T[0] if T is None else T)
    if R is None or R < 1:
        raise DesignError("need R >= 1 replications")
    bandwidths = tuple(dict.fromkeys(bandwidths))
    indices = np.arange(R)
    chunks = [indices[i:i + chunk] for i in range(0, R, chunk)]
    jobs = resolve_jobs(n_jobs)
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, [exp] * len(chunks), chunks, [bandwidths] * len(chunks)))
    else:
        parts = [_run_chunk(exp, c, bandwidths) for c in chunks]
    tau_hat = np.concatenate([p[0] for p in parts])
    se = np.concatenate([p[1] for p in parts])
    vhat = {b: np.concatenate([p[2][b] for p in parts]) for b in bandwidths}
    return ReplicationSet(exp.T, exp.spec.K, tuple(exp.spec.labels), exp.truth(), tau_hat, se, indices, exp.seed, vhat)


# --------------------------------------------------------------------------
# oracle covariance


def score_vectors(exp: Experiment, paths: np.ndarray, tau: np.ndarray | None = None) -> np.ndarray:
    """Oracle scores ``X'(Y - X W tau) / sqrt(T-K)`` for a stack of paths."""
    spec = exp.spec
    if spec.variant == "exposure":
        raise DesignError("oracle scores are not implemented for exposure regressions")
    tau = exp.truth() if tau is None else np.asarray(tau, dtype=float)
    w = design_weights(exp.design, spec)
    ys = simulate(exp.model, paths)
    X = build_design(normalize(paths, exp.design), spec.K, spec.variant, spec.lag, h=spec.h).X
    resid = ys[:, spec.K:] - X @ (w * tau)
    return np.einsum("bnp,bn->bp", X, resid) / np.sqrt(X.shape[1])


def oracle_V(exp: Experiment | ExperimentConfig, tau: np.ndarray | None = None,
             R_mc: int | None = None, T: int | None = None) -> np.ndarray:
    """Monte Carlo covariance of the oracle scores over ``R_mc`` fresh paths.

    The oracle residual uses the true effects, so unlike the spread of
    ``tau_hat`` this carries no Gram-matrix noise.
    """
    if isinstance(exp, ExperimentConfig):
        R_mc = exp.R_mc if R_mc is None else R_mc
        exp = exp.experiment(exp.T[0] if T is None else T)
    if R_mc is None or R_mc < 2:
        raise DesignError("oracle covariance needs R_mc >= 2")
    P = len(exp.spec.labels)
    batch = max(1, _ORACLE_BATCH_FLOATS // (exp.T * P))
    scores = np.empty((R_mc, P))
    for start in range(0, R_mc, batch):
        idx = np.arange(start, min(start + batch, R_mc))
        paths = draw_assignments(exp.design, exp.seed, idx, ORACLE_STREAM, exp.T)
        scores[idx] = score_vectors(exp, paths, tau)
    V = np.cov(scores, rowvar=False).reshape(P, P)
    return 0.5 * (V + V.T)


# --------------------------------------------------------------------------
# tables and curves


@dataclass(frozen=True)
class CoverageTable:
    T: tuple[int, ...]
    labels: tuple[str, ...]
    coverage: np.ndarray
    R: int
    level: float

    def rows(self) -> list[dict]:
        return [{"T": T, "lag": lab, "coverage": float(self.coverage[i, j]), "R": self.R, "level": self.level}
                for i, T in enumerate(self.T) for j, lab in enumerate(self.labels)]


def coverage_table(config: ExperimentConfig, level: float | None = None,
                   n_jobs: int | None = None) -> tuple[CoverageTable, dict[int, ReplicationSet]]:
    """Empirical coverage of the nominal ``level`` intervals at every horizon."""
    level = config.level if level is None else level
    sets = {T: replicate(config, T=T, n_jobs=n_jobs) for T in config.T}
    cov = np.stack([sets[T].coverage(level) for T in config.T])
    labels = sets[config.T[0]].labels
    return CoverageTable(config.T, labels, cov, config.R, level), sets


def frobenius_error(vhat: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``||Vhat - V||_F / ||V||_F`` for one matrix or a stack.

    When ``V`` is zero the error is 0 if ``Vhat`` is zero too and inf otherwise.
    """
    diff = np.linalg.norm(np.asarray(vhat) - V, axis=(-2, -1))
    scale = np.linalg.norm(V)
    if scale == 0:
        return np.where(diff == 0, 0.0, np.inf)
    return diff / scale


@dataclass(frozen=True)
class ErrorCurves:
    """``consistency[T]`` holds ``||tau_hat - tau||_2`` per replication;
    ``frobenius[(T, L)]`` holds the normalized HAC error per replication."""

    consistency: dict
    frobenius: dict
    oracle: dict

    def consistency_rows(self) -> list[dict]:
        return [{"T": T, "median": float(np.median(e)), "mean": float(e.mean()),
                 "q25": float(np.quantile(e, 0.25)), "q75": float(np.quantile(e, 0.75))}
                for T, e in self.consistency.items()]

    def frobenius_rows(self) -> list[dict]:
        return [{"T": T, "L": str(L), "mean": float(np.mean(e)), "median": float(np.median(e))}
                for (T, L), e in self.frobenius.items()]


def error_curves(config: ExperimentConfig, bandwidths: Sequence = DEFAULT_BANDWIDTHS,
                 R: int | None = None, R_mc: int | None = None, n_jobs: int | None = None) -> ErrorCurves:
    """Estimation error and HAC error across horizons and bandwidths."""
    consistency, frob, oracle = {}, {}, {}
    for T in config.T:
        exp = config.experiment(T)
        reps = replicate(exp, R=config.R if R is None else R, bandwidths=bandwidths, n_jobs=n_jobs)
        consistency[T] = np.linalg.norm(reps.tau_hat - reps.tau, axis=1)
        V = oracle_V(exp, R_mc=config.R_mc if R_mc is None else R_mc)
        oracle[T] = V
        for b in bandwidths:
            frob[(T, b)] = frobenius_error(reps.vhat[b], V)
    return ErrorCurves(consistency, frob, oracle)


# --------------------------------------------------------------------------
# closed-form variances


@dataclass(frozen=True)
class AnalyticVariances:
    """Closed-form asymptotic variances for a homogeneous linear model.

    ``full``, ``marginal`` and ``gap`` are indexed by lag ``k = 0..K``; the
    interaction pair is ``None`` unless interaction effects were supplied.
    """

    full: np.ndarray
    marginal: np.ndarray
    gap: np.ndarray
    with_interaction: float | None = None
    without_interaction: float | None = None


def _pad(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    out = np.zeros(max(n, a.size))
    out[:a.size] = a
    return out


def analytic_variances(beta, eps, K: int, p, interaction=None, cross_time: bool = False) -> AnalyticVariances:
    """Evaluate the displayed variance sums for full, marginal and interaction OLS.

    Parameters
    ----------
    beta : array_like
        Homogeneous effects ``beta_0, beta_1, ...``; later lags are zero.
    eps : array_like, shape (T,)
    K : int
    p : float
        Constant treatment probability. A nonconstant array is rejected.
    interaction : array_like, optional
        ``interaction[l] = beta_{l-1,l}`` (entry 0 ignored).
    cross_time : bool
        Add to the marginal variance the covariance between scores at times
        ``t`` and ``t + k - l``. That term is ``beta_l beta_{2k-l}`` for each
        ``l != k`` and is absent from the displayed marginal sum, so the
        default reproduces the display and ``True`` gives the exact value.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    if not np.all(p_arr == p_arr[0]):
        raise DesignError("closed-form variances need a constant treatment probability")
    p = float(p_arr[0])
    eps = np.asarray(eps, dtype=float)
    T = eps.size
    if not 0 <= K < T:
        raise DesignError(f"need 0 <= K < T, got K={K}, T={T}")
    b = _pad(beta, T + 1)
    g = None if interaction is None else _pad(interaction, T + 2)
    if g is not None:
        g[0] = 0.0
    q = p * (1 - p)
    ts = np.arange(K + 1, T + 1)
    n = ts.size
    b2 = np.concatenate([[0.0], np.cumsum(b ** 2)])  # b2[m] = sum_{l<m} beta_l^2

    level = _outcome_level(b[:T], None if g is None else g[:T], p, T)[K:] + eps[K:]
    second = np.sum(level ** 2) / (q * n)

    # sum_{l=K+1}^{t-1} beta_l^2
    tail = np.clip(b2[ts] - b2[K + 1], 0.0, None)
    full_val = tail.mean() + second
    full = np.full(K + 1, full_val)
    marginal = np.empty(K + 1)
    for k in range(K + 1):
        s = b2[ts] - np.where(k <= ts - 1, b[k] ** 2, 0.0)
        marginal[k] = s.mean() + second
        if cross_time:
            extra = 0.0
            for l in range(0, 2 * k + 1):
                if l == k:
                    continue
                lp = 2 * k - l
                s_t = ts + k - l
                ok = (l <= ts - 1) & (s_t >= K + 1) & (s_t <= T) & (lp <= s_t - 1)
                extra += b[l] * b[lp] * np.count_nonzero(ok)
            marginal[k] += extra / n
    gap = np.array([np.sum(b[:K + 1] ** 2) - b[k] ** 2 for k in range(K + 1)])

    with_int = without_int = None
    if g is not None:
        # the beta_{l,l+1} term needs l+1 <= t-1
        first = np.array([
            np.sum(b[K + 1:t] ** 2 + p * p * g[K + 1:t] ** 2) + p * p * np.sum(g[K + 2:t] ** 2)
            for t in ts
        ])
        own = np.array([q * np.sum(g[K + 1:t] ** 2) for t in ts])
        every = np.array([q * np.sum(g[1:t] ** 2) for t in ts])
        with_int = float(first.mean() + own.mean() + second)
        without_int = float(first.mean() + every.mean() + second)
    return AnalyticVariances(full, marginal, gap, with_int, without_int)


# --------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, rows: list[dict]) -> Path:
    """Tidy CSV with 17-significant-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return path
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def replication_rows(reps: ReplicationSet) -> list[dict]:
    """One row per replication and lag."""
    rows = []
    for r in range(reps.R):
        for j, lab in enumerate(reps.labels):
            rows.append({"T": reps.T, "replication": int(reps.indices[r]), "lag": lab,
                         "tau": float(reps.tau[j]), "tau_hat": float(reps.tau_hat[r, j]),
                         "se": float(reps.se[r, j])})
    return rows


def write_experiment(out_dir, config: ExperimentConfig, table: CoverageTable | None = None,
                     sets: dict | None = None, curves: ErrorCurves | None = None) -> list[Path]:
    """Write ``<out_dir>/<name>/{coverage,replications,consistency,frobenius}.csv``
    and ``summary.json``."""
    root = Path(out_dir) / config.name
    written = []
    summary = {"config": config.to_dict(),
               "oracle_V": "covariance of oracle scores X'(Y - X W tau)/sqrt(T-K)"}
    if table is not None:
        written.append(write_csv(root / "coverage.csv", table.rows()))
        summary["coverage"] = {str(T): table.coverage[i].tolist() for i, T in enumerate(table.T)}
    if sets:
        rows = [row for T in sorted(sets) for row in replication_rows(sets[T])]
        written.append(write_csv(root / "replications.csv", rows))
        summary["replications"] = {str(T): sets[T].summary() for T in sorted(sets)}
    if curves is not None:
        written.append(write_csv(root / "consistency.csv", curves.consistency_rows()))
        written.append(write_csv(root / "frobenius.csv", curves.frobenius_rows()))
        summary["oracle"] = {str(T): V.tolist() for T, V in curves.oracle.items()}
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    written.append(root / "summary.json")
    return written
