"""Confidence intervals, Wald tests and randomization tests for lagged effects."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from switchback.design import AssignmentDesign, draw_assignment
from switchback.exceptions import DesignError, NumericalError, SingularDesignError
from switchback.hac import HacConfig
from switchback.regression import EstimateResult, RegressionSpec, estimate

WALD_RANK_TOL = 1e-10
MAX_FAILED_FRACTION = 0.01

__all__ = [
    "FRTResult",
    "InferenceReport",
    "LagInference",
    "WaldResult",
    "confidence_intervals",
    "frt_sharp",
    "report",
    "studentized_wald",
    "wald_test",
]


@dataclass(frozen=True)
class LagInference:
    label: str
    estimate: float
    se: float
    low: float
    high: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    df: int
    p_value: float
    subset: tuple[int, ...]


@dataclass(frozen=True)
class FRTResult:
    observed: float
    p_value: float
    n_perm: int
    resampled: np.ndarray = field(repr=False)
    n_failed: int = 0


@dataclass(frozen=True)
class InferenceReport:
    level: float
    lags: tuple[LagInference, ...]
    wald: WaldResult | None = None
    frt: FRTResult | None = None

    def to_dict(self) -> dict:
        out = {
            "level": self.level,
            "lags": [vars(lag) for lag in self.lags],
        }
        if self.wald is not None:
            out["wald"] = {"statistic": self.wald.statistic, "df": self.wald.df,
                           "p_value": self.wald.p_value, "subset": list(self.wald.subset)}
        if self.frt is not None:
            out["frt"] = {"observed": self.frt.observed, "p_value": self.frt.p_value,
                          "n_perm": self.frt.n_perm, "n_failed": self.frt.n_failed}
        return out


def _require_vhat(result: EstimateResult):
    if result.vhat is None:
        raise DesignError("result has no HAC covariance; call with_hac() first")
    return result.vhat


def confidence_intervals(result: EstimateResult, level: float = 0.95) -> tuple[LagInference, ...]:
    """Normal-theory intervals and two-sided p-values per coefficient.

    A zero standard error with a nonzero estimate gives ``p = 0``; with a zero
    estimate it gives ``p = 1``. Both set ``degenerate``.
    """
    if not 0 < level < 1:
        raise DesignError(f"level must lie in (0, 1), got {level}")
    vhat = _require_vhat(result)
    se = vhat.standard_errors(result.n)
    q = stats.norm.ppf(0.5 + level / 2)
    out = []
    for label, est, s in zip(result.labels, result.tau_hat, se):
        if s > 0:
            p = 2 * stats.norm.sf(abs(est) / s)
            degenerate = False
        else:
            p = 1.0 if est == 0 else 0.0
            degenerate = True
        out.append(LagInference(label, float(est), float(s), float(est - q * s), float(est + q * s),
                                float(p), degenerate))
    return tuple(out)


def _subset(result: EstimateResult, subset) -> tuple[int, ...]:
    P = result.tau_hat.size
    idx = tuple(range(P)) if subset is None else tuple(int(i) for i in subset)
    if not idx:
        raise DesignError("Wald subset is empty")
    if len(set(idx)) != len(idx) or min(idx) < 0 or max(idx) >= P:
        raise DesignError(f"Wald subset {idx} must hold distinct indices in [0, {P - 1}]")
    return idx


def studentized_wald(result: EstimateResult, subset: Sequence[int] | None = None) -> float:
    """``n tau_S' Vhat_SS^{-1} tau_S`` for coefficient indices ``subset``."""
    idx = _subset(result, subset)
    V = _require_vhat(result).matrix[np.ix_(idx, idx)]
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < WALD_RANK_TOL:
        raise SingularDesignError(
            f"HAC covariance block for lags {list(idx)} is singular; test a smaller subset"
        )
    t = result.tau_hat[list(idx)]
    return float(result.n * t @ np.linalg.solve(V, t))


def wald_test(result: EstimateResult, subset: Sequence[int] | None = None) -> WaldResult:
    """Joint test of ``tau_k = 0`` for all k in ``subset`` (default: all)."""
    idx = _subset(result, subset)
    stat = studentized_wald(result, idx)
    return WaldResult(stat, len(idx), float(stats.chi2.sf(stat, len(idx))), idx)


def frt_sharp(y, path, design: AssignmentDesign, spec: RegressionSpec,
              subset: Sequence[int] | None = None, n_perm: int = 999, seed: int = 0,
              hac: HacConfig | None = None) -> FRTResult:
    """Randomization test of the sharp null of no effect at all.

    Under the sharp null ``y`` does not depend on the assignment, so it is held
    fixed while fresh paths are redrawn from ``design`` (resample ``i`` uses
    stream ``(seed, i)``). The statistic is the HAC-studentized Wald statistic
    on ``subset``. Resamples whose fit is singular are dropped and counted;
    more than 1% of them aborts the test.
    """
    if n_perm < 0:
        raise DesignError("n_perm must be nonnegative")
    hac = hac or HacConfig()
    observed = studentized_wald(estimate(y, path, design, spec, hac=hac), subset)
    stats_ = np.empty(n_perm)
    ok = np.ones(n_perm, dtype=bool)
    for i in range(n_perm):
        z = draw_assignment(design, seed, i)
        try:
            stats_[i] = studentized_wald(estimate(y, z, design, spec, hac=hac), subset)
        except SingularDesignError:
            ok[i] = False
    n_failed = int((~ok).sum())
    if n_perm and n_failed / n_perm > MAX_FAILED_FRACTION:
        raise NumericalError(f"{n_failed} of {n_perm} randomization resamples were singular")
    resampled = stats_[ok]
    p = (1 + np.count_nonzero(resampled >= observed)) / (resampled.size + 1)
    return FRTResult(observed, float(p), n_perm, resampled, n_failed)


def report(result: EstimateResult, level: float = 0.95,
           joint: Sequence[int] | None = None, frt: FRTResult | None = None) -> InferenceReport:
    """Per-lag intervals plus the joint Wald test on ``joint`` (default: all)."""
    return InferenceReport(level, confidence_intervals(result, level), wald_test(result, joint), frt)
