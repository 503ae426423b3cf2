"""Lagged no-intercept regressions on normalized treatments.

Four regressor layouts are supported, all using outcome times t = K+1..T:

``full``
    ``(z~_t, z~_{t-1}, ..., z~_{t-K})``
``marginal``
    the single column ``z~_{t-k}``
``interaction``
    the full columns followed by ``z~_t z~_{t-1}, ..., z~_{t-K+1} z~_{t-K}``
``exposure``
    normalized exposure-mapping columns ``g~_{t,0}, ..., g~_{t,S}``

Raw coefficients are rescaled by the matching harmonic-mean weights so that
they estimate lagged treatment effects on the outcome scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import scipy.linalg

from switchback.design import (
    AssignmentDesign,
    ExposureSpec,
    exposure_transform,
    generalized_weights,
    interaction_weights,
    lag_weights,
    normalize,
    validate_path,
)
from switchback.exceptions import DataError, DesignError, SingularDesignError

RANK_TOL = 1e-10
CONDITION_WARN = 1e8

Variant = Literal["full", "marginal", "interaction", "exposure"]

__all__ = [
    "EstimateResult",
    "LaggedDesign",
    "OLSFit",
    "RegressionSpec",
    "build_design",
    "design_weights",
    "estimate",
    "ols_no_intercept",
    "rescale",
    "wls_lag0",
]


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RegressionSpec:
    """What to regress on.

    Parameters
    ----------
    K : int
        Number of lags; observations t = K+1..T enter the fit.
    variant : {"full", "marginal", "interaction", "exposure"}
    lag : int, optional
        The lag ``k`` regressed on by the marginal variant.
    exposure : ExposureSpec, optional
        Required by the exposure variant, whose last boundary must equal K.
    h : array_like, optional
        Outcome-time scaling ``h_{K+1..T}`` for the full or marginal variant.
    """

    K: int
    variant: Variant = "full"
    lag: int | None = None
    exposure: ExposureSpec | None = None
    h: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.K < 0:
            raise DesignError("K must be nonnegative")
        if self.variant not in ("full", "marginal", "interaction", "exposure"):
            raise DesignError(f"unknown regression variant {self.variant!r}")
        if self.variant == "marginal":
            if self.lag is None or not 0 <= self.lag <= self.K:
                raise DesignError(f"marginal variant needs a lag in [0, {self.K}], got {self.lag}")
        elif self.lag is not None:
            raise DesignError("only the marginal variant takes a lag")
        if self.variant == "interaction" and self.K < 1:
            raise DesignError("interaction variant needs K >= 1")
        if self.variant == "exposure":
            if self.exposure is None:
                raise DesignError("exposure variant needs an ExposureSpec")
            if self.exposure.K != self.K:
                raise DesignError(f"exposure blocks end at lag {self.exposure.K}, not K={self.K}")
        elif self.exposure is not None:
            raise DesignError("only the exposure variant takes an ExposureSpec")
        if self.h is not None:
            if self.variant not in ("full", "marginal"):
                raise DesignError("h-scaling applies to the full and marginal variants")
            h = np.array(self.h, dtype=float)
            h.setflags(write=False)
            object.__setattr__(self, "h", h)

    @property
    def labels(self) -> list[str]:
        if self.variant == "full":
            return [f"tau_{k}" for k in range(self.K + 1)]
        if self.variant == "marginal":
            return [f"tau_{self.lag}"]
        if self.variant == "interaction":
            return ([f"tau_{k}" for k in range(self.K + 1)]
                    + [f"tau_{k - 1}_{k}" for k in range(1, self.K + 1)])
        return [f"tau_g{s}" for s in range(self.exposure.S + 1)]

    def with_lags(self, K: int) -> "RegressionSpec":
        return replace(self, K=K)


@dataclass(frozen=True)
class LaggedDesign:
    """Regressor matrix; row ``i`` corresponds to outcome time ``t = K+1+i``."""

    X: np.ndarray
    K: int
    variant: str
    labels: tuple[str, ...]

    @property
    def rows(self) -> int:
        return self.X.shape[0]

    @property
    def cols(self) -> int:
        return self.X.shape[1]


def build_design(ztilde, K: int, variant: Variant = "full", lag: int | None = None,
                 exposure_columns: np.ndarray | None = None, h=None) -> LaggedDesign:
    """Lay out the lagged regressors for one normalized path.

    For the exposure variant pass the precomputed ``g~`` columns (shape
    ``(T-K, S+1)``) as ``exposure_columns``; ``ztilde`` is then only used for
    its length.
    """
    z = np.asarray(ztilde, dtype=float)
    T = z.shape[-1]
    if T <= K:
        raise DesignError(f"need T > K, got T={T}, K={K}")
    n = T - K
    lagged = [z[..., K - k:T - k] for k in range(K + 1)]
    if variant == "full":
        cols = lagged
        labels = [f"tau_{k}" for k in range(K + 1)]
    elif variant == "marginal":
        if lag is None or not 0 <= lag <= K:
            raise DesignError(f"marginal lag must lie in [0, {K}]")
        cols = [lagged[lag]]
        labels = [f"tau_{lag}"]
    elif variant == "interaction":
        if K < 1:
            raise DesignError("interaction variant needs K >= 1")
        cols = lagged + [lagged[k - 1] * lagged[k] for k in range(1, K + 1)]
        labels = [f"tau_{k}" for k in range(K + 1)] + [f"tau_{k - 1}_{k}" for k in range(1, K + 1)]
    elif variant == "exposure":
        if exposure_columns is None:
            raise DesignError("exposure variant needs precomputed exposure columns")
        g = np.asarray(exposure_columns, dtype=float)
        if g.shape[-2] != n:
            raise DesignError(f"exposure columns have {g.shape[-2]} rows, expected {n}")
        X = g
        labels = [f"tau_g{s}" for s in range(g.shape[-1])]
        cols = None
    else:
        raise DesignError(f"unknown regression variant {variant!r}")
    if cols is not None:
        X = np.stack(cols, axis=-1)
    if h is not None:
        h = np.asarray(h, dtype=float)
        if h.shape != (n,):
            raise DesignError(f"h must have length T-K={n}")
        X = X * h[:, None]
    return LaggedDesign(X, K, variant, tuple(labels))


@dataclass(frozen=True)
class OLSFit:
    coef: np.ndarray
    gram_inverse: np.ndarray
    condition: float


def ols_no_intercept(X, y) -> OLSFit:
    """Least squares without intercept by column-pivoted QR.

    Raises
    ------
    SingularDesignError
        If the smallest-to-largest singular value ratio of ``X`` falls below
        ``RANK_TOL``. The pivot order identifies the column that adds the
        least new direction.
    """
    X = np.asarray(X.X if isinstance(X, LaggedDesign) else X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, P = X.shape
    if y.shape != (n,):
        raise DataError(f"outcome segment has length {y.shape}, design has {n} rows")
    if n < P:
        raise SingularDesignError(f"{n} observations cannot identify {P} coefficients")
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < RANK_TOL:
        diag = np.abs(np.diag(R))
        bad = int(piv[np.argmin(diag)]) if diag.size else 0
        raise SingularDesignError(
            f"regressor matrix is rank deficient (singular value ratio "
            f"{sv[-1] / sv[0] if sv[0] else 0.0:.3g}); column {bad} is collinear with the others",
            column=bad,
        )
    condition = float((sv[0] / sv[-1]) ** 2)
    if condition > CONDITION_WARN:
        warnings.warn(f"Gram matrix condition number {condition:.3g} exceeds {CONDITION_WARN:g}",
                      IllConditionedWarning, stacklevel=2)
    coef_p = scipy.linalg.solve_triangular(R, Q.T @ y)
    Rinv = scipy.linalg.solve_triangular(R, np.eye(P))
    ginv_p = Rinv @ Rinv.T
    coef = np.empty(P)
    coef[piv] = coef_p
    ginv = np.empty((P, P))
    ginv[np.ix_(piv, piv)] = ginv_p
    return OLSFit(coef, ginv, condition)


def rescale(tau_tilde, weights) -> np.ndarray:
    """Effect-scale estimates ``tau_tilde / weights``."""
    tau_tilde = np.asarray(tau_tilde, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != tau_tilde.shape:
        raise DesignError(f"{tau_tilde.size} coefficients but {weights.size} weights")
    if np.any(weights <= 0):
        raise DesignError("weights must be positive")
    return tau_tilde / weights


def design_weights(design: AssignmentDesign, spec: RegressionSpec) -> np.ndarray:
    """Diagonal of the rescaling matrix for ``spec``."""
    if spec.variant in ("full", "marginal"):
        w = (lag_weights(design, spec.K) if spec.h is None
             else generalized_weights(design, spec.h, spec.K))
        return w if spec.variant == "full" else w[[spec.lag]]
    if spec.variant == "interaction":
        return np.concatenate([lag_weights(design, spec.K), interaction_weights(design, spec.K)])
    _, w = exposure_transform(np.zeros(design.T), design, spec.exposure)
    return w


@dataclass(frozen=True)
class EstimateResult:
    """Fitted lagged regression.

    ``residuals`` are on the raw coefficient scale, ``y - X @ tau_tilde``.
    ``vhat`` is filled by :meth:`with_hac`.
    """

    tau_tilde: np.ndarray
    tau_hat: np.ndarray
    weights: np.ndarray
    residuals: np.ndarray
    design: LaggedDesign = field(repr=False)
    gram_inverse: np.ndarray = field(repr=False)
    T: int
    condition: float
    vhat: object = None

    @property
    def K(self) -> int:
        return self.design.K

    @property
    def variant(self) -> str:
        return self.design.variant

    @property
    def labels(self) -> tuple[str, ...]:
        return self.design.labels

    @property
    def n(self) -> int:
        """Number of rows used, ``T - K``."""
        return self.design.rows

    def with_hac(self, config=None) -> "EstimateResult":
        """Copy of this result carrying the HAC covariance under ``config``."""
        from switchback.hac import HacConfig, hac_covariance

        cov = hac_covariance(self.design, self.residuals, self.weights, config or HacConfig(),
                             gram_inverse=self.gram_inverse)
        return replace(self, vhat=cov)

    def to_dict(self) -> dict:
        out = {
            "T": self.T,
            "K": self.K,
            "variant": self.variant,
            "labels": list(self.labels),
            "tau_hat": self.tau_hat.tolist(),
            "tau_tilde": self.tau_tilde.tolist(),
            "weights": self.weights.tolist(),
            "condition": self.condition,
        }
        if self.vhat is not None:
            out["vhat"] = self.vhat.matrix.tolist()
            out["bandwidth"] = self.vhat.bandwidth
            out["kernel"] = self.vhat.kernel
        return out


def estimate(y, path, design: AssignmentDesign, spec: RegressionSpec, hac=None) -> EstimateResult:
    """Normalize, build the lagged design, solve, and rescale.

    If ``hac`` (a :class:`~switchback.hac.HacConfig`) is given the returned
    result also carries the HAC covariance.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (design.T,):
        raise DataError(f"outcome series has length {y.shape[0] if y.ndim else 0}, design has T={design.T}")
    if not np.all(np.isfinite(y)):
        raise DataError("outcome series contains non-finite values")
    K = spec.K
    if K >= design.T:
        raise DesignError(f"K={K} leaves no usable observations for T={design.T}")
    if spec.variant == "exposure":
        gtilde, weights = exposure_transform(path, design, spec.exposure)
        lagged = build_design(np.zeros(design.T), K, "exposure", exposure_columns=gtilde)
    else:
        ztilde = normalize(path, design)
        lagged = build_design(ztilde, K, spec.variant, spec.lag, h=spec.h)
        weights = design_weights(design, spec)
    fit = ols_no_intercept(lagged.X, y[K:])
    resid = y[K:] - lagged.X @ fit.coef
    result = EstimateResult(
        tau_tilde=fit.coef,
        tau_hat=rescale(fit.coef, weights),
        weights=weights,
        residuals=resid,
        design=lagged,
        gram_inverse=fit.gram_inverse,
        T=design.T,
        condition=fit.condition,
    )
    return result if hac is None else result.with_hac(hac)


def wls_lag0(y, path, design: AssignmentDesign) -> float:
    """Observation-weighted lag-0 estimate over all T time points.

    ``[sum (z_t - p_t)^2 / (p_t (1 - p_t))]^{-1} sum z~_t y_t``
    """
    if design.kind != "binary":
        raise DesignError("the lag-0 WLS estimator is defined for binary designs")
    z = validate_path(path, design)
    y = np.asarray(y, dtype=float)
    if y.shape != (design.T,):
        raise DataError("outcome series and design lengths differ")
    p, v = design.p, design.variances
    denom = np.sum((z - p) ** 2 / v)
    if denom == 0:
        raise DesignError("every z_t equals p_t; the WLS denominator vanishes")
    return float(np.sum((z - p) / v * y) / denom)
