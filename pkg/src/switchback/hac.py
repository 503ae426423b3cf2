"""Kernel-weighted (HAC) sandwich covariance for the rescaled estimates.

For a fit with regressor rows ``x_t``, residuals ``u_t`` and ``n = T - K``
rows, the estimator is::

    Vhat = n W^{-1} (X'X)^{-1} M (X'X)^{-1} W^{-1},
    M    = sum_{|l| <= L} kappa(l) Gamma_l,
    Gamma_l = sum_t u_t u_{t+l} x_t x_{t+l}'.

``M`` is accumulated lag by lag, which costs O(n L P^2) instead of forming
the n-by-n kernel matrix. No degrees-of-freedom correction is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from switchback.exceptions import DesignError, NumericalError

PSD_TOL = 1e-8

__all__ = [
    "HacConfig",
    "HacCovariance",
    "bartlett_weight",
    "bias_term",
    "bias_term_from_effects",
    "default_bandwidth",
    "hac_covariance",
    "kernel_lag_sum",
]


def bartlett_weight(lag: int, L: int) -> float:
    """Bartlett (triangular) kernel: ``1 - |lag|/(L+1)`` inside the band, else 0."""
    lag = abs(int(lag))
    if lag > L:
        return 0.0
    return 1.0 - lag / (L + 1.0)


KERNELS: dict[str, Callable[[int, int], float]] = {"bartlett": bartlett_weight}


def default_bandwidth(T: int) -> int:
    """``floor(T ** (1/4))`` computed in integer arithmetic."""
    return math.isqrt(math.isqrt(int(T)))


@dataclass(frozen=True)
class HacConfig:
    """Bandwidth and kernel choice.

    ``bandwidth="auto"`` selects ``floor(T ** (1/4))`` from the series length.
    """

    bandwidth: int | str = "auto"
    kernel: str = "bartlett"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise DesignError(f"unknown kernel {self.kernel!r}; available: {sorted(KERNELS)}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise DesignError(f"bandwidth must be a nonnegative integer or 'auto', got {self.bandwidth!r}")
        elif int(self.bandwidth) != self.bandwidth or self.bandwidth < 0:
            raise DesignError(f"bandwidth must be a nonnegative integer, got {self.bandwidth!r}")

    def resolve(self, T: int) -> int:
        return default_bandwidth(T) if self.bandwidth == "auto" else int(self.bandwidth)


@dataclass(frozen=True)
class HacCovariance:
    matrix: np.ndarray
    bandwidth: int
    kernel: str
    min_eigenvalue: float

    def standard_errors(self, n: int) -> np.ndarray:
        """``sqrt(Vhat_kk / n)`` with tiny negative diagonals clipped to 0."""
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None) / n)


def kernel_lag_sum(scores: np.ndarray, L: int, kernel: str = "bartlett") -> np.ndarray:
    """``sum_{|l|<=L} kappa(l) sum_t s_t s_{t+l}'`` for score rows ``s_t``."""
    weight = KERNELS[kernel]
    S = np.asarray(scores, dtype=float)
    out = S.T @ S
    for lag in range(1, min(L, S.shape[0] - 1) + 1):
        kw = weight(lag, L)
        if kw == 0.0:
            continue
        G = S[:-lag].T @ S[lag:]
        out += kw * (G + G.T)
    return out


def hac_covariance(X, residuals, weights, config: HacConfig | None = None,
                   gram_inverse: np.ndarray | None = None, T: int | None = None) -> HacCovariance:
    """HAC covariance of the rescaled estimates.

    Parameters
    ----------
    X : LaggedDesign or ndarray, shape (n, P)
    residuals : ndarray, shape (n,)
        Raw-scale residuals ``y - X tau_tilde``.
    weights : ndarray, shape (P,)
    config : HacConfig
    gram_inverse : ndarray, optional
        ``(X'X)^{-1}`` if already available from the fit.
    T : int, optional
        Series length for the automatic bandwidth; defaults to ``n + K`` for a
        LaggedDesign and ``n`` for a bare matrix.
    """
    config = config or HacConfig()
    K = getattr(X, "K", 0)
    X = np.asarray(getattr(X, "X", X), dtype=float)
    u = np.asarray(residuals, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, P = X.shape
    if u.shape != (n,):
        raise DesignError(f"{u.size} residuals for {n} regressor rows")
    if w.shape != (P,):
        raise DesignError(f"{w.size} weights for {P} columns")
    L = config.resolve(n + K if T is None else T)
    if L >= n:
        raise DesignError(f"bandwidth L={L} must be below the number of rows n={n}")
    if gram_inverse is None:
        R = scipy.linalg.qr(X, mode="r")[0][:P]
        Rinv = scipy.linalg.solve_triangular(R, np.eye(P))
        gram_inverse = Rinv @ Rinv.T
    meat = kernel_lag_sum(X * u[:, None], L, config.kernel)
    bread = gram_inverse / w[:, None]
    V = n * bread @ meat @ bread.T
    V = 0.5 * (V + V.T)
    eig = np.linalg.eigvalsh(V) if P > 0 else np.zeros(0)
    lo = float(eig[0]) if eig.size else 0.0
    if lo < -PSD_TOL * max(float(np.trace(V)), np.finfo(float).tiny):
        raise NumericalError(f"HAC covariance has eigenvalue {lo:.3g}; not positive semidefinite")
    return HacCovariance(V, L, config.kernel, lo)


def bias_term_from_effects(tau_t: np.ndarray, tau: np.ndarray, variances: np.ndarray,
                           weights: np.ndarray, L: int, kernel: str = "bartlett") -> np.ndarray:
    """Conservativeness term from per-time effects.

    ``b[t, k] = tau_{t,k} - w_k tau_k / Var[Z_{t-k}]`` and the result is
    ``(T-K)^{-1} b' Q b`` with ``Q`` the kernel matrix of bandwidth ``L``.

    Parameters
    ----------
    tau_t : ndarray, shape (T-K, K+1)
    tau : ndarray, shape (K+1,)
    variances : ndarray, shape (T,)
        ``Var[Z_t]`` for the whole series.
    weights : ndarray, shape (K+1,)
    """
    tau_t = np.asarray(tau_t, dtype=float)
    n, P = tau_t.shape
    K = P - 1
    T = n + K
    v = np.asarray(variances, dtype=float)
    lagged_v = np.stack([v[K - k:T - k] for k in range(K + 1)], axis=1)
    b = tau_t - np.asarray(weights)[None, :] * np.asarray(tau)[None, :] / lagged_v
    return kernel_lag_sum(b, L, kernel) / n


def bias_term(model, design, K: int, L: int, kernel: str = "bartlett") -> np.ndarray:
    """Bias term of the HAC estimator for the full regression under ``model``."""
    from switchback.design import lag_weights
    from switchback.dgp import true_tau

    tau, tau_t = true_tau(model, design, K, per_time=True)
    return bias_term_from_effects(tau_t, tau, design.variances, lag_weights(design, K), L, kernel)
