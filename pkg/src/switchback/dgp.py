"""Fixed potential-outcome models with closed-form lagged effects.

Every model here is design-based: its error terms are frozen numbers, so the
only randomness in an observed series comes from the assignment path.

All three classes are linear in the treatments, which makes ``simulate``
accept either one path of shape ``(T,)`` or a stack ``(R, T)``. For continuous
treatments the two-valued quantities (``mu(1)``, ``mu(0)`` and friends) are
interpolated linearly in ``z``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from switchback.design import AssignmentDesign
from switchback.exceptions import DesignError

ENUMERATION_CAP = 20

__all__ = [
    "ARPOModel",
    "LinearPOModel",
    "MAPOModel",
    "brute_force_tau",
    "impulse_responses",
    "simulate",
    "true_interaction_tau",
    "true_tau",
]


def _arr(x, shape=None) -> np.ndarray:
    a = np.array(x, dtype=float)
    if shape is not None:
        a = np.broadcast_to(a, shape).copy()
    if not np.all(np.isfinite(a)):
        raise DesignError("model parameters must be finite")
    a.setflags(write=False)
    return a


def _band_mask(T: int, width: int) -> np.ndarray:
    # entry (t-1, k) is admissible when k < t
    return np.arange(width)[None, :] < np.arange(1, T + 1)[:, None]


@dataclass(frozen=True)
class LinearPOModel:
    """``Y_t = sum_k beta[t,k] z_{t-k} + sum_k gamma[t,k] z_{t-k} z_{t-k+1} + eps_t``.

    Parameters
    ----------
    beta : ndarray, shape (T, B+1)
        Banded main-effect coefficients; ``beta[t-1, k]`` is ``beta_{t,k}``.
        Lags beyond column ``B`` are zero.
    eps : ndarray, shape (T,)
        Treatment-independent errors.
    interaction : ndarray, shape (T, B'+1), optional
        ``interaction[t-1, k]`` multiplies ``z_{t-k} z_{t-k+1}`` (column 0 unused).
    """

    beta: np.ndarray
    eps: np.ndarray
    interaction: np.ndarray | None = field(default=None)

    def __post_init__(self):
        eps = _arr(self.eps)
        if eps.ndim != 1:
            raise DesignError("eps must be one-dimensional")
        T = eps.size
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 2 or beta.shape[0] != T:
            raise DesignError(f"beta must have shape (T={T}, B+1), got {beta.shape}")
        beta = _arr(np.where(_band_mask(T, beta.shape[1]), beta, 0.0))
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "beta", beta)
        if self.interaction is not None:
            g = np.array(self.interaction, dtype=float)
            if g.ndim != 2 or g.shape[0] != T:
                raise DesignError(f"interaction must have shape (T={T}, B+1), got {g.shape}")
            g[:, 0] = 0.0
            object.__setattr__(self, "interaction", _arr(np.where(_band_mask(T, g.shape[1]), g, 0.0)))

    @classmethod
    def homogeneous(cls, beta, eps, interaction=None) -> "LinearPOModel":
        """Time-constant ``beta_k`` (and ``beta_{k-1,k}`` given as ``interaction[k]``)."""
        eps = np.asarray(eps, dtype=float)
        T = eps.size
        b = np.tile(np.asarray(beta, dtype=float), (T, 1))
        g = None if interaction is None else np.tile(np.asarray(interaction, dtype=float), (T, 1))
        return cls(b, eps, g)

    @property
    def T(self) -> int:
        return self.eps.size

    def effects(self, width: int | None = None) -> np.ndarray:
        """``beta_{t,k}`` for k < ``width`` (default: the stored band)."""
        if width is None or width == self.beta.shape[1]:
            return self.beta
        out = np.zeros((self.T, width))
        m = min(width, self.beta.shape[1])
        out[:, :m] = self.beta[:, :m]
        return out


@dataclass(frozen=True)
class ARPOModel:
    """``Y_t = mu_t(z_t) + sum_k phi_k Y_{t-k} + eps_t`` with zero pre-sample values.

    ``mu1`` and ``mu0`` may be scalars or per-time arrays.
    """

    phi: np.ndarray
    mu1: np.ndarray
    mu0: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        eps = _arr(self.eps)
        if eps.ndim != 1:
            raise DesignError("eps must be one-dimensional")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "phi", _arr(np.atleast_1d(self.phi) if np.size(self.phi) else []))
        object.__setattr__(self, "mu1", _arr(self.mu1, eps.shape))
        object.__setattr__(self, "mu0", _arr(self.mu0, eps.shape))

    @property
    def T(self) -> int:
        return self.eps.size

    @property
    def order(self) -> int:
        return self.phi.size

    def effects(self, width: int | None = None) -> np.ndarray:
        """``beta_{t,k} = Psi_k (mu_{t-k}(1) - mu_{t-k}(0))`` for k < ``width``."""
        T = self.T
        width = T if width is None else width
        psi = impulse_responses(self.phi, width - 1)
        dmu = self.mu1 - self.mu0
        out = np.zeros((T, width))
        for k in range(min(width, T)):
            out[k:, k] = psi[k] * dmu[:T - k]
        return out


@dataclass(frozen=True)
class MAPOModel:
    """``Y_t = mu_t(z_t) + sum_k theta_k e_{t-k}(z_{t-k}) + e_t(z_t)``.

    ``mu1, mu0`` and ``eps1, eps0`` hold the two values of the mean and error
    functions at each time (scalars broadcast over time).
    """

    theta: np.ndarray
    mu1: np.ndarray
    mu0: np.ndarray
    eps1: np.ndarray
    eps0: np.ndarray

    def __post_init__(self):
        eps0 = _arr(self.eps0)
        if eps0.ndim != 1:
            raise DesignError("eps0 must be one-dimensional")
        shape = eps0.shape
        object.__setattr__(self, "eps0", eps0)
        object.__setattr__(self, "eps1", _arr(self.eps1, shape))
        object.__setattr__(self, "mu1", _arr(self.mu1, shape))
        object.__setattr__(self, "mu0", _arr(self.mu0, shape))
        object.__setattr__(self, "theta", _arr(np.atleast_1d(self.theta) if np.size(self.theta) else []))
        if self.theta.size >= shape[0]:
            raise DesignError(f"MA order {self.theta.size} must be below T={shape[0]}")

    @property
    def T(self) -> int:
        return self.eps0.size

    @property
    def order(self) -> int:
        return self.theta.size

    def effects(self, width: int | None = None) -> np.ndarray:
        """``beta_{t,k}`` for k < ``width`` (default ``q+1``)."""
        T, q = self.T, self.order
        de = self.eps1 - self.eps0
        out = np.zeros((T, max(q + 1, width or 0)))
        out[:, 0] = self.mu1 - self.mu0 + de
        for k in range(1, q + 1):
            out[k:, k] = self.theta[k - 1] * de[:T - k]
        return out


def impulse_responses(phi, H: int) -> np.ndarray:
    """``Psi_0..Psi_H`` with ``Psi_0 = 1`` and ``Psi_j = sum_k phi_k Psi_{j-k}``."""
    if H < 0:
        raise DesignError("horizon must be nonnegative")
    phi = np.atleast_1d(np.asarray(phi, dtype=float)) if np.size(phi) else np.zeros(0)
    psi = np.zeros(H + 1)
    psi[0] = 1.0
    for j in range(1, H + 1):
        m = min(phi.size, j)
        psi[j] = np.dot(phi[:m], psi[j - 1::-1][:m])
    return psi


def _check_path(model, path) -> np.ndarray:
    z = np.asarray(path, dtype=float)
    if z.shape[-1:] != (model.T,):
        raise DesignError(f"path length {z.shape[-1] if z.ndim else 0} differs from model horizon {model.T}")
    return z


def simulate(model, path) -> np.ndarray:
    """Observed outcomes for one path ``(T,)`` or a stack of paths ``(R, T)``."""
    z = _check_path(model, path)
    T = model.T
    if isinstance(model, LinearPOModel):
        y = np.broadcast_to(model.eps, z.shape).copy()
        for k in range(min(model.beta.shape[1], T)):
            y[..., k:] += model.beta[k:, k] * z[..., :T - k]
        if model.interaction is not None:
            for k in range(1, min(model.interaction.shape[1], T)):
                y[..., k:] += model.interaction[k:, k] * z[..., :T - k] * z[..., 1:T - k + 1]
        return y
    if isinstance(model, ARPOModel):
        drive = model.mu0 + z * (model.mu1 - model.mu0) + model.eps
        # direct-form IIR filter with zero initial state is the AR recursion
        return scipy.signal.lfilter([1.0], np.concatenate([[1.0], -model.phi]), drive, axis=-1)
    if isinstance(model, MAPOModel):
        e = model.eps0 + z * (model.eps1 - model.eps0)
        y = model.mu0 + z * (model.mu1 - model.mu0) + e
        for k in range(1, model.order + 1):
            y[..., k:] += model.theta[k - 1] * e[..., :T - k]
        return y
    raise DesignError(f"unsupported model type {type(model).__name__}")


def _lagged(arr: np.ndarray, K: int, k: int) -> np.ndarray:
    T = arr.shape[-1]
    return arr[..., K - k:T - k]


def true_tau(model, design: AssignmentDesign, K: int, per_time: bool = False):
    """Lagged effects ``tau_0..tau_K`` averaged over t = K+1..T.

    With ``per_time=True`` also returns the (T-K, K+1) array of
    ``tau_{t,k}``. For the interaction-augmented linear model the main effects
    pick up ``E[Z]`` of the neighbouring lag, so the design matters.
    """
    T = model.T
    if design.T != T:
        raise DesignError(f"design has T={design.T}, model has T={T}")
    if not 0 <= K < T:
        raise DesignError(f"need 0 <= K < T, got K={K}")
    beta = model.effects(K + 1)
    width = beta.shape[1]
    tau_t = np.zeros((T - K, K + 1))
    rows = slice(K, T)
    for k in range(min(K + 1, width)):
        tau_t[:, k] = beta[rows, k]
    if isinstance(model, LinearPOModel) and model.interaction is not None:
        g = model.interaction
        m = design.means
        for k in range(K + 1):
            # pair (k-1, k): partner lag k-1 sits at time t-k+1
            if 1 <= k < g.shape[1]:
                tau_t[:, k] += g[rows, k] * _lagged(m, K, k - 1)
            # pair (k, k+1): partner lag k+1 sits at time t-k-1
            if k + 1 < g.shape[1]:
                partner = np.zeros(T - K)
                valid = np.arange(K + 1, T + 1) - k - 1 >= 1
                idx = np.arange(K + 1, T + 1) - k - 2
                partner[valid] = m[idx[valid]]
                tau_t[:, k] += g[rows, k + 1] * partner
    tau = tau_t.mean(axis=0)
    return (tau, tau_t) if per_time else tau


def true_interaction_tau(model: LinearPOModel, K: int) -> np.ndarray:
    """Interaction estimands ``tau_{k-1,k}`` for k = 1..K."""
    if not isinstance(model, LinearPOModel):
        raise DesignError("interaction effects are defined for the linear model")
    out = np.zeros(K)
    if model.interaction is None:
        return out
    g = model.interaction
    for k in range(1, min(K + 1, g.shape[1])):
        out[k - 1] = g[K:, k].mean()
    return out


def brute_force_tau(model, design: AssignmentDesign, t: int, k: int) -> float:
    """``tau_{t,k}`` by enumerating all assignments of the other coordinates.

    Coordinates after ``t`` are irrelevant (no anticipation) and held at zero.
    """
    if design.kind != "binary":
        raise DesignError("enumeration oracle needs a binary design")
    if not 1 <= t <= model.T:
        raise DesignError(f"t must lie in [1, {model.T}]")
    if not 0 <= k < t:
        raise DesignError(f"lag k={k} must satisfy 0 <= k < t={t}")
    if t > ENUMERATION_CAP:
        raise DesignError(f"t={t} exceeds the enumeration cap {ENUMERATION_CAP}")
    p = design.p
    target = t - 1 - k
    others = [s for s in range(t) if s != target]
    combos = np.array(list(itertools.product((0.0, 1.0), repeat=len(others)))).reshape(2 ** len(others), len(others))
    weight = np.ones(combos.shape[0])
    for j, s in enumerate(others):
        weight *= np.where(combos[:, j] == 1.0, p[s], 1 - p[s])
    paths = np.zeros((combos.shape[0], model.T))
    paths[:, others] = combos
    paths[:, target] = 1.0
    y1 = simulate(model, paths)[:, t - 1]
    paths[:, target] = 0.0
    y0 = simulate(model, paths)[:, t - 1]
    return float(np.dot(weight, y1 - y0))
