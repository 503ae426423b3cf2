"""Assignment designs, treatment normalization, and regressor weights.

A switchback design assigns a treatment independently at each of ``T`` time
points. For a binary design the treatment at time ``t`` is Bernoulli(p_t); for
a continuous design the analyst declares the mean and variance of each draw
and, optionally, a sampler used to redraw paths.

Random streams
--------------
Every draw goes through :func:`make_rng`, which builds a
``numpy.random.Generator`` on a ``PCG64`` bit generator seeded by
``SeedSequence(root_seed, spawn_key=key)``. A path consumes exactly one
``Generator.random(T)`` call, i.e. one uniform double per time point in time
order, which is then mapped through the inverse CDF of the sampler in force at
that time. Randomization-test resample ``i`` uses the key ``(i,)``; the Monte
Carlo harness uses ``(purpose, T, i)``. Results therefore replay bit-for-bit
for a given numpy version and do not depend on how replications are
scheduled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import ndtri

from switchback.exceptions import DesignError

DEFAULT_OVERLAP = 0.01
DEFAULT_VARIANCE_FLOOR = 1e-6
EXPOSURE_WIDTH_CAP = 20

__all__ = [
    "AssignmentDesign",
    "ExposureSpec",
    "Sampler",
    "draw_assignment",
    "draw_assignments",
    "exposure_moments",
    "exposure_transform",
    "generalized_weights",
    "interaction_weights",
    "lag_weights",
    "make_rng",
    "normalize",
    "validate_path",
]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream ``key`` under ``seed`` (see module docstring)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Sampler:
    """Per-time distribution of a continuous treatment.

    ``kind`` is one of ``"uniform"`` (params ``low, high``), ``"normal"``
    (params ``mean, variance``) or ``"two_point"`` (params ``a, b, prob``,
    where ``prob`` is the probability of drawing ``b``).
    """

    kind: Literal["uniform", "normal", "two_point"]
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        n = {"uniform": 2, "normal": 2, "two_point": 3}.get(self.kind)
        if n is None:
            raise DesignError(f"unknown sampler kind {self.kind!r}")
        if len(self.params) != n:
            raise DesignError(f"{self.kind} sampler takes {n} parameters, got {len(self.params)}")
        if self.kind == "uniform" and not self.params[0] < self.params[1]:
            raise DesignError("uniform sampler needs low < high")
        if self.kind == "normal" and self.params[1] <= 0:
            raise DesignError("normal sampler needs a positive variance")
        if self.kind == "two_point" and not 0 < self.params[2] < 1:
            raise DesignError("two_point sampler needs 0 < prob < 1")

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        if self.kind == "normal":
            return self.params[0]
        a, b, q = self.params
        return (1 - q) * a + q * b

    @property
    def variance(self) -> float:
        if self.kind == "uniform":
            return (self.params[1] - self.params[0]) ** 2 / 12.0
        if self.kind == "normal":
            return self.params[1]
        a, b, q = self.params
        return q * (1 - q) * (b - a) ** 2

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in [0, 1) to draws by inverse CDF."""
        if self.kind == "uniform":
            lo, hi = self.params
            return lo + (hi - lo) * u
        if self.kind == "normal":
            m, var = self.params
            # ndtri(0) is -inf; 2**-54 is below the generator's resolution
            return m + np.sqrt(var) * ndtri(np.maximum(u, 2.0**-54))
        a, b, q = self.params
        return np.where(u < q, b, a)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


@dataclass(frozen=True)
class AssignmentDesign:
    """Independent per-time assignment distribution.

    Build with :meth:`binary` or :meth:`continuous` rather than directly.

    Parameters
    ----------
    kind : {"binary", "continuous"}
    means : ndarray
        ``E[Z_t]`` for t = 1..T (``p_t`` for a binary design).
    variances : ndarray
        ``Var[Z_t]``; for binary designs exactly ``p_t (1 - p_t)``.
    samplers : tuple of Sampler, optional
        Continuous designs only; required to redraw paths.
    epsilon : float
        Overlap floor for binary designs.
    variance_floor : float
        Minimum admissible variance for continuous designs.
    """

    kind: Literal["binary", "continuous"]
    means: np.ndarray
    variances: np.ndarray
    samplers: tuple[Sampler, ...] | None = None
    epsilon: float = DEFAULT_OVERLAP
    variance_floor: float = DEFAULT_VARIANCE_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "variances", _frozen(self.variances))
        m, v = self.means, self.variances
        if m.ndim != 1 or m.size < 1:
            raise DesignError("design needs at least one time point")
        if v.shape != m.shape:
            raise DesignError(f"means has length {m.size} but variances has length {v.size}")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise DesignError("design moments must be finite")
        if self.kind == "binary":
            if not 0 < self.epsilon <= 0.5:
                raise DesignError("overlap floor must lie in (0, 0.5]")
            bad = np.flatnonzero((m < self.epsilon) | (m > 1 - self.epsilon))
            if bad.size:
                t = bad[0]
                raise DesignError(
                    f"p_{t + 1} = {m[t]!r} violates the overlap floor "
                    f"[{self.epsilon}, {1 - self.epsilon}]"
                )
            if not np.array_equal(v, m * (1 - m)):
                raise DesignError("binary design variances must equal p(1-p)")
            if self.samplers is not None:
                raise DesignError("binary designs do not take samplers")
        elif self.kind == "continuous":
            if not self.variance_floor > 0:
                raise DesignError("variance floor must be positive")
            bad = np.flatnonzero(v < self.variance_floor)
            if bad.size:
                t = bad[0]
                raise DesignError(
                    f"Var[Z_{t + 1}] = {v[t]!r} is below the floor {self.variance_floor}"
                )
            if self.samplers is not None:
                object.__setattr__(self, "samplers", tuple(self.samplers))
                if len(self.samplers) != m.size:
                    raise DesignError("need one sampler per time point")
                for t, s in enumerate(self.samplers):
                    if not (np.isclose(s.mean, m[t], rtol=1e-9, atol=1e-12)
                            and np.isclose(s.variance, v[t], rtol=1e-9, atol=1e-12)):
                        raise DesignError(
                            f"sampler at t={t + 1} has moments ({s.mean}, {s.variance}) "
                            f"but the design declares ({m[t]}, {v[t]})"
                        )
        else:
            raise DesignError(f"unknown design kind {self.kind!r}")

    @classmethod
    def binary(cls, p, T: int | None = None, epsilon: float = DEFAULT_OVERLAP) -> "AssignmentDesign":
        """Bernoulli design from per-time probabilities or a constant ``p``."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 0:
            if T is None:
                raise DesignError("a constant probability needs T")
            p = np.full(int(T), float(p))
        elif T is not None and p.size != T:
            raise DesignError(f"got {p.size} probabilities for T={T}")
        return cls("binary", p, p * (1 - p), epsilon=epsilon)

    @classmethod
    def continuous(
        cls,
        means=None,
        variances=None,
        samplers: Sequence[Sampler] | Sampler | None = None,
        T: int | None = None,
        variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    ) -> "AssignmentDesign":
        """Continuous design.

        Moments may be given explicitly, or taken from ``samplers``. A single
        sampler with ``T`` is broadcast over all time points.
        """
        if isinstance(samplers, Sampler):
            if T is None:
                raise DesignError("a single sampler needs T")
            samplers = (samplers,) * int(T)
        if means is None or variances is None:
            if samplers is None:
                raise DesignError("continuous design needs declared moments or samplers")
            means = [s.mean for s in samplers] if means is None else means
            variances = [s.variance for s in samplers] if variances is None else variances
        means = np.asarray(means, dtype=float)
        variances = np.asarray(variances, dtype=float)
        if T is not None:
            means = np.broadcast_to(means, (int(T),))
            variances = np.broadcast_to(variances, (int(T),))
        return cls("continuous", means, variances,
                   None if samplers is None else tuple(samplers),
                   variance_floor=variance_floor)

    @property
    def T(self) -> int:
        return self.means.size

    @property
    def p(self) -> np.ndarray:
        if self.kind != "binary":
            raise DesignError("p is only defined for binary designs")
        return self.means

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.means == self.means[0]) and np.all(self.variances == self.variances[0]))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "binary":
            out["p"] = self.means.tolist()
            out["epsilon"] = self.epsilon
        else:
            out["means"] = self.means.tolist()
            out["variances"] = self.variances.tolist()
            if self.samplers is not None:
                out["samplers"] = [s.to_dict() for s in self.samplers]
        return out


def validate_path(path, design: AssignmentDesign) -> np.ndarray:
    """Return ``path`` as a float array after checking it against ``design``."""
    z = np.asarray(path, dtype=float)
    if z.shape[-1:] != (design.T,):
        raise DesignError(f"path has length {z.shape[-1] if z.ndim else 0}, design has T={design.T}")
    if not np.all(np.isfinite(z)):
        raise DesignError("path contains non-finite values")
    if design.kind == "binary":
        bad = np.flatnonzero(((z != 0) & (z != 1)).reshape(-1, design.T).any(axis=0))
        if bad.size:
            raise DesignError(f"binary path has a value outside {{0, 1}} at t={bad[0] + 1}")
    return z


def normalize(path, design: AssignmentDesign) -> np.ndarray:
    """Centered and variance-scaled treatment ``(z_t - m_t) / v_t``.

    Works on a single path of shape ``(T,)`` or a stack ``(R, T)``.
    """
    z = validate_path(path, design)
    return (z - design.means) / design.variances


def _check_lags(design: AssignmentDesign, K: int) -> int:
    K = int(K)
    if K < 0:
        raise DesignError("number of lags must be nonnegative")
    if K >= design.T:
        raise DesignError(f"K={K} leaves no usable observations for T={design.T}")
    return K


def lag_weights(design: AssignmentDesign, K: int) -> np.ndarray:
    """Harmonic means ``w_k`` of ``Var[Z_{t-k}]`` over t = K+1..T, k = 0..K."""
    K = _check_lags(design, K)
    T, inv = design.T, 1.0 / design.variances
    # t = K+1..T means 0-based rows K..T-1; lag k shifts them to K-k..T-1-k
    return np.array([1.0 / inv[K - k:T - k].mean() for k in range(K + 1)])


def interaction_weights(design: AssignmentDesign, K: int) -> np.ndarray:
    """Weights ``w_{k-1,k}`` for consecutive-lag interactions, k = 1..K."""
    K = _check_lags(design, K)
    if K < 1:
        raise DesignError("interaction weights need K >= 1")
    if design.kind != "binary":
        raise DesignError("interaction regressions are defined for binary designs")
    T, v = design.T, design.variances
    out = np.empty(K)
    for k in range(1, K + 1):
        prod = v[K - k:T - k] * v[K - k + 1:T - k + 1]
        out[k - 1] = 1.0 / (1.0 / prod).mean()
    return out


def generalized_weights(design: AssignmentDesign, h, K: int) -> np.ndarray:
    """Weights ``w_{h,k}`` for outcome-time scaling factors ``h_{K+1..T}``.

    The matching regressor rule multiplies the row for outcome time ``t`` by
    ``h_t``; the rescaled coefficients then target ``avg_t h_t tau_{t,k}``.
    """
    K = _check_lags(design, K)
    h = np.asarray(h, dtype=float)
    if h.shape != (design.T - K,):
        raise DesignError(f"h must have length T-K={design.T - K}, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise DesignError("h must be finite")
    if not np.any(h != 0):
        raise DesignError("h is identically zero")
    T, inv = design.T, 1.0 / design.variances
    return np.array([1.0 / (h**2 * inv[K - k:T - k]).mean() for k in range(K + 1)])


@dataclass(frozen=True)
class ExposureSpec:
    """Binary summaries of consecutive lag blocks.

    Block ``s`` covers lags ``k_{s-1}+1 .. k_s`` (block 0 covers ``0 .. k_0``).
    Its truth table has ``2**width`` entries; entry ``sum_i z_i 2**i`` is the
    mapping's value when the i-th lag of the block (counting from the most
    recent) equals ``z_i``.
    """

    boundaries: tuple[int, ...]
    tables: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        b = tuple(int(k) for k in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if not b or b[0] < 0 or any(x >= y for x, y in zip(b, b[1:])):
            raise DesignError("exposure boundaries must satisfy 0 <= k_0 < k_1 < ... < k_S")
        tables = tuple(_frozen(np.asarray(t).ravel()) for t in self.tables)
        object.__setattr__(self, "tables", tables)
        if len(tables) != len(b):
            raise DesignError(f"{len(b)} blocks but {len(tables)} truth tables")
        for s, (w, tab) in enumerate(zip(self.widths, tables)):
            if w > EXPOSURE_WIDTH_CAP:
                raise DesignError(f"block {s} has width {w}, above the enumeration cap {EXPOSURE_WIDTH_CAP}")
            if tab.size != 2**w:
                raise DesignError(f"block {s} of width {w} needs {2**w} table entries, got {tab.size}")
            if not np.all((tab == 0) | (tab == 1)):
                raise DesignError(f"truth table {s} must be 0/1 valued")
            if np.all(tab == tab[0]):
                raise DesignError(f"exposure mapping {s} is constant")

    @property
    def K(self) -> int:
        return self.boundaries[-1]

    @property
    def S(self) -> int:
        return len(self.boundaries) - 1

    @property
    def starts(self) -> tuple[int, ...]:
        return (0,) + tuple(k + 1 for k in self.boundaries[:-1])

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(e - s + 1 for s, e in zip(self.starts, self.boundaries))

    @classmethod
    def identity(cls, K: int) -> "ExposureSpec":
        """One unit-width identity block per lag; reproduces the full regression."""
        return cls(tuple(range(K + 1)), tuple(np.array([0, 1]) for _ in range(K + 1)))

    @classmethod
    def from_function(cls, boundaries: Sequence[int], funcs) -> "ExposureSpec":
        """Tabulate callables ``f(bits) -> {0,1}``; ``bits[i]`` is lag ``start+i``."""
        boundaries = tuple(int(k) for k in boundaries)
        starts = (0,) + tuple(k + 1 for k in boundaries[:-1])
        tables = []
        for f, s, e in zip(funcs, starts, boundaries):
            w = e - s + 1
            if w > EXPOSURE_WIDTH_CAP:
                raise DesignError(f"block width {w} exceeds the enumeration cap {EXPOSURE_WIDTH_CAP}")
            tables.append(np.array([f(bits[::-1]) for bits in itertools.product((0, 1), repeat=w)], float))
        return cls(boundaries, tuple(tables))


def _block_bits(width: int) -> np.ndarray:
    # row j holds the bits of table index j, least significant first
    return (np.arange(2**width)[:, None] >> np.arange(width)) & 1


def exposure_moments(design: AssignmentDesign, spec: ExposureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``E[g_{t,s}]`` and ``Var[g_{t,s}]`` for t = K+1..T by enumeration.

    Returns two arrays of shape ``(T-K, S+1)``.
    """
    if design.kind != "binary":
        raise DesignError("exposure mappings are defined for binary designs")
    K = _check_lags(design, spec.K)
    T, p = design.T, design.p
    means = np.empty((T - K, spec.S + 1))
    for s, (start, w, tab) in enumerate(zip(spec.starts, spec.widths, spec.tables)):
        bits = _block_bits(w)
        # probabilities of block entries: lag start+i at outcome time t
        probs = np.ones((T - K, 2**w))
        for i in range(w):
            pi = p[K - start - i:T - start - i][:, None]
            probs *= np.where(bits[:, i][None, :] == 1, pi, 1 - pi)
        means[:, s] = probs @ tab
    # g is 0/1 valued so Var = E[g](1 - E[g])
    variances = means * (1 - means)
    return means, variances


def _exposure_values(z: np.ndarray, spec: ExposureSpec, T: int) -> np.ndarray:
    K = spec.K
    out = np.empty(z.shape[:-1] + (T - K, spec.S + 1))
    for s, (start, w, tab) in enumerate(zip(spec.starts, spec.widths, spec.tables)):
        idx = np.zeros(z.shape[:-1] + (T - K,), dtype=np.int64)
        for i in range(w):
            idx += z[..., K - start - i:T - start - i].astype(np.int64) << i
        out[..., s] = tab[idx]
    return out


def exposure_transform(path, design: AssignmentDesign, spec: ExposureSpec,
                       variance_floor: float = DEFAULT_VARIANCE_FLOOR):
    """Normalized exposure columns and their harmonic-mean weights.

    Returns
    -------
    gtilde : ndarray, shape (T-K, S+1) (or (R, T-K, S+1) for stacked paths)
        ``(g_{t,s} - E[g_{t,s}]) / Var[g_{t,s}]`` for t = K+1..T.
    weights : ndarray, shape (S+1,)
        ``w_{g,s}``.
    """
    z = validate_path(path, design)
    means, variances = exposure_moments(design, spec)
    low = np.argwhere(variances < variance_floor)
    if low.size:
        i, s = low[0]
        raise DesignError(
            f"Var[g_{{{i + spec.K + 1},{s}}}] = {variances[i, s]!r} is below the floor {variance_floor}"
        )
    g = _exposure_values(z, spec, design.T)
    gtilde = (g - means) / variances
    weights = 1.0 / (1.0 / variances).mean(axis=0)
    return gtilde, weights


def draw_assignments(design: AssignmentDesign, seed: int, indices: Sequence[int] | np.ndarray,
                     *key: int) -> np.ndarray:
    """Stack of paths, row ``j`` drawn from stream ``key + (indices[j],)``."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((indices.size, design.T))
    for j, i in enumerate(indices):
        out[j] = draw_assignment(design, seed, *key, int(i))
    return out


def draw_assignment(design: AssignmentDesign, seed: int, *key: int) -> np.ndarray:
    """One independent assignment path from the stream ``(seed, key)``."""
    u = make_rng(seed, *key).random(design.T)
    if design.kind == "binary":
        return (u < design.p).astype(float)
    if design.samplers is None:
        raise DesignError("continuous design has no samplers to draw from")
    z = np.empty(design.T)
    # group time points by sampler so each distribution is mapped in one call
    groups: dict[Sampler, list[int]] = {}
    for t, s in enumerate(design.samplers):
        groups.setdefault(s, []).append(t)
    for s, ts in groups.items():
        ts = np.asarray(ts)
        z[ts] = s.from_uniform(u[ts])
    return z
