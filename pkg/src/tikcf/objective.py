"""Problem data model, weights, and the loss/stability/MSE metrics.

Weight names follow their role, not a symbol. One field covers each role
even where the same quantity appears under several letters:

===========================  ==============================================
field                        role
===========================  ==============================================
channel_weights              per-channel importance of the data fit
component_weights            per-(channel, component) data weights; also the
                             confidence of each ``w`` source in the u-update
spatial_weight               overall strength of the operator penalties
reg_group_weights            per-group operator weights; also the confidence
                             of each ``v`` source in the u-update
reg_operator_weights         per-(group, operator) weights
temporal_weight              pull toward the prior (``w0`` in the w-update,
                             ``u0`` in the u-update)
temporal_component_weights   per-component temporal weights (sum is used)
relaxation_mu                proximal coupling between ``w`` and ``u``
ridge_nu                     plain ``||w||^2`` ridge
data_side_gamma/beta         u-update weights on ``w`` and ``v`` sources
multiplier_eta               shrink of ``v`` toward ``v0``
penalty_rho_init/max         adaptive penalty start and ceiling
penalty_delta                penalty growth rate per unit coupling gap
coupling_weights             weights on the ``w - u`` gap in the v/penalty updates
zeta                         pull of ``v`` toward ``v0`` in the v-update
===========================  ==============================================
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InputError


def _floats(values) -> tuple:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class WeightConfig:
    channel_weights: tuple = ()
    component_weights: tuple = ()
    spatial_weight: float = 0.6
    reg_group_weights: tuple = ()
    reg_operator_weights: tuple = ()
    temporal_weight: float = 0.0
    temporal_component_weights: tuple = (1.0,)
    relaxation_mu: float = 4.0
    ridge_nu: float = 0.001
    data_side_gamma: float = 1.0
    data_side_beta: float = 1.0
    multiplier_eta: float = 0.2
    penalty_rho_init: float = 0.1
    penalty_rho_max: float = 1.0
    penalty_delta: float = 0.05
    coupling_weights: tuple = (1.0,)
    zeta: float = 0.0

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "channel_weights", _floats(self.channel_weights))
        set_(self, "component_weights", tuple(_floats(c) for c in self.component_weights))
        set_(self, "reg_group_weights", _floats(self.reg_group_weights))
        set_(self, "reg_operator_weights", tuple(_floats(c) for c in self.reg_operator_weights))
        set_(self, "temporal_component_weights", _floats(self.temporal_component_weights))
        set_(self, "coupling_weights", _floats(self.coupling_weights))
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                flat = [x for v in val for x in (v if isinstance(v, tuple) else (v,))]
            else:
                val = float(val)
                set_(self, f.name, val)
                flat = [val]
            for x in flat:
                if not math.isfinite(x) or x < 0:
                    raise InputError(f"weight {f.name} must be finite and >= 0, got {x}")
        if self.penalty_rho_init > self.penalty_rho_max:
            raise InputError("penalty_rho_init must not exceed penalty_rho_max")

    @classmethod
    def consistent(cls, **overrides) -> "WeightConfig":
        """Weights under which both optimizers target the auxiliary objective.

        Unit coupling on both u-update sources, no pull toward priors, no
        ridge, no multiplier shrink and unit spatial weight.
        """
        base = dict(spatial_weight=1.0, temporal_weight=0.0, ridge_nu=0.0,
                    data_side_gamma=1.0, data_side_beta=1.0, multiplier_eta=0.0, zeta=0.0)
        base.update(overrides)
        return cls(**base)

    def with_(self, **changes) -> "WeightConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    # effective weights; empty lists mean "all ones"
    def data_weight(self, channel: int, component: int = 0) -> float:
        alpha = self.channel_weights[channel] if channel < len(self.channel_weights) else 1.0
        if channel < len(self.component_weights) and component < len(self.component_weights[channel]):
            theta = self.component_weights[channel][component]
        else:
            theta = 1.0
        return alpha * theta

    def reg_weight(self, group: int, member: int = 0) -> float:
        beta = self.reg_group_weights[group] if group < len(self.reg_group_weights) else 1.0
        if group < len(self.reg_operator_weights) and member < len(self.reg_operator_weights[group]):
            phi = self.reg_operator_weights[group][member]
        else:
            phi = 1.0
        return beta * phi

    @property
    def psi_sum(self) -> float:
        return float(sum(self.temporal_component_weights))

    @property
    def tau_sum(self) -> float:
        return float(sum(self.coupling_weights))


@dataclass(frozen=True)
class DataTerm:
    A: np.ndarray
    b: np.ndarray
    channel: int = 0
    component: int = 0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"data term A has {A.shape[0]} rows but b has {b.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class RegTerm:
    L: np.ndarray
    group: int = 0
    member: int = 0

    def __post_init__(self):
        object.__setattr__(self, "L", np.atleast_2d(np.asarray(self.L, dtype=float)))


@dataclass(frozen=True)
class ProblemInstance:
    """Multi-term regularized least-squares problem with three priors.

    ``w0``, ``u0`` and ``v0`` default to zero vectors of length ``n``.
    """

    n: int
    data_terms: tuple
    reg_terms: tuple = ()
    w0: Optional[np.ndarray] = None
    u0: Optional[np.ndarray] = None
    v0: Optional[np.ndarray] = None
    weights: WeightConfig = field(default_factory=WeightConfig)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "data_terms", tuple(self.data_terms))
        set_(self, "reg_terms", tuple(self.reg_terms))
        if not self.data_terms:
            raise InputError("a problem needs at least one data term")
        for t in self.data_terms:
            if t.A.shape[1] != self.n:
                raise DimensionMismatch(f"data term has {t.A.shape[1]} columns, expected {self.n}")
        for r in self.reg_terms:
            if r.L.shape[1] != self.n:
                raise DimensionMismatch(f"reg term has {r.L.shape[1]} columns, expected {self.n}")
        for name in ("w0", "u0", "v0"):
            vec = getattr(self, name)
            vec = np.zeros(self.n) if vec is None else np.asarray(vec, dtype=float)
            if vec.shape != (self.n,):
                raise DimensionMismatch(f"{name} has shape {vec.shape}, expected ({self.n},)")
            set_(self, name, vec)

    def data_weight(self, t: DataTerm) -> float:
        return self.weights.data_weight(t.channel, t.component)

    def reg_weight(self, r: RegTerm) -> float:
        return self.weights.reg_weight(r.group, r.member)


@dataclass
class SolverState:
    w: np.ndarray
    u: np.ndarray
    v: np.ndarray
    rho: float
    k: int = 0
    loss_history: list = field(default_factory=list)

    def copy(self) -> "SolverState":
        return SolverState(self.w.copy(), self.u.copy(), self.v.copy(),
                           np.copy(self.rho) if np.ndim(self.rho) else self.rho,
                           self.k, list(self.loss_history))


def _check_state(p: ProblemInstance, w, u, v):
    for name, vec in (("w", w), ("u", u), ("v", v)):
        if np.shape(vec) != (p.n,):
            raise DimensionMismatch(f"{name} has shape {np.shape(vec)}, expected ({p.n},)")


def _sq(x) -> float:
    return float(np.vdot(x, x).real)


def _loss_terms(p: ProblemInstance, w, u, v) -> float:
    _check_state(p, w, u, v)
    total = 0.0
    for t in p.data_terms:
        total += p.data_weight(t) * _sq(t.A @ w - t.b)
    dw = w - p.w0
    for r in p.reg_terms:
        total += p.reg_weight(r) * _sq(r.L @ dw)
    total += _sq(w - u) + _sq(u - v)
    total += p.weights.zeta * p.weights.psi_sum * _sq(v - p.v0)
    return total


def evaluate_loss(p: ProblemInstance, st: SolverState) -> float:
    """Per-iteration loss: data misfit, operator penalties, both coupling
    gaps and the ``zeta``-weighted pull of ``v`` toward ``v0``."""
    return _loss_terms(p, st.w, st.u, st.v)


def auxiliary_objective(p: ProblemInstance, w, u, v) -> float:
    """Joint objective over ``(w, u, v)`` minimized by the auxiliary optimizer.

    Equals :func:`evaluate_loss` plus ``temporal_weight * sum(psi) * ||w - w0||^2``.
    """
    wc = p.weights
    return _loss_terms(p, w, u, v) + wc.temporal_weight * wc.psi_sum * _sq(np.asarray(w) - p.w0)


def delta_v_metric(v_next, v_prev, v0, w: WeightConfig) -> np.ndarray:
    v_next, v_prev, v0 = (np.asarray(x) for x in (v_next, v_prev, v0))
    if not v_next.shape == v_prev.shape == v0.shape:
        raise DimensionMismatch(f"shapes {v_next.shape}, {v_prev.shape}, {v0.shape} differ")
    return v_next - v_prev + w.multiplier_eta * w.psi_sum * (v0 - v_prev)


def weighted_mse(estimates, x_true, gammas: Optional[Sequence[float]] = None) -> float:
    """Weighted mean squared error of a batch of estimates.

    ``estimates`` is one vector or an ``(N, n)`` batch; ``gammas`` holds one
    nonnegative weight per estimate (all ones by default).
    """
    x_true = np.asarray(x_true, dtype=float)
    X = np.asarray(estimates, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1:] != x_true.shape:
        raise DimensionMismatch(f"estimates {X.shape} do not match x_true {x_true.shape}")
    g = np.ones(X.shape[0]) if gammas is None else np.asarray(gammas, dtype=float)
    if g.shape != (X.shape[0],):
        raise DimensionMismatch(f"{g.size} gammas for {X.shape[0]} estimates")
    if np.any(g < 0):
        raise InputError("gammas must be nonnegative")
    return float(np.sum(g * np.sum((X - x_true) ** 2, axis=1)) / X.shape[0])


def stack_operators(p: ProblemInstance):
    """Collapse the weighted term lists into one ``(A, b, L)`` triple.

    Minimizing ``||A x - b||^2 + ||L (x - w0)||^2`` over the result equals
    minimizing the weighted data fit plus ``spatial_weight``-scaled operator
    penalties plus the temporal pull toward ``w0`` (an identity block).
    """
    wc = p.weights
    rows_A, rows_b = [], []
    for t in p.data_terms:
        sw = math.sqrt(p.data_weight(t))
        rows_A.append(sw * t.A)
        rows_b.append(sw * t.b)
    rows_L = [math.sqrt(wc.spatial_weight * p.reg_weight(r)) * r.L for r in p.reg_terms]
    temporal = wc.temporal_weight * wc.psi_sum
    if temporal > 0:
        rows_L.append(math.sqrt(temporal) * np.eye(p.n))
    L = np.vstack(rows_L) if rows_L else np.zeros((0, p.n))
    return np.vstack(rows_A), np.concatenate(rows_b), L


def random_problem(n: int, channels: int, seed: int, weights: Optional[WeightConfig] = None,
                   extra_rows: int = 2) -> ProblemInstance:
    """Seeded well-posed instance: one Gaussian data term per channel, a
    first-difference operator plus a small random operator, and a shared
    random prior used for ``w0``, ``u0`` and ``v0``."""
    if n < 2 or channels < 1:
        raise InputError(f"need n >= 2 and channels >= 1, got n={n}, channels={channels}")
    rng = np.random.default_rng(seed)
    data = [DataTerm(rng.standard_normal((n + extra_rows, n)), rng.standard_normal(n + extra_rows), channel=c)
            for c in range(channels)]
    regs = [RegTerm(np.diff(np.eye(n), axis=0), group=0),
            RegTerm(0.3 * rng.standard_normal((n, n)), group=1)]
    prior = rng.standard_normal(n)
    return ProblemInstance(n, data, regs, w0=prior, u0=prior, v0=prior,
                           weights=weights if weights is not None else WeightConfig.consistent())
