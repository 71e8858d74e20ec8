"""Basis-update & Galerkin (BUG) integrators and their conservative variants.

Every step maps a :class:`LowRankState` to a new one. Step functions accept
an optional ``record`` dict which, when given, is filled with internal
frames and stage arguments so tests can rebuild each stage densely.
"""

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import NonFiniteError, extend_frame, inner
from .lowrank import TruncationPolicy, augment_frames, conservative_truncate, svd_truncate
from .timestep import rk_step, tableau

VARIANTS = ("aug_bug", "midpoint_bug", "parallel_bug", "parallel2_cons")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator variant, substep tableaus and truncation rule.

    ``stage_field`` selects the field used in the final S-step of Vlasov
    runs: ``"per_stage"`` recomputes it at every stage, ``"frozen"`` reuses
    the field the basis update was computed with.
    """

    variant: str = "aug_bug"
    kl_tableau: str = "euler"
    s_tableau: str = "euler"
    conservative: bool = True
    policy: TruncationPolicy = field(default_factory=lambda: TruncationPolicy(0.05))
    stage_field: str = "per_stage"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        tableau(self.kl_tableau)
        tableau(self.s_tableau)
        if self.stage_field not in ("per_stage", "frozen"):
            raise ValueError(f"unknown stage_field {self.stage_field!r}")

    @property
    def extra_augmentation(self):
        """Whether the S-step needs the conservative spatial augmentation."""
        if not self.conservative:
            return False
        if self.variant == "aug_bug":
            return not (self.kl_tableau == "euler" and self.s_tableau == "euler")
        if self.variant == "midpoint_bug":
            return self.s_tableau != "midpoint"
        return False


# Named integrator configurations; the last one is the non-conservative baseline.
PRESETS = {
    "cons_bug_euler": IntegratorConfig("aug_bug", "euler", "euler", True),
    "cons_parallel_euler": IntegratorConfig("parallel_bug", "euler", "euler", True),
    "cons_parallel2_rk4": IntegratorConfig("parallel2_cons", "rk4", "rk4", True),
    "cons_midp_bug_euler": IntegratorConfig("midpoint_bug", "euler", "midpoint", True),
    "cons_midp_bug_heun": IntegratorConfig("midpoint_bug", "heun", "rk4", True),
    "cons_midp_bug_rk4": IntegratorConfig("midpoint_bug", "rk4", "rk4", True),
    "noncons_bug": IntegratorConfig("aug_bug", "euler", "euler", False),
}


def preset(name, **overrides):
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {tuple(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


# -- building blocks -----------------------------------------------------------


def _extend(Q, B, weights=None):
    mode = "complete" if Q.shape[1] + B.shape[1] <= Q.shape[0] else "drop"
    return extend_frame(Q, B, weights, deficient=mode)


def truncate(model, Xhat, Shat, Vhat, config):
    """Apply the configured truncation (conservative or plain SVD)."""
    if config.conservative:
        pol = replace(config.policy, mode="conservative", conserved_count=model.conserved_count)
        return conservative_truncate(Xhat, Shat, Vhat, pol, model.conserved_basis)
    pol = replace(config.policy, mode="plain_svd", conserved_count=0)
    return svd_truncate(Xhat, Shat, Vhat, pol)


def _kl_steps(model, X0, S0, V0, dt, tab, ctx):
    K1, _ = rk_step(lambda K: model.rhs_K(K, V0, ctx), X0 @ S0, dt, tab)
    L1, _ = rk_step(lambda L: model.rhs_L(L, X0, ctx), V0 @ S0.T, dt, tab)
    return K1, L1


def conservative_s_step(model, Xhat, Vhat, Shat0, dt, tab, ctx=None, record=None):
    """Galerkin step with the spatial augmentation that restores local conservation.

    Runs the S-step, collects the per-stage projections ``F_X = F W Vhat``,
    extends ``Xhat`` by the direction ``sum_i b_i F_X^(i) (Vhat^T W U)`` and
    returns ``(Xbar, Sbar1)`` with ``Sbar1`` of shape ``(r_x + m', r_v)``.

    ``Vhat`` must contain the conserved basis ``U`` in its span (leading
    columns after augmentation with the old frame first).
    """
    tab = tableau(tab)
    U = model.conserved_basis
    w = model.velocity_weights
    VtWU = inner(Vhat, U, w)
    if np.max(np.abs(Vhat @ VtWU - U)) > 1e-10 * max(1.0, np.max(np.abs(U))):
        raise ValueError("velocity frame does not contain the conserved basis")
    ctx = model.per_stage if ctx is None else ctx
    FX, args = [], []

    def rhs(S):
        F = model.rhs_VX(S, Xhat, Vhat, ctx)
        FX.append(F)
        args.append(S)
        return Xhat.T @ F

    S1, _ = rk_step(rhs, Shat0, dt, tab)
    FX_b = sum(bi * F for bi, F in zip(tab.b, FX))
    Xstar = _extend(Xhat, FX_b @ VtWU)
    Xbar = np.hstack([Xhat, Xstar])
    Sbar1 = np.vstack([S1, dt * (Xstar.T @ FX_b)])
    if record is not None:
        record.update(Xhat=Xhat, Vhat=Vhat, Shat0=Shat0, Xbar=Xbar, Sbar1=Sbar1, S_stages=args)
    return Xbar, Sbar1


def _galerkin(model, Xhat, Vhat, Shat0, dt, config, ctx, record):
    if config.extra_augmentation:
        Xbar, Sbar1 = conservative_s_step(
            model, Xhat, Vhat, Shat0, dt, config.s_tableau, ctx, record
        )
        return truncate(model, Xbar, Sbar1, Vhat, config)
    args = []

    def rhs(S):
        args.append(S)
        return model.rhs_S(S, Xhat, Vhat, ctx)

    Shat1, _ = rk_step(rhs, Shat0, dt, config.s_tableau)
    if record is not None:
        record.update(Xhat=Xhat, Vhat=Vhat, Shat0=Shat0, Shat1=Shat1, S_stages=args)
    return truncate(model, Xhat, Shat1, Vhat, config)


def _s_context(model, config, frozen):
    return frozen if config.stage_field == "frozen" else model.per_stage


# -- integrators ----------------------------------------------------------------


def aug_bug_step(model, state, dt, config, record=None):
    """Rank-adaptive augmented BUG step.

    K- and L-steps run with the field of the current state, the bases are
    augmented with the old ones first, and the Galerkin step starts from
    the exact representation ``M S0 N^T`` of the current state.
    """
    X0, S0, V0 = state.X, state.S, state.V
    w = model.velocity_weights
    ctx = model.field_context(X0, S0, V0)
    K1, L1 = _kl_steps(model, X0, S0, V0, dt, config.kl_tableau, ctx)
    Xhat, M = augment_frames(X0, K1)
    Vhat, N = augment_frames(V0, L1, w)
    Shat0 = M @ S0 @ N.T
    return _galerkin(model, Xhat, Vhat, Shat0, dt, config, _s_context(model, config, ctx), record)


def midpoint_bug_step(model, state, dt, config, record=None):
    """Second-order midpoint BUG step.

    A first-order augmented BUG half step (no truncation) predicts
    ``Y_half``; the bases are then built from the old bases, the K/L updates
    driven by the midpoint field and the projections of ``F(Y_half)``. With
    the ``midpoint`` S-tableau the Galerkin step uses ``F(Y_half)`` directly,
    which is conservative without further augmentation.
    """
    X0, S0, V0 = state.X, state.S, state.V
    w = model.velocity_weights
    ctx_n = model.field_context(X0, S0, V0)
    h = 0.5 * dt
    Kh = X0 @ S0
    Kh = Kh + h * model.rhs_K(Kh, V0, ctx_n)
    Lh = V0 @ S0.T
    Lh = Lh + h * model.rhs_L(Lh, X0, ctx_n)
    Xh, Mh = augment_frames(X0, Kh)
    Vh, Nh = augment_frames(V0, Lh, w)
    Sh = Mh @ S0 @ Nh.T
    Sh = Sh + h * model.rhs_S(Sh, Xh, Vh, ctx_n)

    ctx_h = model.field_context(Xh, Sh, Vh)
    K1, L1 = _kl_steps(model, X0, S0, V0, dt, config.kl_tableau, ctx_h)
    FX_h = model.rhs_VX(Sh, Xh, Vh, ctx_h)
    FL_h = model.rhs_L(Vh @ Sh.T, Xh, ctx_h)
    Xhat, M = augment_frames(X0, np.hstack([K1, FX_h]))
    Vhat, N = augment_frames(V0, np.hstack([L1, FL_h]), w)
    Shat0 = M @ S0 @ N.T
    if record is not None:
        record.update(Xh=Xh, Sh=Sh, Vh=Vh)

    if config.s_tableau == "midpoint":
        Shat1 = Shat0 + dt * (Xhat.T @ model.rhs_VX(Sh, Xh, Vh, ctx_h, test=Vhat))
        if record is not None:
            record.update(Xhat=Xhat, Vhat=Vhat, Shat0=Shat0, Shat1=Shat1)
        return truncate(model, Xhat, Shat1, Vhat, config)
    return _galerkin(model, Xhat, Vhat, Shat0, dt, config, _s_context(model, config, ctx_h), record)


def parallel_bug_step(model, state, dt, config, record=None):
    """First-order parallel BUG: K, L and S updates from the same data.

    The coefficient matrix on ``[X0, X~] x [V0, V~]`` is
    ``[[S1, L1^T W V~], [X~^T K1, 0]]``.
    """
    X0, S0, V0 = state.X, state.S, state.V
    w = model.velocity_weights
    ctx = model.field_context(X0, S0, V0)
    K1, L1 = _kl_steps(model, X0, S0, V0, dt, config.kl_tableau, ctx)
    S1, _ = rk_step(lambda S: model.rhs_S(S, X0, V0, ctx), S0, dt, config.s_tableau)
    Xt = _extend(X0, K1)
    Vt = _extend(V0, L1, w)
    Shat = np.block(
        [[S1, inner(L1, Vt, w)], [Xt.T @ K1, np.zeros((Xt.shape[1], Vt.shape[1]))]]
    )
    Xhat, Vhat = np.hstack([X0, Xt]), np.hstack([V0, Vt])
    if record is not None:
        record.update(Xhat=Xhat, Vhat=Vhat, Shat1=Shat)
    return truncate(model, Xhat, Shat, Vhat, config)


def parallel2_cons_step(model, state, dt, config, record=None):
    """Second-order parallel BUG in which the K-update replaces the S-step.

    1. ``X^0 = [X0, F(Y0) W V0]``, ``V^0 = [V0, F(Y0)^T X0]`` (orthonormalized).
    2. K-step on ``V^0`` with fields recomputed per stage; L-step on ``X^0``
       with the field of a half-step predictor.
    3. Coefficients ``[[X^0^T K1, L1^T W V~], [X~^T K1, 0]]``.
    4. Truncation.

    Every moment then follows the RK discretization of its conservation law
    with stages ``K_i V^0^T``.
    """
    X0, S0, V0 = state.X, state.S, state.V
    w = model.velocity_weights
    ctx_n = model.field_context(X0, S0, V0)
    K0 = X0 @ S0
    L0 = V0 @ S0.T
    Xh0, _ = augment_frames(X0, model.rhs_K(K0, V0, ctx_n))
    Vh0, _ = augment_frames(V0, model.rhs_L(L0, X0, ctx_n), w)

    Kstart = K0 @ inner(V0, Vh0, w)
    Lstart = L0 @ (X0.T @ Xh0)
    Kpred = Kstart + 0.5 * dt * model.rhs_K(Kstart, Vh0, ctx_n)
    ctx_h = model.field_context(Kpred, np.eye(Vh0.shape[1]), Vh0)

    k_args = []

    def rhs_k(K):
        k_args.append(K)
        return model.rhs_K(K, Vh0, model.per_stage)

    K1, _ = rk_step(rhs_k, Kstart, dt, config.kl_tableau)
    L1, _ = rk_step(lambda L: model.rhs_L(L, Xh0, ctx_h), Lstart, dt, config.kl_tableau)

    Xt = _extend(Xh0, K1)
    Vt = _extend(Vh0, L1, w)
    Shat = np.block(
        [
            [Xh0.T @ K1, inner(L1, Vt, w)],
            [Xt.T @ K1, np.zeros((Xt.shape[1], Vt.shape[1]))],
        ]
    )
    Xhat, Vhat = np.hstack([Xh0, Xt]), np.hstack([Vh0, Vt])
    if record is not None:
        record.update(
            Xh0=Xh0, Vh0=Vh0, K_stages=k_args, K1=K1, L1=L1, Xhat=Xhat, Vhat=Vhat, Shat1=Shat
        )
    return truncate(model, Xhat, Shat, Vhat, config)


STEPPERS = {
    "aug_bug": aug_bug_step,
    "midpoint_bug": midpoint_bug_step,
    "parallel_bug": parallel_bug_step,
    "parallel2_cons": parallel2_cons_step,
}


def step(model, state, dt, config, record=None):
    return STEPPERS[config.variant](model, state, dt, config, record)


# -- driver -----------------------------------------------------------------------


class SimulationDiverged(RuntimeError):
    def __init__(self, step_index):
        super().__init__(f"non-finite state after step {step_index}")
        self.step = step_index


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    time: float
    rank: int
    invariants: tuple
    drift: tuple
    electric_energy: float
    wall_time: float


def diagnose(model, state, step_index, t, reference, wall_time=0.0):
    inv = tuple(float(q) for q in model.conserved_quantities(state))
    ref = inv if reference is None else reference
    drift = tuple(abs(a - b) / abs(b) if b != 0 else abs(a - b) for a, b in zip(inv, ref))
    ee = float("nan")
    if hasattr(model, "electric_field"):
        ee = model.electric_energy(model.electric_field(state))
    return DiagnosticsRecord(step_index, t, state.rank, inv, drift, ee, wall_time)


def run(model, initial_state, dt, n_steps, config, hooks=()):
    """Advance ``n_steps`` steps of size ``dt``.

    Returns ``(final_state, records)`` with one :class:`DiagnosticsRecord`
    for the initial state and one per step. Each hook is called as
    ``hook(record, state)`` after every record. Raises
    :class:`SimulationDiverged` on a non-finite state.
    """
    state = initial_state
    rec0 = diagnose(model, state, 0, 0.0, None)
    reference = rec0.invariants
    records = [rec0]
    for hook in hooks:
        hook(rec0, state)
    start = _time.perf_counter()
    for n in range(1, n_steps + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                state = step(model, state, dt, config)
        except NonFiniteError:
            raise SimulationDiverged(n) from None
        if not state.is_finite():
            raise SimulationDiverged(n)
        rec = diagnose(model, state, n, n * dt, reference, _time.perf_counter() - start)
        records.append(rec)
        for hook in hooks:
            hook(rec, state)
    return state, records


def dense_reference(model, Y0, dt, n_steps, tab="rk4"):
    """Full-rank RK integration of ``dY/dt = F(Y)``; meant for small grids."""
    Y = np.array(Y0, dtype=float)
    for _ in range(n_steps):
        Y, _ = rk_step(lambda Z: model.dense_rhs(Z, model.per_stage), Y, dt, tab)
    return Y


__all__ = [
    "VARIANTS",
    "PRESETS",
    "IntegratorConfig",
    "preset",
    "truncate",
    "conservative_s_step",
    "aug_bug_step",
    "midpoint_bug_step",
    "parallel_bug_step",
    "parallel2_cons_step",
    "step",
    "run",
    "diagnose",
    "DiagnosticsRecord",
    "SimulationDiverged",
    "dense_reference",
]
