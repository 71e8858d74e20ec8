"""1+1d Vlasov-Poisson in a weighted velocity space.

The low-rank factors approximate ``g = f / f0v`` on a periodic grid
``[0, 20 pi) x [-9, 9)``; velocity products carry the weights
``w_k = dv * f0v(v_k)`` so that ``1`` and ``v`` are admissible basis
functions. The conserved basis ``U`` is the weighted orthonormalization of
``[1, v]`` (mass and momentum).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import inner, ortho_columns
from .lowrank import LowRankState
from .model import KineticModel


def weight_f0v(v, M=1e-4, v0=8.0, v1=9.0):
    """Velocity weight: 1 on ``[-v0, v0]``, Gaussian-like decay to ``M`` at ``|v| = v1``."""
    v = np.asarray(v, dtype=float)
    out = np.ones_like(v)
    hi = v > v0
    lo = v < -v0
    out[hi] = np.exp(np.log(M) * ((v[hi] - v0) / (v1 - v0)) ** 2)
    out[lo] = np.exp(np.log(M) * ((v[lo] + v0) / (v1 - v0)) ** 2)
    return out


def periodic_central_difference(n, h):
    e = np.ones(n - 1)
    D = sp.diags([-e, e], [-1, 1], shape=(n, n), format="lil")
    D[0, n - 1] = -1.0
    D[n - 1, 0] = 1.0
    return D.tocsr() / (2 * h)


@dataclass(frozen=True)
class FieldContext:
    """Electric field used by one evaluation; ``E is None`` for per-stage recomputation."""

    E: np.ndarray | None
    policy: str = "frozen"


PER_STAGE = FieldContext(None, "per_stage")


class VlasovModel(KineticModel):
    per_stage = PER_STAGE
    invariant_names = ("mass", "momentum")

    def __init__(
        self,
        n_x,
        n_v,
        x_domain=(0.0, 20 * np.pi),
        v_domain=(-9.0, 9.0),
        M=1e-4,
        v0=8.0,
        v1=9.0,
        enforce_c2=True,
    ):
        self.n_x, self.n_v = n_x, n_v
        self.dx = (x_domain[1] - x_domain[0]) / n_x
        self.dv = (v_domain[1] - v_domain[0]) / n_v
        self.x = x_domain[0] + self.dx * np.arange(n_x)
        self.v = v_domain[0] + self.dv * np.arange(n_v)
        self.f0v = weight_f0v(self.v, M, v0, v1)
        self.velocity_weights = self.dv * self.f0v
        self.cell_volume = self.dx
        self.Dx = periodic_central_difference(n_x, self.dx)
        self.Dv = periodic_central_difference(n_v, self.dv)
        self.enforce_c2 = enforce_c2
        U, _ = ortho_columns(np.column_stack([np.ones(n_v), self.v]), self.velocity_weights)
        self.conserved_basis = U
        q = np.arange(n_x)
        self._symbol = 1j * np.sin(2 * np.pi * q / n_x) / self.dx
        self.poisson_solves = 0

    # -- field ---------------------------------------------------------------

    def poisson_solve(self, rho, count=True):
        """Zero-mean ``E`` with ``D_x E = 1 - rho`` (minus its mean and Nyquist part)."""
        if count:
            self.poisson_solves += 1
        rhs = 1.0 - np.asarray(rho, dtype=float)
        rhs_hat = np.fft.fft(rhs - rhs.mean())
        E_hat = np.zeros_like(rhs_hat)
        ok = np.abs(self._symbol) > 1e-12 / self.dx
        E_hat[ok] = rhs_hat[ok] / self._symbol[ok]
        E = np.fft.ifft(E_hat).real
        return E - E.mean()

    def density(self, X, S, V):
        return X @ (S @ (V.T @ self.velocity_weights))

    def field_context(self, X, S, V):
        return FieldContext(self.poisson_solve(self.density(X, S, V)))

    def _field(self, ctx, X, S, V):
        if ctx is None or ctx.E is None:
            return self.poisson_solve(self.density(X, S, V))
        return ctx.E

    # -- coefficients --------------------------------------------------------

    def _leads_with_U(self, T):
        U = self.conserved_basis
        m = U.shape[1]
        return T.shape[1] >= m and np.max(np.abs(T[:, :m] - U)) <= 1e-12 * np.max(np.abs(U))

    def c1(self, V, T=None):
        """``c1[j, l] = <T_j, v V_l>_w``."""
        T = V if T is None else T
        return inner(T, self.v[:, None] * V, self.velocity_weights)

    def c2(self, V, T=None, enforce=None):
        """``c2[j, l] = dv T_j^T D_v (f0v V_l)``, with the exact zeros imposed.

        When both frames start with the conserved basis, row 0 vanishes and
        row 1 vanishes beyond column 0 (summation by parts and orthogonality).
        """
        T = V if T is None else T
        c2 = self.dv * (T.T @ (self.Dv @ (self.f0v[:, None] * V)))
        enforce = self.enforce_c2 if enforce is None else enforce
        if enforce and self._leads_with_U(T) and self._leads_with_U(V):
            c2[0, :] = 0.0
            c2[1, 1:] = 0.0
        return c2

    def d1(self, X, E):
        return X.T @ (E[:, None] * X)

    def d2(self, X):
        return X.T @ (self.Dx @ X)

    def build_coefficients(self, X, V, ctx):
        return self.c1(V), self.c2(V), self.d1(X, ctx.E), self.d2(X)

    # -- projected right-hand sides -------------------------------------------

    def rhs_K(self, K, V, ctx=None):
        E = self._field(ctx, K, np.eye(K.shape[1]), V)
        return -(self.Dx @ K) @ self.c1(V).T + E[:, None] * (K @ self.c2(V).T)

    def rhs_L(self, L, X, ctx=None):
        E = self._field(ctx, X, L.T, np.eye(L.shape[0]))
        stream = (self.v[:, None] * L) @ (-self.d2(X).T)
        force = (self.Dv @ (self.f0v[:, None] * L)) / self.f0v[:, None]
        return stream + force @ self.d1(X, E)

    def rhs_VX(self, S, X, V, ctx=None, test=None):
        T = V if test is None else test
        E = self._field(ctx, X, S, V)
        K = X @ S
        return -(self.Dx @ K) @ self.c1(V, T).T + E[:, None] * (K @ self.c2(V, T).T)

    def dense_rhs(self, Y, ctx=None):
        if ctx is None or ctx.E is None:
            E = self.poisson_solve(Y @ self.velocity_weights)
        else:
            E = ctx.E
        stream = -(self.Dx @ Y) * self.v[None, :]
        force = (self.Dv @ (self.f0v[:, None] * Y.T)).T / self.f0v[None, :]
        return stream + E[:, None] * force

    # -- diagnostics ------------------------------------------------------------

    def kinetic_moments(self, state):
        """Total mass, momentum and kinetic energy of ``f = f0v X S V^T``."""
        w = self.velocity_weights
        moments = np.column_stack([w, w * self.v, 0.5 * w * self.v**2])
        dens = state.X @ (state.S @ (state.V.T @ moments))
        return tuple(self.dx * dens.sum(axis=0))

    def conserved_quantities(self, state):
        return self.kinetic_moments(state)[:2]

    def electric_field(self, state):
        return self.poisson_solve(self.density(state.X, state.S, state.V), count=False)

    def electric_energy(self, E):
        return 0.5 * self.dx * float(E @ E)


def bump_on_tail_profiles(x, v):
    a = 1.0 + 0.03 * np.cos(0.3 * x)
    b = 0.9 * np.exp(-(v**2) / 2) / np.sqrt(2 * np.pi) + 0.1 * np.exp(
        -2 * (v - 4.5) ** 2
    ) / np.sqrt(np.pi / 2)
    return a, b


def bump_on_tail_init(model, rank, conservative=True):
    """Bump-on-tail initial state of rank ``rank``.

    With ``conservative=True`` the conserved basis occupies the first two
    velocity columns, otherwise the velocity frame starts from the profile.
    """
    a, b = bump_on_tail_profiles(model.x, model.v)
    g = b / model.f0v
    w = model.velocity_weights
    U = model.conserved_basis
    lead = [U[:, 0], U[:, 1], g] if conservative else [g]
    if rank < len(lead) or rank > min(model.n_x, model.n_v):
        raise ValueError(f"rank {rank} incompatible with the grid or conserved basis")
    Vb = np.zeros((model.n_v, rank))
    Vb[:, : len(lead)] = np.column_stack(lead)
    V, _ = ortho_columns(Vb, w)
    if conservative:
        V[:, :2] = U
    Xb = np.zeros((model.n_x, rank))
    Xb[:, 0] = a
    X, _ = ortho_columns(Xb)
    S = np.outer(X.T @ a, inner(V, g[:, None], w)[:, 0])
    return LowRankState(X, S, V)
