"""Contract shared by all kinetic models.

A model describes the semi-discrete system ``dY/dt = F(Y)`` on an
``n_x x n_v`` phase-space grid and exposes only Galerkin projections of
``F`` evaluated on factorized arguments:

* ``rhs_K(K, V, ctx)``   -> ``F(K V^T) W V``              (n_x x r)
* ``rhs_L(L, X, ctx)``   -> ``F(X L^T)^T X``              (n_v x r)
* ``rhs_VX(S, X, V, ctx, test=V)`` -> ``F(X S V^T) W test`` (n_x x r_test)
* ``rhs_S(S, X, V, ctx)`` -> ``X^T F(X S V^T) W V``       (r x r)

``W = diag(velocity_weights)``; spatial products are unweighted. ``ctx`` is
opaque per-evaluation data (the electric field for Vlasov-Poisson);
``model.per_stage`` is the context value asking the model to rebuild that
data from each argument it is evaluated on.
"""

import numpy as np

from .linalg import inner


class KineticModel:
    n_x: int
    n_v: int
    velocity_weights: np.ndarray
    conserved_basis: np.ndarray
    cell_volume: float

    per_stage = None
    invariant_names = ("mass",)

    @property
    def conserved_count(self):
        return self.conserved_basis.shape[1]

    def field_context(self, X, S, V):
        """Frozen evaluation context built from the state ``X S V^T``."""
        return None

    def rhs_K(self, K, V, ctx=None):
        raise NotImplementedError

    def rhs_L(self, L, X, ctx=None):
        raise NotImplementedError

    def rhs_VX(self, S, X, V, ctx=None, test=None):
        raise NotImplementedError

    def rhs_S(self, S, X, V, ctx=None):
        return X.T @ self.rhs_VX(S, X, V, ctx)

    def dense_rhs(self, Y, ctx=None):
        """Full ``F(Y)``; only for oracles on small grids."""
        raise NotImplementedError

    def conserved_quantities(self, state):
        """Physical totals tracked by the diagnostics, ordered as ``invariant_names``."""
        return tuple(global_invariants(self, state))


class SeparableLinearModel(KineticModel):
    """``F(Y) = sum_t L_t @ Y @ R_t.T`` with spatial ``L_t`` and velocity ``R_t``.

    ``L_t = None`` stands for the identity. Subclasses fill ``self.terms``.
    """

    terms: list

    def _vel(self, R, V, T):
        # V^T R^T W T
        return inner(R @ V, T, self.velocity_weights)

    def rhs_K(self, K, V, ctx=None):
        out = np.zeros((K.shape[0], V.shape[1]))
        for L, R in self.terms:
            LK = K if L is None else L @ K
            out += LK @ self._vel(R, V, V)
        return out

    def rhs_L(self, L, X, ctx=None):
        out = np.zeros((L.shape[0], X.shape[1]))
        for Lx, R in self.terms:
            XtLtX = X.T @ X if Lx is None else X.T @ (Lx @ X)
            out += (R @ L) @ XtLtX.T
        return out

    def rhs_VX(self, S, X, V, ctx=None, test=None):
        test = V if test is None else test
        out = np.zeros((X.shape[0], test.shape[1]))
        for L, R in self.terms:
            LX = X if L is None else L @ X
            out += LX @ (S @ self._vel(R, V, test))
        return out

    def dense_rhs(self, Y, ctx=None):
        out = np.zeros_like(Y, dtype=float)
        for L, R in self.terms:
            LY = Y if L is None else L @ Y
            out += LY @ R.T
        return out


def invariant_density(model, state):
    """Local conserved densities ``Phi = X S (V^T W U)``, one column per component."""
    return state.X @ (state.S @ inner(state.V, model.conserved_basis, model.velocity_weights))


def global_invariants(model, state):
    """Spatial quadrature of :func:`invariant_density`."""
    return model.cell_volume * invariant_density(model, state).sum(axis=0)
