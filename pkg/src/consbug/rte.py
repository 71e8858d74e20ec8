"""Radiative transfer in modal velocity bases (P_N), upwind finite volumes in space.

Slab geometry uses normalized Legendre moments, the 2D line source real
spherical harmonics up to degree ``N``. In both cases the first basis
function is the constant, so the conserved basis is ``U = e_1`` and the
scattering operator is ``sigma_s (e_1 e_1^T - I)``.
"""

import numpy as np
import scipy.sparse as sp

from .linalg import ortho_columns
from .lowrank import LowRankState
from .model import SeparableLinearModel


def build_legendre_flux(n_v):
    """Streaming matrix of ``mu`` in the orthonormal Legendre basis on [-1, 1]."""
    if n_v < 2:
        raise ValueError("need at least two moments")
    n = np.arange(n_v - 1)
    off = (n + 1) / np.sqrt((2 * n + 1) * (2 * n + 3))
    return np.diag(off, 1) + np.diag(off, -1)


def sh_index(l, m):
    return l * l + l + m


def _complex_sh_flux(N):
    size = (N + 1) ** 2
    plus = np.zeros((size, size))  # sin(theta) e^{+i phi}
    minus = np.zeros((size, size))  # sin(theta) e^{-i phi}
    for l in range(N + 1):
        for m in range(-l, l + 1):
            col = sh_index(l, m)
            # terms coupling to degree l+1 are dropped at the truncation degree
            if l + 1 <= N:
                plus[sh_index(l + 1, m + 1), col] = -np.sqrt(
                    (l + m + 1) * (l + m + 2) / ((2 * l + 1) * (2 * l + 3))
                )
                minus[sh_index(l + 1, m - 1), col] = np.sqrt(
                    (l - m + 1) * (l - m + 2) / ((2 * l + 1) * (2 * l + 3))
                )
            if l >= 1:
                if abs(m + 1) <= l - 1:
                    plus[sh_index(l - 1, m + 1), col] = np.sqrt(
                        (l - m) * (l - m - 1) / ((2 * l - 1) * (2 * l + 1))
                    )
                if abs(m - 1) <= l - 1:
                    minus[sh_index(l - 1, m - 1), col] = -np.sqrt(
                        (l + m) * (l + m - 1) / ((2 * l - 1) * (2 * l + 1))
                    )
    Ax = (plus + minus) / 2
    Ay = (plus - minus) / 2j
    return Ax, Ay


def _real_sh_transform(N):
    # rows: real harmonics, columns: complex Y_l^m (Condon-Shortley phase)
    size = (N + 1) ** 2
    C = np.zeros((size, size), dtype=complex)
    s = 1 / np.sqrt(2)
    for l in range(N + 1):
        C[sh_index(l, 0), sh_index(l, 0)] = 1.0
        for m in range(1, l + 1):
            sign = (-1) ** m
            C[sh_index(l, m), sh_index(l, -m)] = s
            C[sh_index(l, m), sh_index(l, m)] = sign * s
            C[sh_index(l, -m), sh_index(l, -m)] = 1j * s
            C[sh_index(l, -m), sh_index(l, m)] = -1j * sign * s
    return C


def build_sh_flux(N):
    """Streaming matrices ``(A_x, A_y)`` for ``v_1``, ``v_2`` in the real SH basis.

    Basis ordering is degree-lexicographic, ``index = l^2 + l + m`` with
    ``m = -l..l``; real harmonics with ``m > 0`` carry ``cos(m phi)``, with
    ``m < 0`` ``sin(|m| phi)``.
    """
    if N < 1:
        raise ValueError("need degree N >= 1")
    Ax_c, Ay_c = _complex_sh_flux(N)
    C = _real_sh_transform(N)
    out = []
    for A in (Ax_c, Ay_c):
        Ar = np.conj(C) @ A @ C.T
        if np.max(np.abs(Ar.imag)) > 1e-12:
            raise RuntimeError("real SH flux matrix has an imaginary part")
        Ar = Ar.real
        out.append((Ar + Ar.T) / 2)
    return tuple(out)


def abs_matrix(A):
    """``|A| = Q |Lambda| Q^T`` for symmetric ``A``."""
    lam, Q = np.linalg.eigh(A)
    out = (Q * np.abs(lam)) @ Q.T
    return (out + out.T) / 2


def difference_operators(n, h, boundary="periodic"):
    """Sparse central difference ``D_c`` and second difference ``D_2`` on ``n`` cells.

    ``boundary="outflow"`` uses copy ghost cells.
    """
    e = np.ones(n)
    Dc = sp.diags([-e[:-1], e[:-1]], [-1, 1], shape=(n, n), format="lil")
    D2 = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
    if boundary == "periodic":
        Dc[0, n - 1] = -1.0
        Dc[n - 1, 0] = 1.0
        D2[0, n - 1] = 1.0
        D2[n - 1, 0] = 1.0
    elif boundary == "outflow":
        Dc[0, 0] = -1.0
        Dc[n - 1, n - 1] = 1.0
        D2[0, 0] = -1.0
        D2[n - 1, n - 1] = -1.0
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    return (Dc.tocsr() / (2 * h)), (D2.tocsr() / h**2)


def _scattering(n_v, sigma_s):
    G = -np.eye(n_v)
    G[0, 0] = 0.0
    return sigma_s * G


class SlabRteModel(SeparableLinearModel):
    """1D slab radiative transfer with ``n_v`` normalized Legendre moments.

    ``F(Y) = -D_c Y A^T + (dx/2) D_2 Y |A|^T + sigma_s Y G^T``.
    """

    def __init__(self, n_x, n_v, sigma_s=1.0, domain=(-2.0, 2.0), boundary="periodic"):
        self.n_x, self.n_v = n_x, n_v
        self.sigma_s = sigma_s
        self.boundary = boundary
        a, b = domain
        self.dx = (b - a) / n_x
        self.x = a + (np.arange(n_x) + 0.5) * self.dx
        self.cell_volume = self.dx
        self.A = build_legendre_flux(n_v)
        self.absA = abs_matrix(self.A)
        self.G = _scattering(n_v, 1.0)
        Dc, D2 = difference_operators(n_x, self.dx, boundary)
        self.terms = [(-Dc, self.A), ((self.dx / 2) * D2, self.absA), (None, sigma_s * self.G)]
        self.velocity_weights = np.ones(n_v)
        self.conserved_basis = np.eye(n_v)[:, :1]

    def cfl_dt(self, cfl=0.9):
        return cfl * self.dx


class Linesource2dModel(SeparableLinearModel):
    """2D radiative transfer with real spherical harmonics up to degree ``N``.

    Cells are stored row-major, ``index = i * n_x + j`` with ``i`` along x.
    """

    def __init__(self, n_x, N, sigma_s=1.0, domain=(-1.5, 1.5), boundary="periodic"):
        self.n_cells = n_x
        self.N = N
        self.n_x = n_x * n_x
        self.n_v = (N + 1) ** 2
        self.sigma_s = sigma_s
        self.boundary = boundary
        a, b = domain
        self.dx = (b - a) / n_x
        c = a + (np.arange(n_x) + 0.5) * self.dx
        self.x = c
        self.cell_volume = self.dx**2
        self.Ax, self.Ay = build_sh_flux(N)
        self.absAx, self.absAy = abs_matrix(self.Ax), abs_matrix(self.Ay)
        self.G = _scattering(self.n_v, 1.0)
        Dc, D2 = difference_operators(n_x, self.dx, boundary)
        eye = sp.identity(n_x, format="csr")
        Dcx, D2x = sp.kron(Dc, eye, format="csr"), sp.kron(D2, eye, format="csr")
        Dcy, D2y = sp.kron(eye, Dc, format="csr"), sp.kron(eye, D2, format="csr")
        h2 = self.dx / 2
        self.terms = [
            (-Dcx, self.Ax),
            (h2 * D2x, self.absAx),
            (-Dcy, self.Ay),
            (h2 * D2y, self.absAy),
            (None, sigma_s * self.G),
        ]
        self.velocity_weights = np.ones(self.n_v)
        self.conserved_basis = np.eye(self.n_v)[:, :1]

    def cfl_dt(self, cfl=0.9):
        return cfl * self.dx / 2


def _isotropic_state(density, n_v, rank):
    n_x = density.shape[0]
    if not 1 <= rank <= min(n_x, n_v):
        raise ValueError(f"initial rank {rank} outside [1, {min(n_x, n_v)}]")
    block = np.zeros((n_x, rank))
    block[:, 0] = density
    X, R = ortho_columns(block)
    S = np.zeros((rank, rank))
    S[0, 0] = R[0, 0]
    V = np.eye(n_v)[:, :rank]
    return LowRankState(X, S, V)


def planesource_init(model, rank=2, sigma_ic=0.03):
    """Isotropic Gaussian pulse; the zeroth moment equals the normalized Gaussian."""
    g = np.exp(-(model.x**2) / (2 * sigma_ic**2)) / (np.sqrt(2 * np.pi) * sigma_ic)
    return _isotropic_state(g, model.n_v, rank)


def linesource_init(model, rank=4, sigma_ic=0.03):
    """Isotropic 2D Gaussian ``exp(-|x|^2 / (4 s^2)) / (4 pi s^2)`` in the zeroth moment.

    The default rank 4 puts both in-plane first-degree harmonics into the
    initial velocity frame; with fewer columns one streaming direction never
    enters the basis because of the pulse's symmetry.
    """
    xx, yy = np.meshgrid(model.x, model.x, indexing="ij")
    g = np.exp(-(xx**2 + yy**2) / (4 * sigma_ic**2)) / (4 * np.pi * sigma_ic**2)
    return _isotropic_state(g.ravel(), model.n_v, rank)
