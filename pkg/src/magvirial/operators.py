"""Discrete covariant calculus: gradients, the Hamiltonian, the multiplier
transport operator, and fractional-power norms.

Two discrete gradients coexist on purpose.  The field-level covariant
gradient uses centered stencils at nodes (one-sided at the box faces) and
feeds every integral diagnostic.  The Hamiltonian is assembled from a
staggered face gradient (forward differences with the vector potential
averaged to face midpoints), D^H D + V, which is Hermitian positive by
construction and reduces to the standard (2n+1)-point Laplacian with
Dirichlet walls when A = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .grid import ComplexField, Grid, ScalarField, VectorField
from .multiplier import MultiplierFamily, eval_arrays
from .potentials import PotentialSpec, electric_values, vector_potential

__all__ = [
    "ConvergenceError",
    "DiscreteHamiltonian",
    "SobolevScale",
    "covariant_gradient",
    "assemble_hamiltonian",
    "matrix_builder",
    "radial_tangential_split",
    "hessian_form",
    "apply_T",
    "t_matrix",
    "divergence",
    "sobolev_norm",
    "ground_state",
    "l2_inner",
    "l2_norm",
]


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""


def l2_inner(g: Grid, a: np.ndarray, b: np.ndarray) -> complex:
    """Discrete L^2 inner product h^n <a, b>, conjugate-linear in a."""
    return g.spacing**g.n * complex(np.vdot(a, b))


def l2_norm(g: Grid, a: np.ndarray) -> float:
    return float(np.sqrt(g.spacing**g.n) * np.linalg.norm(a.ravel()))


def _axis_derivative(values: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """Centered difference along an axis; one-sided second order at faces.

    order=4 uses the five-point interior stencil (third-order-accurate rows
    next to the faces); useful where stencil bias dominates an integral.
    """
    out = np.empty_like(values)
    v = np.moveaxis(values, axis, 0)
    o = np.moveaxis(out, axis, 0)
    if order == 2:
        o[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    elif order == 4:
        o[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
        o[1] = (v[2] - v[0]) / (2.0 * h)
        o[-2] = (v[-1] - v[-3]) / (2.0 * h)
    else:
        raise ValueError(f"unsupported stencil order {order}")
    o[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    o[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return out


def covariant_gradient(
    u: ComplexField, spec: PotentialSpec, t: float = 0.0, order: int = 2
) -> VectorField:
    """(grad - i A) u componentwise at the nodes."""
    g = u.grid
    A = vector_potential(spec, t, g.coordinates())
    out = np.empty((g.n,) + g.shape, dtype=complex)
    for j in range(g.n):
        out[j] = _axis_derivative(u.values, j, g.spacing, order) - 1j * A[j] * u.values
    return VectorField(g, out)


def divergence(vf: VectorField, order: int = 2) -> ScalarField:
    """Central-difference divergence of a real vector field."""
    g = vf.grid
    div = np.zeros(g.shape)
    for j in range(g.n):
        div += _axis_derivative(vf.values[j], j, g.spacing, order)
    return ScalarField(g, div)


# ---------------------------------------------------------------------------
# Hamiltonian assembly on staggered faces
# ---------------------------------------------------------------------------


def _face_difference_1d(N: int, h: float) -> sp.csr_matrix:
    """(N+1) x N forward difference onto faces, Dirichlet ghosts outside."""
    rows, cols, vals = [], [], []
    for k in range(N + 1):
        if k < N:
            rows.append(k)
            cols.append(k)
            vals.append(1.0 / h)
        if k > 0:
            rows.append(k)
            cols.append(k - 1)
            vals.append(-1.0 / h)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N + 1, N))


def _face_average_1d(N: int) -> sp.csr_matrix:
    """(N+1) x N averaging onto faces, Dirichlet ghosts outside."""
    rows, cols, vals = [], [], []
    for k in range(N + 1):
        if k < N:
            rows.append(k)
            cols.append(k)
            vals.append(0.5)
        if k > 0:
            rows.append(k)
            cols.append(k - 1)
            vals.append(0.5)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N + 1, N))


def _lift(mat_1d: sp.spmatrix, axis: int, g: Grid) -> sp.csr_matrix:
    """kron(I, mat_1d, I) acting along one axis of the flattened C-order array."""
    N = g.points_per_axis
    pre = sp.identity(N**axis, format="csr")
    post = sp.identity(N ** (g.n - 1 - axis), format="csr")
    return sp.kron(sp.kron(pre, mat_1d, format="csr"), post, format="csr")


def _face_coordinates(g: Grid, axis: int) -> np.ndarray:
    """Coordinates of axis-`axis` faces, shape (n, N, .., N+1, .., N)."""
    N, h, L = g.points_per_axis, g.spacing, g.extent
    axes_1d = [g.axis] * g.n
    axes_1d[axis] = np.arange(N + 1) * h - L
    mesh = np.meshgrid(*axes_1d, indexing="ij")
    return np.stack(mesh)


def _face_gradients(spec: PotentialSpec, t: float, g: Grid) -> list[sp.csr_matrix]:
    """Covariant face gradients D_j = Gd_j - i diag(A_j at faces) Avg_j."""
    N, h = g.points_per_axis, g.spacing
    out = []
    for j in range(g.n):
        Gd = _lift(_face_difference_1d(N, h), j, g)
        a_faces = vector_potential(spec, t, _face_coordinates(g, j))[j].ravel()
        if np.any(a_faces):
            Av = _lift(_face_average_1d(N), j, g)
            Dj = (Gd - 1j * sp.diags(a_faces) @ Av).tocsr()
        else:
            Dj = Gd
        out.append(Dj)
    return out


@dataclass
class DiscreteHamiltonian:
    """H_h = D^H D + V on a grid, Hermitian and >= min(V) > 0 for growing V."""

    grid: Grid
    spec: PotentialSpec
    t: float
    matrix: sp.csr_matrix
    d_ops: list = field(repr=False)
    v_values: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (self.matrix @ values.ravel()).reshape(self.grid.shape)

    def energy(self, values: np.ndarray) -> float:
        """<f, H f>, the squared H^1 norm."""
        flat = values.ravel()
        return float(np.real(l2_inner(self.grid, flat, self.matrix @ flat)))

    def gradient_energy(self, values: np.ndarray) -> float:
        """sum_j ||D_j f||^2 over the staggered faces (exact Green identity)."""
        flat = values.ravel()
        h_w = self.grid.spacing**self.grid.n
        return h_w * float(sum(np.linalg.norm(D @ flat) ** 2 for D in self.d_ops))

    def potential_energy(self, values: np.ndarray) -> float:
        h_w = self.grid.spacing**self.grid.n
        return h_w * float(np.sum(self.v_values * np.abs(values.ravel()) ** 2))


def assemble_hamiltonian(spec: PotentialSpec, t: float, g: Grid) -> DiscreteHamiltonian:
    d_ops = _face_gradients(spec, t, g)
    v = electric_values(spec, t, g.coordinates()).ravel()
    H = sp.diags(v).tocsr()
    for D in d_ops:
        H = H + (D.getH() @ D).tocsr()
    return DiscreteHamiltonian(grid=g, spec=spec, t=t, matrix=H.tocsr(), d_ops=d_ops, v_values=v)


def matrix_builder(spec: PotentialSpec, g: Grid) -> Callable[[float], sp.csr_matrix]:
    """Return t -> H(t) matrix, cheap to call repeatedly.

    Static specs are assembled once.  Gauge-shifted specs have
    A(t) = A0 - c0 t grad<x>^m, so H(t) = H0 + t H1 + t^2 H2 exactly;
    the three parts are precomputed.  Anything else reassembles per call.
    """
    if not spec.is_time_dependent:
        H = assemble_hamiltonian(spec, 0.0, g).matrix
        return lambda t: H
    if spec.electric.family == "custom":
        return lambda t: assemble_hamiltonian(spec, t, g).matrix

    v = electric_values(spec, 0.0, g.coordinates()).ravel()
    H0 = sp.diags(v).tocsr()
    H1 = None
    H2 = None
    for j in range(g.n):
        Xf = _face_coordinates(g, j)
        a0 = vector_potential(spec, 0.0, Xf)[j].ravel()
        a1 = vector_potential(spec, 1.0, Xf)[j].ravel() - a0
        Gd = _lift(_face_difference_1d(g.points_per_axis, g.spacing), j, g)
        Av = _lift(_face_average_1d(g.points_per_axis), j, g)
        D0 = (Gd - 1j * sp.diags(a0) @ Av).tocsr() if np.any(a0) else Gd
        E = (sp.diags(a1) @ Av).tocsr()
        H0 = H0 + (D0.getH() @ D0).tocsr()
        term1 = (1j * (E.T @ D0 - D0.getH() @ E)).tocsr()
        term2 = (E.T @ E).tocsr()
        H1 = term1 if H1 is None else H1 + term1
        H2 = term2 if H2 is None else H2 + term2
    H0, H1, H2 = H0.tocsr(), H1.tocsr(), H2.tocsr()

    def build(t: float) -> sp.csr_matrix:
        if t == 0.0:
            return H0
        return (H0 + t * H1 + (t * t) * H2).tocsr()

    return build


# ---------------------------------------------------------------------------
# Radial/tangential splitting and the Hessian quadratic form
# ---------------------------------------------------------------------------


def radial_tangential_split(G: VectorField, g: Grid) -> tuple[ComplexField, VectorField]:
    """Split G into (x/|x|) . G and its tangential remainder."""
    if G.grid != g:
        raise ValueError("field lives on a different grid")
    xhat = np.empty((g.n,) + g.shape)
    for j in range(g.n):
        xhat[j] = g._broadcast_axis(j) / g.radii
    radial = np.einsum("j...,j...->...", xhat, G.values)
    tangential = G.values - xhat * radial
    return ComplexField(g, radial), VectorField(g, tangential)


def hessian_form(G: VectorField, fam: MultiplierFamily) -> ScalarField:
    """phi'' |G_R|^2 + (phi'/r) |G_T|^2 pointwise (nonnegative)."""
    g = G.grid
    vals = eval_arrays(fam, g.radii)
    radial, _ = radial_tangential_split(G, g)
    abs2 = np.sum(np.abs(G.values) ** 2, axis=0)
    rad2 = np.abs(radial.values) ** 2
    out = vals["phi_pp"] * rad2 + vals["phi_p"] / g.radii * (abs2 - rad2)
    return ScalarField(g, out)


# ---------------------------------------------------------------------------
# The skew multiplier operator T = 2 grad(phi) . grad_A + lap(phi)
# ---------------------------------------------------------------------------


def _central_difference_1d(N: int, h: float) -> sp.csr_matrix:
    """N x N centered difference, one-sided second order at the faces."""
    rows, cols, vals = [], [], []
    for k in range(1, N - 1):
        rows += [k, k]
        cols += [k - 1, k + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [-1.5 / h, 2.0 / h, -0.5 / h]
    rows += [N - 1, N - 1, N - 1]
    cols += [N - 1, N - 2, N - 3]
    vals += [1.5 / h, -2.0 / h, 0.5 / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def t_matrix(fam: MultiplierFamily, spec: PotentialSpec, t: float, g: Grid) -> sp.csr_matrix:
    """Exact skew combination S - S^H with S = grad(phi) . grad_A.

    Skew-adjointness holds to rounding by construction; the operator agrees
    with 2 grad(phi). grad_A + lap(phi) to O(h^2) on smooth decaying fields.
    """
    vals = eval_arrays(fam, g.radii)
    X = g.coordinates()
    A = vector_potential(spec, t, X)
    C1 = _central_difference_1d(g.points_per_axis, g.spacing)
    S = None
    for j in range(g.n):
        phi_j = (vals["phi_p"] * X[j] / g.radii).ravel()
        Dj = _lift(C1, j, g)
        if np.any(A[j]):
            Dj = (Dj - 1j * sp.diags(A[j].ravel())).tocsr()
        term = (sp.diags(phi_j) @ Dj).tocsr()
        S = term if S is None else S + term
    return (S - S.getH()).tocsr()


def apply_T(
    u: ComplexField, fam: MultiplierFamily, spec: PotentialSpec, t: float = 0.0
) -> ComplexField:
    g = u.grid
    T = t_matrix(fam, spec, t, g)
    return ComplexField(g, (T @ u.values.ravel()).reshape(g.shape))


# ---------------------------------------------------------------------------
# Fractional-power norms ||H^{s/2} f||
# ---------------------------------------------------------------------------


@dataclass
class SobolevScale:
    """Norm scale attached to one Hamiltonian.

    Grids with at most `dense_threshold` unknowns use a full Hermitian
    eigendecomposition; larger problems use Lanczos quadrature for
    <f, H^s f> with relative stagnation tolerance `lanczos_tol`.
    """

    ham: DiscreteHamiltonian
    dense_threshold: int = 8192
    lanczos_tol: float = 1e-8
    lanczos_max: int = 400
    _eig: tuple | None = field(default=None, repr=False, compare=False)

    def eigendecomposition(self) -> tuple[np.ndarray, np.ndarray]:
        if self.ham.size > self.dense_threshold:
            raise ValueError(
                f"{self.ham.size} unknowns exceed the dense threshold {self.dense_threshold}"
            )
        if self._eig is None:
            dense = self.ham.matrix.toarray()
            evals, evecs = np.linalg.eigh(dense)
            self._eig = (evals, evecs)
        return self._eig


def _lanczos_quadrature(scale: SobolevScale, f: np.ndarray, s: float) -> float:
    """Approximate <v0, (H)^s v0> for the normalized start vector v0 = f/|f|."""
    H = scale.ham.matrix
    tol, mmax = scale.lanczos_tol, scale.lanczos_max
    v = f.astype(complex).ravel()
    v = v / np.linalg.norm(v)
    v_prev = np.zeros_like(v)
    alphas: list[float] = []
    betas: list[float] = []
    prev_q = None
    stagnant = 0
    for m in range(1, mmax + 1):
        w = H @ v
        a = float(np.real(np.vdot(v, w)))
        alphas.append(a)
        w = w - a * v - (betas[-1] if betas else 0.0) * v_prev
        b = float(np.linalg.norm(w))
        evals, evecs = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
        q = float(np.sum(np.clip(evals, 0.0, None) ** s * evecs[0, :] ** 2))
        if prev_q is not None:
            if abs(q - prev_q) <= tol * max(abs(q), 1e-300):
                stagnant += 1
                if stagnant >= 2:
                    return q
            else:
                stagnant = 0
        prev_q = q
        if b < 1e-13 * max(1.0, abs(a)):
            return q  # exact invariant subspace
        betas.append(b)
        v_prev, v = v, w / b
    raise ConvergenceError(
        f"Lanczos quadrature did not stagnate below {tol} within {mmax} iterations"
    )


def sobolev_norm(f: ComplexField, scale: SobolevScale, s: float) -> float:
    """||H^{s/2} f|| in the discrete L^2 norm, for 0 <= s <= 2."""
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    g = f.grid
    if g != scale.ham.grid:
        raise ValueError("field and Hamiltonian live on different grids")
    flat = f.values.ravel()
    if s == 0.0:
        return l2_norm(g, flat)
    if s == 2.0:
        return l2_norm(g, scale.ham.matrix @ flat)
    if s == 1.0:
        return float(np.sqrt(scale.ham.energy(flat)))
    nrm = np.linalg.norm(flat)
    if nrm == 0.0:
        return 0.0
    if scale.ham.size <= scale.dense_threshold:
        evals, evecs = scale.eigendecomposition()
        coeff = evecs.conj().T @ flat
        q = float(np.sum(np.clip(evals, 0.0, None) ** s * np.abs(coeff) ** 2)) / nrm**2
    else:
        q = _lanczos_quadrature(scale, flat, s)
    return float(np.sqrt(g.spacing**g.n) * nrm * np.sqrt(q))


def ground_state(ham: DiscreteHamiltonian, tol: float = 1e-9) -> tuple[float, ComplexField]:
    """Lowest eigenpair of H_h, normalized to unit L^2 mass."""
    evals, evecs = spla.eigsh(ham.matrix, k=1, which="SA", tol=tol, maxiter=10_000)
    v = evecs[:, 0]
    peak = np.argmax(np.abs(v))
    v = v * (np.sign(np.real(v[peak])) or 1.0)
    v = v / l2_norm(ham.grid, v)
    return float(evals[0]), ComplexField(ham.grid, v.reshape(ham.grid.shape))
