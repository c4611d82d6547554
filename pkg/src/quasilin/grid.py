"""Finite-difference discretization of the domain with zero boundary trace.

Interior nodal values represent the field; boundary nodes are implicitly
zero.  The stiffness operator K is the standard 3-point (1D) / 5-point
(2D) Dirichlet stencil scaled so u'Ku approximates the squared gradient
integral, and M is the lumped diagonal mass.  Pointwise squared gradients
are collocated per dof by sharing each cell's one-sided difference among
the cell's interior endpoints, which makes the collocated total equal to
u'Ku exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class DomainSpec:
    dim: int
    extent: Union[float, tuple]     # L, or (Lx, Ly)
    n: Union[int, tuple]            # interior nodes per axis


class Norms(NamedTuple):
    l2: float
    h10: float


@dataclass(frozen=True)
class Grid:
    dim: int
    extent: tuple          # per-axis lengths
    n: tuple               # per-axis interior counts
    h: tuple               # per-axis spacings
    weight: float          # per-dof lumped volume weight
    M: sp.spmatrix = field(repr=False, compare=False)
    K: sp.spmatrix = field(repr=False, compare=False)
    _solve_K: object = field(repr=False, compare=False)
    _solve_KM: object = field(repr=False, compare=False)
    _cnt: tuple = field(repr=False, compare=False)   # per-axis cell share counts

    @property
    def n_dof(self) -> int:
        return int(np.prod(self.n))

    def coords(self) -> tuple:
        """Per-axis interior node coordinates."""
        return tuple(np.arange(1, ni + 1) * hi for ni, hi in zip(self.n, self.h))

    def dof_coords(self) -> np.ndarray:
        """Interior node coordinates per dof, shape (n_dof, dim); the dof
        ordering is row-major over the axes (the node <-> dof map)."""
        axes = self.coords()
        if self.dim == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def solve_K(self, b: np.ndarray) -> np.ndarray:
        return self._solve_K(b)

    def solve_KM(self, b: np.ndarray) -> np.ndarray:
        return self._solve_KM(b)

    # -- cell machinery shared with the energy assembly ------------------
    # values may carry leading batch axes: shape (..., n_dof)
    #
    # Quadrature nodes are ALL grid nodes: interior dofs carry the full
    # volume weight and the plain average of the squared one-sided
    # differences over their adjacent cells; boundary nodes carry the
    # trapezoid half-weight and the single adjacent cell's difference.
    # This keeps the collocated total equal to u'Ku exactly while staying
    # second-order accurate up to the boundary.

    def pad(self, values: np.ndarray) -> np.ndarray:
        """Embed interior values into the padded array with zero boundary."""
        values = np.asarray(values, dtype=float)
        batch = values.shape[:-1]
        if self.dim == 1:
            out = np.zeros(batch + (self.n[0] + 2,))
            out[..., 1:-1] = values
        else:
            out = np.zeros(batch + (self.n[0] + 2, self.n[1] + 2))
            out[..., 1:-1, 1:-1] = values.reshape(batch + self.n)
        return out

    def cell_diffs(self, values: np.ndarray) -> tuple:
        """Per-axis one-sided differences divided by the axis spacing."""
        U = self.pad(values)
        if self.dim == 1:
            return (np.diff(U, axis=-1) / self.h[0],)
        dx = (U[..., 1:, 1:-1] - U[..., :-1, 1:-1]) / self.h[0]
        dy = (U[..., 1:-1, 1:] - U[..., 1:-1, :-1]) / self.h[1]
        return dx, dy

    def nodal_gradsq(self, values: np.ndarray) -> np.ndarray:
        """Collocated |grad u|^2 per interior dof: cell averages per axis."""
        values = np.asarray(values, dtype=float)
        diffs = self.cell_diffs(values)
        if self.dim == 1:
            d, = diffs
            return 0.5 * (d[..., :-1] ** 2 + d[..., 1:] ** 2)
        dx, dy = diffs
        out = 0.5 * (dx[..., :-1, :] ** 2 + dx[..., 1:, :] ** 2) \
            + 0.5 * (dy[..., :, :-1] ** 2 + dy[..., :, 1:] ** 2)
        return out.reshape(values.shape[:-1] + (-1,))

    def nodal_gradprod(self, values_u: np.ndarray, values_v: np.ndarray) -> np.ndarray:
        """Collocated grad u . grad v per dof, consistent with nodal_gradsq."""
        du = self.cell_diffs(np.asarray(values_u, dtype=float))
        dv = self.cell_diffs(np.asarray(values_v, dtype=float))
        if self.dim == 1:
            p = du[0] * dv[0]
            return 0.5 * (p[..., :-1] + p[..., 1:])
        px = du[0] * dv[0]
        py = du[1] * dv[1]
        out = 0.5 * (px[..., :-1, :] + px[..., 1:, :]) \
            + 0.5 * (py[..., :, :-1] + py[..., :, 1:])
        return out.reshape(out.shape[:-2] + (-1,))

    def boundary_gradsq(self, values: np.ndarray) -> np.ndarray:
        """|grad u|^2 at boundary quadrature nodes, shape (..., n_boundary).

        Each boundary node sees only its interior-adjacent cell; cells along
        the boundary line vanish with the zero trace.  Corner nodes carry no
        gradient and are omitted.
        """
        diffs = self.cell_diffs(values)
        if self.dim == 1:
            d, = diffs
            return np.stack([d[..., 0] ** 2, d[..., -1] ** 2], axis=-1)
        dx, dy = diffs
        return np.concatenate([dx[..., 0, :] ** 2, dx[..., -1, :] ** 2,
                               dy[..., :, 0] ** 2, dy[..., :, -1] ** 2], axis=-1)

    @property
    def boundary_weight(self) -> float:
        """Trapezoid half-weight of the boundary quadrature nodes."""
        return 0.5 * self.weight

    def weighted_stiffness_apply(self, nodal_coeff: np.ndarray,
                                 boundary_coeff: np.ndarray,
                                 values: np.ndarray) -> np.ndarray:
        """Divergence-form force of the collocated quadrature.

        d/du_k of [sum_i w c_i |grad u|^2_i / 2 + sum_b (w/2) c_b |grad u|^2_b / 2]
        with per-cell coefficients averaging the two endpoint nodes' c values
        (boundary endpoints weighted by their half quadrature weight).
        """
        diffs = self.cell_diffs(values)
        w = self.weight
        if self.dim == 1:
            gp = np.concatenate(([boundary_coeff[0]], nodal_coeff, [boundary_coeff[1]]))
            gbar = 0.5 * w * (gp[:-1] + gp[1:])
            psi = gbar * diffs[0]
            return (psi[:-1] - psi[1:]) / self.h[0]
        nx, ny = self.n
        G = nodal_coeff.reshape(self.n)
        bx_lo, bx_hi = boundary_coeff[:ny], boundary_coeff[ny:2 * ny]
        by_lo, by_hi = boundary_coeff[2 * ny:2 * ny + nx], boundary_coeff[2 * ny + nx:]
        gpx = np.vstack([bx_lo[None, :], G, bx_hi[None, :]])
        gbarx = 0.5 * w * (gpx[:-1, :] + gpx[1:, :])
        psix = gbarx * diffs[0]
        out = (psix[:-1, :] - psix[1:, :]) / self.h[0]
        gpy = np.hstack([by_lo[:, None], G, by_hi[:, None]])
        gbary = 0.5 * w * (gpy[:, :-1] + gpy[:, 1:])
        psiy = gbary * diffs[1]
        out = out + (psiy[:, :-1] - psiy[:, 1:]) / self.h[1]
        return out.ravel()


@dataclass
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.grid.n_dof:
            raise ValueError("field length does not match grid dof count")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi1: Field


def _share_counts(n: int) -> np.ndarray:
    c = np.full(n + 1, 2.0)
    c[0] = 1.0
    c[-1] = 1.0
    return c


def _stencil(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h ** 2)
    off = np.full(n - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def build_grid(spec: DomainSpec) -> Grid:
    """Uniform grid with zero Dirichlet trace; deterministic given the spec."""
    if spec.dim == 1:
        n = (int(spec.n),)
        extent = (float(spec.extent),)
    elif spec.dim == 2:
        n = tuple(int(v) for v in np.atleast_1d(spec.n))
        ext = np.atleast_1d(spec.extent).astype(float)
        if len(n) == 1:
            n = (n[0], n[0])
        if ext.size == 1:
            ext = np.array([ext[0], ext[0]])
        extent = (float(ext[0]), float(ext[1]))
        if len(n) != 2 or len(extent) != 2:
            raise ValueError("2-d grid needs per-axis n and extent")
    else:
        raise ValueError("dim must be 1 or 2")
    if any(ni < 2 for ni in n):
        raise ValueError("need at least 2 interior nodes per axis")
    if any(L <= 0 for L in extent):
        raise ValueError("extent must be positive")

    h = tuple(L / (ni + 1) for L, ni in zip(extent, n))
    if spec.dim == 1:
        weight = h[0]
        K = (weight * _stencil(n[0], h[0])).tocsr()
    else:
        weight = h[0] * h[1]
        Ax = _stencil(n[0], h[0])
        Ay = _stencil(n[1], h[1])
        K = (weight * (sp.kron(Ax, sp.identity(n[1])) +
                       sp.kron(sp.identity(n[0]), Ay))).tocsr()
    ndof = int(np.prod(n))
    M = sp.diags(np.full(ndof, weight), format="csr")
    solve_K = spla.factorized(K.tocsc())
    solve_KM = spla.factorized((K + M).tocsc())
    cnt = tuple(_share_counts(ni) for ni in n)
    return Grid(dim=spec.dim, extent=extent, n=n, h=h, weight=weight,
                M=M, K=K, _solve_K=solve_K, _solve_KM=solve_KM, _cnt=cnt)


def operators(grid: Grid) -> tuple:
    """(M, K): lumped mass and scaled Dirichlet stiffness."""
    return grid.M, grid.K


def norms(u: Field) -> Norms:
    v = u.values
    g = u.grid
    return Norms(l2=float(np.sqrt(v @ (g.M @ v))), h10=float(np.sqrt(v @ (g.K @ v))))


def positive_part(u: Field) -> Field:
    return Field(u.grid, np.maximum(u.values, 0.0))


def negative_part(u: Field) -> Field:
    return Field(u.grid, -np.minimum(u.values, 0.0))


def first_eigenpair(grid: Grid, tol: float = 1e-13, max_iters: int = 500) -> EigenPair:
    """Lowest Dirichlet eigenpair of (K, M) by inverse power iteration.

    Starts from the strictly positive constant vector, so the iterates stay
    positive; converges on the M-norm change of the iterate itself (the
    Rayleigh quotient alone stagnates while the vector is still moving).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.ones(grid.n_dof)
    v = v / np.sqrt(v @ (grid.M @ v))
    delta = np.inf
    for _ in range(max_iters):
        w = grid.solve_K(grid.M @ v)
        w = w / np.sqrt(w @ (grid.M @ w))
        if w @ (grid.M @ v) < 0:
            w = -w
        delta = w - v
        delta = float(np.sqrt(delta @ (grid.M @ delta)))
        v = w
        if delta <= tol:
            break
    else:
        raise RuntimeError(
            f"eigen iteration did not converge in {max_iters} iterations; "
            f"last iterate change {delta:g}")
    lam = float(v @ (grid.K @ v))    # M-normalized Rayleigh quotient
    if v.max() < -v.min():
        v = -v
    if v.min() <= 0:
        raise RuntimeError("first eigenvector lost interior positivity")
    return EigenPair(lambda1=lam, phi1=Field(grid, v))


def lambda1_closed_form(grid: Grid) -> float:
    """Exact lowest eigenvalue of the discrete pencil (K, M)."""
    return sum((2.0 / hi ** 2) * (1.0 - np.cos(np.pi / (ni + 1)))
               for hi, ni in zip(grid.h, grid.n))


def pencil_eigenvalues(grid: Grid) -> np.ndarray:
    """All eigenvalues of (K, M), closed form for the product stencil."""
    per_axis = [
        (2.0 / hi ** 2) * (1.0 - np.cos(np.arange(1, ni + 1) * np.pi / (ni + 1)))
        for hi, ni in zip(grid.h, grid.n)
    ]
    if grid.dim == 1:
        return np.sort(per_axis[0])
    lx, ly = per_axis
    return np.sort((lx[:, None] + ly[None, :]).ravel())


def field_to_csv(u: Field, path) -> None:
    """Node rows incl. boundary (value 0): header x[,y],value."""
    g = u.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if g.dim == 1:
            w.writerow(["x", "value"])
            x = np.concatenate(([0.0], g.coords()[0], [g.extent[0]]))
            vals = np.concatenate(([0.0], u.values, [0.0]))
            for xi, vi in zip(x, vals):
                w.writerow([repr(float(xi)), repr(float(vi))])
        else:
            w.writerow(["x", "y", "value"])
            xs = np.concatenate(([0.0], g.coords()[0], [g.extent[0]]))
            ys = np.concatenate(([0.0], g.coords()[1], [g.extent[1]]))
            V = np.zeros((g.n[0] + 2, g.n[1] + 2))
            V[1:-1, 1:-1] = u.values.reshape(g.n)
            for i, xi in enumerate(xs):
                for j, yj in enumerate(ys):
                    w.writerow([repr(float(xi)), repr(float(yj)), repr(float(V[i, j]))])


def field_header_json(u: Field) -> str:
    g = u.grid
    return json.dumps({"dim": g.dim, "n": list(g.n), "h": list(g.h)}, sort_keys=True)


def field_from_csv(grid: Grid, path) -> Field:
    """Read a field written by field_to_csv onto a matching grid."""
    rows = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        for row in rd:
            rows.append([float(v) for v in row])
    arr = np.array(rows)
    if grid.dim == 1:
        if arr.shape[0] != grid.n[0] + 2:
            raise ValueError("field file does not match the grid")
        return Field(grid, arr[1:-1, 1])
    nx, ny = grid.n
    if arr.shape[0] != (nx + 2) * (ny + 2):
        raise ValueError("field file does not match the grid")
    V = arr[:, 2].reshape(nx + 2, ny + 2)
    return Field(grid, V[1:-1, 1:-1].ravel())
