"""Lowest-order Lagrange FEM kernels on the structured grids.

Coefficients are piecewise constant per (fine) element; all integrals of
products of bilinear/linear shape functions are exact, so assembly has no
quadrature error.  Homogeneous Dirichlet conditions are imposed by
eliminating boundary nodes: assembled operators act on free nodes only.
"""

import hashlib

import numpy as np
import scipy.sparse as sparse


def local_stiffness(d, h):
    """Element stiffness matrix for a cube of side h, unit coefficient."""
    if d == 1:
        return np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    return np.array([
        [4.0, -1.0, -1.0, -2.0],
        [-1.0, 4.0, -2.0, -1.0],
        [-1.0, -2.0, 4.0, -1.0],
        [-2.0, -1.0, -1.0, 4.0],
    ]) / 6.0


def local_mass(d, h):
    """Element mass matrix for a cube of side h."""
    if d == 1:
        return h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    return h * h / 36.0 * np.array([
        [4.0, 2.0, 2.0, 1.0],
        [2.0, 4.0, 1.0, 2.0],
        [2.0, 1.0, 4.0, 2.0],
        [1.0, 2.0, 2.0, 4.0],
    ])


def local_corner_basis(d, r):
    """Values of the 2**d corner shape functions of the unit cell at the
    nodes of an r x r sub-grid, shape ((r+1)**d, 2**d), lexicographic."""
    x = np.linspace(0.0, 1.0, r + 1)
    if d == 1:
        return np.stack([1.0 - x, x], axis=1)
    fx = np.stack([1.0 - x, x], axis=1)           # (r+1, 2)
    vals = np.einsum("ya,xb->yxab", fx, fx)        # y factor a, x factor b
    # corner order (0,0),(1,0),(0,1),(1,1): x index fastest
    out = np.empty(((r + 1) ** 2, 4))
    out[:, 0] = vals[:, :, 0, 0].ravel()
    out[:, 1] = vals[:, :, 0, 1].ravel()
    out[:, 2] = vals[:, :, 1, 0].ravel()
    out[:, 3] = vals[:, :, 1, 1].ravel()
    return out


def scatter_matrix(corner_nodes, local_mat, n_nodes, weights=None):
    """Assemble sum_e w_e * scatter(local_mat) into an (n_nodes, n_nodes) CSR."""
    n_el, m = corner_nodes.shape
    rows = np.repeat(corner_nodes, m, axis=1).ravel()
    cols = np.tile(corner_nodes, (1, m)).ravel()
    if weights is None:
        data = np.tile(local_mat.ravel(), n_el)
    else:
        data = (np.asarray(weights)[:, None, None] * local_mat[None, :, :]).ravel()
    mat = sparse.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))
    return mat.tocsr()


class AssembledOperator:
    """A mass or stiffness matrix over the free nodes of one grid level."""

    def __init__(self, level, kind, matrix, coefficient_id=None):
        self.level = level
        self.kind = kind
        self.matrix = matrix
        self.coefficient_id = coefficient_id

    @property
    def shape(self):
        return self.matrix.shape


def _coefficient_values(grid, level, coeff):
    values = np.asarray(coeff.values if hasattr(coeff, "values") else coeff,
                        dtype=float)
    n_el = grid.n_elements(level)
    if values.size == n_el:
        return values
    if level == "coarse" and values.size == grid.n_elements("fine"):
        # diagnostic path: average the fine snapshot per coarse element
        r = grid.refinement
        if grid.d == 1:
            return values.reshape(grid.n_coarse, r).mean(axis=1)
        v = values.reshape(grid.n_fine, grid.n_fine)
        return v.reshape(grid.n_coarse, r, grid.n_coarse, r).mean(axis=(1, 3)).ravel()
    raise ValueError("coefficient has %d values, expected %d per-%s-element"
                     % (values.size, n_el, level))


def assemble_stiffness(grid, level, coeff):
    """Weighted stiffness matrix over free nodes, coefficient piecewise
    constant per element at the given level."""
    values = _coefficient_values(grid, level, coeff)
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise ValueError("stiffness coefficient must be positive and finite")
    full = scatter_matrix(grid.element_corner_nodes(level),
                          local_stiffness(grid.d, grid.width(level)),
                          grid.n_nodes(level), weights=values)
    free = grid.free_nodes(level)
    coeff_id = getattr(coeff, "value_hash", None)
    if coeff_id is None:
        coeff_id = hashlib.sha1(np.ascontiguousarray(values).tobytes()).hexdigest()
    return AssembledOperator(level, "stiffness", full[free][:, free].tocsc(),
                             coefficient_id=coeff_id)


def assemble_mass(grid, level):
    """Consistent mass matrix over free nodes."""
    full = scatter_matrix(grid.element_corner_nodes(level),
                          local_mass(grid.d, grid.width(level)),
                          grid.n_nodes(level))
    free = grid.free_nodes(level)
    return AssembledOperator(level, "mass", full[free][:, free].tocsc(),
                             coefficient_id="identity")


def assemble_mass_full(grid, level):
    """Mass matrix over all nodes (boundary included), used for load vectors."""
    return scatter_matrix(grid.element_corner_nodes(level),
                          local_mass(grid.d, grid.width(level)),
                          grid.n_nodes(level))


def _prolongation_1d(n_coarse, r):
    n_fine = n_coarse * r
    p = np.arange(n_fine + 1)
    j = np.arange(n_coarse + 1)
    dist = np.abs(p[:, None] - j[None, :] * r)
    vals = np.maximum(0.0, 1.0 - dist / r)
    return sparse.csr_matrix(vals)


def prolongation_full(grid):
    """Nodal interpolation of coarse hat functions on the fine grid, all nodes."""
    p1 = _prolongation_1d(grid.n_coarse, grid.refinement)
    if grid.d == 1:
        return p1.tocsr()
    return sparse.kron(p1, p1, format="csr")


def prolongation(grid):
    """Prolongation from free coarse nodes to free fine nodes."""
    full = prolongation_full(grid)
    return full[grid.free_nodes("fine")][:, grid.free_nodes("coarse")].tocsr()


class InterpolationOperator:
    """Quasi-interpolation from fine to coarse free nodes: element-wise L2
    projection onto the coarse space followed by averaging of the nodal
    values over the elements sharing each node."""

    def __init__(self, matrix):
        self.matrix = matrix

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, v):
        return self.matrix @ v


def quasi_interpolation_full(grid):
    """Quasi-interpolation matrix over all nodes (rows: coarse, cols: fine)."""
    d, r = grid.d, grid.refinement
    nc = grid.n_coarse
    corner_vals = local_corner_basis(d, r)                 # ((r+1)^d, 2^d)
    mass_c = local_mass(d, grid.H)                         # (2^d, 2^d)
    # fine mass on one coarse cell, assembled from the r^d fine sub-cells
    sub = GridCellHelper(d, r)
    mass_f = scatter_matrix(sub.corner_nodes, local_mass(d, grid.h),
                            sub.n_nodes)
    proj = np.linalg.solve(mass_c, corner_vals.T @ mass_f.toarray())  # (2^d, (r+1)^d)

    corners_c = grid.element_corner_nodes("coarse")        # (n_T, 2^d)
    share = np.zeros(grid.n_nodes("coarse"))
    np.add.at(share, corners_c.ravel(), 1.0)

    # fine node ids inside each coarse element, matching sub-grid ordering
    n_fine = grid.n_fine
    if d == 1:
        base = np.arange(nc) * r
        fine_ids = base[:, None] + np.arange(r + 1)[None, :]
    else:
        ex, ey = np.meshgrid(np.arange(nc), np.arange(nc), indexing="xy")
        bx = (ex * r).ravel()
        by = (ey * r).ravel()
        ox, oy = np.meshgrid(np.arange(r + 1), np.arange(r + 1), indexing="xy")
        off = (oy * (n_fine + 1) + ox).ravel()
        fine_ids = (by * (n_fine + 1) + bx)[:, None] + off[None, :]

    m_loc = proj.shape[1]
    rows = np.repeat(corners_c, m_loc, axis=1).ravel()
    cols = np.repeat(fine_ids[:, None, :], proj.shape[0], axis=1).ravel()
    weights = (1.0 / share[corners_c])[:, :, None] * proj[None, :, :]
    mat = sparse.coo_matrix((weights.ravel(), (rows, cols)),
                            shape=(grid.n_nodes("coarse"), grid.n_nodes("fine")))
    return mat.tocsr()


class GridCellHelper:
    """Corner-node indexing of an r^d sub-grid of one cell."""

    def __init__(self, d, r):
        self.d = d
        self.r = r
        if d == 1:
            base = np.arange(r)
            self.corner_nodes = np.stack([base, base + 1], axis=1)
            self.n_nodes = r + 1
        else:
            npn = r + 1
            ex, ey = np.meshgrid(np.arange(r), np.arange(r), indexing="xy")
            p00 = (ey * npn + ex).ravel()
            self.corner_nodes = np.stack(
                [p00, p00 + 1, p00 + npn, p00 + npn + 1], axis=1)
            self.n_nodes = npn * npn


def quasi_interpolation(grid):
    """Quasi-interpolation restricted to free fine columns / free coarse rows."""
    full = quasi_interpolation_full(grid)
    mat = full[grid.free_nodes("coarse")][:, grid.free_nodes("fine")].tocsr()
    return InterpolationOperator(mat)


def load_vector(grid, level, f, t):
    """Load vector over free nodes of the requested level.

    The right-hand side is nodally interpolated on the fine grid, so
    discontinuities inside fine elements are captured at fine resolution;
    the coarse load is the prolongation transpose of the fine load.
    """
    coords = grid.node_coordinates("fine")
    nodal = np.asarray(f(t, coords), dtype=float)
    if nodal.shape != (coords.shape[0],):
        raise ValueError("right-hand side evaluator returned shape %r"
                         % (nodal.shape,))
    full_load = assemble_mass_full(grid, "fine") @ nodal
    fine_free = full_load[grid.free_nodes("fine")]
    if level == "fine":
        return fine_free
    if level == "coarse":
        return prolongation(grid).T @ fine_free
    raise ValueError("level must be 'coarse' or 'fine', got %r" % (level,))
