"""Nested uniform tensor-product grids on the unit box.

Two levels (coarse/fine) with power-of-two element counts per axis, the
fine grid refining the coarse one.  Elements and nodes are numbered
lexicographically with the x-coordinate running fastest; this ordering is
fixed so that assembled matrices and dumped arrays are reproducible.
"""

import numpy as np


class GridError(ValueError):
    pass


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


class GridHierarchy:
    """A coarse grid of ``2**coarse_exp`` and a fine grid of ``2**fine_exp``
    elements per axis on [0,1]^d, d in {1, 2}."""

    def __init__(self, coarse_exp, fine_exp, d=2):
        if d not in (1, 2):
            raise GridError("only d=1 and d=2 are supported, got d=%r" % (d,))
        if coarse_exp < 1:
            raise GridError("coarse_exp must be >= 1, got %r" % (coarse_exp,))
        if fine_exp <= coarse_exp:
            raise GridError(
                "fine grid must be a strict refinement of the coarse grid "
                "(fine_exp=%r <= coarse_exp=%r)" % (fine_exp, coarse_exp))
        self.d = d
        self.coarse_exp = int(coarse_exp)
        self.fine_exp = int(fine_exp)
        self.n_coarse = 2 ** self.coarse_exp
        self.n_fine = 2 ** self.fine_exp
        self.refinement = self.n_fine // self.n_coarse
        assert _is_power_of_two(self.n_coarse) and _is_power_of_two(self.n_fine)
        assert self.n_fine == self.refinement * self.n_coarse

    @property
    def H(self):
        return 1.0 / self.n_coarse

    @property
    def h(self):
        return 1.0 / self.n_fine

    def n_per_axis(self, level):
        if level == "coarse":
            return self.n_coarse
        if level == "fine":
            return self.n_fine
        raise GridError("level must be 'coarse' or 'fine', got %r" % (level,))

    def width(self, level):
        return 1.0 / self.n_per_axis(level)

    def n_elements(self, level):
        return self.n_per_axis(level) ** self.d

    def n_nodes(self, level):
        return (self.n_per_axis(level) + 1) ** self.d

    def element_multi_index(self, level, elements):
        """(x, y, ...) integer coordinates of element indices, x fastest."""
        n = self.n_per_axis(level)
        elements = np.asarray(elements)
        if self.d == 1:
            return np.stack([elements], axis=-1)
        return np.stack([elements % n, elements // n], axis=-1)

    def element_index(self, level, multi):
        n = self.n_per_axis(level)
        multi = np.asarray(multi)
        if self.d == 1:
            return multi[..., 0]
        return multi[..., 1] * n + multi[..., 0]

    def element_corner_nodes(self, level):
        """(n_elements, 2**d) node indices of every element, local corner
        order lexicographic ((0,0),(1,0),(0,1),(1,1) in 2D)."""
        n = self.n_per_axis(level)
        if self.d == 1:
            base = np.arange(n)
            return np.stack([base, base + 1], axis=1)
        npn = n + 1
        ex, ey = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        p00 = (ey * npn + ex).ravel()
        return np.stack([p00, p00 + 1, p00 + npn, p00 + npn + 1], axis=1)

    def node_coordinates(self, level):
        n = self.n_per_axis(level)
        axis = np.linspace(0.0, 1.0, n + 1)
        if self.d == 1:
            return axis[:, None]
        x, y = np.meshgrid(axis, axis, indexing="xy")
        return np.stack([x.ravel(), y.ravel()], axis=1)

    def element_midpoints(self, level):
        n = self.n_per_axis(level)
        axis = (np.arange(n) + 0.5) / n
        if self.d == 1:
            return axis[:, None]
        x, y = np.meshgrid(axis, axis, indexing="xy")
        return np.stack([x.ravel(), y.ravel()], axis=1)

    def boundary_node_mask(self, level):
        n = self.n_per_axis(level)
        axis = np.arange(n + 1)
        on_bd = (axis == 0) | (axis == n)
        if self.d == 1:
            return on_bd
        return (on_bd[None, :] | on_bd[:, None]).ravel()

    def free_nodes(self, level):
        """Indices of non-Dirichlet (interior) nodes, ascending."""
        return np.nonzero(~self.boundary_node_mask(level))[0]

    def free_node_map(self, level):
        """Full-length array mapping node index -> free index, -1 on the boundary."""
        mask = self.boundary_node_mask(level)
        out = -np.ones(mask.size, dtype=np.int64)
        out[~mask] = np.arange(np.count_nonzero(~mask))
        return out

    def fine_elements_of_coarse(self, K):
        """Fine element indices contained in coarse element K, lexicographic."""
        r = self.refinement
        mi = self.element_multi_index("coarse", K)
        if self.d == 1:
            return mi[0] * r + np.arange(r)
        fx = mi[0] * r + np.arange(r)
        fy = mi[1] * r + np.arange(r)
        gx, gy = np.meshgrid(fx, fy, indexing="xy")
        return (gy * self.n_fine + gx).ravel()


class Patch:
    """Axis-aligned box of coarse elements within ``k`` layers of a center
    element, clipped to the domain, together with its fine-grid index sets.

    ``free_fine_nodes`` are the fine nodes strictly inside the patch box;
    fine-grid hat functions at exactly these nodes are supported in the
    patch and vanish on its boundary (and on the domain boundary).
    """

    def __init__(self, grid, center_element, k):
        if k < 0:
            raise GridError("patch radius must be >= 0, got %r" % (k,))
        n = grid.n_coarse
        if not (0 <= center_element < grid.n_elements("coarse")):
            raise GridError("coarse element %r out of range" % (center_element,))
        self.grid = grid
        self.center_element = int(center_element)
        self.k = int(k)

        mi = grid.element_multi_index("coarse", center_element)
        lo = np.maximum(mi - k, 0)
        hi = np.minimum(mi + k, n - 1)
        self.lo = lo
        self.hi = hi

        if grid.d == 1:
            self.coarse_elements = np.arange(lo[0], hi[0] + 1)
        else:
            cx = np.arange(lo[0], hi[0] + 1)
            cy = np.arange(lo[1], hi[1] + 1)
            gx, gy = np.meshgrid(cx, cy, indexing="xy")
            self.coarse_elements = (gy * n + gx).ravel()

        r = grid.refinement
        nf = grid.n_fine
        flo = lo * r
        fhi = (hi + 1) * r  # exclusive, in fine-element coordinates
        self.fine_lo = flo
        self.fine_hi = fhi

        if grid.d == 1:
            self.fine_elements = np.arange(flo[0], fhi[0])
            self.fine_nodes = np.arange(flo[0], fhi[0] + 1)
            self.free_fine_nodes = np.arange(flo[0] + 1, fhi[0])
        else:
            fx = np.arange(flo[0], fhi[0])
            fy = np.arange(flo[1], fhi[1])
            gx, gy = np.meshgrid(fx, fy, indexing="xy")
            self.fine_elements = (gy * nf + gx).ravel()
            nx = np.arange(flo[0], fhi[0] + 1)
            ny = np.arange(flo[1], fhi[1] + 1)
            gx, gy = np.meshgrid(nx, ny, indexing="xy")
            self.fine_nodes = (gy * (nf + 1) + gx).ravel()
            ix = np.arange(flo[0] + 1, fhi[0])
            iy = np.arange(flo[1] + 1, fhi[1])
            gx, gy = np.meshgrid(ix, iy, indexing="xy")
            self.free_fine_nodes = (gy * (nf + 1) + gx).ravel()

        # local lexicographic index <-> global index maps
        self.local_to_global_nodes = self.fine_nodes
        self.local_to_global_elements = self.fine_elements

    @property
    def node_shape(self):
        """Patch node grid extents per axis (number of nodes)."""
        return tuple(int(h - l + 1) for l, h in zip(self.fine_lo, self.fine_hi))

    @property
    def free_shape(self):
        return tuple(int(h - l - 1) for l, h in zip(self.fine_lo, self.fine_hi))

    def local_node_index(self, global_nodes):
        """Map global fine node indices into local patch-node numbering."""
        nf = self.grid.n_fine
        g = np.asarray(global_nodes)
        if self.grid.d == 1:
            return g - self.fine_lo[0]
        gx = g % (nf + 1)
        gy = g // (nf + 1)
        w = self.node_shape[0]
        return (gy - self.fine_lo[1]) * w + (gx - self.fine_lo[0])

    def local_free_index(self):
        """Local patch-node index -> local free index (-1 on patch boundary)."""
        shape = self.node_shape
        if self.grid.d == 1:
            mask = np.zeros(shape[0], dtype=bool)
            mask[1:-1] = True
        else:
            m2 = np.zeros((shape[1], shape[0]), dtype=bool)
            m2[1:-1, 1:-1] = True
            mask = m2.ravel()
        out = -np.ones(mask.size, dtype=np.int64)
        out[mask] = np.arange(np.count_nonzero(mask))
        return out


def build_hierarchy(coarse_exp, fine_exp, d=2):
    """Construct the nested coarse/fine grid pair."""
    return GridHierarchy(coarse_exp, fine_exp, d=d)


def patch(grid, center_element, k):
    """The patch of ``k`` coarse layers around a coarse element."""
    return Patch(grid, center_element, k)
