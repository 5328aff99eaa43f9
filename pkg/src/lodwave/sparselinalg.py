"""Sparse direct solves and small dense generalized eigensolves.

All solvers carry explicit accuracy contracts expressed as residual
bounds; a solve that cannot meet its bound raises instead of returning a
silently inaccurate answer.  Backed by SuperLU factorizations (scipy);
everything is single-threaded and deterministic for fixed inputs.
"""

import numpy as np
import scipy.linalg as dense_linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

SOLVE_RTOL = 1e-10
SADDLE_CONSTRAINT_RTOL = 1e-9
SADDLE_CONSTRAINT_ATOL = 1e-12


class SingularMatrixError(RuntimeError):
    pass


class SolveAccuracyError(RuntimeError):
    pass


class RankDeficientConstraintError(RuntimeError):
    def __init__(self, row, label=None):
        self.row = row
        self.label = label if label is not None else row
        super().__init__(
            "constraint matrix is rank deficient; offending row %r (coarse node %r)"
            % (row, self.label))


class IndefiniteMatrixError(RuntimeError):
    pass


def _as_csc(a):
    if sparse.issparse(a):
        return a.tocsc()
    return sparse.csc_matrix(np.asarray(a, dtype=float))


def _lu(a):
    try:
        return sparse_linalg.splu(a)
    except RuntimeError as exc:
        if "singular" in str(exc).lower():
            raise SingularMatrixError(str(exc)) from exc
        raise


def solve(a, b):
    """Direct solve of a square nonsingular sparse system.

    Guarantees relative residual ||Ax - b||_2 / ||b||_2 <= 1e-10 for b != 0
    (one step of iterative refinement is attempted before giving up).
    """
    a = _as_csc(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square, got shape %r" % (a.shape,))
    b = np.asarray(b, dtype=float)
    lu = _lu(a)
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("factorization produced non-finite values")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    res = np.linalg.norm(a @ x - b) / bnorm
    if res > SOLVE_RTOL:
        x = x + lu.solve(b - a @ x)
        res = np.linalg.norm(a @ x - b) / bnorm
        if res > SOLVE_RTOL:
            raise SolveAccuracyError(
                "relative residual %.3e exceeds %.1e" % (res, SOLVE_RTOL))
    return x


def check_constraint_residual(c, x):
    """Enforce the saddle solve constraint contract ||Cx||_inf small."""
    cx = np.abs(c @ x)
    bound = SADDLE_CONSTRAINT_RTOL * max(np.max(np.abs(x)), 0.0) \
        + SADDLE_CONSTRAINT_ATOL
    worst = float(np.max(cx)) if cx.size else 0.0
    if worst > bound:
        raise SolveAccuracyError(
            "constraint residual %.3e exceeds bound %.3e" % (worst, bound))


def _diagnose_rank(c, row_labels):
    ct = np.asarray(c.todense() if sparse.issparse(c) else c, dtype=float).T
    _, r, piv = dense_linalg.qr(ct, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(ct.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < c.shape[0]:
        row = int(piv[rank])
        label = row_labels[row] if row_labels is not None else None
        raise RankDeficientConstraintError(row, label)


def solve_saddle(a, c, b, row_labels=None):
    """Solve  A x + C^T mu = b,  C x = 0  via one KKT factorization.

    ``a`` must be SPD on the free nodes and ``c`` of full row rank; ``b``
    may have several columns (one factorization, many right-hand sides).
    The returned x satisfies ||Cx||_inf <= 1e-9 ||x||_inf + 1e-12.
    """
    a = _as_csc(a)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    c = _as_csc(c) if c is not None else sparse.csc_matrix((0, n))
    m = c.shape[0]
    if c.shape[1] != n:
        raise ValueError("constraint matrix has %d columns, expected %d"
                         % (c.shape[1], n))
    if m == 0:
        return solve(a, b)

    single = b.ndim == 1
    rhs = b[:, None] if single else b
    kkt = sparse.bmat([[a, c.T], [c, None]], format="csc")
    full_rhs = np.vstack([rhs, np.zeros((m, rhs.shape[1]))])
    try:
        lu = _lu(kkt)
        sol = lu.solve(full_rhs)
    except SingularMatrixError:
        _diagnose_rank(c, row_labels)
        raise
    x = sol[:n]
    if not np.all(np.isfinite(x)):
        _diagnose_rank(c, row_labels)
        raise SingularMatrixError("saddle solve produced non-finite values")
    # refine once if the KKT residual is loose, then enforce the contract
    resid = full_rhs - kkt @ sol
    scale = max(np.max(np.abs(rhs)), 1e-300)
    if np.max(np.abs(resid)) > 1e-11 * scale:
        sol = sol + lu.solve(resid)
        x = sol[:n]
    try:
        check_constraint_residual(c, x)
    except SolveAccuracyError:
        _diagnose_rank(c, row_labels)
        raise
    return x[:, 0] if single else x


def _deflation_basis(n, deflation):
    """Orthonormal basis of the complement of the deflated subspace."""
    if deflation is None:
        return np.eye(n)
    defl = np.atleast_2d(np.asarray(deflation, dtype=float))
    if defl.shape[0] == n and defl.shape[1] != n:
        defl = defl.T
    q, _ = np.linalg.qr(np.concatenate([defl.T, np.eye(n)], axis=1))
    # columns of q beyond the deflation span the complement
    k = np.linalg.matrix_rank(defl)
    return q[:, k:]


def max_generalized_eig(b, g, deflation=None):
    """Largest gamma with B c = gamma G c on the complement of ``deflation``.

    Both matrices are small, dense, symmetric PSD; ``deflation`` spans the
    null space of G (for gradient-based forms: the constants).  Returns 0
    when B vanishes or the complement is trivial.
    """
    b = np.asarray(b, dtype=float)
    g = np.asarray(g, dtype=float)
    n = b.shape[0]
    u = _deflation_basis(n, deflation)
    if u.shape[1] == 0:
        return 0.0
    br = u.T @ b @ u
    gr = u.T @ g @ u
    gnorm = np.linalg.norm(gr)
    if gnorm == 0.0:
        if np.linalg.norm(br) == 0.0:
            return 0.0
        raise IndefiniteMatrixError("G vanishes on the complement but B does not")
    if np.min(np.linalg.eigvalsh(gr)) < -1e-10 * gnorm:
        raise IndefiniteMatrixError("G is indefinite beyond tolerance")
    if np.linalg.norm(br) == 0.0:
        return 0.0
    vals = dense_linalg.eigh(br, gr, eigvals_only=True)
    return float(vals[-1])


def max_generalized_eig_batched(bs, g, deflation=None):
    """Vectorized version of :func:`max_generalized_eig` for a stack of B
    matrices sharing one G; used by the per-element error indicator."""
    bs = np.asarray(bs, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    u = _deflation_basis(n, deflation)
    if u.shape[1] == 0 or bs.shape[0] == 0:
        return np.zeros(bs.shape[0])
    gr = u.T @ g @ u
    gnorm = np.linalg.norm(gr)
    if gnorm == 0.0:
        raise IndefiniteMatrixError("G vanishes on the complement")
    if np.min(np.linalg.eigvalsh(gr)) < -1e-10 * gnorm:
        raise IndefiniteMatrixError("G is indefinite beyond tolerance")
    chol = np.linalg.cholesky(gr)
    brs = np.einsum("pi,bpq,qj->bij", u, bs, u)
    nb, k = brs.shape[0], u.shape[1]

    def batched_lower_solve(stack):
        # solve L Y = stack[b] for every batch entry
        rhs = stack.transpose(1, 0, 2).reshape(k, nb * k)
        sol = dense_linalg.solve_triangular(chol, rhs, lower=True)
        return sol.reshape(k, nb, k).transpose(1, 0, 2)

    y = batched_lower_solve(brs)                       # L^-1 B
    c = batched_lower_solve(y.transpose(0, 2, 1))      # L^-1 B^T L^-T = L^-1 B L^-T
    sym = 0.5 * (c + c.transpose(0, 2, 1))
    return np.linalg.eigvalsh(sym)[:, -1]
