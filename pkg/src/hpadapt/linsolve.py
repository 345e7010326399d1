"""Preconditioned conjugate gradients with an entity-block Jacobi preconditioner."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DEFAULT_RTOL = 1e-10


class SolverError(RuntimeError):
    pass


@dataclass
class BlockJacobiPreconditioner:
    """Block-diagonal inverse of ``A`` over a partition of the unknowns.

    ``blocks`` holds ``(indices, cholesky factor)`` pairs; ``inverse`` is the
    assembled block-diagonal inverse used for application.
    """

    blocks: list
    inverse: sp.csr_matrix

    def __call__(self, r):
        return self.inverse @ r

    @property
    def block_sizes(self):
        return [len(idx) for idx, _ in self.blocks]


def block_jacobi(A, blocks):
    """Factor the principal submatrices of ``A`` on ``blocks``.

    Blocks of equal size are extracted and factored together.
    """
    A = sp.coo_matrix(A)
    n = A.shape[0]
    blocks = [np.asarray(idx, dtype=int) for idx in blocks if len(idx)]
    owner = -np.ones(n, dtype=int)
    slot = np.zeros(n, dtype=int)
    for b, idx in enumerate(blocks):
        if np.any(owner[idx] >= 0):
            raise SolverError("preconditioner blocks overlap")
        owner[idx] = b
        slot[idx] = np.arange(len(idx))
    if np.any(owner < 0):
        raise SolverError("preconditioner blocks do not cover the unknowns")

    keep = owner[A.row] == owner[A.col]
    er, ec, ev = A.row[keep], A.col[keep], A.data[keep]
    sizes = np.array([len(idx) for idx in blocks])
    factored = [None] * len(blocks)
    rows, cols, data = [], [], []
    for s in np.unique(sizes):
        members = np.flatnonzero(sizes == s)
        batch_pos = -np.ones(len(blocks), dtype=int)
        batch_pos[members] = np.arange(len(members))
        dense = np.zeros((len(members), s, s))
        sel = sizes[owner[er]] == s
        np.add.at(dense, (batch_pos[owner[er[sel]]], slot[er[sel]], slot[ec[sel]]), ev[sel])
        try:
            L = np.linalg.cholesky(dense)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"a block of size {s} is not positive definite") from exc
        Linv = np.linalg.inv(L)
        inv = np.einsum("bki,bkj->bij", Linv, Linv)
        idx = np.array([blocks[m] for m in members])
        for m, fac in zip(members, L):
            factored[m] = (blocks[m], fac)
        rows.append(np.repeat(idx, s, axis=1).ravel())
        cols.append(np.tile(idx, (1, s)).ravel())
        data.append(inv.ravel())
    inverse = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n)).tocsr()
    return BlockJacobiPreconditioner(factored, inverse)


def build_preconditioner(system, space):
    """One block per vertex, edge and element interior, restricted to free DOFs."""
    position = -np.ones(space.n_dof, dtype=int)
    position[system.free_dofs] = np.arange(len(system.free_dofs))
    blocks = []
    for dofs in space.entity_blocks():
        local = position[dofs]
        local = local[local >= 0]
        if len(local):
            blocks.append(local)
    return block_jacobi(system.matrix, blocks)


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    relative_residual: float
    converged: bool

    def __iter__(self):
        return iter((self.x, self.iterations, self.relative_residual))


def pcg(A, b, precond=None, rel_tol=DEFAULT_RTOL, max_iter=None, x0=None, callback=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops when ``||b - A x|| <= rel_tol ||b||`` or after ``max_iter``
    iterations (default ``10 n + 100``).  Raises :class:`SolverError` on
    non-positive curvature.  ``callback(k, x)`` is called after every update.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    b = np.asarray(b, dtype=float)
    n = len(b)
    if max_iter is None:
        max_iter = 10 * n + 100
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return PcgResult(np.zeros(n), 0, 0.0, True)
    apply = precond if precond is not None else (lambda r: r)

    r = b - A @ x
    rnorm = np.linalg.norm(r)
    k = 0
    if rnorm <= rel_tol * bnorm:
        return PcgResult(x, 0, float(rnorm / bnorm), True)
    z = apply(r)
    d = z.copy()
    rz = r @ z
    while k < max_iter:
        Ad = A @ d
        curv = d @ Ad
        if not curv > 0.0:
            raise SolverError(f"non-positive curvature {curv:.3e} at iteration {k}")
        step = rz / curv
        x += step * d
        r -= step * Ad
        k += 1
        if callback is not None:
            callback(k, x)
        rnorm = np.linalg.norm(r)
        if rnorm <= rel_tol * bnorm:
            # guard against drift of the recursive residual
            rnorm = np.linalg.norm(b - A @ x)
            if rnorm <= rel_tol * bnorm:
                break
            r = b - A @ x
        z = apply(r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    rel = float(rnorm / bnorm)
    return PcgResult(x, k, rel, bool(rel <= rel_tol))


def solve(system, space, rel_tol=DEFAULT_RTOL, max_iter=None):
    """PCG on a reduced system with the entity-block preconditioner."""
    if system.n == 0:
        return PcgResult(np.zeros(0), 0, 0.0, True)
    M = build_preconditioner(system, space)
    return pcg(system.matrix, system.rhs, M, rel_tol=rel_tol, max_iter=max_iter)
