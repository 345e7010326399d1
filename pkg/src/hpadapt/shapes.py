"""Hierarchical shape functions on the reference triangle.

Reference vertices are ``(0, 0)``, ``(1, 0)``, ``(0, 1)`` with barycentric
coordinates ``l0 = 1 - xi - eta``, ``l1 = xi``, ``l2 = eta``.  Local edge ``j``
is the edge opposite vertex ``j``: edge 0 = (v1, v2), edge 1 = (v2, v0),
edge 2 = (v0, v1).

With the scaled Legendre polynomials ``Q_k(s, t) = t^k P_k(s / t)`` the
family is

* vertex functions ``l_i``;
* edge functions ``l_a l_b Q_k(l_b - l_a, l_a + l_b)``, ``k = 0..q-2``, where
  ``a`` is the endpoint with the smaller *global* vertex index, so both
  elements sharing an edge produce the same trace ``t (1 - t) P_k(2 t - 1)``;
* bubbles ``l0 l1 l2 D_ij`` with ``D_ij = Q_i(l1 - l0, l0 + l1)
  P_j^(2i+1, 0)(2 l2 - 1)`` the Dubiner polynomials, ``i + j <= p - 3``.

Every function is returned with its value, reference gradient and reference
Hessian, which the estimator needs for the exact Laplacian.
"""
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi

# gradients of l0, l1, l2 with respect to (xi, eta)
BARY_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# local vertex pairs of the local edges, in local orientation
EDGE_VERTS = ((1, 2), (2, 0), (0, 1))

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def n_interior(p):
    """Number of bubble functions of a degree-``p`` element."""
    return (p - 1) * (p - 2) // 2


def n_local(p, edge_degrees):
    return 3 + sum(q - 1 for q in edge_degrees) + n_interior(p)


def legendre_table(n, s):
    """Legendre polynomials ``P_0..P_n`` with first and second derivatives.

    Returns three arrays of shape ``(n + 1,) + s.shape``.
    """
    s = np.asarray(s, dtype=float)
    P = np.zeros((n + 1,) + s.shape)
    dP = np.zeros_like(P)
    d2P = np.zeros_like(P)
    P[0] = 1.0
    if n >= 1:
        P[1] = s
        dP[1] = 1.0
    for k in range(1, n):
        # Bonnet recursion, differentiated twice
        P[k + 1] = ((2 * k + 1) * s * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k]
        d2P[k + 1] = d2P[k - 1] + (2 * k + 1) * dP[k]
    return P, dP, d2P


def scaled_legendre(n, s, cs, t, ct):
    """``Q_0..Q_n`` at affine arguments ``s, t`` (gradients ``cs, ct``).

    Returns values ``(n+1, m)``, gradients ``(n+1, m, 2)`` and Hessians
    ``(n+1, m, 2, 2)`` with respect to the reference coordinates.
    """
    m = s.shape[0]
    Q = np.zeros((n + 1, m))
    Qs, Qt = np.zeros_like(Q), np.zeros_like(Q)
    Qss, Qst, Qtt = np.zeros_like(Q), np.zeros_like(Q), np.zeros_like(Q)
    Q[0] = 1.0
    if n >= 1:
        Q[1] = s
        Qs[1] = 1.0
    for k in range(1, n):
        a, b = (2 * k + 1) / (k + 1), k / (k + 1)
        t2 = t * t
        Q[k + 1] = a * s * Q[k] - b * t2 * Q[k - 1]
        Qs[k + 1] = a * (Q[k] + s * Qs[k]) - b * t2 * Qs[k - 1]
        Qt[k + 1] = a * s * Qt[k] - b * (2 * t * Q[k - 1] + t2 * Qt[k - 1])
        Qss[k + 1] = a * (2 * Qs[k] + s * Qss[k]) - b * t2 * Qss[k - 1]
        Qst[k + 1] = a * (Qt[k] + s * Qst[k]) - b * (2 * t * Qs[k - 1] + t2 * Qst[k - 1])
        Qtt[k + 1] = a * s * Qtt[k] - b * (2 * Q[k - 1] + 4 * t * Qt[k - 1] + t2 * Qtt[k - 1])
    grad = Qs[..., None] * cs + Qt[..., None] * ct
    hess = (Qss[..., None, None] * np.outer(cs, cs)
            + Qst[..., None, None] * (np.outer(cs, ct) + np.outer(ct, cs))
            + Qtt[..., None, None] * np.outer(ct, ct))
    return Q, grad, hess


def jacobi_table(n, alpha, x, cx):
    """``P_j^(alpha, 0)(x)``, ``j = 0..n``, with reference gradients and Hessians."""
    j = np.arange(n + 1)[:, None]
    val = eval_jacobi(j, alpha, 0.0, x)
    d1 = np.where(j >= 1, 0.5 * (j + alpha + 1) * eval_jacobi(np.maximum(j - 1, 0), alpha + 1, 1.0, x), 0.0)
    d2 = np.where(j >= 2, 0.25 * (j + alpha + 1) * (j + alpha + 2)
                  * eval_jacobi(np.maximum(j - 2, 0), alpha + 2, 2.0, x), 0.0)
    return val, d1[..., None] * cx, d2[..., None, None] * np.outer(cx, cx)


def _product(factors):
    """Value, gradient and Hessian of a product of factors ``(f, grad, hess)``.

    Factors broadcast against each other, so one factor may carry a leading
    family axis (shape ``(k, n)``) while the others are single functions.
    """
    vals = [f for f, _, _ in factors]
    m = len(factors)
    # prefix[i] = f_0 ... f_{i-1}, suffix[i] = f_i ... f_{m-1}
    prefix = [None] * (m + 1)
    suffix = [None] * (m + 1)
    prefix[0] = suffix[m] = 1.0
    for i in range(m):
        prefix[i + 1] = prefix[i] * vals[i]
        suffix[m - 1 - i] = suffix[m - i] * vals[m - 1 - i]
    value = prefix[m]
    grad = np.zeros(value.shape + (2,))
    hess = np.zeros(value.shape + (2, 2))

    for i, (_, gi, hi) in enumerate(factors):
        ri = prefix[i] * suffix[i + 1]
        grad = grad + np.asarray(ri)[..., None] * gi
        hess = hess + np.asarray(ri)[..., None, None] * hi
        for k in range(i + 1, m):
            gk = factors[k][1]
            rik = prefix[i] * suffix[k + 1]
            for j in range(i + 1, k):
                rik = rik * vals[j]
            outer = gi[..., :, None] * gk[..., None, :]
            hess = hess + np.asarray(rik)[..., None, None] * (outer + np.swapaxes(outer, -1, -2))
    return value, grad, hess


def _linear(l, c):
    n = l.shape[0]
    return (l, np.broadcast_to(c, (n, 2)), np.zeros((n, 2, 2)))


def _dubiner(n, lam):
    """Dubiner polynomials of total degree ``<= n`` as ``(f, grad, hess)`` triples."""
    s = lam[1] - lam[0]
    t = lam[0] + lam[1]
    Q, Qg, Qh = scaled_legendre(n, s, BARY_GRAD[1] - BARY_GRAD[0], t, BARY_GRAD[0] + BARY_GRAD[1])
    x = 2.0 * lam[2] - 1.0
    # all j for one i at once: families[i][t][j]
    families = [_product([(Q[i], Qg[i], Qh[i]), jacobi_table(n - i, 2 * i + 1, x, 2.0 * BARY_GRAD[2])])
                for i in range(n + 1)]
    return [tuple(families[i][t][total - i] for t in range(3))
            for total in range(n + 1) for i in range(total + 1)]


def _reference_basis(p, edge_degrees, edge_flips, points):
    """Evaluate the local basis at ``points`` (shape ``(n, 2)``).

    ``edge_flips[j]`` is True when the global orientation of local edge ``j``
    is opposite to its local orientation ``EDGE_VERTS[j]``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi, eta = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta])
    n = len(xi)
    vals, grads, hesses = [], [], []

    for i in range(3):
        vals.append(lam[i])
        grads.append(np.broadcast_to(BARY_GRAD[i], (n, 2)))
        hesses.append(np.zeros((n, 2, 2)))

    for j in range(3):
        q = edge_degrees[j]
        if q < 2:
            continue
        a, b = EDGE_VERTS[j]
        if edge_flips[j]:
            a, b = b, a
        Q, Qg, Qh = scaled_legendre(q - 2, lam[b] - lam[a], BARY_GRAD[b] - BARY_GRAD[a],
                                    lam[a] + lam[b], BARY_GRAD[a] + BARY_GRAD[b])
        v, g, h = _product([_linear(lam[a], BARY_GRAD[a]), _linear(lam[b], BARY_GRAD[b]),
                            (Q, Qg, Qh)])
        vals.extend(v)
        grads.extend(g)
        hesses.extend(h)

    if p >= 3:
        cubic = [_linear(lam[i], BARY_GRAD[i]) for i in range(3)]
        polys = _dubiner(p - 3, lam)
        family = tuple(np.array([poly[t] for poly in polys]) for t in range(3))
        v, g, h = _product(cubic + [family])
        vals.extend(v)
        grads.extend(g)
        hesses.extend(h)

    return np.array(vals), np.array(grads), np.array(hesses)


def reference_basis(p, edge_degrees, edge_flips, points):
    """Values ``(m, n)``, gradients ``(m, n, 2)`` and Hessians ``(m, n, 2, 2)``.

    ``m`` is the number of local shape functions, ``n`` the number of points.
    """
    return _reference_basis(p, tuple(edge_degrees), tuple(edge_flips), points)


@lru_cache(maxsize=None)
def tabulate(p, edge_degrees, edge_flips, rule_key):
    """Cached :func:`reference_basis` at the points of a quadrature rule."""
    from .numerics import rule_from_key
    rule = rule_from_key(rule_key)
    out = _reference_basis(p, edge_degrees, edge_flips, rule.points)
    for arr in out:
        arr.setflags(write=False)
    return out


def polynomial_basis(q, points):
    """Dubiner basis of all polynomials of total degree ``<= q`` at ``points``.

    The functions are orthogonal on the reference triangle.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    return np.array([v for v, _, _ in _dubiner(q, lam)])
