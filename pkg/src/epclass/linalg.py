"""Dense complex eigenproblems with left and right eigenvectors.

Two- and three-dimensional matrices go through closed-form quadratic and
cubic roots followed by null-space extraction; everything else (and any
closed-form result whose residual is not acceptable) goes through LAPACK.
All routines accept a stack of matrices with arbitrary leading dimensions.

Eigenvectors are stored as columns: ``right[..., :, i]`` belongs to
``values[..., i]``. Eigenvalues come out in lexicographic (Re, Im) order.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .errors import NearDefective, NonConvergence, ZeroVector

DEFAULT_TOL = 1e-10
_EPS = np.finfo(float).eps
_OMEGA = np.exp(2j * np.pi / 3)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues with paired right (psi) and left (phi) eigenvectors.

    The left vectors satisfy ``phi^H H = lambda phi^H``. ``scale`` is the
    Frobenius norm of the source matrix and ``condition`` the 2-norm
    condition number of the unit-column right eigenvector matrix.
    """
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    biorthonormal: bool = False
    defective: bool = False
    condition: float = 1.0
    scale: float = 0.0

    @property
    def dim(self):
        return len(self.values)

    def gram(self):
        """Matrix of overlaps <phi_i|psi_j>."""
        return self.left.conj().T @ self.right


def _as_square(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _unit_columns(v):
    nrm = np.linalg.norm(v, axis=-2, keepdims=True)
    return v / np.where(nrm > 0, nrm, 1.0)


def _sort_lex(values, right, left):
    order = np.lexsort((values.imag, values.real), axis=-1)
    values = np.take_along_axis(values, order, axis=-1)
    idx = order[..., None, :]
    right = np.take_along_axis(right, np.broadcast_to(idx, right.shape), axis=-1)
    left = np.take_along_axis(left, np.broadcast_to(idx, left.shape), axis=-1)
    return values, right, left


def _pick_candidate(cands):
    # cands: (..., ncand, dim, neig); keep the largest-norm candidate per eigenvalue
    nrm = np.linalg.norm(cands, axis=-2)
    best = np.argmax(nrm, axis=-2)
    vec = np.take_along_axis(cands, best[..., None, None, :], axis=-3)[..., 0, :, :]
    return vec, np.take_along_axis(nrm, best[..., None, :], axis=-2)[..., 0, :]


def _eig2(h):
    a, b = h[..., 0, 0], h[..., 0, 1]
    c, d = h[..., 1, 0], h[..., 1, 1]
    mean = 0.5 * (a + d)
    half = 0.5 * (a - d)
    root = np.sqrt(half * half + b * c)
    lam = np.stack([mean - root, mean + root], axis=-1)
    la = lam - a[..., None]
    ld = lam - d[..., None]
    bb = np.broadcast_to(b[..., None], lam.shape)
    cc = np.broadcast_to(c[..., None], lam.shape)
    # (H - lam) v = 0 has solutions (b, lam-a) and (lam-d, c)
    rc = np.stack([np.stack([bb, la], axis=-2), np.stack([ld, cc], axis=-2)], axis=-3)
    # H^T u = lam u, phi = conj(u)
    lc = np.stack([np.stack([cc, la], axis=-2), np.stack([ld, bb], axis=-2)], axis=-3)
    right, rn = _pick_candidate(rc)
    left, ln = _pick_candidate(lc)
    return lam, right, left.conj(), np.minimum(rn, ln)


def cubic_roots(a2, a1, a0, polish=2):
    """Roots of ``x^3 + a2 x^2 + a1 x + a0`` by Cardano's formula.

    Works elementwise on complex arrays. A couple of guarded Newton steps
    clean up the cancellation Cardano suffers from when roots are unequal
    in magnitude.
    """
    a2, a1, a0 = (np.asarray(x, dtype=complex) for x in (a2, a1, a0))
    s = a2 / 3
    p = a1 - a2 * s
    q = a0 - a1 * s + 2 * s ** 3
    disc = np.sqrt(0.25 * q * q + (p / 3) ** 3)
    w1 = -0.5 * q + disc
    w2 = -0.5 * q - disc
    w = np.where(np.abs(w1) >= np.abs(w2), w1, w2)
    u = w ** (1 / 3)
    safe_u = np.where(u != 0, u, 1.0)
    v = np.where(u != 0, -p / (3 * safe_u), 0.0)
    x = np.stack([u + v, _OMEGA * u + _OMEGA ** 2 * v, _OMEGA ** 2 * u + _OMEGA * v], axis=-1)
    r = x - s[..., None]
    c2, c1, c0 = a2[..., None], a1[..., None], a0[..., None]
    for _ in range(polish):
        f = ((r + c2) * r + c1) * r + c0
        fp = (3 * r + 2 * c2) * r + c1
        ok = np.abs(fp) > 0
        step = np.where(ok, f / np.where(ok, fp, 1.0), 0.0)
        cand = r - step
        fc = ((cand + c2) * cand + c1) * cand + c0
        r = np.where(np.abs(fc) < np.abs(f), cand, r)
    return r


def charpoly3(h):
    """Monic characteristic polynomial coefficients (a2, a1, a0) of 3x3 matrices."""
    h00, h01, h02 = h[..., 0, 0], h[..., 0, 1], h[..., 0, 2]
    h10, h11, h12 = h[..., 1, 0], h[..., 1, 1], h[..., 1, 2]
    h20, h21, h22 = h[..., 2, 0], h[..., 2, 1], h[..., 2, 2]
    tr = h00 + h11 + h22
    minors = (h00 * h11 - h01 * h10) + (h00 * h22 - h02 * h20) + (h11 * h22 - h12 * h21)
    det = (h00 * (h11 * h22 - h12 * h21)
           - h01 * (h10 * h22 - h12 * h20)
           + h02 * (h10 * h21 - h11 * h20))
    return -tr, minors, -det


def _cross(x, y):
    # bilinear cross product along axis -1 (no conjugation)
    return np.stack([
        x[..., 1] * y[..., 2] - x[..., 2] * y[..., 1],
        x[..., 2] * y[..., 0] - x[..., 0] * y[..., 2],
        x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0],
    ], axis=-1)


def _eig3(h):
    lam = cubic_roots(*charpoly3(h))
    a = h[..., None, :, :] - lam[..., :, None, None] * np.eye(3)
    rows = [a[..., i, :] for i in range(3)]
    cols = [a[..., :, i] for i in range(3)]
    pairs = ((0, 1), (0, 2), (1, 2))
    # (..., neig, ncand, 3) -> (..., ncand, 3, neig)
    rc = np.stack([_cross(rows[i], rows[j]) for i, j in pairs], axis=-2)
    lc = np.stack([_cross(cols[i], cols[j]) for i, j in pairs], axis=-2)
    rc = np.moveaxis(rc, -3, -1)
    lc = np.moveaxis(lc, -3, -1)
    right, rn = _pick_candidate(rc)
    left, ln = _pick_candidate(lc)
    return lam, right, left.conj(), np.minimum(rn, ln)


def _eig_general(m):
    # entries far below roundoff of the largest one only perturb the result
    # by O(eps^2), but subnormal-scale values derail LAPACK's back-substitution
    m = np.where(np.abs(m) < _EPS ** 2 * np.abs(m).max(initial=0.0), 0, m)
    if np.array_equal(m, m.conj().T):
        w, v = np.linalg.eigh(m)
        return w.astype(complex), v, v.copy()
    try:
        w, vl, vr = scipy.linalg.eig(m, left=True, right=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise NonConvergence("eigenvalue iteration did not converge")
    return w, vr, vl


def _residuals(h, values, vecs):
    hv = h @ vecs
    return np.linalg.norm(hv - vecs * values[..., None, :], axis=-2)


def eig_batch(h, tol=DEFAULT_TOL):
    """Eigen-decompose a stack of square matrices.

    Parameters
    ----------
    h : array_like, shape (..., n, n)
    tol : float
        Relative residual accepted from the closed forms before falling back
        to LAPACK for that matrix.

    Returns
    -------
    values : ndarray (..., n)
    right, left : ndarray (..., n, n)
        Unit-norm eigenvectors as columns.
    """
    h = _as_square(h)
    n = h.shape[-1]
    batch = h.shape[:-2]
    if n == 1:
        values = h[..., 0].copy()
        ones = np.ones(batch + (1, 1), dtype=complex)
        return values, ones, ones.copy()
    if n in (2, 3):
        values, right, left, cand = (_eig2 if n == 2 else _eig3)(h)
        right = _unit_columns(right)
        left = _unit_columns(left)
        fro = np.linalg.norm(h, axis=(-2, -1))
        limit = tol * np.maximum(fro, np.finfo(float).tiny)
        bad = (np.min(cand, axis=-1) <= 64 * _EPS * np.maximum(fro, 1e-300) ** (n - 1))
        # written as ~(x <= limit) so that NaN residuals count as failures
        bad |= ~(np.max(_residuals(h, values, right), axis=-1) <= limit)
        lres = _residuals(np.swapaxes(h, -1, -2).conj(), values.conj(), left)
        bad |= ~(np.max(lres, axis=-1) <= limit)
        if np.any(bad):
            for idx in zip(*np.nonzero(bad)) if batch else [()]:
                w, vr, vl = _eig_general(h[idx])
                values[idx], right[idx], left[idx] = w, _unit_columns(vr), _unit_columns(vl)
        return _sort_lex(values, right, left)
    values = np.empty(batch + (n,), dtype=complex)
    right = np.empty(batch + (n, n), dtype=complex)
    left = np.empty_like(right)
    for idx in np.ndindex(*batch):
        w, vr, vl = _eig_general(h[idx])
        values[idx], right[idx], left[idx] = w, _unit_columns(vr), _unit_columns(vl)
    return _sort_lex(values, right, left)


def gauge_balance(m):
    """Log-scales ``x`` making ``D^-1 m D`` (``D = diag(exp(x))``) as close to
    modulus-symmetric as a diagonal similarity allows.

    Each pair of nonzero mirror entries asks for
    ``x_j - x_i = log(|m_ji| / |m_ij|) / 2``; the requests are solved in the
    least-squares sense on the coupling graph, which is exact whenever the
    asymmetry is a pure imaginary gauge field (for instance non-reciprocal
    hopping along a chain). Removing that gauge cures the exponential
    eigenvector conditioning of such matrices.
    """
    a = np.abs(np.asarray(m))
    n = a.shape[0]
    i, j = np.nonzero(np.triu((a > 0) & (a.T > 0), 1))
    if len(i) == 0:
        return np.zeros(n)
    c = 0.5 * (np.log(a[j, i]) - np.log(a[i, j]))
    e = np.arange(len(i))
    inc = scipy.sparse.csr_matrix(
        (np.r_[-np.ones(len(i)), np.ones(len(i))], (np.r_[e, e], np.r_[i, j])),
        shape=(len(i), n))
    lap = (inc.T @ inc).tocsr()
    _, comp = scipy.sparse.csgraph.connected_components(lap, directed=False)
    ground = np.zeros(n)
    ground[np.unique(comp, return_index=True)[1]] = 1.0
    x = scipy.sparse.linalg.spsolve((lap + scipy.sparse.diags(ground)).tocsc(), inc.T @ c)
    return np.asarray(x) - np.mean(x)


def eig_full(m, tol=DEFAULT_TOL, balance=False):
    """Eigenvalues plus left and right eigenvectors of one square matrix.

    Matrices at or near an exceptional point are legitimate input: instead of
    raising, the result carries ``defective=True`` when the eigenvector
    matrix condition number exceeds ``1/tol``. With ``balance=True`` the
    matrix is first rescaled by :func:`gauge_balance` and the eigenvectors
    are mapped back afterwards.
    """
    m = _as_square(m)
    if m.ndim != 2:
        raise ValueError("eig_full takes a single matrix; use eig_batch for stacks")
    if balance:
        x = gauge_balance(m)
        values, right, left = eig_batch(m * np.exp(x[None, :] - x[:, None]), tol=tol)
        right = _unit_columns(np.exp(x)[:, None] * right)
        left = _unit_columns(np.exp(-x)[:, None] * left)
    else:
        values, right, left = eig_batch(m, tol=tol)
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(right))
    if not np.isfinite(cond):
        cond = np.inf
    return EigenSystem(values=values, right=right, left=left,
                       defective=bool(cond > 1.0 / tol), condition=cond,
                       scale=float(np.linalg.norm(m)))


def min_gap(values):
    """Smallest pairwise distance between eigenvalues along the last axis."""
    values = np.asarray(values)
    n = values.shape[-1]
    if n < 2:
        return np.full(values.shape[:-1], np.inf)
    iu, ju = np.triu_indices(n, 1)
    return np.min(np.abs(values[..., iu] - values[..., ju]), axis=-1)


def biorthonormalize(sys, tol=DEFAULT_TOL):
    """Rescale left vectors so that <phi_i|psi_j> = delta_ij.

    Raises
    ------
    NearDefective
        If two eigenvalues lie within ``tol * max(1, ||H||_F)`` of each
        other; the pairing is then not well defined.
    """
    gap = float(min_gap(sys.values))
    if gap <= tol * max(1.0, sys.scale):
        raise NearDefective(f"eigenvalue gap {gap:.3g} at or below tolerance", gap=gap)
    diag = np.einsum("ij,ij->j", sys.left.conj(), sys.right)
    if np.any(diag == 0):
        raise NearDefective("left and right eigenvectors are orthogonal", gap=gap)
    left = sys.left / diag.conj()
    gram = left.conj().T @ sys.right
    ok = np.max(np.abs(gram - np.eye(sys.dim))) <= max(tol, 1e3 * _EPS) * max(1.0, sys.condition)
    return EigenSystem(values=sys.values, right=sys.right, left=left,
                       biorthonormal=bool(ok), defective=sys.defective,
                       condition=sys.condition, scale=sys.scale)


def phase_rigidity(left, right):
    """Phase rigidity <phi|psi> / sqrt(<phi|phi><psi|psi>) of one state.

    Equals 1 in modulus for a Hermitian (left = right) state and tends to 0
    as the state approaches an exceptional point.
    """
    left = np.asarray(left, dtype=complex).ravel()
    right = np.asarray(right, dtype=complex).ravel()
    nl = np.vdot(left, left).real
    nr = np.vdot(right, right).real
    if nl == 0 or nr == 0:
        raise ZeroVector("phase rigidity of a zero vector")
    return complex(np.vdot(left, right) / np.sqrt(nl * nr))


def rigidities(left, right):
    """Vectorized |phase_rigidity| over eigenvector columns."""
    num = np.abs(np.einsum("...ij,...ij->...j", left.conj(), right))
    den = np.linalg.norm(left, axis=-2) * np.linalg.norm(right, axis=-2)
    return num / den
