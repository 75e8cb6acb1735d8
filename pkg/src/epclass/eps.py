"""Exceptional-point search in a two-parameter plane.

Eigenvalues of h merge exactly where the discriminant of its characteristic
polynomial vanishes. A grid scan of |disc| supplies seeds, Newton's method on
(Re disc, Im disc) polishes them, and the phase rigidity of the merging pair
separates true EPs (coalescing eigenvectors) from diabolic crossings.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter

from .emit import csv_text
from .linalg import charpoly3, eig_full, rigidities
from .model import ParamPoint

COALESCENCE_CUT = 0.05
DEDUP_TOL = 1e-6
FD_STEP = 1e-7
MAX_SEEDS = 256


def _charpoly(h):
    """Monic characteristic polynomial coefficients by Faddeev-LeVerrier.

    Returns shape (..., n + 1), highest power first.
    """
    n = h.shape[-1]
    eye = np.eye(n)
    coeffs = [np.ones(h.shape[:-2], dtype=complex)]
    m = np.zeros_like(h)
    for k in range(1, n + 1):
        m = h @ m + coeffs[-1][..., None, None] * eye
        c = -np.einsum("...ii->...", h @ m) / k
        coeffs.append(c)
    return np.stack(coeffs, axis=-1)


def _sylvester_disc(coeffs):
    # discriminant of a monic polynomial via det of the Sylvester matrix of p, p'
    n = coeffs.shape[-1] - 1
    deriv = coeffs[..., :-1] * np.arange(n, 0, -1)
    size = 2 * n - 1
    syl = np.zeros(coeffs.shape[:-1] + (size, size), dtype=complex)
    for i in range(n - 1):
        syl[..., i, i:i + n + 1] = coeffs
    for i in range(n):
        syl[..., n - 1 + i, i:i + n] = deriv
    sign = (-1) ** (n * (n - 1) // 2)
    return sign * np.linalg.det(syl)


def matrix_discriminant(h):
    """Discriminant of det(h - x I) for a stack of square matrices."""
    h = np.asarray(h, dtype=complex)
    n = h.shape[-1]
    if n == 1:
        return np.ones(h.shape[:-2], dtype=complex)
    if n == 2:
        tr = h[..., 0, 0] + h[..., 1, 1]
        det = h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]
        return tr * tr - 4 * det
    if n == 3:
        a, b, c = charpoly3(h)
        return a * a * b * b - 4 * b ** 3 - 4 * a ** 3 * c - 27 * c * c + 18 * a * b * c
    return _sylvester_disc(_charpoly(h))


def discriminant(spec, p):
    """Characteristic-polynomial discriminant at a :class:`ParamPoint`."""
    return complex(matrix_discriminant(spec.hamiltonians(p.values, p.k)))


@dataclass(frozen=True)
class EPLocation:
    coords: tuple       # ((name1, value1), (name2, value2))
    point: ParamPoint
    disc_residual: float
    coalescence: float
    gap: float
    order: int
    kind: str           # "EP" or "DiabolicPoint"
    note: str = ""

    @property
    def x(self):
        return self.coords[0][1]

    @property
    def y(self):
        return self.coords[1][1]

    def to_dict(self):
        return {"coords": dict(self.coords), "disc": self.disc_residual,
                "rigidity": self.coalescence, "gap": self.gap, "order": self.order,
                "kind": self.kind, "note": self.note}


def parse_region(text):
    """``t=0:3,k=0:6.2832`` -> {"t": (0.0, 3.0), "k": (0.0, 6.2832)}"""
    out = {}
    for part in text.split(","):
        try:
            name, rng = part.split("=", 1)
            lo, hi = rng.split(":")
            out[name.strip()] = (float(lo), float(hi))
        except ValueError:
            raise ValueError(f"bad region component {part!r}; expected name=lo:hi") from None
    if len(out) != 2:
        raise ValueError("region must name exactly two coordinates")
    return out


class _Plane:
    """Evaluate the model on (x, y) with the other parameters held fixed."""

    def __init__(self, spec, names, fixed):
        self.spec = spec
        self.names = names
        self.fixed = {k: v for k, v in fixed.items() if k not in names}
        spec.resolve({k: 0.0 for k in list(names) + list(self.fixed) if k != "k"})
        if spec.is_lattice and "k" not in names and "k" not in self.fixed:
            self.fixed["k"] = math.pi

    def point(self, x, y):
        vals = dict(self.fixed)
        vals[self.names[0]] = x
        vals[self.names[1]] = y
        k = vals.pop("k", None)
        return vals, k

    def h(self, x, y):
        vals, k = self.point(x, y)
        return self.spec.hamiltonians(vals, k)

    def disc(self, x, y):
        return matrix_discriminant(self.h(x, y))


def _wrap_k(dk):
    # onto [0, 2pi), snapping values within the dedup tolerance of 2pi to 0
    m = dk % (2 * math.pi)
    return 0.0 if 2 * math.pi - m <= DEDUP_TOL else m


def _distance(names, a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    for i, name in enumerate(names):
        if name == "k":
            d[i] = min(d[i], 2 * math.pi - d[i])
    return float(d.max())


def _newton(plane, x0, tol, max_iter=100):
    x = np.array(x0, dtype=float)
    f = complex(plane.disc(*x))
    for _ in range(max_iter):
        if abs(f) <= tol:
            return x, abs(f)
        steps = FD_STEP * np.maximum(1.0, np.abs(x))
        jac = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = steps[j]
            d = (complex(plane.disc(*(x + e))) - complex(plane.disc(*(x - e)))) / (2 * steps[j])
            jac[:, j] = d.real, d.imag
        dx = np.linalg.lstsq(jac, -np.array([f.real, f.imag]), rcond=None)[0]
        if not np.all(np.isfinite(dx)):
            break
        lam = 1.0
        while lam > 1e-6:
            cand = x + lam * dx
            fc = complex(plane.disc(*cand))
            if abs(fc) < abs(f):
                break
            lam *= 0.5
        else:
            break
        if np.max(np.abs(cand - x)) <= 1e-15 * max(1.0, np.max(np.abs(x))):
            x, f = cand, fc
            break
        x, f = cand, fc
    return x, abs(f)


def _classify_point(plane, x, y, cut):
    h = plane.h(x, y)
    sys = eig_full(h)
    w = sys.values
    n = len(w)
    dist = np.abs(w[:, None] - w[None, :]) + np.diag(np.full(n, np.inf))
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    gap = float(dist[i, j])
    r = rigidities(sys.left, sys.right)
    coalescence = float(0.5 * (r[i] + r[j]))
    scale = max(1.0, float(np.linalg.norm(h)))
    radius = max(1e-4 * scale, 10 * gap)
    centre = 0.5 * (w[i] + w[j])
    order = max(2, int(np.sum(np.abs(w - centre) <= radius)))
    kind = "EP" if coalescence <= cut else "DiabolicPoint"
    note = "order>2 unverified" if order > 2 else ""
    return gap, coalescence, order, kind, note


def locate_eps(spec, region, grid=(64, 64), fixed=None, tol=1e-13,
               coalescence_cut=COALESCENCE_CUT):
    """Find eigenvalue degeneracies of ``spec`` inside a 2-D box.

    Parameters
    ----------
    region : dict
        Two entries ``name -> (lo, hi)``; ``"k"`` may be one of them.
    grid : (int, int)
        Scan resolution, at least 16 in each direction.
    tol : float
        Newton stops once |disc| falls below this.

    Returns a list sorted by coordinates; seeds that fail to converge are
    dropped with a warning.
    """
    (n1, n2) = grid
    if n1 < 16 or n2 < 16:
        raise ValueError("grid must be at least 16 x 16")
    names = tuple(region)
    (lo1, hi1), (lo2, hi2) = (tuple(map(float, region[n])) for n in names)
    if not all(map(math.isfinite, (lo1, hi1, lo2, hi2))) or lo1 >= hi1 or lo2 >= hi2:
        raise ValueError("region must be a finite, non-empty box")
    plane = _Plane(spec, names, dict(fixed or {}))
    xs = np.linspace(lo1, hi1, n1)
    ys = np.linspace(lo2, hi2, n2)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    mag = np.abs(plane.disc(gx, gy))
    is_min = (mag == minimum_filter(mag, size=3, mode="nearest")) & (mag <= np.median(mag))
    seeds = np.argwhere(is_min)
    seeds = seeds[np.argsort(mag[is_min], kind="stable")][:MAX_SEEDS]

    found = []
    failed = 0
    slack1, slack2 = 1e-9 * max(1.0, hi1 - lo1), 1e-9 * max(1.0, hi2 - lo2)
    for i, j in seeds:
        x, res = _newton(plane, (xs[i], ys[j]), tol)
        if res > tol or not np.all(np.isfinite(x)):
            failed += 1
            continue
        for a, lo in ((0, lo1), (1, lo2)):
            if names[a] == "k":
                x[a] = lo + _wrap_k(x[a] - lo)
        if not (lo1 - slack1 <= x[0] <= hi1 + slack1 and lo2 - slack2 <= x[1] <= hi2 + slack2):
            continue
        if any(_distance(names, x, f) <= DEDUP_TOL for f, _ in found):
            continue
        found.append((x, res))
    if failed:
        warnings.warn(f"{failed} of {len(seeds)} seeds did not converge", RuntimeWarning,
                      stacklevel=2)

    out = []
    for x, res in sorted(found, key=lambda item: (round(item[0][0], 9), round(item[0][1], 9))):
        gap, coal, order, kind, note = _classify_point(plane, x[0], x[1], coalescence_cut)
        vals, k = plane.point(float(x[0]), float(x[1]))
        out.append(EPLocation(((names[0], float(x[0])), (names[1], float(x[1]))),
                              ParamPoint(vals, k), float(res), coal, gap, order, kind, note))
    return out


def eps_csv(eps):
    rows = [(e.x, e.y, e.disc_residual, e.coalescence, e.kind) for e in eps]
    return csv_text(["coord1", "coord2", "disc", "rigidity", "kind"], rows)
