"""Adiabatic continuation of eigenvalue strands around closed parameter loops.

The tracker diagonalizes the model along a sampled loop, pairs eigenstates
between consecutive samples by minimal total eigenvalue displacement, and
bisects any step whose pairing is ambiguous. Following the strands once
around the loop yields the eigenstate-exchange permutation.
"""
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EndpointMismatch, LoopTouchesEP, ModelSemanticError
from .linalg import DEFAULT_TOL, eig_batch, min_gap
from .model import ParamPoint

DEFAULT_BZ_SAMPLES = 512
MAX_REFINE_DEPTH = 20
# refine a step unless the runner-up pairing costs at least twice the best
AMBIGUOUS_MARGIN = 1.0
# eigenvector overlaps break ties below this eigenvalue margin
TIEBREAK_MARGIN = 0.1
MIN_FIDELITY = 0.5
_MAX_SAMPLES = 1 << 18
_ENUMERATE_UP_TO = 6


# ----------------------------------------------------------------------------
# permutations

@dataclass(frozen=True)
class Permutation:
    """``images[i]`` is the strand reached by strand ``i`` after one traversal."""
    images: tuple

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"not a bijection: {imgs}")
        object.__setattr__(self, "images", imgs)

    def __len__(self):
        return len(self.images)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(n)))

    def __call__(self, i):
        return self.images[i]

    def cycles(self):
        """Disjoint cycles, each starting at its smallest element."""
        seen = set()
        out = []
        for start in range(len(self.images)):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            nxt = self.images[start]
            while nxt != start:
                cyc.append(nxt)
                seen.add(nxt)
                nxt = self.images[nxt]
            out.append(tuple(cyc))
        return out

    @property
    def parity(self):
        """0 for even permutations, 1 for odd."""
        return sum(len(c) - 1 for c in self.cycles()) % 2

    @property
    def order(self):
        return reduce(math.lcm, (len(c) for c in self.cycles()), 1)

    def compose(self, other):
        """Apply ``self`` first, then ``other``."""
        return Permutation(tuple(other.images[i] for i in self.images))

    def inverse(self):
        inv = [0] * len(self.images)
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def power(self, c):
        out = Permutation.identity(len(self))
        for _ in range(c):
            out = out.compose(self)
        return out

    def conjugate(self, relabel):
        """Same permutation after renaming strand ``i`` to ``relabel[i]``."""
        imgs = [0] * len(self.images)
        for i, j in enumerate(self.images):
            imgs[relabel[i]] = relabel[j]
        return Permutation(tuple(imgs))

    def cycle_type(self):
        """Map cycle length -> number of cycles of that length."""
        counts = {}
        for c in self.cycles():
            counts[len(c)] = counts.get(len(c), 0) + 1
        return dict(sorted(counts.items()))


# ----------------------------------------------------------------------------
# loops

@dataclass(frozen=True)
class LoopPath:
    """Closed loop in parameter space sampled at ``n + 1`` points (last = first).

    ``kind`` is one of ``"bz"`` (one periodic coordinate swept from
    ``geometry[0]`` to ``geometry[1]``), ``"circle"`` (``geometry`` =
    ``(center1, center2, radius)`` in the two coordinates ``params``) or
    ``"polyline"`` (``geometry`` = vertex tuples, closed).
    """
    kind: str
    params: tuple
    geometry: tuple
    n: int = DEFAULT_BZ_SAMPLES
    fixed: dict = field(default_factory=dict)
    winding: int = 1
    reverse: bool = False

    def __post_init__(self):
        if self.kind not in ("bz", "circle", "polyline"):
            raise ValueError(f"unknown loop kind {self.kind!r}")
        if self.n < 16:
            raise ValueError("a loop needs at least 16 samples")
        if self.winding < 1:
            raise ValueError("winding must be positive")
        if self.kind == "polyline":
            pts = tuple(tuple(float(x) for x in p) for p in self.geometry)
            if any(len(p) != len(self.params) for p in pts):
                raise ValueError("polyline vertices must match params")
            if max(abs(a - b) for a, b in zip(pts[0], pts[-1])) > 1e-14:
                pts = pts + (pts[0],)
            object.__setattr__(self, "geometry", pts)

    @classmethod
    def bz(cls, n=DEFAULT_BZ_SAMPLES, fixed=None, param="k", start=0.0, stop=2 * math.pi):
        return cls("bz", (param,), (float(start), float(stop)), n=n, fixed=dict(fixed or {}))

    @classmethod
    def circle(cls, center, radius, n=128, params=("alpha", "beta"), fixed=None):
        c1, c2 = center
        return cls("circle", tuple(params), (float(c1), float(c2), float(radius)),
                   n=n, fixed=dict(fixed or {}))

    @classmethod
    def polyline(cls, points, params, n=None, fixed=None):
        pts = tuple(tuple(p) for p in points)
        if n is None:
            segs = len(pts) - 1 if pts[0] == pts[-1] else len(pts)
            n = segs * max(1, math.ceil(DEFAULT_BZ_SAMPLES / segs))
        return cls("polyline", tuple(params), pts, n=n, fixed=dict(fixed or {}))

    def repeated(self, c):
        """The same loop traversed ``c`` times in a row."""
        return LoopPath(self.kind, self.params, self.geometry, n=self.n * c,
                        fixed=self.fixed, winding=self.winding * c, reverse=self.reverse)

    def reversed(self):
        return LoopPath(self.kind, self.params, self.geometry, n=self.n,
                        fixed=self.fixed, winding=self.winding, reverse=not self.reverse)

    def with_samples(self, n):
        return LoopPath(self.kind, self.params, self.geometry, n=n,
                        fixed=self.fixed, winding=self.winding, reverse=self.reverse)

    @property
    def lams(self):
        return np.linspace(0.0, 1.0, self.n + 1)

    def coords(self, lam):
        """Loop coordinates at path parameters ``lam`` in [0, 1]."""
        lam = np.asarray(lam, dtype=float)
        x = lam * self.winding
        if self.reverse:
            x = self.winding - x
        x = x - np.floor(x)
        if self.kind == "bz":
            a, b = self.geometry
            return {self.params[0]: a + (b - a) * x}
        if self.kind == "circle":
            c1, c2, r = self.geometry
            ang = 2 * np.pi * x
            return {self.params[0]: c1 + r * np.cos(ang), self.params[1]: c2 + r * np.sin(ang)}
        pts = np.asarray(self.geometry)
        nseg = len(pts) - 1
        pos = x * nseg
        seg = np.minimum(np.floor(pos).astype(int), nseg - 1)
        frac = (pos - seg)[..., None]
        xy = pts[seg] * (1 - frac) + pts[seg + 1] * frac
        return {name: xy[..., i] for i, name in enumerate(self.params)}

    def point(self, lam):
        """(parameter values, k) arrays for the model at ``lam``."""
        coords = self.coords(lam)
        values = {k: v for k, v in self.fixed.items() if k != "k"}
        values.update({k: v for k, v in coords.items() if k != "k"})
        k = coords.get("k", self.fixed.get("k"))
        return values, k

    @property
    def samples(self):
        values, k = self.point(self.lams)
        out = []
        for j in range(self.n + 1):
            vals = {name: float(np.broadcast_to(v, self.lams.shape)[j]) for name, v in values.items()}
            kj = None if k is None else float(np.broadcast_to(k, self.lams.shape)[j])
            out.append(ParamPoint(vals, kj))
        return out

    def hamiltonians(self, spec, lam):
        values, k = self.point(lam)
        if spec.is_lattice and k is None:
            raise ModelSemanticError("loop does not fix k for a lattice model")
        shape = np.shape(lam)
        values = {name: np.broadcast_to(v, shape) for name, v in values.items()}
        return spec.hamiltonians(values, k)

    def to_dict(self):
        out = {"kind": self.kind, "params": list(self.params), "n": self.n,
               "fixed": dict(sorted(self.fixed.items())),
               "winding": self.winding, "reverse": self.reverse}
        if self.kind == "polyline":
            out["points"] = [list(p) for p in self.geometry]
        else:
            out["geometry"] = list(self.geometry)
        return out


def loop_from_dict(data, spec=None, fixed=None):
    """Build a loop from the loop-file JSON structure.

    Accepted forms::

        {"bz": {"param": "k", "from": 0, "to": 6.283, "n": 512, "fixed": {...}}}
        {"circle": {"center": [0, 0], "radius": 1, "n": 128,
                    "params": ["alpha", "beta"], "fixed": {...}}}
        {"points": [{"alpha": 1, "beta": 0}, ...], "n": 256, "fixed": {...}}
    """
    fixed = dict(fixed or {})
    if "bz" in data:
        d = data["bz"]
        fixed.update(d.get("fixed", {}))
        return LoopPath.bz(n=int(d.get("n", DEFAULT_BZ_SAMPLES)), fixed=fixed,
                           param=d.get("param", "k"), start=d.get("from", 0.0),
                           stop=d.get("to", 2 * math.pi))
    if "circle" in data:
        d = data["circle"]
        fixed.update(d.get("fixed", {}))
        params = d.get("params") or default_plane(spec)
        return LoopPath.circle(d["center"], d["radius"], n=int(d.get("n", 128)),
                               params=params, fixed=fixed)
    if "points" in data:
        pts = data["points"]
        if not pts:
            raise ValueError("empty point list")
        params = tuple(pts[0].keys())
        fixed.update(data.get("fixed", {}))
        return LoopPath.polyline([[p[name] for name in params] for p in pts], params,
                                 n=data.get("n"), fixed=fixed)
    raise ValueError("loop file needs one of 'bz', 'circle', 'points'")


def load_loop(path, spec=None, fixed=None):
    with open(path) as fh:
        return loop_from_dict(json.load(fh), spec=spec, fixed=fixed)


def default_plane(spec):
    """Coordinates used for circles on a model: (first parameter, k) for
    lattice models, else its first two parameters."""
    names = list(spec.parameters) if spec is not None else ["alpha", "beta"]
    if spec is not None and spec.is_lattice:
        return (names[0], "k")
    if len(names) < 2:
        raise ValueError("circle loops need a two-parameter family")
    return tuple(names[:2])


# ----------------------------------------------------------------------------
# pairing

@lru_cache(maxsize=None)
def _all_perms(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


@dataclass(frozen=True)
class Assignment:
    """Pairing of eigenstates between two samples: prev ``i`` -> next ``images[i]``."""
    images: tuple
    cost: float
    margin: float


def _margin(best, second):
    with np.errstate(divide="ignore", invalid="ignore"):
        m = (second - best) / best
    m = np.where(best > 0, m, np.where(second > 0, np.inf, 0.0))
    return m


def _best_two_lsa(cost):
    rows, cols = linear_sum_assignment(cost)
    best = cost[rows, cols].sum()
    second = np.inf
    for i, j in zip(rows, cols):
        c = cost.copy()
        c[i, j] = np.inf
        try:
            r2, c2 = linear_sum_assignment(c)
        except ValueError:
            continue
        second = min(second, c[r2, c2].sum())
    return cols, best, second


def pair_step(prev, nxt):
    """Minimal-total-distance matching between two eigenvalue sets.

    Returns an :class:`Assignment` whose ``margin`` is
    ``(second best total - best total) / best total``.
    """
    prev = np.asarray(prev, dtype=complex)
    nxt = np.asarray(nxt, dtype=complex)
    if prev.shape != nxt.shape or prev.ndim != 1:
        raise ValueError("pair_step needs two equal-length 1-D eigenvalue sets")
    n = len(prev)
    if n <= _ENUMERATE_UP_TO:
        perms = _all_perms(n)
        costs = np.abs(prev[None, :] - nxt[perms]).sum(axis=-1)
        j = int(np.argmin(costs))
        best = costs[j]
        second = np.partition(costs, 1)[1] if len(costs) > 1 else np.inf
        images = perms[j]
    else:
        images, best, second = _best_two_lsa(np.abs(prev[:, None] - nxt[None, :]))
    return Assignment(tuple(int(i) for i in images), float(best), float(_margin(best, second)))


def _overlap_matrix(ra, la, rb, lb):
    """Two-way normalized overlaps O[i, j] between states i at a and j at b.

    O is invariant under independent rescaling of every vector and tends to
    the identity as the samples approach each other.
    """
    lh_a = np.conj(np.swapaxes(la, -1, -2))
    lh_b = np.conj(np.swapaxes(lb, -1, -2))
    ab = lh_a @ rb
    ba = lh_b @ ra
    da = np.einsum("...ii->...i", lh_a @ ra)
    db = np.einsum("...ii->...i", lh_b @ rb)
    with np.errstate(divide="ignore", invalid="ignore"):
        o = ab * np.swapaxes(ba, -1, -2) / (da[..., :, None] * db[..., None, :])
    return np.nan_to_num(o, nan=0.0, posinf=0.0, neginf=0.0)


@dataclass
class StepScores:
    images: np.ndarray      # (..., N) chosen assignment
    margin: np.ndarray      # (...)
    fidelity: np.ndarray    # (...) min over strands of Re O[i, images[i]]
    tie_images: np.ndarray  # (..., N) overlap-maximizing assignment
    tie_fidelity: np.ndarray


def score_steps(wa, ra, la, wb, rb, lb):
    """Score every step a -> b in a batch (leading axes are broadcast)."""
    n = wa.shape[-1]
    o = _overlap_matrix(ra, la, rb, lb)
    if n <= _ENUMERATE_UP_TO:
        perms = _all_perms(n)
        costs = np.abs(wa[..., None, :] - wb[..., perms]).sum(axis=-1)
        best = np.argmin(costs, axis=-1)
        two = np.partition(costs, 1, axis=-1)[..., :2] if costs.shape[-1] > 1 else \
            np.concatenate([costs, np.full(costs.shape, np.inf)], axis=-1)
        images = perms[best]
        rows = np.arange(n)
        score = np.real(o[..., rows, perms]).sum(axis=-1) if n > 1 else np.real(o[..., 0, :])
        tie = perms[np.argmax(score, axis=-1)]
        margin = _margin(two[..., 0], two[..., 1])
    else:
        flat_a = wa.reshape(-1, n)
        flat_b = wb.reshape(-1, n)
        flat_o = o.reshape(-1, n, n)
        imgs, ties, margins = [], [], []
        for a, b, oo in zip(flat_a, flat_b, flat_o):
            cols, best, second = _best_two_lsa(np.abs(a[:, None] - b[None, :]))
            imgs.append(cols)
            margins.append(_margin(best, second))
            ties.append(linear_sum_assignment(-np.real(oo))[1])
        images = np.array(imgs).reshape(wa.shape)
        tie = np.array(ties).reshape(wa.shape)
        margin = np.array(margins, dtype=float).reshape(wa.shape[:-1])
    fid = np.min(np.real(np.take_along_axis(o, images[..., None], axis=-1)[..., 0]), axis=-1)
    tfid = np.min(np.real(np.take_along_axis(o, tie[..., None], axis=-1)[..., 0]), axis=-1)
    return StepScores(images, margin, fid, tie, tfid)


def traceless_norms(h):
    """Frobenius norm of the traceless part of each matrix."""
    n = h.shape[-1]
    tr = np.einsum("...ii->...", h) / n
    return np.linalg.norm(h - tr[..., None, None] * np.eye(n), axis=(-2, -1))


def relative_gaps(values, scale):
    """Smallest eigenvalue gap per sample divided by the loop's energy scale."""
    g = min_gap(values)
    scale = np.asarray(scale, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(scale > 0, g / scale, np.where(g > 0, np.inf, 0.0))


# ----------------------------------------------------------------------------
# tracking

@dataclass(eq=False)
class SpectralFlow:
    """Strands of eigenvalues and eigenvectors along a loop.

    Column ``i`` of ``values``/``right``/``left`` follows strand ``i``; at the
    first sample strand ``i`` is the ``i``-th eigenvalue in lexicographic
    order. ``pairing[s]`` is the assignment applied from sample ``s`` to
    ``s + 1`` in terms of raw eigen-indices.
    """
    loop: LoopPath
    lams: np.ndarray
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    pairing: np.ndarray
    min_gap: float
    refined: int = 0
    tiebreaks: int = 0

    @property
    def n_states(self):
        return self.values.shape[1]


def order_strands(step_images):
    """Cumulative strand ordering from per-step assignments.

    ``step_images`` has shape (..., S, N); the result (..., S + 1, N) gives
    for every sample the raw eigen-index occupied by each strand.
    """
    step_images = np.asarray(step_images)
    *lead, s, n = step_images.shape
    order = np.empty(tuple(lead) + (s + 1, n), dtype=np.intp)
    cur = np.broadcast_to(np.arange(n), tuple(lead) + (n,)).copy()
    order[..., 0, :] = cur
    for j in range(s):
        cur = np.take_along_axis(step_images[..., j, :], cur, axis=-1)
        order[..., j + 1, :] = cur
    return order


def _reorder(arr, order):
    # arr: (M, ..., N) with states on the last axis; order: (M, N)
    idx = order.reshape(order.shape[:1] + (1,) * (arr.ndim - 2) + order.shape[1:])
    return np.take_along_axis(arr, np.broadcast_to(idx, arr.shape), axis=-1)


def track_loop(spec, loop, tol=1e-8, max_refine_depth=MAX_REFINE_DEPTH, eig_tol=DEFAULT_TOL):
    """Continue all eigenstates of ``spec`` once around ``loop``.

    A step is bisected while the best eigenvalue pairing beats the runner-up
    by less than a factor of two, or while the paired eigenvectors lose
    overlap, up to ``max_refine_depth`` halvings of the original step.

    Raises
    ------
    LoopTouchesEP
        A sample has relative eigenvalue gap below ``tol``, or a step is
        still ambiguous after full refinement.
    """
    lams = loop.lams
    h = loop.hamiltonians(spec, lams)
    w, r, l = eig_batch(h, tol=eig_tol)
    scale = float(traceless_norms(h).max())
    gaps = relative_gaps(w, scale)
    depth = np.zeros(len(lams) - 1, dtype=int)
    refined = 0

    def _touch(gaps, lams):
        j = int(np.argmin(gaps))
        if gaps[j] < tol:
            raise LoopTouchesEP(f"relative eigenvalue gap {gaps[j]:.3g} at lam={lams[j]:.6g}",
                                lam=float(lams[j]), gap=float(gaps[j]))

    while True:
        _touch(gaps, lams)
        sc = score_steps(w[:-1], r[:-1], l[:-1], w[1:], r[1:], l[1:])
        bad = (sc.margin < AMBIGUOUS_MARGIN) | (sc.fidelity < MIN_FIDELITY)
        split = bad & (depth < max_refine_depth)
        if not split.any():
            break
        if len(lams) + split.sum() > _MAX_SAMPLES:
            raise LoopTouchesEP("refinement budget exhausted", gap=float(gaps.min()))
        pos = np.nonzero(split)[0]
        mids = 0.5 * (lams[pos] + lams[pos + 1])
        hm = loop.hamiltonians(spec, mids)
        wm, rm, lm = eig_batch(hm, tol=eig_tol)
        at = pos + 1
        lams = np.insert(lams, at, mids)
        w = np.insert(w, at, wm, axis=0)
        r = np.insert(r, at, rm, axis=0)
        l = np.insert(l, at, lm, axis=0)
        gaps = np.insert(gaps, at, relative_gaps(wm, scale))
        depth = np.repeat(depth + split, np.where(split, 2, 1))
        refined += len(pos)

    images = sc.images.copy()
    tiebreaks = 0
    for j in np.nonzero(bad)[0]:
        if sc.margin[j] < TIEBREAK_MARGIN and sc.tie_fidelity[j] >= MIN_FIDELITY:
            images[j] = sc.tie_images[j]
            tiebreaks += 1
        elif sc.fidelity[j] < MIN_FIDELITY:
            raise LoopTouchesEP(
                f"pairing still ambiguous after {max_refine_depth} refinements near "
                f"lam={lams[j]:.6g}", lam=float(lams[j]), gap=float(min(gaps[j], gaps[j + 1])))

    order = order_strands(images)
    return SpectralFlow(
        loop=loop, lams=lams,
        values=np.take_along_axis(w, order, axis=-1),
        right=_reorder(r, order), left=_reorder(l, order),
        pairing=images, min_gap=float(gaps.min()),
        refined=refined, tiebreaks=tiebreaks,
    )


def closure_images(values, tol=1e-8):
    """Match strand endpoints (last sample) to start points (first sample)."""
    start, end = values[0], values[-1]
    n = len(start)
    cost = np.abs(end[:, None] - start[None, :])
    if n <= _ENUMERATE_UP_TO:
        perms = _all_perms(n)
        images = perms[np.argmin(cost[np.arange(n), perms].sum(axis=-1))]
    else:
        images = linear_sum_assignment(cost)[1]
    resid = float(np.max(cost[np.arange(n), images])) if n else 0.0
    scale = max(1.0, float(np.max(np.abs(start))) if n else 1.0)
    return images, resid / scale


def extract_permutation(flow, tol=1e-8):
    """Eigenstate-exchange permutation of a completed flow.

    Raises
    ------
    EndpointMismatch
        If some strand does not return to a starting eigenvalue within ``tol``.
    """
    images, resid = closure_images(flow.values, tol)
    if resid > tol:
        raise EndpointMismatch(f"strand endpoints miss start points by {resid:.3g}")
    return Permutation(tuple(int(i) for i in images))


def track_loops(spec, loops, tol=1e-8, max_refine_depth=MAX_REFINE_DEPTH, eig_tol=DEFAULT_TOL):
    """Track many loops with equal sample counts in one batched pass.

    Loops whose every step is unambiguous at the base resolution are finished
    directly; the rest go through :func:`track_loop` one by one. Returns a list
    holding a :class:`SpectralFlow` or the ``LoopTouchesEP`` raised for each loop.
    """
    loops = list(loops)
    if not loops:
        return []
    if len({lp.n for lp in loops}) != 1:
        raise ValueError("track_loops needs loops with equal sample counts")
    lams = loops[0].lams
    h = np.stack([lp.hamiltonians(spec, lams) for lp in loops])
    w, r, l = eig_batch(h, tol=eig_tol)
    gaps = relative_gaps(w, traceless_norms(h).max(axis=1, keepdims=True))
    sc = score_steps(w[:, :-1], r[:, :-1], l[:, :-1], w[:, 1:], r[:, 1:], l[:, 1:])
    ok = ((sc.margin >= AMBIGUOUS_MARGIN) & (sc.fidelity >= MIN_FIDELITY)).all(axis=1)
    ok &= gaps.min(axis=1) >= tol
    out = [None] * len(loops)
    idx = np.nonzero(ok)[0]
    if len(idx):
        order = order_strands(sc.images[idx])
        for j, c in enumerate(idx):
            out[c] = SpectralFlow(
                loop=loops[c], lams=lams,
                values=np.take_along_axis(w[c], order[j], axis=-1),
                right=_reorder(r[c], order[j]), left=_reorder(l[c], order[j]),
                pairing=sc.images[c], min_gap=float(gaps[c].min()))
    for c in np.nonzero(~ok)[0]:
        try:
            out[c] = track_loop(spec, loops[c], tol=tol, max_refine_depth=max_refine_depth,
                                eig_tol=eig_tol)
        except LoopTouchesEP as exc:
            out[c] = exc
    return out
