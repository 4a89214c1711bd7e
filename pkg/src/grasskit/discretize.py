"""Resolution-scale machinery: separated nets, slab neighborhoods of chart
m-planes, grid counting, box-dimension fits, the ball-counting spacing
condition, and the spacing partition.

Conventions fixed here and used everywhere:

* grids over the chart box [-1, 1]^q are anchored at -1 with half-open
  cells of side delta (the top edge is folded into the last cell);
* radii for the spacing condition are dyadic, r in {delta, 2 delta, ..., 1},
  and balls are closed Euclidean balls centered at family members;
* a slab neighborhood of a chart m-plane is the product over the l+1
  slices of the band of width delta around the section, clipped to the
  box; its measure is the exact volume of that clipped product.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .affine import ChartMPlane, ChartPoint
from .errors import InvalidInputError, InvalidScaleError, ResourceCapError
from .grassmann import Subspace, distance as grassmann_distance

CANDIDATE_CAP = 4_000_000
CELL_CAP = 16_000_000


def _check_scale(delta: float) -> float:
    if not (0.0 < delta <= 1.0):
        raise InvalidScaleError(f"scale must be in (0, 1], got {delta}")
    return float(delta)


# ----------------------------------------------------------------- nets

@dataclass(frozen=True)
class DeltaNet:
    """A finite separated point set at a given scale.

    ``maximal`` marks nets built to also be covering at the same scale
    (up to the candidate-grid resolution).
    """

    scale: float
    points: np.ndarray
    maximal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "points", linalg.frozen(linalg.as_matrix(self.points)))

    def __len__(self) -> int:
        return self.points.shape[0]

    def min_separation(self) -> float:
        return float(min_pairwise_distance(self.points))


def min_pairwise_distance(points: np.ndarray) -> float:
    m = points.shape[0]
    if m < 2:
        return np.inf
    best = np.inf
    chunk = max(1, 2_000_000 // max(m, 1))
    for start in range(0, m, chunk):
        block = points[start:start + chunk]
        d2 = np.sum((block[:, None, :] - points[None, :, :]) ** 2, axis=-1)
        for i in range(block.shape[0]):
            d2[i, start + i] = np.inf
        best = min(best, float(np.sqrt(np.min(d2))))
    return best


def _farthest_point_net(candidates: np.ndarray, delta: float) -> np.ndarray:
    """Farthest-point insertion: separation >= delta, covering (of the
    candidates) < delta.  Starts from the lexicographically first
    candidate, so the result is deterministic."""
    order = np.lexsort(candidates.T[::-1])
    cands = candidates[order]
    chosen = [0]
    dist = np.linalg.norm(cands - cands[0], axis=1)
    while True:
        nxt = int(np.argmax(dist))
        if dist[nxt] < delta:
            break
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(cands - cands[nxt], axis=1))
    return cands[chosen]


def build_net(dim: int, delta: float, half_width: float = 1.0) -> DeltaNet:
    """Maximal delta-separated subset of [-half_width, half_width]^dim.

    Farthest-point insertion over a fine candidate grid (pitch delta/8),
    which is deterministic and maximal up to the grid resolution.
    """
    delta = _check_scale(delta)
    pitch = delta / 8.0
    per_axis = int(math.floor(2.0 * half_width / pitch)) + 1
    if per_axis ** dim > CANDIDATE_CAP:
        raise ResourceCapError("candidate grid too fine for build_net")
    axis = np.linspace(-half_width, half_width, per_axis)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    candidates = np.column_stack([g.ravel() for g in grids])
    return DeltaNet(delta, _farthest_point_net(candidates, delta), maximal=True)


def build_direction_net(sub_dim: int, ambient: int, delta: float) -> list[Subspace]:
    """Separated net of the Grassmannian of sub_dim-subspaces of R^ambient.

    Lines in the plane get an exact angle grid; other shapes use
    farthest-point insertion over a deterministic pseudo-random candidate
    cloud, so they are separated and covering only up to sampling density.
    """
    delta = _check_scale(delta)
    if sub_dim == 0 or sub_dim == ambient:
        return [Subspace.zero(ambient) if sub_dim == 0 else Subspace.full(ambient)]
    if sub_dim == 1 and ambient == 2:
        # pitch pi/floor(pi/delta) >= delta keeps the separation exact
        count = max(1, int(math.floor(np.pi / delta)))
        return [Subspace.from_vectors([[math.cos(a), math.sin(a)]])
                for a in np.arange(count) * (np.pi / count)]
    dim_g = sub_dim * (ambient - sub_dim)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence([0xD17EC7, sub_dim, ambient, int(round(1.0 / delta))])))
    if sub_dim == 1:
        n_cand = min(int(40 * (2.0 / delta) ** dim_g), 400_000)
        g = rng.standard_normal((n_cand, ambient))
        cands = g / np.linalg.norm(g, axis=1, keepdims=True)

        def line_dist(u, block):
            return np.arccos(np.clip(np.abs(block @ u), 0.0, 1.0))

        keep = [0]
        dist = line_dist(cands[0], cands)
        while True:
            nxt = int(np.argmax(dist))
            if dist[nxt] < delta:
                break
            keep.append(nxt)
            dist = np.minimum(dist, line_dist(cands[nxt], cands))
        return [Subspace(cands[i].reshape(-1, 1)) for i in keep]
    n_cand = min(int(10 * (2.0 / delta) ** dim_g), 4_000)
    cands = []
    while len(cands) < n_cand:
        res = linalg.orthonormalize(rng.standard_normal((ambient, sub_dim)))
        if res.rank == sub_dim:
            cands.append(Subspace(res.matrix))
    net: list[Subspace] = [cands[0]]
    dist = np.array([grassmann_distance(cands[0], c) for c in cands])
    while True:
        nxt = int(np.argmax(dist))
        if dist[nxt] < delta:
            break
        net.append(cands[nxt])
        dist = np.minimum(dist, [grassmann_distance(cands[nxt], c) for c in cands])
    return net


def snap_to_net(subspace: Subspace, net: list[Subspace]) -> int:
    """Index of the nearest net element."""
    return int(np.argmin([grassmann_distance(subspace, u) for u in net]))


# ----------------------------------------------------------------- cells

def cell_indices(points: np.ndarray, delta: float) -> np.ndarray:
    """Integer grid cells (anchored at -1, half-open, side delta)."""
    delta = _check_scale(delta)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n_cells = int(math.ceil(2.0 / delta - 1e-12))
    idx = np.floor((pts + 1.0) / delta).astype(np.int64)
    return np.clip(idx, 0, n_cells - 1)


def cells_per_axis(delta: float) -> int:
    return int(math.ceil(2.0 / delta - 1e-12))


def box_count(points_or_slabs, delta: float) -> int:
    """Number of occupied grid cells for points or slab neighborhoods."""
    if (not isinstance(points_or_slabs, np.ndarray)
            and all(isinstance(s, SlabNeighborhood) for s in points_or_slabs)):
        occupied: set = set()
        for s in points_or_slabs:
            occupied.update(map(tuple, s.cells(delta)))
        return len(occupied)
    pts = np.atleast_2d(np.asarray(points_or_slabs, dtype=float))
    if pts.shape[0] == 0:
        return 0
    return np.unique(cell_indices(pts, delta), axis=0).shape[0]


@dataclass(frozen=True)
class BoxFit:
    """Least-squares slope of log(count) against log(1/delta)."""

    slope: float
    intercept: float
    residual: float


def box_dimension_fit(deltas, counts) -> BoxFit:
    d = np.asarray(deltas, dtype=float)
    c = np.asarray(counts, dtype=float)
    if len(d) != len(c) or len(d) < 2:
        raise InvalidInputError("need at least two scales")
    if np.any(c <= 0):
        raise InvalidInputError("counts must be positive")
    x = np.log(1.0 / d)
    y = np.log(c)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return BoxFit(float(slope), float(intercept), resid)


@dataclass
class GridCounter:
    """Sparse per-cell multiplicity over the chart grid.

    Workers fill disjoint counters and merge once at the end; the merge is
    order-independent because addition commutes.
    """

    scale: float
    dim: int
    counts: dict = field(default_factory=dict)

    def add_cells(self, cells: np.ndarray, weight: int = 1) -> None:
        for row in map(tuple, np.atleast_2d(cells)):
            self.counts[row] = self.counts.get(row, 0) + weight

    def add_points(self, points: np.ndarray, weight: int = 1) -> None:
        self.add_cells(cell_indices(points, self.scale), weight)

    @property
    def occupied(self) -> int:
        return len(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def lp_power_sum(self, p: float) -> float:
        return float(sum(v ** p for v in self.counts.values()))

    def merge(self, other: "GridCounter") -> None:
        if other.scale != self.scale or other.dim != self.dim:
            raise InvalidInputError("cannot merge counters of different grids")
        for k, v in other.counts.items():
            self.counts[k] = self.counts.get(k, 0) + v

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(f"i{a}" for a in range(self.dim)) + ",count\n")
            for key in sorted(self.counts):
                fh.write(",".join(str(i) for i in key) + f",{self.counts[key]}\n")


# ------------------------------------------------------------- polytopes

def polytope_vertices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vertices of {x : a x <= b} by enumerating active constraint sets."""
    q = a.shape[1]
    rows = a.shape[0]
    vertices = []
    for combo in itertools.combinations(range(rows), q):
        sub = a[list(combo)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(combo)])
        if np.all(a @ x <= b + 1e-9):
            vertices.append(x)
    if not vertices:
        return np.zeros((0, q))
    v = np.array(vertices)
    return np.unique(np.round(v, 12), axis=0)


def polytope_volume(a: np.ndarray, b: np.ndarray) -> float:
    """Exact volume of a bounded polytope {x : a x <= b} (0 if flat/empty)."""
    q = a.shape[1]
    verts = polytope_vertices(a, b)
    if verts.shape[0] < q + 1:
        return 0.0
    if q == 1:
        return float(np.max(verts) - np.min(verts))
    from scipy.spatial import ConvexHull, QhullError
    try:
        return float(ConvexHull(verts).volume)
    except QhullError:
        return 0.0


# ----------------------------------------------------------------- slabs

@dataclass(frozen=True)
class SlabNeighborhood:
    """The delta-neighborhood, inside the chart, of the set of l-planes
    contained in a chart m-plane.

    In chart coordinates this is the product R_0 x ... x R_l, where R_j is
    the band of half-width delta around the j-th section (delta in each of
    the n-m normal directions, unconstrained along the m-l section
    directions) clipped to the slice box [-1, 1]^(n-l).
    """

    core: ChartMPlane
    scale: float

    def __post_init__(self):
        _check_scale(self.scale)

    @property
    def copies(self) -> int:
        return self.core.l + 1

    def _normal(self) -> np.ndarray:
        return self.core.normal_frame()

    def factor_deviation(self, j: int, points: np.ndarray) -> np.ndarray:
        """Max-norm of the normal deviation of slice points from section j."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nf = self._normal()
        if nf.shape[1] == 0:
            return np.zeros(pts.shape[0])
        dev = (pts - self.core.offsets[j]) @ nf
        return np.max(np.abs(dev), axis=1)

    def contains(self, point: ChartPoint | np.ndarray, slack: float = 0.0) -> bool:
        coords = point.coords if isinstance(point, ChartPoint) else \
            np.asarray(point, dtype=float).reshape(self.copies, -1)
        for j in range(self.copies):
            if self.factor_deviation(j, coords[j][None, :])[0] > self.scale + slack:
                return False
        return True

    def chart_distance(self, point: ChartPoint | np.ndarray) -> float:
        """Euclidean distance from a stacked chart point to the slab product."""
        coords = point.coords if isinstance(point, ChartPoint) else \
            np.asarray(point, dtype=float).reshape(self.copies, -1)
        nf = self._normal()
        total = 0.0
        for j in range(self.copies):
            if nf.shape[1] == 0:
                continue
            dev = np.abs((coords[j] - self.core.offsets[j]) @ nf)
            excess = np.maximum(dev - self.scale, 0.0)
            total += float(excess @ excess)
        return math.sqrt(total)

    def factor_measure(self, j: int) -> float:
        """Exact volume of R_j (band around section j clipped to the box)."""
        q = self.core.slice_dim
        nf = self._normal()
        a_rows = [np.eye(q), -np.eye(q)]
        b_rows = [np.ones(q), np.ones(q)]
        if nf.shape[1]:
            shift = nf.T @ self.core.offsets[j]
            a_rows += [nf.T, -nf.T]
            b_rows += [shift + self.scale, self.scale - shift]
        a = np.vstack(a_rows)
        b = np.concatenate(b_rows)
        return polytope_volume(a, b)

    def measure(self) -> float:
        out = 1.0
        for j in range(self.copies):
            out *= self.factor_measure(j)
        return out

    def factor_cells(self, j: int, grid_delta: float | None = None) -> np.ndarray:
        """Grid cells of the slice box whose centers lie in R_j."""
        gd = _check_scale(self.scale if grid_delta is None else grid_delta)
        q = self.core.slice_dim
        nf = self._normal()
        n_cells = cells_per_axis(gd)
        if nf.shape[1] == 0:
            # the band is the whole box
            ranges = [np.arange(n_cells)] * q
        else:
            verts = self._factor_vertices(j)
            if verts.shape[0] == 0:
                return np.zeros((0, q), dtype=np.int64)
            lo = cell_indices(np.min(verts, axis=0)[None, :], gd)[0]
            hi = cell_indices(np.max(verts, axis=0)[None, :], gd)[0]
            ranges = [np.arange(lo[i], hi[i] + 1) for i in range(q)]
        total = 1
        for r in ranges:
            total *= len(r)
        if total > CELL_CAP:
            raise ResourceCapError("slab rasterization exceeds the cell cap")
        mesh = np.meshgrid(*ranges, indexing="ij")
        idx = np.column_stack([m.ravel() for m in mesh])
        centers = -1.0 + (idx + 0.5) * gd
        keep = self.factor_deviation(j, centers) <= self.scale
        return idx[keep]

    def _factor_vertices(self, j: int) -> np.ndarray:
        q = self.core.slice_dim
        nf = self._normal()
        shift = nf.T @ self.core.offsets[j]
        a = np.vstack([np.eye(q), -np.eye(q), nf.T, -nf.T])
        b = np.concatenate([np.ones(q), np.ones(q), shift + self.scale,
                            self.scale - shift])
        return polytope_vertices(a, b)

    def cells(self, grid_delta: float | None = None) -> np.ndarray:
        """Grid cells of the chart product whose centers lie in the slab."""
        factor = [self.factor_cells(j, grid_delta) for j in range(self.copies)]
        total = 1
        for f in factor:
            total *= f.shape[0]
        if total > CELL_CAP:
            raise ResourceCapError("slab product exceeds the cell cap")
        if total == 0:
            q = self.core.slice_dim
            return np.zeros((0, q * self.copies), dtype=np.int64)
        out = factor[0]
        for f in factor[1:]:
            left = np.repeat(out, f.shape[0], axis=0)
            right = np.tile(f, (out.shape[0], 1))
            out = np.hstack([left, right])
        return out


def slab_membership(point: ChartPoint, slab: SlabNeighborhood,
                    slack: float = 0.0) -> bool:
    return slab.contains(point, slack)


def slab_measure(slab: SlabNeighborhood) -> float:
    return slab.measure()


def ball_measure(delta: float, l: int, n: int) -> float:
    """Volume of a delta-ball in the chart (dimension (n-l)(l+1))."""
    delta = _check_scale(delta)
    dim = (n - l) * (l + 1)
    unit = np.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)
    return float(unit * delta ** dim)


# --------------------------------------------------------------- spacing

def dyadic_radii(delta: float) -> np.ndarray:
    delta = _check_scale(delta)
    radii = []
    r = delta
    while r < 1.0 - 1e-12:
        radii.append(r)
        r *= 2.0
    radii.append(1.0)
    return np.array(radii)


@dataclass(frozen=True)
class SpacingReport:
    """Worst ball-counting ratio against the bound (r/delta)^exponent."""

    ok: bool
    worst_ratio: float
    worst_center: int
    worst_radius: float
    worst_count: int


def spacing_report(points: np.ndarray, delta: float, exponent: float,
                   cap: int = 30_000) -> SpacingReport:
    """Check #(points ∩ B_r(x)) <= (r/delta)^exponent for all members x and
    dyadic radii.  Balls are closed and member-centered."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    if m == 0:
        return SpacingReport(True, 0.0, -1, delta, 0)
    if m > cap:
        raise ResourceCapError(f"spacing check on {m} members exceeds the cap")
    if exponent < 0:
        raise InvalidInputError("exponent must be non-negative")
    radii = dyadic_radii(delta)
    worst = (0.0, -1, delta, 0)
    chunk = max(1, 4_000_000 // m)
    for start in range(0, m, chunk):
        block = pts[start:start + chunk]
        d = np.sqrt(np.sum((block[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
        for r in radii:
            counts = np.sum(d <= r + 1e-12, axis=1)
            bound = (r / delta) ** exponent
            i = int(np.argmax(counts))
            ratio = counts[i] / bound
            if ratio > worst[0]:
                worst = (float(ratio), start + i, float(r), int(counts[i]))
    return SpacingReport(worst[0] <= 1.0 + 1e-9, *worst)


def check_spacing(points: np.ndarray, delta: float, exponent: float) -> bool:
    return spacing_report(points, delta, exponent).ok


def partition_spacing(points: np.ndarray, delta: float, exponent: float,
                      m_bound: float, max_parts: int | None = None) -> list[np.ndarray]:
    """Partition a finite set into parts that each satisfy the ball-counting
    bound with constant 1, by greedy peeling.

    Requires the input to satisfy the bound with constant ``m_bound``
    (checked first).  Each round keeps, for the worst ball, the quota of
    members closest to its center and defers the rest to later parts.
    Returns index arrays into ``points``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    if m == 0:
        return []
    pre = spacing_report(pts, delta, exponent)
    if pre.worst_ratio > m_bound + 1e-9:
        raise InvalidInputError(
            f"precondition violated: ball at member {pre.worst_center} radius "
            f"{pre.worst_radius} holds {pre.worst_count} members "
            f"(ratio {pre.worst_ratio:.3f} > M={m_bound})")
    if max_parts is None:
        max_parts = max(16, int(64 * m_bound ** 2))
    order = np.lexsort(pts.T[::-1])
    pool = list(order)
    parts: list[np.ndarray] = []
    radii = dyadic_radii(delta)
    while pool:
        if len(parts) >= max_parts:
            raise ResourceCapError("partition did not converge within the part cap")
        cand = list(pool)
        while True:
            sub = pts[cand]
            d = np.sqrt(np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=-1))
            worst_ratio, worst = 1.0 + 1e-9, None
            for r in radii:
                counts = np.sum(d <= r + 1e-12, axis=1)
                bound = (r / delta) ** exponent
                i = int(np.argmax(counts))
                if counts[i] / bound > worst_ratio:
                    worst_ratio, worst = counts[i] / bound, (i, r)
            if worst is None:
                break
            i, r = worst
            members = [k for k in range(len(cand)) if d[i, k] <= r + 1e-12]
            quota = max(1, int(math.floor((r / delta) ** exponent + 1e-9)))
            members.sort(key=lambda k: (d[i, k], cand[k]))
            drop = {cand[k] for k in members[quota:]}
            cand = [c for c in cand if c not in drop]
        parts.append(np.array(cand, dtype=np.int64))
        taken = set(cand)
        pool = [p for p in pool if p not in taken]
    return parts
