"""Plane-family experiments: sharp-example generation, the broad-narrow
classifier with transversality certificates, the subspace-dimension
counting functional, the counting-inequality verifier, and the anisotropic
chart rescaling.

Families are finite separated subsets of the chart of m-planes.  Their
metric is the Euclidean metric on the feature embedding

    V  ->  (vec(P_direction)/sqrt(2), offset_0, ..., offset_l),

which is comparable to the chart metric on bounded sets (the projector
part is the chordal distance between directions).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .affine import ChartMPlane, ChartPoint, embed_tilde
from .discretize import (SlabNeighborhood, GridCounter, build_direction_net,
                         cells_per_axis, spacing_report, SpacingReport)
from .errors import InvalidInputError, ResourceCapError
from .grassmann import (Subspace, distance as grassmann_distance,
                        project_to_sub_grassmannian, random_subspace)

CELL_CAP = 16_000_000


# ---------------------------------------------------------------- params

@dataclass(frozen=True)
class FamilyParams:
    """Dimension parameters (l, m, d, n, beta) of a plane-family problem."""

    l: int
    m: int
    d: int
    n: int
    beta: float

    def __post_init__(self):
        if not 0 <= self.l <= self.m <= self.d < self.n:
            raise InvalidInputError("need 0 <= l <= m <= d < n")
        if not 0.0 <= self.beta <= self.m + 1:
            raise InvalidInputError("need beta in [0, m+1]")

    @property
    def spacing_exponent(self) -> float:
        return (self.m + 1) * (self.d - self.m) + self.beta

    @property
    def chart_dim(self) -> int:
        """N = (n-l)(l+1), the dimension of the chart of l-planes."""
        return (self.n - self.l) * (self.l + 1)

    @property
    def embedded_plane_dim(self) -> int:
        """k = (m-l)(l+1), the dimension of an embedded product plane."""
        return (self.m - self.l) * (self.l + 1)

    @property
    def union_dimension_target(self) -> float:
        return (self.l + 1) * (self.d - self.l) + min(self.l + 1, self.beta)

    def to_dict(self) -> dict:
        return {"l": self.l, "m": self.m, "d": self.d, "n": self.n, "beta": self.beta}

    @classmethod
    def from_dict(cls, data: dict) -> "FamilyParams":
        return cls(int(data["l"]), int(data["m"]), int(data["d"]),
                   int(data["n"]), float(data["beta"]))


def admissible_p_max(l: int, m: int, d: int, beta: float,
                     k_value: int | None = None) -> float:
    """Upper end of the exponent range for the counting inequality.

    The three terms are (d-k+beta+1)/(d-k+beta), (d+beta)/(d+beta-1/(d-m+2))
    and d-m+2, with k read as m by default.  When d-k+beta = 0 (beta = 0 at
    d = m) the first ratio degenerates; beta is then replaced by l+1 in that
    ratio, the same substitution the dimension argument uses to avoid
    beta = 0.  The result is always > 1.
    """
    if not 0 <= l <= m <= d:
        raise InvalidInputError("need 0 <= l <= m <= d")
    if not 0.0 <= beta <= m + 1:
        raise InvalidInputError("need beta in [0, m+1]")
    k = m if k_value is None else int(k_value)
    t3 = float(d - m + 2)
    denom1 = d - k + beta
    if denom1 <= 1e-12:
        denom1 = d - k + (l + 1.0)
    t1 = (denom1 + 1.0) / denom1 if denom1 > 0 else math.inf
    denom2 = d + beta - 1.0 / t3
    t2 = (d + beta) / denom2 if denom2 > 0 else math.inf
    return float(min(t1, t2, t3))


# --------------------------------------------------------------- families

@dataclass(frozen=True)
class PlaneFamily:
    """A finite separated family of chart m-planes at one scale."""

    params: FamilyParams
    scale: float
    members: tuple[ChartMPlane, ...]
    _features: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def feature_matrix(self) -> np.ndarray:
        """Rows embed members into Euclidean space for separation/spacing."""
        if self._features is None:
            rows = []
            for v in self.members:
                proj = v.direction.projector().ravel() / math.sqrt(2.0)
                rows.append(np.concatenate([proj, v.offsets.ravel()]))
            object.__setattr__(self, "_features", np.array(rows))
        return self._features

    def slab(self, index: int, scale: float | None = None) -> SlabNeighborhood:
        return SlabNeighborhood(self.members[index], self.scale if scale is None else scale)

    def slabs(self, scale: float | None = None) -> list[SlabNeighborhood]:
        return [self.slab(i, scale) for i in range(len(self))]

    def min_separation(self) -> float:
        from .discretize import min_pairwise_distance
        return float(min_pairwise_distance(self.feature_matrix()))

    def spacing(self, exponent: float | None = None) -> SpacingReport:
        e = self.params.spacing_exponent if exponent is None else exponent
        return spacing_report(self.feature_matrix(), self.scale, e)

    def total_slab_measure(self) -> float:
        return float(sum(s.measure() for s in self.slabs()))

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "params": self.params.to_dict(),
            "scale": self.scale,
            "members": [v.to_json() for v in self.members],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PlaneFamily":
        params = FamilyParams.from_dict(data["params"])
        members = [ChartMPlane.from_json(row, params.l, params.m, params.n)
                   for row in data["members"]]
        return cls(params, float(data["scale"]), tuple(members))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "PlaneFamily":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ------------------------------------------------- sharp example generator

def digit_set(beta: float, levels: int) -> list[int]:
    """Positions 1..levels kept by a density-beta digit selection."""
    return [i for i in range(1, levels + 1)
            if math.floor(i * beta) > math.floor((i - 1) * beta)]


def cantor_points(lo: float, hi: float, beta: float, pitch: float) -> np.ndarray:
    """Deterministic set of box dimension ``beta`` inside [lo, hi].

    Points are all subset sums of the scaled digits 2^-i with i running
    over a density-beta digit set; the count at resolution ``pitch`` is
    about ((hi-lo)/pitch)^beta and neighboring points are >= pitch apart.
    """
    span = hi - lo
    if span <= 0:
        raise InvalidInputError("empty interval")
    if pitch >= span or beta <= 0.0:
        return np.array([lo + span / 2.0 if beta <= 0.0 else lo])
    levels = int(math.floor(math.log2(span / pitch)))
    digits = digit_set(min(beta, 1.0), levels)
    values = np.array([0.0])
    for i in digits:
        values = np.concatenate([values, values + span * 2.0 ** (-i)])
    return lo + np.sort(values)


@dataclass(frozen=True)
class _Axis:
    """One generator coordinate: an index into a parameter block plus the
    1-d point set placed on it."""

    kind: str          # "tilt" | "offset" | "base"
    index: tuple
    points: np.ndarray


def _graded_axes(specs: list[tuple[str, tuple, float, float]], budget: float,
                 pitch: float) -> list[_Axis]:
    """Assign a full grid to the first floor(budget) axes, a Cantor set of
    the fractional dimension to the next, and anchors beyond."""
    axes = []
    remaining = budget
    for kind, index, lo, hi in specs:
        b = min(1.0, max(0.0, remaining))
        axes.append(_Axis(kind, index, cantor_points(lo, hi, b, pitch)))
        remaining -= b
    if remaining > 1e-9:
        raise InvalidInputError("dimension budget exceeds the available axes")
    return axes


def generate_sharp_example(params: FamilyParams, delta: float) -> PlaneFamily:
    """Deterministic family realizing the sharp-example constructions.

    For beta > l+1 members form a graded net inside the m-planes of a
    (d+1)-dimensional coordinate subspace; for beta <= l+1 they form a full
    net of the m-planes inside d-planes fibered over a beta-dimensional
    base set in the leading slice coordinates.  Grids use pitch 2*delta so
    the family is delta-separated with the spacing constant recorded by
    :meth:`PlaneFamily.spacing`.
    """
    l, m, d, n = params.l, params.m, params.d, params.n
    pitch = 2.0 * delta
    slice_dim = n - l
    n_i = n - d                    # leading slice coordinates (the base block)
    n_j = d - l                    # middle slice coordinates (direction block)
    r = m - l                      # section dimension
    j_axes = list(range(n_i, n_i + n_j))

    if params.beta > l + 1:
        # members inside the (d+1)-plane spanned by the first base axis,
        # the direction block and the slice shifts
        dir_axes = [0] + j_axes
        base_cols, tilt_cols = dir_axes[:r], dir_axes[r:]
        offset_axes = tilt_cols
        specs = []
        for jj in range(l + 1):
            for ax in offset_axes:
                specs.append(("offset", (jj, ax), -0.85, 0.85))
        for a in range(r):
            for b in range(len(tilt_cols)):
                specs.append(("tilt", (a, b), -0.45, 0.45))
        axes = _graded_axes(specs, params.spacing_exponent, pitch)
    else:
        base_cols, tilt_cols = j_axes[:r], j_axes[r:]
        specs = []
        for a in range(r):
            for b in range(len(tilt_cols)):
                specs.append(("tilt", (a, b), -0.45, 0.45))
        for jj in range(l + 1):
            for ax in tilt_cols:
                specs.append(("offset", (jj, ax), -0.85, 0.85))
        for jj in range(l + 1):
            for ax in range(n_i):
                specs.append(("base", (jj, ax), -0.85, 0.85))
        axes = _graded_axes(specs, params.spacing_exponent, pitch)

    sizes = [len(a.points) for a in axes]
    total = int(np.prod(sizes)) if sizes else 1
    if total > 2_000_000:
        raise ResourceCapError(f"sharp example would have {total} members")

    members = []
    for flat in range(total):
        tilt = np.zeros((r, len(tilt_cols)))
        offsets = np.zeros((l + 1, slice_dim))
        rem = flat
        for ax, size in zip(axes, sizes):
            val = float(ax.points[rem % size])
            rem //= size
            if ax.kind == "tilt":
                tilt[ax.index] = val
            elif ax.kind == "offset":
                jj, column = ax.index
                offsets[jj, column] += val
            else:
                jj, column = ax.index
                offsets[jj, column] += val
        cols = np.zeros((slice_dim, r))
        for a in range(r):
            cols[base_cols[a], a] = 1.0
            for b, ax in enumerate(tilt_cols):
                cols[ax, a] = tilt[a, b]
        direction = Subspace.from_vectors(cols) if r else Subspace.zero(slice_dim)
        members.append(ChartMPlane(direction, offsets))
    return PlaneFamily(params, delta, tuple(members))


def union_sample_points(family: PlaneFamily, pitch: float | None = None,
                        cap: int = 6_000_000) -> np.ndarray:
    """Point sample of the union of the member plane-sets in the chart.

    Each member contributes the product over slices of a pitch-spaced
    sample of its section inside the box; sampling at half the box-count
    scale keeps cell counts exact up to boundary slivers.
    """
    pitch = family.scale / 2.0 if pitch is None else pitch
    out = []
    total = 0
    for v in family.members:
        per_slice = []
        for j in range(v.l + 1):
            if v.direction.dim == 0:
                per_slice.append(v.offsets[j][None, :])
                continue
            half = math.sqrt(v.slice_dim)
            ticks = np.arange(-half, half + pitch / 2.0, pitch)
            mesh = np.meshgrid(*([ticks] * v.direction.dim), indexing="ij")
            coeff = np.column_stack([g.ravel() for g in mesh])
            pts = v.offsets[j][None, :] + coeff @ v.direction.basis.T
            pts = pts[np.max(np.abs(pts), axis=1) <= 1.0]
            per_slice.append(pts)
        rows = per_slice[0]
        for pts in per_slice[1:]:
            left = np.repeat(rows, pts.shape[0], axis=0)
            right = np.tile(pts, (rows.shape[0], 1))
            rows = np.hstack([left, right])
        total += rows.shape[0]
        if total > cap:
            raise ResourceCapError("union sample exceeds the point cap")
        out.append(rows)
    return np.vstack(out) if out else np.zeros((0, family.params.chart_dim))


# ------------------------------------------------------------------ bush

@dataclass(frozen=True)
class BushDirections:
    """Directions of the family members whose slabs touch the ball around
    an anchor chart point, snapped to a separated direction net."""

    anchor: ChartPoint
    entries: tuple[tuple[Subspace, tuple[int, ...]], ...]

    @property
    def directions(self) -> list[Subspace]:
        return [e[0] for e in self.entries]

    @property
    def counts(self) -> list[int]:
        return [len(e[1]) for e in self.entries]

    def total(self) -> int:
        return sum(self.counts)


def bush_directions(anchor: ChartPoint, family: PlaneFamily,
                    net: list[Subspace] | None = None) -> BushDirections:
    """Members whose slab neighborhood meets the delta-ball of the anchor,
    viewed as net directions."""
    delta = family.scale
    touching = [i for i in range(len(family))
                if family.slab(i).chart_distance(anchor) <= delta]
    if not touching:
        return BushDirections(anchor, ())
    if net is None:
        r = family.params.m - family.params.l
        net = build_direction_net(r, family.params.n - family.params.l, delta)
    buckets: dict[int, list[int]] = {}
    for i in touching:
        key = int(np.argmin([grassmann_distance(family.members[i].direction, u)
                             for u in net]))
        buckets.setdefault(key, []).append(i)
    entries = tuple((net[key], tuple(idx)) for key, idx in sorted(buckets.items()))
    return BushDirections(anchor, entries)


# ------------------------------------------------------ broad-narrow step

@dataclass(frozen=True)
class ClassifierConstants:
    """Concrete values for the classifier's 'sufficiently large' constants."""

    K: int
    c1: float
    c_tilde: float
    c_prime: float
    separation_factor: float = 100.0

    @classmethod
    def for_params(cls, params: FamilyParams, K: int | None = None) -> "ClassifierConstants":
        n = params.n
        c_tilde = 10.0 * n
        c_prime = 10.0 * c_tilde ** (params.d - params.l + 1)
        c1 = 100.0 * n * n
        if K is None:
            K = feasible_K(params)
        return cls(int(K), c1, c_tilde, c_prime)

    def ball_radius(self, n: int) -> float:
        return float(self.K) ** (-n)

    def step_threshold(self, params: FamilyParams) -> float:
        """Per-step residual bound for the greedy tuple construction; large
        enough that the final certificate volume clears c_prime K^-n."""
        steps = params.d - params.m + 1
        vol_target = self.c_prime * self.K ** (-params.n)
        per_step = vol_target ** (1.0 / steps) if steps else 0.0
        return max(self.c_tilde / self.K, per_step)


def feasible_K(params: FamilyParams) -> int:
    """Smallest power of two making the default constants usable at desk
    scale: the per-step threshold and the volume target must fit below 1/2
    (unit vectors cannot exceed volume 1)."""
    n = params.n
    c_tilde = 10.0 * n
    c_prime = 10.0 * (10.0 * n) ** (params.d - params.l + 1)
    K = 2
    while K < 2 ** 24:
        if c_tilde / K <= 0.5 and c_prime * K ** (-n) <= 0.5:
            return K
        K *= 2
    raise InvalidInputError("no feasible K below 2^24")


def default_broad_narrow_K(eps: float, p: float, closure_constant: float = 1.0,
                           cap: int = 2 ** 20) -> int:
    """Smallest power of two K with closure_constant (log K)^p K^(-eps p) <= 1/2.

    This is the induction-closing choice; it grows far beyond what finite
    experiments can net, so callers normally pass an explicit K and this
    value is only reported.
    """
    K = 2
    while K <= cap:
        if closure_constant * math.log(K) ** p * K ** (-eps * p) <= 0.5:
            return K
        K *= 2
    return cap


@dataclass(frozen=True)
class TransverseTuple:
    """A (d-m+2)-tuple of direction balls with a volume certificate: the
    spanned parallelepiped of the witness vectors is too large for any
    (d-l)-plane to approximately contain all the balls."""

    centers: tuple[Subspace, ...]
    radius: float
    vectors: np.ndarray
    volume: float
    threshold: float
    K: int

    def certified(self) -> bool:
        return self.volume >= self.threshold - 1e-12


@dataclass(frozen=True)
class Narrow:
    """Witness plane with at least half the selected balls near the
    sub-Grassmannian of subspaces inside it."""

    witness: Subspace
    covered_fraction: float
    selected: tuple

    kind = "narrow"


@dataclass(frozen=True)
class Broad:
    tuple: TransverseTuple
    selected: tuple

    kind = "broad"


def _select_balls(bush: BushDirections, constants: ClassifierConstants, n: int):
    """Significant, comparable-count, separated ball selection.

    Balls are centered on bush directions (greedy cover at radius K^-n),
    filtered at the significance fraction K^(-n^4), grouped in dyadic count
    classes (the largest class wins), then thinned to 100 K^-n separation.
    """
    radius = constants.ball_radius(n)
    total = bush.total()
    try:
        significance = total * math.exp(-(float(n) ** 4) * math.log(constants.K))
    except OverflowError:
        significance = 0.0
    order = sorted(range(len(bush.entries)), key=lambda i: (-bush.counts[i], i))
    centers: list[tuple[Subspace, list[int]]] = []
    assigned = set()
    for i in order:
        if i in assigned:
            continue
        members = list(bush.entries[i][1])
        assigned.add(i)
        for j in order:
            if j in assigned:
                continue
            if grassmann_distance(bush.entries[i][0], bush.entries[j][0]) <= radius:
                members.extend(bush.entries[j][1])
                assigned.add(j)
        centers.append((bush.entries[i][0], members))
    centers = [(c, ms) for c, ms in centers if len(ms) >= significance]
    classes: dict[int, list[tuple[Subspace, list[int]]]] = {}
    for c, ms in centers:
        classes.setdefault(int(math.floor(math.log2(len(ms)))), []).append((c, ms))
    best_class = max(classes, key=lambda k: (sum(len(ms) for _, ms in classes[k]), k))
    chosen = []
    for c, ms in sorted(classes[best_class], key=lambda e: -len(e[1])):
        if all(grassmann_distance(c, c2) > constants.separation_factor * radius
               for c2, _ in chosen):
            chosen.append((c, ms))
    return chosen


def broad_narrow_classify(bush: BushDirections, params: FamilyParams,
                          constants: ClassifierConstants | None = None,
                          K: int | None = None) -> Narrow | Broad:
    """Classify a direction bush.

    The greedy certificate construction runs first: starting from the
    heaviest ball's orthonormal basis it keeps adding a unit vector from
    some ball at maximal distance from the span so far.  Completing
    d-l+1 vectors certifies a transverse tuple (Broad); getting stuck
    means every ball direction hugs the current span, whose extension to a
    (d-l)-plane is a Narrow witness covering all selected balls.
    """
    if not bush.entries:
        raise InvalidInputError("empty bush")
    if constants is None:
        constants = ClassifierConstants.for_params(params, K)
    q = params.n - params.l
    selected = _select_balls(bush, constants, params.n)
    threshold = constants.step_threshold(params)

    first = selected[0][0]
    vectors = [first.basis[:, i] for i in range(first.dim)]
    balls = [first]
    target = params.d - params.l + 1
    while len(vectors) < target:
        if vectors:
            span = linalg.orthonormalize(np.column_stack(vectors)).matrix
        else:
            span = np.zeros((q, 0))
        best = (-1.0, None, None)
        for center, _ in selected:
            resid = center.basis - span @ (span.T @ center.basis)
            dec = linalg.svd(resid)
            sigma = float(dec.singular_values[0]) if len(dec.singular_values) else 0.0
            if sigma > best[0]:
                vec = center.basis @ dec.right[:, 0]
                best = (sigma, vec / np.linalg.norm(vec), center)
        sigma, vec, ball = best
        if sigma < threshold:
            witness_dim = params.d - params.l
            padded = linalg.orthonormal_completion(span, q)[:, :witness_dim]
            witness = Subspace(padded)
            near = sum(
                1 for center, _ in selected
                if project_to_sub_grassmannian(center, witness).distance
                <= constants.c1 / constants.K
            )
            return Narrow(witness, near / len(selected), tuple(selected))
        vectors.append(vec)
        balls.append(ball)

    volume = linalg.gram_volume(np.column_stack(vectors))
    vol_target = constants.c_prime * constants.K ** (-params.n)
    tup = TransverseTuple(tuple(balls), constants.ball_radius(params.n),
                          linalg.frozen(np.column_stack(vectors)), volume,
                          vol_target, constants.K)
    if not tup.certified():
        # the per-step threshold guarantees this cannot happen
        raise AssertionError("greedy certificate below the volume target")
    return Broad(tup, tuple(selected))


def random_transverse_tuple(params: FamilyParams, rng: np.random.Generator,
                            K: int | None = None,
                            n_directions: int | None = None) -> TransverseTuple:
    """Certified tuple from classifying a random direction bush."""
    r = params.m - params.l
    q = params.n - params.l
    count = n_directions or 4 * (params.d - params.l + 2)
    anchor = ChartPoint(np.zeros((params.l + 1, q)))
    for _ in range(64):
        entries = tuple((random_subspace(rng, q, r), (i,)) for i in range(count))
        bush = BushDirections(anchor, entries)
        result = broad_narrow_classify(bush, params, K=K)
        if isinstance(result, Broad):
            return result.tuple
    raise InvalidInputError("could not draw a broad bush (parameters too tight)")


# -------------------------------------------------- counting functionals

def dim_projection(u: Subspace, w: Subspace, tol: float = 1e-9) -> int:
    """dim of the orthogonal projection of u into w (rank of the overlap)."""
    if u.dim == 0 or w.dim == 0:
        return 0
    return linalg.rank_of(w.basis.T @ u.basis, tol)


@dataclass(frozen=True)
class BlInstance:
    """Evaluation of the counting functional over a candidate lattice.

    best_value is a certified lower bound of
    sup_U (dim U - (p/J) sum_j dim proj_{W_j} U); the true supremum ranges
    over all subspaces while the candidates are a finite lattice.
    """

    subspaces: tuple[Subspace, ...]
    p: float
    best_value: float
    best_candidate: Subspace
    n_candidates: int

    def value_of(self, u: Subspace) -> float:
        j = len(self.subspaces)
        total = sum(dim_projection(u, w) for w in self.subspaces)
        return u.dim - (self.p / j) * total


def _coordinate_candidates(ambient: int, factor_dim: int | None) -> list[Subspace]:
    out = []
    if ambient <= 6:
        import itertools
        for size in range(1, ambient):
            for combo in itertools.combinations(range(ambient), size):
                out.append(Subspace.spanned_by_axes(ambient, combo))
        return out
    for i in range(ambient):
        out.append(Subspace.spanned_by_axes(ambient, [i]))
    if factor_dim:
        copies = ambient // factor_dim
        for c in range(copies):
            out.append(Subspace.spanned_by_axes(
                ambient, range(c * factor_dim, (c + 1) * factor_dim)))
    return out


def bl_constant_lower(subspaces, p: float, rng: np.random.Generator | None = None,
                      n_random: int = 12, factor_dim: int | None = None,
                      extra_candidates=()) -> BlInstance:
    """Maximize the dimension-counting functional over a candidate lattice.

    Candidates: zero, the full space, every W_j-complement, sums and
    pairwise intersections of the complements, coordinate subspaces, plus
    seeded random subspaces of every dimension.  The result is a lower
    bound of the true supremum and monotone in the candidate set.
    """
    ws = tuple(subspaces)
    if not ws:
        raise InvalidInputError("need at least one subspace")
    jj = len(ws)
    if not 1.0 <= p <= jj + 1e-12:
        raise InvalidInputError(f"exponent {p} outside [1, J={jj}]")
    ambient = ws[0].ambient_dim
    comps = [w.complement() for w in ws]
    candidates: list[Subspace] = [Subspace.zero(ambient), Subspace.full(ambient)]
    candidates += list(comps)
    for a in range(jj):
        for b in range(a + 1, jj):
            candidates.append(comps[a].sum(comps[b]))
            candidates.append(comps[a].intersect(comps[b]))
    total_sum = comps[0]
    for c in comps[1:]:
        total_sum = total_sum.sum(c)
    candidates.append(total_sum)
    candidates += _coordinate_candidates(ambient, factor_dim)
    candidates += list(extra_candidates)
    if rng is not None:
        for r in range(1, ambient):
            for _ in range(n_random):
                candidates.append(random_subspace(rng, ambient, r))

    best_value, best_candidate = -math.inf, candidates[0]
    for u in candidates:
        total = sum(dim_projection(u, w) for w in ws)
        value = u.dim - (p / jj) * total
        if value > best_value + 1e-12:
            best_value, best_candidate = value, u
    return BlInstance(ws, float(p), float(best_value), best_candidate, len(candidates))


def tuple_obstruction_subspaces(tup: TransverseTuple, params: FamilyParams) -> list[Subspace]:
    """The W_j of the counting functional: orthogonal complements (in the
    product space R^N) of the embedded tuple directions."""
    l = params.l
    out = []
    for center in tup.centers:
        plane = ChartMPlane(center, np.zeros((l + 1, params.n - params.l)))
        tilde = embed_tilde(plane)
        out.append(tilde.direction.complement())
    return out


@dataclass(frozen=True)
class BlBoundReport:
    instance: BlInstance
    rhs: float
    ok: bool
    slack: float


def verify_bl_bound(tup: TransverseTuple, params: FamilyParams, p: float,
                    rng: np.random.Generator | None = None) -> BlBoundReport:
    """Check the certified lower bound against the closed-form ceiling

        (l+1)(d-l) + beta - ((l+1)(d-m) + beta) p.

    A violation would falsify the transversality certificate or the case
    analysis behind the ceiling, so it is reported as a hard failure.
    """
    if not tup.certified():
        raise InvalidInputError("tuple is not certified transverse")
    if params.beta > params.l + 1:
        # the counting inequality (and hence this ceiling) assumes
        # beta <= l+1; larger beta is reduced before reaching it
        raise InvalidInputError("bound requires beta <= l+1")
    p_max = admissible_p_max(params.l, params.m, params.d, params.beta)
    if p > p_max + 1e-9:
        raise InvalidInputError(f"exponent {p} above the admissible maximum {p_max}")
    ws = tuple_obstruction_subspaces(tup, params)
    inst = bl_constant_lower(ws, p, rng, factor_dim=params.n - params.l)
    l, m, d, beta = params.l, params.m, params.d, params.beta
    rhs = (l + 1) * (d - l) + beta - ((l + 1) * (d - m) + beta) * p
    return BlBoundReport(inst, float(rhs), inst.best_value <= rhs + 1e-9,
                         float(rhs - inst.best_value))


# ------------------------------------------------------- counting norms

def overlap_counter(family: PlaneFamily, grid_delta: float | None = None,
                    cell_cap: int = CELL_CAP) -> GridCounter:
    """Per-cell multiplicity of the member slabs on the chart grid."""
    delta = family.scale if grid_delta is None else grid_delta
    dim = family.params.chart_dim
    if cells_per_axis(delta) ** dim > cell_cap:
        raise ResourceCapError("chart grid exceeds the cell cap; coarsen delta")
    counter = GridCounter(delta, dim)
    for i in range(len(family)):
        counter.add_cells(family.slab(i).cells(delta))
    return counter


def lp_counting_norm(family: PlaneFamily, p: float,
                     grid_delta: float | None = None,
                     counter: GridCounter | None = None) -> float:
    """Riemann-sum L^p norm of the slab overlap function on the chart grid:
    (sum over cells of count^p * delta^N)^(1/p), counts from cell centers."""
    if counter is None:
        counter = overlap_counter(family, grid_delta)
    n_dim = family.params.chart_dim
    return float((counter.lp_power_sum(p) * counter.scale ** n_dim) ** (1.0 / p))


@dataclass(frozen=True)
class KakeyaRow:
    delta: float
    members: int
    lhs: float
    rhs: float
    ratio: float

    def to_dict(self) -> dict:
        return {"delta": self.delta, "members": self.members, "lhs": self.lhs,
                "rhs": self.rhs, "ratio": self.ratio}


@dataclass(frozen=True)
class KakeyaReport:
    p: float
    eps: float
    rows: tuple[KakeyaRow, ...]
    ratio_bound: float
    growth_bound: float

    @property
    def bounded(self) -> bool:
        return all(r.ratio <= self.ratio_bound for r in self.rows)

    @property
    def max_growth(self) -> float:
        growths = [b.ratio / a.ratio for a, b in zip(self.rows, self.rows[1:])
                   if a.ratio > 0]
        return max(growths, default=1.0)

    @property
    def ok(self) -> bool:
        return self.bounded and self.max_growth <= self.growth_bound + 1e-9


def kakeya_ratio(family: PlaneFamily, p: float, eps: float) -> KakeyaRow:
    """One row of the counting-inequality sweep at the family's scale."""
    params = family.params
    delta = family.scale
    lhs = lp_counting_norm(family, p)
    total = family.total_slab_measure()
    exponent = (params.m - params.l) * (params.d - params.m) * (1.0 - 1.0 / p) + eps
    rhs = delta ** (-exponent) * total ** (1.0 / p)
    return KakeyaRow(delta, len(family), float(lhs), float(rhs),
                     float(lhs / rhs) if rhs > 0 else math.inf)


def verify_kakeya_inequality(families, p: float, eps: float,
                             ratio_bound: float = 10.0,
                             growth_bound: float = 2.0) -> KakeyaReport:
    """Sweep the inequality ratio across families at decreasing scales.

    The statement is asymptotic, so acceptance is on boundedness of the
    ratio and on its growth per scale halving, not on a specific constant.
    """
    fams = list(families)
    if not fams:
        raise InvalidInputError("need at least one family")
    scales = [f.scale for f in fams]
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise InvalidInputError("families must come at strictly decreasing scales")
    rows = tuple(kakeya_ratio(f, p, eps) for f in fams)
    return KakeyaReport(float(p), float(eps), rows, ratio_bound, growth_bound)


# -------------------------------------------------------------- rescaling

@dataclass(frozen=True)
class SlabRescaling:
    """Anisotropic dilation about a core m-plane, slice by slice.

    Normal deviations from the core sections scale by K while positions
    along the sections are fixed, so the K^-1-neighborhood of the core
    maps onto a unit-size slab and every delta-slab inside it becomes a
    (delta K)-slab.  K = 1 is the identity.
    """

    core: ChartMPlane
    K: float

    def point_coords(self, coords: np.ndarray) -> np.ndarray:
        nf = self.core.normal_frame()
        out = np.array(coords, dtype=float)
        for j in range(self.core.l + 1):
            dev = nf.T @ (out[j] - self.core.offsets[j])
            out[j] = out[j] + (self.K - 1.0) * (nf @ dev)
        return out

    def chart_point(self, point: ChartPoint) -> ChartPoint:
        return ChartPoint(self.point_coords(point.coords))

    def m_plane(self, plane: ChartMPlane) -> ChartMPlane:
        nf = self.core.normal_frame()
        t = np.eye(self.core.slice_dim) + (self.K - 1.0) * (nf @ nf.T)
        if plane.direction.dim:
            direction = Subspace.from_vectors(t @ plane.direction.basis)
        else:
            direction = plane.direction
        offsets = self.point_coords(plane.offsets)
        return ChartMPlane(direction, offsets)

    def inverse(self) -> "SlabRescaling":
        return SlabRescaling(self.core, 1.0 / self.K)


def rescale_slab(core: ChartMPlane, K: float) -> SlabRescaling:
    if K <= 0:
        raise InvalidInputError("dilation factor must be positive")
    return SlabRescaling(core, float(K))


def rescale_family(family: PlaneFamily, core: ChartMPlane, K: float) -> PlaneFamily:
    """Image family at scale delta*K (members leaving the chart are dropped)."""
    mapping = rescale_slab(core, K)
    members = []
    for v in family.members:
        try:
            members.append(mapping.m_plane(v))
        except Exception:
            continue
    return PlaneFamily(family.params, family.scale * K, tuple(members))
