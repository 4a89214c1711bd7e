"""Seeded geometry invariant suites.

Each suite runs a fixed-size randomized battery and returns a small result
record with the worst observed errors; the CLI's geometry-selftest
experiment and the acceptance tests share these implementations so a
criterion means the same thing everywhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, asdict

import numpy as np

from . import linalg
from .affine import (Chart, affine_distance, embed_tilde, embed_tilde_point,
                     incidence, rho_distance, ChartMPlane)
from .grassmann import (Subspace, distance, geodesic,
                        project_to_sub_grassmannian, random_subspace)
from .sampling import (random_affine_plane, random_chart_m_plane,
                       random_chart_point, random_point_on, rng_for)


@dataclass(frozen=True)
class GeodesicSuiteResult:
    samples: int
    max_symmetry_error: float
    min_triangle_slack: float
    max_scaling_error: float
    max_containment_residual: float
    runtime: float

    @property
    def passed(self) -> bool:
        return (self.max_symmetry_error <= 1e-9
                and self.min_triangle_slack >= -1e-9
                and self.max_scaling_error <= 1e-8
                and self.max_containment_residual <= 1e-8)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def geodesic_suite(seed: int, samples: int = 1000) -> GeodesicSuiteResult:
    """Distance symmetry, triangle inequality, constant-speed geodesics in
    G(2,4), and total geodesy inside a fixed 3-plane."""
    start = time.perf_counter()
    g = rng_for(seed, 1)
    pi = Subspace(np.eye(4)[:, :3])
    sym = scaling = containment = 0.0
    triangle = np.inf
    for _ in range(samples):
        v = random_subspace(g, 4, 2)
        w = random_subspace(g, 4, 2)
        u = random_subspace(g, 4, 2)
        d = distance(v, w)
        sym = max(sym, abs(d - distance(w, v)))
        triangle = min(triangle, distance(v, u) + distance(u, w) - d)
        geo = geodesic(v, w)
        for t in (0.25, 0.5, 0.75):
            scaling = max(scaling, abs(distance(v, geo.at(t)) - t * d))
        a = Subspace.from_vectors(pi.basis @ random_subspace(g, 3, 2).basis)
        b = Subspace.from_vectors(pi.basis @ random_subspace(g, 3, 2).basis)
        inner = geodesic(a, b)
        for t in (0.25, 0.5, 0.75):
            containment = max(containment, linalg.containment_residual(
                pi.basis, inner.at(t).basis))
    return GeodesicSuiteResult(samples, sym, triangle, scaling, containment,
                               time.perf_counter() - start)


@dataclass(frozen=True)
class ProjectionSuiteResult:
    samples: int
    contenders: int
    max_containment_residual: float
    min_minimality_slack: float
    runtime: float

    @property
    def passed(self) -> bool:
        return (self.max_containment_residual <= 1e-8
                and self.min_minimality_slack >= -1e-6)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def projection_suite(seed: int, samples: int = 500,
                     contenders: int = 200) -> ProjectionSuiteResult:
    """Nearest-point projection of lines onto the line-family of a random
    2-plane in R^3: ambient-projection containment plus minimality against
    random competitors."""
    start = time.perf_counter()
    g = rng_for(seed, 2)
    containment = 0.0
    slack = np.inf
    for _ in range(samples):
        v = random_subspace(g, 3, 1)
        pi = random_subspace(g, 3, 2)
        res = project_to_sub_grassmannian(v, pi)
        projected = pi.project(v.basis)
        norms = np.linalg.norm(projected, axis=0)
        keep = projected[:, norms > 1e-10]
        if keep.shape[1]:
            containment = max(containment, linalg.containment_residual(
                res.subspace.basis, keep / np.linalg.norm(keep, axis=0)))
        for _ in range(contenders):
            u = g.standard_normal(2)
            w = Subspace((pi.basis @ (u / np.linalg.norm(u))).reshape(-1, 1))
            slack = min(slack, distance(v, w) - res.distance)
    return ProjectionSuiteResult(samples, contenders, containment, float(slack),
                                 time.perf_counter() - start)


@dataclass(frozen=True)
class EmbeddingSuiteResult:
    samples: int
    incidence_disagreements: int
    parallelism_disagreements: int
    incident_pairs: int
    runtime: float

    @property
    def passed(self) -> bool:
        return (self.incidence_disagreements == 0
                and self.parallelism_disagreements == 0)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def embedding_suite(seed: int, samples: int = 1000, l: int = 1, m: int = 2,
                    n: int = 4) -> EmbeddingSuiteResult:
    """Incidence and parallelism agree exactly with the product embedding."""
    start = time.perf_counter()
    g = rng_for(seed, 3)
    bad_inc = bad_par = incident = 0
    tol = 1e-9
    for k in range(samples):
        v = random_chart_m_plane(g, l, m, n)
        if k % 2 == 0:
            p = random_point_on(g, v)
        else:
            p = random_chart_point(g, l, n, scale=0.9)
        chart_side = incidence(p, v, tol)
        tilde_side = embed_tilde(v).plane.point_distance(embed_tilde_point(p)) <= tol
        incident += chart_side
        bad_inc += chart_side != tilde_side
        v2 = (ChartMPlane(v.direction, random_chart_m_plane(g, l, m, n).offsets)
              if k % 2 else random_chart_m_plane(g, l, m, n))
        par_chart = v.parallel_to(v2, tol)
        par_tilde = embed_tilde(v).parallel_to(embed_tilde(v2), tol)
        bad_par += par_chart != par_tilde
    return EmbeddingSuiteResult(samples, bad_inc, bad_par, incident,
                                time.perf_counter() - start)


@dataclass(frozen=True)
class ChartSuiteResult:
    samples: int
    max_point_roundtrip: float
    max_projective_roundtrip: float
    ratio_low: float
    ratio_high: float
    ratio_prefix_low: float
    ratio_prefix_high: float
    runtime: float

    @property
    def passed(self) -> bool:
        n = 3
        return (self.max_point_roundtrip <= 1e-10
                and self.max_projective_roundtrip <= 1e-10
                and self.ratio_high <= 100 * n
                and self.ratio_low >= 1.0 / (100 * n)
                and self.ratio_prefix_low >= self.ratio_low
                and self.ratio_prefix_high <= self.ratio_high)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def chart_suite(seed: int, samples: int = 500) -> ChartSuiteResult:
    """Chart and projective round trips plus the two-metric comparability
    ratios (recorded over a prefix and the full sample; the prefix bounds
    must nest inside the full ones)."""
    from .affine import from_projective, to_projective
    start = time.perf_counter()
    g = rng_for(seed, 4)
    chart = Chart(1, 3)
    rt_point = rt_proj = 0.0
    ratios = []
    for _ in range(samples):
        cp = random_chart_point(g, 1, 3, scale=0.9)
        back = chart.point_of(chart.plane_of(cp))
        rt_point = max(rt_point, float(np.max(np.abs(back.coords - cp.coords))))
        pl = random_affine_plane(g, 3, 1, offset_scale=0.25)
        back_pl = from_projective(to_projective(pl))
        rt_proj = max(rt_proj, float(np.linalg.norm(back_pl.offset - pl.offset)))
        other = random_affine_plane(g, 3, 1, offset_scale=0.25)
        d = affine_distance(pl, other)
        if d > 1e-6:
            ratios.append(rho_distance(pl, other) / d)
    half = ratios[:len(ratios) // 2]
    return ChartSuiteResult(samples, rt_point, rt_proj,
                            float(min(ratios)), float(max(ratios)),
                            float(min(half)), float(max(half)),
                            time.perf_counter() - start)


def run_all(seed: int, scale: float = 1.0) -> dict:
    """All invariant suites at a size factor (1.0 = acceptance sizes)."""
    def sized(base):
        return max(10, int(base * scale))

    suites = {
        "geodesic": geodesic_suite(seed, sized(1000)),
        "projection": projection_suite(seed, sized(500), sized(200)),
        "embedding": embedding_suite(seed, sized(1000)),
        "chart": chart_suite(seed, sized(500)),
    }
    return {name: res.to_dict() for name, res in suites.items()}
