import numpy as np
import pytest

from grasskit import grassmann as gr
from grasskit.errors import InvalidInputError


def rng_for(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def line(*coords):
    v = np.asarray(coords, dtype=float)
    return gr.Subspace.from_vectors([v / np.linalg.norm(v)])


def planar_line(angle):
    return line(np.cos(angle), np.sin(angle))


# ------------------------------------------------------ principal angles

def test_principal_angles_identical():
    v = gr.random_subspace(rng_for(1), 4, 2)
    data = gr.principal_angles(v, v)
    assert np.max(data.angles) <= 1e-9


def test_principal_angles_orthogonal_lines():
    data = gr.principal_angles(line(1, 0), line(0, 1))
    assert data.angles[0] == pytest.approx(np.pi / 2)


def test_principal_angles_mixed_pair():
    # oracle: overlap matrix of the two bases is diag(1, cos 0.3)
    v = gr.Subspace(np.eye(3)[:, :2])
    w = gr.Subspace.from_vectors([
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, np.cos(0.3), np.sin(0.3)]),
    ])
    data = gr.principal_angles(v, w)
    assert np.allclose(np.sort(data.angles), [0.0, 0.3], atol=1e-12)


def test_aligned_bases_biorthogonality():
    for trial in range(50):
        g = rng_for(2, trial)
        v = gr.random_subspace(g, 5, 2)
        w = gr.random_subspace(g, 5, 2)
        data = gr.principal_angles(v, w)
        overlap = data.left_aligned.T @ data.right_aligned
        assert np.max(np.abs(overlap - np.diag(np.cos(data.angles)))) <= 1e-9
        for aligned in (data.left_aligned, data.right_aligned):
            assert np.allclose(aligned.T @ aligned, np.eye(2), atol=1e-9)


def test_principal_angles_dim_mismatch():
    with pytest.raises(InvalidInputError):
        gr.principal_angles(line(1, 0), gr.Subspace(np.eye(2)))


# -------------------------------------------------------------- distance

def test_distance_zero_iff_same():
    v = gr.random_subspace(rng_for(3), 4, 2)
    assert gr.distance(v, v) == pytest.approx(0.0, abs=1e-9)


def test_distance_orthogonal_lines():
    assert gr.distance(line(1, 0), line(0, 1)) == pytest.approx(np.pi / 2)


def test_distance_from_principal_angle_oracle():
    v = gr.Subspace(np.eye(3)[:, :2])
    w = gr.Subspace.from_vectors([
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, np.cos(0.3), np.sin(0.3)]),
    ])
    assert gr.distance(v, w) == pytest.approx(0.3, abs=1e-12)


def test_distance_symmetry_and_orthogonal_invariance():
    from grasskit import linalg
    for trial in range(30):
        g = rng_for(4, trial)
        v = gr.random_subspace(g, 4, 2)
        w = gr.random_subspace(g, 4, 2)
        d = gr.distance(v, w)
        assert abs(d - gr.distance(w, v)) <= 1e-9
        q = linalg.orthonormalize(g.standard_normal((4, 4))).matrix
        qv = gr.Subspace.from_vectors(q @ v.basis)
        qw = gr.Subspace.from_vectors(q @ w.basis)
        assert abs(gr.distance(qv, qw) - d) <= 1e-9


def test_triangle_inequality_sampled():
    for trial in range(200):
        g = rng_for(5, trial)
        a, b, c = (gr.random_subspace(g, 4, 2) for _ in range(3))
        assert gr.distance(a, c) <= gr.distance(a, b) + gr.distance(b, c) + 1e-9


# -------------------------------------------------------------- geodesic

def test_geodesic_endpoints():
    g = rng_for(6)
    v = gr.random_subspace(g, 4, 2)
    w = gr.random_subspace(g, 4, 2)
    geo = gr.geodesic(v, w)
    assert geo.at(0.0).same(v, 1e-9)
    assert geo.at(1.0).same(w, 1e-8)


def test_geodesic_planar_rotation_oracle():
    # two lines at angle 0.8: the midpoint is the line rotated 0.4 from V
    geo = gr.geodesic(planar_line(0.1), planar_line(0.9))
    mid = geo.at(0.5)
    assert mid.same(planar_line(0.5), 1e-10)
    assert gr.distance(planar_line(0.1), mid) == pytest.approx(0.4, abs=1e-10)


def test_geodesic_distance_scaling():
    for trial in range(30):
        g = rng_for(7, trial)
        v = gr.random_subspace(g, 4, 2)
        w = gr.random_subspace(g, 4, 2)
        d = gr.distance(v, w)
        geo = gr.geodesic(v, w)
        for t in (0.25, 1.0 / 3.0, 0.5, 0.75):
            assert gr.distance(v, geo.at(t)) == pytest.approx(t * d, abs=1e-8)


def test_geodesic_right_angle_flagged():
    geo = gr.geodesic(line(1, 0), line(0, 1))
    assert geo.non_unique
    assert geo.at(1.0).same(line(0, 1), 1e-10)


def test_geodesic_total_geodesy_inside_plane():
    # both endpoints inside a fixed 3-plane of R^4: the whole arc stays in it
    from grasskit import linalg
    pi = gr.Subspace(np.eye(4)[:, :3])
    for trial in range(20):
        g = rng_for(8, trial)
        v = gr.Subspace.from_vectors(pi.basis @ gr.random_subspace(g, 3, 2).basis)
        w = gr.Subspace.from_vectors(pi.basis @ gr.random_subspace(g, 3, 2).basis)
        geo = gr.geodesic(v, w)
        for t in np.linspace(0.0, 1.0, 7):
            assert linalg.containment_residual(pi.basis, geo.at(t).basis) <= 1e-8


# ------------------------------------------------------------ projection

def test_projection_inside_is_identity():
    pi = gr.Subspace(np.eye(3)[:, :2])
    v = gr.Subspace.from_vectors([np.array([1.0, 1.0, 0.0])])
    res = gr.project_to_sub_grassmannian(v, pi)
    assert res.subspace.same(v, 1e-10)
    assert res.distance == pytest.approx(0.0, abs=1e-10)
    assert res.unique


def test_projection_line_to_coordinate_plane():
    # oracle: 1-d minimization of the distance over lines in the xy-plane
    v = line(1, 0, 1)
    pi = gr.Subspace(np.eye(3)[:, :2])
    res = gr.project_to_sub_grassmannian(v, pi)
    angles = np.linspace(0.0, np.pi, 20001)
    dists = [gr.distance(v, planar_line3(a)) for a in angles]
    best = min(dists)
    assert res.distance <= best + 1e-6
    assert res.subspace.same(line(1, 0, 0), 1e-8)


def planar_line3(angle):
    return gr.Subspace.from_vectors([np.array([np.cos(angle), np.sin(angle), 0.0])])


def test_projection_rank_zero_flagged():
    v = line(0, 0, 1)
    pi = gr.Subspace(np.eye(3)[:, :2])
    res = gr.project_to_sub_grassmannian(v, pi)
    assert not res.unique
    assert res.subspace.dim == 1
    assert pi.contains(res.subspace, 1e-10)


def test_projection_minimality_and_containment():
    for trial in range(30):
        g = rng_for(9, trial)
        v = gr.random_subspace(g, 4, 2)
        pi = gr.random_subspace(g, 4, 3)
        res = gr.project_to_sub_grassmannian(v, pi)
        assert pi.contains(res.subspace, 1e-9)
        # the ambient projection of v sits inside the Grassmannian projection
        pv = pi.project(v.basis)
        assert gr.Subspace.from_vectors(res.subspace.basis).contains(
            gr.Subspace.from_vectors(pv), 1e-8)
        for _ in range(40):
            contender = gr.Subspace.from_vectors(pi.basis @ gr.random_subspace(g, 3, 2).basis)
            assert res.distance <= gr.distance(v, contender) + 1e-6


# ----------------------------------------------------- vector projection

def test_vector_projection_fixed_point():
    pi = gr.Subspace(np.eye(3)[:, :2])
    x = np.array([0.3, -0.8, 0.0])
    assert np.allclose(gr.vector_projection(x, pi), x)


def test_vector_projection_coordinate_plane():
    pi = gr.Subspace(np.eye(3)[:, :2])
    assert np.allclose(gr.vector_projection([1.0, 2.0, 3.0], pi), [1.0, 2.0, 0.0])


def test_vector_projection_pythagoras():
    g = rng_for(10)
    for _ in range(20):
        pi = gr.random_subspace(g, 5, 3)
        x = g.standard_normal(5)
        p = gr.vector_projection(x, pi)
        assert np.allclose(x @ x, p @ p + (x - p) @ (x - p))
        assert np.allclose(gr.vector_projection(p, pi), p)
