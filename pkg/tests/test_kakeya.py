import numpy as np
import pytest

from grasskit import discretize as dz
from grasskit import kakeya as kk
from grasskit.affine import ChartMPlane, ChartPoint, incidence
from grasskit.errors import InvalidInputError
from grasskit.grassmann import Subspace
from grasskit.sampling import rng_for, random_chart_m_plane, random_point_on


# -------------------------------------------------------- admissible p

def test_p_max_line_case():
    # min{2, 2/(2 - 1/2), 2} = 4/3
    assert kk.admissible_p_max(0, 1, 1, 1.0) == pytest.approx(4.0 / 3.0)


def test_p_max_third_term_binds():
    assert kk.admissible_p_max(0, 1, 1, 1.0) <= 2.0
    assert kk.admissible_p_max(0, 2, 2, 2.0) <= 2.0


def test_p_max_degenerate_substitution():
    # beta = 0 at d = m: the first ratio uses beta -> l+1
    assert kk.admissible_p_max(0, 1, 1, 0.0) == pytest.approx(2.0)


def test_p_max_exceeds_one_everywhere():
    for n in range(2, 7):
        for d in range(1, n):
            for m in range(0, d + 1):
                for l in range(0, m + 1):
                    for beta in (0.25, 0.5, 1.0, m + 1.0):
                        assert kk.admissible_p_max(l, m, d, beta) > 1.0


# ------------------------------------------------------- sharp examples

def test_sharp_example_invalid_params():
    with pytest.raises(InvalidInputError):
        kk.FamilyParams(1, 0, 1, 2, 0.5)
    with pytest.raises(InvalidInputError):
        kk.FamilyParams(0, 1, 2, 2, 0.5)
    with pytest.raises(InvalidInputError):
        kk.FamilyParams(0, 1, 1, 2, 2.5)


def test_sharp_example_full_net_count():
    # beta = m+1 at d = m: a full net of chart m-planes, count ~ delta^-(m+1)
    params = kk.FamilyParams(0, 1, 1, 2, 2.0)
    delta = 2.0 ** -4
    fam = kk.generate_sharp_example(params, delta)
    ideal = delta ** -2.0
    assert ideal / 16 <= len(fam) <= ideal * 4
    assert fam.min_separation() >= delta


def test_sharp_example_cantor_count():
    params = kk.FamilyParams(0, 1, 1, 2, 0.5)
    delta = 2.0 ** -8
    fam = kk.generate_sharp_example(params, delta)
    ideal = delta ** -0.5
    assert ideal / 4 <= len(fam) <= ideal * 4


def test_sharp_example_spacing_constant():
    for (l, m, d, n, beta) in [(0, 1, 1, 2, 1.0), (0, 1, 1, 2, 0.5),
                               (1, 1, 2, 3, 1.0), (0, 1, 2, 3, 1.0)]:
        fam = kk.generate_sharp_example(kk.FamilyParams(l, m, d, n, beta), 2.0 ** -4)
        rep = fam.spacing()
        assert rep.worst_ratio <= 4.0, (l, m, d, n, beta, rep)
        assert fam.min_separation() >= fam.scale - 1e-12


def test_sharp_example_union_slope_flat_case():
    # l=0, m=d=1, n=2, beta=1: the union fills the plane, slope 2
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    deltas = [2.0 ** -k for k in range(4, 9)]
    counts = [dz.box_count(kk.union_sample_points(kk.generate_sharp_example(params, d)), d)
              for d in deltas]
    fit = dz.box_dimension_fit(deltas, counts)
    assert abs(fit.slope - 2.0) <= 0.15


def test_family_json_round_trip(tmp_path):
    fam = kk.generate_sharp_example(kk.FamilyParams(1, 1, 2, 3, 1.0), 2.0 ** -3)
    path = tmp_path / "family.json"
    fam.save(path)
    back = kk.PlaneFamily.load(path)
    assert back.params == fam.params
    assert len(back) == len(fam)
    assert np.allclose(back.feature_matrix(), fam.feature_matrix())


# ----------------------------------------------------------------- bush

def test_bush_empty_off_all_slabs():
    fam = kk.generate_sharp_example(kk.FamilyParams(0, 1, 1, 2, 0.0), 2.0 ** -6)
    # the single member passes through x ~ 0; anchor far away
    anchor = ChartPoint(np.array([[0.9, 0.9]]))
    bush = kk.bush_directions(anchor, fam)
    assert bush.total() == 0


def test_bush_single_member_direction():
    fam = kk.generate_sharp_example(kk.FamilyParams(0, 1, 1, 2, 0.0), 2.0 ** -6)
    member = fam.members[0]
    anchor = ChartPoint(member.offsets.copy())
    bush = kk.bush_directions(anchor, fam)
    assert bush.total() == 1
    d = np.arccos(np.clip(abs(float(
        bush.directions[0].basis[:, 0] @ member.direction.basis[:, 0])), 0, 1))
    assert d <= fam.scale


def test_bush_directions_separated_brute_force():
    fam = kk.generate_sharp_example(kk.FamilyParams(0, 1, 1, 2, 1.0), 2.0 ** -4)
    anchor = ChartPoint(np.zeros((1, 2)))
    bush = kk.bush_directions(anchor, fam)
    dirs = bush.directions
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            from grasskit.grassmann import distance
            assert distance(dirs[i], dirs[j]) >= fam.scale - 1e-9


# ---------------------------------------------------------- broad/narrow

def test_classify_planar_bush_is_narrow():
    params = kk.FamilyParams(0, 1, 2, 3, 1.0)
    inside = Subspace(np.eye(3)[:, :2])
    g = rng_for(61)
    entries = []
    for i in range(10):
        v = inside.basis @ g.standard_normal((2, 1))
        entries.append((Subspace(v / np.linalg.norm(v)), (i,)))
    bush = kk.BushDirections(ChartPoint(np.zeros((1, 3))), tuple(entries))
    res = kk.broad_narrow_classify(bush, params)
    assert res.kind == "narrow"
    assert res.covered_fraction >= 0.5
    # the witness contains the spanning plane of the bush
    assert res.witness.dim == 2


def test_classify_spread_bush_is_broad():
    # an orthonormal-frame spread exceeding d-l dimensions
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    entries = tuple((Subspace(np.eye(2)[:, [i]]), (i,)) for i in range(2))
    bush = kk.BushDirections(ChartPoint(np.zeros((1, 2))), entries)
    res = kk.broad_narrow_classify(bush, params)
    assert res.kind == "broad"
    # oracle: the frame's parallelepiped has volume exactly 1
    assert res.tuple.volume == pytest.approx(1.0, abs=1e-9)
    assert res.tuple.certified()


def test_broad_certificate_avoids_random_planes():
    # contrapositive: no sampled plane can be near every tuple ball
    from grasskit.grassmann import project_to_sub_grassmannian, random_subspace
    params = kk.FamilyParams(0, 1, 2, 3, 1.0)
    g = rng_for(62)
    tup = kk.random_transverse_tuple(params, g)
    probe = 100.0 * tup.K ** (-(params.n - params.l)) + tup.radius
    for trial in range(100):
        pi = random_subspace(rng_for(63, trial), 3, 2)
        dists = [project_to_sub_grassmannian(c, pi).distance for c in tup.centers]
        assert max(dists) > probe


def test_tuple_generation_all_parameter_sets():
    for (l, m, d, n) in [(0, 1, 1, 2), (0, 1, 2, 3), (1, 2, 2, 4)]:
        params = kk.FamilyParams(l, m, d, n, 1.0)
        tup = kk.random_transverse_tuple(params, rng_for(64, l, m, d, n))
        assert len(tup.centers) == d - m + 2
        assert tup.vectors.shape == (n - l, d - l + 1)
        assert tup.certified()
        # certificate volume is the gram volume of the witness vectors
        from grasskit.linalg import gram_volume
        assert tup.volume == pytest.approx(gram_volume(tup.vectors), abs=1e-12)


# -------------------------------------------------------- dim projection

def test_dim_projection_kernel_case():
    w = Subspace(np.eye(4)[:, :2])
    assert kk.dim_projection(w.complement(), w) == 0


def test_dim_projection_full_space():
    w = Subspace(np.eye(4)[:, :2])
    assert kk.dim_projection(Subspace.full(4), w) == 2


def test_dim_projection_matches_rank_oracle():
    from grasskit.grassmann import random_subspace
    for trial in range(30):
        g = rng_for(65, trial)
        u = random_subspace(g, 6, int(g.integers(1, 5)))
        w = random_subspace(g, 6, int(g.integers(1, 5)))
        expected = np.linalg.matrix_rank(w.projector() @ u.basis, tol=1e-9)
        assert kk.dim_projection(u, w) == expected
        # rank-nullity refinement: >= dim W + dim U - N, +1 when U misses W-perp
        lower = w.dim + u.dim - 6
        assert kk.dim_projection(u, w) >= lower
        if not u.contains(w.complement(), 1e-9):
            assert kk.dim_projection(u, w) >= lower + 1


# ------------------------------------------------------------- BL bounds

def test_bl_worked_2d_example():
    # exhaustive oracle over {0, e1, e2, diagonal, R^2} gives max 0
    w1 = Subspace.spanned_by_axes(2, [0])
    w2 = Subspace.spanned_by_axes(2, [1])
    inst = kk.bl_constant_lower([w1, w2], 2.0)
    assert inst.best_value == pytest.approx(0.0, abs=1e-12)
    diag = Subspace.from_vectors([np.array([1.0, 1.0])])
    for u, expect in [(Subspace.zero(2), 0.0), (w1, 0.0), (w2, 0.0),
                      (Subspace.full(2), 0.0), (diag, -1.0)]:
        assert inst.value_of(u) == pytest.approx(expect, abs=1e-12)


def test_bl_full_space_obstructions():
    ws = [Subspace.full(3)] * 2
    for p in (1.0, 1.5, 2.0):
        inst = kk.bl_constant_lower(ws, p)
        assert inst.best_value == pytest.approx(max(0.0, 3 * (1 - p)), abs=1e-12)


def test_bl_single_subspace_kernel_maximizer():
    w = Subspace(np.eye(5)[:, :2])
    inst = kk.bl_constant_lower([w], 1.0)
    assert inst.best_value == pytest.approx(3.0)
    # the kernel candidate attains the maximum (projection dimension 0)
    assert inst.value_of(w.complement()) == pytest.approx(3.0)


def test_bl_monotone_in_candidates():
    from grasskit.grassmann import random_subspace
    g = rng_for(66)
    ws = [random_subspace(g, 4, 2) for _ in range(2)]
    base = kk.bl_constant_lower(ws, 1.5)
    extra = [random_subspace(g, 4, k) for k in (1, 2, 3) for _ in range(5)]
    bigger = kk.bl_constant_lower(ws, 1.5, extra_candidates=extra)
    assert bigger.best_value >= base.best_value - 1e-12


def test_bl_invalid_exponent():
    with pytest.raises(InvalidInputError):
        kk.bl_constant_lower([Subspace.full(2)], 3.5)


def test_verify_bl_bound_p1_equals_k():
    # p=1 ceiling is (l+1)(m-l) = k, attained at U = R^N
    params = kk.FamilyParams(1, 2, 2, 4, 1.0)
    tup = kk.random_transverse_tuple(params, rng_for(67))
    rep = kk.verify_bl_bound(tup, params, 1.0, rng_for(68))
    assert rep.rhs == pytest.approx(params.embedded_plane_dim)
    assert rep.instance.best_value == pytest.approx(params.embedded_plane_dim)
    assert rep.ok


def test_verify_bl_bound_never_fails_up_to_pmax():
    for (l, m, d, n) in [(0, 1, 1, 2), (0, 1, 2, 3), (1, 2, 2, 4)]:
        params = kk.FamilyParams(l, m, d, n, 1.0)
        p_max = kk.admissible_p_max(l, m, d, 1.0)
        for trial in range(5):
            tup = kk.random_transverse_tuple(params, rng_for(69, l, m, d, trial))
            for p in np.linspace(1.0, p_max, 4):
                rep = kk.verify_bl_bound(tup, params, float(p), rng_for(70, trial))
                assert rep.ok, (l, m, d, n, p, rep)


# ---------------------------------------------------------- L^p counting

def vertical_family(params, delta, positions):
    members = tuple(
        ChartMPlane(Subspace.spanned_by_axes(2, [1]), np.array([[x, 0.0]]))
        for x in positions)
    return kk.PlaneFamily(params, delta, members)


def test_lp_norm_single_slab():
    params = kk.FamilyParams(0, 1, 1, 2, 0.0)
    delta = 2.0 ** -5
    fam = vertical_family(params, delta, [0.1])
    measure = fam.total_slab_measure()
    for p in (1.0, 1.5, 2.0):
        val = kk.lp_counting_norm(fam, p)
        assert measure ** (1 / p) / 2 <= val <= measure ** (1 / p) * 2


def test_lp_norm_additive_at_p1():
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    delta = 2.0 ** -5
    fam = vertical_family(params, delta, [-0.5, 0.5])
    val = kk.lp_counting_norm(fam, 1.0)
    total = fam.total_slab_measure()
    rel = 4 * delta * 2
    assert abs(val - total) <= rel * total


def test_lp_norm_tiling_count_one():
    # delta^-1 parallel slabs tiling the chart: count ~ 1 everywhere
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    delta = 2.0 ** -5
    positions = np.arange(-1.0 + delta, 1.0, 2 * delta)
    fam = vertical_family(params, delta, positions)
    val = kk.lp_counting_norm(fam, 2.0)
    assert val == pytest.approx(2.0, rel=0.25)  # (2^2)^(1/2)


def test_kakeya_sweep_single_member():
    params = kk.FamilyParams(0, 1, 1, 2, 0.0)
    fams = [kk.generate_sharp_example(params, 2.0 ** -k) for k in (4, 5, 6)]
    rep = kk.verify_kakeya_inequality(fams, 1.0, 0.1)
    assert rep.ok
    assert all(r.ratio <= 1.0 for r in rep.rows)


def test_kakeya_p1_ratio_below_one():
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    fams = [kk.generate_sharp_example(params, 2.0 ** -k) for k in (5, 6)]
    rep = kk.verify_kakeya_inequality(fams, 1.0, 0.1)
    assert all(r.ratio <= 1.0 + 1e-9 for r in rep.rows)


# -------------------------------------------------------------- rescaling

def test_rescale_identity():
    core = random_chart_m_plane(rng_for(71), 1, 2, 3)
    resc = kk.rescale_slab(core, 1.0)
    coords = rng_for(72).uniform(-1, 1, size=(2, 2))
    assert np.allclose(resc.point_coords(coords), coords)


def test_rescale_dilates_normal_widths_exactly():
    # l=0: points at normal distance t from the core map to distance K t
    g = rng_for(73)
    core = random_chart_m_plane(g, 0, 1, 2, offset_scale=0.1)
    resc = kk.rescale_slab(core, 4.0)
    nf = core.normal_frame()
    for t in (0.01, 0.05, 0.1):
        x = core.offsets[0] + t * nf[:, 0]
        y = resc.point_coords(x[None, :])[0]
        dev = abs(float(nf[:, 0] @ (y - core.offsets[0])))
        assert dev == pytest.approx(4.0 * t, abs=1e-12)


def test_rescale_preserves_incidence():
    g = rng_for(74)
    core = random_chart_m_plane(g, 1, 2, 4, offset_scale=0.15)
    resc = kk.rescale_slab(core, 2.0)
    for _ in range(20):
        v = random_chart_m_plane(g, 1, 2, 4, offset_scale=0.1)
        p = random_point_on(g, v, spread=0.15)
        try:
            v2, p2 = resc.m_plane(v), resc.chart_point(p)
        except Exception:
            continue
        assert incidence(p, v, 1e-9) and incidence(p2, v2, 1e-7)


def test_rescale_inverse_round_trip():
    g = rng_for(75)
    core = random_chart_m_plane(g, 1, 1, 3, offset_scale=0.2)
    resc = kk.rescale_slab(core, 8.0)
    coords = g.uniform(-0.5, 0.5, size=(2, 2))
    back = resc.inverse().point_coords(resc.point_coords(coords))
    assert np.allclose(back, coords, atol=1e-12)


def test_rescale_family_spacing_at_new_scale():
    # a rescaled compliant family re-passes the spacing check at delta*K
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    delta, K = 2.0 ** -7, 4.0
    fam = kk.generate_sharp_example(params, delta)
    core = fam.members[len(fam) // 2]
    near = [v for v in fam.members
            if abs(v.offsets[0][0] - core.offsets[0][0]) <= 1.0 / (2 * K)]
    sub = kk.PlaneFamily(params, delta, tuple(near))
    out = kk.rescale_family(sub, core, K)
    assert out.scale == pytest.approx(delta * K)
    rep = out.spacing()
    assert rep.worst_ratio <= 4.0


def test_verify_bl_bound_rejects_large_beta():
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    tup = kk.random_transverse_tuple(params, rng_for(76))
    with pytest.raises(InvalidInputError, match="beta"):
        kk.verify_bl_bound(tup, kk.FamilyParams(0, 1, 1, 2, 2.0), 1.0)


def test_bl_full_space_margin_symbolic():
    # at U = R^N the ceiling minus the functional value is, in exact
    # arithmetic, (p-1) * ((l+1)(n-d) - beta), non-negative on the
    # inequality's hypothesis beta <= l+1 <= (l+1)(n-d)
    from fractions import Fraction
    for (l, m, d, n) in [(0, 1, 1, 2), (0, 1, 2, 3), (1, 2, 2, 4), (1, 2, 3, 5)]:
        for beta in (Fraction(0), Fraction(1, 2), Fraction(l + 1)):
            big_n = (l + 1) * (n - l)
            k = (l + 1) * (m - l)
            for p in (Fraction(1), Fraction(9, 8), Fraction(3, 2)):
                value_full = big_n - p * (big_n - k)
                rhs = (l + 1) * (d - l) + beta - ((l + 1) * (d - m) + beta) * p
                margin = rhs - value_full
                assert margin == (p - 1) * ((l + 1) * (n - d) - beta)
                assert margin >= 0


def test_lp_norm_resource_cap():
    from grasskit.errors import ResourceCapError
    params = kk.FamilyParams(1, 2, 2, 4, 1.0)
    v = random_chart_m_plane(rng_for(78), 1, 2, 4)
    fam = kk.PlaneFamily(params, 2.0 ** -6, (v,))
    with pytest.raises(ResourceCapError):
        kk.lp_counting_norm(fam, 2.0)


def test_box_count_accepts_slabs():
    from grasskit.discretize import SlabNeighborhood
    params = kk.FamilyParams(0, 1, 1, 2, 1.0)
    delta = 2.0 ** -4
    fam = vertical_family(params, delta, [-0.5, 0.5])
    slabs = [SlabNeighborhood(v, delta) for v in fam.members]
    from_slabs = dz.box_count(slabs, delta)
    counter = kk.overlap_counter(fam)
    assert from_slabs == counter.occupied
