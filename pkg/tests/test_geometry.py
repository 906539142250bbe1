import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tablescene.errors import InvalidSceneError
from tablescene.evidence import TABLE
from tablescene.geometry import (CORNER_SIGNS, GeometryParams, Obb, PairRelation, Pose6D, TableFrame,
                                 classify_pair, extract_evidence, is_higher, is_stable, matrix_to_quat,
                                 obb_corners, quat_from_axis_angle, quat_to_matrix, sat_separation,
                                 to_table_frame)
from tablescene.harness import reference_tabletop_scene
from tablescene.scene import SceneModel

from conftest import box, random_rotation, scene_of


def test_quaternion_renormalized_on_construction():
    p = Pose6D((0, 0, 0), (2.0, 0.0, 0.0, 0.0))
    assert abs(np.linalg.norm(p.rotation) - 1.0) < 1e-12


def test_matrix_quaternion_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        q = random_rotation(rng)
        R = quat_to_matrix(q)
        np.testing.assert_allclose(quat_to_matrix(matrix_to_quat(R)), R, atol=1e-12)


def test_identity_frame_leaves_pose_unchanged():
    p = Pose6D((0.1, 0.2, 0.3), quat_from_axis_angle((1, 2, 3), 0.4))
    assert to_table_frame(p, TableFrame()).allclose(p)


def test_translation_frame_moves_origin():
    f = TableFrame(Pose6D((0.0, 0.0, -0.8)))
    np.testing.assert_allclose(to_table_frame(Pose6D(), f).translation, [0, 0, -0.8])


def test_random_frame_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(100):
        F = Pose6D(rng.normal(size=3), random_rotation(rng))
        P = Pose6D(rng.normal(size=3), random_rotation(rng))
        back = F.inverse().compose(to_table_frame(P, TableFrame(F)))
        assert back.allclose(P, atol=1e-9)


def test_unit_cube_corners():
    c = obb_corners(box((0, 0, 0), (0.5, 0.5, 0.5)))
    np.testing.assert_allclose(c, 0.5 * CORNER_SIGNS)
    np.testing.assert_allclose(c[0], [-0.5, -0.5, -0.5])
    np.testing.assert_allclose(c[7], [0.5, 0.5, 0.5])


def test_translated_cube_corners():
    c = obb_corners(box((1, 0, 0), (0.5, 0.5, 0.5)))
    assert set(np.round(c[:, 0], 12)) == {0.5, 1.5}


def test_rotated_cube_has_same_corner_set():
    q = quat_from_axis_angle((0, 0, 1), math.pi / 2)
    a = {tuple(np.round(p, 9)) for p in obb_corners(box((0, 0, 0), (0.5, 0.5, 0.5)))}
    b = {tuple(np.round(p, 9) + 0.0) for p in obb_corners(box((0, 0, 0), (0.5, 0.5, 0.5), q))}
    assert a == b


def test_nonpositive_extent_rejected():
    with pytest.raises(InvalidSceneError):
        box((0, 0, 0), (0.1, 0.0, 0.1))


@pytest.mark.parametrize("angle, expected", [(0.0, True), (45.0, False), (90.0, True), (1.9, True), (2.1, False)])
def test_stability(angle, expected):
    q = quat_from_axis_angle((1, 0, 0), math.radians(angle))
    assert is_stable(box((0, 0, 0), (0.5, 0.5, 0.5), q)) is expected


def test_flush_stack_is_contact():
    a = box((0, 0, 0.5), (0.5, 0.5, 0.5))
    b = box((0, 0, -0.5), (0.5, 0.5, 0.5))
    assert classify_pair(a, b) is PairRelation.CONTACT


def test_coincident_cubes_intersect():
    a = box((0, 0, 0), (0.5, 0.5, 0.5))
    assert classify_pair(a, box((0, 0, 0), (0.5, 0.5, 0.5))) is PairRelation.INTERSECT


def test_distant_cubes_none():
    assert classify_pair(box((0, 0, 0), (0.5,) * 3), box((3, 0, 0), (0.5,) * 3)) is PairRelation.NONE


def test_containment_intersects():
    assert classify_pair(box((0, 0, 0), (0.5,) * 3), box((0, 0, 0), (0.05,) * 3)) is PairRelation.INTERSECT
    assert classify_pair(box((0, 0, 0), (0.05,) * 3), box((0, 0, 0), (0.5,) * 3)) is PairRelation.INTERSECT


@pytest.mark.parametrize("gap, expected", [
    (0.004, PairRelation.CONTACT), (0.006, PairRelation.NONE),
    (-0.004, PairRelation.CONTACT), (-0.006, PairRelation.INTERSECT),
])
def test_tolerance_band(gap, expected):
    a = box((0, 0, 0), (0.05,) * 3)
    b = box((0.1 + gap, 0, 0), (0.05,) * 3)
    assert classify_pair(a, b) is expected


def test_higher_strict():
    a, b = box((0, 0, 0.3), (0.1,) * 3), box((0, 0, 0.1), (0.1,) * 3)
    assert is_higher(a, b) and not is_higher(b, a)
    c = box((1, 0, 0.3), (0.1,) * 3)
    assert not is_higher(a, c) and not is_higher(c, a)


def test_single_cube_on_table():
    ev = extract_evidence(scene_of(box((0, 0, 0.05), (0.05,) * 3)))
    assert ev.holds("stable", "O1")
    assert ev.holds("contact", "O1", TABLE) and ev.holds("contact", TABLE, "O1")
    assert not ev.holds("hover", "O1")
    assert ev.holds("higher", "O1", TABLE)
    assert ev.holds("table", TABLE) and not ev.holds("table", "O1")


def test_reference_scene_contacts_and_hover():
    ev = extract_evidence(reference_tabletop_scene())
    assert ev.holds("contact", "O2", "O3") and ev.holds("contact", "O3", "O4")
    assert not ev.holds("contact", "O4", "O5") and not ev.holds("contact", "O2", "O5")
    assert [c for c in ev.constants if ev.holds("hover", c)] == ["O5"]
    assert [c for c in ev.constants if c != TABLE and not ev.holds("stable", c)] == ["O4", "O6"]
    for a, b in (("O5", "O2"), ("O4", "O2"), ("O4", "O3")):
        assert ev.holds("higher", a, b)
    inter = sorted(a for a in ev.true_atoms() if a[0] == "intersect")
    assert inter == [("intersect", ("O1", "O6")), ("intersect", ("O6", "O1"))]


def test_evidence_is_closed_world_and_explicit():
    sc = scene_of(box((0, 0, 0.05), (0.05,) * 3), box((0.5, 0, 0.05), (0.05,) * 3))
    ev = extract_evidence(sc)
    n = len(sc.constants())
    assert len(ev) == 3 * n + 3 * n * n


def test_degenerate_obb_in_scene_rejected():
    # bypass constructor validation to emulate a corrupted box
    b = box((0, 0, 0.05), (0.05,) * 3)
    object.__setattr__(b, "half_extents", np.array([0.05, -0.01, 0.05]))
    with pytest.raises(InvalidSceneError):
        extract_evidence(scene_of(b))


def test_evidence_text_format():
    ev = extract_evidence(scene_of(box((0, 0, 0.05), (0.05,) * 3)))
    lines = ev.to_text().splitlines()
    assert "stable(O1)" in lines and "!hover(O1)" in lines


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

def _obb_strategy():
    coord = st.floats(-0.3, 0.3, allow_nan=False)
    half = st.floats(0.01, 0.2, allow_nan=False)
    quat = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
        lambda q: np.linalg.norm(q) > 0.1)
    return st.builds(lambda c, h, q: Obb(Pose6D(c, q), h), st.tuples(coord, coord, coord),
                     st.tuples(half, half, half), quat)


@settings(max_examples=300, deadline=None)
@given(_obb_strategy(), _obb_strategy())
def test_classify_pair_symmetric(a, b):
    assert classify_pair(a, b) is classify_pair(b, a)
    assert sat_separation(a, b) == sat_separation(b, a)


@settings(max_examples=100, deadline=None)
@given(st.lists(_obb_strategy(), min_size=1, max_size=4))
def test_evidence_respects_structural_hard_rules(boxes):
    ev = extract_evidence(scene_of(*boxes))
    cs = ev.constants
    for x in cs:
        assert not ev.holds("higher", x, x)
        assert not ev.holds("contact", x, x)
        assert not ev.holds("intersect", x, x)
        for y in cs:
            assert ev.holds("contact", x, y) == ev.holds("contact", y, x)
            assert ev.holds("intersect", x, y) == ev.holds("intersect", y, x)
            assert not (ev.holds("contact", x, y) and ev.holds("intersect", x, y))
            assert not (ev.holds("higher", x, y) and ev.holds("higher", y, x))


@settings(max_examples=100, deadline=None)
@given(_obb_strategy())
def test_corners_match_pose_applied_to_signs(b):
    np.testing.assert_allclose(obb_corners(b), b.pose.apply(CORNER_SIGNS * b.half_extents), atol=1e-12)


def test_geometry_params_validation():
    with pytest.raises(ValueError):
        GeometryParams(contact_eps=0)
    with pytest.raises(ValueError):
        GeometryParams(stable_angle_tol=45)


def test_scene_json_round_trip():
    sc = reference_tabletop_scene()
    again = SceneModel.from_dict(sc.to_dict())
    assert again.to_dict() == sc.to_dict()
