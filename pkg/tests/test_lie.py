"""Core rotation/pose primitives: hand examples, oracles, and properties."""

import numpy as np
import pytest

from eqslam.lie import (ORTHOGONALITY_TOL, Pose, Twist, orthonormalize,
                        projector, random_rotation, rotation_defect, se3_exp,
                        se3_log, skew, so3_exp, so3_log, tangent_basis, vee)

RNG = np.random.default_rng(91)


def _expm(m, order=30):
    """Series matrix exponential with scaling and squaring (test oracle)."""
    m = np.asarray(m, dtype=float)
    squarings = max(0, int(np.ceil(np.log2(max(np.abs(m).sum(), 1e-30)))) + 1)
    a = m / 2 ** squarings
    out = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, order):
        term = term @ a / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def test_skew_zero_is_zero_matrix():
    assert np.array_equal(skew(np.zeros(3)), np.zeros((3, 3)))


def test_skew_unit_z_layout():
    expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])
    assert np.array_equal(skew([0, 0, 1]), expected)


def test_skew_reproduces_cross_product():
    assert np.allclose(skew([1, 2, 3]) @ [4, 5, 6], [-3, 6, -3], atol=1e-15)
    v = RNG.normal(size=(500, 3))
    w = RNG.normal(size=(500, 3))
    got = np.einsum("nij,nj->ni", skew(v), w)
    assert np.abs(got - np.cross(v, w)).max() < 1e-12


def test_skew_antisymmetry():
    v = RNG.normal(size=(200, 3))
    w = RNG.normal(size=(200, 3))
    lhs = np.einsum("nij,nj->ni", skew(v), w)
    rhs = np.einsum("nij,nj->ni", skew(w), v)
    assert np.abs(lhs + rhs).max() < 1e-12


def test_vee_inverts_skew():
    v = RNG.normal(size=(40, 3))
    assert np.array_equal(vee(skew(v)), v)


def test_projector_axis_case():
    assert np.array_equal(projector(np.array([1.0, 0, 0])), np.diag([0, 1, 1.0]))


def test_projector_annihilates_input_and_matches_skew_square():
    y = RNG.normal(size=(100, 3))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    p = projector(y)
    assert np.abs(np.einsum("nij,nj->ni", p, y)).max() < 1e-12
    assert np.abs(p + skew(y) @ skew(y)).max() < 1e-12
    # idempotent
    assert np.abs(p @ p - p).max() < 1e-12


def test_projector_rejects_non_unit():
    with pytest.raises(ValueError):
        projector(np.array([1.0, 1.0, 0.0]))


def test_pose_identity_laws():
    p = Pose.random(RNG)
    ident = Pose.identity()
    assert np.allclose((p @ ident).matrix(), p.matrix(), atol=1e-15)
    assert np.allclose(Pose.identity().inverse().matrix(), np.eye(4))
    assert np.abs((p @ p.inverse()).matrix() - np.eye(4)).max() < 1e-9


def test_pose_compose_matches_homogeneous_product():
    for _ in range(50):
        a, b = Pose.random(RNG), Pose.random(RNG)
        assert np.abs((a @ b).matrix() - a.matrix() @ b.matrix()).max() < 1e-12


def test_pose_compose_associative():
    for _ in range(50):
        a, b, c = (Pose.random(RNG) for _ in range(3))
        assert np.abs(((a @ b) @ c).matrix()
                      - (a @ (b @ c)).matrix()).max() < 1e-10


def test_so3_exp_zero_and_quarter_turn():
    assert np.array_equal(so3_exp(np.zeros(3)), np.eye(3))
    rot = so3_exp(np.array([0, 0, np.pi / 2]))
    assert np.allclose(rot @ [1, 0, 0], [0, 1, 0], atol=1e-15)


def test_so3_exp_taylor_oracle():
    for _ in range(30):
        omega = RNG.normal(size=3) * 0.5
        dt = 1e-4
        linear = np.eye(3) + dt * skew(omega)
        assert np.abs(so3_exp(omega, dt) - linear).max() < 2 * dt ** 2


def test_so3_exp_stays_on_group_for_large_angles():
    axes = RNG.normal(size=(300, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = RNG.uniform(0, 10 * np.pi, size=300)
    rots = so3_exp(axes * angles[:, None])
    assert rotation_defect(rots) < 1e-9
    assert np.abs(np.linalg.det(rots) - 1).max() < 1e-9


def test_so3_log_roundtrip_includes_near_pi():
    for angle in (1e-10, 1e-5, 0.5, 2.0, np.pi - 1e-4, np.pi - 1e-8):
        axis = RNG.normal(size=3)
        axis /= np.linalg.norm(axis)
        w = axis * angle
        back = so3_log(so3_exp(w))
        assert np.abs(back - w).max() < 1e-6 * max(angle, 1.0)


def test_se3_exp_matches_series_exponential():
    for _ in range(30):
        tw = Twist(RNG.normal(size=3), RNG.normal(size=3))
        dt = RNG.uniform(0.1, 2.0)
        assert np.abs(se3_exp(tw, dt).matrix()
                      - _expm(tw.wedge() * dt)).max() < 1e-10


def test_se3_exp_pure_translation():
    pose = se3_exp(Twist(np.zeros(3), np.array([1.0, 2, 3])), 0.5)
    assert np.array_equal(pose.rotation, np.eye(3))
    assert np.allclose(pose.translation, [0.5, 1.0, 1.5])


def test_se3_log_roundtrip():
    for _ in range(30):
        tw = Twist(RNG.normal(size=3) * 0.8, RNG.normal(size=3))
        back = se3_log(se3_exp(tw))
        assert np.abs(back.as_vector() - tw.as_vector()).max() < 1e-9


def test_twist_wedge_vee_roundtrip_exact():
    tw = Twist(RNG.normal(size=3), RNG.normal(size=3))
    back = Twist.from_wedge(tw.wedge())
    assert np.array_equal(back.angular, tw.angular)
    assert np.array_equal(back.linear, tw.linear)


def test_adjoint_identity_and_pure_rotation():
    assert np.array_equal(Pose.identity().adjoint(), np.eye(6))
    rot = random_rotation(RNG)
    ad = Pose(rot, np.zeros(3)).adjoint()
    expected = np.zeros((6, 6))
    expected[:3, :3] = rot
    expected[3:, 3:] = rot
    assert np.array_equal(ad, expected)


def test_adjoint_defining_identity():
    for _ in range(50):
        pose = Pose.random(RNG)
        tw = Twist(RNG.normal(size=3), RNG.normal(size=3))
        conj = pose.matrix() @ tw.wedge() @ pose.inverse().matrix()
        assert np.abs(pose.adjoint() @ tw.as_vector()
                      - Twist.from_wedge(conj).as_vector()).max() < 1e-10


def test_adjoint_homomorphism():
    for _ in range(50):
        a, b = Pose.random(RNG), Pose.random(RNG)
        assert np.abs((a @ b).adjoint()
                      - a.adjoint() @ b.adjoint()).max() < 1e-10


def test_orthonormalize_repairs_perturbed_rotation():
    rot = random_rotation(RNG) + RNG.normal(scale=1e-4, size=(3, 3))
    fixed = orthonormalize(rot)
    assert rotation_defect(fixed) < 1e-12
    assert np.linalg.det(fixed) > 0


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose(np.eye(3) * 1.001, np.zeros(3))


def test_tangent_basis_is_orthonormal_and_tangent():
    y = RNG.normal(size=(50, 3))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    basis = tangent_basis(y)
    gram = np.einsum("nik,nil->nkl", basis, basis)
    assert np.abs(gram - np.eye(2)).max() < 1e-12
    assert np.abs(np.einsum("ni,nik->nk", y, basis)).max() < 1e-12


def test_tolerance_constants_exposed():
    assert ORTHOGONALITY_TOL == 1e-9
