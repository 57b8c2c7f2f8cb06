import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from slicemotion.geometry import (
    GeometryError,
    LossConfig,
    RigidTransform,
    apply_to_point,
    check_rotation,
    compose,
    dump_transforms,
    euler_jacobian,
    euler_to_matrix,
    geodesic_slice_loss,
    invert,
    load_transforms,
    matrix_log_rotation,
    matrix_to_euler,
    rotation_angle,
    rotation_exp,
)

ANGLES = [
    (0.0, 0.0, 0.0),
    (0.1, -0.2, 0.3),
    (-1.2, 0.7, 2.5),
    (math.pi / 3, -math.pi / 5, -math.pi / 2),
]


@pytest.mark.parametrize("theta", ANGLES)
def test_euler_matches_extrinsic_xyz(theta):
    expected = Rotation.from_euler("xyz", theta).as_matrix()
    np.testing.assert_allclose(euler_to_matrix(theta), expected, atol=1e-12)


@pytest.mark.parametrize("theta", ANGLES)
def test_matrix_to_euler_recovers_angles(theta):
    np.testing.assert_allclose(matrix_to_euler(euler_to_matrix(theta)), theta, atol=1e-10)


def test_gimbal_lock_gives_same_matrix():
    R = euler_to_matrix((0.4, math.pi / 2, 0.3))
    np.testing.assert_allclose(euler_to_matrix(matrix_to_euler(R)), R, atol=1e-9)


def test_euler_jacobian_matches_finite_differences():
    theta = np.array([0.3, -0.4, 1.1])
    J = euler_jacobian(theta)
    eps = 1e-6
    for k in range(3):
        step = np.zeros(3)
        step[k] = eps
        numeric = (euler_to_matrix(theta + step) - euler_to_matrix(theta - step)) / (2 * eps)
        np.testing.assert_allclose(J[k], numeric, atol=1e-8)


def test_transform_moves_points_about_its_center():
    T = RigidTransform(theta=(0, 0, math.pi / 2), d=(1, 0, 0), center=(10, 0, 0))
    np.testing.assert_allclose(T.apply((11, 0, 0)), (11, 1, 0), atol=1e-12)
    np.testing.assert_allclose(T.apply((10, 0, 0)), (11, 0, 0), atol=1e-12)

    points = np.array([[[11, 0, 0], [10, 0, 0]]], dtype=float)
    moved = apply_to_point(T, points)
    assert moved.shape == (1, 2, 3)
    np.testing.assert_allclose(moved[0], [[11, 1, 0], [11, 0, 0]], atol=1e-12)


def test_inverse_composes_to_identity():
    T = RigidTransform(theta=(0.2, -0.1, 0.4), d=(3, -2, 5), center=(1, 2, 3))
    assert compose(T, invert(T)).is_identity(atol=1e-10)
    assert compose(invert(T), T).is_identity(atol=1e-10)


def test_compose_applies_right_operand_first():
    A = RigidTransform(theta=(0, 0, math.pi / 2))
    B = RigidTransform(d=(1, 0, 0))
    p = np.array([0.0, 0.0, 0.0])
    np.testing.assert_allclose(compose(A, B).apply(p), A.apply(B.apply(p)), atol=1e-12)


def test_with_center_preserves_the_motion():
    T = RigidTransform(theta=(0.3, 0.2, -0.5), d=(4, 5, 6), center=(0, 0, 0))
    moved = T.with_center((12, -7, 3))
    np.testing.assert_allclose(moved.matrix, T.matrix, atol=1e-10)
    np.testing.assert_allclose(moved.center, (12, -7, 3))


def test_transform_list_json():
    transforms = [
        RigidTransform(theta=(0.1, 0.2, 0.3), d=(1, 2, 3), center=(4, 5, 6)),
        RigidTransform.identity(),
    ]
    loaded = load_transforms(dump_transforms(transforms))
    for a, b in zip(transforms, loaded):
        np.testing.assert_allclose(a.params, b.params, atol=1e-12)
        np.testing.assert_allclose(a.center, b.center)


def test_check_rotation_rejects_non_rotations():
    with pytest.raises(GeometryError):
        check_rotation(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(GeometryError):
        check_rotation(2 * np.eye(3))


def test_rotation_angle_near_pi():
    R = euler_to_matrix((0, 0, math.pi - 1e-9))
    assert rotation_angle(R) == pytest.approx(math.pi, abs=1e-8)
    assert rotation_angle(euler_to_matrix((0, 0, math.pi))) == pytest.approx(math.pi)


@pytest.mark.parametrize("theta", ANGLES[1:])
def test_matrix_log_and_exp_are_inverse(theta):
    R = euler_to_matrix(theta)
    np.testing.assert_allclose(rotation_exp(matrix_log_rotation(R)), R, atol=1e-10)


def test_geodesic_loss_is_zero_for_equal_transforms():
    T = RigidTransform(theta=(0.3, 0.1, -0.2), d=(1, 2, 3))
    assert geodesic_slice_loss(T, T) == pytest.approx(0.0, abs=1e-12)


def test_geodesic_loss_of_pure_rotation_and_translation():
    a = math.radians(7)
    assert geodesic_slice_loss(
        RigidTransform(), RigidTransform(theta=(a, 0, 0))
    ) == pytest.approx(math.sqrt(2) * a)

    cfg = LossConfig(gamma=4.0)
    assert geodesic_slice_loss(
        RigidTransform(), RigidTransform(d=(0, 3, 4)), cfg
    ) == pytest.approx(10.0)


def test_loss_config_accepts_lambda_alias():
    assert LossConfig.model_validate({"lambda": 0.5}).lambda_ == 0.5


def axis_angle_rotations(rng: np.random.Generator, angles: np.ndarray) -> Rotation:
    axes = rng.normal(size=(len(angles), 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return Rotation.from_rotvec(axes * angles[:, None])


def test_log_and_angle_over_random_rotations():
    rng = np.random.default_rng(12)
    rotations = Rotation.random(10_000, rng)
    identity = RigidTransform()
    worst_round_trip = 0.0
    for R, angle in zip(rotations.as_matrix(), rotations.magnitude()):
        S = matrix_log_rotation(R)
        worst_round_trip = max(worst_round_trip, float(np.abs(rotation_exp(S) - R).max()))
        assert np.linalg.norm(S) == pytest.approx(math.sqrt(2) * angle, rel=1e-8)

        T = RigidTransform(theta=matrix_to_euler(R), d=rng.uniform(-10, 10, size=3))
        assert geodesic_slice_loss(T, T) == pytest.approx(0.0, abs=1e-10)
        assert geodesic_slice_loss(identity, T.with_params(np.r_[T.theta, 0, 0, 0])) == (
            pytest.approx(math.sqrt(2) * angle, rel=1e-8)
        )
    assert worst_round_trip < 1e-7


@pytest.mark.parametrize(
    "angles",
    [
        math.pi - np.logspace(-9, -1, 200),
        np.logspace(-12, -1, 200),
        np.full(50, math.pi),
    ],
    ids=["near-pi", "near-zero", "pi"],
)
def test_log_round_trip_at_the_extremes(angles):
    rng = np.random.default_rng(7)
    rotations = axis_angle_rotations(rng, angles)
    for R, angle in zip(rotations.as_matrix(), angles):
        S = matrix_log_rotation(R)
        np.testing.assert_allclose(rotation_exp(S), R, atol=1e-7)
        assert rotation_angle(R) == pytest.approx(angle, abs=1e-8)


def random_transform(rng: np.random.Generator) -> RigidTransform:
    return RigidTransform(
        theta=Rotation.random(None, rng).as_euler("xyz"),
        d=rng.uniform(-10, 10, size=3),
        center=rng.uniform(-50, 50, size=3),
    )


def test_compose_and_invert_with_random_centers():
    rng = np.random.default_rng(3)
    for _ in range(200):
        A, B, C = (random_transform(rng) for _ in range(3))
        np.testing.assert_allclose(
            compose(compose(A, B), C).matrix, compose(A, compose(B, C)).matrix, atol=1e-8
        )
        np.testing.assert_allclose(compose(A, B).matrix, A.matrix @ B.matrix, atol=1e-8)
        assert compose(A, invert(A)).is_identity(atol=1e-8)
        assert compose(invert(A), A).is_identity(atol=1e-8)

        p = rng.uniform(-50, 50, size=3)
        np.testing.assert_allclose(compose(A, B).apply(p), A.apply(B.apply(p)), atol=1e-8)
