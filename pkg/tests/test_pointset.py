import numpy as np
import pytest

from dualalign.errors import DimensionError, InsufficientData, InvalidSpec
from dualalign.pointset import (
    GaussianBlob,
    GeneratorSpec,
    PointSet,
    Ring,
    Tag,
    TwoClassLabeled,
    empirical_moments,
    generate,
    make_labeled_union,
    read_points_csv,
    write_points_csv,
)

I2 = ((1.0, 0.0), (0.0, 1.0))


def test_blob_is_deterministic_per_seed():
    spec = GeneratorSpec(GaussianBlob((0.0, 0.0), I2), 4, 7)
    p, q = generate(spec), generate(spec)
    assert p.n == 4 and p.dim == 2
    assert p.points.tobytes() == q.points.tobytes()
    other = generate(GeneratorSpec(GaussianBlob((0.0, 0.0), I2), 4, 8))
    assert not np.array_equal(p.points, other.points)


def test_zero_noise_ring_has_unit_norms():
    p = generate(GeneratorSpec(Ring((0.0, 0.0), 1.0, 0.0), 8, 1))
    assert np.all(np.abs(np.linalg.norm(p.points, axis=1) - 1.0) < 1e-12)


def test_large_blob_mean():
    p = generate(GeneratorSpec(GaussianBlob((5.0, 5.0), I2), 10000, 3))
    assert np.all(np.abs(p.points.mean(0) - 5.0) < 0.05)


def test_blob_covariance_within_fifteen_percent():
    p = generate(GeneratorSpec(GaussianBlob((0.0, 0.0), ((1.0, 0.0), (0.0, 4.0))), 1000, 11))
    _, cov = empirical_moments(p)
    assert abs(cov[0, 0] - 1.0) < 0.15 and abs(cov[1, 1] - 4.0) < 0.6


@pytest.mark.parametrize("cov", [((1.0, 2.0), (2.0, 1.0)), ((1.0, 0.5), (0.0, 1.0)), ((0.0, 0.0), (0.0, 0.0))])
def test_non_spd_covariance_rejected(cov):
    with pytest.raises(InvalidSpec):
        generate(GeneratorSpec(GaussianBlob((0.0, 0.0), cov), 3, 1))


def test_two_class_split_and_labels():
    spec = GeneratorSpec(TwoClassLabeled(GaussianBlob((-2.0, 0.0), I2), GaussianBlob((2.0, 0.0), I2)), 9, 4)
    p = generate(spec)
    assert p.n == 9 and list(p.labels) == [0] * 4 + [1] * 5
    assert p.points[:4, 0].mean() < 0 < p.points[4:, 0].mean()


def test_union_of_two_points():
    c = make_labeled_union(PointSet([[1.0, 0.0]]), PointSet([[0.0, 1.0]], Tag.TARGET_B))
    assert c.points.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert c.labels.tolist() == [1.0, -1.0]


def test_union_counts_and_label_sum():
    rng = np.random.default_rng(0)
    c = make_labeled_union(PointSet(rng.normal(size=(3, 2))), PointSet(rng.normal(size=(5, 2))))
    assert (c.a_count, c.b_count, c.labels.size) == (3, 5, 8)
    assert c.labels.sum() == 3 - 5
    assert np.all(c.labels[:3] == 1) and np.all(c.labels[3:] == -1)


def test_union_dimension_mismatch():
    with pytest.raises(DimensionError):
        make_labeled_union(PointSet(np.zeros((2, 2))), PointSet(np.zeros((2, 3))))


def test_two_point_moments():
    mean, cov = empirical_moments(PointSet([[1.0, 1.0], [-1.0, -1.0]]))
    assert mean.tolist() == [0.0, 0.0]
    assert cov.tolist() == [[2.0, 2.0], [2.0, 2.0]]


def test_single_point_moments_rejected():
    with pytest.raises(InsufficientData):
        empirical_moments(PointSet([[1.0, 2.0]]))


def test_covariance_symmetric_psd():
    rng = np.random.default_rng(1)
    for _ in range(20):
        _, cov = empirical_moments(PointSet(rng.normal(size=(rng.integers(2, 30), 3)) * rng.uniform(0.1, 5)))
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-12


def test_pointset_rejects_empty_and_is_read_only():
    with pytest.raises(InvalidSpec):
        PointSet(np.zeros((0, 2)))
    p = PointSet(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        p.points[0, 0] = 1.0


def test_csv_round_trips(tmp_path):
    rng = np.random.default_rng(2)
    p = PointSet(rng.normal(size=(5, 3)))
    write_points_csv(tmp_path / "p.csv", p)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x0,x1,x2"
    assert np.array_equal(read_points_csv(tmp_path / "p.csv").points, p.points)

    c = make_labeled_union(p, PointSet(rng.normal(size=(2, 3))))
    write_points_csv(tmp_path / "u.csv", c)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,x2,label" and lines[1].endswith(",1") and lines[-1].endswith(",-1")
    back = read_points_csv(tmp_path / "u.csv")
    assert (back.a_count, back.b_count) == (5, 2)
    assert np.array_equal(back.points, c.points)

    labeled = PointSet(p.points, labels=[0, 1, 1, 0, 1])
    write_points_csv(tmp_path / "s.csv", labeled, labeled.labels, "class")
    assert read_points_csv(tmp_path / "s.csv").labels.tolist() == [0, 1, 1, 0, 1]
