import math

import numpy as np
import pytest

import oracles
from clood import losses
from clood.autodiff import Tensor
from clood.errors import ConfigError, ContractError, DomainError


def test_hyperparams_validation():
    losses.LossHyperparams()
    with pytest.raises(ConfigError):
        losses.LossHyperparams(tau=0.0)
    with pytest.raises(ConfigError):
        losses.LossHyperparams(lambda_weight=1.5)
    with pytest.raises(ConfigError):
        losses.LossHyperparams(phi_floor=0.0)


class TestNtXentPair:
    def test_single_pair_is_zero(self):
        z = np.array([[1.0, 2.0], [3.0, -1.0]])
        assert losses.nt_xent_pair(0, 1, z, 0.7).data == pytest.approx(0.0)

    def test_two_pair_hand_value(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        expected = -math.log(math.e / (math.e + 2.0))
        assert losses.nt_xent_pair(0, 1, z, 1.0).data == pytest.approx(expected)

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((6, 4))
        a = losses.nt_xent_pair(2, 3, z, 0.5).data
        b = losses.nt_xent_pair(2, 3, 5.0 * z, 0.5).data
        assert a == pytest.approx(b, abs=1e-12)

    def test_rejects_equal_indices(self):
        with pytest.raises(ContractError):
            losses.nt_xent_pair(1, 1, np.eye(4), 0.5)

    def test_zero_norm_row_rejected(self):
        z = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DomainError, match="row 1"):
            losses.nt_xent_pair(0, 1, z, 0.5)


class TestSelfSupervisedLoss:
    def test_single_pair_batch_is_zero(self):
        z = np.array([[1.0, 2.0], [0.5, -1.0]])
        assert losses.self_supervised_loss(z, 0.5).data == pytest.approx(0.0)

    def test_decomposes_into_pair_terms(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((4, 3))
        pairs = [losses.nt_xent_pair(i, j, z, 0.5).data
                 for i, j in ((0, 1), (1, 0), (2, 3), (3, 2))]
        assert losses.self_supervised_loss(z, 0.5).data == pytest.approx(
            np.mean(pairs))

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((8, 3))
        assert losses.self_supervised_loss(z, 0.6).data == pytest.approx(
            oracles.self_supervised_oracle(z.tolist(), 0.6), abs=1e-10)

    def test_view_swap_symmetry(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal((6, 4))
        swapped = z.reshape(3, 2, 4)[:, ::-1, :].reshape(6, 4)
        assert losses.self_supervised_loss(z, 0.5).data == pytest.approx(
            losses.self_supervised_loss(swapped, 0.5).data, abs=1e-12)

    def test_odd_row_count_rejected(self):
        with pytest.raises(ContractError):
            losses.self_supervised_loss(np.ones((3, 2)), 0.5)


class TestConcentration:
    def test_collapsed_cluster_clamps_to_floor(self):
        members = np.ones((4, 3))
        assert losses.concentration(members, np.ones(3), 10.0, 0.05) == 0.05

    def test_unit_distances(self):
        center = np.zeros(2)
        members = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]])
        expected = 1.0 / math.log(14.0)
        assert losses.concentration(members, center, 10.0, 0.01) == \
            pytest.approx(expected)

    def test_distance_homogeneity(self):
        rng = np.random.default_rng(4)
        members = rng.standard_normal((5, 3))
        center = np.zeros(3)
        a = losses.concentration(members, center, 10.0, 1e-12)
        b = losses.concentration(2.0 * members, center, 10.0, 1e-12)
        assert b == pytest.approx(2.0 * a)

    def test_empty_cluster_rejected(self):
        with pytest.raises(ContractError):
            losses.concentration(np.empty((0, 3)), np.zeros(3), 10.0)


class TestClusterCenterLoss:
    def test_sample_at_center_orthogonal_pair(self):
        centers = np.array([[1.0, 0.0], [0.0, 1.0]])
        h = np.array([[1.0, 0.0], [0.0, 1.0]])
        out = losses.cluster_center_loss(h, centers, np.array([0, 1]),
                                         np.array([1.0, 1.0]))
        # positive term exp(1), denominator only the orthogonal center exp(0)
        assert out.data == pytest.approx(-1.0)

    def test_relabeling_symmetry(self):
        rng = np.random.default_rng(5)
        h = rng.standard_normal((6, 4))
        centers = rng.standard_normal((3, 4))
        assigns = np.array([0, 1, 2, 0, 1, 2])
        phis = np.array([0.5, 0.7, 0.9])
        perm = np.array([2, 0, 1])
        a = losses.cluster_center_loss(h, centers, assigns, phis).data
        b = losses.cluster_center_loss(h, centers[perm],
                                       np.argsort(perm)[assigns],
                                       phis[perm]).data
        assert a == pytest.approx(b, abs=1e-12)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(6)
        h = rng.standard_normal((8, 5))
        centers = rng.standard_normal((3, 5))
        assigns = rng.integers(3, size=8)
        phis = rng.uniform(0.3, 1.0, 3)
        for include in (False, True):
            got = losses.cluster_center_loss(h, centers, assigns, phis,
                                             include_positive=include).data
            want = oracles.cluster_center_oracle(
                h.tolist(), centers.tolist(), assigns.tolist(),
                phis.tolist(), include_positive=include)
            assert got == pytest.approx(want, abs=1e-10)

    def test_single_center_rejected(self):
        with pytest.raises(ConfigError):
            losses.cluster_center_loss(np.ones((2, 2)), np.ones((1, 2)),
                                       np.zeros(2, dtype=int), np.ones(1))

    def test_out_of_range_assignment_rejected(self):
        with pytest.raises(ContractError):
            losses.cluster_center_loss(np.eye(2), np.eye(2),
                                       np.array([0, 2]), np.ones(2))


class TestClusterInstanceLoss:
    def test_all_singletons_is_zero_with_warning(self):
        h = np.eye(4)
        with pytest.warns(UserWarning):
            out = losses.cluster_instance_loss(h, np.arange(4), 0.5)
        assert out.data == pytest.approx(0.0)

    def test_two_samples_one_cluster_is_zero(self):
        h = np.array([[1.0, 2.0], [0.3, -1.0]])
        out = losses.cluster_instance_loss(h, np.array([0, 0]), 0.5)
        assert out.data == pytest.approx(0.0)

    def test_matches_supcon_style_oracle(self):
        rng = np.random.default_rng(7)
        h = rng.standard_normal((8, 4))
        assigns = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        got = losses.cluster_instance_loss(h, assigns, 0.5).data
        want = oracles.cluster_instance_oracle(h.tolist(), assigns.tolist(), 0.5)
        assert got == pytest.approx(want, abs=1e-10)

    def test_skips_singleton_anchors_in_mean(self):
        rng = np.random.default_rng(8)
        h = rng.standard_normal((5, 3))
        assigns = np.array([0, 0, 1, 1, 2])   # sample 4 has no positives
        got = losses.cluster_instance_loss(h, assigns, 0.5).data
        want = oracles.cluster_instance_oracle(h.tolist(), assigns.tolist(), 0.5)
        assert got == pytest.approx(want, abs=1e-10)


def test_cluster_aware_loss_means():
    assert losses.cluster_aware_loss(0.0, 0.0) == pytest.approx(0.0)
    assert losses.cluster_aware_loss(2.0, 4.0) == pytest.approx(3.0)
    assert losses.cluster_aware_loss(-1.0, 1.0) == pytest.approx(0.0)


def test_total_loss_endpoints():
    assert losses.total_loss(2.0, 4.0, 0.0) == pytest.approx(2.0)
    assert losses.total_loss(2.0, 4.0, 1.0) == pytest.approx(4.0)
    assert losses.total_loss(2.0, 4.0, 0.5) == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        losses.total_loss(Tensor(1.0), Tensor(1.0), 1.5)


def test_all_losses_scale_invariant():
    rng = np.random.default_rng(9)
    h = rng.standard_normal((6, 4))
    centers = rng.standard_normal((3, 4))
    assigns = np.array([0, 1, 2, 0, 1, 2])
    phis = np.array([0.4, 0.6, 0.8])
    for gamma in (0.1, 7.0):
        assert losses.self_supervised_loss(gamma * h, 0.5).data == \
            pytest.approx(losses.self_supervised_loss(h, 0.5).data, abs=1e-10)
        assert losses.cluster_center_loss(gamma * h, centers, assigns,
                                          phis).data == \
            pytest.approx(losses.cluster_center_loss(h, centers, assigns,
                                                     phis).data, abs=1e-10)
        assert losses.cluster_instance_loss(gamma * h, assigns, 0.5).data == \
            pytest.approx(losses.cluster_instance_loss(h, assigns, 0.5).data,
                          abs=1e-10)
