"""
Tests for the Gaussian approximation to the Gibbs posterior
"""

import unittest

import numpy as np

from gibbscal.asymptotics import GaussianApprox, bvm_approx, bvm_distance
from gibbscal.exceptions import ContractViolation, DomainError


class BvmApproxTests(unittest.TestCase):
    """
    Test for bvm_approx.
    """

    def test_mean_and_covariance(self):
        "Check that eta=0.5, n=10, V=2 give mean 2 and variance 0.1"

        approx = bvm_approx(0.5, [1.0], [3.0], [[2.0]], 10)

        self.assertEqual(
            (approx.mean.tolist(), round(float(approx.cov[0, 0]), 15)), ([2.0], 0.1)
        )

    def test_when_eta_is_one_then_centered_at_theta_hat(self):
        "Check that eta=1 centers the approximation at the risk minimizer"

        approx = bvm_approx(1.0, [0.4, -1.0], [9.0, 9.0], np.eye(2), 50)

        np.testing.assert_array_equal(approx.mean, [0.4, -1.0])

    def test_when_v_not_positive_definite_then_domain_error(self):
        "Check that an indefinite V is rejected"

        with self.assertRaises(DomainError):
            bvm_approx(1.0, [0.0, 0.0], [0.0, 0.0], np.diag([1.0, -1.0]), 10)


class BvmDistanceTests(unittest.TestCase):
    """
    Test for bvm_distance.
    """

    mean = np.array([1.0, -2.0])
    cov = np.array([[0.5, 0.1], [0.1, 0.2]])

    def test_matching_gaussian_draws_are_close(self):
        "Check that draws from the approximation itself are within 0.02"

        draws = np.random.default_rng(0).multivariate_normal(self.mean, self.cov, 20000)

        distance = bvm_distance(draws, GaussianApprox(self.mean, self.cov, 1.0, 100))

        self.assertLess(distance, 0.02)

    def test_shifted_draws_are_far(self):
        "Check that draws shifted by two standard deviations are detected"

        draws = np.random.default_rng(1).multivariate_normal(self.mean, self.cov, 5000)

        distance = bvm_distance(
            draws + [1.5, 0.0], GaussianApprox(self.mean, self.cov, 1.0, 100)
        )

        self.assertGreater(distance, 0.5)

    def test_unchanged_by_lower_triangular_maps(self):
        "Check that mapping draws and approximation by L theta + b keeps the distance"

        rng = np.random.default_rng(2)
        draws = rng.standard_t(5, size=(3000, 2))
        L, b = np.array([[2.0, 0.0], [0.7, 0.5]]), np.array([3.0, -1.0])
        approx = GaussianApprox(np.zeros(2), np.eye(2), 1.0, 100)
        mapped = GaussianApprox(b, L @ L.T, 1.0, 100)

        self.assertAlmostEqual(
            bvm_distance(draws @ L.T + b, mapped), bvm_distance(draws, approx), places=10
        )

    def test_when_dimensions_differ_then_contract_violation(self):
        "Check that draws and approximation must share a dimension"

        with self.assertRaises(ContractViolation):
            bvm_distance(np.zeros((10, 3)), GaussianApprox(self.mean, self.cov, 1.0, 100))


if __name__ == "__main__":
    unittest.main()
