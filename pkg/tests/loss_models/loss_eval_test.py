"""
Tests for the loss models and their subgradients
"""

import unittest

import numpy as np

from gibbscal.exceptions import ContractViolation, DomainError, UnsupportedOperation
from gibbscal.loss import (
    Basis,
    CheckRegressionLoss,
    HingeLoss,
    McidLoss,
    QuantileLoss,
    ScaledLoss,
    SquaredErrorLoss,
    basis_eval,
    eval_loss,
    loss_from_json,
    loss_subgradient,
    make_loss,
)


class LossEvalTests(unittest.TestCase):
    """
    Test for eval_loss, per loss kind.
    """

    affine = Basis("affine")

    def test_when_quantile_theta_below_t_then_loss_is_tau_times_gap(self):
        "Check that the quantile loss at t above theta is tau (t - theta)"

        loss = QuantileLoss(0.7)

        value = eval_loss(loss, [0.0], [1.0])

        self.assertAlmostEqual(value, 0.7, places=15)

    def test_when_quantile_t_equals_theta_then_loss_is_zero(self):
        "Check that the quantile loss vanishes at t = theta"

        loss = QuantileLoss(0.7)

        value = eval_loss(loss, [0.0], [0.0])

        self.assertEqual(value, 0.0)

    def test_when_hinge_margin_exceeds_one_then_loss_is_zero(self):
        "Check that the hinge loss is zero once the margin reaches 1"

        loss = HingeLoss(self.affine)

        value = eval_loss(loss, [1.0, -1.0], [-1.0, 1.0])

        self.assertEqual(value, 0.0)

    def test_mcid_loss_values(self):
        "Check that the MCID loss is 0 for agreeing labels and 1 otherwise"

        loss = McidLoss()

        for datum, expected in (([0.5, 1.0], 0.0), ([0.5, -1.0], 1.0)):
            with self.subTest(datum=datum):
                self.assertEqual(eval_loss(loss, [0.0], datum), expected)

    def test_when_mcid_x_equals_theta_then_sign_is_positive(self):
        "Check that sign(0) is taken as +1, so a +1 label costs nothing"

        loss = McidLoss()

        value = eval_loss(loss, [0.5], [0.5, 1.0])

        self.assertEqual(value, 0.0)

    def test_when_theta_has_wrong_dimension_then_contract_violation(self):
        "Check that a theta of the wrong dimension is rejected"

        loss = HingeLoss(self.affine)

        with self.assertRaises(ContractViolation):
            eval_loss(loss, [1.0], [0.0, 1.0])

    def test_when_datum_is_not_finite_then_domain_error(self):
        "Check that a non-finite observation is rejected"

        loss = QuantileLoss(0.5)

        with self.assertRaises(DomainError):
            eval_loss(loss, [0.0], [np.inf])

    def test_when_tau_outside_unit_interval_then_contract_violation(self):
        "Check that tau must lie strictly between 0 and 1"

        for tau in (0.0, 1.0, -0.2, 1.5):
            with self.subTest(tau=tau):
                with self.assertRaises(ContractViolation):
                    QuantileLoss(tau)

    def test_losses_are_bounded_below(self):
        "Check that quantile and hinge losses are nonnegative and MCID lies in [0, 1]"

        rng = np.random.default_rng(3)
        quantile, hinge, mcid = QuantileLoss(0.3), HingeLoss(self.affine), McidLoss()

        values = []
        for _ in range(200):
            x, t, theta = rng.normal(size=3)
            y = rng.choice([-1.0, 1.0])
            values.append(eval_loss(quantile, [theta], [t]))
            values.append(eval_loss(hinge, [theta, t], [x, y]))
            mcid_value = eval_loss(mcid, [theta], [x, y])
            values.append(mcid_value)
            values.append(1.0 - mcid_value)

        self.assertGreaterEqual(min(values), 0.0)


class LossSubgradientTests(unittest.TestCase):
    """
    Test for loss_subgradient.
    """

    affine = Basis("affine")

    def test_check_regression_upper_branch(self):
        "Check that y above the fit gives -tau f(x)"

        loss = CheckRegressionLoss(0.5, self.affine)

        grad = loss_subgradient(loss, [0.0, 0.0], [1.0, 2.0])

        np.testing.assert_array_equal(grad, [-0.5, -0.5])

    def test_hinge_active_branch(self):
        "Check that a positive slack gives -y f(x)"

        loss = HingeLoss(self.affine)

        grad = loss_subgradient(loss, [1.0, -1.0], [2.0, 1.0])

        np.testing.assert_array_equal(grad, [-1.0, -2.0])

    def test_squared_error_gradient(self):
        "Check that the squared-error gradient is -2 (y - theta'f(x)) f(x)"

        loss = SquaredErrorLoss(self.affine)

        grad = loss_subgradient(loss, [0.0, 0.0], [1.0, 1.0])

        np.testing.assert_array_equal(grad, [-2.0, -2.0])

    def test_when_mcid_then_unsupported_operation(self):
        "Check that the MCID loss has no subgradient"

        with self.assertRaises(UnsupportedOperation):
            loss_subgradient(McidLoss(), [0.0], [1.0, 1.0])

    def test_subgradient_matches_finite_differences(self):
        "Check that subgradients match central differences away from the kinks"

        rng = np.random.default_rng(11)
        step, margin = 1e-6, 1e-3
        losses = [
            QuantileLoss(0.3),
            CheckRegressionLoss(0.7, self.affine),
            HingeLoss(self.affine),
            SquaredErrorLoss(Basis("polynomial", degree=2)),
        ]

        for loss in losses:
            checked = 0
            while checked < 20:
                theta = rng.normal(size=loss.param_dim)
                datum = rng.normal(size=loss.record_width)
                if loss.kind == "hinge":
                    datum[-1] = rng.choice([-1.0, 1.0])
                # every kink sits where the residual (or hinge slack) is zero
                prepared = loss.prepare(datum.reshape(1, -1))
                if abs(loss.residuals_from(theta, prepared)[0]) < margin:
                    continue
                numeric = np.empty(loss.param_dim)
                for j in range(loss.param_dim):
                    e = np.zeros(loss.param_dim)
                    e[j] = step
                    numeric[j] = (
                        eval_loss(loss, theta + e, datum) - eval_loss(loss, theta - e, datum)
                    ) / (2.0 * step)
                with self.subTest(kind=loss.kind, theta=theta.tolist()):
                    np.testing.assert_allclose(
                        loss_subgradient(loss, theta, datum), numeric, atol=1e-4
                    )
                checked += 1


class BasisTests(unittest.TestCase):
    """
    Test for basis_eval.
    """

    def test_affine_prepends_one(self):
        "Check that the affine basis at x=3 is (1, 3)"

        np.testing.assert_array_equal(basis_eval(Basis("affine"), 3.0), [1.0, 3.0])

    def test_polynomial_powers(self):
        "Check that the cubic basis at x=2 is (1, 2, 4, 8)"

        basis = Basis("polynomial", degree=3)

        np.testing.assert_array_equal(basis_eval(basis, 2.0), [1.0, 2.0, 4.0, 8.0])

    def test_identity_returns_input(self):
        "Check that the identity basis returns x unchanged"

        basis = Basis("identity", input_dim=2)

        np.testing.assert_array_equal(basis_eval(basis, [1.5, -2.0]), [1.5, -2.0])

    def test_when_x_has_wrong_dimension_then_contract_violation(self):
        "Check that a covariate of the wrong dimension is rejected"

        with self.assertRaises(ContractViolation):
            basis_eval(Basis("affine"), [1.0, 2.0])


class LossJsonTests(unittest.TestCase):
    """
    Test for make_loss and loss_from_json.
    """

    def test_json_restores_the_loss(self):
        "Check that every built-in loss is rebuilt from its JSON description"

        losses = [
            QuantileLoss(0.7),
            McidLoss(),
            CheckRegressionLoss(0.5, Basis("affine")),
            HingeLoss(Basis("affine")),
            SquaredErrorLoss(Basis("polynomial", degree=3)),
            ScaledLoss(QuantileLoss(0.2), 4.0),
        ]

        for loss in losses:
            with self.subTest(loss=loss):
                self.assertEqual(loss_from_json(loss.to_json()), loss)

    def test_nested_scaling_is_flattened(self):
        "Check that scaling a scaled loss multiplies the constants"

        loss = ScaledLoss(ScaledLoss(QuantileLoss(0.5), 2.0), 4.0)

        self.assertEqual((loss.scale, loss.base), (8.0, QuantileLoss(0.5)))

    def test_when_kind_is_unknown_then_contract_violation(self):
        "Check that an unknown loss kind is rejected"

        with self.assertRaises(ContractViolation):
            make_loss("logistic")


if __name__ == "__main__":
    unittest.main()
