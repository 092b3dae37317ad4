"""
Acceptance tests with analytic oracles: the Gibbs weights minimizer and the Robbins-Monro root
"""

import unittest

import numpy as np

from gibbscal.calibration import GpcConfig, gpc_calibrate
from gibbscal.data import DataSet
from gibbscal.gibbs import DiscreteGrid, FlatPrior, bissiri_objective, gibbs_weights_discrete
from gibbscal.loss import QuantileLoss


class GibbsMinimizerTests(unittest.TestCase):
    """
    Test that the Gibbs weights minimize the loss-plus-divergence objective.
    """

    def test_no_perturbation_improves_on_random_grids(self):
        "Check 200 random grids of 2 to 50 points against 100 perturbations each"

        rng = np.random.default_rng(2024)

        worst_gap = np.inf
        for _ in range(200):
            size = int(rng.integers(2, 51))
            prior = rng.dirichlet(np.ones(size))
            grid = DiscreteGrid(tuple(range(size)), prior, rng.uniform(0.0, 3.0, size))
            eta, n = float(rng.uniform(0.05, 5.0)), int(rng.integers(1, 200))
            weights = gibbs_weights_discrete(grid, eta, n)
            best = bissiri_objective(grid, weights, eta, n)
            for _ in range(100):
                candidate = rng.dirichlet(np.ones(size)) if rng.random() < 0.5 else (
                    weights * np.exp(rng.normal(scale=0.5, size=size))
                )
                candidate = candidate / candidate.sum()
                worst_gap = min(worst_gap, bissiri_objective(grid, candidate, eta, n) - best)

        self.assertGreaterEqual(worst_gap, -1e-12)

    def test_two_point_grids_match_enumeration(self):
        "Check that 20 random two-point grids match a fine enumeration within 1e-8"

        rng = np.random.default_rng(77)
        w = np.linspace(0.0, 1.0, 1000001)[1:-1]

        for case in range(20):
            p0 = float(rng.uniform(0.1, 0.9))
            risks = rng.uniform(0.0, 1.0, 2)
            grid = DiscreteGrid((0.0, 1.0), [p0, 1.0 - p0], risks)
            eta, n = float(rng.uniform(0.2, 3.0)), int(rng.integers(1, 20))
            values = (
                w * risks[0]
                + (1.0 - w) * risks[1]
                + (w * np.log(w / p0) + (1.0 - w) * np.log((1.0 - w) / (1.0 - p0)))
                / (eta * n)
            )

            found = bissiri_objective(grid, gibbs_weights_discrete(grid, eta, n), eta, n)

            with self.subTest(case=case):
                self.assertAlmostEqual(values.min(), found, delta=1e-8)


class RobbinsMonroOracleTests(unittest.TestCase):
    """
    Test the calibration loop on injected coverage functions with known roots.
    """

    data = DataSet([1.0, 2.0, 3.0])
    loss = QuantileLoss(0.5)

    def test_roots_of_linear_coverage_functions(self):
        "Check 20 random roots recovered within 0.02 in at most 50 iterations"

        rng = np.random.default_rng(5)
        alpha = 0.05
        cfg = GpcConfig(alpha=alpha, kappa0=20.0, gamma_exp=0.6, max_iter=50, tol=1e-4)

        for case in range(20):
            root = float(rng.uniform(0.5, 1.5))

            def coverage(eta, seed, root=root) -> float:
                return float(np.clip(1.0 - alpha * eta / root, 0.0, 1.0))

            result = gpc_calibrate(self.data, self.loss, FlatPrior(1), cfg, case, coverage_fn=coverage)

            with self.subTest(root=root):
                self.assertLess(abs(result.eta_hat - root), 0.02)
                self.assertLessEqual(len(result.trace), 50)

    def test_update_identity_holds_on_every_trace_entry(self):
        "Check eta_raw = eta_prev + kappa_s (c_hat - target) exactly, and the clamp"

        cfg = GpcConfig(kappa0=20.0, gamma_exp=0.6, max_iter=50, tol=1e-4, eta_bounds=(0.2, 5.0))

        result = gpc_calibrate(
            self.data,
            self.loss,
            FlatPrior(1),
            cfg,
            0,
            coverage_fn=lambda eta, seed: float(np.clip(1.0 - 0.05 * eta / 0.8, 0.0, 1.0)),
        )

        for entry in result.trace:
            with self.subTest(s=entry.s):
                self.assertEqual(
                    (entry.kappa, entry.eta_raw, entry.eta),
                    (
                        cfg.kappa(entry.s),
                        entry.eta_prev + cfg.kappa(entry.s) * (entry.c_hat - cfg.target),
                        min(max(entry.eta_raw, 0.2), 5.0),
                    ),
                )


if __name__ == "__main__":
    unittest.main()
