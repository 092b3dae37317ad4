"""
Tests for run configuration parsing and emission
"""

import json
import os
import tempfile
import unittest

from gibbscal.config import emit_config, parse_config, parse_config_dict
from gibbscal.const import DGP_KINDS
from gibbscal.exceptions import ConfigError
from gibbscal.loss import QuantileLoss


class ParseConfigDictTests(unittest.TestCase):
    """
    Test for parse_config_dict.
    """

    def setUp(self):
        self.raw = {"command": "fit", "dgp": {"kind": "gamma-quantile"}}

    def test_minimal_dgp_config_takes_the_process_defaults(self):
        "Check that a dgp run takes its loss, prior and sample size from the process"

        cfg = parse_config_dict(self.raw)

        self.assertEqual(
            (cfg.loss, cfg.prior.kind, cfg.dgp.n, cfg.gpc.region_kind),
            (QuantileLoss(0.7), "flat", 50, "interval"),
        )

    def test_dataset_config(self):
        "Check that a dataset run keeps the path and the x/y split"

        raw = {
            "command": "fit",
            "dataset": {"path": "data.csv", "split_index": 1},
            "loss": {"kind": "check-regression", "tau": 0.5, "basis": {"kind": "affine"}},
        }

        cfg = parse_config_dict(raw)

        self.assertEqual(
            (cfg.dataset.path, cfg.dataset.split_index, cfg.prior.kind),
            ("data.csv", 1, "flat"),
        )

    def test_when_dataset_and_dgp_both_given_then_config_error(self):
        "Check that a run cannot name both a dataset and a process"

        self.raw["dataset"] = {"path": "data.csv"}

        with self.assertRaises(ConfigError) as ctx:
            parse_config_dict(self.raw)

        self.assertEqual(ctx.exception.field, "dataset")

    def test_when_neither_dataset_nor_dgp_then_config_error(self):
        "Check that a run needs a dataset or a process"

        with self.assertRaises(ConfigError):
            parse_config_dict({"command": "fit"})

    def test_when_command_missing_then_config_error(self):
        "Check that the missing command is named"

        del self.raw["command"]

        with self.assertRaises(ConfigError) as ctx:
            parse_config_dict(self.raw)

        self.assertEqual(ctx.exception.field, "command")

    def test_when_key_is_unknown_then_config_error_names_it(self):
        "Check that unknown keys are rejected with their dotted name"

        for section, key, expected in (
            ("sampler", "ndraws", "sampler.ndraws"),
            ("gpc", "beta", "gpc.beta"),
            (None, "colour", "colour"),
        ):
            raw = dict(self.raw)
            if section is None:
                raw[key] = 1
            else:
                raw[section] = {key: 1}
            with self.subTest(field=expected):
                with self.assertRaises(ConfigError) as ctx:
                    parse_config_dict(raw)
                self.assertEqual(ctx.exception.field, expected)

    def test_when_nested_value_is_invalid_then_config_error_names_the_section(self):
        "Check that an out-of-range setting is reported against its section"

        self.raw["gpc"] = {"alpha": 2.0}

        with self.assertRaises(ConfigError) as ctx:
            parse_config_dict(self.raw)

        self.assertEqual(ctx.exception.field, "gpc")

    def test_when_value_has_wrong_type_then_config_error(self):
        "Check that a string where a number belongs is rejected"

        self.raw["sampler"] = {"n_draws": "many"}

        with self.assertRaises(ConfigError) as ctx:
            parse_config_dict(self.raw)

        self.assertEqual(ctx.exception.field, "sampler.n_draws")

    def test_when_seed_outside_64_bits_then_config_error(self):
        "Check that seeds must be unsigned 64-bit integers"

        for seed in (-1, 2**64):
            with self.subTest(seed=seed):
                with self.assertRaises(ConfigError):
                    parse_config_dict({**self.raw, "seed": seed})

    def test_overrides_win_over_the_file(self):
        "Check that command-line values replace configured ones"

        self.raw["gpc"] = {"B": 100}

        cfg = parse_config_dict(self.raw, {"B": 20, "tau": 0.3, "n": 80, "workers": 3})

        self.assertEqual(
            (cfg.gpc.B, cfg.loss, cfg.dgp.n, cfg.workers), (20, QuantileLoss(0.3), 80, 3)
        )

    def test_when_n_overrides_a_dataset_run_then_config_error(self):
        "Check that the sample size override needs a process"

        raw = {"command": "fit", "dataset": {"path": "data.csv"}}

        with self.assertRaises(ConfigError):
            parse_config_dict(raw, {"n": 10})

    def test_when_tau_overrides_a_loss_without_tau_then_config_error(self):
        "Check that --tau on a hinge run is rejected and names loss.tau"

        raw = {"command": "fit", "dgp": {"kind": "hinge-classification"}}

        with self.assertRaises(ConfigError) as ctx:
            parse_config_dict(raw, {"tau": 0.3})

        self.assertEqual(ctx.exception.field, "loss.tau")

    def test_flags_alone_describe_a_run(self):
        "Check that an empty file plus flags is a complete configuration"

        cfg = parse_config_dict({}, {"command": "sample", "dgp_kind": "mcid", "eta": 0.5})

        self.assertEqual((cfg.command, cfg.dgp.kind, cfg.eta), ("sample", "mcid", 0.5))


class EmitConfigTests(unittest.TestCase):
    """
    Test for emit_config.
    """

    def test_emit_parse_emit_is_byte_identical(self):
        "Check that an emitted configuration parses back to the same text"

        raws = [{"command": "calibrate", "dgp": {"kind": kind}} for kind in DGP_KINDS]
        raws.append(
            {
                "command": "sample",
                "dataset": {"path": "x.csv", "split_index": 1, "classification": True},
                "loss": {"kind": "hinge", "basis": {"kind": "affine"}, "scale": 2.0},
                "prior": {"kind": "gaussian", "mean": [0.0, 0.0], "sd": [3.0, 3.0]},
                "sampler": {"init": [0.5, -0.5], "thin": 2},
                "gpc": {"region_kind": "interval", "feature": 1},
                "seed": 18446744073709551615,
            }
        )

        for raw in raws:
            with self.subTest(raw=raw):
                text = emit_config(parse_config_dict(raw))
                self.assertEqual(emit_config(parse_config_dict(json.loads(text))), text)

    def test_emitted_text_is_canonical(self):
        "Check that keys are sorted and the text ends with a newline"

        text = emit_config(parse_config_dict({"command": "fit", "dgp": {"kind": "mcid"}}))

        keys = list(json.loads(text))
        self.assertEqual((text.endswith("\n"), keys), (True, sorted(keys)))


class ParseConfigTests(unittest.TestCase):
    """
    Test for parse_config with files.
    """

    def test_reads_a_json_file(self):
        "Check that a configuration file is parsed"

        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "run.json")
            with open(path, "w", encoding="utf-8") as handle:
                json.dump({"command": "fit", "dgp": {"kind": "mcid", "n": 20}}, handle)

            cfg = parse_config(path)

        self.assertEqual(cfg.dgp.n, 20)

    def test_when_file_is_missing_then_config_error(self):
        "Check that a missing configuration file is a config error"

        with self.assertRaises(ConfigError):
            parse_config("/nonexistent/run.json")

    def test_when_file_is_not_json_then_config_error(self):
        "Check that malformed JSON is a config error"

        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "run.json")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write("{command: fit")

            with self.assertRaises(ConfigError):
                parse_config(path)


if __name__ == "__main__":
    unittest.main()
