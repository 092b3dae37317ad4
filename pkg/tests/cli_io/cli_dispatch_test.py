"""
Tests for the gcal.py command line
"""

import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

import jsonschema
import numpy as np

import gcal
from gcal import cli_dispatch
from gibbscal.io import SCHEMA_PATH, payload_digest

QUICK = {
    "sampler": {"n_draws": 100, "burn_in": 100},
    "gpc": {"B": 5, "max_iter": 3},
    "seed": 7,
}


class CliDispatchTests(unittest.TestCase):
    """
    Test for cli_dispatch.
    """

    def setUp(self):
        self._folder = tempfile.TemporaryDirectory()
        self.folder = self._folder.name

    def tearDown(self):
        self._folder.cleanup()

    def _path(self, name):
        return os.path.join(self.folder, name)

    def _config(self, raw, name="run.json"):
        path = self._path(name)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(raw, handle)
        return path

    def _run(self, *argv):
        with contextlib.redirect_stderr(io.StringIO()):
            return cli_dispatch(list(argv))

    def _read(self, name="out.json"):
        with open(self._path(name), encoding="utf-8") as handle:
            return json.load(handle)

    def test_when_subcommand_unknown_then_usage_exit(self):
        "Check that an unknown subcommand exits with 2"

        self.assertEqual(self._run("bogus"), 2)

    def test_help_exits_cleanly(self):
        "Check that --help exits with 0"

        with contextlib.redirect_stdout(io.StringIO()):
            self.assertEqual(self._run("--help"), 0)

    def test_calibrate_respects_max_iter(self):
        "Check that calibrate succeeds with a trace of at most max_iter updates"

        config = self._config({"command": "calibrate", "dgp": {"kind": "gamma-quantile", "n": 30}, **QUICK})

        code = self._run("calibrate", "-c", config, "-o", self._path("out.json"))

        trace = self._read()["payload"]["calibration"]["trace"]
        self.assertEqual((code, len(trace) <= 3), (0, True))

    def test_calibrate_progress_is_one_json_record_per_iteration(self):
        "Check that standard error carries a JSON trace record for each update"

        config = self._config({"command": "calibrate", "dgp": {"kind": "gamma-quantile", "n": 30}, **QUICK})
        stderr = io.StringIO()

        with contextlib.redirect_stderr(stderr):
            cli_dispatch(["calibrate", "-c", config, "-o", self._path("out.json")])

        records = [json.loads(line) for line in stderr.getvalue().splitlines()]
        trace = self._read()["payload"]["calibration"]["trace"]
        self.assertEqual([(r["s"], r["eta"]) for r in records], [(e["s"], e["eta"]) for e in trace])

    def test_diagnose_compares_the_three_regions(self):
        "Check that diagnose reports the HPD set and both ellipses, with a side table each"

        config = self._config(
            {
                "command": "diagnose",
                "dgp": {"kind": "gamma-quantile", "n": 40},
                "study": {"reps": 2, "n_list": [20, 40]},
                **QUICK,
            }
        )

        code = self._run("diagnose", "-c", config, "-o", self._path("out.json"))

        regions = self._read()["payload"]["regions"]
        with open(self._path("out-regions.csv"), encoding="utf-8") as handle:
            header = handle.readline().strip()
        self.assertEqual(
            (code, [r["region"] for r in regions], header, os.path.exists(self._path("out-consistency.csv"))),
            (
                0,
                ["hpd-density", "posterior-ellipse", "bootstrap-ellipse"],
                "region,size,contains_theta_hat,contains_theta_star",
                True,
            ),
        )

    def test_when_a_runner_hits_a_linear_algebra_error_then_numerical_exit(self):
        "Check that an unexpected LinAlgError or FloatingPointError exits with 4"

        config = self._config({"command": "fit", "dgp": {"kind": "gamma-quantile"}})

        for error in (np.linalg.LinAlgError("singular"), FloatingPointError("overflow")):

            def broken(cfg, pool, error=error):
                raise error

            with self.subTest(error=type(error).__name__):
                with mock.patch.dict(gcal.RUNNERS, {"fit": broken}):
                    self.assertEqual(self._run("fit", "-c", config), 4)

    def test_repeated_runs_give_identical_payloads(self):
        "Check that one configuration and seed give byte-identical payloads"

        config = self._config({"command": "calibrate", "dgp": {"kind": "gamma-quantile", "n": 30}, **QUICK})

        self._run("calibrate", "-c", config, "-o", self._path("first.json"))
        self._run("calibrate", "-c", config, "-o", self._path("second.json"))

        first, second = self._read("first.json"), self._read("second.json")
        self.assertEqual(
            (first["payload"], first["payload_sha256"]),
            (second["payload"], second["payload_sha256"]),
        )

    def test_envelope_matches_the_schema(self):
        "Check that the result envelope validates and carries its payload digest"

        config = self._config({"command": "sample", "dgp": {"kind": "quantile-regression"}, **QUICK})
        with open(SCHEMA_PATH, encoding="utf-8") as handle:
            schema = json.load(handle)

        self._run("sample", "-c", config, "-o", self._path("out.json"))

        envelope = self._read()
        jsonschema.validate(envelope, schema)
        self.assertEqual(envelope["payload_sha256"], payload_digest(envelope["payload"]))

    def test_fit_on_a_dataset_file(self):
        "Check that fit reads a CSV file and reports theta_hat"

        data = self._path("data.csv")
        with open(data, "w", encoding="utf-8") as handle:
            handle.write("1\n2\n3\n4\n5\n")
        config = self._config({"loss": {"kind": "quantile", "tau": 0.5}})

        code = self._run("fit", "-c", config, "-d", data, "-o", self._path("out.json"))

        payload = self._read()["payload"]
        self.assertEqual((code, payload["estimate"]["theta"]), (0, [3.0]))

    def test_flags_override_the_file(self):
        "Check that --B and --seed replace configured values"

        config = self._config({"command": "calibrate", "dgp": {"kind": "gamma-quantile", "n": 30}, **QUICK})

        self._run("calibrate", "-c", config, "--B", "4", "-s", "11", "-o", self._path("out.json"))

        envelope = self._read()
        self.assertEqual((envelope["config"]["gpc"]["B"], envelope["seed"]), (4, 11))

    def test_simulate_writes_a_side_table(self):
        "Check that simulate writes per-replication rows beside the envelope"

        config = self._config(
            {
                "command": "simulate",
                "dgp": {"kind": "gamma-quantile", "n": 30},
                "study": {"reps": 2, "calibrate": False},
                **QUICK,
            }
        )

        code = self._run("simulate", "-c", config, "-o", self._path("out.json"))

        with open(self._path("out.csv"), encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        self.assertEqual((code, len(lines)), (0, 3))

    def test_when_dataset_file_is_missing_then_data_exit(self):
        "Check that an unreadable dataset exits with 3"

        config = self._config({"loss": {"kind": "quantile", "tau": 0.5}})

        code = self._run("fit", "-c", config, "-d", self._path("missing.csv"))

        self.assertEqual(code, 3)

    def test_when_hinge_label_is_zero_then_data_exit_names_the_cell(self):
        "Check that a hinge dataset with a 0 label exits with 3 and reports line 2, column 2"

        data = self._path("labels.csv")
        with open(data, "w", encoding="utf-8") as handle:
            handle.write("0.5,1\n-0.5,0\n1.5,-1\n")
        config = self._config(
            {
                "command": "fit",
                "dataset": {"path": data, "split_index": 1},
                "loss": {"kind": "hinge", "basis": {"kind": "affine"}},
            }
        )

        with self.assertLogs("gcal", level="ERROR") as logs:
            code = self._run("fit", "-c", config, "-o", self._path("out.json"))

        self.assertEqual((code, "labels.csv:2:2" in logs.output[0]), (3, True))

    def test_when_dataset_run_has_no_loss_then_data_exit(self):
        "Check that a dataset run must name its loss"

        data = self._path("data.csv")
        with open(data, "w", encoding="utf-8") as handle:
            handle.write("1\n2\n3\n")

        self.assertEqual(self._run("fit", "-d", data), 3)

    def test_when_simulate_has_no_dgp_then_data_exit(self):
        "Check that simulate on a dataset is a configuration error"

        data = self._path("data.csv")
        with open(data, "w", encoding="utf-8") as handle:
            handle.write("1\n2\n3\n")
        config = self._config({"loss": {"kind": "quantile", "tau": 0.5}})

        self.assertEqual(self._run("simulate", "-c", config, "-d", data), 3)

    def test_when_config_has_unknown_key_then_data_exit(self):
        "Check that an unknown configuration key exits with 3"

        config = self._config({"command": "fit", "dgp": {"kind": "mcid"}, "colour": "red"})

        self.assertEqual(self._run("fit", "-c", config), 3)

    def test_when_sampler_cannot_start_then_numerical_exit(self):
        "Check that a non-finite starting log posterior exits with 4"

        config = self._config(
            {
                "command": "sample",
                "dgp": {"kind": "gamma-quantile"},
                "sampler": {"n_draws": 10, "burn_in": 0, "init": [1e308]},
            }
        )

        self.assertEqual(self._run("sample", "-c", config), 4)

    def test_when_flat_prior_is_improper_then_numerical_exit(self):
        "Check that a flat prior on the bounded MCID loss exits with 4"

        config = self._config(
            {
                "command": "sample",
                "dgp": {"kind": "mcid"},
                "prior": {"kind": "flat"},
                **QUICK,
            }
        )

        self.assertEqual(self._run("sample", "-c", config, "-o", self._path("out.json")), 4)


if __name__ == "__main__":
    unittest.main()
