"""
Tests for dataset files, canonical JSON and CSV tables
"""

import json
import math
import os
import tempfile
import unittest
from datetime import datetime, timezone

import numpy as np

from gibbscal.exceptions import DataParseError
from gibbscal.io import (
    build_envelope,
    dumps_canonical,
    dumps_line,
    load_dataset_csv,
    payload_digest,
    write_csv,
)


class LoadDatasetCsvTests(unittest.TestCase):
    """
    Test for load_dataset_csv.
    """

    def setUp(self):
        self._folder = tempfile.TemporaryDirectory()
        self.folder = self._folder.name

    def tearDown(self):
        self._folder.cleanup()

    def _write(self, text, name="data.csv"):
        path = os.path.join(self.folder, name)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        return path

    def test_three_records_of_two_columns(self):
        "Check that a 3 x 2 file gives three records of width 2"

        path = self._write("0.5,1\n-1.25,-1\n3,1\n")

        data = load_dataset_csv(path, split_index=1, classification=True)

        self.assertEqual((data.n, data.record_width, data.y.tolist()), (3, 2, [1.0, -1.0, 1.0]))

    def test_when_label_is_zero_then_parse_error_names_the_line(self):
        "Check that a 0 label is rejected with its line number"

        path = self._write("0.5,1\n-1.25,0\n")

        with self.assertRaises(DataParseError) as ctx:
            load_dataset_csv(path, split_index=1, classification=True)

        self.assertEqual((ctx.exception.line, ctx.exception.column), (2, 2))

    def test_crlf_and_lf_files_are_the_same(self):
        "Check that Windows line endings give the same dataset"

        lf = self._write("1,2\n3,4\n", "lf.csv")
        crlf = self._write("1,2\r\n3,4\r\n", "crlf.csv")

        self.assertEqual(load_dataset_csv(crlf, 1), load_dataset_csv(lf, 1))

    def test_when_row_is_ragged_then_parse_error_names_the_line(self):
        "Check that a short row is reported with its line number"

        path = self._write("1,2\n3,4\n5\n")

        with self.assertRaises(DataParseError) as ctx:
            load_dataset_csv(path)

        self.assertEqual(ctx.exception.line, 3)

    def test_when_cell_is_not_a_number_then_parse_error(self):
        "Check that text and non-finite cells are rejected with their position"

        for text, expected in (("1,2\n3,abc\n", (2, 2)), ("nan,2\n", (1, 1)), ("1,inf\n", (1, 2))):
            with self.subTest(text=text):
                with self.assertRaises(DataParseError) as ctx:
                    load_dataset_csv(self._write(text))
                self.assertEqual((ctx.exception.line, ctx.exception.column), expected)

    def test_header_and_blank_lines_are_skipped(self):
        "Check that the header row and blank lines are not records"

        path = self._write("x,y\n1,2\n\n3,4\n")

        data = load_dataset_csv(path, split_index=1, header=True)

        self.assertEqual(data.records.tolist(), [[1.0, 2.0], [3.0, 4.0]])

    def test_when_file_has_no_records_then_parse_error(self):
        "Check that an empty file is rejected"

        with self.assertRaises(DataParseError):
            load_dataset_csv(self._write(""))

    def test_when_split_index_outside_the_row_then_parse_error(self):
        "Check that split_index must name a column"

        with self.assertRaises(DataParseError):
            load_dataset_csv(self._write("1,2\n"), split_index=2)


class CanonicalJsonTests(unittest.TestCase):
    """
    Test for dumps_canonical, dumps_line and payload_digest.
    """

    def test_keys_are_sorted_and_text_ends_with_newline(self):
        "Check the layout of canonical text"

        text = dumps_canonical({"b": 1, "a": [1, 2]})

        self.assertEqual(text, '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n')

    def test_floats_parse_back_exactly(self):
        "Check that written floats read back as the same values"

        values = [0.1, 1.0 / 3.0, 2.0**-40, 1e300, -7.25]

        self.assertEqual(json.loads(dumps_canonical(values)), values)

    def test_floats_take_their_shortest_form(self):
        "Check that floats are written with the fewest digits that read back exactly"

        text = dumps_line({"a": 0.1, "b": 1.0 / 3.0, "c": 1e-05, "d": 2.0})

        self.assertEqual(text, '{"a":0.1,"b":0.3333333333333333,"c":1e-05,"d":2.0}')

    def test_numpy_values_and_nan(self):
        "Check that numpy scalars become JSON numbers and NaN becomes null"

        text = dumps_canonical(
            {"x": np.float64(0.5), "k": np.int64(3), "v": np.array([1.0, np.nan]), "f": np.bool_(True)}
        )

        self.assertEqual(json.loads(text), {"f": True, "k": 3, "v": [1.0, None], "x": 0.5})

    def test_digest_ignores_key_order(self):
        "Check that the digest depends on content, not insertion order"

        self.assertEqual(payload_digest({"a": 1, "b": 2}), payload_digest({"b": 2, "a": 1}))

    def test_envelope_digest_matches_its_payload(self):
        "Check that the envelope carries the digest of its payload"

        payload = {"command": "fit", "value": math.pi}

        envelope = build_envelope({}, payload, 4, datetime.now(timezone.utc), 0.25)

        self.assertEqual(envelope["payload_sha256"], payload_digest(payload))


class WriteCsvTests(unittest.TestCase):
    """
    Test for write_csv.
    """

    def test_columns_are_the_union_of_row_keys(self):
        "Check that columns follow first appearance and missing cells are empty"

        rows = [{"n": 50, "ok": True}, {"n": 200, "eta": 0.5, "ok": False}, {"n": 800, "eta": None}]

        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "table.csv")
            write_csv(path, rows)
            with open(path, encoding="utf-8", newline="") as handle:
                text = handle.read()

        self.assertEqual(text, "n,ok,eta\n50,1,\n200,0,0.5\n800,,\n")


if __name__ == "__main__":
    unittest.main()
