"""Observations, datasets and parameter vectors."""

import logging
from typing import Optional, Sequence

import numpy as np

from .exceptions import ContractViolation, DomainError

_LOGGER = logging.getLogger(__name__)


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def as_theta(values, param_dim: Optional[int] = None) -> np.ndarray:
    """Return a read-only 1-D parameter vector, checking its dimension."""
    theta = np.atleast_1d(np.asarray(values, dtype=float))
    if theta.ndim != 1:
        raise ContractViolation(f"theta must be a vector, got shape {theta.shape}")
    if param_dim is not None and theta.shape[0] != param_dim:
        raise ContractViolation(
            f"theta has dimension {theta.shape[0]}, expected {param_dim}"
        )
    if not np.all(np.isfinite(theta)):
        raise DomainError(f"theta has non-finite entries: {theta}")
    return _frozen(theta)


def as_datum(values, record_width: Optional[int] = None) -> np.ndarray:
    """Return a read-only observation t (a flattened (x, y) pair if supervised)."""
    datum = np.atleast_1d(np.asarray(values, dtype=float))
    if datum.ndim != 1:
        raise ContractViolation(f"a datum must be a vector, got shape {datum.shape}")
    if record_width is not None and datum.shape[0] != record_width:
        raise ContractViolation(
            f"datum has width {datum.shape[0]}, expected {record_width}"
        )
    if not np.all(np.isfinite(datum)):
        raise DomainError(f"datum has non-finite entries: {datum}")
    return _frozen(datum)


class DataSet:
    """An immutable set of n records of equal width.

    For supervised data, split_index separates the covariates x (columns
    before it) from the response y (the column at it).
    """

    def __init__(self, records, split_index: Optional[int] = None) -> None:
        records = np.asarray(records, dtype=float)
        if records.ndim == 1:
            records = records.reshape(-1, 1)
        if records.ndim != 2:
            raise ContractViolation(f"records must be 2-D, got shape {records.shape}")
        if records.shape[0] < 1:
            raise DomainError("a dataset needs at least one record")
        if not np.all(np.isfinite(records)):
            raise DomainError("dataset has non-finite entries")
        if split_index is not None and not 0 <= split_index < records.shape[1]:
            raise ContractViolation(
                f"split_index={split_index} is outside the record width "
                f"{records.shape[1]}"
            )

        self._records = _frozen(records)
        self.split_index = split_index

    def __len__(self) -> int:
        return self._records.shape[0]

    def __repr__(self) -> str:
        return (
            f"DataSet(n={self.n}, record_width={self.record_width}, "
            f"split_index={self.split_index})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataSet):
            return NotImplemented
        return self.split_index == other.split_index and np.array_equal(
            self._records, other._records
        )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], split_index=None):
        """Build a dataset from a list of equal-length rows."""
        widths = {len(row) for row in rows}
        if len(widths) > 1:
            raise ContractViolation(f"rows have different widths: {sorted(widths)}")
        return cls(np.array(rows, dtype=float), split_index=split_index)

    @property
    def records(self) -> np.ndarray:
        """Return the (n, record_width) array of records."""
        return self._records

    @property
    def n(self) -> int:
        return self._records.shape[0]

    @property
    def record_width(self) -> int:
        return self._records.shape[1]

    @property
    def x(self) -> np.ndarray:
        """Return the covariate block, shape (n, split_index)."""
        if self.split_index is None:
            raise ContractViolation("dataset has no x/y split")
        return self._records[:, : self.split_index]

    @property
    def y(self) -> np.ndarray:
        """Return the response column."""
        if self.split_index is None:
            raise ContractViolation("dataset has no x/y split")
        return self._records[:, self.split_index]

    def datum(self, index: int) -> np.ndarray:
        return self._records[index]

    def take(self, indices) -> "DataSet":
        """Return the dataset made of the records at the given indices."""
        return DataSet(self._records[np.asarray(indices, dtype=int)], self.split_index)

    def concat(self, other: "DataSet") -> "DataSet":
        if other.record_width != self.record_width or (
            other.split_index != self.split_index
        ):
            raise ContractViolation("datasets have different layouts")
        return DataSet(np.vstack([self._records, other.records]), self.split_index)
