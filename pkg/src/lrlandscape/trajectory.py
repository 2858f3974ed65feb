"""Column-oriented time series shared by all dynamics runs."""
from __future__ import annotations

import csv
from typing import Dict, Iterable, List, Sequence

import numpy as np


class Trajectory:
    """Named columns of equal length, first column is the time axis."""

    def __init__(self, columns: Sequence[str]):
        self.columns: List[str] = list(columns)
        self._rows: List[Sequence[float]] = []
        self._frozen: Dict[str, np.ndarray] | None = None

    @classmethod
    def from_arrays(cls, data: Dict[str, Iterable[float]]) -> "Trajectory":
        tr = cls(list(data))
        cols = [np.asarray(v, dtype=float) for v in data.values()]
        lengths = {len(v) for v in cols}
        if len(lengths) > 1:
            raise ValueError(f"columns have different lengths: {lengths}")
        tr._rows = [tuple(r) for r in zip(*cols)]
        return tr

    def append(self, *row: float) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(row)}")
        self._frozen = None
        self._rows.append(row)

    def _data(self) -> Dict[str, np.ndarray]:
        if self._frozen is None:
            arr = np.asarray(self._rows, dtype=float).reshape(-1, len(self.columns))
            self._frozen = {c: arr[:, i].copy() for i, c in enumerate(self.columns)}
        return self._frozen

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data()[name]

    def __len__(self) -> int:
        return len(self._data()[self.columns[0]])

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    @property
    def t(self) -> np.ndarray:
        return self[self.columns[0]]

    def last(self, name: str) -> float:
        return float(self[name][-1])

    def to_csv(self, path) -> None:
        data = self._data()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for i in range(len(self)):
                w.writerow(["%.17e" % data[c][i] for c in self.columns])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows = [[float(x) for x in row] for row in r if row]
        arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
        return cls.from_arrays({c: arr[:, i] for i, c in enumerate(header)})
