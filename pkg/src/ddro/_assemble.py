"""Incremental assembly of dense MILP models."""

from __future__ import annotations

import numpy as np

from .linprog import LinearProgram
from .milp import MixedIntegerProgram


class MipBuilder:
    """Collects columns and sparse row stubs, then emits a dense model."""

    def __init__(self):
        self._obj = []
        self._lower = []
        self._upper = []
        self._binary = []
        self._rows = []  # (coeff dict, sense, rhs)

    def add_col(self, obj=0.0, lb=0.0, ub=np.inf, binary=False) -> int:
        self._obj.append(float(obj))
        self._lower.append(float(lb))
        self._upper.append(float(ub))
        self._binary.append(bool(binary))
        return len(self._obj) - 1

    def add_row(self, coeffs: dict, sense: str, rhs: float):
        self._rows.append((coeffs, sense, float(rhs)))

    @property
    def n_cols(self) -> int:
        return len(self._obj)

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    def build(self, sense="min") -> MixedIntegerProgram:
        n = len(self._obj)
        m = len(self._rows)
        A = np.zeros((m, n))
        senses = []
        rhs = np.empty(m)
        for i, (coeffs, s, r) in enumerate(self._rows):
            for j, val in coeffs.items():
                A[i, j] = val
            senses.append(s)
            rhs[i] = r
        lp = LinearProgram(
            sense,
            np.array(self._obj),
            A,
            tuple(senses),
            rhs,
            np.array(self._lower),
            np.array(self._upper),
        )
        return MixedIntegerProgram(lp, np.array(self._binary, dtype=bool))
