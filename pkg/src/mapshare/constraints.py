"""Accumulated linear measurement system over map cells with box bounds.

The store keeps the equality constraints in fully reduced row echelon
form: every retained row owns a pivot column that appears in no other
row. Unit rows therefore pin single cells, and any cell whose value is
forced by elimination eventually surfaces as a pivot-only row, which is
how the per-cell "exactly known" flags are maintained.
"""

from __future__ import annotations

from typing import Iterable, Iterator

__all__ = ["ConstraintStore", "InconsistentConstraintError"]

PIVOT_TOL = 1e-9  # relative: a row is dependent when nothing larger survives
RHS_TOL = 1e-7  # rhs residual allowed on a dependent row
KNOWN_TOL = 1e-9  # disagreement allowed when re-pinning a known cell
DROP_TOL = 1e-12  # relative coefficient dust dropped during elimination


class InconsistentConstraintError(ValueError):
    """Constraints contradict each other; the world is static so this
    signals a caller bug, not a measurement conflict."""


class ConstraintStore:
    """Growing system A x = o with 0 <= x <= 1 over n_cells variables.

    `add_exact` folds unit rows in immediately; `add_message` queues
    averaging rows verbatim until `reduce_independent` eliminates them
    against the basis. Rows are sparse dicts {cell: weight}.
    """

    def __init__(self, n_cells: int):
        if n_cells <= 0:
            raise ValueError("n_cells must be positive")
        self.n = n_cells
        self._basis: dict[int, dict[int, float]] = {}  # pivot -> row
        self._rhs: dict[int, float] = {}  # pivot -> value
        self._cols: dict[int, set[int]] = {}  # col -> pivots touching it
        self._pending: list[tuple[dict[int, float], float]] = []
        self.known: dict[int, float] = {}

    # -------------------------------------------------- public interface

    @property
    def k(self) -> int:
        """Independent equality constraints currently retained."""
        return len(self._basis)

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def copy(self) -> "ConstraintStore":
        dup = ConstraintStore(self.n)
        dup._basis = {p: dict(row) for p, row in self._basis.items()}
        dup._rhs = dict(self._rhs)
        dup._cols = {c: set(ps) for c, ps in self._cols.items()}
        dup._pending = [(dict(row), rhs) for row, rhs in self._pending]
        dup.known = dict(self.known)
        return dup

    def add_exact(self, cells: Iterable[tuple[int, float]]) -> "ConstraintStore":
        """Pin cells to exact values; idempotent for repeated inserts."""
        for cell, value in cells:
            self._check_cell(cell)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"cell {cell}: value {value} outside [0, 1]")
            old = self.known.get(cell)
            if old is not None:
                if abs(old - value) > KNOWN_TOL:
                    raise InconsistentConstraintError(
                        f"cell {cell} already pinned to {old}, got {value}"
                    )
                continue
            self._insert({cell: 1.0}, float(value))
        return self

    def add_message(self, msg) -> "ConstraintStore":
        """Queue the averaging rows of an AbstractionMessage verbatim."""
        for row, value in zip(msg.rows, msg.values):
            coeffs = dict(zip(row.cells, row.weights))
            for cell in coeffs:
                self._check_cell(cell)
            self._pending.append((coeffs, float(value)))
        return self

    def add_row(self, coeffs: dict[int, float], rhs: float) -> "ConstraintStore":
        """Queue one raw equality row (mostly for tests and tooling)."""
        for cell in coeffs:
            self._check_cell(cell)
        self._pending.append((dict(coeffs), float(rhs)))
        return self

    def reduce_independent(self) -> "ConstraintStore":
        """Fold queued rows into the basis, dropping dependent ones."""
        while self._pending:
            coeffs, rhs = self._pending.pop(0)
            self._insert(coeffs, rhs)
        return self

    def equations(self) -> list[tuple[dict[int, float], float]]:
        """Snapshot of the reduced rows, ordered by pivot column."""
        return [
            (dict(self._basis[p]), self._rhs[p]) for p in sorted(self._basis)
        ]

    def multi_rows(self) -> list[tuple[dict[int, float], float]]:
        """Reduced rows that couple two or more cells."""
        return [
            (dict(self._basis[p]), self._rhs[p])
            for p in sorted(self._basis)
            if len(self._basis[p]) > 1
        ]

    def fingerprint(self) -> tuple:
        """Canonical reduced form; equal fingerprints mean equal stores."""
        return tuple(
            (p, tuple(sorted(self._basis[p].items())), self._rhs[p])
            for p in sorted(self._basis)
        )

    def same_solution_set(self, other: "ConstraintStore", tol: float = 1e-9) -> bool:
        """Whether both stores describe the same affine solution set.

        Reduced row echelon form is unique for a given row space, so the
        comparison is entry-wise on the canonical rows, with `tol`
        absorbing float noise from different insertion orders.
        """
        if self.n != other.n or set(self._basis) != set(other._basis):
            return False
        for p, row in self._basis.items():
            orow = other._basis[p]
            if set(row) != set(orow):
                return False
            if abs(self._rhs[p] - other._rhs[p]) > tol:
                return False
            if any(abs(row[c] - orow[c]) > tol for c in row):
                return False
        return True

    def dump_csv(self, path) -> None:
        """Debug dump, one reduced row per line: pivot,rhs,cell=weight,..."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write("pivot,rhs,entries\n")
            for p in sorted(self._basis):
                entries = ";".join(
                    f"{c}={self._basis[p][c]!r}" for c in sorted(self._basis[p])
                )
                fh.write(f"{p},{self._rhs[p]!r},{entries}\n")

    def __iter__(self) -> Iterator[tuple[dict[int, float], float]]:
        return iter(self.equations())

    # ----------------------------------------------------- elimination

    def _check_cell(self, cell: int) -> None:
        if not 0 <= cell < self.n:
            raise ValueError(f"cell index {cell} outside [0, {self.n})")

    def _insert(self, coeffs: dict[int, float], rhs: float) -> None:
        row = dict(coeffs)
        scale0 = max((abs(v) for v in row.values()), default=0.0)
        # eliminate existing pivots; fill-in never introduces pivot
        # columns, so a single pass suffices
        for p in [c for c in row if c in self._basis]:
            factor = row.pop(p)
            if factor == 0.0:
                continue
            for c, w in self._basis[p].items():
                if c == p:
                    continue
                row[c] = row.get(c, 0.0) - factor * w
            rhs -= factor * self._rhs[p]
        if row:
            scale = max(abs(v) for v in row.values())
            row = {c: v for c, v in row.items() if abs(v) > DROP_TOL * scale}
        if not row or max(abs(v) for v in row.values()) <= PIVOT_TOL * max(1.0, scale0):
            if abs(rhs) > RHS_TOL:
                raise InconsistentConstraintError(
                    f"dependent row leaves rhs residual {rhs!r}"
                )
            return
        pivot = max(row, key=lambda c: (abs(row[c]), -c))
        norm = row[pivot]
        new_row = {c: v / norm for c, v in row.items()}
        new_row[pivot] = 1.0
        new_rhs = rhs / norm
        # clear the new pivot column from rows already in the basis
        touched = []
        for q in list(self._cols.get(pivot, ())):
            brow = self._basis[q]
            factor = brow.pop(pivot)
            self._cols[pivot].discard(q)
            for c, w in new_row.items():
                if c == pivot:
                    continue
                nv = brow.get(c, 0.0) - factor * w
                if abs(nv) <= DROP_TOL:
                    if c in brow:
                        del brow[c]
                        self._cols[c].discard(q)
                else:
                    if c not in brow:
                        self._cols.setdefault(c, set()).add(q)
                    brow[c] = nv
            self._rhs[q] -= factor * new_rhs
            touched.append(q)
        self._basis[pivot] = new_row
        self._rhs[pivot] = new_rhs
        for c in new_row:
            self._cols.setdefault(c, set()).add(pivot)
        for q in touched + [pivot]:
            if len(self._basis[q]) == 1:
                self.known[q] = self._rhs[q]
