import numpy as np
import pytest

from mapshare.abstraction import AbstractionMessage, MessageRow
from mapshare.constraints import ConstraintStore, InconsistentConstraintError
from mapshare.decoder import PriorModel, estimate


def msg_of(rows_values, theta=1, bits=0):
    rows = tuple(
        MessageRow(cells=tuple(cells), weights=tuple(weights))
        for cells, weights, _ in rows_values
    )
    values = tuple(v for _, _, v in rows_values)
    return AbstractionMessage(theta=theta, rows=rows, values=values, bits=bits)


def test_add_exact_idempotent():
    store = ConstraintStore(10)
    store.add_exact([(5, 0.7)])
    store.add_exact([(5, 0.7)])
    assert store.k == 1
    assert store.known[5] == 0.7


def test_add_exact_two_cells():
    store = ConstraintStore(10)
    k0 = store.k
    store.add_exact([(1, 0.0), (2, 1.0)])
    assert store.k == k0 + 2
    assert store.known == {1: 0.0, 2: 1.0}


def test_add_exact_conflict_raises():
    store = ConstraintStore(10)
    store.add_exact([(5, 0.7)])
    with pytest.raises(InconsistentConstraintError):
        store.add_exact([(5, 0.2)])


def test_add_exact_validates_range_and_index():
    store = ConstraintStore(4)
    with pytest.raises(ValueError):
        store.add_exact([(0, 1.5)])
    with pytest.raises(ValueError):
        store.add_exact([(9, 0.5)])


def test_empty_message_is_noop():
    store = ConstraintStore(4)
    store.add_message(msg_of([])).reduce_independent()
    assert store.k == 0


def test_identity_message_pins_cells():
    store = ConstraintStore(10)
    store.add_message(
        msg_of(
            [
                ((3,), (1.0,), 0.4),
                ((4,), (1.0,), 0.5),
                ((5,), (1.0,), 0.6),
            ]
        )
    ).reduce_independent()
    assert store.k == 3
    assert store.known == {3: 0.4, 4: 0.5, 5: 0.6}


def test_average_over_known_cells_is_dropped():
    store = ConstraintStore(10)
    store.add_exact([(1, 0.2), (2, 0.8)])
    store.add_message(msg_of([((1, 2), (0.5, 0.5), 0.5)])).reduce_independent()
    assert store.k == 2  # dependent row eliminated


def test_duplicate_rows_collapse():
    store = ConstraintStore(5)
    store.add_row({1: 1.0}, 0.3)
    store.add_row({1: 1.0}, 0.3)
    store.reduce_independent()
    assert store.k == 1


def test_rank_two_system_keeps_solution_set():
    # {avg(x1,x2)=0.5, x1=0.2, x2=0.8}: any 2 independent rows describe it
    store = ConstraintStore(4)
    store.add_row({1: 0.5, 2: 0.5}, 0.5)
    store.add_row({1: 1.0}, 0.2)
    store.add_row({2: 1.0}, 0.8)
    store.reduce_independent()
    assert store.k == 2
    assert store.known[1] == pytest.approx(0.2)
    assert store.known[2] == pytest.approx(0.8)


def test_contradicting_averages_raise():
    store = ConstraintStore(4)
    store.add_row({1: 0.5, 2: 0.5}, 0.5)
    store.add_row({1: 0.5, 2: 0.5}, 0.6)
    with pytest.raises(InconsistentConstraintError):
        store.reduce_independent()


def test_elimination_cascade_marks_known():
    # avg(x1,x2)=0.5 then x1=0.2 forces x2=0.8
    store = ConstraintStore(4)
    store.add_row({1: 0.5, 2: 0.5}, 0.5)
    store.reduce_independent()
    assert 2 not in store.known and 1 not in store.known
    store.add_exact([(1, 0.2)])
    assert store.known[1] == pytest.approx(0.2)
    assert store.known[2] == pytest.approx(0.8)


def test_solution_set_preserved_under_reduction():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = 6
        x0 = rng.random(n)
        store = ConstraintStore(n)
        raw = []
        for _ in range(5):
            support = rng.choice(n, size=int(rng.integers(1, 4)), replace=False)
            w = 1.0 / len(support)
            row = {int(c): w for c in support}
            rhs = float(sum(w * x0[c] for c in support))
            raw.append((row, rhs))
            store.add_row(row, rhs)
        store.reduce_independent()
        assert store.k <= n
        # reduced rows must agree with every point satisfying the raw rows;
        # check the generating point itself
        for coeffs, rhs in store.equations():
            acc = sum(w * x0[c] for c, w in coeffs.items())
            assert acc == pytest.approx(rhs, abs=1e-9)


def test_known_cells_unique_over_feasible_set():
    # every cell flagged known keeps the same value under extreme priors
    rng = np.random.default_rng(8)
    n = 6
    x0 = rng.random(n)
    store = ConstraintStore(n)
    store.add_row({0: 0.5, 1: 0.5}, float(0.5 * (x0[0] + x0[1])))
    store.add_exact([(0, float(x0[0])), (3, float(x0[3]))])
    store.add_row({3: 0.5, 4: 0.5}, float(0.5 * (x0[3] + x0[4])))
    store.reduce_independent()
    lo = estimate(store, PriorModel(mean=0.0))
    hi = estimate(store, PriorModel(mean=1.0))
    for cell in store.known:
        assert lo.values[cell] == pytest.approx(hi.values[cell], abs=1e-9)
        assert store.known[cell] == pytest.approx(lo.values[cell], abs=1e-9)


def test_fingerprint_and_same_solution_set():
    a = ConstraintStore(6)
    b = ConstraintStore(6)
    rows = [({0: 0.5, 1: 0.5}, 0.4), ({2: 1.0}, 0.9)]
    for row, rhs in rows:
        a.add_row(row, rhs)
        b.add_row(row, rhs)
    a.reduce_independent()
    b.reduce_independent()
    assert a.fingerprint() == b.fingerprint()
    assert a.same_solution_set(b)
    b.add_exact([(4, 0.25)])
    assert not a.same_solution_set(b)


def test_same_solution_set_insertion_order_invariant():
    rows = [
        ({0: 0.25, 1: 0.25, 2: 0.25, 3: 0.25}, 0.5),
        ({0: 1.0}, 0.2),
        ({1: 0.5, 2: 0.5}, 0.6),
    ]
    a = ConstraintStore(5)
    for row, rhs in rows:
        a.add_row(row, rhs)
    b = ConstraintStore(5)
    for row, rhs in reversed(rows):
        b.add_row(row, rhs)
    a.reduce_independent()
    b.reduce_independent()
    assert a.same_solution_set(b, tol=1e-9)


def test_copy_is_independent():
    store = ConstraintStore(5)
    store.add_exact([(0, 0.5)])
    dup = store.copy()
    dup.add_exact([(1, 0.25)])
    assert 1 in dup.known and 1 not in store.known
    assert store.k == 1 and dup.k == 2


def test_k_never_exceeds_n():
    rng = np.random.default_rng(4)
    n = 5
    x0 = rng.random(n)
    store = ConstraintStore(n)
    for _ in range(40):
        support = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        w = 1.0 / len(support)
        store.add_row(
            {int(c): w for c in support},
            float(sum(w * x0[c] for c in support)),
        )
    store.reduce_independent()
    assert store.k <= n


def test_dump_csv(tmp_path):
    store = ConstraintStore(4)
    store.add_exact([(2, 0.5)])
    store.add_row({0: 0.5, 1: 0.5}, 0.3)
    store.reduce_independent()
    out = tmp_path / "dump.csv"
    store.dump_csv(out)
    text = out.read_text()
    assert text.startswith("pivot,rhs,entries\n")
    assert len(text.strip().splitlines()) == 1 + store.k
