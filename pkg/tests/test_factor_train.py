import random

import pytest

from pgkit.errors import DomainError
from pgkit.tl import (
    TLElement,
    Train,
    enumerate_diagrams,
    factor_train,
    identity_train,
    jones_wenzl,
    multiply_word,
    _noncrossing_matchings,
)


def dense_car(n):
    """A car with every diagram present: permutation bugs cannot hide."""
    out = TLElement.zero(n, n)
    for i, d in enumerate(enumerate_diagrams(n)):
        out._accumulate(d, i + 1)
    return out


def all_one_car_trains(n, k, car):
    for match in _noncrossing_matchings(list(range(2 * k + 2 * n))):
        yield Train(k, n, frozenset(match), (car,))


def random_ncm(points, rng):
    if not points:
        return []
    idx = rng.choice(range(1, len(points), 2))
    return (
        [(points[0], points[idx])]
        + random_ncm(points[1:idx], rng)
        + random_ncm(points[idx + 1 :], rng)
    )


def test_zero_car_train_is_its_own_word():
    d = enumerate_diagrams(3)[4]
    pairing = frozenset(
        tuple(sorted((d.disk_position(i), d.disk_position(j)))) for i, j in d.pairs
    )
    tr = Train(3, 2, pairing, ())
    word = factor_train.__wrapped__(tr) if hasattr(factor_train, "__wrapped__") else None
    # zero-car trains short-circuit inside the recursion; exercise via the
    # public function on a one-car train instead, and directly here:
    from pgkit.tl import _factor_rec

    word = _factor_rec(tr, None)
    assert len(word) == 1 and word[0][0] == "tl"
    assert multiply_word(word).equals(tr.instantiate())


def test_single_car_f2_train():
    f2 = jones_wenzl(2)
    count = 0
    for tr in all_one_car_trains(2, 3, f2):
        word = factor_train(tr, validate=True)
        kinds = [w[0] for w in word]
        assert kinds == ["tl", "box", "tl"]
        count += 1
    assert count == 42


@pytest.mark.parametrize("n,k", [(1, 2), (2, 3), (2, 4), (3, 4)])
def test_all_one_car_trains_round_trip(n, k):
    car = dense_car(n)
    for tr in all_one_car_trains(n, k, car):
        factor_train(tr, validate=True)  # raises on any mismatch


def test_random_two_car_trains_round_trip():
    rng = random.Random(99)
    car = dense_car(2)
    for _ in range(100):
        match = random_ncm(list(range(2 * 4 + 2 * 2 * 2)), rng)
        tr = Train(4, 2, frozenset(match), (car, car))
        factor_train(tr, validate=True)


def test_three_car_trains_round_trip():
    rng = random.Random(5)
    car = dense_car(2)
    for _ in range(15):
        match = random_ncm(list(range(2 * 3 + 3 * 2 * 2)), rng)
        tr = Train(3, 2, frozenset(match), (car, car, car))
        factor_train(tr, validate=True)


def test_identity_train_instantiates_to_its_car():
    car = dense_car(2)
    tr = identity_train(car)
    assert tr.instantiate().equals(car)


def test_factorization_needs_k_above_n():
    car = dense_car(2)
    tr = identity_train(car)
    with pytest.raises(DomainError):
        factor_train(tr)


def test_numeric_mode_round_trip():
    rng = random.Random(31)
    car = TLElement.zero(2, 2, delta=2.7)
    for i, d in enumerate(enumerate_diagrams(2)):
        car._accumulate(d, 0.5 + i)
    for _ in range(20):
        match = random_ncm(list(range(2 * 3 + 2 * 2)), rng)
        tr = Train(3, 2, frozenset(match), (car,))
        factor_train(tr, validate=True)
