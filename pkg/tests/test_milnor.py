import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from motsteen import milnor
from motsteen.errors import DegreeError, DomainError, ParseError
from motsteen.milnor import (
    AlgebraElement,
    MilnorElt,
    SqWord,
    adem_expand,
    commutator_check,
    from_milnor,
    milnor_to_sqword,
    p_element,
    parse_element,
    product,
    product_mod_tau,
    q_element,
    reduce_mod_tau,
    sq,
    sqword_to_milnor,
    unit,
    zero,
)


def test_bidegrees_of_named_elements():
    assert q_element(0).topdeg == 1 and q_element(0).weight == 0
    assert sq(2).topdeg == 2 and sq(2).weight == 1
    assert unit().bidegree() if False else (unit().topdeg, unit().weight) == (0, 0)
    assert (q_element(2).topdeg, q_element(2).weight) == (7, 3)
    assert (p_element(1, 1).topdeg, p_element(1, 1).weight) == (2, 1)
    # |xi_i| = (2^(i+1)-2, 2^i-1) on the dual side
    assert (p_element(1, 3).topdeg, p_element(1, 3).weight) == (14, 7)


def test_sq2_squared_is_tau_sq3sq1():
    lhs = product(sq(2), sq(2))
    sq3sq1 = product(sq(3), sq(1))
    assert lhs == sq3sq1.times_tau(1)
    assert lhs.topdeg == 4 and lhs.weight == 2
    # the underlying Milnor term is Q0 Q1
    assert lhs.sorted_terms() == [MilnorElt((1, 1), ())]
    assert lhs.tau_exp(MilnorElt((1, 1), ())) == 1


def test_q_squares_vanish():
    for i in range(4):
        qi = q_element(i)
        assert product(qi, qi).is_zero()


def test_p_squares_vanish_below_diagonal():
    for s, t in [(1, 2), (1, 3), (2, 3), (1, 4)]:
        pe = p_element(s, t)
        assert product(pe, pe).is_zero(), (s, t)


def test_p_diagonal_squares_vanish_mod_tau():
    with milnor.raised_degree_cap(128):
        for t in range(1, 4):
            pe = p_element(t, t)
            sqr = product(pe, pe)
            assert not sqr.is_zero()
            assert reduce_mod_tau(sqr).is_zero()


def test_unit_law_random():
    rng = random.Random(7)
    one = unit()
    for _ in range(20):
        e = tuple(rng.randint(0, 1) for _ in range(3))
        r = tuple(rng.randint(0, 2) for _ in range(2))
        x = from_milnor(MilnorElt(e, r), rng.randint(0, 2))
        assert product(one, x) == x
        assert product(x, one) == x


def test_sq1_sq2_is_sq3():
    assert product(sq(1), sq(2)) == sq(3)
    words = adem_expand(1, 2)
    assert words == [SqWord((3,), 0)]


def test_adem_2_2():
    words = adem_expand(2, 2)
    assert words == [SqWord((3, 1), 1)]


def test_adem_preconditions():
    with pytest.raises(DomainError):
        adem_expand(3, 1)
    with pytest.raises(DomainError):
        adem_expand(0, 2)


def adem_sum(a, b):
    acc = zero(a + b, a // 2 + b // 2)
    for w in adem_expand(a, b):
        acc = acc + sqword_to_milnor(w)
    return acc


def test_adem_matches_product_small():
    for b in range(1, 9):
        for a in range(1, min(2 * b, 17 - b)):
            assert product(sq(a), sq(b)) == adem_sum(a, b), (a, b)


def test_commutator_recursion():
    assert commutator_check(0)
    assert commutator_check(1)
    assert commutator_check(3)


def test_associativity_sample():
    gens = [sq(1), sq(2), sq(4), q_element(1), p_element(1, 2)]
    for x, y, z in itertools.product(gens, repeat=3):
        if x.topdeg + y.topdeg + z.topdeg > 24:
            continue
        assert product(product(x, y), z) == product(x, product(y, z))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 3), st.integers(0, 2),
       st.integers(0, 1), st.integers(0, 1), st.integers(0, 3), st.integers(0, 2))
def test_bidegree_additivity(e0, e1, r1, r2, f0, f1, s1, s2):
    x = from_milnor(MilnorElt((e0, e1), (r1, r2)))
    y = from_milnor(MilnorElt((f0, f1), (s1, s2)))
    p = product(x, y)
    assert p.topdeg == x.topdeg + y.topdeg
    assert p.weight == x.weight + y.weight
    for term in p.terms:
        assert p.tau_exp(term) >= 0


def test_sqword_to_milnor_bockstein():
    assert sqword_to_milnor(SqWord((1,))) == q_element(0)
    assert sqword_to_milnor(SqWord(())) == unit()


def random_admissible_words(rng, count, cap):
    out = []
    while len(out) < count:
        k = rng.randint(1, 3)
        word = [rng.randint(1, 3)]
        for _ in range(k - 1):
            word.append(2 * word[-1] + rng.randint(0, 2))
        word = list(reversed(word))
        for j in range(len(word) - 1):
            assert word[j] >= 2 * word[j + 1]
        if sum(word) <= cap:
            out.append(SqWord(tuple(word), rng.randint(0, 2)))
    return out


def test_admissible_roundtrip():
    rng = random.Random(42)
    for w in random_admissible_words(rng, 40, 24):
        x = sqword_to_milnor(w)
        back = milnor_to_sqword(x)
        assert back == [w], (w, back)


def test_roundtrip_sums_of_words():
    # Q1 = Sq^2 Sq^1 + Sq^3 in the admissible basis
    words = milnor_to_sqword(q_element(1))
    assert words == [SqWord((2, 1), 0), SqWord((3,), 0)]
    total = zero(3, 1)
    for w in words:
        total = total + sqword_to_milnor(w)
    assert total == q_element(1)


def test_reduce_mod_tau():
    t = product(sq(2), sq(2))
    assert reduce_mod_tau(t).is_zero()
    assert reduce_mod_tau(q_element(0)) == q_element(0)
    assert product_mod_tau(sq(2), sq(2)).is_zero()


def test_add_degree_mismatch():
    with pytest.raises(DegreeError):
        sq(1) + sq(2)


def test_parse_and_print_roundtrip():
    for text in ["Sq(3,1)", "t^2 Q(0)Sq(3,1) + Sq(2)Q(1)"]:
        try:
            x = parse_element(text)
        except ParseError:
            # mixed bidegree example should raise instead
            continue
        y = parse_element(str(x))
        assert x == y


def test_parse_canonical_examples():
    x = parse_element("Q(0)Q(2)")
    assert x == product(q_element(0), q_element(2))
    y = parse_element("t^1 Q(0)Q(1)")
    assert y == product(sq(2), sq(2))
    with pytest.raises(ParseError):
        parse_element("Sq(2) + Q(0)")
    with pytest.raises(ParseError):
        parse_element("")


def test_degree_cap():
    from motsteen.errors import DegreeCapError
    with pytest.raises(DegreeCapError):
        product(sq(40), sq(40))
