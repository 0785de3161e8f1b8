import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zeno_csign.fock import (
    annihilation,
    build_basis,
    creation,
    device_basis,
    embed_operator,
    number,
)


def test_device_basis_order():
    b = device_basis()
    assert b.states == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0))
    assert b.dim == 6
    assert b.position((1, 1)) == 4
    assert (0, 3) not in b


def test_build_basis_rejects_bad_input():
    with pytest.raises(ValueError):
        build_basis(0, 2, [])
    with pytest.raises(ValueError):
        build_basis(2, 2, [2])
    with pytest.raises(ValueError):
        build_basis(2, -1, [2, 2])


def test_predicate_filters_states():
    b = build_basis(4, 4, [1, 2, 1, 2], predicate=lambda o: o[1] + o[3] <= 2)
    assert b.dim == 24
    assert all(o[1] + o[3] <= 2 for o in b.states)


def test_ladder_matrix_elements():
    b = device_basis()
    a1 = annihilation(b, 0).matrix
    # a1 |20> = sqrt2 |10>
    out = a1 @ b.ket((2, 0))
    assert np.allclose(out, np.sqrt(2) * b.ket((1, 0)))
    assert np.allclose(a1 @ b.ket((0, 1)), 0)
    # creation out of the truncation is dropped
    assert np.allclose(creation(b, 1).matrix @ b.ket((1, 1)), 0)


def test_number_operator_is_diagonal_occupation():
    b = device_basis()
    for mode in (0, 1):
        n = number(b, mode).matrix
        assert np.allclose(np.diag(n), [o[mode] for o in b.states])
        assert np.allclose(n, np.diag(np.diag(n)))


def test_commutator_holds_below_truncation():
    b = build_basis(1, 5, [5])
    a = annihilation(b, 0).matrix
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(np.diag(comm)[:-1], 1.0)


def test_mode_index_checked():
    with pytest.raises(IndexError):
        annihilation(device_basis(), 2)


def test_embed_two_mode_operator_on_spectator_modes():
    src, dst = device_basis(), build_basis(4, 4, [1, 2, 1, 2], predicate=lambda o: o[1] + o[3] <= 2)
    a = annihilation(src, 0)
    big = embed_operator(a, src, dst, [1, 3])
    direct = annihilation(dst, 1).matrix
    assert np.allclose(big.matrix, direct)
    assert big.mode == 1


def test_embed_validates_map():
    src = device_basis()
    with pytest.raises(ValueError):
        embed_operator(annihilation(src, 0), src, src, [0, 0])
    with pytest.raises(ValueError):
        embed_operator(annihilation(src, 0), src, src, [0])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4), st.data())
def test_basis_enumeration_is_complete(modes, total, data):
    caps = data.draw(st.lists(st.integers(0, 3), min_size=modes, max_size=modes))
    b = build_basis(modes, total, caps)
    brute = [o for o in np.ndindex(*[c + 1 for c in caps]) if sum(o) <= total]
    assert list(b.states) == sorted(tuple(int(x) for x in o) for o in brute)
    assert all(b.position(s) == i for i, s in enumerate(b.states))
