import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcommit.adversary import (
    AttackStrategy,
    epr_attack_success,
    epr_build_states,
    epr_check_hiding,
    epr_construct_v,
    epr_instance_success,
    forge_substitution_oracle,
    forge_substitution_random,
)
from qcommit.errors import InvalidArgument, InvalidConfig, ResourceLimit
from qcommit.protocol import BasisPair, UnitaryFamily
from qcommit.qcore import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, UnitaryMatrix, apply, haar_random_unitary, unitarity_error

COMP = BasisPair.computational()
BASES = [BasisPair.named(n) for n in BasisPair.NAMED]
PAULI = UnitaryFamily.pauli()
IDENTITY = UnitaryFamily.identity()


def dense_epr_state(alice_members, bob_members, first, second):
    """Explicit sum of Kronecker products |B> (x) W|first> (x) W|second> (x) |A>."""
    n_a, n_b = len(alice_members), len(bob_members)
    out = np.zeros(n_b * 4 * n_a, dtype=complex)
    for bi, ub in enumerate(bob_members):
        for ai, ua in enumerate(alice_members):
            w = ua @ ub
            out += np.kron(np.kron(np.kron(np.eye(n_b)[bi], w @ first), w @ second), np.eye(n_a)[ai])
    return out / math.sqrt(n_a * n_b)


def dense_bob_reduction(psi, bob_dim, alice_dim):
    rho = np.zeros((bob_dim, bob_dim), dtype=complex)
    for k in range(alice_dim):
        col = np.array([psi[i * alice_dim + k] for i in range(bob_dim)])
        rho += np.outer(col, col.conj())
    return rho


# -- substitution -------------------------------------------------------------


def test_oracle_with_identities_is_pauli_x():
    forged = forge_substitution_oracle(UnitaryMatrix(PAULI_I), UnitaryMatrix(PAULI_I), COMP)
    np.testing.assert_allclose(forged.v.entries, PAULI_X, atol=1e-15)


@pytest.mark.parametrize("basis", BASES)
def test_oracle_forgery_flips_exactly(basis):
    rng = np.random.default_rng(77)
    for _ in range(1000):
        u_a, u_b = haar_random_unitary(2, rng), haar_random_unitary(2, rng)
        forged = forge_substitution_oracle(u_a, u_b, basis)
        assert unitarity_error(forged.v.entries) <= 1e-9 and unitarity_error(forged.composed.entries) <= 1e-9
        undo = u_b.entries.conj().T @ forged.composed.entries.conj().T
        for bit in (0, 1):
            committed = u_a.entries @ u_b.entries @ basis.state(bit).amps
            opened = undo @ committed
            assert abs(np.vdot(basis.state(1 - bit).amps, opened)) >= 1 - 1e-9


def test_oracle_rejects_non_unitary_input():
    with pytest.raises(InvalidArgument):
        forge_substitution_oracle(np.eye(2), UnitaryMatrix(PAULI_I), COMP)


def test_random_forgery_is_unitary_and_seeded():
    a = forge_substitution_random(np.random.default_rng(3))
    b = forge_substitution_random(np.random.default_rng(3))
    assert unitarity_error(a.v.entries) <= 1e-10
    np.testing.assert_array_equal(a.v.entries, b.v.entries)


def test_random_forgery_flip_frequency():
    rng = np.random.default_rng(31)
    n, flips = 10_000, 0
    for _ in range(n):
        u_a, u_b = haar_random_unitary(2, rng), haar_random_unitary(2, rng)
        forged = forge_substitution_random(rng, u_a)
        opened = u_b.entries.conj().T @ forged.composed.entries.conj().T @ u_a.entries @ u_b.entries @ [1, 0]
        flips += rng.random() < abs(opened[1]) ** 2
    assert abs(flips / n - 0.5) <= 0.02


def test_strategy_validation():
    assert AttackStrategy("random").kind == "random-substitution"
    with pytest.raises(InvalidConfig):
        AttackStrategy("sneaky")
    with pytest.raises(InvalidConfig):
        AttackStrategy("epr")
    with pytest.raises(InvalidConfig):
        AttackStrategy.epr_model(UnitaryFamily.haar())
    with pytest.raises(InvalidConfig):
        AttackStrategy("oracle", IDENTITY)
    s = AttackStrategy.epr_model(UnitaryFamily.parse("rot:x:3"))
    assert AttackStrategy.from_dict(s.to_dict()) == s


# -- EPR model ----------------------------------------------------------------


def test_identity_singletons_give_product_state():
    pair = epr_build_states(IDENTITY, IDENTITY, COMP)
    assert pair.dims == (1, 2, 2, 1)
    np.testing.assert_array_equal(pair.psi0.amps, [0, 1, 0, 0])  # |0>|1>
    np.testing.assert_array_equal(pair.psi1.amps, [0, 0, 1, 0])  # |1>|0>


@pytest.mark.parametrize("alice,bob", [("pauli", "rot:x,y,z:4"), ("rot:x:3", "rot:y:5"), ("rot:z:1", "pauli")])
@pytest.mark.parametrize("basis", BASES)
def test_epr_states_match_dense_construction(alice, bob, basis):
    a, b = UnitaryFamily.parse(alice), UnitaryFamily.parse(bob)
    pair = epr_build_states(a, b, basis)
    assert pair.dims == (b.size, 2, 2, a.size)
    assert pair.psi0.dim == b.size * 4 * a.size
    am = [u.entries for u in a.enumerate()]
    bm = [u.entries for u in b.enumerate()]
    phi0, phi1 = basis.phi0.amps, basis.phi1.amps
    np.testing.assert_allclose(pair.psi0.amps, dense_epr_state(am, bm, phi0, phi1), atol=1e-12)
    np.testing.assert_allclose(pair.psi1.amps, dense_epr_state(am, bm, phi1, phi0), atol=1e-12)
    assert abs(pair.psi0.norm() - 1) <= 1e-9 and abs(pair.psi1.norm() - 1) <= 1e-9


def test_epr_requires_finite_families_and_respects_cap():
    with pytest.raises(InvalidConfig):
        epr_build_states(UnitaryFamily.haar(), IDENTITY, COMP)
    with pytest.raises(ResourceLimit):
        epr_build_states(UnitaryFamily.parse("rot:x,y,z:64"), UnitaryFamily.parse("rot:x,y,z:64"), COMP)
    # exactly at the cap is allowed: 64 * 64 * 4 = 2**14
    epr_build_states(UnitaryFamily.parse("rot:x:64"), UnitaryFamily.parse("rot:y:64"), COMP)


def test_identity_singletons_are_fully_distinguishable():
    assert epr_check_hiding(epr_build_states(IDENTITY, IDENTITY, COMP)) == pytest.approx(1.0, abs=1e-12)


def test_pauli_twirl_hides_the_bit():
    pair = epr_build_states(PAULI, IDENTITY, COMP)
    assert epr_check_hiding(pair) <= 1e-9
    # independent dense reductions, and the analytic Pauli twirl value I/2
    for psi in (pair.psi0, pair.psi1):
        rho = dense_bob_reduction(psi.amps, pair.bob_dim, pair.alice_dim)
        np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_hiding_distance_in_unit_interval(seed, n):
    rng = np.random.default_rng(seed)
    a = UnitaryFamily.explicit([haar_random_unitary(2, rng) for _ in range(n)])
    b = UnitaryFamily.explicit([haar_random_unitary(2, rng) for _ in range(n)])
    assert 0.0 <= epr_check_hiding(epr_build_states(a, b, COMP)) <= 1.0


def test_construct_v_on_pauli_configuration():
    pair = epr_build_states(PAULI, IDENTITY, COMP)
    v, residual = epr_construct_v(pair)
    assert residual <= 1e-9
    assert epr_attack_success(pair, v) >= 1 - 1e-9


def test_construct_v_fails_on_distinguishable_states():
    pair = epr_build_states(IDENTITY, IDENTITY, COMP)
    _, residual = epr_construct_v(pair)
    assert residual > 0.5


def test_identity_v_on_identity_singletons_has_zero_success():
    pair = epr_build_states(IDENTITY, IDENTITY, COMP)
    assert epr_attack_success(pair, UnitaryMatrix(np.eye(2))) == pytest.approx(0, abs=1e-9)


def test_attack_success_dimension_mismatch():
    pair = epr_build_states(PAULI, IDENTITY, COMP)
    with pytest.raises(InvalidArgument):
        epr_attack_success(pair, UnitaryMatrix(np.eye(2)))


def random_twirl_family(rng):
    """Paulis conjugated by a random unitary: still averages every qubit state to I/2."""
    w = haar_random_unitary(2, rng).entries
    return UnitaryFamily.explicit([w @ p @ w.conj().T for p in (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.sampled_from(BASES))
def test_equal_reductions_imply_small_residual(seed, n_bob, basis):
    rng = np.random.default_rng(seed)
    alice = random_twirl_family(rng)
    bob = UnitaryFamily.explicit([haar_random_unitary(2, rng) for _ in range(n_bob)])
    pair = epr_build_states(alice, bob, basis)
    assert epr_check_hiding(pair) <= 1e-9
    v, residual = epr_construct_v(pair)
    assert residual <= 1e-6
    assert np.max(np.abs(apply(v, pair.psi0, (2, 3)).norm() - 1)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_success_tracks_residual(seed, n_a, n_b):
    rng = np.random.default_rng(seed)
    alice = UnitaryFamily.explicit([haar_random_unitary(2, rng) for _ in range(n_a)])
    bob = UnitaryFamily.explicit([haar_random_unitary(2, rng) for _ in range(n_b)])
    pair = epr_build_states(alice, bob, COMP)
    v, residual = epr_construct_v(pair)
    success = epr_attack_success(pair, v)
    assert 0 <= success <= 1
    # residual^2 = 2 - 2|overlap| and success = |overlap|^2
    assert success == pytest.approx((1 - residual**2 / 2) ** 2, abs=1e-9)


def test_construct_v_beats_random_unitaries():
    pair = epr_build_states(UnitaryFamily.parse("rot:x,y,z:4"), UnitaryFamily.parse("rot:x:3"), COMP)
    v, _ = epr_construct_v(pair)
    best = epr_attack_success(pair, v)
    rng = np.random.default_rng(0)
    assert all(epr_attack_success(pair, haar_random_unitary(pair.alice_dim, rng)) <= best + 1e-12
               for _ in range(200))


@pytest.mark.parametrize(
    "true,assumed", [("rot:x:3", "rot:y:3"), ("rot:x,y,z:4", "rot:z:1"), ("rot:y:5", "rot:x,z:5")]
)
def test_mismatched_assumption_loses_success(true, assumed):
    t, a = UnitaryFamily.parse(true), UnitaryFamily.parse(assumed)
    correct = epr_instance_success(PAULI, t, t, COMP)["attack_success"]
    wrong = epr_instance_success(PAULI, t, a, COMP)["attack_success"]
    assert correct >= 1 - 1e-9
    assert wrong < correct
