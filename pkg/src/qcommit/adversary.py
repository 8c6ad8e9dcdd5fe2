"""Cheating strategies for Alice.

Substitution attacks replace the revealed ``U_A`` with ``V @ U_A``. An
oracle attacker who knows Bob's ``U_B`` can pick ``V`` so the opening
flips exactly; a blind attacker can only guess ``V``.

The entanglement attack works in an abstract register model. Control
registers ``|B>`` and ``|A>`` hold uniform superpositions over every
member of Bob's and Alice's families, giving one state per committed bit
on registers ``(B, q1, q2, A)``. Bob holds ``(B, q1)`` and Alice holds
``(q2, A)``. When Bob's reductions of the two states coincide, a unitary
on Alice's side maps one state to the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument, InvalidConfig, ResourceLimit
from .protocol import (
    AliceSecret,
    BasisPair,
    BobSecret,
    ProtocolParams,
    Reveal,
    UnitaryFamily,
    alice_open,
)
from .qcore import (
    StateVector,
    UnitaryMatrix,
    apply,
    haar_random_unitary,
    partial_trace,
    trace_distance,
    unitarity_error,
)

HONEST = "honest"
RANDOM_SUBSTITUTION = "random-substitution"
ORACLE_SUBSTITUTION = "oracle-substitution"
EPR_MODEL = "epr-model"
STRATEGY_KINDS = (HONEST, RANDOM_SUBSTITUTION, ORACLE_SUBSTITUTION, EPR_MODEL)
_ALIASES = {"random": RANDOM_SUBSTITUTION, "oracle": ORACLE_SUBSTITUTION, "epr": EPR_MODEL}

EPR_SIZE_CAP = 2**14
BOB_SIDE = (0, 1)
ALICE_SIDE = (2, 3)


@dataclass(frozen=True)
class AttackStrategy:
    kind: str
    assumed_bob_family: Optional[UnitaryFamily] = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in STRATEGY_KINDS:
            raise InvalidConfig(f"unknown strategy {self.kind!r}; choose from {', '.join(STRATEGY_KINDS)}")
        object.__setattr__(self, "kind", kind)
        if kind == EPR_MODEL:
            if self.assumed_bob_family is None:
                raise InvalidConfig("the epr-model strategy needs an assumed Bob family")
            if not self.assumed_bob_family.is_finite:
                raise InvalidConfig("the epr-model strategy needs a finite assumed Bob family")
        elif self.assumed_bob_family is not None:
            raise InvalidConfig(f"strategy {kind} takes no assumed Bob family")

    @classmethod
    def honest(cls) -> "AttackStrategy":
        return cls(HONEST)

    @classmethod
    def random_substitution(cls) -> "AttackStrategy":
        return cls(RANDOM_SUBSTITUTION)

    @classmethod
    def oracle_substitution(cls) -> "AttackStrategy":
        return cls(ORACLE_SUBSTITUTION)

    @classmethod
    def epr_model(cls, assumed_bob_family: UnitaryFamily) -> "AttackStrategy":
        return cls(EPR_MODEL, assumed_bob_family)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.assumed_bob_family is not None:
            d["assumed_bob_family"] = self.assumed_bob_family.to_dict()
        return d

    @classmethod
    def from_dict(cls, d) -> "AttackStrategy":
        if isinstance(d, str):
            return cls(d)
        assumed = d.get("assumed_bob_family")
        return cls(d["kind"], UnitaryFamily.from_dict(assumed) if assumed is not None else None)


@dataclass(frozen=True)
class ForgedReveal:
    v: UnitaryMatrix
    composed: UnitaryMatrix


@dataclass(frozen=True)
class EprStatePair:
    """Commitments to 0 and 1 over registers ``(B, q1, q2, A)``."""

    psi0: StateVector
    psi1: StateVector

    def __post_init__(self):
        if self.psi0.dims != self.psi1.dims or len(self.psi0.dims) != 4:
            raise InvalidArgument("EPR states need matching 4-register dims")
        if self.psi0.dims[1:3] != (2, 2):
            raise InvalidArgument("EPR committed registers must be qubits")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.psi0.dims

    @property
    def bob_dim(self) -> int:
        return self.dims[0] * self.dims[1]

    @property
    def alice_dim(self) -> int:
        return self.dims[2] * self.dims[3]

    def state(self, bit: int) -> StateVector:
        return self.psi1 if bit else self.psi0


def _check_unitary(*mats: UnitaryMatrix) -> None:
    for u in mats:
        if not isinstance(u, UnitaryMatrix) or u.dim != 2:
            raise InvalidArgument("expected 2x2 UnitaryMatrix inputs")


def forge_substitution_oracle(u_a: UnitaryMatrix, u_b: UnitaryMatrix, basis: BasisPair) -> ForgedReveal:
    """``V = U_A U_B X U_B^dag U_A^dag`` where ``X`` swaps the basis states.

    Bob's opening ``U_B^dag (V U_A)^dag`` applied to ``U_A U_B |phi_b>``
    then yields ``X |phi_b> = |phi_{1-b}>``.
    """
    _check_unitary(u_a, u_b)
    w = u_a.entries @ u_b.entries
    v = UnitaryMatrix(w @ basis.flip_operator() @ w.conj().T)
    return ForgedReveal(v, v @ u_a)


def forge_substitution_random(rng: np.random.Generator, u_a: Optional[UnitaryMatrix] = None) -> ForgedReveal:
    """Haar-random ``V``; ``composed`` is ``V @ u_a`` (``V`` itself if no ``u_a``)."""
    v = haar_random_unitary(2, rng)
    return ForgedReveal(v, v if u_a is None else v @ u_a)


def forged_reveal(
    strategy: AttackStrategy,
    alice: AliceSecret,
    bob: BobSecret,
    params: ProtocolParams,
    target_bit: int,
    rng: np.random.Generator,
) -> Reveal:
    """Opening message a cheating Alice sends to claim ``target_bit``.

    The oracle strategy is handed Bob's secret; the others ignore it.
    The honest strategy opens its committed bit regardless of the target.
    """
    if strategy.kind == HONEST:
        return alice_open(alice)
    if strategy.kind == RANDOM_SUBSTITUTION:
        forged = [forge_substitution_random(rng, u) for u in alice.u_a]
    elif strategy.kind == ORACLE_SUBSTITUTION:
        forged = [forge_substitution_oracle(ua, ub, params.basis) for ua, ub in zip(alice.u_a, bob.u_b)]
    else:
        raise InvalidConfig(f"strategy {strategy.kind} has no message-level forgery")
    return Reveal(tuple(np.array(f.composed.entries) for f in forged), int(target_bit))


def _family_members(fam: UnitaryFamily) -> np.ndarray:
    if not fam.is_finite:
        raise InvalidConfig(f"family {fam.shorthand()} is continuous; the EPR model needs finite families")
    return np.stack([u.entries for u in fam.enumerate()])


def epr_build_states(alice_family: UnitaryFamily, bob_family: UnitaryFamily, basis: BasisPair) -> EprStatePair:
    ua = _family_members(alice_family)
    ub = _family_members(bob_family)
    n_a, n_b = len(ua), len(ub)
    if n_a * n_b * 4 > EPR_SIZE_CAP:
        raise ResourceLimit(f"EPR model of dimension {n_a * n_b * 4} exceeds the cap of {EPR_SIZE_CAP}")

    # w[b, a] = U_A[a] @ U_B[b]
    w = np.einsum("aij,bjk->baik", ua, ub)
    w0 = w @ basis.phi0.amps
    w1 = w @ basis.phi1.amps
    eye_a = np.eye(n_a)
    # amps[b, q1, q2, a'] = sum_a (w|phi_x>)[b,a,q1] (w|phi_y>)[b,a,q2] delta(a, a')
    scale = 1 / math.sqrt(n_a * n_b)
    amps0 = scale * np.einsum("bai,baj,ac->bijc", w0, w1, eye_a)
    amps1 = scale * np.einsum("bai,baj,ac->bijc", w1, w0, eye_a)
    dims = (n_b, 2, 2, n_a)
    return EprStatePair(StateVector(dims, amps0), StateVector(dims, amps1))


def epr_check_hiding(pair: EprStatePair) -> float:
    """Trace distance between Bob's reductions of the two commitments."""
    return trace_distance(partial_trace(pair.psi0, BOB_SIDE), partial_trace(pair.psi1, BOB_SIDE))


def epr_construct_v(pair: EprStatePair) -> tuple[UnitaryMatrix, float]:
    """Best unitary on Alice's side taking ``psi0`` towards ``psi1``.

    With each state reshaped to a Bob x Alice matrix ``M_b``, applying
    ``I (x) V`` maps ``M_0`` to ``M_0 V^T``. The unitary ``W = V^T``
    minimizing ``||M_0 W - M_1||`` over unitaries and a global phase is
    the polar factor of ``M_0^dag M_1``. This needs no matching of
    Schmidt vectors, so degenerate Schmidt spectra need no special case.

    Returns ``V`` and the phase-minimized residual
    ``min_a ||(I (x) V) psi0 - e^{ia} psi1||``.
    """
    m0 = pair.psi0.amps.reshape(pair.bob_dim, pair.alice_dim)
    m1 = pair.psi1.amps.reshape(pair.bob_dim, pair.alice_dim)
    p, _, qh = np.linalg.svd(m0.conj().T @ m1)
    v = UnitaryMatrix((p @ qh).T)
    overlap = abs(np.vdot(m1, m0 @ v.entries.T))
    residual = math.sqrt(max(0.0, 2.0 - 2.0 * overlap))
    return v, residual


def epr_attack_success(pair: EprStatePair, v: UnitaryMatrix) -> float:
    """``|<psi1| (I (x) V) |psi0>|^2``."""
    if v.dim != pair.alice_dim:
        raise InvalidArgument(f"V has dim {v.dim}; Alice's side has dim {pair.alice_dim}")
    if unitarity_error(v.entries) > 1e-9:
        raise InvalidArgument("V is not unitary")
    switched = apply(v, pair.psi0, ALICE_SIDE)
    return min(1.0, abs(pair.psi1.inner(switched)) ** 2)


def epr_instance_success(
    alice_family: UnitaryFamily,
    true_bob_family: UnitaryFamily,
    assumed_bob_family: UnitaryFamily,
    basis: BasisPair,
) -> dict:
    """Build ``V`` from the assumed families and score it against the true ones."""
    true_pair = epr_build_states(alice_family, true_bob_family, basis)
    assumed_pair = true_pair if assumed_bob_family == true_bob_family else epr_build_states(
        alice_family, assumed_bob_family, basis
    )
    v, residual = epr_construct_v(assumed_pair)
    return {
        "hiding_td": epr_check_hiding(true_pair),
        "residual": residual,
        "attack_success": epr_attack_success(true_pair, v),
        "v": v,
    }


__all__ = [
    "AttackStrategy",
    "EprStatePair",
    "ForgedReveal",
    "epr_attack_success",
    "epr_build_states",
    "epr_check_hiding",
    "epr_construct_v",
    "epr_instance_success",
    "forge_substitution_oracle",
    "forge_substitution_random",
    "forged_reveal",
]
