"""Two-party commitment with secret unitary transforms.

Commit phase: Bob applies a secret ``U_B`` to two agreed orthogonal
states and sends both to Alice; Alice applies her secret ``U_A`` to the
state for her bit and returns it. Open phase: Alice reveals ``U_A`` over
the classical channel and announces the bit; Bob undoes ``U_A`` and then
``U_B`` and measures in the agreed basis.

Each of the ``m`` parallel instances uses an independent ``(U_A, U_B)``
pair, and Bob accepts only if every instance opens to the announced bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from . import codec
from .errors import InvalidArgument, InvalidConfig, ProtocolViolation
from .qcore import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    StateVector,
    UnitaryMatrix,
    apply,
    haar_random_unitary,
    measure_projective,
    rotation_gate,
    unitarity_error,
)

ROTATION_GRID = "rotation-grid"
EXPLICIT_LIST = "explicit-list"
HAAR_CONTINUOUS = "haar-continuous"
FAMILY_KINDS = (ROTATION_GRID, EXPLICIT_LIST, HAAR_CONTINUOUS)
_AXIS_ORDER = "xyz"


# -- basis and families ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BasisPair:
    """Two agreed orthogonal qubit states encoding bit 0 and bit 1."""

    phi0: StateVector
    phi1: StateVector
    name: Optional[str] = None

    def __post_init__(self):
        if self.phi0.dims != (2,) or self.phi1.dims != (2,):
            raise InvalidArgument("basis states must be single qubits")
        if abs(self.phi0.inner(self.phi1)) > 1e-9:
            raise InvalidArgument("basis states are not orthogonal")

    NAMED = ("computational", "hadamard", "circular")

    @classmethod
    def named(cls, name: str) -> "BasisPair":
        s = 1 / math.sqrt(2)
        vectors = {
            "computational": ([1, 0], [0, 1]),
            "hadamard": ([s, s], [s, -s]),
            "circular": ([s, 1j * s], [s, -1j * s]),
        }
        if name not in vectors:
            raise InvalidConfig(f"unknown basis {name!r}; choose from {', '.join(cls.NAMED)}")
        a, b = vectors[name]
        return cls(StateVector((2,), a), StateVector((2,), b), name)

    @classmethod
    def computational(cls) -> "BasisPair":
        return cls.named("computational")

    def state(self, bit: int) -> StateVector:
        return self.phi1 if bit else self.phi0

    @property
    def states(self) -> tuple[StateVector, StateVector]:
        return (self.phi0, self.phi1)

    def flip_operator(self) -> np.ndarray:
        """|phi1><phi0| + |phi0><phi1|."""
        a, b = self.phi0.amps, self.phi1.amps
        return np.outer(b, a.conj()) + np.outer(a, b.conj())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "phi0": codec.encode_array(self.phi0.amps),
            "phi1": codec.encode_array(self.phi1.amps),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisPair":
        if isinstance(d, str):
            return cls.named(d)
        return cls(
            StateVector((2,), codec.decode_array(d["phi0"])),
            StateVector((2,), codec.decode_array(d["phi1"])),
            d.get("name"),
        )

    def __eq__(self, other):
        if not isinstance(other, BasisPair):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(codec.canonical_json(self.to_dict()))


PAULI_MEMBERS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True, eq=False)
class UnitaryFamily:
    """The set a party's secret transform is drawn from.

    ``rotation-grid`` enumerates ``R_a(2*pi*k/N)`` for each axis in
    ``axes`` (in x, y, z order) and ``0 <= k < N``. ``explicit-list``
    holds its members directly. ``haar-continuous`` can be sampled but
    not enumerated.
    """

    kind: str
    axes: tuple[str, ...] = ()
    grid_size: int = 0
    members: tuple[UnitaryMatrix, ...] = ()
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise InvalidConfig(f"unknown family kind {self.kind!r}")
        if self.kind == ROTATION_GRID:
            axes = tuple(a for a in _AXIS_ORDER if a in set(self.axes))
            if not axes or len(axes) != len(set(self.axes)) or any(a not in _AXIS_ORDER for a in self.axes):
                raise InvalidConfig(f"rotation-grid axes must be a nonempty subset of x,y,z; got {self.axes!r}")
            if int(self.grid_size) < 1:
                raise InvalidConfig(f"rotation-grid size must be positive, got {self.grid_size}")
            object.__setattr__(self, "axes", axes)
            object.__setattr__(self, "grid_size", int(self.grid_size))
        elif self.kind == EXPLICIT_LIST:
            if not self.members:
                raise InvalidConfig("explicit-list family needs at least one member")
            members = tuple(m if isinstance(m, UnitaryMatrix) else UnitaryMatrix(m) for m in self.members)
            object.__setattr__(self, "members", members)

    @classmethod
    def rotation_grid(cls, axes: Sequence[str], n: int) -> "UnitaryFamily":
        return cls(ROTATION_GRID, axes=tuple(axes), grid_size=n)

    @classmethod
    def explicit(cls, members: Sequence, label: Optional[str] = None) -> "UnitaryFamily":
        return cls(EXPLICIT_LIST, members=tuple(members), label=label)

    @classmethod
    def pauli(cls) -> "UnitaryFamily":
        return cls.explicit(PAULI_MEMBERS, label="pauli")

    @classmethod
    def identity(cls) -> "UnitaryFamily":
        return cls.explicit([PAULI_I], label="identity")

    @classmethod
    def haar(cls) -> "UnitaryFamily":
        return cls(HAAR_CONTINUOUS)

    @classmethod
    def parse(cls, text: str) -> "UnitaryFamily":
        """Parse the shorthand ``rot:<axes>:<N>``, ``pauli``, ``haar`` or ``list:<path>``.

        >>> UnitaryFamily.parse("rot:x,y:8").axes
        ('x', 'y')
        """
        text = text.strip()
        if text == "pauli":
            return cls.pauli()
        if text == "haar":
            return cls.haar()
        if text.startswith("list:"):
            return cls.load(text[len("list:"):])
        if text.startswith("rot:"):
            parts = text.split(":")
            if len(parts) != 3:
                raise InvalidConfig(f"rotation family must look like rot:<axes>:<N>, got {text!r}")
            axes = [a.strip() for a in parts[1].replace(",", " ").split()]
            if len(axes) == 1 and len(axes[0]) > 1:
                axes = list(axes[0])  # rot:xyz:8
            try:
                n = int(parts[2])
            except ValueError:
                raise InvalidConfig(f"rotation grid size must be an integer, got {parts[2]!r}") from None
            return cls.rotation_grid(axes, n)
        raise InvalidConfig(f"unrecognized family {text!r}; expected rot:<axes>:<N>, pauli, haar or list:<path>")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "UnitaryFamily":
        """Read an explicit list: a JSON list of matrices (rows of [re, im] pairs),
        optionally wrapped as ``{"members": [...]}``."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read family file {path}: {exc}") from exc
        rows = data["members"] if isinstance(data, dict) else data
        try:
            return cls.explicit([codec.decode_matrix(m) for m in rows], label=f"list:{path}")
        except InvalidArgument as exc:
            raise InvalidConfig(f"family file {path}: {exc}") from exc

    @property
    def is_finite(self) -> bool:
        return self.kind != HAAR_CONTINUOUS

    @property
    def dim(self) -> int:
        return self.members[0].dim if self.kind == EXPLICIT_LIST else 2

    @property
    def size(self) -> int:
        if self.kind == ROTATION_GRID:
            return len(self.axes) * self.grid_size
        if self.kind == EXPLICIT_LIST:
            return len(self.members)
        raise InvalidConfig("a haar-continuous family has no finite size")

    @cached_property
    def _enumerated(self) -> tuple[UnitaryMatrix, ...]:
        if self.kind == ROTATION_GRID:
            n = self.grid_size
            return tuple(rotation_gate(a, 2 * math.pi * k / n) for a in self.axes for k in range(n))
        if self.kind == EXPLICIT_LIST:
            return self.members
        raise InvalidConfig("a haar-continuous family cannot be enumerated")

    def enumerate(self) -> tuple[UnitaryMatrix, ...]:
        return self._enumerated

    def sample(self, rng: np.random.Generator) -> UnitaryMatrix:
        if self.kind == HAAR_CONTINUOUS:
            return haar_random_unitary(2, rng)
        members = self._enumerated
        return members[int(rng.integers(len(members)))]

    def shorthand(self) -> str:
        if self.kind == ROTATION_GRID:
            return f"rot:{','.join(self.axes)}:{self.grid_size}"
        if self.kind == HAAR_CONTINUOUS:
            return "haar"
        return self.label or f"list[{len(self.members)}]"

    def to_dict(self) -> dict:
        if self.kind == ROTATION_GRID:
            return {"kind": self.kind, "axes": list(self.axes), "grid_size": self.grid_size}
        if self.kind == HAAR_CONTINUOUS:
            return {"kind": self.kind}
        return {
            "kind": self.kind,
            "label": self.label,
            "members": [codec.encode_matrix(m.entries) for m in self.members],
        }

    @classmethod
    def from_dict(cls, d) -> "UnitaryFamily":
        if isinstance(d, str):
            return cls.parse(d)
        kind = d.get("kind")
        if kind == ROTATION_GRID:
            return cls.rotation_grid(d["axes"], d["grid_size"])
        if kind == HAAR_CONTINUOUS:
            return cls.haar()
        if kind == EXPLICIT_LIST:
            return cls.explicit([codec.decode_matrix(m) for m in d["members"]], label=d.get("label"))
        raise InvalidConfig(f"unknown family kind {kind!r}")

    def __eq__(self, other):
        if not isinstance(other, UnitaryFamily):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(codec.canonical_json(self.to_dict()))

    def __repr__(self):
        return f"UnitaryFamily({self.shorthand()!r})"


@dataclass(frozen=True)
class ProtocolParams:
    basis: BasisPair
    alice_family: UnitaryFamily
    bob_family: UnitaryFamily
    m: int = 1
    tolerance: float = 1e-9

    def __post_init__(self):
        if int(self.m) < 1:
            raise InvalidConfig(f"number of instances m must be >= 1, got {self.m}")
        if not 0 < self.tolerance <= 1e-3:
            raise InvalidConfig(f"tolerance must lie in (0, 1e-3], got {self.tolerance}")
        for fam in (self.alice_family, self.bob_family):
            if fam.dim != 2:
                raise InvalidConfig(f"family {fam.shorthand()} does not act on a qubit")
        object.__setattr__(self, "m", int(self.m))

    def replace(self, **changes) -> "ProtocolParams":
        fields = dict(basis=self.basis, alice_family=self.alice_family, bob_family=self.bob_family,
                      m=self.m, tolerance=self.tolerance)
        fields.update(changes)
        return ProtocolParams(**fields)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.to_dict(),
            "alice_family": self.alice_family.to_dict(),
            "bob_family": self.bob_family.to_dict(),
            "m": self.m,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolParams":
        return cls(
            basis=BasisPair.from_dict(d.get("basis", "computational")),
            alice_family=UnitaryFamily.from_dict(d["alice_family"]),
            bob_family=UnitaryFamily.from_dict(d["bob_family"]),
            m=d.get("m", 1),
            tolerance=d.get("tolerance", 1e-9),
        )


# -- messages ----------------------------------------------------------------


def _encode_state(s: StateVector) -> dict:
    return {"dims": list(s.dims), "amps": codec.encode_array(s.amps)}


def _decode_state(d: dict) -> StateVector:
    return StateVector(tuple(d["dims"]), codec.decode_array(d["amps"]))


@dataclass(frozen=True)
class CommitOffer:
    """Bob's two transformed basis states per instance."""

    states: tuple[tuple[StateVector, StateVector], ...]

    def payload(self) -> dict:
        return {"states": [[_encode_state(a), _encode_state(b)] for a, b in self.states]}

    @classmethod
    def from_payload(cls, p: dict) -> "CommitOffer":
        pairs = []
        for pair in p["states"]:
            if len(pair) != 2:
                raise ProtocolViolation("CommitOffer must carry exactly two states per instance")
            pairs.append((_decode_state(pair[0]), _decode_state(pair[1])))
        return cls(tuple(pairs))


@dataclass(frozen=True)
class CommitState:
    states: tuple[StateVector, ...]

    def payload(self) -> dict:
        return {"states": [_encode_state(s) for s in self.states]}

    @classmethod
    def from_payload(cls, p: dict) -> "CommitState":
        return cls(tuple(_decode_state(s) for s in p["states"]))


@dataclass(frozen=True, eq=False)
class Reveal:
    """Classical opening: each instance's transform as raw 2x2 entries.

    Entries are not validated here; Bob checks unitarity on receipt.
    """

    transforms: tuple[np.ndarray, ...]
    announced_bit: int

    def payload(self) -> dict:
        return {
            "announced_bit": int(self.announced_bit),
            "transforms": [codec.encode_array(t) for t in self.transforms],
        }

    @classmethod
    def from_payload(cls, p: dict) -> "Reveal":
        return cls(tuple(codec.decode_array(t, (2, 2)) for t in p["transforms"]), int(p["announced_bit"]))

    def __eq__(self, other):
        if not isinstance(other, Reveal):
            return NotImplemented
        return (
            self.announced_bit == other.announced_bit
            and len(self.transforms) == len(other.transforms)
            and all(np.array_equal(a, b) for a, b in zip(self.transforms, other.transforms))
        )


ACCEPTED = "accepted"
MISMATCH = "mismatch"
INVALID_REVEAL = "invalid-reveal"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    opened_bit: Optional[int]
    reason: str = ACCEPTED
    outcomes: tuple[int, ...] = ()

    def payload(self) -> dict:
        return {
            "accepted": self.accepted,
            "opened_bit": self.opened_bit,
            "reason": self.reason,
            "outcomes": list(self.outcomes),
        }

    @classmethod
    def from_payload(cls, p: dict) -> "Verdict":
        return cls(bool(p["accepted"]), p["opened_bit"], p["reason"], tuple(p["outcomes"]))


Message = Union[CommitOffer, CommitState, Reveal, Verdict]
_MESSAGE_TYPES = {cls.__name__: cls for cls in (CommitOffer, CommitState, Reveal, Verdict)}

# the only legal order of a completed run
_FLOW = (
    ("commit", "bob", CommitOffer),
    ("commit", "alice", CommitState),
    ("open", "alice", Reveal),
    ("open", "bob", Verdict),
)


@dataclass(frozen=True)
class TranscriptEntry:
    phase: str
    sender: str
    message: Message


@dataclass
class Transcript:
    """Ordered record of one commit/open exchange."""

    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, phase: str, sender: str, message: Message) -> None:
        step = len(self.entries)
        if step >= len(_FLOW):
            raise ProtocolViolation("transcript is already complete")
        want_phase, want_sender, want_type = _FLOW[step]
        if (phase, sender, type(message)) != (want_phase, want_sender, want_type):
            raise ProtocolViolation(
                f"expected {want_type.__name__} from {want_sender} in {want_phase} phase, "
                f"got {type(message).__name__} from {sender} in {phase} phase"
            )
        self.entries.append(TranscriptEntry(phase, sender, message))

    def __iter__(self) -> Iterator[TranscriptEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def complete(self) -> bool:
        return len(self.entries) == len(_FLOW)

    @property
    def outcome(self) -> Optional[Verdict]:
        return self.entries[-1].message if self.complete else None

    def to_text(self) -> str:
        """JSON Lines, one ``{phase, sender, type, payload}`` object per message."""
        lines = [
            json.dumps(
                {"phase": e.phase, "sender": e.sender, "type": type(e.message).__name__, "payload": e.message.payload()},
                separators=(",", ":"),
            )
            for e in self.entries
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        t = cls()
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            msg_cls = _MESSAGE_TYPES.get(obj.get("type"))
            if msg_cls is None:
                raise ProtocolViolation(f"line {n}: unknown message type {obj.get('type')!r}")
            t.record(obj["phase"], obj["sender"], msg_cls.from_payload(obj["payload"]))
        return t


# -- quantum channel ---------------------------------------------------------


class QuantumChannel:
    """In-process quantum channel.

    Sending consumes the state handle: a sender may not put the same
    handle on the wire twice, which stands in for no-cloning.
    """

    def __init__(self):
        self._sent: dict[int, StateVector] = {}

    def send(self, states: Sequence[StateVector]) -> tuple[StateVector, ...]:
        for s in states:
            if id(s) in self._sent and self._sent[id(s)] is s:
                raise ProtocolViolation("quantum state handle was already sent and is consumed")
        for s in states:
            self._sent[id(s)] = s
        return tuple(states)


# -- secrets and role operations ---------------------------------------------


@dataclass(frozen=True)
class BobSecret:
    u_b: tuple[UnitaryMatrix, ...]


@dataclass(frozen=True)
class AliceSecret:
    u_a: tuple[UnitaryMatrix, ...]
    bit: int


def _check_bit(b) -> int:
    if b not in (0, 1):
        raise InvalidArgument(f"bit must be 0 or 1, got {b!r}")
    return int(b)


def bob_commit_offer(params: ProtocolParams, rng: np.random.Generator) -> tuple[BobSecret, CommitOffer]:
    u_b = tuple(params.bob_family.sample(rng) for _ in range(params.m))
    pairs = tuple((apply(u, params.basis.phi0), apply(u, params.basis.phi1)) for u in u_b)
    return BobSecret(u_b), CommitOffer(pairs)


def alice_commit(
    b: int, offer: CommitOffer, params: ProtocolParams, rng: np.random.Generator
) -> tuple[AliceSecret, CommitState]:
    b = _check_bit(b)
    if not isinstance(offer, CommitOffer) or len(offer.states) != params.m:
        raise ProtocolViolation(f"expected a CommitOffer with {params.m} instance(s)")
    for pair in offer.states:
        if len(pair) != 2 or any(s.dims != (2,) for s in pair):
            raise ProtocolViolation("CommitOffer must carry two qubit states per instance")
    u_a = tuple(params.alice_family.sample(rng) for _ in range(params.m))
    states = tuple(apply(u, pair[b]) for u, pair in zip(u_a, offer.states))
    return AliceSecret(u_a, b), CommitState(states)


def alice_open(secret: AliceSecret) -> Reveal:
    return Reveal(tuple(np.array(u.entries) for u in secret.u_a), secret.bit)


def bob_verify(
    secret: BobSecret,
    commit: CommitState,
    reveal: Reveal,
    params: ProtocolParams,
    rng: np.random.Generator,
) -> Verdict:
    """Undo the revealed transform, undo ``U_B``, measure in the agreed basis.

    Every instance is measured, one uniform draw each and in order, so an
    m-instance verdict is the conjunction of the single-instance ones.
    """
    m = params.m
    if len(commit.states) != m or len(secret.u_b) != m:
        raise ProtocolViolation(f"expected {m} committed instance(s)")
    if len(reveal.transforms) != m:
        raise ProtocolViolation(f"reveal carries {len(reveal.transforms)} transforms, expected {m}")
    if reveal.announced_bit not in (0, 1):
        raise ProtocolViolation(f"announced bit must be 0 or 1, got {reveal.announced_bit!r}")
    if any(np.shape(t) != (2, 2) or unitarity_error(t) > params.tolerance for t in reveal.transforms):
        return Verdict(False, None, INVALID_REVEAL)

    basis = params.basis.states
    outcomes = []
    for u_b, revealed, state in zip(secret.u_b, reveal.transforms, commit.states):
        amps = u_b.entries.conj().T @ (np.asarray(revealed).conj().T @ state.amps)
        undone = StateVector.from_amplitudes(amps, normalize=True)
        k, _ = measure_projective(undone, basis, [0], rng)
        outcomes.append(k)

    accepted = all(k == reveal.announced_bit for k in outcomes)
    opened = outcomes[0] if len(set(outcomes)) == 1 else None
    return Verdict(accepted, opened, ACCEPTED if accepted else MISMATCH, tuple(outcomes))


# -- role state machines -----------------------------------------------------


class Bob:
    """Receiver role: offer, receive commitment, verify opening."""

    def __init__(self, params: ProtocolParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.stage = "idle"
        self.secret: Optional[BobSecret] = None
        self.commitment: Optional[CommitState] = None

    def _expect(self, stage: str) -> None:
        if self.stage != stage:
            raise ProtocolViolation(f"Bob is in stage {self.stage!r}, expected {stage!r}")

    def offer(self) -> CommitOffer:
        self._expect("idle")
        self.secret, msg = bob_commit_offer(self.params, self.rng)
        self.stage = "offered"
        return msg

    def receive_commitment(self, msg: CommitState) -> None:
        self._expect("offered")
        if not isinstance(msg, CommitState) or len(msg.states) != self.params.m:
            raise ProtocolViolation(f"expected a CommitState with {self.params.m} state(s)")
        self.commitment = msg
        self.stage = "committed"

    def verify(self, reveal: Reveal) -> Verdict:
        self._expect("committed")
        verdict = bob_verify(self.secret, self.commitment, reveal, self.params, self.rng)
        self.stage = "done"
        return verdict


class Alice:
    """Committer role: commit to a bit, later open it."""

    def __init__(self, params: ProtocolParams, bit: int, rng: np.random.Generator):
        self.params = params
        self.bit = _check_bit(bit)
        self.rng = rng
        self.stage = "idle"
        self.secret: Optional[AliceSecret] = None

    def commit(self, offer: CommitOffer) -> CommitState:
        if self.stage != "idle":
            raise ProtocolViolation(f"Alice is in stage {self.stage!r}, expected 'idle'")
        self.secret, msg = alice_commit(self.bit, offer, self.params, self.rng)
        self.stage = "committed"
        return msg

    def open(self) -> Reveal:
        if self.stage != "committed":
            raise ProtocolViolation(f"Alice is in stage {self.stage!r}, expected 'committed'")
        self.stage = "opened"
        return alice_open(self.secret)


def run_honest(params: ProtocolParams, b: int, rng: np.random.Generator) -> Transcript:
    """Offer, commit, reveal and verify with both parties honest."""
    channel = QuantumChannel()
    transcript = Transcript()
    bob = Bob(params, rng)
    alice = Alice(params, b, rng)

    offer = bob.offer()
    channel.send([s for pair in offer.states for s in pair])
    transcript.record("commit", "bob", offer)

    commitment = alice.commit(offer)
    channel.send(commitment.states)
    transcript.record("commit", "alice", commitment)
    bob.receive_commitment(commitment)

    reveal = alice.open()
    transcript.record("open", "alice", reveal)
    transcript.record("open", "bob", bob.verify(reveal))
    return transcript
