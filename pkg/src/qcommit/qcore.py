"""Dense linear algebra for small multi-register quantum systems.

Registers are ordered and indexed; a composite amplitude vector uses the
row-major (Kronecker) ordering, so register 0 is the most significant.
All value types are immutable after construction. Randomness is always
drawn from a caller-supplied ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InvalidArgument

ALGEBRA_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-10

# Born probabilities below this are float noise from exact basis states.
_PROB_FLOOR = 1e-12

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(map(int, dims))
    if not dims or min(dims) < 1:
        raise InvalidArgument(f"register dims must be a nonempty list of positive ints, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state over an ordered list of registers."""

    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise InvalidArgument(f"{amps.size} amplitudes do not fit register dims {dims}")
        norm = math.sqrt(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise InvalidArgument(f"state is not normalized (norm {norm!r})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", _frozen(amps))

    @classmethod
    def from_amplitudes(cls, amps, dims: Sequence[int] | None = None, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise InvalidArgument("cannot normalize the zero vector")
            amps = amps / norm
        return cls(tuple(dims) if dims is not None else (amps.size,), amps)

    @classmethod
    def basis(cls, index: int, dims: Sequence[int] | int = 2) -> "StateVector":
        """Computational basis state ``|index>`` over ``dims``."""
        dims = (dims,) if isinstance(dims, int) else tuple(dims)
        amps = np.zeros(math.prod(dims), dtype=complex)
        amps[index] = 1.0
        return cls(dims, amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amps, other.amps))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()), dims=self.dims)


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """Square matrix that passes the unitarity check at construction."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidArgument(f"unitary must be a square matrix, got shape {m.shape}")
        err = unitarity_error(m)
        if err > ALGEBRA_TOL:
            raise InvalidArgument(f"matrix is not unitary (max |U^dag U - I| = {err:.3e})")
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries @ other.entries)

    def scaled_phase(self, alpha: float) -> "UnitaryMatrix":
        return UnitaryMatrix(np.exp(1j * alpha) * self.entries)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state; ``dims`` records the register split of ``entries``."""

    entries: np.ndarray
    dims: tuple[int, ...] | None = None

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgument(f"density matrix must be square, got shape {m.shape}")
        dims = _check_dims(self.dims if self.dims is not None else (m.shape[0],))
        if math.prod(dims) != m.shape[0]:
            raise InvalidArgument(f"register dims {dims} do not match matrix size {m.shape[0]}")
        if np.max(np.abs(m - m.conj().T)) > ALGEBRA_TOL:
            raise InvalidArgument("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > ALGEBRA_TOL:
            raise InvalidArgument(f"density matrix trace is {np.trace(m).real!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < -ALGEBRA_TOL:
            raise InvalidArgument("density matrix is not positive semidefinite")
        object.__setattr__(self, "entries", _frozen(m))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        if not elems:
            raise InvalidArgument("POVM needs at least one element")
        d = elems[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for e in elems:
            if e.shape != (d, d):
                raise InvalidArgument("POVM elements must share one square shape")
            if np.max(np.abs(e - e.conj().T)) > ALGEBRA_TOL:
                raise InvalidArgument("POVM element is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -ALGEBRA_TOL:
                raise InvalidArgument("POVM element is not positive semidefinite")
            total += e
        if np.max(np.abs(total - np.eye(d))) > ALGEBRA_TOL:
            raise InvalidArgument("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", tuple(_frozen(e) for e in elems))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @classmethod
    def from_basis(cls, basis: Sequence[StateVector]) -> "Povm":
        return cls(tuple(np.outer(b.amps, b.amps.conj()) for b in basis))


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """``state = sum_i coeffs[i] * left[:, i] (x) right[:, i]``.

    ``left_vectors`` and ``right_vectors`` hold the Schmidt vectors as
    columns; ``left_dims``/``right_dims`` are the register dims on each
    side of the cut, in the order the registers appear in the cut.
    """

    coeffs: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    left_dims: tuple[int, ...]
    right_dims: tuple[int, ...]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coeffs > RECONSTRUCTION_TOL))

    def reconstruct(self) -> np.ndarray:
        """Amplitudes of the state with left registers before right ones."""
        return np.einsum("i,ai,bi->ab", self.coeffs, self.left_vectors, self.right_vectors).reshape(-1)


def unitarity_error(m: np.ndarray) -> float:
    """max |m^dag m - I| entry; ``inf`` for non-square input."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return math.inf
    gram = m.conj().T @ m
    gram.flat[:: m.shape[0] + 1] -= 1.0
    return float(np.max(np.abs(gram)))


def fidelity(a: StateVector, b: StateVector) -> float:
    """Phase-insensitive overlap |<a|b>|."""
    return abs(a.inner(b))


def rotation_gate(axis: str, theta: float) -> UnitaryMatrix:
    """Single-qubit rotation ``cos(theta/2) I - i sin(theta/2) P_axis``.

    >>> np.allclose(rotation_gate("z", 0.0).entries, np.eye(2))
    True
    """
    if axis not in PAULIS:
        raise InvalidArgument(f"rotation axis must be one of x, y, z; got {axis!r}")
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidArgument(f"rotation angle must be finite, got {theta}")
    return UnitaryMatrix(math.cos(theta / 2) * PAULI_I - 1j * math.sin(theta / 2) * PAULIS[axis])


def _check_targets(dims: tuple[int, ...], targets: Sequence[int]) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if not targets:
        raise InvalidArgument("at least one target register is required")
    if len(set(targets)) != len(targets):
        raise InvalidArgument(f"target registers must be distinct, got {targets}")
    if any(t < 0 or t >= len(dims) for t in targets):
        raise InvalidArgument(f"target registers {targets} out of range for {len(dims)} registers")
    return targets


def _to_front(amps: np.ndarray, dims: tuple[int, ...], targets: tuple[int, ...]) -> np.ndarray:
    """Reshape to a (prod target dims) x (rest) matrix."""
    if targets == tuple(range(len(targets))):
        return amps.reshape(math.prod(dims[: len(targets)]), -1)
    t = amps.reshape(dims)
    rest = [i for i in range(len(dims)) if i not in targets]
    t = np.transpose(t, list(targets) + rest)
    return t.reshape(math.prod(dims[i] for i in targets), -1)


def _from_front(mat: np.ndarray, dims: tuple[int, ...], targets: tuple[int, ...]) -> np.ndarray:
    if targets == tuple(range(len(targets))):
        return mat.reshape(-1)
    rest = [i for i in range(len(dims)) if i not in targets]
    order = list(targets) + rest
    t = mat.reshape([dims[i] for i in order])
    return np.transpose(t, np.argsort(order)).reshape(-1)


def apply(u: UnitaryMatrix, s: StateVector, targets: Sequence[int] | None = None) -> StateVector:
    """Apply ``u`` on the ``targets`` registers of ``s`` (all registers by default)."""
    targets = tuple(range(len(s.dims))) if targets is None else _check_targets(s.dims, targets)
    if u.dim != math.prod(s.dims[t] for t in targets):
        raise InvalidArgument(f"unitary of dim {u.dim} does not act on target registers {targets} of {s.dims}")
    mat = u.entries @ _to_front(s.amps, s.dims, targets)
    return StateVector(s.dims, _from_front(mat, s.dims, targets))


def tensor(a: Union[StateVector, UnitaryMatrix], b: Union[StateVector, UnitaryMatrix]):
    """Kronecker product; register dims concatenate for states."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(a.dims + b.dims, np.kron(a.amps, b.amps))
    if isinstance(a, UnitaryMatrix) and isinstance(b, UnitaryMatrix):
        return UnitaryMatrix(np.kron(a.entries, b.entries))
    raise InvalidArgument("tensor needs two states or two unitaries")


def adjoint(u: UnitaryMatrix) -> UnitaryMatrix:
    return UnitaryMatrix(u.entries.conj().T)


def partial_trace(s: Union[StateVector, DensityMatrix], keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the ``keep`` registers (in the order given)."""
    keep = _check_targets(s.dims, keep)
    kept_dims = tuple(s.dims[k] for k in keep)
    if isinstance(s, StateVector):
        m = _to_front(s.amps, s.dims, keep)
        return DensityMatrix(m @ m.conj().T, dims=kept_dims)

    n = len(s.dims)
    traced = [i for i in range(n) if i not in keep]
    rho = s.entries.reshape(s.dims + s.dims)
    # bring (keep, traced) on both ket and bra sides, then trace the traced block
    rho = np.transpose(rho, list(keep) + traced + [n + i for i in keep] + [n + i for i in traced])
    dk = math.prod(kept_dims)
    dt = math.prod(s.dims[i] for i in traced) if traced else 1
    rho = rho.reshape(dk, dt, dk, dt)
    return DensityMatrix(np.einsum("ajbj->ab", rho), dims=kept_dims)


def schmidt_decompose(s: StateVector, cut: Sequence[int]) -> SchmidtDecomposition:
    """Schmidt form across ``cut`` (left registers) vs. the remaining ones."""
    left = tuple(int(c) for c in cut)
    if not left:
        raise InvalidArgument("left side of the Schmidt cut is empty")
    left = _check_targets(s.dims, left)
    right = tuple(i for i in range(len(s.dims)) if i not in left)
    if not right:
        raise InvalidArgument("right side of the Schmidt cut is empty")
    m = _to_front(s.amps, s.dims, left)
    u, sv, vh = np.linalg.svd(m, full_matrices=False)
    return SchmidtDecomposition(
        coeffs=sv,
        left_vectors=u,
        right_vectors=vh.T,
        left_dims=tuple(s.dims[i] for i in left),
        right_dims=tuple(s.dims[i] for i in right),
    )


def _basis_matrix(basis: Sequence[StateVector | np.ndarray], dim: int) -> np.ndarray:
    cols = [b.amps if isinstance(b, StateVector) else np.asarray(b, dtype=complex).reshape(-1) for b in basis]
    if len(cols) != dim or any(c.size != dim for c in cols):
        raise InvalidArgument(f"measurement basis must contain {dim} vectors of dimension {dim}")
    b = np.stack(cols, axis=1)
    if np.max(np.abs(b.conj().T @ b - np.eye(dim))) > ALGEBRA_TOL:
        raise InvalidArgument("measurement basis is not orthonormal")
    return b


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    p = np.clip(np.real(probs), 0.0, None)
    p[p < _PROB_FLOOR] = 0.0
    cdf = np.cumsum(p / p.sum())
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), len(p) - 1))


def born_probabilities(s: StateVector, basis: Sequence[StateVector], targets: Sequence[int]) -> np.ndarray:
    targets = _check_targets(s.dims, targets)
    dim = math.prod(s.dims[t] for t in targets)
    b = _basis_matrix(basis, dim)
    proj = b.conj().T @ _to_front(s.amps, s.dims, targets)
    return np.sum(np.abs(proj) ** 2, axis=1)


def measure_projective(
    s: StateVector,
    basis: Sequence[StateVector],
    targets: Sequence[int],
    rng: np.random.Generator,
) -> tuple[int, StateVector]:
    """Projective measurement of ``targets`` in ``basis``.

    Consumes exactly one uniform draw from ``rng``. Returns the outcome
    index and the normalized post-measurement state.
    """
    targets = _check_targets(s.dims, targets)
    dim = math.prod(s.dims[t] for t in targets)
    b = _basis_matrix(basis, dim)
    front = _to_front(s.amps, s.dims, targets)
    proj = b.conj().T @ front
    k = _sample(np.sum(np.abs(proj) ** 2, axis=1), rng)
    rest = proj[k] / np.linalg.norm(proj[k])
    post = np.outer(b[:, k], rest)
    return k, StateVector(s.dims, _from_front(post, s.dims, targets))


def measure_povm(s: Union[StateVector, DensityMatrix], m: Povm, rng: np.random.Generator) -> int:
    rho = s.density() if isinstance(s, StateVector) else s
    if rho.dim != m.dim:
        raise InvalidArgument(f"POVM of dim {m.dim} cannot measure a state of dim {rho.dim}")
    probs = np.array([np.trace(e @ rho.entries).real for e in m.elements])
    return _sample(probs, rng)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.dim != b.dim:
        raise InvalidArgument(f"trace distance needs equal dims, got {a.dim} and {b.dim}")
    td = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a.entries - b.entries))))
    return min(max(td, 0.0), 1.0)


def haar_random_unitary(dim: int, rng: np.random.Generator) -> UnitaryMatrix:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The phases of R's diagonal are folded back into Q so the result is
    uniform rather than biased by the QR sign convention.
    """
    if dim < 1:
        raise InvalidArgument(f"dimension must be positive, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return UnitaryMatrix(q * (d / np.abs(d)))
