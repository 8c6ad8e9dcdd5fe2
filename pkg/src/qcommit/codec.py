"""JSON-friendly encoding of complex numbers and arrays.

Complex values travel as ``[re, im]`` pairs. Python's float repr is the
shortest string that round-trips, so encoding is lossless.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InvalidArgument


def encode_complex(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(pair) -> complex:
    try:
        re, im = pair
        return complex(float(re), float(im))
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(f"expected an [re, im] pair, got {pair!r}") from exc


def encode_array(a: np.ndarray) -> list[list[float]]:
    """Flatten in row-major order into a list of pairs."""
    return [encode_complex(z) for z in np.asarray(a, dtype=complex).reshape(-1)]


def decode_array(pairs, shape=None) -> np.ndarray:
    a = np.array([decode_complex(p) for p in pairs], dtype=complex)
    return a.reshape(shape) if shape is not None else a


def encode_matrix(m: np.ndarray) -> list[list[list[float]]]:
    """Nested rows of pairs, for human-editable family files."""
    return [[encode_complex(z) for z in row] for row in np.asarray(m, dtype=complex)]


def decode_matrix(rows) -> np.ndarray:
    return np.array([[decode_complex(z) for z in row] for row in rows], dtype=complex)


def canonical_json(obj) -> str:
    """Deterministic compact JSON used for config echoes and hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
