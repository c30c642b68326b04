"""State algebra for diagonal (classical) states and dense density matrices.

Basis ordering is big-endian: wire 0 is the leftmost ket symbol, so the
basis index of ``|b_0 b_1 ... b_{n-1}>`` is ``sum(b_i * 2**(n-1-i))``.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

EXACT_ATOL = 1e-12
SPECTRAL_ATOL = 1e-10


class StateError(ValueError):
    """Base class for invalid state construction or usage."""


class NotPowerOfTwo(StateError):
    pass


class EmptyRegister(StateError):
    pass


class NegativeProbability(StateError):
    pass


class NotNormalized(StateError):
    pass


class NotHermitian(StateError):
    pass


class NotPositive(StateError):
    pass


class EmptyKeepSet(StateError):
    pass


class DimensionMismatch(StateError):
    pass


def _wires_for_length(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise NotPowerOfTwo(f"length {length} is not a power of two")
    n = length.bit_length() - 1
    if n < 1:
        raise EmptyRegister("a register needs at least one wire")
    return n


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """A state diagonal in the computational basis, i.e. a probability vector.

    Instances are immutable; ``probs`` is a read-only float64 array of length
    ``2**n_wires``. Use :func:`make_diagonal` for untrusted input, which clamps
    tiny negative entries; the constructor itself only validates.
    """

    n_wires: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1:
            raise DimensionMismatch("probability vector must be one-dimensional")
        if self.n_wires < 1:
            raise EmptyRegister("a register needs at least one wire")
        if probs.shape[0] != 1 << self.n_wires:
            raise DimensionMismatch(
                f"{probs.shape[0]} probabilities for {self.n_wires} wires")
        if probs.min() < 0.0:
            raise NegativeProbability(f"entry {probs.min()!r} is negative")
        total = probs.sum()
        if abs(total - 1.0) > EXACT_ATOL:
            raise NotNormalized(f"probabilities sum to {total!r}")
        if probs is self.probs and probs.flags.writeable:
            probs = probs.copy()
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def dim(self) -> int:
        return 1 << self.n_wires

    def as_tensor(self) -> np.ndarray:
        """View the probabilities as an ``n_wires``-dimensional ``2x...x2`` array."""
        return self.probs.reshape((2,) * self.n_wires)

    def __repr__(self):
        if self.dim <= 16:
            return f"DiagonalState({self.probs.tolist()})"
        return f"DiagonalState(n_wires={self.n_wires})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix on ``n_wires`` qubits.

    Hermiticity and unit trace are checked on every construction. Positivity
    needs an eigendecomposition and is checked by :func:`make_density` and
    :func:`check_positive` only.
    """

    n_wires: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.complex128)
        if self.n_wires < 1:
            raise EmptyRegister("a register needs at least one wire")
        dim = 1 << self.n_wires
        if m.shape != (dim, dim):
            raise DimensionMismatch(f"shape {m.shape} for {self.n_wires} wires")
        if not np.allclose(m, m.conj().T, rtol=0, atol=EXACT_ATOL):
            raise NotHermitian("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > EXACT_ATOL:
            raise NotNormalized(f"trace is {tr!r}")
        if m is self.entries and m.flags.writeable:
            m = m.copy()
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def dim(self) -> int:
        return 1 << self.n_wires

    def __repr__(self):
        return f"DensityMatrix(n_wires={self.n_wires})"


State = Union[DiagonalState, DensityMatrix]


def check_positive(rho: DensityMatrix, atol: float = SPECTRAL_ATOL) -> None:
    lowest = np.linalg.eigvalsh(rho.entries).min()
    if lowest < -atol:
        raise NotPositive(f"eigenvalue {lowest!r} below -{atol}")


def make_diagonal(probs: Sequence[float] | np.ndarray) -> DiagonalState:
    """Validate a probability vector and wrap it as a :class:`DiagonalState`.

    Entries down to ``-1e-12`` are clamped to zero and the vector is
    renormalized; anything worse is rejected.
    """
    p = np.array(probs, dtype=np.float64).reshape(-1)
    n = _wires_for_length(p.shape[0])
    if not np.all(np.isfinite(p)):
        raise NotNormalized("probabilities must be finite")
    if p.min() < -EXACT_ATOL:
        raise NegativeProbability(f"entry {p.min()!r} is negative beyond tolerance")
    total = p.sum()
    if abs(total - 1.0) > EXACT_ATOL:
        raise NotNormalized(f"probabilities sum to {total!r}")
    np.clip(p, 0.0, None, out=p)
    p /= p.sum()
    return DiagonalState(n, p)


def make_density(entries: Sequence | np.ndarray) -> DensityMatrix:
    """Validate a matrix as a density matrix, including positivity."""
    m = np.array(entries, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    n = _wires_for_length(m.shape[0])
    rho = DensityMatrix(n, m)
    check_positive(rho)
    return rho


def basis_state(bits: Sequence[int] | str) -> DiagonalState:
    """``|b><b|`` for a bit string, e.g. ``basis_state("01")``."""
    bits = [int(b) for b in bits]
    p = np.zeros(1 << len(bits))
    p[int("".join(map(str, bits)), 2)] = 1.0
    return DiagonalState(len(bits), p)


def maximally_mixed(n_wires: int) -> DiagonalState:
    return DiagonalState(n_wires, np.full(1 << n_wires, 1.0 / (1 << n_wires)))


def density_from_diagonal(d: DiagonalState) -> DensityMatrix:
    return DensityMatrix(d.n_wires, np.diag(d.probs).astype(np.complex128))


def diagonal_part(rho: DensityMatrix) -> DiagonalState:
    """Dephase in the computational basis, keeping only the diagonal."""
    p = np.real(np.diag(rho.entries)).copy()
    # Rounding on a PSD matrix can leave -1e-17 on the diagonal.
    np.clip(p, 0.0, None, out=p)
    return DiagonalState(rho.n_wires, p)


def tensor(a: State, b: State) -> State:
    """Kronecker product; ``a`` occupies the more significant wires."""
    if isinstance(a, DiagonalState) and isinstance(b, DiagonalState):
        return DiagonalState(a.n_wires + b.n_wires, np.kron(a.probs, b.probs))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(a.n_wires + b.n_wires, np.kron(a.entries, b.entries))
    raise TypeError(
        f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor_all(states: Iterable[State]) -> State:
    states = list(states)
    if not states:
        raise EmptyRegister("nothing to tensor")
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _check_keep(keep: Iterable[int], n_wires: int) -> list[int]:
    keep = sorted(set(int(w) for w in keep))
    if not keep:
        raise EmptyKeepSet("keep set is empty")
    if keep[0] < 0 or keep[-1] >= n_wires:
        raise DimensionMismatch(f"wires {keep} not all in 0..{n_wires - 1}")
    return keep


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on ``keep``; kept wires retain their relative order."""
    n = rho.n_wires
    keep = _check_keep(keep, n)
    drop = [w for w in range(n) if w not in keep]
    t = rho.entries.reshape((2,) * (2 * n))
    order = keep + drop + [w + n for w in keep] + [w + n for w in drop]
    dk, dd = 1 << len(keep), 1 << len(drop)
    t = t.transpose(order).reshape(dk, dd, dk, dd)
    return DensityMatrix(len(keep), np.einsum("ajbj->ab", t))


def marginal(d: DiagonalState, keep: Iterable[int]) -> DiagonalState:
    """Partial trace for diagonal states: sum out every wire not in ``keep``."""
    keep = _check_keep(keep, d.n_wires)
    drop = tuple(w for w in range(d.n_wires) if w not in keep)
    p = d.as_tensor().sum(axis=drop) if drop else d.as_tensor()
    return DiagonalState(len(keep), p.reshape(-1))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def fidelity(rho: State, sigma: State) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Two diagonal states use the classical closed form
    ``(sum_i sqrt(p_i q_i))**2``. Mixed inputs are promoted to dense.
    """
    if rho.n_wires != sigma.n_wires:
        raise DimensionMismatch(
            f"{rho.n_wires}-wire state against {sigma.n_wires}-wire state")
    if isinstance(rho, DiagonalState) and isinstance(sigma, DiagonalState):
        return classical_fidelity(rho.probs, sigma.probs)
    if isinstance(rho, DiagonalState):
        rho = density_from_diagonal(rho)
    if isinstance(sigma, DiagonalState):
        sigma = density_from_diagonal(sigma)
    root = _psd_sqrt(rho.entries)
    inner = root @ sigma.entries @ root
    inner = (inner + inner.conj().T) / 2
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(max(f, 0.0), 1.0)


def classical_fidelity(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape}")
    f = float(np.sum(np.sqrt(p * q)) ** 2)
    return min(max(f, 0.0), 1.0)


def classical_pair() -> DiagonalState:
    """The classically correlated pair ``(|00><00| + |11><11|) / 2``."""
    return DiagonalState(2, np.array([0.5, 0.0, 0.0, 0.5]))


def generalized_classical_state(n: int) -> DiagonalState:
    """Correlated state on wires ``A_1..A_n, B_1..B_n``.

    Built by reordering ``n`` interleaved classical pairs
    ``(A_1 B_1)(A_2 B_2)...`` into block order with the interleave network.
    """
    from diagtele.gates import apply_permutation_diagonal, interleave_network

    if n < 1:
        raise EmptyRegister("need at least one pair")
    pairs = tensor_all([classical_pair()] * n)
    return apply_permutation_diagonal(
        pairs, interleave_network(n, "interleaved_to_block"))


def generalized_classical_state_direct(n: int) -> DiagonalState:
    """Same state as :func:`generalized_classical_state`, from the closed form.

    Weight ``2**-n`` on every index whose A-block bits equal its B-block bits.
    """
    if n < 1:
        raise EmptyRegister("need at least one pair")
    p = np.zeros(1 << (2 * n))
    b = np.arange(1 << n)
    p[(b << n) | b] = 1.0 / (1 << n)
    return DiagonalState(2 * n, p)


def is_separable_ppt(rho: DensityMatrix, wires: Iterable[int]) -> bool:
    """Peres-Horodecki test: partial transpose on ``wires`` stays PSD."""
    n = rho.n_wires
    wires = set(wires)
    t = rho.entries.reshape((2,) * (2 * n))
    axes = list(range(2 * n))
    for w in wires:
        axes[w], axes[w + n] = axes[w + n], axes[w]
    pt = t.transpose(axes).reshape(rho.dim, rho.dim)
    return bool(np.linalg.eigvalsh(pt).min() >= -SPECTRAL_ATOL)


def bits_of(index: int, width: int) -> tuple[int, ...]:
    return tuple((index >> (width - 1 - k)) & 1 for k in range(width))


def index_of(bits: Sequence[int]) -> int:
    return sum(int(b) << (len(bits) - 1 - k) for k, b in enumerate(bits))


@dataclass(frozen=True)
class RegisterLayout:
    """Wire assignment for the protocol roles ``X_i``, ``A_i``, ``B_i``.

    ``copies``: ``X_1..X_N, A_1, B_1, A_2, B_2, ..., A_N, B_N``.
    ``generalized``: ``X_1..X_N, A_1..A_N, B_1..B_N``.

    Wire positions are those of the initial joint state. In the generalized
    scheme Alice interleaves her X and A wires before measuring, so the
    measured wires are listed separately by :meth:`outcome_wires`.
    """

    scheme: str
    n: int
    roles: dict = field(hash=False)

    @classmethod
    def for_scheme(cls, scheme: str, n: int) -> "RegisterLayout":
        if n < 1:
            raise EmptyRegister("need at least one qubit")
        roles = {f"X{i + 1}": i for i in range(n)}
        if scheme == "copies":
            for i in range(n):
                roles[f"A{i + 1}"] = n + 2 * i
                roles[f"B{i + 1}"] = n + 2 * i + 1
        elif scheme == "generalized":
            for i in range(n):
                roles[f"A{i + 1}"] = n + i
                roles[f"B{i + 1}"] = 2 * n + i
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if sorted(roles.values()) != list(range(3 * n)):
            raise AssertionError("roles do not partition the register")
        return cls(scheme, n, roles)

    @property
    def n_wires(self) -> int:
        return 3 * self.n

    def wires(self, role: str) -> list[int]:
        return [self.roles[f"{role}{i + 1}"] for i in range(self.n)]

    @property
    def x_wires(self) -> list[int]:
        return self.wires("X")

    @property
    def a_wires(self) -> list[int]:
        return self.wires("A")

    @property
    def b_wires(self) -> list[int]:
        return self.wires("B")

    @property
    def alice_wires(self) -> list[int]:
        return sorted(self.x_wires + self.a_wires)

    def outcome_wires(self) -> list[int]:
        """Wires Alice measures after her operator, in outcome bit order.

        copies: ``x_1..x_N a_1..a_N``; generalized: ``x_1 a_1 ... x_N a_N``
        (positions 0..2N-1 once her X/A wires are interleaved).
        """
        if self.scheme == "copies":
            return self.x_wires + self.a_wires
        return list(range(2 * self.n))

    def x_positions(self) -> list[int]:
        """Positions of the ``x_i`` bits within :meth:`outcome_wires`."""
        if self.scheme == "copies":
            return list(range(self.n))
        return list(range(0, 2 * self.n, 2))
