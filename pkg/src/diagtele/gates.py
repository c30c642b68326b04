"""Gates, wire permutations, and Alice's operator for both protocol schemes.

Two execution paths share the same gate descriptors:

* dense: :class:`Unitary` matrices applied as ``U rho U^dagger``;
* diagonal: probability-vector updates (:func:`apply_gate_diagonal`). These
  are exact here because every state in the protocol is diagonal right before
  each gate and the Hadamards are followed directly by a computational-basis
  measurement, so only the dephased action of ``H`` matters.
"""

from __future__ import annotations

import functools
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from diagtele.qstate import (
    EXACT_ATOL,
    DensityMatrix,
    DiagonalState,
    DimensionMismatch,
    _frozen,
)

MAX_DENSE_WIRES = 14

SIGMA = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)

SCHEMES = ("copies", "generalized")


class GateError(ValueError):
    pass


class WireOutOfRange(GateError):
    pass


class WireCollision(GateError):
    pass


class NotUnitary(GateError):
    pass


class UnsupportedGate(GateError):
    pass


class UnsupportedN(GateError):
    pass


def _check_wires(wires: Sequence[int], n: int) -> None:
    for w in wires:
        if not 0 <= w < n:
            raise WireOutOfRange(f"wire {w} outside register of {n} wires")
    if len(set(wires)) != len(wires):
        raise WireCollision(f"wires {tuple(wires)} are not distinct")


def _check_dense_size(n: int) -> None:
    if n > MAX_DENSE_WIRES:
        raise UnsupportedN(
            f"dense matrices limited to {MAX_DENSE_WIRES} wires, got {n}")


@dataclass(frozen=True, eq=False)
class Unitary:
    n_wires: int
    matrix: np.ndarray = field(repr=False)
    atol: float = field(default=EXACT_ATOL, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        dim = 1 << self.n_wires
        if m.shape != (dim, dim):
            raise DimensionMismatch(f"shape {m.shape} for {self.n_wires} wires")
        if not is_unitary(m, self.atol):
            raise NotUnitary("U U^dagger differs from identity")
        if m is self.matrix and m.flags.writeable:
            m = m.copy()
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dagger(self) -> "Unitary":
        return Unitary(self.n_wires, self.matrix.conj().T.copy())

    def __matmul__(self, other: "Unitary") -> "Unitary":
        if other.n_wires != self.n_wires:
            raise DimensionMismatch("unitaries act on different registers")
        return Unitary(self.n_wires, self.matrix @ other.matrix)


def is_unitary(m: np.ndarray, atol: float = EXACT_ATOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m @ m.conj().T, np.eye(m.shape[0]), rtol=0, atol=atol))


def identity(n: int) -> Unitary:
    return Unitary(n, np.eye(1 << n, dtype=np.complex128))


@dataclass(frozen=True)
class Gate:
    """One gate on an ``n_wires`` register.

    ``kind`` is ``"h"``, ``"pauli"``, ``"cnot"`` or ``"swap"``. For ``cnot``
    the wires are ``(control, target)``; ``pauli`` carries ``k`` in 0..3.
    """

    kind: str
    wires: tuple[int, ...]
    n_wires: int
    k: int = 0

    def __post_init__(self):
        arity = {"h": 1, "pauli": 1, "cnot": 2, "swap": 2}
        if self.kind not in arity:
            raise UnsupportedGate(f"unknown gate kind {self.kind!r}")
        if len(self.wires) != arity[self.kind]:
            raise GateError(f"{self.kind} takes {arity[self.kind]} wires")
        if self.kind == "pauli" and self.k not in (0, 1, 2, 3):
            raise UnsupportedGate(f"no Pauli sigma_{self.k}")
        _check_wires(self.wires, self.n_wires)

    @classmethod
    def hadamard(cls, wire: int, n: int) -> "Gate":
        return cls("h", (wire,), n)

    @classmethod
    def pauli(cls, k: int, wire: int, n: int) -> "Gate":
        return cls("pauli", (wire,), n, k)

    @classmethod
    def cnot(cls, control: int, target: int, n: int) -> "Gate":
        return cls("cnot", (control, target), n)

    @classmethod
    def swap(cls, i: int, j: int, n: int) -> "Gate":
        return cls("swap", (i, j), n)

    @property
    def is_permutation(self) -> bool:
        return self.kind in ("cnot", "swap") or (
            self.kind == "pauli" and self.k in (0, 1))

    def unitary(self) -> Unitary:
        if self.kind == "h":
            return embed_single(HADAMARD, self.wires[0], self.n_wires)
        if self.kind == "pauli":
            return embed_single(SIGMA[self.k], self.wires[0], self.n_wires)
        if self.kind == "cnot":
            return cnot(*self.wires, self.n_wires)
        return swap(*self.wires, self.n_wires)

    def __str__(self):
        if self.kind == "pauli":
            return f"sigma{self.k}({self.wires[0]})"
        return f"{self.kind}({', '.join(map(str, self.wires))})"


def embed_single(g: np.ndarray, wire: int, n: int) -> Unitary:
    """``I x ... x g x ... x I`` with ``g`` on ``wire``."""
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != (2, 2):
        raise DimensionMismatch("single-wire gate must be 2x2")
    if not is_unitary(g):
        raise NotUnitary("gate is not unitary")
    _check_wires([wire], n)
    _check_dense_size(n)
    left = np.eye(1 << wire)
    right = np.eye(1 << (n - wire - 1))
    return Unitary(n, np.kron(np.kron(left, g), right))


def _projector(bit: int) -> np.ndarray:
    p = np.zeros((2, 2), dtype=np.complex128)
    p[bit, bit] = 1
    return p


def _kron_on(ops: dict[int, np.ndarray], n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for w in range(n):
        out = np.kron(out, ops.get(w, SIGMA[0]))
    return out


def cnot(control: int, target: int, n: int) -> Unitary:
    """Controlled-NOT between arbitrary (possibly distant) wires.

    ``|0><0|_c x I_t + |1><1|_c x sigma1_t``, identity on every other wire.
    """
    _check_wires([control, target], n)
    _check_dense_size(n)
    m = _kron_on({control: _projector(0)}, n) + _kron_on(
        {control: _projector(1), target: SIGMA[1]}, n)
    return Unitary(n, m)


def swap(i: int, j: int, n: int) -> Unitary:
    _check_wires([i, j], n)
    _check_dense_size(n)
    return permutation_gate(_transposition(i, j, n)).unitary()


def _transposition(i: int, j: int, n: int) -> list[int]:
    wire_map = list(range(n))
    wire_map[i], wire_map[j] = j, i
    return wire_map


@dataclass(frozen=True, eq=False)
class PermutationGate:
    """A basis permutation: basis index ``b`` is sent to ``perm[b]``.

    ``wire_map`` is set when the permutation is a pure wire reordering
    (content of wire ``w`` moves to wire ``wire_map[w]``); such gates can be
    applied to large registers by axis transposition.
    """

    n_wires: int
    perm: np.ndarray = field(repr=False)
    wire_map: tuple[int, ...] | None = None

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if perm.shape != (1 << self.n_wires,):
            raise DimensionMismatch(f"permutation of length {perm.shape}")
        if not np.array_equal(np.sort(perm), np.arange(perm.shape[0])):
            raise GateError("not a bijection on basis indices")
        object.__setattr__(self, "perm", _frozen(perm.copy()))

    def inverse(self) -> "PermutationGate":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.shape[0])
        wm = None
        if self.wire_map is not None:
            wm = [0] * self.n_wires
            for src, dst in enumerate(self.wire_map):
                wm[dst] = src
            wm = tuple(wm)
        return PermutationGate(self.n_wires, inv, wm)

    def compose(self, first: "PermutationGate") -> "PermutationGate":
        """The permutation ``self . first`` (apply ``first``, then ``self``)."""
        if first.n_wires != self.n_wires:
            raise DimensionMismatch("permutations act on different registers")
        wm = None
        if self.wire_map is not None and first.wire_map is not None:
            wm = tuple(self.wire_map[first.wire_map[w]] for w in range(self.n_wires))
        return PermutationGate(self.n_wires, self.perm[first.perm], wm)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.perm, np.arange(self.perm.shape[0])))

    def unitary(self) -> Unitary:
        _check_dense_size(self.n_wires)
        dim = 1 << self.n_wires
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[self.perm, np.arange(dim)] = 1
        return Unitary(self.n_wires, m)


def permutation_gate(wire_map: Sequence[int]) -> PermutationGate:
    """Wire reordering: the bit on wire ``w`` moves to wire ``wire_map[w]``."""
    n = len(wire_map)
    if sorted(wire_map) != list(range(n)):
        raise GateError(f"{list(wire_map)} is not a wire permutation")
    idx = np.arange(1 << n, dtype=np.int64)
    perm = np.zeros_like(idx)
    for src, dst in enumerate(wire_map):
        perm |= ((idx >> (n - 1 - src)) & 1) << (n - 1 - dst)
    return PermutationGate(n, perm, tuple(int(w) for w in wire_map))


def gate_permutation(g: Gate) -> PermutationGate:
    """Basis permutation of a CNOT, swap, or sigma_0/sigma_1 gate."""
    if not g.is_permutation:
        raise UnsupportedGate(f"{g} is not a permutation gate")
    n = g.n_wires
    if g.kind == "swap":
        return permutation_gate(_transposition(*g.wires, n))
    idx = np.arange(1 << n, dtype=np.int64)
    if g.kind == "pauli":
        if g.k == 0:
            return PermutationGate(n, idx)
        return PermutationGate(n, idx ^ (1 << (n - 1 - g.wires[0])))
    control, target = g.wires
    flip = ((idx >> (n - 1 - control)) & 1) << (n - 1 - target)
    return PermutationGate(n, idx ^ flip)


def _interleaved_to_block_map(n: int) -> list[int]:
    # A_i at 2i -> i, B_i at 2i+1 -> n+i
    wire_map = [0] * (2 * n)
    for i in range(n):
        wire_map[2 * i] = i
        wire_map[2 * i + 1] = n + i
    return wire_map


def interleave_network(n: int, direction: str) -> PermutationGate:
    """Reorder ``n`` wire pairs between interleaved and block order.

    ``"interleaved_to_block"`` sends ``(A_1, B_1, ..., A_n, B_n)`` to
    ``(A_1..A_n, B_1..B_n)``; ``"block_to_interleaved"`` is its inverse. The
    two coincide only for ``n <= 2``.
    """
    if n < 1:
        raise UnsupportedN("need at least one pair")
    gate = permutation_gate(_interleaved_to_block_map(n))
    if direction == "interleaved_to_block":
        return gate
    if direction == "block_to_interleaved":
        return gate.inverse()
    raise ValueError(f"unknown direction {direction!r}")


def interleave_swaps(n: int, direction: str, offset: int = 0,
                     n_wires: int | None = None) -> list[Gate]:
    """Neighbour-swap circuit realizing :func:`interleave_network`.

    The network acts on wires ``offset..offset+2n-1`` of an ``n_wires``
    register. For ``n=2`` this is the single swap of the two middle wires.
    """
    if n_wires is None:
        n_wires = offset + 2 * n
    wire_map = interleave_network(n, direction).wire_map
    # Bubble sort the labels into their destination slots; each exchange is a
    # neighbour swap.
    dest = [0] * (2 * n)
    for src, dst in enumerate(wire_map):
        dest[src] = dst
    slots = list(dest)
    gates = []
    for end in range(2 * n - 1, 0, -1):
        for pos in range(end):
            if slots[pos] > slots[pos + 1]:
                slots[pos], slots[pos + 1] = slots[pos + 1], slots[pos]
                gates.append(Gate.swap(offset + pos, offset + pos + 1, n_wires))
    return gates


def circuit_unitary(gates: Sequence[Gate], n: int) -> Unitary:
    """Dense product of a gate list, first gate applied first."""
    _check_dense_size(n)
    m = np.eye(1 << n, dtype=np.complex128)
    for g in gates:
        if g.n_wires != n:
            raise DimensionMismatch(f"{g} is not on a {n}-wire register")
        m = g.unitary().matrix @ m
    return Unitary(n, m)


def alice_circuit(n: int, scheme: str) -> list[Gate]:
    """Alice's operator as an ordered gate list on the full ``3n``-wire register.

    generalized scheme only: swaps interleaving her X and A blocks into
    ``X_1 A_1 X_2 A_2 ...``. Then, for both schemes, ``CNOT(control A_i,
    target X_i)`` for every i followed by ``H`` on every ``A_i``.
    """
    from diagtele.qstate import RegisterLayout

    if n < 1:
        raise UnsupportedN("need at least one qubit")
    layout = RegisterLayout.for_scheme(scheme, n)
    total = layout.n_wires
    gates: list[Gate] = []
    if scheme == "copies":
        xs, as_ = layout.x_wires, layout.a_wires
    else:
        gates += interleave_swaps(n, "block_to_interleaved", 0, total)
        xs = list(range(0, 2 * n, 2))
        as_ = list(range(1, 2 * n, 2))
    gates += [Gate.cnot(a, x, total) for x, a in zip(xs, as_)]
    gates += [Gate.hadamard(a, total) for a in as_]
    return gates


@functools.lru_cache(maxsize=16)
def alice_operator(n: int, scheme: str) -> Unitary:
    """Dense matrix of Alice's operator.

    Built from direct (non-adjacent) CNOTs and Hadamards on the layout wires;
    in the generalized scheme the X/A reordering is applied as a single wire
    permutation rather than a swap sequence. Must agree with
    ``circuit_unitary(alice_circuit(n, scheme))``.
    """
    from diagtele.qstate import RegisterLayout

    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if n < 1:
        raise UnsupportedN("need at least one qubit")
    total = 3 * n
    _check_dense_size(total)
    layout = RegisterLayout.for_scheme(scheme, n)
    m = np.eye(1 << total, dtype=np.complex128)
    for x, a in zip(layout.x_wires, layout.a_wires):
        m = cnot(a, x, total).matrix @ m
    for a in layout.a_wires:
        m = embed_single(HADAMARD, a, total).matrix @ m
    if scheme == "generalized":
        wire_map = list(interleave_network(n, "block_to_interleaved").wire_map)
        wire_map += list(range(2 * n, 3 * n))
        m = permutation_gate(wire_map).unitary().matrix @ m
    return Unitary(total, m)


def apply_unitary(rho: DensityMatrix, u: Unitary) -> DensityMatrix:
    if rho.n_wires != u.n_wires:
        raise DimensionMismatch(
            f"{u.n_wires}-wire unitary on {rho.n_wires}-wire state")
    m = u.matrix @ rho.entries @ u.matrix.conj().T
    # Restore exact Hermiticity lost to rounding.
    m = (m + m.conj().T) / 2
    return DensityMatrix(rho.n_wires, m)


def apply_permutation_diagonal(d: DiagonalState, g: PermutationGate) -> DiagonalState:
    if d.n_wires != g.n_wires:
        raise DimensionMismatch(
            f"{g.n_wires}-wire permutation on {d.n_wires}-wire state")
    if g.wire_map is not None:
        # Output axis wire_map[w] takes input axis w.
        axes = [0] * d.n_wires
        for src, dst in enumerate(g.wire_map):
            axes[dst] = src
        out = np.ascontiguousarray(d.as_tensor().transpose(axes)).reshape(-1)
    else:
        out = np.empty_like(d.probs)
        out[g.perm] = d.probs
    return DiagonalState(d.n_wires, _frozen(out))


def apply_gate_diagonal(d: DiagonalState, g: Gate) -> DiagonalState:
    """Apply a gate to a diagonal state without leaving probability space.

    Permutation gates (sigma_0, sigma_1, CNOT, swap) permute the vector.
    Hadamard on wire ``w`` is applied in its dephased form: both entries that
    differ only in bit ``w`` are replaced by their average.
    """
    if g.n_wires != d.n_wires:
        raise DimensionMismatch(f"{g} on {d.n_wires}-wire state")
    t = d.as_tensor()
    if g.kind == "h":
        w = g.wires[0]
        out = np.broadcast_to(t.mean(axis=w, keepdims=True), t.shape)
    elif g.kind == "pauli":
        if g.k == 0:
            return d
        if g.k != 1:
            raise UnsupportedGate(f"sigma_{g.k} has no diagonal fast path")
        out = np.flip(t, axis=g.wires[0])
    elif g.kind == "swap":
        out = np.swapaxes(t, *g.wires)
    else:
        control, target = g.wires
        out = t.copy()
        sel = [slice(None)] * d.n_wires
        sel[control] = 1
        sel = tuple(sel)
        # Dropping the control axis shifts later axes down by one.
        out[sel] = np.flip(t[sel], axis=target - (target > control))
    return DiagonalState(d.n_wires, _frozen(np.ascontiguousarray(out).reshape(-1)))


def apply_gate_dense(rho: DensityMatrix, g: Gate) -> DensityMatrix:
    return apply_unitary(rho, g.unitary())


def run_circuit_diagonal(d: DiagonalState, gates: Sequence[Gate]) -> DiagonalState:
    for g in gates:
        d = apply_gate_diagonal(d, g)
    return d


def is_identity_on(u: Unitary, wires: Sequence[int], atol: float = EXACT_ATOL) -> bool:
    """True when ``u`` factorizes as identity on ``wires`` times something else."""
    n = u.n_wires
    wires = list(wires)
    _check_wires(wires, n)
    rest = [w for w in range(n) if w not in wires]
    dw, dr = 1 << len(wires), 1 << len(rest)
    t = u.matrix.reshape((2,) * (2 * n))
    order = wires + rest + [w + n for w in wires] + [w + n for w in rest]
    t = t.transpose(order).reshape(dw, dr, dw, dr)
    expected = np.einsum("ab,cd->acbd", np.eye(dw), t[0, :, 0, :])
    return bool(np.allclose(t, expected, rtol=0, atol=atol))
