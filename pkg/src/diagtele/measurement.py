"""Computational-basis measurement: exact branch tables and seeded sampling."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from diagtele.qstate import (
    DensityMatrix,
    DiagonalState,
    State,
    _frozen,
    bits_of,
    maximally_mixed,
)

ZERO_PROBABILITY = 1e-15


class MeasurementError(ValueError):
    pass


class WireOutOfRange(MeasurementError):
    pass


class DuplicateWire(MeasurementError):
    pass


def _check(wires: Sequence[int], n: int) -> list[int]:
    wires = [int(w) for w in wires]
    if not wires:
        raise MeasurementError("no wires to measure")
    for w in wires:
        if not 0 <= w < n:
            raise WireOutOfRange(f"wire {w} outside register of {n} wires")
    if len(set(wires)) != len(wires):
        raise DuplicateWire(f"wire list {wires} repeats a wire")
    return wires


def _diagonal_of(state: State) -> np.ndarray:
    if isinstance(state, DiagonalState):
        return state.probs
    return np.real(np.diag(state.entries))


def _split(state: State, measured: list[int], rest: list[int]) -> np.ndarray:
    """Diagonal as a ``(2**len(measured), 2**len(rest))`` weight table."""
    n = state.n_wires
    t = _diagonal_of(state).reshape((2,) * n).transpose(measured + rest)
    return t.reshape(1 << len(measured), 1 << len(rest))


def branch_probabilities(state: State, wires: Sequence[int]) -> np.ndarray:
    """Outcome distribution; bit ``j`` of outcome ``k`` (big-endian) is ``wires[j]``."""
    wires = _check(wires, state.n_wires)
    rest = [w for w in range(state.n_wires) if w not in wires]
    probs = _split(state, wires, rest).sum(axis=1)
    return np.clip(probs, 0.0, None)


@dataclass(frozen=True, eq=False)
class BranchRecord:
    """One outcome of Alice's measurement and Bob's conditional state.

    ``weights`` is Bob's unnormalized conditional diagonal (it sums to
    ``probability``). Zero-probability branches have ``zero`` set and a
    uniform conditional state. ``bob_matrix_raw`` is Bob's uncorrected dense
    conditional state and is only filled by the dense engine.
    """

    x_bits: tuple[int, ...]
    alpha_bits: tuple[int, ...]
    probability: float
    weights: np.ndarray = field(repr=False)
    bob_state_raw: DiagonalState
    bob_state_corrected: DiagonalState
    zero: bool = False
    bob_matrix_raw: DensityMatrix | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.x_bits, self.alpha_bits


def _flip_axes(probs: np.ndarray, x_bits: Sequence[int]) -> np.ndarray:
    n = len(x_bits)
    t = probs.reshape((2,) * n)
    axes = tuple(i for i, x in enumerate(x_bits) if x)
    if axes:
        t = np.flip(t, axis=axes)
    return np.ascontiguousarray(t).reshape(-1)


def _conditional(weights: np.ndarray, prob: float, n: int) -> tuple[DiagonalState, bool]:
    if prob < ZERO_PROBABILITY:
        return maximally_mixed(n), True
    cond = np.clip(weights, 0.0, None)
    return DiagonalState(n, _frozen(cond / cond.sum())), False


def _dense_blocks(rho: DensityMatrix, measured: list[int],
                  bob: list[int]) -> np.ndarray:
    """Blocks ``rho[k, :, k, :]`` indexed by outcome ``k``."""
    n = rho.n_wires
    dm, db = 1 << len(measured), 1 << len(bob)
    t = rho.entries.reshape((2,) * (2 * n))
    order = measured + bob + [w + n for w in measured] + [w + n for w in bob]
    t = t.transpose(order).reshape(dm, db, dm, db)
    k = np.arange(dm)
    return t[k, :, k, :]


def _check_partition(n: int, measured: list[int], bob: list[int]) -> None:
    if set(measured) & set(bob):
        raise DuplicateWire("measured and Bob wires overlap")
    if len(measured) + len(bob) != n:
        raise MeasurementError("measured and Bob wires must cover the register")


def _validate_branch_args(state, measured_wires, bob_wires, x_wire_positions):
    n = state.n_wires
    measured = _check(measured_wires, n)
    bob = _check(bob_wires, n)
    _check_partition(n, measured, bob)
    x_pos = [int(p) for p in x_wire_positions]
    if len(x_pos) != len(bob) or len(set(x_pos)) != len(x_pos):
        raise MeasurementError("need one distinct x position per Bob wire")
    if any(not 0 <= p < len(measured) for p in x_pos):
        raise WireOutOfRange("x position outside the measured wire list")
    a_pos = [p for p in range(len(measured)) if p not in x_pos]
    return measured, bob, x_pos, a_pos


def _record(k, table, blocks, n_measured, n_bob, x_pos, a_pos) -> BranchRecord:
    bits = bits_of(k, n_measured)
    x_bits = tuple(bits[p] for p in x_pos)
    alpha_bits = tuple(bits[p] for p in a_pos)
    weights = _frozen(np.array(table[k], dtype=np.float64))
    prob = float(max(weights.sum(), 0.0))
    raw, zero = _conditional(weights, prob, n_bob)
    corrected = DiagonalState(n_bob, _frozen(_flip_axes(raw.probs, x_bits)))
    bob_matrix = None
    if blocks is not None and not zero:
        m = blocks[k] / prob
        bob_matrix = DensityMatrix(n_bob, (m + m.conj().T) / 2)
    return BranchRecord(x_bits, alpha_bits, prob, weights, raw, corrected,
                        zero, bob_matrix)


def enumerate_branches(state: State, measured_wires: Sequence[int],
                       bob_wires: Sequence[int],
                       x_wire_positions: Sequence[int]) -> list[BranchRecord]:
    """Every outcome of measuring ``measured_wires``, in lexicographic order.

    ``x_wire_positions`` picks which measured bits are the ``x_i`` that
    decide Bob's ``sigma_{x_i}`` corrections; the remaining measured bits are
    the ``alpha_i``. ``bob_wires`` is ordered ``B_1..B_N``.
    """
    measured, bob, x_pos, a_pos = _validate_branch_args(
        state, measured_wires, bob_wires, x_wire_positions)
    table = _split(state, measured, bob)
    blocks = None
    if isinstance(state, DensityMatrix):
        blocks = _dense_blocks(state, measured, bob)
    return [_record(k, table, blocks, len(measured), len(bob), x_pos, a_pos)
            for k in range(table.shape[0])]


def branch_record(state: State, measured_wires: Sequence[int],
                  bob_wires: Sequence[int], x_wire_positions: Sequence[int],
                  outcome: int) -> BranchRecord:
    """The single record ``enumerate_branches(...)[outcome]``, built alone."""
    measured, bob, x_pos, a_pos = _validate_branch_args(
        state, measured_wires, bob_wires, x_wire_positions)
    if not 0 <= outcome < 1 << len(measured):
        raise MeasurementError(f"outcome {outcome} out of range")
    table = _split(state, measured, bob)
    blocks = None
    if isinstance(state, DensityMatrix):
        blocks = _dense_blocks(state, measured, bob)
    return _record(outcome, table, blocks, len(measured), len(bob), x_pos, a_pos)


def conditional_state(state: State, wires: Sequence[int], outcome: int) -> State:
    """Post-measurement state of the unmeasured wires (ascending order)."""
    n = state.n_wires
    wires = _check(wires, n)
    rest = [w for w in range(n) if w not in wires]
    if not rest:
        raise MeasurementError("no wires left after measurement")
    weights = _split(state, wires, rest)[outcome]
    prob = float(weights.sum())
    if isinstance(state, DiagonalState):
        return _conditional(np.array(weights), prob, len(rest))[0]
    if prob < ZERO_PROBABILITY:
        return DensityMatrix(len(rest), np.eye(1 << len(rest)) / (1 << len(rest)))
    block = _dense_blocks(state, wires, rest)[outcome] / prob
    return DensityMatrix(len(rest), (block + block.conj().T) / 2)


def sample_indices(probs: np.ndarray, rng: np.random.Generator,
                   size: int | None = None) -> np.ndarray | int:
    """Inverse-CDF sampling from ``probs`` with uniforms drawn from ``rng``."""
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, len(probs) - 1)
    return int(idx) if size is None else idx


def sample_outcome(state: State, wires: Sequence[int], rng: np.random.Generator
                   ) -> tuple[tuple[int, ...], float, State]:
    """Draw one measurement outcome.

    Returns the outcome bits (ordered as ``wires``), its probability, and the
    conditional state of the unmeasured wires. Randomness comes only from
    ``rng``; a fresh generator with the same seed gives the same result.
    """
    probs = branch_probabilities(state, wires)
    k = sample_indices(probs, rng)
    return (bits_of(k, len(wires)), float(probs[k]),
            conditional_state(state, wires, k))
