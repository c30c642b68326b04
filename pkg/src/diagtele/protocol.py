"""Two-party teleportation of diagonal states over classically correlated pairs.

Alice holds the input wires ``X_i`` and her halves ``A_i`` of the shared
resource; Bob holds ``B_i``. Alice applies her operator, measures all of her
wires, and sends the N bits ``x_1..x_N`` over a one-shot classical channel.
Bob applies ``sigma_1`` to every ``B_i`` whose bit is set. The measured
``alpha_i`` bits stay with Alice.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from diagtele import gates as g
from diagtele.measurement import (
    BranchRecord,
    branch_probabilities,
    branch_record,
    enumerate_branches,
    sample_indices,
)
from diagtele.qstate import (
    EXACT_ATOL,
    DensityMatrix,
    DiagonalState,
    RegisterLayout,
    State,
    classical_pair,
    density_from_diagonal,
    fidelity,
    generalized_classical_state,
    tensor,
    tensor_all,
)

ENGINES = ("dense", "diagonal")


class ProtocolError(ValueError):
    pass


class TooManyWiresForDense(ProtocolError):
    pass


class ChannelError(RuntimeError):
    pass


def rng_for(seed: int, trial: int | None = None) -> np.random.Generator:
    """PCG64 generator for ``seed``; trial ``k`` uses spawn key ``(k,)``.

    Trial streams are independent of each other and of the master stream,
    so any single trial can be rerun in isolation from ``(seed, k)``.
    """
    key = () if trial is None else (int(trial),)
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True)
class ClassicalMessage:
    """The N bits ``x_1..x_N``: everything that crosses from Alice to Bob."""

    x_bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.x_bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise ProtocolError(f"bad message bits {self.x_bits!r}")
        object.__setattr__(self, "x_bits", bits)

    @property
    def n_bits(self) -> int:
        return len(self.x_bits)

    def serialize(self) -> str:
        return "".join(map(str, self.x_bits))

    @classmethod
    def deserialize(cls, payload: str) -> "ClassicalMessage":
        return cls(tuple(int(c) for c in payload))


class ClassicalChannel:
    """Synchronous, single-round, lossless channel from Alice to Bob.

    Accepts exactly one message and delivers it exactly once, as its
    serialized bit string.
    """

    def __init__(self):
        self._payload: str | None = None
        self._delivered = False

    def send(self, message: ClassicalMessage) -> None:
        if self._payload is not None:
            raise ChannelError("channel already carries a message")
        self._payload = message.serialize()

    def receive(self) -> ClassicalMessage:
        if self._payload is None:
            raise ChannelError("nothing was sent")
        if self._delivered:
            raise ChannelError("message already consumed")
        self._delivered = True
        return ClassicalMessage.deserialize(self._payload)

    @property
    def transcript(self) -> str | None:
        return self._payload


@dataclass(frozen=True)
class PauliString:
    """Bob's correction: ``sigma_{k_i}`` on ``B_i`` with every ``k_i`` in {0, 1}."""

    ks: tuple[int, ...]

    def __post_init__(self):
        if any(k not in (0, 1) for k in self.ks):
            raise ProtocolError("corrections use only sigma_0 and sigma_1")

    def __str__(self):
        return " x ".join(f"sigma{k}" for k in self.ks)

    def matrix(self) -> np.ndarray:
        m = np.ones((1, 1), dtype=np.complex128)
        for k in self.ks:
            m = np.kron(m, g.SIGMA[k])
        return m

    def gates(self, wires: Sequence[int], n_wires: int) -> list[g.Gate]:
        return [g.Gate.pauli(k, w, n_wires) for k, w in zip(self.ks, wires)]

    def apply(self, state: State) -> State:
        if state.n_wires != len(self.ks):
            raise ProtocolError("correction length differs from Bob's register")
        if isinstance(state, DiagonalState):
            return g.run_circuit_diagonal(state, self.gates(range(state.n_wires), state.n_wires))
        p = self.matrix()
        m = p @ state.entries @ p
        return DensityMatrix(state.n_wires, (m + m.conj().T) / 2)

    def on_register(self, layout: RegisterLayout) -> g.Unitary:
        """The correction as an operator on the full joint register."""
        return g.circuit_unitary(self.gates(layout.b_wires, layout.n_wires),
                                 layout.n_wires)


def correction_for(message: ClassicalMessage) -> PauliString:
    return PauliString(message.x_bits)


@dataclass(frozen=True, eq=False)
class TeleportationResult:
    scheme: str
    engine: str
    input: State
    outcome: BranchRecord
    message: ClassicalMessage
    correction: PauliString
    bob_final: State
    fidelity_to_input: float
    seed: int | None = None
    transcript: str = ""


def _check_scheme_engine(scheme: str, engine: str) -> None:
    if scheme not in g.SCHEMES:
        raise ProtocolError(f"unknown scheme {scheme!r}")
    if engine not in ENGINES:
        raise ProtocolError(f"unknown engine {engine!r}")


def _check_dense(n: int, engine: str) -> None:
    if engine == "dense" and 3 * n > g.MAX_DENSE_WIRES:
        raise TooManyWiresForDense(
            f"{3 * n} wires exceed the dense limit of {g.MAX_DENSE_WIRES}; "
            "use the diagonal engine")


def shared_resource(n: int, scheme: str) -> DiagonalState:
    """``n`` classical pairs, interleaved (copies) or blocked (generalized)."""
    if scheme == "copies":
        return tensor_all([classical_pair()] * n)
    if scheme == "generalized":
        return generalized_classical_state(n)
    raise ProtocolError(f"unknown scheme {scheme!r}")


def initial_joint_state(input: DiagonalState, scheme: str = "copies"
                        ) -> tuple[DiagonalState, RegisterLayout]:
    n = input.n_wires
    layout = RegisterLayout.for_scheme(scheme, n)
    return tensor(input, shared_resource(n, scheme)), layout


def alice_transform(joint: State, layout: RegisterLayout, engine: str) -> State:
    """Step one: Alice's operator on the joint state, for either engine."""
    if engine == "dense":
        if isinstance(joint, DiagonalState):
            joint = density_from_diagonal(joint)
        return g.apply_unitary(joint, g.alice_operator(layout.n, layout.scheme))
    if not isinstance(joint, DiagonalState):
        raise ProtocolError("the diagonal engine needs a diagonal joint state")
    return g.run_circuit_diagonal(joint, g.alice_circuit(layout.n, layout.scheme))


def post_alice_state(input: DiagonalState, scheme: str = "copies",
                     engine: str = "diagonal") -> tuple[State, RegisterLayout]:
    _check_scheme_engine(scheme, engine)
    _check_dense(input.n_wires, engine)
    joint, layout = initial_joint_state(input, scheme)
    return alice_transform(joint, layout, engine), layout


def _teleport(state: State, layout: RegisterLayout, rng: np.random.Generator
              ) -> tuple[BranchRecord, ClassicalMessage, PauliString, State, str]:
    """Step two and Bob's side, starting from the post-operator state."""
    wires = layout.outcome_wires()
    k = sample_indices(branch_probabilities(state, wires), rng)
    record = branch_record(state, wires, layout.b_wires, layout.x_positions(), k)
    channel = ClassicalChannel()
    channel.send(ClassicalMessage(record.x_bits))

    # Bob sees only the channel and his own wires.
    message = channel.receive()
    correction = correction_for(message)
    bob_raw = record.bob_matrix_raw
    if bob_raw is None:
        bob_raw = record.bob_state_raw
    return record, message, correction, correction.apply(bob_raw), channel.transcript


def run_once(input: DiagonalState, scheme: str = "copies", engine: str = "diagonal",
             seed: int | np.random.Generator = 0) -> TeleportationResult:
    """One full protocol run with a sampled measurement outcome."""
    state, layout = post_alice_state(input, scheme, engine)
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    record, message, correction, bob, transcript = _teleport(state, layout, rng)
    if isinstance(bob, DensityMatrix):
        # The dense engine leaves Bob diagonal up to rounding; report it in
        # the same form as the diagonal engine.
        bob = record.bob_state_corrected
    return TeleportationResult(
        scheme, engine, input, record, message, correction, bob,
        fidelity(bob, input),
        seed if isinstance(seed, int) else None, transcript)


def branch_table(input: DiagonalState, scheme: str = "copies",
                 engine: str = "diagonal") -> list[BranchRecord]:
    state, layout = post_alice_state(input, scheme, engine)
    return enumerate_branches(state, layout.outcome_wires(), layout.b_wires,
                              layout.x_positions())


def table_residual(a: Sequence[BranchRecord], b: Sequence[BranchRecord]) -> float:
    """Largest entrywise difference between two branch tables, matched by bits.

    Returns ``inf`` if the tables do not cover the same outcomes.
    """
    by_key = {r.key: r for r in b}
    if len(by_key) != len(a) or any(r.key not in by_key for r in a):
        return float("inf")
    worst = 0.0
    for r in a:
        s = by_key[r.key]
        worst = max(
            worst,
            abs(r.probability - s.probability),
            float(np.max(np.abs(r.bob_state_raw.probs - s.bob_state_raw.probs))),
            float(np.max(np.abs(r.bob_state_corrected.probs
                                - s.bob_state_corrected.probs))),
        )
    return worst


@dataclass
class BranchCheck:
    record: BranchRecord
    correction: PauliString
    probability_residual: float
    faithfulness_residual: float
    fidelity: float

    def to_dict(self) -> dict:
        r = self.record
        return {
            "x_bits": "".join(map(str, r.x_bits)),
            "alpha_bits": "".join(map(str, r.alpha_bits)),
            "probability": r.probability,
            "probability_residual": self.probability_residual,
            "correction": list(self.correction.ks),
            "bob_raw": r.bob_state_raw.probs.tolist(),
            "bob_corrected": r.bob_state_corrected.probs.tolist(),
            "faithfulness_residual": self.faithfulness_residual,
            "fidelity": self.fidelity,
            "zero": r.zero,
        }


@dataclass
class VerificationReport:
    """Exhaustive audit of every measurement branch of one protocol setup."""

    scheme: str
    engine: str
    n: int
    branches: list[BranchCheck] = field(repr=False)
    uniformity_max_dev: float
    faithfulness_max_residual: float
    min_fidelity: float
    scheme_equivalence_residual: float | None = None
    tolerance: float = EXACT_ATOL

    @property
    def uniform(self) -> bool:
        return self.uniformity_max_dev <= self.tolerance

    @property
    def faithful(self) -> bool:
        return (self.faithfulness_max_residual <= self.tolerance
                and self.min_fidelity >= 1 - 1e-10)

    @property
    def schemes_agree(self) -> bool | None:
        if self.scheme_equivalence_residual is None:
            return None
        return self.scheme_equivalence_residual <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.uniform and self.faithful and self.schemes_agree is not False

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "engine": self.engine,
            "n_qubits": self.n,
            "branches": [b.to_dict() for b in self.branches],
            "summary": {
                "n_branches": len(self.branches),
                "uniformity_max_dev": self.uniformity_max_dev,
                "faithfulness_max_residual": self.faithfulness_max_residual,
                "min_fidelity": self.min_fidelity,
                "scheme_equivalence_residual": self.scheme_equivalence_residual,
                "passed": self.passed,
            },
        }


def verify_all_branches(input: DiagonalState, scheme: str = "copies",
                        engine: str = "diagonal",
                        compare_schemes: bool = False) -> VerificationReport:
    """Check every branch for the 1/4**N law and exact recovery of ``input``.

    With ``compare_schemes`` the other scheme is run too and the largest
    difference between the two branch tables is recorded.
    """
    n = input.n_wires
    records = branch_table(input, scheme, engine)
    expected = 1.0 / 4 ** n
    checks = []
    for r in records:
        correction = correction_for(ClassicalMessage(r.x_bits))
        bob = correction.apply(r.bob_state_raw)
        checks.append(BranchCheck(
            r, correction,
            abs(r.probability - expected),
            float(np.max(np.abs(bob.probs - input.probs))),
            fidelity(bob, input)))
    residual = None
    if compare_schemes:
        other = "generalized" if scheme == "copies" else "copies"
        residual = table_residual(records, branch_table(input, other, engine))
    return VerificationReport(
        scheme, engine, n, checks,
        max(c.probability_residual for c in checks),
        max(c.faithfulness_residual for c in checks),
        min(c.fidelity for c in checks),
        residual)


@dataclass(frozen=True, eq=False)
class SampleSummary:
    """Histogram of many sampled outcomes, indexed like ``branch_table``."""

    scheme: str
    engine: str
    n_samples: int
    counts: np.ndarray = field(repr=False)
    labels: list[str] = field(repr=False)
    max_residual: float


def sample_protocol(input: DiagonalState, n_samples: int, scheme: str = "copies",
                    engine: str = "diagonal", seed: int = 0) -> SampleSummary:
    """Draw ``n_samples`` outcomes of Alice's measurement from one stream.

    ``max_residual`` is the largest deviation of Bob's corrected state from
    the input over all outcomes that were actually drawn.
    """
    state, layout = post_alice_state(input, scheme, engine)
    wires = layout.outcome_wires()
    probs = branch_probabilities(state, wires)
    draws = sample_indices(probs, rng_for(seed), size=n_samples)
    counts = np.bincount(draws, minlength=probs.shape[0]).astype(np.int64)
    records = enumerate_branches(state, wires, layout.b_wires, layout.x_positions())
    worst = 0.0
    for k in np.flatnonzero(counts):
        bob = correction_for(ClassicalMessage(records[k].x_bits)).apply(
            records[k].bob_state_raw)
        worst = max(worst, float(np.max(np.abs(bob.probs - input.probs))))
    labels = [format(k, f"0{len(wires)}b") for k in range(probs.shape[0])]
    return SampleSummary(scheme, engine, n_samples, counts, labels, worst)


def _embed_on_x(v: g.Unitary, layout: RegisterLayout) -> g.Unitary:
    # X wires are 0..N-1 in both layouts.
    rest = layout.n_wires - layout.n
    return g.Unitary(layout.n_wires, np.kron(v.matrix, np.eye(1 << rest)), atol=1e-10)


def teleport_with_eigenbasis(v: g.Unitary | np.ndarray, eigenvalues: DiagonalState,
                             scheme: str = "copies", seed: int = 0,
                             engine: str = "dense") -> TeleportationResult:
    """Teleport ``rho = V diag(eigenvalues) V^dagger`` with known ``V``.

    Alice first applies ``V^dagger`` to her input wires, which makes the
    input diagonal; the diagonal protocol follows; Bob finishes with ``V``.
    The dense engine simulates the whole joint state. The diagonal engine
    uses that ``V^dagger rho V`` is exactly ``diag(eigenvalues)``.
    """
    if not isinstance(v, g.Unitary):
        m = np.asarray(v, dtype=np.complex128)
        v = g.Unitary(max(m.shape[0].bit_length() - 1, 1), m, atol=1e-10)
    n = eigenvalues.n_wires
    if v.n_wires != n:
        raise ProtocolError(f"{v.n_wires}-wire V for a {n}-wire state")
    _check_scheme_engine(scheme, engine)
    _check_dense(n, engine)
    vm = v.matrix
    rho_m = vm @ np.diag(eigenvalues.probs) @ vm.conj().T
    rho = DensityMatrix(n, (rho_m + rho_m.conj().T) / 2)

    if engine == "diagonal":
        base = run_once(eigenvalues, scheme, "diagonal", seed)
        m = vm @ np.diag(base.bob_final.probs) @ vm.conj().T
        bob = DensityMatrix(n, (m + m.conj().T) / 2)
        return TeleportationResult(
            scheme, engine, rho, base.outcome, base.message, base.correction,
            bob, fidelity(bob, rho), seed, base.transcript)

    layout = RegisterLayout.for_scheme(scheme, n)
    joint = tensor(rho, density_from_diagonal(shared_resource(n, scheme)))
    joint = g.apply_unitary(joint, _embed_on_x(v.dagger, layout))
    state = alice_transform(joint, layout, "dense")
    record, message, correction, bob_corrected, transcript = _teleport(
        state, layout, rng_for(seed))
    m = vm @ bob_corrected.entries @ vm.conj().T
    bob = DensityMatrix(n, (m + m.conj().T) / 2)
    return TeleportationResult(
        scheme, engine, rho, record, message, correction, bob,
        fidelity(bob, rho), seed, transcript)


def dephasing_demo(rho: DensityMatrix, scheme: str = "copies"
                   ) -> tuple[DensityMatrix, float]:
    """Run the diagonal protocol on a state with coherences, skipping ``V``.

    Bob's state is averaged exactly over all branches. Coherences in the
    computational basis do not survive Alice's measurement, so the result is
    the dephased input and the fidelity drops below 1.
    """
    n = rho.n_wires
    _check_dense(n, "dense")
    layout = RegisterLayout.for_scheme(scheme, n)
    joint = tensor(rho, density_from_diagonal(shared_resource(n, scheme)))
    state = alice_transform(joint, layout, "dense")
    records = enumerate_branches(state, layout.outcome_wires(), layout.b_wires,
                                 layout.x_positions())
    avg = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    for r in records:
        if r.zero:
            continue
        bob = correction_for(ClassicalMessage(r.x_bits)).apply(r.bob_matrix_raw)
        avg += r.probability * bob.entries
    avg /= np.trace(avg).real
    bob = DensityMatrix(n, (avg + avg.conj().T) / 2)
    return bob, fidelity(bob, rho)
