"""JSON state files and run reports.

State file, probability form::

    {"n_qubits": 1, "probabilities": [0.3, 0.7], "label": "optional"}

Eigenbasis form: ``eigenvectors`` is the matrix ``V`` (row-major, each entry
an ``[re, im]`` pair) whose columns are the eigenvectors, so the state is
``V diag(eigenvalues) V^dagger``::

    {"n_qubits": 1, "eigenvalues": [0.2, 0.8],
     "eigenvectors": [[[0.7071067811865476, 0], [0.7071067811865476, 0]],
                      [[0.7071067811865476, 0], [-0.7071067811865476, 0]]]}
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from diagtele import qstate
from diagtele.gates import Unitary, is_unitary

UNITARY_ATOL = 1e-10


class StateFileError(ValueError):
    """Rejected state file; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class MalformedJson(StateFileError):
    pass


class BadDimension(StateFileError):
    pass


class NotNormalized(StateFileError):
    pass


class NotUnitary(StateFileError):
    pass


@dataclass(frozen=True, eq=False)
class InputSpec:
    n_qubits: int
    probabilities: qstate.DiagonalState | None = None
    eigenvalues: qstate.DiagonalState | None = None
    eigenvectors: Unitary | None = None
    label: str | None = None

    @property
    def has_eigenbasis(self) -> bool:
        return self.eigenvectors is not None

    @property
    def diagonal(self) -> qstate.DiagonalState:
        """The state the diagonal protocol actually moves."""
        return self.eigenvalues if self.has_eigenbasis else self.probabilities


def _real_vector(doc: dict, key: str, n: int) -> qstate.DiagonalState:
    raw = doc[key]
    if not isinstance(raw, list):
        raise MalformedJson(f"$.{key}", "expected a list of numbers")
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedJson(f"$.{key}[{i}]", f"expected a number, got {v!r}")
    if len(raw) != 1 << n:
        raise BadDimension(f"$.{key}", f"{n} qubits need {1 << n} entries, got {len(raw)}")
    try:
        return qstate.make_diagonal(raw)
    except qstate.NegativeProbability as exc:
        raise NotNormalized(f"$.{key}", str(exc)) from None
    except qstate.NotNormalized as exc:
        raise NotNormalized(f"$.{key}", str(exc)) from None


def _complex_matrix(doc: dict, key: str, n: int) -> np.ndarray:
    raw = doc[key]
    dim = 1 << n
    if not isinstance(raw, list):
        raise MalformedJson(f"$.{key}", "expected a list of rows")
    if len(raw) != dim:
        raise BadDimension(f"$.{key}", f"expected {dim} rows, got {len(raw)}")
    m = np.zeros((dim, dim), dtype=np.complex128)
    for i, row in enumerate(raw):
        if not isinstance(row, list):
            raise MalformedJson(f"$.{key}[{i}]", "expected a row")
        if len(row) != dim:
            raise BadDimension(f"$.{key}[{i}]", f"expected {dim} entries, got {len(row)}")
        for j, z in enumerate(row):
            path = f"$.{key}[{i}][{j}]"
            if (not isinstance(z, list) or len(z) != 2
                    or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in z)):
                raise MalformedJson(path, "expected an [re, im] pair")
            m[i, j] = complex(z[0], z[1])
    return m


def parse_state_file(data: bytes | str) -> InputSpec:
    """Parse and fully validate a state file; raises :class:`StateFileError`."""
    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson("$", str(exc)) from None
    if not isinstance(doc, dict):
        raise MalformedJson("$", "expected a JSON object")

    n = doc.get("n_qubits")
    if isinstance(n, bool) or not isinstance(n, int):
        raise MalformedJson("$.n_qubits", "expected an integer")
    if n < 1:
        raise BadDimension("$.n_qubits", "need at least one qubit")
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise MalformedJson("$.label", "expected a string")

    has_probs = "probabilities" in doc
    has_eig = "eigenvalues" in doc or "eigenvectors" in doc
    if has_probs == has_eig:
        raise MalformedJson(
            "$", "give exactly one of probabilities or eigenvalues+eigenvectors")
    if has_probs:
        return InputSpec(n, probabilities=_real_vector(doc, "probabilities", n),
                         label=label)

    for key in ("eigenvalues", "eigenvectors"):
        if key not in doc:
            raise MalformedJson(f"$.{key}", "missing")
    eigenvalues = _real_vector(doc, "eigenvalues", n)
    v = _complex_matrix(doc, "eigenvectors", n)
    if not is_unitary(v, UNITARY_ATOL):
        raise NotUnitary("$.eigenvectors",
                         f"matrix is not unitary within {UNITARY_ATOL}")
    return InputSpec(n, eigenvalues=eigenvalues,
                     eigenvectors=Unitary(n, v, atol=UNITARY_ATOL), label=label)


def dump_state_spec(spec: InputSpec) -> str:
    doc: dict[str, Any] = {"n_qubits": spec.n_qubits}
    if spec.label is not None:
        doc["label"] = spec.label
    if spec.has_eigenbasis:
        doc["eigenvalues"] = spec.eigenvalues.probs.tolist()
        doc["eigenvectors"] = encode_matrix(spec.eigenvectors.matrix)
    else:
        doc["probabilities"] = spec.probabilities.probs.tolist()
    return json.dumps(doc, sort_keys=True)


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def decode_matrix(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


@dataclass
class RunReport:
    """One protocol run as emitted by ``diagtele run``.

    ``bob_final`` holds diagonal entries for diagonal states, or a row-major
    ``[re, im]`` matrix for the eigenbasis extension. ``timing`` is the only
    nondeterministic field and is ``None`` under ``--no-timing``.
    """

    scheme: str
    engine: str
    seed: int
    n_qubits: int
    x_bits: str
    alpha_bits: str
    cbits_sent: str
    probability: float
    bob_final: list
    fidelity: float
    eigenbasis: bool = False
    label: str | None = None
    timing: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(**doc)

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def dumps(doc: Any) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
