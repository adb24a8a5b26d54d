"""Hilbert space, operators, and state containers for the qubit-cavity system.

The emitter is modeled as a two-level qubit coupled to a single cavity mode
truncated at a configurable Fock cutoff. Basis ordering is qubit-major:

    |g,0>, |g,1>, ..., |g,N>, |e,0>, ..., |e,N>

so a full-space operator factors as kron(qubit_op, cavity_op). All matrices
are small and dense (dim <= 12 in practice); numpy arrays are the only
representation used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError, InvalidSpecError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = -1e-8

# Defaults per use case: plain emission stays in the single-excitation
# sector, a classically driven cavity needs more headroom.
FOCK_CUTOFF_EMISSION = 3
FOCK_CUTOFF_DRIVEN = 5


@dataclass(frozen=True)
class HilbertSpec:
    """Dimensions of the qubit (x) cavity space.

    Attributes:
        fock_cutoff: highest cavity Fock state kept (N >= 1).
        qubit_levels: emitter levels; fixed at 2 for this toolkit.
    """

    fock_cutoff: int = FOCK_CUTOFF_EMISSION
    qubit_levels: int = 2

    def __post_init__(self) -> None:
        if self.fock_cutoff < 1:
            raise InvalidSpecError(
                f"fock_cutoff must be >= 1, got {self.fock_cutoff}"
            )
        if self.qubit_levels != 2:
            raise InvalidSpecError("only a two-level emitter is supported")

    @property
    def cavity_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.qubit_levels * self.cavity_dim


def build_operators(spec: HilbertSpec) -> dict[str, np.ndarray]:
    """Construct the standard operator set on the full space.

    Returns a dict with keys:
        a, adag      cavity annihilation/creation
        sm, sp, sz   qubit sigma-, sigma+, sigma-z
        n_cav        cavity number operator
        p_excited    qubit excited-state projector
        id_cavity, id_qubit, id_full
        fidelity_op  I_cavity tensor |+><+| with |+> = (|g>+|e>)/sqrt(2)

    The commutator [a, adag] equals the identity except in the top Fock
    entry, the usual signature of a truncated mode.
    """
    nc = spec.cavity_dim
    a_c = np.diag(np.sqrt(np.arange(1, nc, dtype=float)), k=1)
    id_c = np.eye(nc)
    id_q = np.eye(2)
    # qubit basis: index 0 = |g>, 1 = |e>; sigma- |e> = |g>
    sm_q = np.array([[0.0, 1.0], [0.0, 0.0]])
    sz_q = np.diag([-1.0, 1.0])
    plus = np.full((2, 2), 0.5)

    ops = {
        "a": np.kron(id_q, a_c),
        "adag": np.kron(id_q, a_c.T),
        "sm": np.kron(sm_q, id_c),
        "sp": np.kron(sm_q.T, id_c),
        "sz": np.kron(sz_q, id_c),
        "n_cav": np.kron(id_q, a_c.T @ a_c),
        "p_excited": np.kron(np.diag([0.0, 1.0]), id_c),
        "id_cavity": id_c,
        "id_qubit": id_q,
        "id_full": np.eye(spec.dim),
        "fidelity_op": np.kron(plus, id_c),
    }
    return ops


def basis_index(spec: HilbertSpec, qubit: int, n: int) -> int:
    """Flat index of |qubit, n> in the qubit-major ordering."""
    if not (0 <= qubit < 2 and 0 <= n <= spec.fock_cutoff):
        raise DimensionMismatchError(f"no basis state |{qubit},{n}> in {spec}")
    return qubit * spec.cavity_dim + n


def ket(spec: HilbertSpec, qubit: int, n: int) -> np.ndarray:
    """Basis ket |qubit, n> as a complex vector."""
    v = np.zeros(spec.dim, dtype=complex)
    v[basis_index(spec, qubit, n)] = 1.0
    return v


def qubit_state_ket(spec: HilbertSpec, c_g: complex, c_e: complex) -> np.ndarray:
    """Product state (c_g|g> + c_e|e>) tensor |0>, normalized."""
    v = c_g * ket(spec, 0, 0) + c_e * ket(spec, 1, 0)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InvalidSpecError("qubit amplitudes are both zero")
    return v / norm


@dataclass
class StateVector:
    """Normalized pure state on a HilbertSpec."""

    spec: HilbertSpec
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.spec.dim,):
            raise DimensionMismatchError(
                f"state has shape {self.amplitudes.shape}, space dim {self.spec.dim}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-6:
            raise InvalidSpecError(f"state norm {norm} is not 1")

    def density_matrix(self) -> "DensityMatrix":
        rho = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityMatrix(self.spec, rho)


@dataclass
class DensityMatrix:
    """Density matrix with the standard physicality checks.

    Validation enforces Hermiticity to 1e-10, unit trace to 1e-8, and
    eigenvalues above -1e-8. Construction fails loudly rather than
    normalizing silently.
    """

    spec: HilbertSpec
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = self.spec.dim
        if self.matrix.shape != (d, d):
            raise DimensionMismatchError(
                f"matrix shape {self.matrix.shape}, space dim {d}"
            )
        if self.validate:
            self.check()

    def check(self) -> None:
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITICITY_TOL:
            raise InvalidSpecError(f"not Hermitian: deviation {herm:.3e}")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidSpecError(f"trace {tr} is not 1")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < POSITIVITY_TOL:
            raise InvalidSpecError(f"negative eigenvalue {evals.min():.3e}")


def expectation(state, op: np.ndarray) -> float:
    """<op> for a StateVector, DensityMatrix, or raw vector/matrix.

    The operator is assumed Hermitian; the imaginary part of the trace is
    checked against roundoff and discarded.
    """
    op = np.asarray(op)
    if isinstance(state, StateVector):
        vec = state.amplitudes
    elif isinstance(state, DensityMatrix):
        vec = None
        rho = state.matrix
    else:
        arr = np.asarray(state, dtype=complex)
        if arr.ndim == 1:
            vec = arr
        else:
            vec = None
            rho = arr
    if vec is not None:
        if op.shape[0] != vec.shape[0]:
            raise DimensionMismatchError("operator/state dimension mismatch")
        val = np.vdot(vec, op @ vec)
    else:
        if op.shape != rho.shape:
            raise DimensionMismatchError("operator/state dimension mismatch")
        val = np.trace(rho @ op)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise InvalidSpecError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def partial_trace_cavity(rho, spec: HilbertSpec) -> np.ndarray:
    """Trace out the cavity, returning the 2x2 qubit density matrix."""
    if isinstance(rho, DensityMatrix):
        rho = rho.matrix
    rho = np.asarray(rho, dtype=complex)
    d, nc = spec.dim, spec.cavity_dim
    if rho.shape != (d, d):
        raise DimensionMismatchError(f"matrix shape {rho.shape}, space dim {d}")
    blocks = rho.reshape(2, nc, 2, nc)
    return np.trace(blocks, axis1=1, axis2=3)
