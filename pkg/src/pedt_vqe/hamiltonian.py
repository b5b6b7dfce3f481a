"""Pauli-string Hamiltonians with matrix-free action and exact ground energies.

Qubit ``q`` of an ``n``-qubit register maps to bit ``n - 1 - q`` of the basis
index, so a Pauli string ``P_0 P_1 ... P_{n-1}`` has the dense matrix
``kron(P_0, P_1, ..., P_{n-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

PAULI_LABELS = "IXYZ"
DENSE_MAX_QUBITS = 12


class ShapeError(ValueError):
    """Raised when a state vector does not match the operator dimension."""


class InvalidSizeError(ValueError):
    """Raised for chains too short to carry a nearest-neighbour coupling."""


class ConvergenceError(RuntimeError):
    """Iterative eigensolver failed to converge."""

    def __init__(self, message: str, residual_norm: float):
        super().__init__(f"{message} (residual norm {residual_norm:.3e})")
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class PauliString:
    qubit_count: int
    factors: str

    def __post_init__(self):
        factors = self.factors.upper()
        object.__setattr__(self, "factors", factors)
        if self.qubit_count < 1:
            raise InvalidSizeError("qubit_count must be positive")
        if len(factors) != self.qubit_count:
            raise ValueError(
                f"Pauli string {factors!r} has length {len(factors)}, "
                f"expected {self.qubit_count}"
            )
        if any(c not in PAULI_LABELS for c in factors):
            raise ValueError(f"invalid Pauli label in {factors!r}")

    @classmethod
    def from_sparse(cls, qubit_count: int, ops: dict) -> "PauliString":
        """Build from ``{qubit: label}``; unspecified qubits are identity."""
        labels = ["I"] * qubit_count
        for q, label in ops.items():
            labels[q] = label
        return cls(qubit_count, "".join(labels))

    @property
    def masks(self) -> Tuple[int, int, int]:
        """(flip mask, sign mask, number of Y factors) in basis-index bits."""
        flip = sign = 0
        n_y = 0
        n = self.qubit_count
        for q, c in enumerate(self.factors):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                flip |= bit
            if c in "YZ":
                sign |= bit
            if c == "Y":
                n_y += 1
        return flip, sign, n_y

    def action(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(target, phase)`` such that ``P|b> = phase[b] |target[b]>``."""
        flip, sign, n_y = self.masks
        idx = np.arange(2 ** self.qubit_count, dtype=np.int64)
        parity = _popcount(idx & sign) & 1
        phase = (1j ** n_y) * (1 - 2 * parity)
        return idx ^ flip, phase

    def dense(self) -> np.ndarray:
        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.ones((1, 1), dtype=complex)
        for c in self.factors:
            out = np.kron(out, mats[c])
        return out


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


@dataclass(frozen=True)
class PauliHamiltonian:
    """Real-weighted sum of Pauli strings on ``qubit_count`` qubits."""

    qubit_count: int
    terms: Tuple[Tuple[float, PauliString], ...]
    _actions: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple((float(c), p) for c, p in self.terms)
        object.__setattr__(self, "terms", terms)
        for _, p in terms:
            if p.qubit_count != self.qubit_count:
                raise ValueError(
                    f"term {p.factors} acts on {p.qubit_count} qubits, "
                    f"Hamiltonian on {self.qubit_count}"
                )

    @classmethod
    def from_labels(cls, labels: dict) -> "PauliHamiltonian":
        """Build from ``{"ZZI": -1.0, ...}``."""
        if not labels:
            raise ValueError("need at least one term")
        n = len(next(iter(labels)))
        return cls(n, tuple((c, PauliString(n, s)) for s, c in labels.items()))

    @property
    def dim(self) -> int:
        return 2 ** self.qubit_count

    @property
    def is_real(self) -> bool:
        """True when every term has an even number of Y factors."""
        return all(p.masks[2] % 2 == 0 for _, p in self.terms)

    def _term_actions(self):
        # cached lazily; the dataclass is otherwise immutable
        if self._actions is None:
            object.__setattr__(
                self, "_actions", [(c, *p.action()) for c, p in self.terms]
            )
        return self._actions

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return apply(self, psi)

    def expectation(self, psi: np.ndarray) -> float:
        psi = np.asarray(psi)
        val = np.vdot(psi, apply(self, psi))
        return float(val.real)

    def to_sparse(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        idx = np.arange(self.dim)
        for c, target, phase in self._term_actions():
            rows.append(target)
            cols.append(idx)
            vals.append(c * phase)
        if not rows:
            return sp.csr_matrix((self.dim, self.dim), dtype=complex)
        m = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        )
        return m.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def apply(h: PauliHamiltonian, psi: np.ndarray) -> np.ndarray:
    """Return ``H|psi>`` term by term without forming a matrix.

    ``psi`` may be a single vector of length ``2**n`` or a 2-D array whose
    first axis has that length (columns are applied independently).
    """
    psi = np.asarray(psi)
    if psi.shape[0] != h.dim:
        raise ShapeError(
            f"state has {psi.shape[0]} amplitudes, operator needs {h.dim}"
        )
    out = np.zeros(psi.shape, dtype=complex)
    for c, target, phase in h._term_actions():
        contrib = c * phase.reshape((-1,) + (1,) * (psi.ndim - 1)) * psi
        out[target] += contrib
    return out


def build_ising(n: int, j: float, h: float) -> PauliHamiltonian:
    """Open-chain transverse-field Ising model ``-j sum ZZ - h sum X``."""
    if n < 2:
        raise InvalidSizeError(f"Ising chain needs n >= 2, got {n}")
    terms = []
    for i in range(n - 1):
        terms.append((-j, PauliString.from_sparse(n, {i: "Z", i + 1: "Z"})))
    for i in range(n):
        terms.append((-h, PauliString.from_sparse(n, {i: "X"})))
    return PauliHamiltonian(n, tuple(terms))


def build_heisenberg(n: int, j: float) -> PauliHamiltonian:
    """Open-chain isotropic Heisenberg model ``j sum (XX + YY + ZZ)``."""
    if n < 2:
        raise InvalidSizeError(f"Heisenberg chain needs n >= 2, got {n}")
    terms = []
    for i in range(n - 1):
        for label in "XYZ":
            terms.append((j, PauliString.from_sparse(n, {i: label, i + 1: label})))
    return PauliHamiltonian(n, tuple(terms))


def build_hamiltonian(family: str, n: int, j: float = 1.0, h: float = 0.5) -> PauliHamiltonian:
    if family == "ising":
        return build_ising(n, j, h)
    if family == "heisenberg":
        return build_heisenberg(n, j)
    raise ValueError(f"unknown Hamiltonian family {family!r}")


@dataclass
class SpectrumResult:
    ground_energy: float
    ground_state: Optional[np.ndarray] = None


def ground_energy(
    h: PauliHamiltonian,
    method: str = "auto",
    *,
    seed: int = 0,
    maxiter: Optional[int] = None,
    tol: float = 1e-13,
    return_state: bool = False,
) -> SpectrumResult:
    """Exact ground-state energy by dense or Lanczos diagonalization.

    ``method="auto"`` picks dense up to ``DENSE_MAX_QUBITS`` qubits and the
    iterative solver above. The iterative start vector is drawn from
    ``numpy.random.default_rng(seed)``.
    """
    if method == "auto":
        method = "dense" if h.qubit_count <= DENSE_MAX_QUBITS else "iterative"
    if method == "dense":
        if h.qubit_count > DENSE_MAX_QUBITS:
            raise ValueError(
                f"dense diagonalization limited to {DENSE_MAX_QUBITS} qubits"
            )
        mat = h.to_dense()
        if h.is_real:
            mat = mat.real
        if return_state:
            w, v = np.linalg.eigh(mat)
            state = v[:, 0].astype(complex)
            return SpectrumResult(float(w[0]), state / np.linalg.norm(state))
        return SpectrumResult(float(np.linalg.eigvalsh(mat)[0]))
    if method == "iterative":
        return _lanczos_ground(h, seed=seed, maxiter=maxiter, tol=tol)
    raise ValueError(f"unknown method {method!r}")


def _lanczos_ground(h, *, seed, maxiter, tol) -> SpectrumResult:
    dtype = np.float64 if h.is_real else np.complex128
    if dtype is np.float64:
        matvec = lambda v: apply(h, v).real  # noqa: E731
    else:
        matvec = lambda v: apply(h, v)  # noqa: E731
    op = LinearOperator((h.dim, h.dim), matvec=matvec, matmat=matvec, dtype=dtype)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(h.dim)
    if dtype is np.complex128:
        v0 = v0 + 1j * rng.standard_normal(h.dim)
    try:
        w, v = eigsh(op, k=1, which="SA", v0=v0, tol=tol, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            vec = exc.eigenvectors[:, 0]
            resid = float(np.linalg.norm(matvec(vec) - exc.eigenvalues[0] * vec))
        else:
            resid = float("inf")
        raise ConvergenceError("Lanczos did not converge", resid) from exc
    state = v[:, 0].astype(complex)
    return SpectrumResult(float(w[0]), state / np.linalg.norm(state))

