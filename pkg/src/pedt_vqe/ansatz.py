"""Hardware-efficient RY/CZ ansatz on a statevector, with shot-noise energies.

Default layout for ``layers = L``::

    [RY on every qubit] -> [CZ ladder (0,1), (1,2), ...]   repeated L times
    [RY on every qubit]

so the circuit has ``n * (L + 1)`` parameters, each used by exactly one gate.
Because every angle enters through a single ``RY(theta) = exp(-i theta Y / 2)``,
the energy along any one parameter axis is ``a + b cos(theta) + c sin(theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .hamiltonian import PauliHamiltonian, ShapeError, apply

TWO_PI = 2.0 * np.pi


def param_vector(angles) -> np.ndarray:
    """Reduce angles into ``[0, 2pi)`` as a float array."""
    x = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    x[x >= TWO_PI] = 0.0
    return x


@dataclass(frozen=True)
class RY:
    qubit: int
    param: int


@dataclass(frozen=True)
class CZ:
    control: int
    target: int


Gate = Union[RY, CZ]


@dataclass(frozen=True)
class AnsatzCircuit:
    qubit_count: int
    layers: int
    gates: Tuple[Gate, ...]

    def __post_init__(self):
        if self.qubit_count < 1:
            raise ValueError("qubit_count must be positive")
        bound = [g.param for g in self.gates if isinstance(g, RY)]
        if sorted(bound) != list(range(len(bound))):
            raise ValueError("each parameter index must drive exactly one RY gate")
        for g in self.gates:
            qubits = (g.qubit,) if isinstance(g, RY) else (g.control, g.target)
            if any(not 0 <= q < self.qubit_count for q in qubits):
                raise ValueError(f"gate {g} acts outside the register")

    @classmethod
    def hardware_efficient(cls, qubit_count: int, layers: int = 3) -> "AnsatzCircuit":
        if layers < 1:
            raise ValueError("layers must be positive")
        gates: List[Gate] = []
        p = 0
        for _ in range(layers):
            for q in range(qubit_count):
                gates.append(RY(q, p))
                p += 1
            for q in range(qubit_count - 1):
                gates.append(CZ(q, q + 1))
        for q in range(qubit_count):
            gates.append(RY(q, p))
            p += 1
        return cls(qubit_count, layers, tuple(gates))

    @property
    def n_params(self) -> int:
        return sum(isinstance(g, RY) for g in self.gates)

    @property
    def n_gates(self) -> int:
        return len(self.gates)


def _apply_ry(state: np.ndarray, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    # state has shape (left, 2, right)
    a0 = state[:, 0, :]
    a1 = state[:, 1, :]
    out = np.empty_like(state)
    out[:, 0, :] = c * a0 - s * a1
    out[:, 1, :] = s * a0 + c * a1
    return out


def prepare_state(circuit: AnsatzCircuit, params) -> np.ndarray:
    """Return ``U(params)|0...0>`` as a length ``2**n`` complex vector."""
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ShapeError(
            f"circuit takes {circuit.n_params} parameters, got shape {params.shape}"
        )
    n = circuit.qubit_count
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for g in circuit.gates:
        if isinstance(g, RY):
            view = psi.reshape(2 ** g.qubit, 2, 2 ** (n - g.qubit - 1))
            psi = _apply_ry(view, params[g.param]).reshape(-1)
        else:
            view = psi.reshape([2] * n)
            idx = [slice(None)] * n
            idx[g.control] = 1
            idx[g.target] = 1
            view[tuple(idx)] *= -1
    return psi


@dataclass(frozen=True)
class EnergyObservation:
    value: float
    noise_variance: float = 0.0
    shots: int = 0


def exact_energy(circuit: AnsatzCircuit, params, h: PauliHamiltonian) -> float:
    psi = prepare_state(circuit, params)
    return float(np.vdot(psi, apply(h, psi)).real)


def measure_energy(
    circuit: AnsatzCircuit,
    params,
    h: PauliHamiltonian,
    shots: int = 0,
    rng: np.random.Generator = None,
) -> EnergyObservation:
    """Energy of the trial state, exact (``shots=0``) or with Gaussian shot noise.

    With ``shots = S > 0`` the value is the exact energy plus a zero-mean
    Gaussian draw of variance ``(<H^2> - <H>^2) / S``.
    """
    if circuit.qubit_count != h.qubit_count:
        raise ShapeError(
            f"circuit has {circuit.qubit_count} qubits, Hamiltonian {h.qubit_count}"
        )
    if shots < 0:
        raise ValueError("shots must be nonnegative")
    psi = prepare_state(circuit, params)
    h_psi = apply(h, psi)
    energy = float(np.vdot(psi, h_psi).real)
    if shots == 0:
        return EnergyObservation(energy, 0.0, 0)
    if rng is None:
        raise ValueError("a seeded generator is required when shots > 0")
    per_shot = max(float(np.vdot(h_psi, h_psi).real) - energy ** 2, 0.0)
    var = per_shot / shots
    return EnergyObservation(energy + np.sqrt(var) * rng.standard_normal(), var, shots)


def sweep_axis(
    circuit: AnsatzCircuit,
    params,
    h: PauliHamiltonian,
    axis: int,
    angles: Sequence[float],
) -> List[float]:
    """Exact energies with only ``params[axis]`` replaced by each angle."""
    params = np.array(params, dtype=float)
    if not 0 <= axis < circuit.n_params:
        raise IndexError(f"axis {axis} out of range for {circuit.n_params} parameters")
    out = []
    for theta in angles:
        p = params.copy()
        p[axis] = theta
        out.append(exact_energy(circuit, p, h))
    return out


def fit_first_harmonic(angles: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """Least-squares ``(a, b, c)`` of ``a + b cos(t) + c sin(t)``; exact for 3 points."""
    t = np.asarray(angles, dtype=float)
    design = np.column_stack([np.ones_like(t), np.cos(t), np.sin(t)])
    coef, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=float), rcond=None)
    return coef


def eval_first_harmonic(coef, angles) -> np.ndarray:
    t = np.asarray(angles, dtype=float)
    return coef[0] + coef[1] * np.cos(t) + coef[2] * np.sin(t)


def harmonic_argmin(coef) -> float:
    """Angle in ``[0, 2pi)`` minimizing ``a + b cos(t) + c sin(t)``."""
    _, b, c = coef
    return float(np.mod(np.arctan2(-c, -b), TWO_PI))
