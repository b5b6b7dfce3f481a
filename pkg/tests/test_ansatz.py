import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pedt_vqe.ansatz import (
    CZ,
    RY,
    AnsatzCircuit,
    eval_first_harmonic,
    fit_first_harmonic,
    harmonic_argmin,
    measure_energy,
    param_vector,
    prepare_state,
    sweep_axis,
)
from pedt_vqe.hamiltonian import ShapeError, build_heisenberg, build_ising


def dense_circuit_state(circuit: AnsatzCircuit, params) -> np.ndarray:
    """Oracle: multiply full 2^n x 2^n gate matrices built with np.kron."""
    n = circuit.qubit_count
    eye = np.eye(2)
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1
    for g in circuit.gates:
        if isinstance(g, RY):
            t = params[g.param]
            ry = np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])
            ops = [ry if q == g.qubit else eye for q in range(n)]
        else:
            diag = np.ones(2 ** n)
            for b in range(2 ** n):
                bits = format(b, f"0{n}b")
                if bits[g.control] == "1" and bits[g.target] == "1":
                    diag[b] = -1
            psi = diag * psi
            continue
        m = np.ones((1, 1))
        for op in ops:
            m = np.kron(m, op)
        psi = m @ psi
    return psi


def test_default_layout_counts():
    c = AnsatzCircuit.hardware_efficient(4, 2)
    assert c.n_params == 4 * 3
    assert c.n_gates == c.n_params + 2 * 3
    assert c.n_gates >= c.n_params


def test_param_indices_must_be_distinct():
    with pytest.raises(ValueError):
        AnsatzCircuit(2, 1, (RY(0, 0), RY(1, 0)))


def test_param_vector_wraps():
    x = param_vector([-0.5, 2 * np.pi, 7.0, -1e-18])
    assert np.all((x >= 0) & (x < 2 * np.pi))
    assert x[0] == pytest.approx(2 * np.pi - 0.5)
    assert x[1] == 0.0


def test_single_qubit_rotations():
    c = AnsatzCircuit(1, 1, (RY(0, 0),))
    np.testing.assert_allclose(prepare_state(c, [0.0]), [1, 0])
    psi = prepare_state(c, [np.pi])
    assert abs(abs(psi[1]) - 1) < 1e-15 and abs(psi[0]) < 1e-15


def test_two_qubit_reference():
    c = AnsatzCircuit.hardware_efficient(2, 1)
    params = np.full(c.n_params, np.pi / 2)
    np.testing.assert_allclose(prepare_state(c, params), dense_circuit_state(c, params), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 4), layers=st.integers(1, 3), seed=st.integers(0, 10 ** 6))
def test_matches_dense_oracle(n, layers, seed):
    c = AnsatzCircuit.hardware_efficient(n, layers)
    params = np.random.default_rng(seed).uniform(0, 2 * np.pi, c.n_params)
    psi = prepare_state(c, params)
    np.testing.assert_allclose(psi, dense_circuit_state(c, params), atol=1e-12)
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_norm_after_every_gate():
    rng = np.random.default_rng(5)
    full = AnsatzCircuit.hardware_efficient(4, 3)
    params = rng.uniform(0, 2 * np.pi, full.n_params)
    for k in range(1, full.n_gates + 1):
        gates = full.gates[:k]
        used = sorted(g.param for g in gates if isinstance(g, RY))
        remap = {p: i for i, p in enumerate(used)}
        gates = tuple(RY(g.qubit, remap[g.param]) if isinstance(g, RY) else g for g in gates)
        prefix = AnsatzCircuit(4, 3, gates)
        psi = prepare_state(prefix, params[used])
        assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_shape_errors():
    c = AnsatzCircuit.hardware_efficient(3, 1)
    with pytest.raises(ShapeError):
        prepare_state(c, np.zeros(5))
    with pytest.raises(ShapeError):
        measure_energy(c, np.zeros(c.n_params), build_ising(4, 1, 1))


@pytest.mark.parametrize("n,j,h", [(3, 1.0, 0.5), (5, 1.0, 1.0), (4, 2.0, 0.3)])
def test_zero_angles_energy(n, j, h):
    c = AnsatzCircuit.hardware_efficient(n, 2)
    obs = measure_energy(c, np.zeros(c.n_params), build_ising(n, j, h))
    assert obs.value == pytest.approx(-j * (n - 1), abs=1e-12)
    assert obs.noise_variance == 0 and obs.shots == 0


def test_exact_mode_deterministic():
    c = AnsatzCircuit.hardware_efficient(3, 2)
    x = np.random.default_rng(0).uniform(0, 2 * np.pi, c.n_params)
    h = build_heisenberg(3, 1)
    assert measure_energy(c, x, h).value == measure_energy(c, x, h).value


def test_shot_noise_requires_rng():
    c = AnsatzCircuit.hardware_efficient(2, 1)
    with pytest.raises(ValueError):
        measure_energy(c, np.zeros(c.n_params), build_ising(2, 1, 1), shots=10)


def test_shot_noise_statistics():
    c = AnsatzCircuit.hardware_efficient(3, 1)
    h = build_ising(3, 1, 0.5)
    x = np.random.default_rng(1).uniform(0, 2 * np.pi, c.n_params)
    exact = measure_energy(c, x, h).value
    rng = np.random.default_rng(2)
    draws = [measure_energy(c, x, h, 1024, rng) for _ in range(10_000)]
    values = np.array([d.value for d in draws])
    reported = draws[0].noise_variance
    assert reported > 0
    assert abs(values.var(ddof=1) / reported - 1) < 0.10
    # unbiased: 5 standard errors
    assert abs(values.mean() - exact) < 5 * np.sqrt(reported / len(values))


def test_shot_noise_reproducible():
    c = AnsatzCircuit.hardware_efficient(2, 1)
    h = build_ising(2, 1, 1)
    x = np.ones(c.n_params)
    a = measure_energy(c, x, h, 100, np.random.default_rng(9))
    b = measure_energy(c, x, h, 100, np.random.default_rng(9))
    assert a == b


def test_sweep_noop_and_periodicity():
    c = AnsatzCircuit.hardware_efficient(3, 2)
    h = build_ising(3, 1, 1)
    x = np.random.default_rng(3).uniform(0, 2 * np.pi, c.n_params)
    before = x.copy()
    current = measure_energy(c, x, h).value
    assert sweep_axis(c, x, h, 4, [x[4]]) == [pytest.approx(current, abs=1e-14)]
    e1, e2 = sweep_axis(c, x, h, 2, [1.1, 1.1 + 2 * np.pi])
    assert abs(e1 - e2) < 1e-12
    np.testing.assert_array_equal(x, before)
    with pytest.raises(IndexError):
        sweep_axis(c, x, h, c.n_params, [0.0])


@pytest.mark.parametrize("h", [build_ising(3, 1, 0.5), build_heisenberg(3, 1)])
def test_per_axis_first_harmonic(h):
    c = AnsatzCircuit.hardware_efficient(3, 2)
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = rng.uniform(0, 2 * np.pi, c.n_params)
        axis = int(rng.integers(c.n_params))
        fit_angles = [0, 2 * np.pi / 3, 4 * np.pi / 3]
        coef = fit_first_harmonic(fit_angles, sweep_axis(c, x, h, axis, fit_angles))
        assert abs(eval_first_harmonic(coef, [np.pi])[0] - sweep_axis(c, x, h, axis, [np.pi])[0]) < 1e-8
        test_angles = rng.uniform(0, 2 * np.pi, 10)
        np.testing.assert_allclose(
            eval_first_harmonic(coef, test_angles), sweep_axis(c, x, h, axis, test_angles), atol=1e-8
        )


def test_harmonic_argmin_matches_brute_force():
    rng = np.random.default_rng(4)
    grid = np.linspace(0, 2 * np.pi, 200_001)
    for _ in range(20):
        coef = rng.normal(size=3)
        brute = grid[np.argmin(eval_first_harmonic(coef, grid))]
        t = harmonic_argmin(coef)
        assert eval_first_harmonic(coef, [t])[0] <= eval_first_harmonic(coef, [brute])[0] + 1e-12
        assert min(abs(t - brute), 2 * np.pi - abs(t - brute)) < 1e-4


def test_cz_is_symmetric_phase():
    c1 = AnsatzCircuit(2, 1, (RY(0, 0), RY(1, 1), CZ(0, 1)))
    c2 = AnsatzCircuit(2, 1, (RY(0, 0), RY(1, 1), CZ(1, 0)))
    x = [0.4, 2.0]
    np.testing.assert_allclose(prepare_state(c1, x), prepare_state(c2, x))
