import math
from functools import reduce

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from orbitsched.quantum import (
    DEFAULT_SPEC, PqcSpec, param_shift_grad, pqc, shift_grads_batch, simulate, simulate_batch,
    statevector_batch,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])


def _on(gate, q, n):
    """Full 2**n operator with ``gate`` on qubit q; qubit 0 is the leftmost kron factor."""
    return reduce(np.kron, [gate if i == q else I2 for i in range(n)])


def _rot(pauli, angle):
    return math.cos(angle / 2) * I2 - 1j * math.sin(angle / 2) * pauli


def _cnot(c, t, n):
    return _on(P0, c, n) + reduce(np.kron, [P1 if i == c else X if i == t else I2 for i in range(n)])


def dense_state(params, features, spec=DEFAULT_SPEC):
    """Independent oracle built from explicit 2**n matrices."""
    n = spec.n_qubits
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    ring = np.eye(2 ** n)
    if n > 1:
        for i in range(n):
            ring = _cnot(i, (i + 1) % n, n) @ ring
    for q in range(n):
        psi = _on(_rot(X, params[q]), q, n) @ psi
    if spec.entangle:
        psi = ring @ psi
    for r in range(spec.n_reps):
        for q in range(n):
            psi = _on(_rot(Z, features[n * r + q]), q, n) @ psi
        for q in range(n):
            psi = _on(_rot(X, params[n * (r + 1) + q]), q, n) @ psi
        if spec.entangle:
            psi = ring @ psi
    return psi


def dense_expect(params, features, spec=DEFAULT_SPEC):
    psi = dense_state(params, features, spec)
    n = spec.n_qubits
    return tuple(float(np.real(psi.conj() @ _on(Z, q, n) @ psi)) for q in spec.measured)


def _draw(rng, spec=DEFAULT_SPEC):
    return rng.uniform(-math.pi, math.pi, spec.n_params), rng.uniform(-math.pi, math.pi, spec.n_features)


def test_statevector_matches_dense_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p, f = _draw(rng)
        psi = statevector_batch(p, f[None, :])[0]
        assert np.abs(psi - dense_state(p, f)).max() < 1e-10
        assert np.allclose(simulate(p, f), dense_expect(p, f), atol=1e-10)


@pytest.mark.parametrize("spec", [PqcSpec(2, 3, True, (0, 1)), PqcSpec(3, 2, False, (2,)), PqcSpec(4, 1)])
def test_other_layouts_match_dense_oracle(spec):
    rng = np.random.default_rng(1)
    for _ in range(10):
        p, f = _draw(rng, spec)
        assert np.allclose(simulate(p, f, spec), dense_expect(p, f, spec), atol=1e-10)


def test_zero_input_gives_plus_one():
    out = simulate(np.zeros(36), np.zeros(32))
    assert abs(out[0] - 1.0) < 1e-12 and abs(out[1] - 1.0) < 1e-12


def test_single_qubit_reduction():
    spec = PqcSpec(1, 1, False, (0,))
    # RX(pi/2) then RZ then RX(0): <Z> = cos(pi/2) = 0; RX(pi) flips to -1
    assert simulate([math.pi / 2, 0.0], [0.3], spec)[0] == pytest.approx(0.0, abs=1e-12)
    assert simulate([math.pi / 2, math.pi / 2], [0.0], spec)[0] == pytest.approx(-1.0, abs=1e-12)
    assert simulate([0.7, 0.0], [1.1], spec)[0] == pytest.approx(math.cos(0.7), abs=1e-12)


def test_cnot_ordering_on_basis_state():
    # flip qubit 0 only; the ring then propagates 1 -> 2 -> 3 -> 0
    spec = PqcSpec(4, 0, True, (0, 1, 2, 3))
    psi = statevector_batch([math.pi, 0, 0, 0], np.zeros((1, 0)), spec)[0]
    assert abs(psi[int("0111", 2)]) == pytest.approx(1.0)


def test_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-5
    for _ in range(5):
        p, f = _draw(rng)
        g = param_shift_grad(p, f)
        for j in range(len(p)):
            up, dn = p.copy(), p.copy()
            up[j] += h
            dn[j] -= h
            fd = (np.array(simulate(up, f)) - np.array(simulate(dn, f))) / (2 * h)
            assert np.abs(fd - g[j]).max() < 1e-5


def test_feature_shift_matches_finite_differences():
    rng = np.random.default_rng(3)
    p, f = _draw(rng)
    _, d_f = shift_grads_batch(p, f[None, :])
    h = 1e-5
    for j in range(len(f)):
        up, dn = f.copy(), f.copy()
        up[j] += h
        dn[j] -= h
        fd = (np.array(simulate(p, up)) - np.array(simulate(p, dn))) / (2 * h)
        assert np.abs(fd - d_f[0, j]).max() < 1e-5


def test_batch_grads_agree_with_single():
    rng = np.random.default_rng(4)
    p = _draw(rng)[0]
    fs = np.stack([_draw(rng)[1] for _ in range(3)])
    d_p, _ = shift_grads_batch(p, fs)
    for b in range(3):
        assert np.allclose(d_p[b], param_shift_grad(p, fs[b]), atol=1e-12)


@given(st.integers(0, 10_000))
def test_state_is_normalised_and_outputs_bounded(seed):
    p, f = _draw(np.random.default_rng(seed))
    psi = statevector_batch(p, f[None, :])[0]
    assert abs(np.vdot(psi, psi).real - 1.0) < 1e-12
    assert all(-1 - 1e-12 <= v <= 1 + 1e-12 for v in simulate(p, f))


@given(st.integers(0, 10_000), st.integers(0, 35), st.integers(-2, 2))
def test_outputs_are_two_pi_periodic(seed, j, k):
    p, f = _draw(np.random.default_rng(seed))
    q = p.copy()
    q[j] += 2 * math.pi * k
    assert np.allclose(simulate(p, f), simulate(q, f), atol=1e-10)


def test_torch_bridge_gradcheck():
    rng = np.random.default_rng(5)
    spec = PqcSpec(2, 2, True, (0, 1))
    p, _ = _draw(rng, spec)
    f = np.stack([_draw(rng, spec)[1] for _ in range(2)])
    ft = torch.tensor(f, dtype=torch.float64, requires_grad=True)
    pt = torch.tensor(p, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda a, b: pqc(a, b, spec), (ft, pt), eps=1e-6, atol=1e-6)


def test_torch_forward_matches_numpy():
    rng = np.random.default_rng(6)
    p, f = _draw(rng)
    out = pqc(torch.tensor(f[None, :]), torch.tensor(p))
    assert np.allclose(out.numpy(), simulate_batch(p, f[None, :]))


@pytest.mark.parametrize("np_, nf", [(35, 32), (36, 31)])
def test_length_mismatch(np_, nf):
    with pytest.raises(ValueError):
        simulate(np.zeros(np_), np.zeros(nf))
