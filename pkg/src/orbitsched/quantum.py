"""
Statevector simulator for the 4-qubit policy circuit.

Layout: an RX layer with trainable angles and a ring of CNOTs, then
``n_reps`` blocks of [RZ(feature) on every qubit, RX(param) on every qubit,
ring CNOTs]. The outputs are the Pauli-Z expectations of qubits 0 and 1.
Rotations follow R_P(phi) = exp(-i phi P / 2), so every angle (trainable or
data) obeys the two-term parameter-shift rule with shift pi/2.

Qubit ``i`` is tensor axis ``i`` of the (2, 2, 2, 2) amplitude array, i.e.
the most significant bit of the flat basis index belongs to qubit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch


@dataclass(frozen=True)
class PqcSpec:
    n_qubits: int = 4
    n_reps: int = 8
    entangle: bool = True
    measured: Tuple[int, ...] = (0, 1)

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.n_reps + 1)

    @property
    def n_features(self) -> int:
        return self.n_qubits * self.n_reps


DEFAULT_SPEC = PqcSpec()


def _rx(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = -1j * s
    out[..., 1, 0] = -1j * s
    return out


def _apply_1q(psi: np.ndarray, gate: np.ndarray, q: int) -> np.ndarray:
    """Apply per-row 2x2 gates (B, 2, 2) to qubit ``q`` of psi (B, 2, ..., 2)."""
    ax = q + 1
    moved = np.moveaxis(psi, ax, 1)
    shape = moved.shape
    res = np.matmul(gate, moved.reshape(shape[0], 2, -1)).reshape(shape)
    return np.moveaxis(res, 1, ax)


def _apply_rz(psi: np.ndarray, phi: np.ndarray, q: int) -> np.ndarray:
    shape = [psi.shape[0]] + [1] * (psi.ndim - 1)
    phase = np.stack([np.exp(-0.5j * phi), np.exp(0.5j * phi)], axis=1)
    shape[q + 1] = 2
    return psi * phase.reshape(shape)


def _apply_cnot(psi: np.ndarray, control: int, target: int) -> np.ndarray:
    out = psi.copy()
    idx1 = [slice(None)] * psi.ndim
    idx1[control + 1] = 1
    sub = psi[tuple(idx1)]
    # target axis index shifts down by one if it sits after the removed control axis
    t_ax = target + 1 - (1 if target > control else 0)
    out[tuple(idx1)] = np.flip(sub, axis=t_ax)
    return out


def _ring(psi: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return psi
    for i in range(n):
        psi = _apply_cnot(psi, i, (i + 1) % n)
    return psi


def _check(params: np.ndarray, features: np.ndarray, spec: PqcSpec):
    if params.shape[-1] != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {params.shape[-1]}")
    if features.shape[-1] != spec.n_features:
        raise ValueError(f"expected {spec.n_features} features, got {features.shape[-1]}")


def statevector_batch(params, features, spec: PqcSpec = DEFAULT_SPEC) -> np.ndarray:
    """Final states, shape (B, 2**n). ``params`` is (36,) or (B, 36); ``features`` is (B, 32)."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    params = np.asarray(params, dtype=float)
    _check(params, features, spec)
    B, n = features.shape[0], spec.n_qubits
    params = np.broadcast_to(params, (B, spec.n_params))
    psi = np.zeros((B,) + (2,) * n, dtype=complex)
    psi[(slice(None),) + (0,) * n] = 1.0
    for q in range(n):
        psi = _apply_1q(psi, _rx(params[:, q]), q)
    if spec.entangle:
        psi = _ring(psi, n)
    for r in range(spec.n_reps):
        for q in range(n):
            psi = _apply_rz(psi, features[:, n * r + q], q)
        for q in range(n):
            psi = _apply_1q(psi, _rx(params[:, n * (r + 1) + q]), q)
        if spec.entangle:
            psi = _ring(psi, n)
    return psi.reshape(B, -1)


def expectations_from_state(psi: np.ndarray, spec: PqcSpec = DEFAULT_SPEC) -> np.ndarray:
    n = spec.n_qubits
    probs = (np.abs(psi) ** 2).reshape((psi.shape[0],) + (2,) * n)
    out = []
    for q in spec.measured:
        axes = tuple(a + 1 for a in range(n) if a != q)
        marg = probs.sum(axis=axes)
        out.append(marg[:, 0] - marg[:, 1])
    return np.stack(out, axis=1)


def simulate_batch(params, features, spec: PqcSpec = DEFAULT_SPEC) -> np.ndarray:
    """<Z> of the measured qubits for every row, shape (B, len(measured))."""
    return expectations_from_state(statevector_batch(params, features, spec), spec)


def simulate(params, features, spec: PqcSpec = DEFAULT_SPEC) -> Tuple[float, ...]:
    """(<Z0>, <Z1>) for a single input."""
    params = np.asarray(params, dtype=float)
    features = np.asarray(features, dtype=float)
    if params.ndim != 1 or features.ndim != 1:
        raise ValueError("simulate expects one-dimensional params and features")
    return tuple(float(v) for v in simulate_batch(params, features[None, :], spec)[0])


def param_shift_grad(params, features, spec: PqcSpec = DEFAULT_SPEC) -> np.ndarray:
    """d<Z_k>/d theta_j by the shift rule, shape (n_params, n_outputs)."""
    params = np.asarray(params, dtype=float)
    features = np.asarray(features, dtype=float)
    _check(params, features, spec)
    P = spec.n_params
    shifted = np.repeat(params[None, :], 2 * P, axis=0)
    for j in range(P):
        shifted[2 * j, j] += math.pi / 2
        shifted[2 * j + 1, j] -= math.pi / 2
    vals = simulate_batch(shifted, np.repeat(features[None, :], 2 * P, axis=0), spec)
    return (vals[0::2] - vals[1::2]) / 2


def shift_grads_batch(params, features, spec: PqcSpec = DEFAULT_SPEC):
    """Shift-rule Jacobians for a batch.

    Returns ``(d_params, d_features)`` with shapes (B, n_params, n_out) and
    (B, n_features, n_out). Each feature drives exactly one RZ gate, so the
    same rule gives its derivative.
    """
    params = np.asarray(params, dtype=float)
    features = np.atleast_2d(np.asarray(features, dtype=float))
    _check(params, features, spec)
    B, P, F = features.shape[0], spec.n_params, spec.n_features
    h = math.pi / 2
    pp = np.repeat(params[None, None, :], 2 * P, axis=1).repeat(B, axis=0)  # (B, 2P, P)
    for j in range(P):
        pp[:, 2 * j, j] += h
        pp[:, 2 * j + 1, j] -= h
    ff = np.repeat(features[:, None, :], 2 * P, axis=1)
    vals = simulate_batch(pp.reshape(-1, P), ff.reshape(-1, F), spec).reshape(B, 2 * P, -1)
    d_params = (vals[:, 0::2] - vals[:, 1::2]) / 2

    fx = np.repeat(features[:, None, :], 2 * F, axis=1)
    for j in range(F):
        fx[:, 2 * j, j] += h
        fx[:, 2 * j + 1, j] -= h
    vals = simulate_batch(params, fx.reshape(-1, F), spec).reshape(B, 2 * F, -1)
    d_features = (vals[:, 0::2] - vals[:, 1::2]) / 2
    return d_params, d_features


class PqcFunction(torch.autograd.Function):
    """Torch bridge: forward runs the simulator, backward applies the shift rule."""

    @staticmethod
    def forward(ctx, features, params, spec=DEFAULT_SPEC):
        f = features.detach().cpu().double().numpy()
        p = params.detach().cpu().double().numpy()
        ctx.save_for_backward(features, params)
        ctx.spec = spec
        out = simulate_batch(p, f, spec)
        return torch.as_tensor(out, dtype=features.dtype)

    @staticmethod
    def backward(ctx, grad_out):
        features, params = ctx.saved_tensors
        d_p, d_f = shift_grads_batch(params.detach().double().numpy(),
                                     features.detach().double().numpy(), ctx.spec)
        g = grad_out.detach().double().numpy()  # (B, n_out)
        grad_f = np.einsum("bjk,bk->bj", d_f, g)
        grad_p = np.einsum("bjk,bk->j", d_p, g)
        return (torch.as_tensor(grad_f, dtype=features.dtype),
                torch.as_tensor(grad_p, dtype=params.dtype), None)


def pqc(features: torch.Tensor, params: torch.Tensor, spec: PqcSpec = DEFAULT_SPEC) -> torch.Tensor:
    return PqcFunction.apply(features, params, spec)
