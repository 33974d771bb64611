"""Closed-form capacity-loss and MSE metrics for nested port sets.

These quantify what discarding ports costs, without Monte Carlo. For nested
sets inner c outer (strict), write H_out for the channel over the outer set,
B = (H_out H_out^H)^(-1), and H_rem for the columns of the removed ports
(outer minus inner). A rank-|removed| update gives

    tr((H_in H_in^H)^(-1)) = tr(B) + tr(D),
    D = B H_rem (I - H_rem^H B H_rem)^(-1) H_rem^H B,

so the ZF capacity lost by shrinking outer to inner has the closed form

    C_d = N_r log2(1 + tr(D) / (tr(B) (tr(B) + tr(D)) N_0 + tr(B)))

which approaches the noise-free ceiling N_r log2(1 + tr(D) / tr(B)) as N_0
vanishes. The MMSE symbol MSE for a set I is

    eps_I = N_r N_0 tr((H_I H_I^H + N_r N_0 I)^(-1)),

and the MSE penalty for shrinking the set has the same expanded structure
with B replaced by its regularized counterpart. Each routine evaluates both
the direct difference and the expanded form and insists they agree to 1e-9;
a disagreement means the inputs are too ill conditioned to trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from farsm.channel import restrict_to_ports
from farsm.errors import NumericalError
from farsm.precoding import NoiseModel, _checked_hermitian_inverse
from farsm.selection import PortSet, capacity_of_set

_AGREEMENT_ATOL = 1e-9


@dataclass(frozen=True)
class NestedSetPair:
    """Strictly nested pair of port sets (inner a proper subset of outer)."""

    inner: PortSet
    outer: PortSet

    def __post_init__(self):
        inner, outer = set(self.inner), set(self.outer)
        if not inner < outer:
            raise ValueError(
                f"inner set {tuple(self.inner)} must be a proper subset of "
                f"outer set {tuple(self.outer)}")

    @property
    def removed(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.outer) - set(self.inner)))


def _removal_update(h: np.ndarray, pair: NestedSetPair,
                    shift: float) -> tuple[float, float]:
    """tr(B) and tr(D) for the outer inverse Gram (optionally regularized by
    ``shift`` * I) and the removed columns."""
    h_out = restrict_to_ports(h, pair.outer)
    n_r = h.shape[0]
    gram = h_out @ h_out.conj().T + shift * np.eye(n_r)
    b = _checked_hermitian_inverse(gram, "outer-set Gram matrix")
    h_rem = restrict_to_ports(h, pair.removed)
    core = np.eye(len(pair.removed)) - h_rem.conj().T @ b @ h_rem
    core_inv = _checked_hermitian_inverse(core, "removal update core")
    bh = b @ h_rem
    d = bh @ core_inv @ bh.conj().T
    return float(np.trace(b).real), float(np.trace(d).real)


def zf_capacity_loss(h: np.ndarray, pair: NestedSetPair,
                     noise: NoiseModel) -> float:
    """ZF capacity lost by shrinking the outer port set to the inner one.

    Returns the closed form; raises if it disagrees with the directly
    computed capacity difference (full precoder + determinant route) by more
    than 1e-9 bits.
    """
    if noise.n0 <= 0:
        raise ValueError("capacity loss needs a positive noise power")
    n_r = h.shape[0]
    tr_b, tr_d = _removal_update(h, pair, 0.0)
    closed = n_r * math.log2(
        1.0 + tr_d / (tr_b * (tr_b + tr_d) * noise.n0 + tr_b))
    direct = (capacity_of_set(h, pair.outer, "zf", noise)
              - capacity_of_set(h, pair.inner, "zf", noise))
    if abs(closed - direct) > _AGREEMENT_ATOL:
        raise NumericalError(
            f"capacity-loss routes disagree: {closed!r} vs {direct!r}")
    return closed


def zf_capacity_loss_bound(h: np.ndarray, pair: NestedSetPair) -> float:
    """Noise-free ceiling of the ZF capacity loss: N_r log2(1 + trD / trB)."""
    n_r = h.shape[0]
    tr_b, tr_d = _removal_update(h, pair, 0.0)
    return n_r * math.log2(1.0 + tr_d / tr_b)


def mmse_mse(h: np.ndarray, ports: PortSet, noise: NoiseModel) -> float:
    """Symbol MSE of the MMSE design over the given port set."""
    if noise.n0 <= 0:
        raise ValueError("MSE needs a positive noise power")
    h_sel = restrict_to_ports(h, ports)
    n_r = h.shape[0]
    c = n_r * noise.n0
    reg = h_sel @ h_sel.conj().T + c * np.eye(n_r)
    inv = _checked_hermitian_inverse(reg, "regularized Gram matrix")
    return float(c * np.trace(inv).real)


def mmse_mse_difference(h: np.ndarray, pair: NestedSetPair,
                        noise: NoiseModel) -> float:
    """MSE penalty for shrinking the outer port set to the inner one.

    Positive for any strict shrink. Computed both as the direct difference
    and through the removal update; the two must agree to 1e-9.
    """
    if noise.n0 <= 0:
        raise ValueError("MSE needs a positive noise power")
    n_r = h.shape[0]
    c = n_r * noise.n0
    _, tr_d = _removal_update(h, pair, c)
    closed = c * tr_d
    direct = mmse_mse(h, pair.inner, noise) - mmse_mse(h, pair.outer, noise)
    if abs(closed - direct) > _AGREEMENT_ATOL:
        raise NumericalError(
            f"MSE-difference routes disagree: {closed!r} vs {direct!r}")
    return closed
