"""Active-port subset selection.

Three strategies pick N_a of the N fluid-antenna ports per channel draw:

* ``optimal_select``: exhaustive capacity maximization over all C(N, N_a)
  subsets. Exact but combinatorial; guarded to N <= 20.
* ``tmd_select``: greedy removal of N - N_a ports, each step discarding the
  port whose removal grows tr((H H^H)^(-1)) the least. The growth caused by
  removing column h from an active set with inverse Gram A is
  ||A h||^2 / (1 - h^H A h), and the inverse Gram is maintained across
  removals by a rank-one (Sherman-Morrison) downdate instead of refactoring.
* ``mce_tmd_select``: a cheaper two-stage variant. Stage one walks a static,
  geometry-ranked list of port pairs and repeatedly removes the weaker member
  of the most channel-correlated pair within the leading window, until N_b
  ports survive; stage two runs the greedy trace rule on the survivors.

All port indices at this interface are 1-based, matching the grid layout.
Internal helpers prefixed with ``_batch`` operate on stacks of channels and
exist for the Monte Carlo engine; they implement the same decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from farsm.channel import restrict_to_ports
from farsm.correlation import SortedPairArrays
from farsm.errors import ConfigError, NumericalError, SingularChannelError
from farsm.precoding import (MAX_CONDITION, NoiseModel,
                             _checked_hermitian_inverse, mmse_precoder,
                             zf_precoder)

# A removal denominator 1 - h^H A h at or below this marks the port as
# non-removable (removal would make the remaining Gram singular).
REMOVAL_EPS = 1e-12

_EXHAUSTIVE_MAX_PORTS = 20


@dataclass(frozen=True)
class PortSet:
    """Sorted tuple of distinct 1-based port indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) == 0:
            raise ValueError("port set must not be empty")
        if any(i < 1 for i in idx):
            raise ValueError(f"port indices are 1-based, got {idx}")
        if len(set(idx)) != len(idx):
            raise ValueError(f"port indices must be distinct, got {idx}")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, port):
        return port in self.indices


def capacity_of_set(h: np.ndarray, ports: PortSet, precoder_kind: str,
                    noise: NoiseModel) -> float:
    """Capacity (bits per channel use) of the precoded restricted channel.

    C = log2 det(I + (1 / (N_r N_0)) (H P)(H P)^H) with P the requested
    precoder built on the restricted channel.
    """
    if noise.n0 <= 0:
        raise ValueError("capacity evaluation needs a positive noise power")
    h_sel = restrict_to_ports(h, ports)
    n_r = h_sel.shape[0]
    if precoder_kind == "zf":
        prec = zf_precoder(h_sel)
    elif precoder_kind == "mmse":
        prec = mmse_precoder(h_sel, noise)
    else:
        raise ValueError(f"unknown precoder kind {precoder_kind!r}")
    hp = h_sel @ prec.matrix
    m = np.eye(n_r) + (hp @ hp.conj().T) / (n_r * noise.n0)
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise NumericalError("capacity determinant not positive")
    return float(logdet / math.log(2.0))


@lru_cache(maxsize=8)
def _subset_table(n: int, k: int) -> np.ndarray:
    """All k-subsets of range(n) as a (C(n,k), k) int array, lexicographic."""
    return np.array(list(combinations(range(n), k)), dtype=np.intp)


def optimal_select(h: np.ndarray, n_a: int, precoder_kind: str,
                   noise: NoiseModel) -> PortSet:
    """Exhaustive capacity-maximizing port subset.

    Evaluates every C(N, N_a) candidate and returns the best; exact ties
    resolve to the lexicographically smallest index list. Refuses N > 20,
    where the candidate count stops being desk-scale: use tmd_select or
    mce_tmd_select instead.
    """
    n = h.shape[1]
    if n > _EXHAUSTIVE_MAX_PORTS:
        raise ConfigError(
            f"exhaustive selection over C({n}, {n_a}) candidates is out of "
            "budget for N > 20; use tmd_select or mce_tmd_select")
    if not h.shape[0] <= n_a <= n:
        raise ValueError(f"need N_r <= N_a <= N, got N_a={n_a}")
    subsets = _subset_table(n, n_a)
    scores = _subset_capacities(h, subsets, precoder_kind, noise.n0)
    best = int(np.argmax(scores))  # first max = lexicographically smallest
    if not np.isfinite(scores[best]):
        raise SingularChannelError("every candidate subset is singular")
    return PortSet(tuple(int(p) + 1 for p in subsets[best]))


# ---------------------------------------------------------------------------
# greedy trace-minimizing removal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceState:
    """Inverse Gram of the currently active ports, kept across removals.

    Attributes:
        inverse: (N_r, N_r) Hermitian inverse of H_active H_active^H.
        active: sorted tuple of 1-based ports still in the set.
    """

    inverse: np.ndarray
    active: tuple[int, ...]


def initial_trace_state(h: np.ndarray, ports: PortSet | None = None) -> TraceState:
    """Factor the Gram of the given ports (default: all) into a TraceState."""
    active = tuple(ports) if ports is not None else tuple(range(1, h.shape[1] + 1))
    h_act = restrict_to_ports(h, active)
    gram = h_act @ h_act.conj().T
    inv = _checked_hermitian_inverse(gram, "active-port Gram matrix")
    return TraceState(inverse=inv, active=active)


def tmd_trace_metric(state: TraceState, port: int, h: np.ndarray) -> float:
    """Growth of tr((H H^H)^(-1)) caused by removing ``port`` from the set.

    Equals ||A h||^2 / (1 - h^H A h) for the port's column h and the current
    inverse Gram A; the removal that grows the trace least is the one the
    greedy rule takes. A denominator at or below 1e-12 means the remaining
    columns would no longer span the receive space.
    """
    if port not in state.active:
        raise ValueError(f"port {port} is not active")
    col = h[:, port - 1]
    v = state.inverse @ col
    den = 1.0 - float(np.real(col.conj() @ v))
    if den <= REMOVAL_EPS:
        raise SingularChannelError(
            f"port {port} is non-removable (denominator {den:.3e})")
    return float(np.real(v.conj() @ v)) / den


def smw_downdate(state: TraceState, port: int, h: np.ndarray) -> TraceState:
    """Remove ``port`` from the active set, updating the inverse Gram.

    Rank-one update A' = A + (A h)(A h)^H / (1 - h^H A h); no refactoring.
    """
    if port not in state.active:
        raise ValueError(f"port {port} is not active")
    col = h[:, port - 1]
    v = state.inverse @ col
    den = 1.0 - float(np.real(col.conj() @ v))
    if den <= REMOVAL_EPS:
        raise SingularChannelError(
            f"port {port} is non-removable (denominator {den:.3e})")
    inv = state.inverse + np.outer(v, v.conj()) / den
    active = tuple(p for p in state.active if p != port)
    return TraceState(inverse=inv, active=active)


def _removal_costs(state: TraceState, h: np.ndarray) -> np.ndarray:
    """Vector of trace-growth metrics over the active ports (inf where
    removal is not allowed)."""
    cols = h[:, [p - 1 for p in state.active]]
    v = state.inverse @ cols
    num = np.einsum("ij,ij->j", v.conj(), v).real
    den = 1.0 - np.einsum("ij,ij->j", cols.conj(), v).real
    return np.where(den > REMOVAL_EPS, num / np.maximum(den, REMOVAL_EPS), np.inf)


def _greedy_trace_removal(inv: np.ndarray, active: list[int], h: np.ndarray,
                          stop: int) -> list[int]:
    """Shared greedy loop: peel ports until ``stop`` remain.

    Reuses the cost intermediates for the rank-one inverse update, so each
    step costs one matvec batch instead of recomputing A h for the removed
    column; decisions are identical to composing tmd_trace_metric with
    smw_downdate.
    """
    cols = h[:, np.asarray(active, dtype=np.intp) - 1]
    while len(active) > stop:
        v = inv @ cols
        num = np.einsum("ij,ij->j", v.conj(), v).real
        den = 1.0 - np.einsum("ij,ij->j", cols.conj(), v).real
        costs = np.where(den > REMOVAL_EPS,
                         num / np.maximum(den, REMOVAL_EPS), np.inf)
        j = int(np.argmin(costs))  # first minimum = smallest active port
        if not np.isfinite(costs[j]):
            raise SingularChannelError("no removable port left")
        vj = v[:, j]
        inv = inv + np.outer(vj, vj.conj()) / den[j]
        del active[j]
        cols = np.delete(cols, j, axis=1)
    return active


def tmd_select(h: np.ndarray, n_a: int) -> PortSet:
    """Greedy trace-minimizing removal down to n_a active ports.

    Ties on the removal metric resolve to the smallest port index.
    """
    n = h.shape[1]
    if not h.shape[0] <= n_a <= n:
        raise ValueError(f"need N_r <= N_a <= N, got N_a={n_a}")
    state = initial_trace_state(h)
    return PortSet(tuple(
        _greedy_trace_removal(state.inverse, list(state.active), h, n_a)))


# ---------------------------------------------------------------------------
# two-stage low-complexity selection
# ---------------------------------------------------------------------------

def mce_tmd_select(h: np.ndarray, pairs: SortedPairArrays, n_b: int,
                   n_a: int) -> PortSet:
    """Correlation-guided pruning to n_b ports, then greedy removal to n_a.

    Stage one repeats N - N_b times: among the first min(N_b, remaining)
    entries of the geometry-ranked pair list (pairs containing removed ports
    drop out), find the pair with the largest channel inner product
    |h_n^H h_nbar| and remove its smaller-norm member; on a norm tie the
    larger port index goes. Stage two is tmd_select on the survivors.
    """
    n = h.shape[1]
    if not h.shape[0] <= n_a < n_b < n:
        raise ValueError(
            f"need N_r <= N_a < N_b < N, got N_a={n_a}, N_b={n_b}, N={n}")
    gram = h.conj().T @ h
    norms2 = gram.diagonal().real
    # pair scores never change (h is fixed), so compute them all once from
    # the Gram; the whole point of stage one is that no per-iteration
    # algebra is needed. The walk below is plain Python on purpose: the
    # windowed scan over a short ranked list is cheaper than array masking.
    scores = np.abs(gram[pairs.first - 1, pairs.second - 1]).tolist()
    firsts = pairs.first.tolist()
    seconds = pairs.second.tolist()
    dead: set[int] = set()

    for _ in range(n - n_b):
        best = -1.0
        best_pos = -1
        seen = 0
        pos = 0
        # first min(n_b, remaining) live entries of the ranked pair list;
        # strict > keeps the earliest rank on a score tie
        while seen < n_b and pos < len(firsts):
            if firsts[pos] not in dead and seconds[pos] not in dead:
                seen += 1
                if scores[pos] > best:
                    best = scores[pos]
                    best_pos = pos
            pos += 1
        lo, hi = firsts[best_pos], seconds[best_pos]
        dead.add(lo if norms2[hi - 1] > norms2[lo - 1] else hi)

    survivors = tuple(p for p in range(1, n + 1) if p not in dead)
    state = initial_trace_state(h, PortSet(survivors))
    return PortSet(tuple(
        _greedy_trace_removal(state.inverse, list(state.active), h, n_a)))


# ---------------------------------------------------------------------------
# exact subset capacities without per-subset factorizations
# ---------------------------------------------------------------------------
# Scoring all C(N, N_a) subsets one factorization at a time dominates the
# Monte Carlo budget, so capacities are evaluated from the characteristic
# polynomial of each subset's N_r x N_r Gram: its elementary symmetric
# coefficients give tr(W^-1) = e_{n-1} / e_n directly, and the regularized
# quantities are polynomial shifts of the same coefficients. Algebraically
# exact; agreement with capacity_of_set is pinned by tests.

def _power_sums(g: np.ndarray, n: int) -> list[np.ndarray]:
    """tr(G^k), k = 1..n, for a stack of Hermitian matrices g (..., n, n)."""
    p1 = np.trace(g, axis1=-2, axis2=-1).real
    if n == 1:
        return [p1]
    p2 = np.einsum("...ij,...ij->...", g, g.conj()).real
    if n == 2:
        return [p1, p2]
    g2 = g @ g
    p3 = np.einsum("...ij,...ji->...", g2, g).real
    if n == 3:
        return [p1, p2, p3]
    p4 = np.einsum("...ij,...ij->...", g2, g2.conj()).real
    if n == 4:
        return [p1, p2, p3, p4]
    ps = [p1, p2, p3, p4]
    gk = g2 @ g2
    for _ in range(5, n + 1):
        gk = gk @ g
        ps.append(np.trace(gk, axis1=-2, axis2=-1).real)
    return ps


def _elementary_symmetric(ps: list[np.ndarray]) -> list[np.ndarray]:
    """Newton's identities: elementary symmetric polynomials e_1..e_n from
    power sums p_1..p_n."""
    es: list[np.ndarray] = []
    for k in range(1, len(ps) + 1):
        # e_k = (1/k) sum_{m=0}^{k-1} (-1)^(k-m-1) e_m p_{k-m}, e_0 = 1
        acc = ps[k - 1].copy() if k % 2 else -ps[k - 1].copy()
        for m in range(1, k):
            term = es[m - 1] * ps[k - 1 - m]
            acc += term if (k - m) % 2 else -term
        es.append(acc / k)
    return es


def _shifted_elementary(es: list[np.ndarray], c: float, n: int) -> list[np.ndarray]:
    """Elementary symmetric polynomials of {sigma_i + c} from those of
    {sigma_i}."""
    e_ext = [np.ones_like(es[0])] + es
    out = []
    for k in range(1, n + 1):
        acc = np.zeros_like(es[0])
        for j in range(0, k + 1):
            acc += math.comb(n - j, k - j) * (c ** (k - j)) * e_ext[j]
        out.append(acc)
    return out


def _charpoly_eval(es: list[np.ndarray], x: complex, n: int) -> np.ndarray:
    """prod_k (sigma_k - x) from the elementary symmetric polynomials."""
    e_ext = [np.ones_like(es[0])] + es
    acc = np.zeros_like(es[0], dtype=complex)
    for j in range(0, n + 1):
        acc += e_ext[n - j] * ((-x) ** j)
    return acc


def _subset_capacities(h: np.ndarray, subsets: np.ndarray, kind: str,
                       n0: float) -> np.ndarray:
    """Capacity of every candidate subset of ``h`` (N_r x N), vectorized.

    Singular candidates score -inf. Matches capacity_of_set up to float
    round-off.
    """
    n_r = h.shape[0]
    if subsets.shape[1] == n_r:
        # square case: H_I H_I^H and H_I^H H_I share their spectrum, and the
        # latter is a plain submatrix of the all-pairs inner product table
        k = h.conj().T @ h
        w = k[subsets[:, :, None], subsets[:, None, :]]
    else:
        hs = np.moveaxis(h[:, subsets], 0, 1)  # (S, N_r, N_a)
        w = hs @ hs.conj().transpose(0, 2, 1)
    es = _elementary_symmetric(_power_sums(w, n_r))
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "zf":
            det = es[-1]
            tr_inv = es[-2] / det if n_r > 1 else 1.0 / det
            cap = n_r * np.log2(1.0 + 1.0 / (tr_inv * n0))
            bad = ~(det > 0) | ~(tr_inv > 0)
        elif kind == "mmse":
            c = n_r * n0
            fs = _shifted_elementary(es, c, n_r)
            f_n = fs[-1]
            tr_vinv = (fs[-2] if n_r > 1 else np.ones_like(f_n)) / f_n
            if n_r > 2:
                e2_inv = fs[-3] / f_n
            elif n_r == 2:
                e2_inv = 1.0 / f_n
            else:
                e2_inv = np.zeros_like(f_n)
            tr_vinv2 = tr_vinv ** 2 - 2.0 * e2_inv
            t = tr_vinv - c * tr_vinv2  # tr(W (W + cI)^-2)
            beta2 = n_r / t
            a = 1.0 + beta2 / (n_r * n0)
            r = (-c + 1j * c * np.sqrt(a - 1.0)) / a
            q = _charpoly_eval(es, r, n_r)
            cap = (n_r * np.log2(a) + 2.0 * np.log2(np.abs(q))
                   - 2.0 * np.log2(f_n))
            bad = ~(t > 0) | ~(f_n > 0)
        else:
            raise ValueError(f"unknown precoder kind {kind!r}")
    cap = np.where(bad | ~np.isfinite(cap), -np.inf, cap)
    return cap


# ---------------------------------------------------------------------------
# batch variants for the Monte Carlo engine
# ---------------------------------------------------------------------------

def _batch_gram_inverse(hb: np.ndarray, active: np.ndarray):
    """Masked Gram inverses for a stack of channels.

    Returns (inverse (B, N_r, N_r), failed (B,)) where failed flags trials
    whose 1-norm condition estimate exceeds the singularity threshold.
    """
    n_r = hb.shape[1]
    gram = np.einsum("brn,bqn,bn->brq", hb, hb.conj(), active.astype(float))
    eye = np.broadcast_to(np.eye(n_r), gram.shape)
    failed = np.zeros(hb.shape[0], dtype=bool)
    try:
        inv = np.linalg.solve(gram, eye)
    except np.linalg.LinAlgError:
        inv = np.empty_like(gram)
        for b in range(hb.shape[0]):
            try:
                inv[b] = np.linalg.solve(gram[b], np.eye(n_r))
            except np.linalg.LinAlgError:
                inv[b] = np.nan
                failed[b] = True
    norm1 = np.abs(gram).sum(axis=1).max(axis=1)
    norm1_inv = np.abs(inv).sum(axis=1).max(axis=1)
    cond = norm1 * norm1_inv
    failed |= ~np.isfinite(cond) | (cond > MAX_CONDITION)
    return inv, failed


def _batch_tmd(hb: np.ndarray, n_a: int, active: np.ndarray | None = None):
    """Greedy trace-minimizing removal on a stack of channels.

    ``active`` optionally restricts the starting set per trial (all ports
    when omitted); every row must hold the same count. Returns
    (indices (B, n_a) 0-based ascending, failed (B,)).
    """
    b, n_r, n = hb.shape
    act = np.ones((b, n), dtype=bool) if active is None else active.copy()
    start = int(act[0].sum())
    inv, failed = _batch_gram_inverse(hb, act)
    for _ in range(start - n_a):
        v = inv @ hb  # (B, N_r, N)
        num = np.einsum("brn,brn->bn", v.conj(), v).real
        den = 1.0 - np.einsum("brn,brn->bn", hb.conj(), v).real
        cost = np.where(act & (den > REMOVAL_EPS),
                        num / np.maximum(den, REMOVAL_EPS), np.inf)
        j = np.argmin(cost, axis=1)
        bad = ~np.isfinite(np.take_along_axis(cost, j[:, None], 1)[:, 0])
        failed |= bad
        # dead rows still must shed exactly one active port to keep counts
        j = np.where(bad, np.argmax(act, axis=1), j)
        vj = np.take_along_axis(v, j[:, None, None], axis=2)[:, :, 0]
        dj = np.take_along_axis(den, j[:, None], axis=1)[:, 0]
        dj = np.where(np.abs(dj) > REMOVAL_EPS, dj, 1.0)  # dead rows only
        inv = inv + vj[:, :, None] * vj.conj()[:, None, :] / dj[:, None, None]
        np.put_along_axis(act, j[:, None], False, axis=1)
    idx = np.nonzero(act)[1].reshape(b, n_a)
    return idx, failed


def _batch_mce_stage1(hb: np.ndarray, pairs: SortedPairArrays,
                      n_b: int) -> np.ndarray:
    """Stage-one survivor masks (B, N) for a stack of channels."""
    b, _, n = hb.shape
    pf = pairs.first.astype(np.intp) - 1
    ps = pairs.second.astype(np.intp) - 1
    inner = np.abs(np.einsum("brn,brm->bnm", hb.conj(), hb))
    norms2 = np.einsum("brn,brn->bn", hb.conj(), hb).real
    masks = np.empty((b, n), dtype=bool)
    for t in range(b):
        alive = np.ones(pf.size, dtype=bool)
        for _ in range(n - n_b):
            window = np.flatnonzero(alive)[:n_b]
            a, bb = pf[window], ps[window]
            j = int(np.argmax(inner[t, a, bb]))
            lo, hi = int(a[j]), int(bb[j])
            removed = lo if norms2[t, hi] > norms2[t, lo] else hi
            alive &= (pf != removed) & (ps != removed)
        mask = np.zeros(n, dtype=bool)
        mask[pf[alive]] = True
        mask[ps[alive]] = True
        masks[t] = mask
    return masks


def _batch_optimal(hb: np.ndarray, n_a: int, kind: str, n0_sel: float):
    """Exhaustive selection per trial; returns (indices (B, n_a), failed)."""
    b, _, n = hb.shape
    subsets = _subset_table(n, n_a)
    idx = np.empty((b, n_a), dtype=np.intp)
    failed = np.zeros(b, dtype=bool)
    for t in range(b):
        scores = _subset_capacities(hb[t], subsets, kind, n0_sel)
        best = int(np.argmax(scores))
        if not np.isfinite(scores[best]):
            failed[t] = True
            idx[t] = subsets[0]
        else:
            idx[t] = subsets[best]
    return idx, failed
