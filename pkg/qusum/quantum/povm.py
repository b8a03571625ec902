#!/usr/bin/env python
# -*- coding : utf-8 -*-

"""Block measurements on l-copy qubit streams and the measured relative
entropy they achieve.

The measurement first reads the label j (and the multiplicity label) and
then measures the spin-j block in the basis d^j(eta_j)|j, m>. With
eta_j = 0 for every block this is the state-independent measurement that
depends only on the pre-change state.
"""

import warnings
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag, expm
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp, xlogy

from ..detection.engine import LikelihoodModel
from ..system.exceptions import DimensionError, UndetectableChangeError
from ..system.utils import clipProbabilities, highprecisionexp
from . import thresholds as th
from .qmath import (
    DensityMatrix,
    HermitianOperator,
    ProbabilityVector,
    qubit_state,
    quantum_relative_entropy,
    renyi_relative_entropy,
    support_contained,
)
from .schur import Block, BlockDecomposition, block_labels, canonical_frame, rotated_block_state, wigner_d


class QubitPair:
    """Pre/post-change qubit pair in the canonical frame: rho has Bloch
    vector r0 along z and sigma has Bloch vector r1 at angle theta in the
    x-z plane.

    Attributes
    ----------
    r0, r1 : float
        Bloch lengths in [0, 1]
    theta : float
        Relative angle in radians
    """

    def __init__(self, r0: float, r1: float, theta: float) -> None:
        for name, val in (("r0", r0), ("r1", r1)):
            if not 0 <= val <= 1:
                raise ValueError("{} must lie in [0, 1], got {}".format(name, val))
        if not np.isfinite(theta):
            raise ValueError("theta must be finite, got {}".format(theta))
        self.r0 = float(r0)
        self.r1 = float(r1)
        self.theta = float(theta)

    @classmethod
    def canonical(cls) -> "QubitPair":
        """The default experiment pair r0 = r1 = 0.9, theta = pi/4."""
        return cls(0.9, 0.9, np.pi / 4)

    @classmethod
    def from_states(cls, rho, sigma) -> "QubitPair":
        return cls(*canonical_frame(rho, sigma))

    @property
    def rho(self) -> DensityMatrix:
        return qubit_state(self.r0, 0.0)

    @property
    def sigma(self) -> DensityMatrix:
        return qubit_state(self.r1, self.theta)

    def pre_blocks(self, l: int) -> BlockDecomposition:
        return rotated_block_state(self.r0, 0.0, l)

    def post_blocks(self, l: int) -> BlockDecomposition:
        return rotated_block_state(self.r1, self.theta, l)

    def relative_entropy(self) -> float:
        """D(sigma||rho) in nats."""
        return quantum_relative_entropy(self.sigma, self.rho)

    def to_json(self) -> dict:
        return {"r0": self.r0, "r1": self.r1, "theta": self.theta}

    def __repr__(self) -> str:
        return "QubitPair(r0={}, r1={}, theta={})".format(self.r0, self.r1, self.theta)


class BlockMeasurement:
    """Per-block rotation angles of a Schur-then-rotated-basis POVM.

    Attributes
    ----------
    l : int
        Copy count
    angles : dict
        2j -> eta_j in [0, pi)
    """

    def __init__(self, l: int, angles: Dict[int, float]) -> None:
        expected = set(block_labels(l))
        if set(angles) != expected:
            raise DimensionError(
                "Measurement for l = {} needs angles for 2j in {}, got {}".format(l, sorted(expected), sorted(angles))
            )
        for two_j, eta in angles.items():
            if not 0 <= eta < np.pi:
                raise ValueError("Angle for 2j = {} must lie in [0, pi), got {}".format(two_j, eta))
        self.l = int(l)
        self.angles = {k: float(angles[k]) for k in sorted(angles, reverse=True)}

    def is_hayashi(self) -> bool:
        return all(eta == 0 for eta in self.angles.values())

    def to_json(self) -> dict:
        return {"l": self.l, "angles": {str(k): v for k, v in self.angles.items()}}

    def __repr__(self) -> str:
        return "BlockMeasurement(l={}, angles={})".format(self.l, self.angles)


class OutcomePair:
    """Pre- and post-change outcome distributions of a block measurement.

    Attributes
    ----------
    l : int
        Copies per measured block
    outcomes : list of tuple
        (2j, 2m) outcome labels
    log_p, log_q : ndarray(dtype=float)
        Log-probabilities (-inf for impossible outcomes)
    p, q : ProbabilityVector
        Exponentiated distributions
    """

    def __init__(self, l: int, outcomes: List[Tuple[int, int]], log_p: np.ndarray, log_q: np.ndarray) -> None:
        if len(outcomes) != len(log_p) or len(outcomes) != len(log_q):
            raise DimensionError("Outcome labels and log-probabilities differ in length")
        self.l = int(l)
        self.outcomes = list(outcomes)
        self.log_p = np.asarray(log_p, dtype=float)
        self.log_q = np.asarray(log_q, dtype=float)
        self.p = ProbabilityVector(clipProbabilities(highprecisionexp(self.log_p)), self.outcomes)
        self.q = ProbabilityVector(clipProbabilities(highprecisionexp(self.log_q)), self.outcomes)

    def divergence(self) -> float:
        """D(q||p) of the block outcomes, evaluated in the log domain."""
        return _kl_from_logs(self.log_q, self.log_p)

    @property
    def per_copy_rate(self) -> float:
        return self.divergence() / self.l

    def __repr__(self) -> str:
        return "OutcomePair(l={}, outcomes={}, per_copy_rate={:.6g})".format(
            self.l, len(self.outcomes), self.per_copy_rate
        )


class VariationalResult:
    """Solution of the variational program for the measured relative
    entropy of l-copy states.

    Attributes
    ----------
    l : int
    value : float
        D_M of the l-copy pair in nats (not per copy)
    omegas : dict
        2j -> optimal block of omega in the |j, m> basis
    iterations : int
        Total ascent iterations over all blocks
    grad_norm : float
        Largest final scaled gradient norm over all blocks
    converged : bool
    """

    def __init__(
        self,
        l: int,
        value: float,
        omegas: Dict[int, np.ndarray],
        iterations: int,
        grad_norm: float,
        converged: bool,
    ) -> None:
        self.l = int(l)
        self.value = float(value)
        self.omegas = omegas
        self.iterations = int(iterations)
        self.grad_norm = float(grad_norm)
        self.converged = bool(converged)

    @property
    def rate(self) -> float:
        """Value per copy."""
        return self.value / self.l

    @property
    def omega(self) -> HermitianOperator:
        mats = [self.omegas[k] for k in sorted(self.omegas, reverse=True)]
        M = block_diag(*mats)
        return HermitianOperator(0.5 * (M + M.conj().T))

    def __repr__(self) -> str:
        return "VariationalResult(value={:.10g}, iterations={}, grad_norm={:.3e}, converged={})".format(
            self.value, self.iterations, self.grad_norm, self.converged
        )


def _kl_from_logs(log_q: np.ndarray, log_p: np.ndarray) -> float:
    q = highprecisionexp(log_q)
    keep = q > 0
    if np.any(np.isneginf(log_p[keep])):
        return np.inf
    return float(np.sum(q[keep] * (log_q[keep] - log_p[keep])))


def _checkpair(pre: BlockDecomposition, post: BlockDecomposition) -> None:
    if pre.l != post.l:
        raise DimensionError("Pre- and post-change decompositions have l = {} and l = {}".format(pre.l, post.l))


def hayashi_measurement(l: int) -> BlockMeasurement:
    """Block measurement with every angle zero: the |j, m> basis of the
    pre-change state, independent of any post-change state.

    Parameters
    ----------
    l : int
        Copy count, >= 1

    Returns
    -------
    BlockMeasurement
    """
    return BlockMeasurement(l, {k: 0.0 for k in block_labels(l)})


def _block_logs(pre: Block, post: Block, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    lognu = np.log(pre.multiplicity)
    return lognu + pre.log_outcome_probs(eta), lognu + post.log_outcome_probs(eta)


def outcome_distribution(pre: BlockDecomposition, post: BlockDecomposition, meas: BlockMeasurement) -> OutcomePair:
    """Outcome distributions P(j, m) = nu_j <j,m| d(eta_j)^T B_j d(eta_j) |j,m>
    under the pre- and post-change blocks.
    Classification: Function

    Parameters
    ----------
    pre : BlockDecomposition
        Pre-change l-copy state
    post : BlockDecomposition
        Post-change l-copy state
    meas : BlockMeasurement
        Rotation angle per block

    Returns
    -------
    OutcomePair
        Outcomes ordered by descending 2j then descending 2m
    """
    _checkpair(pre, post)
    if meas.l != pre.l:
        raise DimensionError("Measurement is for l = {} but the states have l = {}".format(meas.l, pre.l))
    outcomes, logp, logq = [], [], []
    for two_j in pre.blocks:
        lp, lq = _block_logs(pre.block(two_j), post.block(two_j), meas.angles[two_j])
        outcomes.extend((two_j, two_j - 2 * i) for i in range(two_j + 1))
        logp.append(lp)
        logq.append(lq)
    return OutcomePair(pre.l, outcomes, np.concatenate(logp), np.concatenate(logq))


def measured_rate(pre: BlockDecomposition, post: BlockDecomposition, meas: BlockMeasurement) -> float:
    """Per-copy measured relative entropy D(q||p)/l of a block measurement."""
    return outcome_distribution(pre, post, meas).per_copy_rate


def _block_objective(pre: Block, post: Block, eta: float) -> float:
    lp, lq = _block_logs(pre, post, eta)
    return _kl_from_logs(lq, lp)


def _optimize_block(pre: Block, post: Block) -> float:
    if pre.two_j == 0 or not np.isfinite(post.log_trace()):
        return 0.0
    step = np.pi / th.__anglegrid__
    grid = step * np.arange(th.__anglegrid__)
    vals = np.array([_block_objective(pre, post, eta) for eta in grid])
    k = int(np.argmax(vals))
    best_eta, best_val = float(grid[k]), float(vals[k])
    if not np.isfinite(best_val):
        return best_eta
    res = minimize_scalar(
        lambda eta: -_block_objective(pre, post, eta),
        bounds=(best_eta - step, best_eta + step),
        method="bounded",
        options={"xatol": th.__angletol__},
    )
    if -res.fun > best_val + 1e-14 * max(1.0, abs(best_val)):
        best_eta = float(np.mod(res.x, np.pi))
        if best_eta >= np.pi:
            best_eta = 0.0
    return best_eta


def optimize_angles(pre: BlockDecomposition, post: BlockDecomposition) -> BlockMeasurement:
    """Finds the rotation angle of every block that maximizes the outcome
    divergence D(q||p).
    Classification: Function

    The j-marginal of the outcomes does not depend on the angles, so
    D(q||p) = D(q_J||p_J) + sum_j q_J(j) D(q_{M|j}||p_{M|j}) splits into
    independent one-dimensional problems. Each is searched on a coarse
    grid over [0, pi) and refined between the neighbours of the best grid
    point; ties resolve to the smallest angle.

    Parameters
    ----------
    pre : BlockDecomposition
    post : BlockDecomposition

    Returns
    -------
    BlockMeasurement
        The j-angle-optimized measurement
    """
    _checkpair(pre, post)
    angles = {two_j: _optimize_block(pre.block(two_j), post.block(two_j)) for two_j in pre.blocks}
    return BlockMeasurement(pre.l, angles)


def grid_oracle_single_copy(rho, sigma, grid_size: int = 720) -> float:
    """Largest outcome divergence over single-qubit projective
    measurements, found by sweeping the measurement axis through the
    plane of the two Bloch vectors and refining around the best point.

    Parameters
    ----------
    rho : DensityMatrix
        Pre-change qubit state
    sigma : DensityMatrix
        Post-change qubit state
    grid_size : int, optional
        Number of axis angles over [0, pi) (Default: 720)

    Returns
    -------
    float
        Measured relative entropy in nats
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    if not isinstance(sigma, DensityMatrix):
        sigma = DensityMatrix(sigma)
    if rho.dim != 2 or sigma.dim != 2:
        raise DimensionError("The single-copy oracle needs qubit states")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2, got {}".format(grid_size))
    r0, r1, theta = canonical_frame(rho, sigma)

    def kl(phi):
        p = 0.5 * (1 + r0 * np.cos(phi) * np.array([1.0, -1.0]))
        q = 0.5 * (1 + r1 * np.cos(phi - theta) * np.array([1.0, -1.0]))
        return float(np.sum(xlogy(q, q) - xlogy(q, p))) if np.all(p[q > 0] > 0) else np.inf

    step = np.pi / grid_size
    grid = step * np.arange(grid_size)
    vals = np.array([kl(phi) for phi in grid])
    k = int(np.argmax(vals))
    if not np.isfinite(vals[k]):
        return np.inf
    res = minimize_scalar(
        lambda phi: -kl(phi), bounds=(grid[k] - step, grid[k] + step), method="bounded", options={"xatol": 1e-10}
    )
    return max(float(vals[k]), float(-res.fun))


# Variational program


def _factor(blk: Block) -> Tuple[np.ndarray, np.ndarray]:
    """Trace-normalized spectrum and eigenvectors of a block matrix."""
    if blk.log_weights is not None:
        lw = blk.log_weights
        lam = highprecisionexp(lw - logsumexp(lw))
        lam = np.where(np.isfinite(lw), np.maximum(lam, np.finfo(float).tiny), 0.0)
        return lam, wigner_d(blk.two_j, blk.theta).entries
    M = blk.matrix
    lam, Q = np.linalg.eigh(0.5 * (M + M.conj().T))
    lam = np.clip(lam, 0, None)
    return lam / lam.sum(), Q


def _quadratic(lam: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Diagonal of X^dag diag(lam) X as a sum of non-negative terms."""
    return np.real(np.einsum("m,mk->k", lam, np.abs(X) ** 2))


def _refit(lams, lamr, BU, U):
    s = _quadratic(lams, BU)
    r = _quadratic(lamr, U)
    if np.any((r <= 0) & (s > 0)):
        return s, r, None, np.inf
    w = np.where(s > 0, s / np.where(r > 0, r, 1.0), th.__posfloor__)
    w = np.maximum(w, th.__posfloor__)
    keep = s > 0
    value = float(np.sum(s[keep] * np.log(s[keep] / r[keep])))
    return s, r, w, value


def _rotation_gradient(lams, lamr, BU, U, w):
    """Daleckii-Krein gradient of the objective in omega's eigenbasis and
    the scaled rotation generator it induces."""
    sig = BU.conj().T @ (lams[:, None] * BU)
    rho = U.conj().T @ (lamr[:, None] * U)
    logw = np.log(w)
    dw = w[:, None] - w[None, :]
    dl = logw[:, None] - logw[None, :]
    close = np.abs(dw) <= 1e-12 * np.maximum(w[:, None], w[None, :])
    gamma = np.where(close, 1.0 / np.maximum(w[:, None], w[None, :]), dl / np.where(close, 1.0, dw))
    G = gamma * sig - rho
    root = np.sqrt(w[:, None] * w[None, :])
    A = (w[None, :] - w[:, None]) / (w[None, :] + w[:, None]) * root * G
    A = np.real(A)
    slope = float(np.sum((w[None, :] - w[:, None]) * np.real(G) * A))
    return A, slope


def _split_degenerate(lamr: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Orthogonal basis that diagonalizes the pre-change block (already
    diagonal) and, within each of its degenerate eigenspaces, the
    post-change block S."""
    n = lamr.size
    U = np.eye(n)
    start = 0
    for k in range(1, n + 1):
        if k == n or abs(lamr[k] - lamr[start]) > 1e-12 * max(abs(lamr[start]), 1e-300):
            if k - start > 1:
                _, V = np.linalg.eigh(S[start:k, start:k])
                U[start:k, start:k] = V
            start = k
    return U


def _solve_block(pre: Block, post: Block, init: Union[np.ndarray, None], tol: float, maxiter: int):
    """Maximizes tr[s log w] - tr[r w] + 1 for the trace-normalized blocks;
    omega is kept as U diag(w) U^T in the eigenbasis of the pre-change
    block so its eigenvalues are never recovered from an ill-conditioned
    dense matrix."""
    lamr, Qr = _factor(pre)
    lams, Qs = _factor(post)
    B = np.real_if_close(Qs.conj().T @ Qr)
    n = lamr.size
    if init is None:
        U = _split_degenerate(lamr, np.real(B.conj().T @ (lams[:, None] * B)))
    else:
        _, U = np.linalg.eigh(np.real(Qr.conj().T @ init @ Qr))
    BU = B @ U
    _, _, w, f = _refit(lams, lamr, BU, U)
    if w is None:
        return np.inf, None, 0, 0.0, True
    steps = 0
    gnorm = 0.0
    converged = True
    t = 1.0
    while n > 1:
        A, slope = _rotation_gradient(lams, lamr, BU, U, w)
        gnorm = float(np.linalg.norm(A))
        if gnorm <= tol:
            break
        if steps >= maxiter:
            converged = False
            break
        t = min(2 * t, 1e3)
        accepted = False
        while t >= 1e-16:
            Un = U @ expm(t * A)
            BUn = B @ Un
            _, _, wn, fn = _refit(lams, lamr, BUn, Un)
            if wn is not None and fn >= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # stalled at machine precision
            break
        U, BU, w, f = Un, BUn, wn, fn
        steps += 1
    omega = Qr @ (U * w) @ U.T @ Qr.conj().T
    return f, omega, steps, gnorm, converged


def variational_measured_entropy(
    pre: BlockDecomposition,
    post: BlockDecomposition,
    init: Union[Dict[int, np.ndarray], None] = None,
    tol: float = th.__gradtol__,
    maxiter: int = th.__maxiter__,
) -> VariationalResult:
    """Measured relative entropy D_M(sigma^l||rho^l) from the variational
    formula sup_{omega > 0} tr[sigma log omega] - tr[rho omega] + 1 with
    omega block diagonal.

    Each block is solved on trace-normalized states; the block weights
    then combine as sum_j q_J(j) [log(q_J(j)/p_J(j)) + D_M(sigma_j||rho_j)].
    Within a block, omega = U diag(w) U^T is improved by alternating the
    exact eigenvalue refit w_k = <u_k|sigma|u_k> / <u_k|rho|u_k> with
    rotation steps along the commutator of omega with the Daleckii-Krein
    gradient of tr[sigma log omega] - tr[rho omega], accepted by Armijo
    backtracking. Every iterate is positive definite with smallest
    eigenvalue at least 1e-14.

    Parameters
    ----------
    pre : BlockDecomposition
        Pre-change l-copy state
    post : BlockDecomposition
        Post-change l-copy state
    init : dict, optional
        2j -> positive definite starting block; the identity is used
        when omitted
    tol : float, optional
        Scaled gradient norm at which a block is converged (Default: 1e-8)
    maxiter : int, optional
        Iteration cap per block (Default: 10000)

    Returns
    -------
    VariationalResult
        Best value found; `converged` is False when any block hit the
        iteration cap
    """
    _checkpair(pre, post)
    logp_j = {k: b.log_trace() + np.log(b.multiplicity) for k, b in pre.blocks.items()}
    logq_j = {k: b.log_trace() + np.log(b.multiplicity) for k, b in post.blocks.items()}
    total = 0.0
    omegas = {}
    iterations = 0
    gmax = 0.0
    converged = True
    for two_j in pre.blocks:
        lq, lp = logq_j[two_j], logp_j[two_j]
        n = two_j + 1
        if np.isneginf(lq):
            omegas[two_j] = th.__posfloor__ * np.eye(n)
            continue
        if np.isneginf(lp):
            total = np.inf
            omegas[two_j] = np.full((n, n), np.nan)
            continue
        start = None if init is None else init.get(two_j)
        val, omega, it, gnorm, ok = _solve_block(pre.block(two_j), post.block(two_j), start, tol, maxiter)
        qj = float(np.exp(lq))
        total += qj * (lq - lp + val)
        omegas[two_j] = np.exp(lq - lp) * omega if omega is not None else np.full((n, n), np.nan)
        iterations += it
        gmax = max(gmax, gnorm)
        if not ok:
            warnings.warn(
                "Variational solve of block 2j = {} stopped after {} iterations with gradient {:.2e}".format(
                    two_j, it, gnorm
                )
            )
        converged = converged and ok
    return VariationalResult(pre.l, total, omegas, iterations, gmax, converged)


def hayashi_lower_bound(D: float, l: int, d: int = 2) -> float:
    """Lower end of the sandwich D - (d - 1) log(l + 1) / l obeyed by the
    per-copy rate of the Hayashi measurement."""
    if l < 1:
        raise ValueError("Copy count l must be at least 1, got {}".format(l))
    return D - (d - 1) * np.log(l + 1) / l


def sufficient_block_length(rho, sigma, eps: float, lmax: int = 2**40) -> int:
    """Smallest block length l for which the closed-form sufficient
    condition

        (1 - eps/2) D - (1 - eps/2) 4 sqrt(2) (D_3/2 + 2) log(2/eps) / sqrt(l)
            - (1 - eps) log(2) / l >= (1 - eps) D

    guarantees D_M(sigma^l||rho^l) / l >= (1 - eps) D(sigma||rho).

    Units follow the closed form as stated: D is the relative entropy in
    nats per copy, D_3/2 is the Petz Renyi divergence of order 3/2 in
    bits per copy and log is natural. Feeding D_3/2 in nats instead
    gives a smaller l. The result is an upper bound on the true minimal
    l, not the minimum itself.

    Parameters
    ----------
    rho : DensityMatrix
        Pre-change state
    sigma : DensityMatrix
        Post-change state
    eps : float
        Tolerated rate loss in (0, 1)
    lmax : int, optional
        Search ceiling (Default: 2**40)

    Returns
    -------
    int
        Block length l in copies per block (a count of qubits, >= 1)
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1), got {}".format(eps))
    if not support_contained(sigma, rho):
        raise ValueError("supp(sigma) is not contained in supp(rho); the divergence is infinite")
    D = quantum_relative_entropy(sigma, rho)
    if D <= th.__cutoff__:
        raise UndetectableChangeError("D(sigma||rho) = {:.3e}; there is no change to detect".format(D))
    d32 = renyi_relative_entropy(sigma, rho, 1.5) / np.log(2)

    def margin(l):
        return (
            0.5 * eps * D
            - (1 - eps / 2) * 4 * np.sqrt(2) * (d32 + 2) / np.sqrt(l) * np.log(2 / eps)
            - (1 - eps) * np.log(2) / l
        )

    hi = 1
    while margin(hi) < 0:
        hi *= 2
        if hi > lmax:
            raise ValueError("No block length below {} satisfies the condition".format(lmax))
    lo = hi // 2
    if margin(1) >= 0:
        return 1
    # margin(lo) < 0 <= margin(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if margin(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


class BlockRateRow:
    """One row of the per-copy rate comparison across block lengths."""

    def __init__(
        self,
        l: int,
        rate_hayashi: float,
        rate_optimized: float,
        rate_variational: float,
        relative_entropy: float,
        lower_bound: float,
        converged: bool = True,
    ) -> None:
        self.l = l
        self.rate_hayashi = rate_hayashi
        self.rate_optimized = rate_optimized
        self.rate_variational = rate_variational
        self.relative_entropy = relative_entropy
        self.lower_bound = lower_bound
        self.converged = converged

    def as_row(self) -> list:
        return [
            self.l,
            self.rate_hayashi,
            self.rate_optimized,
            self.rate_variational,
            self.relative_entropy,
            self.lower_bound,
        ]


def block_rate_table(pair: QubitPair, l_list: Sequence[int], variational: bool = True) -> List[BlockRateRow]:
    """Per-copy rates of the Hayashi, j-angle-optimized and variational
    strategies for every block length in `l_list`.

    Parameters
    ----------
    pair : QubitPair
        Canonical pre/post pair
    l_list : sequence of int
        Block lengths
    variational : bool, optional
        Also solve the variational program (Default: True); when False
        the column is NaN

    Returns
    -------
    list of BlockRateRow
    """
    D = pair.relative_entropy()
    rows = []
    for l in l_list:
        pre, post = pair.pre_blocks(l), pair.post_blocks(l)
        hay = measured_rate(pre, post, hayashi_measurement(l))
        opt = measured_rate(pre, post, optimize_angles(pre, post))
        if variational:
            res = variational_measured_entropy(pre, post)
            var, ok = res.rate, res.converged
        else:
            var, ok = np.nan, True
        rows.append(BlockRateRow(l, hay, opt, var, D, hayashi_lower_bound(D, l), ok))
    return rows


def measurement_for(pair: QubitPair, l: int, kind: str) -> Tuple[BlockDecomposition, BlockDecomposition, BlockMeasurement]:
    """Builds the l-copy blocks of a pair and the requested measurement
    ("hayashi" or "optimized")."""
    pre, post = pair.pre_blocks(l), pair.post_blocks(l)
    if kind == "hayashi":
        return pre, post, hayashi_measurement(l)
    if kind == "optimized":
        return pre, post, optimize_angles(pre, post)
    raise ValueError("Unknown measurement kind {}; use hayashi or optimized".format(kind))


def likelihood_model(pair: OutcomePair) -> LikelihoodModel:
    """Detector model of a block measurement, carrying the log-domain
    outcome probabilities so rare outcomes keep full precision."""
    return LikelihoodModel(pair.p, pair.q, log_p=pair.log_p, log_q=pair.log_q)
