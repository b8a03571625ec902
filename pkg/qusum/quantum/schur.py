#!/usr/bin/env python
# -*- coding : utf-8 -*-

"""Angular-momentum (Schur) block form of l-fold i.i.d. qubit states.

A qubit state with Bloch vector r(sin theta, 0, cos theta) decomposes on l
copies as a direct sum over total angular momentum j of blocks
rho_j (x) I_nu_j. Every block is stored in the |j, m> basis with m running
from j down to -j, as a log-domain diagonal (log_weights) rotated by the
real Wigner matrix d^j(theta) plus a common log_scale, so no block ever
underflows at large l.
"""

from functools import lru_cache
from math import comb
from typing import Dict, List, Tuple, Union

import numpy as np
from scipy.special import logsumexp, xlogy

from ..system.exceptions import DimensionError
from ..system.utils import highprecisionexp
from . import thresholds as th
from .qmath import DensityMatrix, HermitianOperator, bloch_vector


class BlockLabel:
    """Total angular momentum label, stored as the integer 2j.

    Attributes
    ----------
    two_j : int
        Twice the angular momentum
    """

    def __init__(self, two_j: int, l: Union[int, None] = None) -> None:
        two_j = int(two_j)
        if two_j < 0:
            raise ValueError("2j must be non-negative, got {}".format(two_j))
        if l is not None:
            _checklabel(l, two_j)
        self.two_j = two_j

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    def __eq__(self, other) -> bool:
        return isinstance(other, BlockLabel) and other.two_j == self.two_j

    def __hash__(self) -> int:
        return hash(self.two_j)

    def __repr__(self) -> str:
        return "BlockLabel(two_j={})".format(self.two_j)


def _checklabel(l: int, two_j: int) -> None:
    if l < 1:
        raise ValueError("Copy count l must be at least 1, got {}".format(l))
    if two_j < 0 or two_j > l:
        raise ValueError("2j = {} is outside [0, {}]".format(two_j, l))
    if (l - two_j) % 2:
        raise ValueError("2j = {} and l = {} have different parity".format(two_j, l))


def block_labels(l: int) -> List[int]:
    """Returns every valid 2j for l copies in descending order."""
    if l < 1:
        raise ValueError("Copy count l must be at least 1, got {}".format(l))
    return list(range(l, -1, -2))


def multiplicity(l: int, two_j: int) -> int:
    """Number of equivalent irreducible blocks with label j on l qubits,
    nu_j = C(l, l/2 - j) (2j + 1) / (l/2 + j + 1).
    Classification: Function

    Parameters
    ----------
    l : int
        Number of copies
    two_j : int
        Twice the angular momentum; same parity as l and at most l

    Returns
    -------
    int
        Exact multiplicity

    Examples
    --------
    multiplicity(3, 1)  # 2
    """
    _checklabel(l, two_j)
    return comb(l, (l - two_j) // 2) * (two_j + 1) // ((l + two_j) // 2 + 1)


class WignerD:
    """Real Wigner rotation matrix d^j_{m'm}(theta) of spin j about the y
    axis, rows and columns ordered m = j, j-1, ..., -j.

    Attributes
    ----------
    two_j : int
    theta : float
    entries : ndarray(dtype=float)
        [(2j+1) x (2j+1)] orthogonal read-only matrix
    """

    def __init__(self, two_j: int, theta: float, entries: np.ndarray) -> None:
        entries = np.asarray(entries, dtype=float)
        if entries.shape != (two_j + 1, two_j + 1):
            raise DimensionError("Wigner matrix for 2j = {} must be {}x{}".format(two_j, two_j + 1, two_j + 1))
        entries.setflags(write=False)
        self.two_j = int(two_j)
        self.theta = float(theta)
        self.entries = entries

    def __repr__(self) -> str:
        return "WignerD(two_j={}, theta={})".format(self.two_j, self.theta)


@lru_cache(maxsize=256)
def _jy_eigenbasis(two_j: int) -> np.ndarray:
    # columns are eigenvectors of J_y for eigenvalues -j, ..., j
    _, _, jy = spin_matrices(two_j)
    _, vecs = np.linalg.eigh(jy)
    vecs.setflags(write=False)
    return vecs


def _wigner_entries(two_j: int, theta: float) -> np.ndarray:
    n = two_j + 1
    if theta == 0:
        return np.eye(n)
    vecs = _jy_eigenbasis(two_j)
    # exact spectrum of J_y in place of the numerical eigenvalues
    m = np.arange(n) - two_j / 2
    d = (vecs * np.exp(-1j * theta * m)) @ vecs.conj().T
    return np.ascontiguousarray(np.real(d))


def wigner_d(two_j: int, theta: float) -> WignerD:
    """Rotation matrix d^j(theta) = exp(-i theta J_y), evaluated through the
    eigenbasis of J_y.
    Classification: Function

    The eigenvectors of J_y are cached per 2j; each call then costs one
    diagonal phase and a matrix product. The result is orthogonal to
    machine precision at any j, and entries are accurate in absolute
    terms (entries far below 1e-16 are rounding noise).

    Parameters
    ----------
    two_j : int
        Twice the angular momentum, >= 0
    theta : float
        Rotation angle in radians

    Returns
    -------
    WignerD
        Rotation matrix with d^j(0) equal to the identity

    Examples
    --------
    d = wigner_d(1, np.pi).entries  # [[0, -1], [1, 0]]
    """
    two_j = int(two_j)
    if two_j < 0:
        raise ValueError("2j must be non-negative, got {}".format(two_j))
    return WignerD(two_j, theta, _wigner_entries(two_j, float(theta)))


def spin_matrices(two_j: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (J_z, J_+, J_y) of spin j in the descending-m basis with
    Condon-Shortley phases."""
    n = two_j + 1
    idx = np.arange(n)
    jz = np.diag(two_j / 2 - idx)
    jp = np.zeros((n, n))
    k = idx[1:]
    jp[k - 1, k] = np.sqrt(k * (two_j - k + 1))
    jy = (jp - jp.T) / 2j
    return jz, jp, jy


class Block:
    """One angular-momentum block rho_j of an l-copy state; the operator is
    exp(log_scale) * matrix.

    Blocks built from a Bloch length carry their log-domain diagonal
    (log_weights) and rotation angle; blocks extracted numerically carry
    only an explicit matrix.

    Attributes
    ----------
    two_j : int
    multiplicity : int
    log_scale : float
    log_weights : ndarray or None
    theta : float
    """

    def __init__(
        self,
        two_j: int,
        multiplicity: int,
        log_scale: float,
        log_weights: Union[np.ndarray, None] = None,
        theta: float = 0.0,
        matrix: Union[np.ndarray, None] = None,
    ) -> None:
        if (log_weights is None) == (matrix is None):
            raise ValueError("A block is defined by exactly one of log_weights or matrix")
        self.two_j = int(two_j)
        self.multiplicity = int(multiplicity)
        self.log_scale = float(log_scale)
        self.theta = float(theta)
        self.log_weights = None if log_weights is None else np.asarray(log_weights, dtype=float)
        self._matrix = None if matrix is None else np.asarray(matrix)
        if self.log_weights is not None and self.log_weights.size != self.two_j + 1:
            raise DimensionError("Block 2j = {} needs {} log weights".format(self.two_j, self.two_j + 1))

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def matrix(self) -> np.ndarray:
        """Block matrix without the log_scale factor."""
        if self._matrix is not None:
            return self._matrix
        d = wigner_d(self.two_j, self.theta).entries
        return (d * highprecisionexp(self.log_weights)) @ d.T

    @property
    def operator(self) -> np.ndarray:
        """Block operator rho_j including the scale; may underflow."""
        return highprecisionexp(self.log_scale) * self.matrix

    def log_trace(self) -> float:
        """log tr[rho_j] (angle independent)."""
        if self.log_weights is not None:
            return self.log_scale + logsumexp(self.log_weights)
        tr = np.real(np.trace(self._matrix))
        with np.errstate(divide="ignore"):
            return self.log_scale + np.log(max(tr, 0.0))

    def log_outcome_probs(self, eta: float) -> np.ndarray:
        """log <j,m| d(eta)^T rho_j d(eta) |j,m> for m = j, ..., -j; the
        multiplicity is not included."""
        if self.log_weights is not None:
            D = wigner_d(self.two_j, eta - self.theta).entries
            with np.errstate(divide="ignore"):
                logd2 = 2 * np.log(np.abs(D))
            return self.log_scale + logsumexp(logd2 + self.log_weights[:, None], axis=0)
        d = wigner_d(self.two_j, eta).entries
        diag = np.real(np.einsum("km,kn,nm->m", d, self._matrix, d))
        with np.errstate(divide="ignore"):
            return self.log_scale + np.log(np.clip(diag, 0, None))

    def to_json(self) -> dict:
        return {
            "two_j": self.two_j,
            "multiplicity": self.multiplicity,
            "log_scale": self.log_scale,
            "matrix": HermitianOperator(self.matrix).to_json(),
        }

    def __repr__(self) -> str:
        return "Block(two_j={}, multiplicity={}, log_scale={:.6g})".format(
            self.two_j, self.multiplicity, self.log_scale
        )


class BlockDecomposition:
    """Block form rho^{(x)l} = sum_j rho_j (x) I_nu_j of an l-copy qubit
    state.

    Attributes
    ----------
    l : int
        Copy count
    r : float or None
        Bloch length of the generating single-copy state (None for
        numerically extracted decompositions)
    theta : float
        Rotation angle of the generating state
    blocks : dict
        2j -> Block, in descending 2j order
    """

    def __init__(self, l: int, blocks: Dict[int, Block], r: Union[float, None] = None, theta: float = 0.0) -> None:
        for two_j, blk in blocks.items():
            _checklabel(l, two_j)
            if blk.two_j != two_j:
                raise ValueError("Block keyed by 2j = {} carries 2j = {}".format(two_j, blk.two_j))
        self.l = int(l)
        self.r = r
        self.theta = float(theta)
        self.blocks = dict(sorted(blocks.items(), reverse=True))

    @property
    def labels(self) -> List[BlockLabel]:
        return [BlockLabel(k, self.l) for k in self.blocks]

    def block(self, two_j: int) -> Block:
        try:
            return self.blocks[two_j]
        except KeyError:
            raise KeyError("No block with 2j = {} for l = {}".format(two_j, self.l)) from None

    def normalization(self) -> float:
        """Returns sum_j nu_j tr[rho_j], which equals one."""
        logs = [np.log(b.multiplicity) + b.log_trace() for b in self.blocks.values()]
        return float(np.exp(logsumexp(logs)))

    def to_json(self) -> dict:
        return {
            "l": self.l,
            "r": self.r,
            "theta": self.theta,
            "blocks": [b.to_json() for b in self.blocks.values()],
        }

    def __repr__(self) -> str:
        return "BlockDecomposition(l={}, r={}, theta={}, blocks={})".format(
            self.l, self.r, self.theta, list(self.blocks)
        )


def _log_weights(two_j: int, r: float) -> np.ndarray:
    i = np.arange(two_j + 1)
    return xlogy(two_j - i, (1 + r) / 2) + xlogy(i, (1 - r) / 2)


def rotated_block_state(r: float, theta: float, l: int) -> BlockDecomposition:
    """Block form of the l-fold power of the qubit state with Bloch vector
    r(sin theta, 0, cos theta).
    Classification: Function

    Each block is d^j(theta) diag((1+r)/2)^{j+m} ((1-r)/2)^{j-m}) d^j(theta)^T
    times ((1 - r^2)/4)^{l/2 - j}, the last factor kept as a log_scale.

    Parameters
    ----------
    r : float
        Bloch length in [0, 1]
    theta : float
        Angle from the z axis in the x-z plane, radians
    l : int
        Copy count

    Returns
    -------
    BlockDecomposition
    """
    if not 0 <= r <= 1:
        raise ValueError("Bloch length r must lie in [0, 1], got {}".format(r))
    logab = (1 - r * r) / 4
    blocks = {}
    for two_j in block_labels(l):
        blocks[two_j] = Block(
            two_j,
            multiplicity(l, two_j),
            float(xlogy((l - two_j) / 2, logab)),
            log_weights=_log_weights(two_j, r),
            theta=theta,
        )
    return BlockDecomposition(l, blocks, r=float(r), theta=float(theta))


def block_state(r: float, l: int) -> BlockDecomposition:
    """Block form of the l-fold power of the z-diagonal qubit state
    diag((1+r)/2, (1-r)/2)."""
    return rotated_block_state(r, 0.0, l)


def j_marginal(decomp: BlockDecomposition) -> Dict[int, float]:
    """Log-probabilities log(nu_j tr[rho_j]) of observing each label j;
    independent of any rotation applied within the blocks."""
    return {k: float(np.log(b.multiplicity) + b.log_trace()) for k, b in decomp.blocks.items()}


def canonical_frame(rho, sigma) -> Tuple[float, float, float]:
    """Maps a qubit pair to the frame where rho is z-diagonal with its
    Bloch vector along +z and sigma lies in the x-z plane.

    Parameters
    ----------
    rho : DensityMatrix
        Pre-change qubit state
    sigma : DensityMatrix
        Post-change qubit state

    Returns
    -------
    tuple of float
        (r0, r1, theta): Bloch lengths of rho and sigma and the angle
        between their Bloch vectors in [0, pi]
    """
    v0 = bloch_vector(rho)
    v1 = bloch_vector(sigma)
    r0 = float(np.linalg.norm(v0))
    r1 = float(np.linalg.norm(v1))
    if r0 <= th.__cutoff__ or r1 <= th.__cutoff__:
        return min(r0, 1.0), min(r1, 1.0), 0.0
    cosang = np.clip(np.dot(v0, v1) / (r0 * r1), -1.0, 1.0)
    return min(r0, 1.0), min(r1, 1.0), float(np.arccos(cosang))


# Explicit 2^l-dimensional construction, used as an independent check of the
# closed-form blocks above.


def _collective_operators(l: int) -> Tuple[np.ndarray, np.ndarray]:
    sz = np.diag([0.5, -0.5])
    sm = np.array([[0.0, 0.0], [1.0, 0.0]])
    eye = np.eye(2)
    dim = 2**l
    jz = np.zeros((dim, dim))
    jm = np.zeros((dim, dim))
    for k in range(l):
        opz = np.ones((1, 1))
        opm = np.ones((1, 1))
        for q in range(l):
            opz = np.kron(opz, sz if q == k else eye)
            opm = np.kron(opm, sm if q == k else eye)
        jz = jz + opz
        jm = jm + opm
    return jz, jm


def _tensor_power(single: np.ndarray, l: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=single.dtype)
    for _ in range(l):
        out = np.kron(out, single)
    return out


def _irrep_bases(l: int) -> Dict[int, List[np.ndarray]]:
    """For every 2j, the list of nu_j orthonormal bases (2^l x (2j+1))
    spanning the equivalent copies of the spin-j irrep."""
    if l > th.__maxbrute__:
        raise ValueError("Explicit decomposition is limited to l <= {}, got {}".format(th.__maxbrute__, l))
    jz, jm = _collective_operators(l)
    jp = jm.T
    jsq = jm @ jp + jz @ jz + jz
    mz = np.round(2 * np.diag(jz)).astype(int)
    out = {}
    for two_j in block_labels(l):
        sub = np.flatnonzero(mz == two_j)
        lam, U = np.linalg.eigh(jsq[np.ix_(sub, sub)])
        target = two_j / 2 * (two_j / 2 + 1)
        hw = U[:, np.abs(lam - target) < 1e-8]
        copies = []
        for c in range(hw.shape[1]):
            v = np.zeros(2**l)
            v[sub] = hw[:, c]
            cols = [v]
            for i in range(two_j):
                # m = j - i -> m - 1 with coefficient sqrt((j + m)(j - m + 1))
                coef = np.sqrt((two_j - i) * (i + 1))
                cols.append(jm @ cols[-1] / coef)
            copies.append(np.column_stack(cols))
        out[two_j] = copies
    return out


def brute_force_decompose(single, l: int) -> BlockDecomposition:
    """Decomposes the l-fold tensor power of a qubit state by explicit
    ladder-operator construction on the full 2^l-dimensional space.
    Classification: Function

    Parameters
    ----------
    single : DensityMatrix
        Single-copy qubit state
    l : int
        Copy count, at most 6

    Returns
    -------
    BlockDecomposition
        Explicit blocks (log_scale = 0) with counted multiplicities
    """
    if not isinstance(single, DensityMatrix):
        single = DensityMatrix(single)
    if single.dim != 2:
        raise DimensionError("Explicit decomposition needs a qubit state, got dim {}".format(single.dim))
    M = single.matrix
    if np.all(M.imag == 0):
        M = M.real
    big = _tensor_power(M, l)
    blocks = {}
    for two_j, copies in _irrep_bases(l).items():
        V = copies[0]
        blocks[two_j] = Block(two_j, len(copies), 0.0, matrix=V.conj().T @ big @ V)
    return BlockDecomposition(l, blocks)


def brute_force_outcome_probs(single, l: int, angles: Dict[int, float]) -> Dict[Tuple[int, int], float]:
    """Outcome probabilities of the Schur-then-rotated-basis measurement,
    summed explicitly over every multiplicity copy in the 2^l-dimensional
    space.

    Parameters
    ----------
    single : DensityMatrix
        Single-copy qubit state
    l : int
        Copy count, at most 6
    angles : dict
        2j -> rotation angle of the measured basis

    Returns
    -------
    dict
        (2j, 2m) -> probability
    """
    if not isinstance(single, DensityMatrix):
        single = DensityMatrix(single)
    big = _tensor_power(single.matrix, l)
    out = {}
    for two_j, copies in _irrep_bases(l).items():
        d = wigner_d(two_j, angles[two_j]).entries
        probs = np.zeros(two_j + 1)
        for V in copies:
            W = V @ d
            probs += np.real(np.einsum("im,ik,km->m", W.conj(), big, W))
        for i in range(two_j + 1):
            out[(two_j, two_j - 2 * i)] = float(probs[i])
    return out
