#!/usr/bin/env python
# -*- coding : utf-8 -*-

"""Hermitian operator algebra and the state divergences used throughout
qusum. All logarithms are natural (nats) except the max-relative entropy,
which is reported in bits.
"""

from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import rel_entr

from ..system.exceptions import DimensionError, InvariantError
from . import thresholds as th

cutoff = th.__cutoff__


class HermitianOperator:
    """Square complex matrix equal to its conjugate transpose.

    Attributes
    ----------
    entries : ndarray(dtype=complex)
        [dim x dim] read-only matrix entries.
    dim : int
        Matrix dimension.
    """

    def __init__(self, entries) -> None:
        """Constructor for HermitianOperator

        Parameters
        ----------
        entries : array_like
            [dim x dim] matrix; must be Hermitian element-wise within
            1e-12.
        """
        if isinstance(entries, HermitianOperator):
            entries = entries.entries
        arr = np.array(entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DimensionError("Operator must be a non-empty square matrix, got shape {}".format(arr.shape))
        dev = np.max(np.abs(arr - arr.conj().T))
        if dev > th.__hermtol__:
            raise InvariantError("Operator is not Hermitian: max |H - H^dag| = {:.3e}".format(dev))
        # symmetrize the round-off away so downstream eigh sees an exact Hermitian
        arr = 0.5 * (arr + arr.conj().T)
        arr.setflags(write=False)
        self.entries = arr

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def isreal(self) -> bool:
        return bool(np.all(self.entries.imag == 0))

    def to_json(self) -> dict:
        """Serializes the operator as ``{"dim", "re", "im"}`` with
        row-major real and imaginary parts."""
        return {
            "dim": int(self.dim),
            "re": self.entries.real.reshape(-1).tolist(),
            "im": self.entries.imag.reshape(-1).tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "HermitianOperator":
        dim = int(data["dim"])
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data["im"], dtype=float)
        if re.size != dim * dim or im.size != dim * dim:
            raise DimensionError("JSON operator of dim {} needs {} entries per part".format(dim, dim * dim))
        return cls((re + 1j * im).reshape(dim, dim))

    def __repr__(self) -> str:
        return "{}(dim={})".format(type(self).__name__, self.dim)


class DensityMatrix:
    """Positive semidefinite, unit-trace operator.

    Attributes
    ----------
    op : HermitianOperator
        Underlying Hermitian operator.
    """

    def __init__(self, entries) -> None:
        """Constructor for DensityMatrix

        Parameters
        ----------
        entries : array_like or HermitianOperator
            [d x d] matrix; eigenvalues must be >= -1e-12 and the trace
            equal to one within 1e-12.
        """
        if isinstance(entries, DensityMatrix):
            entries = entries.op
        self.op = HermitianOperator(entries)
        tr = np.trace(self.op.entries)
        if abs(tr - 1) > th.__tracetol__:
            raise InvariantError("Density matrix trace is {} instead of 1".format(tr.real))
        lmin = np.linalg.eigvalsh(self.op.entries).min()
        if lmin < -th.__psdtol__:
            raise InvariantError("Density matrix has negative eigenvalue {:.3e}".format(lmin))

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries

    @property
    def dim(self) -> int:
        return self.op.dim

    def to_json(self) -> dict:
        return self.op.to_json()

    @classmethod
    def from_json(cls, data: dict) -> "DensityMatrix":
        return cls(HermitianOperator.from_json(data))

    def __repr__(self) -> str:
        return "DensityMatrix(dim={})".format(self.dim)


class SpectralDecomposition:
    """Eigen-decomposition of a Hermitian operator with eigenvalues in
    descending order and the phase of every eigenvector fixed so that its
    first non-negligible component is real and positive.

    Attributes
    ----------
    eigenvalues : ndarray(dtype=float)
        Descending real eigenvalues.
    eigenvectors : ndarray
        Orthonormal eigenvectors as columns.
    """

    def __init__(self, eigenvalues: np.ndarray, eigenvectors: np.ndarray) -> None:
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors

    def reconstruct(self) -> np.ndarray:
        """Returns sum_k lambda_k v_k v_k^dag."""
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def apply(self, func, cut: Union[float, None] = None) -> np.ndarray:
        """Applies a scalar function to the spectrum. With `cut` given,
        only eigenvalues above it are mapped and the remaining ones are
        set to zero, so functions undefined at zero (log, negative
        powers) are evaluated on the support only."""
        lam = self.eigenvalues
        if cut is None:
            vals = func(lam)
        else:
            keep = lam > cut
            vals = np.zeros_like(lam)
            vals[keep] = func(lam[keep])
        V = self.eigenvectors
        return (V * vals) @ V.conj().T

    def support(self, cut: float = cutoff) -> np.ndarray:
        """Returns the eigenvectors (columns) with eigenvalue above `cut`."""
        return self.eigenvectors[:, self.eigenvalues > cut]


class ProbabilityVector:
    """Discrete probability distribution over labelled outcomes.

    Attributes
    ----------
    probs : ndarray(dtype=float)
        Non-negative read-only probabilities summing to one.
    labels : tuple
        Outcome identifiers, one per probability.
    """

    def __init__(self, probs, labels: Union[Sequence, None] = None) -> None:
        arr = np.array(probs, dtype=float).reshape(-1)
        if arr.size == 0:
            raise InvariantError("Probability vector is empty")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvariantError("Probability vector has negative or non-finite entries: {}".format(arr))
        if abs(arr.sum() - 1) > th.__probtol__:
            raise InvariantError("Probabilities sum to {} instead of 1".format(arr.sum()))
        if labels is None:
            labels = tuple(range(arr.size))
        labels = tuple(labels)
        if len(labels) != arr.size:
            raise DimensionError("{} labels given for {} probabilities".format(len(labels), arr.size))
        arr.setflags(write=False)
        self.probs = arr
        self.labels = labels

    def __len__(self) -> int:
        return self.probs.size

    def index(self, label) -> int:
        """Returns the position of an outcome label."""
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError("Outcome {} is not in the alphabet".format(label)) from None

    def __repr__(self) -> str:
        return "ProbabilityVector({})".format(np.array2string(self.probs, precision=6))


def _asoperator(H) -> HermitianOperator:
    if isinstance(H, DensityMatrix):
        return H.op
    if isinstance(H, HermitianOperator):
        return H
    return HermitianOperator(H)


def _asdensity(rho) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    return DensityMatrix(rho)


def _checkpair(sigma, rho) -> Tuple[DensityMatrix, DensityMatrix]:
    sigma = _asdensity(sigma)
    rho = _asdensity(rho)
    if sigma.dim != rho.dim:
        raise DimensionError("States have different dimensions: {} and {}".format(sigma.dim, rho.dim))
    return sigma, rho


def spectral_decompose(H) -> SpectralDecomposition:
    """Diagonalizes a Hermitian operator with a deterministic eigenvalue
    order (descending) and eigenvector phase convention (first component
    above 1e-12 in magnitude made real positive).

    Parameters
    ----------
    H : HermitianOperator, DensityMatrix or array_like
        Operator to decompose; raw arrays are validated for Hermiticity.

    Returns
    -------
    SpectralDecomposition
        Eigenvalues and eigenvectors

    Examples
    --------
    eig = spectral_decompose(np.array([[0, 1], [1, 0]]))
    """
    A = _asoperator(H).entries
    if np.all(A.imag == 0):
        A = A.real
    lam, V = np.linalg.eigh(A)
    lam = lam[::-1].copy()
    V = V[:, ::-1].copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        nz = np.flatnonzero(np.abs(col) > th.__phasetol__)
        if nz.size:
            lead = col[nz[0]]
            V[:, k] = col * (np.conj(lead) / np.abs(lead))
    return SpectralDecomposition(lam, V)


def support_contained(sigma, rho) -> bool:
    """Checks supp(sigma) is contained in supp(rho): every eigenvector of
    sigma with eigenvalue above 1e-12 has squared overlap at most 1e-12
    with the orthogonal complement of the support of rho.

    Parameters
    ----------
    sigma : DensityMatrix
    rho : DensityMatrix

    Returns
    -------
    bool
    """
    sigma, rho = _checkpair(sigma, rho)
    S = spectral_decompose(sigma).support()
    R = spectral_decompose(rho).support()
    if S.shape[1] == 0:
        return True
    outside = S - R @ (R.conj().T @ S)
    leak = np.sum(np.abs(outside) ** 2, axis=0)
    return bool(np.all(leak <= cutoff))


def von_neumann_entropy(rho) -> float:
    """Returns -tr[rho log rho] in nats."""
    lam = spectral_decompose(_asdensity(rho)).eigenvalues
    lam = lam[lam > cutoff]
    return float(-np.sum(lam * np.log(lam)))


def quantum_relative_entropy(sigma, rho) -> float:
    """Quantum (Umegaki) relative entropy D(sigma||rho) =
    tr[sigma (log sigma - log rho)].

    Parameters
    ----------
    sigma : DensityMatrix
        First argument (post-change state)
    rho : DensityMatrix
        Reference state (pre-change state)

    Returns
    -------
    float
        Relative entropy in nats; +inf when supp(sigma) is not contained
        in supp(rho)
    """
    sigma, rho = _checkpair(sigma, rho)
    if not support_contained(sigma, rho):
        return np.inf
    ss = spectral_decompose(sigma)
    rs = spectral_decompose(rho)
    lam = ss.eigenvalues[ss.eigenvalues > cutoff]
    neg_entropy = np.sum(lam * np.log(lam))
    keep = rs.eigenvalues > cutoff
    R = rs.eigenvectors[:, keep]
    weights = np.real(np.einsum("ik,ij,jk->k", R.conj(), sigma.matrix, R))
    cross = np.sum(weights * np.log(rs.eigenvalues[keep]))
    return float(neg_entropy - cross)


def max_relative_entropy(sigma, rho) -> float:
    """Max-relative entropy D_max(sigma||rho) = inf{lambda >= 0 :
    sigma <= 2^lambda rho}, in bits.

    Parameters
    ----------
    sigma : DensityMatrix
    rho : DensityMatrix

    Returns
    -------
    float
        log2 of the largest eigenvalue of rho^{-1/2} sigma rho^{-1/2} on
        the support of rho; +inf if the support condition fails
    """
    sigma, rho = _checkpair(sigma, rho)
    if not support_contained(sigma, rho):
        return np.inf
    rs = spectral_decompose(rho)
    keep = rs.eigenvalues > cutoff
    R = rs.eigenvectors[:, keep] / np.sqrt(rs.eigenvalues[keep])
    M = R.conj().T @ sigma.matrix @ R
    lmax = np.linalg.eigvalsh(0.5 * (M + M.conj().T)).max()
    return float(max(0.0, np.log2(lmax)))


def nats_to_bits(x: float) -> float:
    return x / np.log(2)


def bits_to_nats(x: float) -> float:
    return x * np.log(2)


def _checkalpha(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0:
        raise ValueError("Renyi order alpha must be positive, got {}".format(alpha))
    if alpha == 1:
        raise ValueError("Renyi order alpha = 1 is the relative entropy; use quantum_relative_entropy")
    return alpha


def renyi_relative_entropy(sigma, rho, alpha: float) -> float:
    """Petz Renyi relative entropy
    D_alpha(sigma||rho) = log tr[sigma^alpha rho^(1-alpha)] / (alpha - 1).

    Parameters
    ----------
    sigma : DensityMatrix
    rho : DensityMatrix
    alpha : float
        Order in (0, 1) or (1, inf)

    Returns
    -------
    float
        Divergence in nats; +inf when alpha > 1 and the support condition
        fails, or when alpha < 1 and the supports are orthogonal
    """
    alpha = _checkalpha(alpha)
    sigma, rho = _checkpair(sigma, rho)
    if alpha > 1 and not support_contained(sigma, rho):
        return np.inf
    sa = spectral_decompose(sigma).apply(lambda x: x**alpha, cut=cutoff)
    rb = spectral_decompose(rho).apply(lambda x: x ** (1 - alpha), cut=cutoff)
    Q = np.real(np.trace(sa @ rb))
    if Q <= 0:
        return np.inf
    return float(np.log(Q) / (alpha - 1))


def sandwiched_renyi(sigma, rho, alpha: float) -> float:
    """Sandwiched Renyi relative entropy
    D~_alpha(sigma||rho) = log tr[(rho^g sigma rho^g)^alpha] / (alpha - 1)
    with g = (1 - alpha) / (2 alpha).

    Parameters
    ----------
    sigma : DensityMatrix
    rho : DensityMatrix
    alpha : float
        Order in (0, 1) or (1, inf)

    Returns
    -------
    float
        Divergence in nats (same support conventions as
        renyi_relative_entropy)
    """
    alpha = _checkalpha(alpha)
    sigma, rho = _checkpair(sigma, rho)
    if alpha > 1 and not support_contained(sigma, rho):
        return np.inf
    gamma = (1 - alpha) / (2 * alpha)
    rg = spectral_decompose(rho).apply(lambda x: x**gamma, cut=cutoff)
    A = rg @ sigma.matrix @ rg
    lam = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    lam = lam[lam > 0]
    Q = np.sum(lam**alpha)
    if Q <= 0:
        return np.inf
    return float(np.log(Q) / (alpha - 1))


def fidelity(sigma, rho) -> float:
    """Root fidelity tr|sqrt(sigma) sqrt(rho)|."""
    sigma, rho = _checkpair(sigma, rho)
    ss = spectral_decompose(sigma).apply(np.sqrt, cut=0.0)
    rs = spectral_decompose(rho).apply(np.sqrt, cut=0.0)
    return float(np.sum(np.linalg.svd(ss @ rs, compute_uv=False)))


def kl_divergence(q: ProbabilityVector, p: ProbabilityVector) -> float:
    """Classical relative entropy D(q||p) = sum q log(q/p) with
    0 log(0/.) = 0.

    Parameters
    ----------
    q : ProbabilityVector
        First argument (post-change outcome distribution)
    p : ProbabilityVector
        Reference (pre-change outcome distribution)

    Returns
    -------
    float
        Divergence in nats; +inf if q(x) > 0 where p(x) = 0
    """
    if not isinstance(q, ProbabilityVector):
        q = ProbabilityVector(q)
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(p)
    if q.labels != p.labels:
        raise DimensionError("Outcome labels of the two distributions differ")
    return float(np.sum(rel_entr(q.probs, p.probs)))


def hypothesis_testing_relative_entropy(sigma, rho, eps: float) -> float:
    """Hypothesis-testing relative entropy
    D_h^eps(sigma||rho) = -log min{tr[E rho] : tr[E sigma] >= 1 - eps,
    0 <= E <= I}.

    The linear program is solved through its Neyman-Pearson structure:
    the optimal test is E_t = {sigma - t rho > 0} for the multiplier t at
    which tr[E_t sigma] crosses 1 - eps. When the crossing is a jump
    (t is a generalized eigenvalue of the pencil (sigma, rho)) the null
    eigenspace of sigma - t rho is mixed in with the weight that meets
    the constraint exactly.

    Parameters
    ----------
    sigma : DensityMatrix
    rho : DensityMatrix
    eps : float
        Type-I error budget in (0, 1)

    Returns
    -------
    float
        Divergence in nats (+inf if a test with tr[E rho] = 0 exists)
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1), got {}".format(eps))
    sigma, rho = _checkpair(sigma, rho)
    S = sigma.matrix
    R = rho.matrix
    target = 1 - eps
    rnorm = np.abs(np.linalg.eigvalsh(R)).max()

    def split(t):
        lam, V = np.linalg.eigh(S - t * R)
        tol = 1e-9 * max(1.0, t * rnorm)
        return V[:, lam > tol], V[:, np.abs(lam) <= tol]

    def weight(P, A):
        return float(np.real(np.trace(P.conj().T @ A @ P)))

    def g(t):
        lam, V = np.linalg.eigh(S - t * R)
        pos = V[:, lam > cutoff * max(1.0, t * rnorm)]
        return weight(pos, S)

    lo, hi = 0.0, 1.0
    while g(hi) >= target:
        lo = hi
        hi *= 2
        if hi > 1e15:
            return np.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    tstar = 0.5 * (lo + hi)
    pos, null = split(tstar)
    gpos = weight(pos, S)
    gnull = weight(null, S) if null.shape[1] else 0.0
    if gnull > cutoff and gpos < target:
        c = min(1.0, max(0.0, (target - gpos) / gnull))
        beta = weight(pos, R) + c * weight(null, R)
    else:
        beta = weight(pos, R)
    if beta <= 0:
        return np.inf
    return float(-np.log(beta))


def pinching(rho, reference, tol: float = 1e-10) -> np.ndarray:
    """Dephases `rho` in the eigenbasis of `reference`, grouping
    eigenvalues of `reference` that agree within `tol`.

    Parameters
    ----------
    rho : DensityMatrix or array_like
        State to dephase
    reference : DensityMatrix or array_like
        Operator whose eigenprojectors define the pinching

    Returns
    -------
    ndarray
        Pinched matrix sum_k P_k rho P_k
    """
    A = _asoperator(rho).entries
    eig = spectral_decompose(reference)
    lam, V = eig.eigenvalues, eig.eigenvectors
    out = np.zeros_like(A)
    start = 0
    for k in range(1, lam.size + 1):
        if k == lam.size or abs(lam[k] - lam[start]) > tol:
            P = V[:, start:k] @ V[:, start:k].conj().T
            out = out + P @ A @ P
            start = k
    return out


def bloch_vector(rho) -> np.ndarray:
    """Returns the Bloch vector (x, y, z) of a qubit state."""
    rho = _asdensity(rho)
    if rho.dim != 2:
        raise DimensionError("Bloch vectors are defined for qubits only, got dim {}".format(rho.dim))
    M = rho.matrix
    return np.array([2 * M[0, 1].real, -2 * M[0, 1].imag, (M[0, 0] - M[1, 1]).real])


def qubit_state(r: float, theta: float = 0.0) -> DensityMatrix:
    """Qubit state with Bloch vector r (sin theta, 0, cos theta).

    Parameters
    ----------
    r : float
        Bloch length in [0, 1]
    theta : float, optional
        Polar angle from the z axis in the x-z plane (Default: 0)

    Returns
    -------
    DensityMatrix
    """
    if not 0 <= r <= 1:
        raise ValueError("Bloch length r must lie in [0, 1], got {}".format(r))
    x = r * np.sin(theta)
    z = r * np.cos(theta)
    return DensityMatrix(np.array([[1 + z, x], [x, 1 - z]]) / 2)


def random_density_matrix(
    dim: int, rng: np.random.Generator, rank: Union[int, None] = None, real: bool = False
) -> DensityMatrix:
    """Draws a random state from the induced (Ginibre) measure.

    Parameters
    ----------
    dim : int
        Hilbert space dimension
    rng : numpy.random.Generator
        Source of randomness
    rank : int, optional
        Rank of the state (Default: full rank)
    real : bool, optional
        Draw a real symmetric state (Default: False)

    Returns
    -------
    DensityMatrix
    """
    if rank is None:
        rank = dim
    if not 1 <= rank <= dim:
        raise ValueError("Rank must lie in [1, {}], got {}".format(dim, rank))
    G = rng.standard_normal((dim, rank))
    if not real:
        G = G + 1j * rng.standard_normal((dim, rank))
    M = G @ G.conj().T
    M = 0.5 * (M + M.conj().T)
    return DensityMatrix(M / np.trace(M).real)
