import numpy as np
import pytest
from scipy.optimize import linprog

from qusum.quantum import qmath
from qusum.system.exceptions import DimensionError, InvariantError

PURE_0 = np.diag([1.0, 0.0])
PURE_1 = np.diag([0.0, 1.0])
MIXED = np.eye(2) / 2


def random_pairs(n, seed=7, dim=2):
    rng = np.random.default_rng(seed)
    return [(qmath.random_density_matrix(dim, rng), qmath.random_density_matrix(dim, rng)) for _ in range(n)]


def test_hermitian_operator_rejects_nonhermitian():
    """Tests whether a non-Hermitian matrix raises InvariantError"""
    with pytest.raises(InvariantError):
        qmath.HermitianOperator([[0, 1], [0, 0]])


def test_hermitian_operator_rejects_nonsquare():
    """Tests whether a non-square matrix raises DimensionError"""
    with pytest.raises(DimensionError):
        qmath.HermitianOperator(np.zeros((2, 3)))


def test_hermitian_operator_readonly():
    """Tests whether operator entries cannot be modified in place"""
    H = qmath.HermitianOperator(np.eye(2))
    with pytest.raises(ValueError):
        H.entries[0, 0] = 2


def test_hermitian_operator_json():
    """Tests whether an operator survives serialization to JSON"""
    H = qmath.HermitianOperator([[1, 1j], [-1j, 2]])
    back = qmath.HermitianOperator.from_json(H.to_json())
    assert np.allclose(back.entries, H.entries)


def test_density_matrix_trace():
    """Tests whether a matrix with trace other than one raises InvariantError"""
    with pytest.raises(InvariantError):
        qmath.DensityMatrix(np.eye(2))


def test_density_matrix_negative():
    """Tests whether a matrix with a negative eigenvalue raises InvariantError"""
    with pytest.raises(InvariantError):
        qmath.DensityMatrix(np.diag([1.5, -0.5]))


def test_probability_vector_sum():
    """Tests whether probabilities that do not sum to one raise InvariantError"""
    with pytest.raises(InvariantError):
        qmath.ProbabilityVector([0.5, 0.6])


def test_probability_vector_index():
    """Tests whether an unknown outcome label raises KeyError"""
    p = qmath.ProbabilityVector([0.5, 0.5], labels=("up", "down"))
    assert p.index("down") == 1
    with pytest.raises(KeyError):
        p.index("sideways")


def test_spectral_decompose_identity():
    """Tests whether the identity has eigenvalues (1, 1)"""
    eig = qmath.spectral_decompose(np.eye(2))
    assert np.allclose(eig.eigenvalues, [1, 1])


def test_spectral_decompose_diagonal():
    """Tests whether a diagonal state returns its diagonal in descending order"""
    eig = qmath.spectral_decompose(np.diag([0.1, 0.9]))
    assert np.allclose(eig.eigenvalues, [0.9, 0.1])


def test_spectral_decompose_pauli_x():
    """Tests whether Pauli-x decomposes into (1, -1) with vectors (1, +-1)/sqrt(2)"""
    eig = qmath.spectral_decompose(np.array([[0, 1], [1, 0]]))
    assert np.allclose(eig.eigenvalues, [1, -1])
    assert np.allclose(eig.eigenvectors[:, 0], np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(eig.eigenvectors[:, 1], np.array([1, -1]) / np.sqrt(2))


def test_spectral_decompose_invariants():
    """Tests reconstruction and orthonormality on random Hermitian matrices"""
    rng = np.random.default_rng(3)
    for _ in range(20):
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        H = G + G.conj().T
        eig = qmath.spectral_decompose(H)
        V = eig.eigenvectors
        assert np.max(np.abs(eig.reconstruct() - H)) <= 1e-10
        assert np.max(np.abs(V.conj().T @ V - np.eye(4))) <= 1e-10
        assert np.all(np.diff(eig.eigenvalues) <= 0)


def test_spectral_decompose_nonhermitian():
    """Tests whether a non-Hermitian input raises InvariantError"""
    with pytest.raises(InvariantError):
        qmath.spectral_decompose(np.array([[1, 2], [0, 1]]))


def test_relative_entropy_equal_states():
    """Tests whether D(rho||rho) is zero"""
    rho = qmath.qubit_state(0.9, 0.3)
    assert abs(qmath.quantum_relative_entropy(rho, rho)) <= 1e-12


def test_relative_entropy_pure_versus_mixed():
    """Tests whether D(pure||I/2) equals log 2"""
    assert np.isclose(qmath.quantum_relative_entropy(PURE_0, MIXED), np.log(2), atol=1e-12)


def test_relative_entropy_bernoulli():
    """Tests the classical pair diag(1/4, 3/4) against diag(1/5, 4/5)"""
    sigma = np.diag([0.25, 0.75])
    rho = np.diag([0.2, 0.8])
    assert np.isclose(qmath.quantum_relative_entropy(sigma, rho), 0.0073819970, atol=1e-9)
    assert np.isclose(qmath.quantum_relative_entropy(rho, sigma), 0.0070021066, atol=1e-9)


def test_relative_entropy_unsupported():
    """Tests whether disjoint supports give an infinite divergence"""
    assert qmath.quantum_relative_entropy(PURE_1, PURE_0) == np.inf


def test_relative_entropy_dimension_mismatch():
    """Tests whether states of different dimensions raise DimensionError"""
    with pytest.raises(DimensionError):
        qmath.quantum_relative_entropy(MIXED, np.eye(3) / 3)


def test_max_relative_entropy_examples():
    """Tests D_max on equal states, a pure state and a diagonal pair"""
    rho = qmath.qubit_state(0.5, 1.0)
    assert abs(qmath.max_relative_entropy(rho, rho)) <= 1e-10
    assert np.isclose(qmath.max_relative_entropy(PURE_0, MIXED), 1.0, atol=1e-10)
    assert np.isclose(qmath.max_relative_entropy(np.diag([0.5, 0.5]), np.diag([0.25, 0.75])), 1.0, atol=1e-10)
    assert qmath.max_relative_entropy(PURE_1, PURE_0) == np.inf


def test_unit_conversion():
    """Tests whether bits and nats convert back and forth"""
    assert np.isclose(qmath.nats_to_bits(np.log(2)), 1.0)
    assert np.isclose(qmath.bits_to_nats(1.0), np.log(2))


def test_renyi_equal_states():
    """Tests whether the Renyi divergence of equal states is zero for several orders"""
    rho = qmath.qubit_state(0.7, 0.4)
    for alpha in (0.3, 0.5, 1.5, 2.0):
        assert abs(qmath.renyi_relative_entropy(rho, rho, alpha)) <= 1e-12


def test_renyi_commuting():
    """Tests whether commuting states give the classical Renyi divergence"""
    q = np.array([0.3, 0.7])
    p = np.array([0.6, 0.4])
    for alpha in (0.5, 1.5, 2.0):
        expected = np.log(np.sum(q**alpha * p ** (1 - alpha))) / (alpha - 1)
        assert np.isclose(qmath.renyi_relative_entropy(np.diag(q), np.diag(p), alpha), expected, atol=1e-12)


def test_renyi_half_is_fidelity():
    """Tests whether D_1/2 equals -2 log F for commuting states"""
    sigma = np.diag([0.3, 0.7])
    rho = np.diag([0.6, 0.4])
    F = qmath.fidelity(sigma, rho)
    assert np.isclose(qmath.renyi_relative_entropy(sigma, rho, 0.5), -2 * np.log(F), atol=1e-12)


def test_renyi_alpha_limit():
    """Tests whether orders 1 +- 1e-4 approach the relative entropy"""
    for sigma, rho in random_pairs(10):
        D = qmath.quantum_relative_entropy(sigma, rho)
        for alpha in (1 - 1e-4, 1 + 1e-4):
            assert abs(qmath.renyi_relative_entropy(sigma, rho, alpha) - D) <= 1e-3


def test_renyi_invalid_order():
    """Tests whether alpha = 1 and non-positive orders raise ValueError"""
    with pytest.raises(ValueError):
        qmath.renyi_relative_entropy(MIXED, MIXED, 1.0)
    with pytest.raises(ValueError):
        qmath.renyi_relative_entropy(MIXED, MIXED, 0.0)


def test_renyi_unsupported():
    """Tests whether orders above one diverge when the support condition fails"""
    assert qmath.renyi_relative_entropy(PURE_1, PURE_0, 2.0) == np.inf


def test_sandwiched_commuting():
    """Tests whether the sandwiched divergence collapses to Petz for commuting states"""
    sigma = np.diag([0.35, 0.65])
    rho = np.diag([0.8, 0.2])
    for alpha in (0.5, 1.5, 3.0):
        assert np.isclose(
            qmath.sandwiched_renyi(sigma, rho, alpha), qmath.renyi_relative_entropy(sigma, rho, alpha), atol=1e-10
        )


def test_sandwiched_below_petz():
    """Tests whether the sandwiched divergence does not exceed Petz for alpha > 1"""
    for sigma, rho in random_pairs(20, seed=11):
        for alpha in (1.5, 2.0):
            assert qmath.sandwiched_renyi(sigma, rho, alpha) <= qmath.renyi_relative_entropy(sigma, rho, alpha) + 1e-10


def test_sandwiched_equal_states():
    """Tests whether the sandwiched divergence of equal states is zero"""
    rho = qmath.qubit_state(0.6, 2.0)
    assert abs(qmath.sandwiched_renyi(rho, rho, 2.0)) <= 1e-12


def test_kl_divergence_examples():
    """Tests the classical relative entropy on equal, Bernoulli and disjoint inputs"""
    p = qmath.ProbabilityVector([0.2, 0.8])
    q = qmath.ProbabilityVector([0.25, 0.75])
    assert qmath.kl_divergence(p, p) == 0
    assert np.isclose(qmath.kl_divergence(q, p), 0.0073819970, atol=1e-9)
    assert qmath.kl_divergence(qmath.ProbabilityVector([1, 0]), qmath.ProbabilityVector([0, 1])) == np.inf


def test_kl_divergence_labels():
    """Tests whether mismatched outcome labels raise DimensionError"""
    with pytest.raises(DimensionError):
        qmath.kl_divergence(qmath.ProbabilityVector([0.5, 0.5], labels=("a", "b")), qmath.ProbabilityVector([0.5, 0.5]))


def test_hypothesis_testing_equal_states():
    """Tests whether D_h of equal states is -log(1 - eps)"""
    rho = qmath.qubit_state(0.8, 0.0)
    for eps in (0.01, 0.1, 0.5):
        assert np.isclose(qmath.hypothesis_testing_relative_entropy(rho, rho, eps), -np.log(1 - eps), atol=1e-8)


def test_hypothesis_testing_forced_test():
    """Tests whether a pure sigma against I/2 gives log 2 as eps vanishes"""
    assert np.isclose(qmath.hypothesis_testing_relative_entropy(PURE_0, MIXED, 1e-9), np.log(2), atol=1e-8)


def test_hypothesis_testing_commuting_lp():
    """Tests D_h of diagonal pairs against the linear program over diagonal tests"""
    rng = np.random.default_rng(5)
    for _ in range(10):
        s = rng.dirichlet(np.ones(3))
        r = rng.dirichlet(np.ones(3))
        eps = rng.uniform(0.05, 0.5)
        lp = linprog(r, A_ub=[-s], b_ub=[-(1 - eps)], bounds=[(0, 1)] * 3, method="highs")
        assert lp.status == 0
        val = qmath.hypothesis_testing_relative_entropy(np.diag(s), np.diag(r), eps)
        assert np.isclose(val, -np.log(lp.fun), atol=1e-7)


def test_hypothesis_testing_sdp():
    """Tests D_h of non-commuting real qubit pairs against a semidefinite program"""
    cp = pytest.importorskip("cvxpy")
    eps = 0.1
    cases = [(qmath.qubit_state(0.7, 0.9), qmath.qubit_state(0.5, 0.0)), (qmath.qubit_state(0.9, 2.0), MIXED)]
    for sigma, rho in cases:
        S = np.real(qmath.DensityMatrix(sigma).matrix)
        R = np.real(qmath.DensityMatrix(rho).matrix)
        E = cp.Variable((2, 2), symmetric=True)
        problem = cp.Problem(cp.Minimize(cp.trace(R @ E)), [E >> 0, np.eye(2) - E >> 0, cp.trace(S @ E) >= 1 - eps])
        problem.solve()
        assert np.isclose(qmath.hypothesis_testing_relative_entropy(sigma, rho, eps), -np.log(problem.value), atol=1e-4)


def test_hypothesis_testing_invalid_eps():
    """Tests whether eps outside (0, 1) raises ValueError"""
    with pytest.raises(ValueError):
        qmath.hypothesis_testing_relative_entropy(MIXED, MIXED, 1.0)


def test_support_contained_examples():
    """Tests the support check on equal, orthogonal and full-rank cases"""
    rho = qmath.qubit_state(0.5, 0.2)
    assert qmath.support_contained(rho, rho)
    assert not qmath.support_contained(PURE_1, PURE_0)
    assert qmath.support_contained(PURE_0, rho)


def test_divergences_nonnegative():
    """Tests whether every divergence is non-negative on random pairs"""
    for sigma, rho in random_pairs(20, seed=17):
        assert qmath.quantum_relative_entropy(sigma, rho) >= -1e-10
        assert qmath.max_relative_entropy(sigma, rho) >= -1e-10
        assert qmath.renyi_relative_entropy(sigma, rho, 0.5) >= -1e-10
        assert qmath.renyi_relative_entropy(sigma, rho, 1.5) >= -1e-10


def test_relative_entropy_below_max():
    """Tests D(sigma||rho) <= D_max(sigma||rho) ln 2 on random pairs"""
    for sigma, rho in random_pairs(20, seed=19):
        D = qmath.quantum_relative_entropy(sigma, rho)
        assert D <= qmath.bits_to_nats(qmath.max_relative_entropy(sigma, rho)) + 1e-8


def test_commuting_collapse():
    """Tests whether diagonal states reproduce the classical divergences"""
    q = np.array([0.1, 0.3, 0.6])
    p = np.array([0.5, 0.25, 0.25])
    D = qmath.quantum_relative_entropy(np.diag(q), np.diag(p))
    assert np.isclose(D, qmath.kl_divergence(qmath.ProbabilityVector(q), qmath.ProbabilityVector(p)), atol=1e-10)
    assert np.isclose(qmath.max_relative_entropy(np.diag(q), np.diag(p)), np.log2(np.max(q / p)), atol=1e-10)


def test_pinching_data_processing():
    """Tests whether dephasing in the rho eigenbasis cannot increase D"""
    for sigma, rho in random_pairs(20, seed=23, dim=3):
        D = qmath.quantum_relative_entropy(sigma, rho)
        Ds = qmath.DensityMatrix(qmath.pinching(sigma, rho))
        Dr = qmath.DensityMatrix(qmath.pinching(rho, rho))
        assert qmath.quantum_relative_entropy(Ds, Dr) <= D + 1e-10


def test_qubit_state_bloch():
    """Tests whether qubit_state and bloch_vector agree"""
    rho = qmath.qubit_state(0.9, np.pi / 4)
    assert np.allclose(qmath.bloch_vector(rho), 0.9 * np.array([np.sin(np.pi / 4), 0, np.cos(np.pi / 4)]))


def test_qubit_state_invalid_length():
    """Tests whether a Bloch length above one raises ValueError"""
    with pytest.raises(ValueError):
        qmath.qubit_state(1.2)


def test_random_density_matrix_rank():
    """Tests whether random states have the requested rank"""
    rho = qmath.random_density_matrix(4, np.random.default_rng(0), rank=2)
    assert np.sum(qmath.spectral_decompose(rho).eigenvalues > 1e-12) == 2
