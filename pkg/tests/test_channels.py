import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecov.channels import (
    ChoiOperator,
    Direction,
    InadmissibleParameters,
    Isometry,
    apply_channel,
    check_covariance,
    choi_from_isometry,
    cloning_isometry,
    conjugation_isometry,
    economical_completion,
    identity_choi,
    optimal_isometry,
    reduced_single_site,
    reduced_single_site_tensor,
    shift_isometry,
    shift_parameter,
    shrink_factor,
)
from phasecov.states import (
    DensityMatrix,
    PhaseVector,
    SymState,
    conjugate_phase,
    equatorial_state,
    n_fold_equatorial,
    state_fidelity,
)
from phasecov.symbasis import rank, sym_dim

rng = np.random.default_rng(11)

GRID = [
    (1, 1, 2, "clone"), (1, 3, 2, "clone"), (1, 5, 2, "clone"), (2, 4, 2, "clone"),
    (1, 4, 3, "clone"), (2, 5, 3, "clone"), (1, 5, 4, "clone"),
    (1, 1, 2, "conjugate"), (1, 3, 2, "conjugate"), (2, 2, 2, "conjugate"),
    (1, 2, 3, "conjugate"), (2, 4, 3, "conjugate"), (1, 4, 5, "conjugate"),
]


def random_density(D, rank_=None):
    G = rng.normal(size=(D, rank_ or D)) + 1j * rng.normal(size=(D, rank_ or D))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_sym_state(N, d):
    D = sym_dim(N, d)
    v = rng.normal(size=D) + 1j * rng.normal(size=D)
    return SymState(N, d, v / np.linalg.norm(v))


def test_shift_parameter():
    assert shift_parameter(1, 3, 2, "clone") == 1
    assert shift_parameter(1, 4, 5, "conjugate") == 1
    assert shift_parameter(2, 4, 3, "conjugate") == 2
    with pytest.raises(InadmissibleParameters, match="1, 3, 5"):
        shift_parameter(1, 2, 2, "clone")
    with pytest.raises(InadmissibleParameters, match="admissible"):
        shift_parameter(2, 1, 3, "conjugate")  # k = 1 < N


def test_cloning_isometry_examples():
    assert np.array_equal(cloning_isometry(1, 1, 3).matrix, np.eye(3))
    V = cloning_isometry(1, 3, 2)
    assert V.k == 1
    assert V.matrix[rank((2, 1)), 0] == 1 and V.matrix[rank((1, 2)), 1] == 1
    assert np.count_nonzero(V.matrix) == 2


def test_conjugation_isometry_examples():
    V = conjugation_isometry(1, 1, 2)
    assert np.array_equal(V.matrix, [[0, 1], [1, 0]])
    W = conjugation_isometry(2, 4, 3)
    assert np.abs(W.matrix.conj().T @ W.matrix - np.eye(6)).max() < 1e-12
    assert np.all(np.count_nonzero(W.matrix, axis=0) == 1)


def test_isometry_validation():
    with pytest.raises(ValueError):
        Isometry(np.ones((4, 2)), 1, 3, 2)
    with pytest.raises(ValueError):
        Isometry(np.eye(3), 1, 3, 2)


def test_shift_isometry_rejects_invalid_images():
    with pytest.raises(InadmissibleParameters):
        shift_isometry(1, 2, 2, [0, 0], +1)


def test_identity_choi_is_all_ones():
    R = identity_choi(1, 2)
    Om = np.zeros(4)
    Om[[0, 3]] = 1
    assert np.abs(R.matrix - np.outer(Om, Om)).max() < 1e-15
    # in canonical product basis |Omega> = |00> + |11>, i.e. the all-ones matrix on its support
    assert np.abs(R.matrix[np.ix_([0, 3], [0, 3])] - np.ones((2, 2))).max() < 1e-15


@pytest.mark.parametrize("N,M,d,direction", GRID)
def test_choi_structural_properties(N, M, d, direction):
    R = choi_from_isometry(optimal_isometry(N, M, d, direction))
    assert R.hermiticity_defect() < 1e-10
    assert R.eigenvalues().min() > -1e-10
    assert R.tp_defect() < 1e-10
    assert R.numerical_rank() == 1
    assert check_covariance(R, samples=20, rng=1).passed


def test_factor_and_dense_paths_agree():
    V = cloning_isometry(2, 5, 3)
    dense = choi_from_isometry(V, dense=True)
    lazy = choi_from_isometry(V, dense=False)
    assert not lazy.has_dense()
    rho = random_density(6)
    a = apply_channel(dense, rho).entries
    b = apply_channel(lazy, rho).entries
    assert np.abs(a - b).max() < 1e-12
    g_report = check_covariance(lazy, samples=5, rng=3)
    assert g_report.passed
    assert abs(np.sort(dense.eigenvalues())[-1] - np.sort(lazy.eigenvalues())[-1]) < 1e-12


@pytest.mark.parametrize("N,M,d,direction", GRID)
def test_apply_matches_isometry(N, M, d, direction):
    V = optimal_isometry(N, M, d, direction)
    R = choi_from_isometry(V)
    rho = random_density(sym_dim(N, d))
    out = apply_channel(R, rho)
    assert np.abs(out.entries - V.matrix @ rho @ V.matrix.conj().T).max() < 1e-12
    assert abs(np.trace(out.entries) - 1) < 1e-12


def test_apply_identity_and_shape_check():
    rho = random_density(3)
    assert np.abs(apply_channel(identity_choi(1, 3), rho).entries - rho).max() < 1e-12
    with pytest.raises(ValueError):
        apply_channel(identity_choi(1, 3), np.eye(2) / 2)


def test_covariance_detects_perturbation():
    R = choi_from_isometry(cloning_isometry(1, 3, 2))
    assert check_covariance(R, samples=50).max_norm < 1e-10
    bad = R.perturbed(1e-3)
    rep = check_covariance(bad, samples=50)
    assert not rep.passed and rep.max_norm > 1e-4


def test_identity_covariance():
    R = identity_choi(1, 2)
    assert check_covariance(R, Direction.CLONE).passed
    # the identity does not commute with the conjugating representation;
    # the qubit NOT is the conjugation-covariant channel at N = M = 1
    assert not check_covariance(R, Direction.CONJUGATE).passed
    assert check_covariance(choi_from_isometry(conjugation_isometry(1, 1, 2))).passed


@pytest.mark.parametrize("N,M,d", [(1, 1, 2), (1, 3, 2), (2, 4, 3), (1, 6, 5)])
def test_economical_completion(N, M, d):
    V = optimal_isometry(N, M, d, "clone" if (M - N) % d == 0 else "conjugate")
    U = economical_completion(V)
    D = sym_dim(M, d)
    assert np.abs(U.unitary.conj().T @ U.unitary - np.eye(D)).max() < 1e-12
    assert np.abs(U.isometry_part() - V.matrix).max() < 1e-15
    for _ in range(3):
        x = random_sym_state(N, d).amplitudes
        assert np.abs(U.unitary @ U.embed_input(x) - V.matrix @ x).max() < 1e-12


def test_completion_of_identity_is_identity():
    V = Isometry(np.eye(4), 1, 1, 4)
    assert np.abs(economical_completion(V).unitary - np.eye(4)).max() < 1e-15


def test_completion_is_deterministic():
    V = cloning_isometry(1, 4, 3)
    assert np.array_equal(economical_completion(V).unitary, economical_completion(V).unitary)


def test_reduced_product_state():
    pv = PhaseVector.zeros(2)
    rho1 = reduced_single_site(n_fold_equatorial(pv, 3))
    assert np.abs(rho1.entries - equatorial_state(pv).projector()).max() < 1e-12


def test_reduced_clone_output():
    V = cloning_isometry(1, 3, 2)
    pv = PhaseVector.zeros(2)
    out = V.apply(n_fold_equatorial(pv, 1))
    rho1 = reduced_single_site(out)
    assert abs(state_fidelity(rho1, equatorial_state(pv)) - 5 / 6) < 1e-12
    assert np.abs(rho1.entries - reduced_single_site_tensor(out).entries).max() < 1e-12


@pytest.mark.parametrize("M", range(1, 6))
@pytest.mark.parametrize("d", [2, 3])
def test_reduced_matches_tensor_oracle(M, d):
    psi = random_sym_state(M, d)
    assert np.abs(reduced_single_site(psi).entries - reduced_single_site_tensor(psi).entries).max() < 1e-12
    rho = DensityMatrix(random_density(sym_dim(M, d), 2), N=M, d=d)
    assert np.abs(reduced_single_site(rho).entries - reduced_single_site_tensor(rho).entries).max() < 1e-12


def test_reduced_is_linear():
    a, b = random_density(6), random_density(6)
    lhs = reduced_single_site(0.3 * a + 0.7 * b, 2, 3).entries
    rhs = 0.3 * reduced_single_site(a, 2, 3).entries + 0.7 * reduced_single_site(b, 2, 3).entries
    assert np.abs(lhs - rhs).max() < 1e-14


def test_shrink_factor_examples():
    psi = equatorial_state(PhaseVector.random(3, rng))
    eta, res = shrink_factor(DensityMatrix(psi.projector()), psi)
    assert abs(eta - 1) < 1e-12 and res < 1e-12
    eta, res = shrink_factor(DensityMatrix.maximally_mixed(3), psi)
    assert abs(eta) < 1e-12 and res < 1e-12

    V = cloning_isometry(1, 3, 2)
    pv = PhaseVector.zeros(2)
    eta, res = shrink_factor(reduced_single_site(V.apply(n_fold_equatorial(pv, 1))), equatorial_state(pv))
    assert abs(eta - 2 / 3) < 1e-12 and res < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(GRID), st.integers(0, 2 ** 31))
def test_isotropic_output_for_any_equatorial_input(point, seed):
    N, M, d, direction = point
    pv = PhaseVector.random(d, np.random.default_rng(seed))
    V = optimal_isometry(N, M, d, direction)
    rho1 = reduced_single_site(V.apply(n_fold_equatorial(pv, N)))
    target_pv = pv if direction == "clone" else conjugate_phase(pv)
    eta, res = shrink_factor(rho1, equatorial_state(target_pv))
    assert res < 1e-10
    # same shrink factor as at the seed phase
    seed_rho1 = reduced_single_site(V.apply(n_fold_equatorial(PhaseVector.zeros(d), N)))
    eta0, _ = shrink_factor(seed_rho1, equatorial_state(PhaseVector.zeros(d)))
    assert abs(eta - eta0) < 1e-10


def test_choi_operator_validation():
    with pytest.raises(ValueError):
        ChoiOperator(1, 3, 2, "clone", matrix=np.eye(3))
