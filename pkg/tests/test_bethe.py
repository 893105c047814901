import cmath
import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import Q
from multichain.bethe import (
    BetheConfig,
    BetheSolveError,
    CollisionError,
    bethe_residual,
    eigenvalue_recursion,
    energy,
    energy_from_eigenvalue,
    final_level_eigenvalue,
    fit_energy_normalization,
    level_eigenvalue,
    one_magnon_roots,
    one_magnon_vector,
    rapidity_distance,
    residual_vector,
    solve_bethe,
    termination_constant,
    vacuum_vector,
)
from multichain.chain import ChainSpec, hamiltonian_closed, transfer
from multichain.graded_space import ModelSpec, StateIndex
from multichain.rmatrix import PoleError, boltzmann_weights, weight
from multichain.spectra import dense_spectrum, match_aba_to_ed

MUS = [0.31 + 0.2j, -0.4 + 0.1j, 0.17 - 0.33j]


def chain(m, n, mult, p0, q=Q, inhom=()):
    return ChainSpec(ModelSpec(m, n, mult, q), p0, inhom)


def eig_residual(M, v, value):
    return np.linalg.norm(M @ v - value * v) / max(1.0, abs(value)) / np.linalg.norm(v)


# ------------------------------------------------------------------ configuration


def test_omega_roots_of_unity():
    c = chain(1, 1, (1, 2), 5)
    cfg = BetheConfig(c, ((0.1, 0.2, 0.3, 0.4),), final_branch=1)
    assert_allclose(cfg.omega, 1j, atol=1e-15)
    assert BetheConfig(c, ((0.1, 0.2, 0.3, 0.4),), final_branch=2).omega == pytest.approx(-1)
    assert BetheConfig(c).omega == 1


def test_levels_padded_and_counted():
    cfg = BetheConfig(chain(2, 1, (1, 1, 1), 3), ((0.1,),))
    assert cfg.magnon_counts == (1, 0)
    assert cfg.magnon_counts_all == (3, 1, 0)
    assert cfg.level(2) == ()
    with pytest.raises(ValueError):
        cfg.level(3)
    with pytest.raises(ValueError):
        BetheConfig(chain(1, 1, (1, 1), 2), ((0.1,), (0.2,)))


def test_more_magnons_on_deeper_level_warns():
    with pytest.warns(UserWarning, match="more magnons"):
        BetheConfig(chain(2, 1, (1, 1, 1), 3), ((0.1,), (0.2, 0.3)))


def test_pseudo_vacuum_label_checked():
    with pytest.raises(ValueError):
        BetheConfig(chain(1, 1, (2, 1), 2), pseudo_vacuum_labels=(2,))


def test_termination_constant_is_signed_multiplicity():
    assert termination_constant(BetheConfig(chain(1, 1, (2, 3), 2))) == -3
    assert termination_constant(BetheConfig(chain(2, 0, (1, 2), 2))) == 2


# ------------------------------------------------------------------ eigenvalues


def test_vacuum_eigenvalue_two_site_example():
    # m = n = 1, no magnons, p0 = 2: Lambda = a_0^2 - b^2
    c = chain(1, 1, (1, 1), 2)
    cfg = BetheConfig(c)
    v = vacuum_vector(c)
    for mu in MUS:
        w = boltzmann_weights(mu, c.model)
        expected = w.a_boson**2 - w.b**2
        assert_allclose(eigenvalue_recursion(cfg, 0, mu), expected, rtol=1e-13)
        assert eig_residual(transfer(c, mu).entries, v, expected) <= 1e-12


@pytest.mark.parametrize("args", [(2, 0, (3, 1)), (1, 1, (2, 2)), (2, 1, (2, 1, 2)), (0, 2, (1, 2))])
def test_vacuum_is_eigenvector(args):
    c = chain(*args, 3, inhom=(0.1, -0.25j, 0.05 + 0.1j))
    cfg = BetheConfig(c)
    v = vacuum_vector(c)
    for mu in MUS:
        assert eig_residual(transfer(c, mu).entries, v, eigenvalue_recursion(cfg, 0, mu)) <= 1e-12


def test_multiplicity_term_with_equal_counts():
    # p0 = p1 = 1: the (n_0 - 1) prod b term contributes
    c = chain(2, 0, (2, 1), 1)
    root = 0.5 * cmath.log(-Q)  # b(lam) = 1 at a single site
    cfg = BetheConfig(c, ((root,),))
    assert abs(residual_vector(cfg)[0]) <= 1e-12
    for mu in MUS:
        value = eigenvalue_recursion(cfg, 0, mu)
        spec = dense_spectrum(transfer(c, mu))
        assert np.min(np.abs(spec - value)) <= 1e-12 * max(1.0, abs(value))


def test_final_level_carries_omega():
    c = chain(1, 1, (1, 2), 3)
    cfg = BetheConfig(c, ((0.2, 0.5j),), final_branch=1)
    mu = 0.3
    a = [weight("a", mu - x, c.model, 1) for x in cfg.level(1)]
    assert_allclose(final_level_eigenvalue(cfg, mu), -(-1) * np.prod(a), rtol=1e-14)


def test_level_eigenvalue_callable():
    cfg = BetheConfig(chain(2, 1, (1, 1, 1), 3), ((0.1,),))
    f = level_eigenvalue(cfg, 1)
    assert f(0.3j) == eigenvalue_recursion(cfg, 1, 0.3j)
    with pytest.raises(ValueError):
        eigenvalue_recursion(cfg, 3, 0.1)


def test_removable_singularity_raises_and_is_continuous():
    c = chain(2, 0, (1, 1), 3)
    lam = one_magnon_roots(c)[1]
    cfg = BetheConfig(c, ((lam,),))
    with pytest.raises(PoleError):
        eigenvalue_recursion(cfg, 0, lam)
    eps = 1e-6
    left, right = eigenvalue_recursion(cfg, 0, lam - eps), eigenvalue_recursion(cfg, 0, lam + eps)
    assert abs(left - right) <= 1e-4 * max(1.0, abs(left))


# ------------------------------------------------------------------ roots and Newton


@pytest.mark.parametrize("p0", [2, 3, 4, 5])
def test_one_magnon_roots_solve_equations(p0):
    c = chain(2, 0, (1, 1), p0)
    roots = one_magnon_roots(c)
    assert len(roots) >= p0 - 1
    for lam in roots:
        cfg = BetheConfig(c, ((lam,),))
        assert abs(bethe_residual(cfg, 0, 0)) <= 1e-12


def test_one_magnon_roots_need_bosonic_vacuum():
    with pytest.raises(ValueError):
        one_magnon_roots(chain(0, 2, (1, 1), 3))
    with pytest.raises(ValueError):
        one_magnon_roots(chain(2, 0, (1, 1), 2, inhom=(0.1, 0.0)))


@pytest.mark.parametrize("args", [(2, 0, (1, 1)), (2, 0, (3, 2)), (2, 1, (2, 1, 1))])
def test_newton_converges_from_nearby_seed(args):
    c = chain(*args, 4)
    lam = one_magnon_roots(c)[1]
    cfg = BetheConfig(c, ((lam + 0.05 - 0.03j,),))
    res = solve_bethe(cfg)
    assert res.iterations <= 10
    assert res.residual < 1e-10
    assert rapidity_distance(res.config.level(1)[0], lam) <= 1e-8


def test_exact_seed_needs_no_iterations():
    c = chain(2, 0, (1, 1), 4)
    res = solve_bethe(BetheConfig(c, ((one_magnon_roots(c)[2],),)))
    assert res.iterations == 0
    # the last level is occupied, so no termination constant enters
    assert res.report["termination_constant"] is None


def test_collision_reported():
    c = chain(2, 0, (1, 1), 4)
    cfg = BetheConfig(c, ((0.2 + 0.1j, 0.2 + 0.1j),))
    with pytest.raises(BetheSolveError) as info:
        solve_bethe(cfg)
    assert info.value.reason == "collision"
    with pytest.raises(CollisionError):
        bethe_residual(cfg, 0, 0)


def test_collision_modulo_i_pi():
    assert rapidity_distance(0.1, 0.1 + 1j * math.pi) < 1e-15
    cfg = BetheConfig(chain(2, 0, (1, 1), 4), ((0.2, 0.2 + 1j * math.pi),))
    with pytest.raises(BetheSolveError, match="coincide"):
        solve_bethe(cfg)


def test_non_convergence_reported():
    c = chain(2, 0, (1, 1), 4)
    with pytest.raises(BetheSolveError) as info:
        solve_bethe(BetheConfig(c, ((0.9 + 0.4j,),)), max_iter=1)
    err = info.value
    assert err.reason == "non-convergence"
    assert err.iterations == 1
    assert err.residual > 1e-10


def test_residual_form_validation():
    cfg = BetheConfig(chain(2, 0, (1, 1), 3), ((0.1,),))
    with pytest.raises(ValueError):
        bethe_residual(cfg, 0, 0, form="other")
    with pytest.raises(IndexError):
        bethe_residual(cfg, 0, 1)


@pytest.mark.parametrize("lam", [0.1 + 0.2j, -0.3 + 0.05j])
def test_forms_agree_on_bosonic_levels(lam):
    cfg = BetheConfig(chain(3, 0, (1, 2, 1), 3), ((lam, -lam / 2), (0.4j,)))
    assert_allclose(residual_vector(cfg, "graded"), residual_vector(cfg, "bosonic"), atol=1e-14)


def test_forms_differ_on_fermionic_level():
    c = chain(1, 1, (1, 1), 3)
    res = solve_bethe(BetheConfig(c, ((0.3 + 0.2j,),)))
    assert res.report["rhs_forms_agree"] is False
    assert abs(bethe_residual(res.config, 0, 0, "bosonic")) > 1.0


# ------------------------------------------------------------------ eigenvectors


def test_one_magnon_amplitudes_two_sites():
    # B_t(lam)|00> = c |t 0> + b c |0 t> for a bosonic target in another set
    c = chain(2, 0, (1, 1), 2)
    lam = 0.27 - 0.1j
    w = boltzmann_weights(lam, c.model)
    v = one_magnon_vector(c, lam, StateIndex(1, 0))
    expected = np.zeros(4, dtype=complex)
    expected[2] = w.c  # site 1 is the leading digit
    expected[1] = w.b * w.c
    assert_allclose(v, expected, atol=1e-14)


@pytest.mark.parametrize("args,target", [((2, 0, (1, 1)), (1, 0)), ((2, 0, (1, 3)), (1, 2)), ((2, 1, (2, 1, 1)), (1, 0))])
def test_one_magnon_vector_is_eigenvector(args, target):
    c = chain(*args, 4)
    M = hamiltonian_closed(c).entries
    for lam in one_magnon_roots(c)[1:]:
        cfg = BetheConfig(c, ((lam,),))
        v = one_magnon_vector(c, lam, StateIndex(*target))
        for mu in MUS:
            assert eig_residual(transfer(c, mu).entries, v, eigenvalue_recursion(cfg, 0, mu)) <= 1e-10
        assert eig_residual(M, v, energy_from_eigenvalue(cfg)) <= 1e-10


def test_one_magnon_vector_rejects_vacuum_target():
    with pytest.raises(ValueError):
        one_magnon_vector(chain(2, 0, (1, 1), 2), 0.1, StateIndex(0, 0))


def test_label_symmetry_gives_degenerate_magnons():
    # two labels in the target set: distinct eigenvectors, same eigenvalue
    c = chain(2, 0, (1, 2), 3)
    lam = one_magnon_roots(c)[1]
    v0 = one_magnon_vector(c, lam, StateIndex(1, 0))
    v1 = one_magnon_vector(c, lam, StateIndex(1, 1))
    assert abs(np.vdot(v0, v1)) <= 1e-12
    value = eigenvalue_recursion(BetheConfig(c, ((lam,),)), 0, MUS[0])
    spec = dense_spectrum(transfer(c, MUS[0]))
    assert np.sum(np.abs(spec - value) <= 1e-9) >= 2


# ------------------------------------------------------------------ energies


def test_bosonic_energy_formula_equals_log_derivative():
    c = chain(2, 0, (1, 1), 5)
    for lam in one_magnon_roots(c)[1:]:
        cfg = BetheConfig(c, ((lam,),))
        assert_allclose(energy(cfg), energy_from_eigenvalue(cfg), rtol=1e-12)


def test_energy_is_additive():
    c = chain(2, 0, (1, 1), 5)
    l1, l2 = 0.2 + 0.1j, -0.3 + 0.4j
    both = energy(BetheConfig(c, ((l1, l2),)))
    assert_allclose(both, energy(BetheConfig(c, ((l1,),))) + energy(BetheConfig(c, ((l2,),))), rtol=1e-13)


def test_vacuum_energy_is_zero_for_bosonic_vacuum():
    assert energy(BetheConfig(chain(2, 0, (1, 1), 4))) == 0
    assert energy_from_eigenvalue(BetheConfig(chain(2, 0, (1, 1), 4))) == 0


def test_energy_regime_checked():
    with pytest.raises(ValueError):
        energy(BetheConfig(chain(2, 0, (1, 1), 2, inhom=(0.1, 0.0))))
    with pytest.raises(ValueError):
        energy(BetheConfig(chain(2, 0, (1, 1), 2), ((0.1, 0.2),)))
    with pytest.raises(PoleError):
        energy(BetheConfig(chain(2, 0, (1, 1), 3), ((0.0,),)))


def test_fermionic_energy_from_eigenvalue_matches_hamiltonian():
    c = chain(1, 1, (2, 1), 3)
    res = solve_bethe(BetheConfig(c, ((0.2 + 0.3j,),)))
    E = energy_from_eigenvalue(res.config)
    spec = dense_spectrum(hamiltonian_closed(c))
    assert np.min(np.abs(spec - E)) <= 1e-10


def test_fit_energy_normalization_recovers_affine_map():
    f = np.array([0.3, -1.2 + 0.5j, 2.0])
    scale, shift = fit_energy_normalization(f, 2.5 * f - 1.0 + 0.5j)
    assert_allclose([scale, shift], [2.5, -1.0 + 0.5j], atol=1e-13)


def test_nontrivial_final_branch_needs_two_states():
    c = chain(1, 1, (1, 1), 4)
    with pytest.raises(ValueError, match="omega = 1"):
        BetheConfig(c, ((0.1, 0.2),), final_branch=1)
    BetheConfig(c, ((0.1, 0.2),), final_branch=2)  # 2 = 0 mod p_1
    BetheConfig(chain(1, 1, (1, 2), 4), ((0.1, 0.2),), final_branch=1)


def test_final_branch_with_two_states_matches_ed():
    # omega = -1 is a genuine eigenvalue once the last set holds two states
    c = chain(1, 1, (1, 2), 4)
    rng = np.random.default_rng(11)
    hits = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for _ in range(8):
            seed = tuple(rng.uniform(-0.8, 0.8, 2) + 1j * rng.uniform(-0.8, 0.8, 2))
            try:
                res = solve_bethe(BetheConfig(c, (seed,), final_branch=1))
            except BetheSolveError:
                continue
            assert not match_aba_to_ed(c, [res.config], MUS).unmatched
            hits += 1
    assert hits >= 1
