import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import contract_full
from elasmodes.material import (
    ElasticTensor, MaterialError, MaterialField, SymStrain, apply, coercivity_constant,
    double_dot, from_full_tensor, isotropic, load_material_json, validate_field,
)
from elasmodes.problems import random_anisotropic


def random_sym(rng):
    a = rng.standard_normal((3, 3))
    return a + a.T


def test_isotropic_identity_choice():
    C = isotropic(0.0, 0.5)
    np.testing.assert_array_equal(np.diag(C.voigt), [1, 1, 1, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(C.voigt[:3, :3] - np.eye(3), 0.0)


def test_isotropic_entries():
    C = isotropic(1.0, 1.0)
    assert C.voigt[0, 0] == 3.0
    assert C.voigt[0, 1] == 1.0
    assert C.voigt[3, 3] == 1.0


@pytest.mark.parametrize("lam, mu", [(-1.0, 0.1), (1.0, 0.0), (1.0, -1.0)])
def test_isotropic_rejects_indefinite(lam, mu):
    with pytest.raises(MaterialError):
        isotropic(lam, mu)


def test_voigt_must_be_symmetric():
    v = np.eye(6)
    v[0, 1] = 0.3
    with pytest.raises(MaterialError):
        ElasticTensor(v)
    with pytest.raises(MaterialError):
        ElasticTensor(np.full((6, 6), np.inf))


def test_full_tensor_round_trip():
    C = isotropic(1.0, 1.0)
    np.testing.assert_array_equal(from_full_tensor(C.full()).voigt, C.voigt)


def test_full_tensor_symmetry_violation_names_index():
    c = isotropic(1.0, 1.0).full()
    c[0, 0, 0, 1] += 10 * 1e-12 * np.abs(c).max()
    with pytest.raises(MaterialError, match="C_1112|C_1211|C_1121"):
        from_full_tensor(c)


def test_full_tensor_anisotropic_apply_matches_summation():
    rng = np.random.default_rng(3)
    for _ in range(20):
        C = random_anisotropic(rng)
        c = C.full()
        C2 = from_full_tensor(c)
        S = random_sym(rng)
        got = apply(C2, S).matrix()
        ref = contract_full(c, S)
        assert np.abs(got - ref).max() <= 1e-13 * np.abs(ref).max()


def test_apply_examples():
    rng = np.random.default_rng(0)
    S = random_sym(rng)
    np.testing.assert_allclose(apply(isotropic(0.0, 0.5), S).matrix(), S, rtol=0, atol=1e-15)
    np.testing.assert_allclose(apply(isotropic(1.0, 1.0), np.eye(3)).matrix(), 5 * np.eye(3))


def test_engineering_shear_conversion():
    s = SymStrain.from_matrix([[1, 2, 3], [2, 4, 5], [3, 5, 6]])
    np.testing.assert_array_equal(s.components, [1, 4, 6, 5, 3, 2])
    np.testing.assert_array_equal(s.engineering(), [1, 4, 6, 10, 6, 4])
    np.testing.assert_array_equal(SymStrain.from_engineering(s.engineering()).components,
                                  s.components)


def test_coercivity_examples():
    # isotropic Mandel spectrum is {3 lam + 2 mu, 2 mu (x5)}
    assert coercivity_constant(isotropic(1.0, 1.0)) == pytest.approx(2.0, rel=1e-14)
    assert coercivity_constant(isotropic(0.0, 0.5)) == pytest.approx(1.0, rel=1e-14)
    assert coercivity_constant(ElasticTensor(np.zeros((6, 6)))) == 0.0


def test_coercivity_matches_dense_eigen_oracle():
    rng = np.random.default_rng(11)
    C = random_anisotropic(rng)
    # operator S -> C:S on an orthonormal basis of symmetric matrices
    basis = []
    for i in range(3):
        e = np.zeros((3, 3)); e[i, i] = 1; basis.append(e)
    for i, j in ((1, 2), (0, 2), (0, 1)):
        e = np.zeros((3, 3)); e[i, j] = e[j, i] = 1 / np.sqrt(2); basis.append(e)
    c = C.full()
    G = np.array([[np.sum(a * contract_full(c, b)) for b in basis] for a in basis])
    assert coercivity_constant(C) == pytest.approx(np.linalg.eigvalsh(G)[0], rel=1e-12)


sym_entries = st.lists(st.floats(-10, 10), min_size=6, max_size=6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), sym_entries, sym_entries, st.floats(-5, 5), st.floats(-5, 5))
def test_apply_is_linear(seed, s, t, a, b):
    C = random_anisotropic(np.random.default_rng(seed))
    S, T = SymStrain(s), SymStrain(t)
    lhs = apply(C, a * S + b * T).components
    rhs = a * apply(C, S).components + b * apply(C, T).components
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), sym_entries, sym_entries)
def test_bilinear_form_symmetric(seed, s, t):
    C = random_anisotropic(np.random.default_rng(seed))
    S, T = SymStrain(s), SymStrain(t)
    ab, ba = double_dot(T, apply(C, S)), double_dot(S, apply(C, T))
    scale = np.abs(C.voigt).max() * np.linalg.norm(S.matrix()) * np.linalg.norm(T.matrix())
    assert abs(ab - ba) <= 1e-13 * max(scale, 1e-300)


def test_quadratic_form_floor_and_sampled_bound():
    rng = np.random.default_rng(5)
    for C in (isotropic(1.0, 1.0), random_anisotropic(rng), random_anisotropic(rng, floor=0.01)):
        alpha = coercivity_constant(C)
        sampled = np.inf
        for _ in range(1000):
            S = random_sym(rng)
            S /= np.linalg.norm(S)
            q = double_dot(S, apply(C, S))
            assert q >= alpha - 1e-10
            sampled = min(sampled, q)
        # the minimizer of the quadratic form attains alpha exactly
        w, V = np.linalg.eigh(C.mandel)
        s = V[:, 0] / np.array([1, 1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2)])
        S = SymStrain(s)
        S = S * (1 / np.linalg.norm(S.matrix()))
        assert double_dot(S, apply(C, S)) == pytest.approx(alpha, abs=1e-6)
        assert sampled >= alpha - 1e-10


def test_validate_homogeneous_pass():
    mf = MaterialField.homogeneous(isotropic(1.0, 1.0), 1.0, 6, beta=0.5, alpha=1.0)
    rep = validate_field(mf)
    assert rep.passed
    assert rep.alpha == pytest.approx(2.0, rel=1e-14)
    assert rep.beta == 1.0


def test_validate_zero_density_names_element():
    rho = np.ones(6)
    rho[4] = 0.0
    rep = validate_field(MaterialField((isotropic(1.0, 1.0),) * 6, rho, beta=0.5))
    assert not rep.passed
    assert any("element 4" in f for f in rep.failures)


def test_validate_indefinite_tensor_names_element():
    bad = ElasticTensor(np.diag([1.0, 1.0, -1.0, 1.0, 1.0, 1.0]))
    tensors = [isotropic(1.0, 1.0)] * 5 + [bad]
    rep = validate_field(MaterialField(tuple(tensors), np.ones(6)))
    assert not rep.passed
    assert any("element 5" in f and "positive definite" in f for f in rep.failures)


def test_load_material_json(tmp_path):
    doc = {"regions": {"0": {"isotropic": {"lambda": 1.0, "mu": 1.0}, "density": 2.0},
                       "3": {"voigt": np.eye(6).tolist(), "density": 1.0}},
           "beta": 0.5}
    path = tmp_path / "mat.json"
    path.write_text(json.dumps(doc))
    mf = load_material_json(path, [0, 3, 0])
    np.testing.assert_array_equal(mf.density, [2.0, 1.0, 2.0])
    assert mf.beta == 0.5
    np.testing.assert_array_equal(mf.tensors[1].voigt, np.eye(6))
    with pytest.raises(MaterialError, match="region 7"):
        load_material_json(path, [7])
