import numpy as np
import pytest

from gpcpd import (
    DimensionMismatchError,
    cpd_to_tensor,
    fixture_example41,
    fixture_example42,
    gen_random_rank_r,
    mode_k_flatten,
    relative_error,
)


class TestExample41:
    def test_known_entries(self):
        tensor, _ = fixture_example41()
        assert tensor.data[0, 0, 0] == -38
        assert tensor.data[4, 2, 2] == 1
        assert tensor.data[1, 1, 2] == 434

    def test_exact_decomposition(self):
        tensor, triple = fixture_example41()
        assert relative_error(tensor, triple) <= 1e-12

    def test_flattening_rank_five(self):
        tensor, _ = fixture_example41()
        assert np.linalg.matrix_rank(mode_k_flatten(tensor, 1)) == 5


class TestExample42:
    def test_zero_exponent_entry(self):
        tensor, _ = fixture_example42()
        assert tensor.data[0, 0, 0] == pytest.approx(1.0)

    def test_positive_base_entry(self):
        tensor, _ = fixture_example42()
        assert tensor.data[3, 1, 0] == pytest.approx(0.5**0.8)

    def test_self_check_against_factors(self):
        tensor, triple = fixture_example42()
        assert relative_error(tensor, triple) <= 1e-10

    def test_flattening_rank_eight(self):
        tensor, _ = fixture_example42()
        assert np.linalg.matrix_rank(mode_k_flatten(tensor, 1)) == 8

    def test_genuinely_complex(self):
        tensor, _ = fixture_example42()
        assert np.max(np.abs(tensor.data.imag)) > 0.1


class TestGenRandomRankR:
    def test_seed_determinism(self):
        t1, f1 = gen_random_rank_r(5, 4, 3, 4, seed=9)
        t2, f2 = gen_random_rank_r(5, 4, 3, 4, seed=9)
        assert t1 == t2
        assert np.array_equal(f1.U1, f2.U1)
        t3, _ = gen_random_rank_r(5, 4, 3, 4, seed=10)
        assert t1 != t3

    def test_tensor_matches_factors(self):
        tensor, triple = gen_random_rank_r(6, 4, 3, 5, seed=3)
        assert np.array_equal(tensor.data, cpd_to_tensor(triple).data)

    def test_generic_flattening_rank(self):
        hits = 0
        for seed in range(20):
            tensor, _ = gen_random_rank_r(6, 4, 3, 5, seed=seed)
            hits += np.linalg.matrix_rank(mode_k_flatten(tensor, 1)) == 5
        assert hits == 20

    def test_rank_bound_enforced(self):
        with pytest.raises(DimensionMismatchError):
            gen_random_rank_r(4, 2, 2, 5, seed=0)

    def test_distributions(self):
        t_norm, f_norm = gen_random_rank_r(5, 4, 3, 3, "normal", seed=1)
        assert np.max(np.abs(f_norm.U1.imag)) == 0.0
        _, f_shift = gen_random_rank_r(40, 4, 3, 3, "normal-shifted", seed=1)
        # factor means approach 1, 2, 3
        assert abs(np.mean(f_shift.U1.real) - 1.0) < 0.5
        _, f_cplx = gen_random_rank_r(5, 4, 3, 3, "complex-normal", seed=1)
        assert np.max(np.abs(f_cplx.U1.imag)) > 0.0
        with pytest.raises(ValueError):
            gen_random_rank_r(5, 4, 3, 3, "uniform", seed=1)
