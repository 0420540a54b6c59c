import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latstab.rhonn import (BASIS_INDEX_SETS, N_BASIS, NonFiniteError, RhonnModel,
                           SigmoidParams, basis_scalar, build_basis, build_xi,
                           sigmoid, step)


def brute_force_basis(xi):
    """Independent oracle: subset products enumerated with itertools."""
    out = []
    for size in (1, 2, 3, 4):
        for combo in itertools.combinations(range(4), size):
            out.append(math.prod(xi[i] for i in combo))
    return out


class TestSigmoid:
    def test_zero_at_origin(self):
        assert sigmoid(0.0, SigmoidParams(1.0, 1.0)) == 0.0

    def test_saturation(self):
        p = SigmoidParams(2.0, 1.0)
        assert sigmoid(1e3, p) == pytest.approx(2.0)
        assert sigmoid(-1e3, p) == pytest.approx(-2.0)

    def test_reference_value(self):
        # tanh(2 * 0.5) from the math library as independent reference
        assert sigmoid(0.5, SigmoidParams(1.0, 2.0)) == pytest.approx(math.tanh(1.0))
        assert sigmoid(0.5, SigmoidParams(1.0, 2.0)) == pytest.approx(0.761594, abs=1e-6)

    def test_odd_and_bounded(self):
        p = SigmoidParams(1.5, 0.7)
        for x in (-3.0, -0.2, 0.4, 8.0):
            assert sigmoid(-x, p) == -sigmoid(x, p)
            assert abs(sigmoid(x, p)) < p.mu

    def test_monotone(self):
        p = SigmoidParams(1.0, 2.0)
        xs = np.linspace(-4, 4, 101)
        ys = [sigmoid(x, p) for x in xs]
        assert all(b > a for a, b in zip(ys, ys[1:]))

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(ValueError):
            SigmoidParams(0.0, 1.0)
        with pytest.raises(ValueError):
            SigmoidParams(1.0, -2.0)


class TestBasis:
    def test_all_ones(self):
        assert build_basis([1.0, 1.0, 1.0, 1.0]).tolist() == [1.0] * 15

    def test_zero_annihilation(self):
        out = build_basis([0.7, 0.0, 0.0, 0.0])
        assert out[0] == 0.7
        assert np.all(out[1:] == 0.0)

    def test_hand_products(self):
        out = build_basis([2.0, 3.0, 5.0, 7.0])
        assert out[4] == 6.0     # pair (1,2)
        assert out[9] == 35.0    # pair (3,4)
        assert out[10] == 30.0   # triple (1,2,3)
        assert out[14] == 210.0  # full product

    def test_matches_brute_force_enumeration(self, rng):
        for _ in range(100):
            xi = rng.normal(0, 2, 4)
            assert build_basis(xi).tolist() == brute_force_basis(xi.tolist())

    def test_index_sets_cover_each_subset_once(self):
        seen = set(BASIS_INDEX_SETS)
        expected = set()
        for size in (1, 2, 3, 4):
            expected.update(itertools.combinations(range(4), size))
        assert seen == expected
        assert len(BASIS_INDEX_SETS) == N_BASIS
        # documented position: lexicographic within each size block
        assert list(BASIS_INDEX_SETS) == sorted(BASIS_INDEX_SETS, key=lambda c: (len(c), c))

    def test_scalar_twin_identical(self, rng):
        for _ in range(50):
            xi = rng.normal(0, 1.5, 4)
            assert list(basis_scalar(*xi.tolist())) == build_basis(xi).tolist()

    def test_vectorized_batch(self, rng):
        batch = rng.normal(0, 1, (7, 4))
        out = build_basis(batch)
        assert out.shape == (7, 15)
        for row_xi, row_phi in zip(batch, out):
            assert row_phi.tolist() == build_basis(row_xi).tolist()

    @given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
    @settings(max_examples=200, deadline=None)
    def test_bounded_inputs_give_bounded_entries(self, xi):
        out = build_basis(xi)
        for entry, combo in zip(out, BASIS_INDEX_SETS):
            bound = math.prod(abs(xi[i]) for i in combo)
            assert abs(entry) <= bound + 1e-12


class TestBuildXi:
    def test_all_zero(self, unit_model):
        assert build_xi(0.0, 0.0, 0.0, 0.0, unit_model).tolist() == [0.0] * 4

    def test_component_independence(self, unit_model):
        out = build_xi(0.3, 0.0, 0.0, 0.0, unit_model)
        assert out[0] == pytest.approx(math.tanh(0.3))
        assert out[1] == out[2] == out[3] == 0.0

    def test_speed_channel_scaling(self):
        m = RhonnModel(sig_vx=SigmoidParams(1.0, 0.05))
        out = build_xi(18.06, 0.0, 0.0, 0.0, m)
        assert out[0] == pytest.approx(math.tanh(0.903))
        assert out[0] == pytest.approx(0.71776, abs=1e-4)

    def test_strictly_inside_mu_on_operating_range(self, rng):
        # strict bound within the physical signal ranges; beyond them tanh
        # saturates to 1.0 at float precision, so only <= can hold there
        m = RhonnModel()
        for _ in range(200):
            v = (rng.uniform(-60, 60), rng.uniform(-8, 8),
                 rng.uniform(-2, 2), rng.uniform(-8.7, 8.7))
            out = build_xi(*v, m)
            for comp, p in zip(out, (m.sig_vx, m.sig_vy, m.sig_wr, m.sig_delta)):
                assert abs(comp) < p.mu
        out = build_xi(1e6, 1e6, 1e6, 1e6, m)
        assert np.all(np.abs(out) <= 1.0)


class TestStep:
    def test_null_model(self, unit_model):
        assert step(unit_model, (0.0, 0.0, 0.0), 0.0, 0.0, 0.0) == (0.0, 0.0, 0.0)

    def test_fixed_yaw_term_literal_form(self):
        # Vehicle-table gains, zero weights: the yaw update is the fixed
        # moment gain times the command (literal discrete form, no dt).
        m = RhonnModel(dt_scale_fixed_terms=False)
        out = step(m, (0.0, 0.0, 0.0), 0.0, 500.0, 0.0)
        expected = 1.715 * 500.0 / (2.0 * 3658.0 * 0.358)
        assert out[2] == pytest.approx(expected, rel=1e-12)
        assert out[2] == pytest.approx(0.3273990, abs=1e-6)
        assert out[0] == 0.0 and out[1] == 0.0

    def test_fixed_terms_dt_scaled_by_default(self):
        m = RhonnModel()
        assert m.dt_scale_fixed_terms
        out = step(m, (0.0, 0.0, 0.0), 0.0, 500.0, 0.0)
        assert out[2] == pytest.approx(0.3273990 * m.dt, abs=1e-6)

    def test_single_active_basis_entry(self):
        w = np.zeros(15)
        w[1] = 1.0  # weight on the wrapped lateral-velocity entry
        m = RhonnModel(w_vy=w, sig_vy=SigmoidParams(1.0, 1.0))
        vy = math.atanh(0.4)
        out = step(m, (0.0, vy, 0.0), 0.0, 0.0, 0.0)
        assert out[1] == pytest.approx(0.4)

    def test_deterministic(self, rng):
        w = rng.normal(0, 1, (3, 15))
        m = RhonnModel(w_vx=w[0], w_vy=w[1], w_wr=w[2])
        a = step(m, (10.0, -0.5, 0.1), 200.0, -300.0, 0.2)
        b = step(m, (10.0, -0.5, 0.1), 200.0, -300.0, 0.2)
        assert a == b

    def test_bounded_weights_bounded_output(self, rng):
        for _ in range(20):
            w = rng.normal(0, 3, (3, 15))
            m = RhonnModel(w_vx=w[0], w_vy=w[1], w_wr=w[2])
            out = step(m, tuple(rng.normal(0, 20, 3)), 0.0, 0.0, rng.normal())
            for val, wv in zip(out, (w[0], w[1], w[2])):
                assert abs(val) <= np.abs(wv).sum() + 1e-9

    def test_nonfinite_raises(self):
        w = np.full(15, 1e308)
        m = RhonnModel(w_vx=w.copy(), w_vy=w.copy(), w_wr=w.copy())
        with pytest.raises(NonFiniteError):
            step(m, (1e3, 1e3, 1e3), 0.0, 0.0, 1e3)

    def test_wrong_weight_shape_rejected(self):
        with pytest.raises(ValueError):
            RhonnModel(w_vx=np.zeros(14))

    def test_fixed_gains_positive_required(self):
        with pytest.raises(ValueError):
            RhonnModel(fixed_gain_vx=-1.0)
