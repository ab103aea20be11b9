import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xdocvec import tensor as T
from xdocvec.errors import ContractError, DimensionError
from xdocvec.optim import Adam, AdamState, adam_step


class TestAdamStep:
    def test_zero_gradient_is_identity(self):
        p = T.Tensor([[1.0, -2.0, 3.0]], requires_grad=True)
        before = p.data.copy()
        state = AdamState(alpha=0.01)
        adam_step([p], [np.zeros_like(p.data)], state)
        np.testing.assert_array_equal(p.data, before)
        assert state.step == 1

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31))
    def test_zero_gradient_identity_property(self, seed):
        rng = np.random.default_rng(seed)
        p = T.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        before = p.data.copy()
        adam_step([p], [np.zeros_like(p.data)], AdamState())
        np.testing.assert_array_equal(p.data, before)

    def test_first_step_magnitude_is_alpha_sign(self):
        # closed form: after one step, delta = alpha * g / (|g| + eps)
        alpha = 0.01
        g = np.array([[2.0, -0.5, 1e-3]])
        p = T.Tensor(np.zeros((1, 3)), requires_grad=True)
        state = AdamState(alpha=alpha)
        adam_step([p], [g], state)
        expected = -alpha * g / (np.abs(g) + state.epsilon)
        np.testing.assert_allclose(p.data, expected, atol=1e-12)
        # |delta| deviates from alpha by eps/|g| at most
        np.testing.assert_allclose(np.abs(p.data), alpha, rtol=1e-4)

    def test_quadratic_converges_to_optimum(self):
        w = T.Tensor([[0.0]], requires_grad=True)
        state = AdamState(alpha=0.01)
        for _ in range(2000):
            w.zero_grad()
            loss = T.sum_all(T.square(T.shift(w, -3.0)))
            T.backward(loss)
            adam_step([w], [w.grad], state)
        assert abs(w.item() - 3.0) < 1e-3
        assert state.step == 2000

    def test_shape_mismatch_rejected(self):
        p = T.Tensor(np.zeros((2, 2)), requires_grad=True)
        with pytest.raises(DimensionError):
            adam_step([p], [np.zeros((2, 3))], AdamState())


class TestAdamWrapper:
    def test_frozen_parameter_rejected(self):
        frozen = T.Tensor(np.zeros(3), requires_grad=False)
        with pytest.raises(ContractError, match="frozen"):
            Adam([("w", frozen)])

    def test_step_uses_grad_buffers(self):
        w = T.Tensor([[1.0]], requires_grad=True)
        opt = Adam([("w", w)], alpha=0.1)
        opt.zero_grad()
        T.backward(T.sum_all(T.square(w)))
        opt.step()
        assert w.item() < 1.0
