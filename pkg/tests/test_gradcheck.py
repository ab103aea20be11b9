import numpy as np
import pytest

from xdocvec import tensor as T
from xdocvec.errors import ContractError
from xdocvec.gradcheck import grad_check
from xdocvec.rnn import GruParams, gru_scan, gru_step


def test_linear_function_machine_precision():
    rng = np.random.default_rng(0)
    w = T.Tensor(rng.standard_normal((1, 4)), requires_grad=True)
    c = T.Tensor(rng.standard_normal((4, 1)))
    result = grad_check(lambda: T.sum_all(T.matmul(w, c)), {"w": w})
    assert result.passed
    assert result.max_rel_err < 1e-8


def test_softmax_cross_entropy_toy():
    rng = np.random.default_rng(1)
    w = T.Tensor(rng.standard_normal((3, 5)) * 0.5, requires_grad=True)
    x = T.Tensor(rng.standard_normal((4, 3)))
    targets = [0, 3, 1, 4]

    def f():
        return T.softmax_cross_entropy(T.matmul(x, w), targets)

    result = grad_check(f, {"w": w}, h=1e-5, tol=1e-6)
    assert result.passed, str(result)
    assert result.max_rel_err < 1e-6


def test_nondeterminism_detected():
    w = T.Tensor([[1.0]], requires_grad=True)
    state = {"n": 0}

    def f():
        state["n"] += 1
        return T.sum_all(T.scale(w, float(state["n"])))

    with pytest.raises(ContractError, match="deterministic"):
        grad_check(f, {"w": w})


def test_gru_step_gradients():
    rng = np.random.default_rng(2)
    p = GruParams.create(3, 4, rng)
    x = T.Tensor(rng.standard_normal((1, 3)), requires_grad=True)
    h = T.Tensor(rng.standard_normal((1, 4)), requires_grad=True)
    params = {"x": x, "h": h}
    params.update(dict(p.named_tensors("gru")))

    def f():
        return T.sum_all(T.square(gru_step(p, x, h)))

    result = grad_check(f, params, h=1e-5, tol=1e-6)
    assert result.passed, str(result)


def test_gru_scan_gradients_including_reverse():
    rng = np.random.default_rng(3)
    p = GruParams.create(2, 3, rng)
    xs = T.Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    params = {"xs": xs}
    params.update(dict(p.named_tensors("gru")))

    def f():
        fwd = gru_scan(p, xs)
        bwd = gru_scan(p, xs, reverse=True)
        return T.sum_all(T.square(T.concat([fwd, bwd], axis=1)))

    result = grad_check(f, params, h=1e-5, tol=1e-6)
    assert result.passed, str(result)
