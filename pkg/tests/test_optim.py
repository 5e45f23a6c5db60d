import numpy as np
import pytest

from sthode.optim import Adam, TrainingError, grad_check, grad_check_params
from sthode.tensor import Parameter, Tensor, hadamard, huber_loss, tsum


def test_zero_grad_is_identity():
    p = Parameter("w", np.array([1.0, -2.0]))
    opt = Adam([p], lr=0.01)
    p.tensor.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(p.tensor.data, [1.0, -2.0])
    assert opt.state.step_count == 1


def test_single_step_moves_by_about_lr():
    # with grad 1, both bias-corrected moments are 1, so the step is
    # lr / (1 + eps) ~ lr
    p = Parameter("w", np.array([0.0]))
    opt = Adam([p], lr=0.001)
    p.tensor.grad = np.array([1.0])
    opt.step()
    assert p.tensor.data[0] == pytest.approx(-0.001, rel=1e-6)


def test_two_identical_steps_monotone():
    p = Parameter("w", np.array([0.0]))
    opt = Adam([p], lr=0.001)
    vals = [0.0]
    for _ in range(2):
        p.tensor.grad = np.array([1.0])
        opt.step()
        vals.append(p.tensor.data[0])
    assert opt.state.step_count == 2
    assert vals[2] < vals[1] < vals[0]


def test_nonfinite_gradient_names_parameter():
    p = Parameter("block0.fusion.w", np.zeros(1))
    opt = Adam([p])
    p.tensor.grad = np.array([np.nan])
    with pytest.raises(TrainingError, match="block0.fusion.w"):
        opt.step()


def test_moments_match_parameter_shapes():
    p = Parameter("w", np.zeros((3, 4)))
    opt = Adam([p])
    assert opt.state.first_moment["w"].shape == (3, 4)
    assert opt.state.second_moment["w"].shape == (3, 4)


class TestGradCheck:
    def test_square(self):
        rep = grad_check(lambda x: tsum(hadamard(x, x)), [np.array([3.0])])
        assert rep.passed
        # analytic gradient is 6; the FD value must agree
        assert rep.max_rel_error < 1e-6

    def test_huber_off_seam(self):
        rep = grad_check(
            lambda yh: huber_loss(Tensor(np.array([1.0, 3.0])), yh, 1.0),
            [np.array([0.4, 0.2])],
            tol=1e-4,
        )
        assert rep.passed

    def test_params_variant(self):
        p = Parameter("w", np.array([1.0, 2.0]))
        rep = grad_check_params(lambda: tsum(hadamard(p.tensor, p.tensor)), [p], tol=1e-6)
        assert rep.passed
