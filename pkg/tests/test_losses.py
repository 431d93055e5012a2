import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nwdkit.analysis import central_difference, relative_error, sample_pairs
from nwdkit.geometry import BoundingBox
from nwdkit.losses import LOSSES, ciou_loss, diou_loss, giou_loss, iou_loss, loss_value_and_grad, nwd_loss
from nwdkit.metrics import InvalidConstantError, ciou, diou, giou, iou, nwd

METRIC_OF = {"iou": iou, "giou": giou, "diou": diou, "ciou": ciou, "nwd": nwd}


def fd(loss, pred, gt, step=1e-6):
    return central_difference(lambda x: loss_value_and_grad(loss, BoundingBox(*x), gt).value, np.asarray(pred), step)


def test_nwd_loss_at_minimum():
    value, grad = nwd_loss((0, 0, 6, 6), (0, 0, 6, 6))
    assert value == 0.0
    np.testing.assert_array_equal(grad, np.zeros(4))


def test_nwd_loss_example():
    pred, gt = BoundingBox(1, 1, 6, 6), BoundingBox(0, 0, 6, 6)
    value, grad = nwd_loss(pred, gt, 12.8)
    assert value == pytest.approx(0.1046, abs=1e-4)
    numeric = fd("nwd", pred, gt)
    assert numeric[0] == pytest.approx(0.04947, abs=1e-5)
    assert grad[0] == pytest.approx(numeric[0], rel=1e-6)


def test_nwd_loss_disjoint_points_back_to_gt():
    pred, gt = BoundingBox(10, 0, 2, 2), BoundingBox(0, 0, 2, 2)
    _, grad = nwd_loss(pred, gt)
    # pred sits at +x of gt, so the loss grows with cx and -grad moves it back
    assert grad[0] > 0
    assert np.linalg.norm(grad) > 0
    assert relative_error(grad, fd("nwd", pred, gt)) < 1e-5
    assert nwd_loss(pred.translate(-grad[0], 0), gt).value < nwd_loss(pred, gt).value


def test_nwd_loss_bad_constant():
    with pytest.raises(InvalidConstantError):
        nwd_loss((0, 0, 1, 1), (0, 0, 1, 1), 0)


def test_iou_loss_failure_cases():
    value, grad = iou_loss((10, 0, 2, 2), (0, 0, 2, 2))
    assert value == 1.0
    assert grad[0] == grad[1] == 0
    _, grad = iou_loss((0, 0, 2, 2), (0, 0, 8, 8))
    assert grad[0] == grad[1] == 0
    numeric = fd("iou", BoundingBox(0.3, -0.2, 2, 2), BoundingBox(0, 0, 8, 8))
    assert abs(numeric[0]) < 1e-9 and abs(numeric[1]) < 1e-9


@pytest.mark.parametrize("loss", list(LOSSES))
def test_loss_zero_at_identity(loss):
    value, _ = loss_value_and_grad(loss, (3, 4, 5, 6), (3, 4, 5, 6))
    assert value == pytest.approx(0.0, abs=1e-15)


def test_giou_loss_disjoint_value():
    assert giou_loss((1, 1, 2, 2), (5, 1, 2, 2)).value == pytest.approx(1 + 1 / 3, abs=1e-12)


@pytest.mark.parametrize("loss", list(LOSSES))
def test_loss_value_matches_metric(loss):
    for pred, gt in sample_pairs("random", 50, seed=7):
        assert loss_value_and_grad(loss, pred, gt).value == pytest.approx(1 - METRIC_OF[loss](pred, gt), abs=1e-12)


@pytest.mark.parametrize("loss", list(LOSSES))
@pytest.mark.parametrize("pairs", ["random", "disjoint", "containment"])
def test_gradients_match_finite_differences(loss, pairs):
    for pred, gt in sample_pairs(pairs, 100, seed=sum(map(ord, loss + pairs))):
        analytic = loss_value_and_grad(loss, pred, gt).grad
        assert relative_error(analytic, fd(loss, pred, gt)) < 1e-5, (pred, gt)


def test_nwd_gradient_nonzero_in_iou_failure_cases():
    for kind in ("disjoint", "containment"):
        for pred, gt in sample_pairs(kind, 50, seed=1):
            assert np.linalg.norm(nwd_loss(pred, gt).grad) > 0
            assert np.linalg.norm(iou_loss(pred, gt).grad[:2]) == 0


coords = st.floats(-100, 100)
sizes = st.floats(1, 50)


@given(coords, coords, sizes, sizes, coords, coords, sizes, sizes, coords, coords)
def test_nwd_loss_translation_invariant_and_bounded(x1, y1, w1, h1, x2, y2, w2, h2, tx, ty):
    p, g = BoundingBox(x1, y1, w1, h1), BoundingBox(x2, y2, w2, h2)
    value = nwd_loss(p, g).value
    assert 0 <= value < 1
    assert nwd_loss(p.translate(tx, ty), g.translate(tx, ty)).value == pytest.approx(value, abs=1e-9)


def test_descent_converges_from_disjoint_start():
    gt = BoundingBox(20, 20, 6, 6)
    x = np.array([5.0, 8.0, 3.0, 9.0])
    lr = 8.0
    for _ in range(2000):
        _, grad = nwd_loss(BoundingBox(*x), gt)
        x = x - lr * grad
        lr *= 0.995
    assert nwd_loss(BoundingBox(*x), gt).value < 1e-3


def test_ciou_loss_zero_aspect_penalty_branch():
    # equal aspect ratio: v = 0 and the penalty term drops out of the gradient
    pred, gt = BoundingBox(0.5, 0.25, 4, 2), BoundingBox(0, 0, 6, 3)
    assert ciou_loss(pred, gt).value == pytest.approx(diou_loss(pred, gt).value, abs=1e-15)
    assert relative_error(ciou_loss(pred, gt).grad, fd("ciou", pred, gt)) < 1e-5
    assert math.isfinite(ciou_loss(pred, gt).value)
