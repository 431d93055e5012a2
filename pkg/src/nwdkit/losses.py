"""Box regression losses with analytic gradients w.r.t. the predicted box.

Every loss returns ``LossValueAndGrad(value, grad)`` where ``grad`` is
``(dL/dcx, dL/dcy, dL/dw, dL/dh)`` of the prediction. IoU-family losses are
``1 - metric``; the NWD loss is ``1 - NWD(pred, gt)``.

At kinks of the piecewise IoU geometry (coinciding edges) the derivative of
``min``/``max`` is taken from the prediction's side; those points have
measure zero.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .geometry import as_box
from .metrics import DEFAULT_C, _check_c

# guard under the square root of the NWD gradient denominator
NWD_GRAD_EPS = 1e-12

_CIOU_K = 4 / math.pi**2


class LossValueAndGrad(NamedTuple):
    value: float
    grad: np.ndarray


def nwd_loss(pred, gt, c: float = DEFAULT_C) -> LossValueAndGrad:
    c = _check_c(c)
    p, g = as_box(pred), as_box(gt)
    dx, dy = p.cx - g.cx, p.cy - g.cy
    dw, dh = p.w - g.w, p.h - g.h
    w2 = dx * dx + dy * dy + dw * dw / 4 + dh * dh / 4
    sim = math.exp(-math.sqrt(w2) / c)
    if w2 == 0:
        # minimum of a norm: zero is a valid subgradient
        return LossValueAndGrad(1.0 - sim, np.zeros(4))
    scale = sim / (c * math.sqrt(w2 + NWD_GRAD_EPS))
    grad = scale * np.array([dx, dy, dw / 4, dh / 4])
    return LossValueAndGrad(1.0 - sim, grad)


class _Geometry:
    """Overlap/enclosure quantities of (pred, gt) with their pred-gradients."""

    def __init__(self, p, g):
        px1, px2 = p.cx - p.w / 2, p.cx + p.w / 2
        py1, py2 = p.cy - p.h / 2, p.cy + p.h / 2
        gx1, gx2 = g.cx - g.w / 2, g.cx + g.w / 2
        gy1, gy2 = g.cy - g.h / 2, g.cy + g.h / 2

        iw = min(px2, gx2) - max(px1, gx1)
        ih = min(py2, gy2) - max(py1, gy1)
        # d(min(p2, g2)) and d(max(p1, g1)) w.r.t. the pred edges
        iw_dcx, iw_dw = _span_grad(px2 <= gx2, px1 >= gx1) if iw > 0 else (0.0, 0.0)
        ih_dcy, ih_dh = _span_grad(py2 <= gy2, py1 >= gy1) if ih > 0 else (0.0, 0.0)
        iw, ih = max(iw, 0.0), max(ih, 0.0)

        self.inter = iw * ih
        self.d_inter = np.array([iw_dcx * ih, ih_dcy * iw, iw_dw * ih, ih_dh * iw])
        self.union = p.w * p.h + g.w * g.h - self.inter
        self.d_union = np.array([0.0, 0.0, p.h, p.w]) - self.d_inter
        self.iou = self.inter / self.union
        self.d_iou = (self.d_inter * self.union - self.inter * self.d_union) / self.union**2

        self.ew = max(px2, gx2) - min(px1, gx1)
        self.eh = max(py2, gy2) - min(py1, gy1)
        ew_dcx, ew_dw = _span_grad(px2 >= gx2, px1 <= gx1)
        eh_dcy, eh_dh = _span_grad(py2 >= gy2, py1 <= gy1)
        self.d_ew = np.array([ew_dcx, 0.0, ew_dw, 0.0])
        self.d_eh = np.array([0.0, eh_dcy, 0.0, eh_dh])

    def diou_terms(self, p, g):
        dx, dy = p.cx - g.cx, p.cy - g.cy
        rho2 = dx * dx + dy * dy
        d_rho2 = np.array([2 * dx, 2 * dy, 0.0, 0.0])
        c2 = self.ew**2 + self.eh**2
        d_c2 = 2 * self.ew * self.d_ew + 2 * self.eh * self.d_eh
        penalty = rho2 / c2
        d_penalty = (d_rho2 * c2 - rho2 * d_c2) / c2**2
        return penalty, d_penalty


def _span_grad(upper_from_pred: bool, lower_from_pred: bool) -> tuple[float, float]:
    """Derivative of ``upper - lower`` w.r.t. pred (cx, w) along one axis.

    The pred's upper edge is ``cx + w/2`` and lower edge ``cx - w/2``.
    """
    du = 1.0 if upper_from_pred else 0.0
    dl = 1.0 if lower_from_pred else 0.0
    return du - dl, (du + dl) / 2


def iou_loss(pred, gt) -> LossValueAndGrad:
    p, g = as_box(pred), as_box(gt)
    geo = _Geometry(p, g)
    return LossValueAndGrad(1.0 - geo.iou, -geo.d_iou)


def giou_loss(pred, gt) -> LossValueAndGrad:
    p, g = as_box(pred), as_box(gt)
    geo = _Geometry(p, g)
    enclose = geo.ew * geo.eh
    d_enclose = geo.d_ew * geo.eh + geo.ew * geo.d_eh
    # giou = iou - 1 + union / enclose
    ratio = geo.union / enclose
    d_ratio = (geo.d_union * enclose - geo.union * d_enclose) / enclose**2
    value = geo.iou - 1.0 + ratio
    return LossValueAndGrad(1.0 - value, -(geo.d_iou + d_ratio))


def diou_loss(pred, gt) -> LossValueAndGrad:
    p, g = as_box(pred), as_box(gt)
    geo = _Geometry(p, g)
    penalty, d_penalty = geo.diou_terms(p, g)
    return LossValueAndGrad(1.0 - (geo.iou - penalty), -(geo.d_iou - d_penalty))


def ciou_loss(pred, gt) -> LossValueAndGrad:
    p, g = as_box(pred), as_box(gt)
    geo = _Geometry(p, g)
    penalty, d_penalty = geo.diou_terms(p, g)

    diff = math.atan(p.w / p.h) - math.atan(g.w / g.h)
    v = _CIOU_K * diff * diff
    r2 = p.w * p.w + p.h * p.h
    d_v = 2 * _CIOU_K * diff * np.array([0.0, 0.0, p.h / r2, -p.w / r2])

    if v > 0:
        # alpha * v == v^2 / D with D = 1 - iou + v; differentiated through alpha
        denom = 1.0 - geo.iou + v
        d_denom = d_v - geo.d_iou
        aspect = v * v / denom
        d_aspect = (2 * v * d_v * denom - v * v * d_denom) / denom**2
    else:
        aspect, d_aspect = 0.0, np.zeros(4)

    value = geo.iou - penalty - aspect
    return LossValueAndGrad(1.0 - value, -(geo.d_iou - d_penalty - d_aspect))


LOSSES = {
    "nwd": nwd_loss,
    "iou": iou_loss,
    "giou": giou_loss,
    "diou": diou_loss,
    "ciou": ciou_loss,
}


def loss_value_and_grad(kind: str, pred, gt, c: float = DEFAULT_C) -> LossValueAndGrad:
    kind = kind.lower()
    if kind not in LOSSES:
        raise ValueError(f"unknown loss {kind!r}, expected one of {tuple(LOSSES)}")
    if kind == "nwd":
        return nwd_loss(pred, gt, c)
    return LOSSES[kind](pred, gt)
