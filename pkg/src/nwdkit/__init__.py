"""Normalized Wasserstein Distance and IoU-family tools for tiny object detection."""
from .anchors import AnchorGridConfig, generate_anchors
from .annotations import AnnotatedImage, load_coco, save_coco
from .assign import (
    AssignerConfig,
    AssignmentResult,
    MaxSimilarityAssigner,
    assign,
    avg_positives_per_gt,
    label_flip_count,
)
from .geometry import (
    BoundingBox,
    Gaussian2D,
    InvalidBoxError,
    box_to_gaussian,
    gaussian_pdf,
    mahalanobis_sq,
)
from .losses import ciou_loss, diou_loss, giou_loss, iou_loss, loss_value_and_grad, nwd_loss
from .metrics import (
    CIOU,
    DEFAULT_C,
    DIOU,
    GIOU,
    IOU,
    MetricKind,
    PairwiseSimilarity,
    ciou,
    diou,
    giou,
    iou,
    nwd,
    pairwise_similarity,
    similarity,
    wasserstein_sq_boxes,
    wasserstein_sq_general,
)
from .nms import Detection, GreedyNMS, NmsConfig, nms, nms_keep, nms_reference

__version__ = "0.1.0"
