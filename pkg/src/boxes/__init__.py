"""Oriented boxes, residual coding, rotated IoU, anchors, matching and NMS."""

from src.boxes.box import Box7, Residual7, normalize_angle
from src.boxes.codec import BoxCodec, decode, encode
from src.boxes.iou import iou_3d, iou_bev
from src.boxes.nms import nms

__all__ = ["Box7", "Residual7", "normalize_angle", "BoxCodec", "encode", "decode", "iou_bev", "iou_3d", "nms"]
