"""Panorama stitching from binary features, RANSAC homographies and feathered seams."""

from .image import Image, load_image, save_image, to_gray, resize_to_megapix
from .pipeline import StitchConfig, StitchResult, stitch

__version__ = "0.1.0"

__all__ = ["Image", "load_image", "save_image", "to_gray", "resize_to_megapix",
           "StitchConfig", "StitchResult", "stitch"]
