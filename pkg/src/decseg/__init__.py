"""Category-wise semantic segmentation with learned mask fusion."""

__version__ = "0.1.0"
