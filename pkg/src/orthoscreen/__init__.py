"""orthoscreen: synthetic arch point clouds, graph segmentation and plan scoring."""

__version__ = "0.1.0"
