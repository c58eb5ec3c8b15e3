"""Video object segmentation pipeline tooling.

Non-neural core of an RVOS post-processing pipeline: key-frame
selection, bidirectional mask propagation orchestration, pixel-majority
fusion, J/F evaluation and pseudo-label dataset construction.
"""

__version__ = "0.1.0"
