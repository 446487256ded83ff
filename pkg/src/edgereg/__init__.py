"""Refine a camera pose against LiDAR scans by aligning 3D corner features with image edges."""

from .geometry import CameraIntrinsics, Pose
from .pipeline import register

__version__ = "0.1.0"

__all__ = ["CameraIntrinsics", "Pose", "register", "__version__"]
