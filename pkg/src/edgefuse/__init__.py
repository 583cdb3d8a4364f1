"""
edgefuse - depth-edge estimation and depth layering.

This package provides:
- Analytic depth-edge ground truth from clean disparity and normals
- A numpy encoder-decoder that fuses color, disparity and normal estimates
- Hierarchical segmentation and edge-guided disparity refinement
- A boundary evaluation harness and synthetic scene generator
"""

from edgefuse.config import Config, RunConfig, load_config, load_run_config

__version__ = "0.1.0"
__all__ = ["Config", "RunConfig", "load_config", "load_run_config", "main"]


def main() -> None:
    """Entry point for the edgefuse command."""
    import sys

    from edgefuse.cli import run

    sys.exit(run(sys.argv[1:]))
