"""Short-horizon blood-glucose prediction with diffusion-geometry networks.

Submodules: ``data`` (CGM ingestion, windows, smoothing, splits), ``legendre``
(filtered Legendre derivative estimator), ``diffusion`` (graph Laplacian and
summability regression), ``predega`` (PRED-EGA scoring), ``pipeline`` (two-layer
deep pipeline and trial harness), ``baselines`` (kernel ridge regression) and
``cli`` (command-line entry point).
"""

from .config import ConfigError, ExperimentConfig, load_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "ExperimentConfig", "load_config", "__version__"]
