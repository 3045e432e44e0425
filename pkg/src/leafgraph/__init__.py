"""leafgraph: relational image classification over similarity graphs.

Pooled CNN feature vectors (or raw pixels) become nodes of a thresholded
cosine-similarity graph; GraphSAGE-style layers with hand-written backward
passes train a node classifier, and Grad-CAM / Eigen-CAM produce relevance
heatmaps.  Everything is deterministic given a seed.
"""

__version__ = "0.1.0"

from .rng import Rng  # noqa: F401
