"""Scale-controllable artistic text stylization.

Deforms glyph shapes toward a style subject's silhouette by a continuous
parameter in [0, 1] and renders the style's texture on top, trained from a
single style image plus its structure map.
"""

__version__ = "0.1.0"

from .imageio import ImageGrid, StyleAsset, TextDataset  # noqa: F401
from .pipeline import RenderRequest, StyleModelBundle, load_bundle, stylize  # noqa: F401
