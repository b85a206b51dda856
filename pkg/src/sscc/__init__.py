"""Spatial soft-core cache placement on Poisson node processes."""

__version__ = "0.1.0"

from .demand import DemandModel, sample_request, zipf_pmf  # noqa: E402
from .placement import (  # noqa: E402
    HardCore,
    Independent,
    MarkLaw,
    PlacementResult,
    SoftCore,
    SoftCoreParams,
    kernel_fc,
    place_all_items,
    thin_independent,
    thin_matern2,
    thin_sscc,
)
from .spatial import MarkedPoint, Point2D, PointPattern, Window, distance, lens_area, sample_ppp  # noqa: E402
from .streams import StreamFactory, stream  # noqa: E402

__all__ = [
    "DemandModel", "HardCore", "Independent", "MarkLaw", "MarkedPoint", "PlacementResult", "Point2D",
    "PointPattern", "SoftCore", "SoftCoreParams", "StreamFactory", "Window", "distance", "kernel_fc",
    "lens_area", "place_all_items", "sample_ppp", "sample_request", "stream", "thin_independent",
    "thin_matern2", "thin_sscc", "zipf_pmf",
]
