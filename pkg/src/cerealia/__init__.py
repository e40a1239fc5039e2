"""Cerealia: a digital-twin engine for agricultural weather streams.

The package generates and ingests weather time series, injects the four
canonical sensor fault classes into them, trains detectors that classify
sliding windows as clean or faulty, imputes flagged samples with an
autoregressive model, and measures how much of a downstream decision metric
(fruit surface temperature) is recovered by doing so. A streaming runtime,
an HTTP service and a CLI wrap the same core functions.
"""

__version__ = "0.1.0"

from .model import (
    AttributeSchema,
    NoiseClass,
    ScalerParams,
    WeatherSample,
    WeatherSeries,
    WindowSpec,
)

__all__ = [
    "AttributeSchema",
    "NoiseClass",
    "ScalerParams",
    "WeatherSample",
    "WeatherSeries",
    "WindowSpec",
    "__version__",
]
