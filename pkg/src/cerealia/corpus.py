"""Shipped corpora: the synthetic five-attribute weather stream used by the
experiments and benchmarks, plus schema presets matching the two real
station networks (Quincy and Beutenberg) for CSV ingestion.

The synthetic attribute parameters balance three constraints: every
attribute stays in its physical range (solar radiation and wind speed
never go negative), the diurnal and seasonal swings dominate the noise
floor so the stream is predictable enough for autoregressive imputation,
and the resulting clean windows are tight around their diurnal-phase
templates, which keeps injected faults well separated from the clean
residual spread after standardization.
"""

from __future__ import annotations

import numpy as np

from .faults import DatasetConfig, LabeledDataset, build_labeled_dataset
from .ingest import AttributeSynth, SynthConfig, synth_generate
from .model import AttributeSchema, WeatherSeries, WindowSpec

FST_INPUT_NAMES = ("air_temperature", "wind_speed", "dew_point", "solar_radiation")

DEFAULT_ATTRIBUTES: tuple[AttributeSynth, ...] = (
    AttributeSynth("air_temperature", "degC", base=18.0, diurnal_amp=5.0, seasonal_amp=2.0, noise_std=0.25),
    AttributeSynth("wind_speed", "m/s", base=3.2, diurnal_amp=1.0, seasonal_amp=0.3, noise_std=0.08),
    AttributeSynth("dew_point", "degC", base=10.0, diurnal_amp=2.5, seasonal_amp=1.5, noise_std=0.15),
    AttributeSynth("solar_radiation", "W/m^2", base=500.0, diurnal_amp=220.0, seasonal_amp=60.0, noise_std=8.0),
    AttributeSynth("pressure", "kPa", base=101.3, diurnal_amp=0.4, seasonal_amp=0.5, noise_std=0.03),
)

DEFAULT_WINDOW = WindowSpec(length=48, stride=24)

# 48 + 9999 strides of 24: exactly ten thousand windows.
DEFAULT_CORPUS_SAMPLES = DEFAULT_WINDOW.length + 9999 * DEFAULT_WINDOW.stride


def default_synth_config() -> SynthConfig:
    return SynthConfig(attributes=DEFAULT_ATTRIBUTES, sampling_interval=300)


def corpus_series(seed: int, n_samples: int = DEFAULT_CORPUS_SAMPLES) -> WeatherSeries:
    """The shipped synthetic corpus: five attributes at five-minute cadence."""
    return synth_generate(default_synth_config(), n_samples, seed)


def corpus_dataset(
    seed: int,
    pct_inconsistent: float,
    n_samples: int = DEFAULT_CORPUS_SAMPLES,
    window: WindowSpec = DEFAULT_WINDOW,
) -> LabeledDataset:
    """Generate the corpus and corrupt the requested share of its windows."""
    series = corpus_series(seed, n_samples)
    return build_labeled_dataset(
        series,
        DatasetConfig(pct_inconsistent=pct_inconsistent, window=window, seed=seed),
    )


def quincy_schema() -> AttributeSchema:
    """Quincy network export layout: 20 attributes at five-minute cadence."""
    return AttributeSchema(
        attributes=(
            ("Air Temperature", "degC"),
            ("Atmospheric Pressure", "kPa"),
            ("Vapor Pressure", "kPa"),
            ("Dew Point", "degC"),
            ("Vapor Pressure Deficit", "kPa"),
            ("Reference Pressure", "kPa"),
            ("Wind Speed", "m/s"),
            ("Wind Direction", "deg"),
            ("Precipitation", "mm"),
            ("Max Precipitation Rate", "mm/h"),
            ("Solar Radiation", "W/m^2"),
            ("Lightning Activity", "count"),
            ("Lightning Distance", "km"),
            ("Logger Temperature", "degC"),
            ("Battery Voltage", "mV"),
            ("Battery Percent", "%"),
            ("Gust Speed", "m/s"),
            ("RH Sensor Temperature", "degC"),
            ("Soil Temperature", "degC"),
            ("Leaf Wetness", "min"),
        ),
        sampling_interval=300,
    )


def beutenberg_schema() -> AttributeSchema:
    """Beutenberg station export layout: 20 attributes at ten-minute cadence."""
    return AttributeSchema(
        attributes=(
            ("Air Temperature", "degC"),
            ("Potential Temperature", "K"),
            ("Dew Point", "degC"),
            ("Logger Temperature", "degC"),
            ("Vapor Pressure", "mbar"),
            ("Maximum Vapor Pressure", "mbar"),
            ("Atmospheric Pressure", "mbar"),
            ("Vapor Pressure Deficit", "mbar"),
            ("Relative Humidity", "%"),
            ("Specific Humidity", "g/kg"),
            ("Concentration of H2O", "mmol/mole"),
            ("Air Density", "g/m^3"),
            ("Wind Velocity", "m/s"),
            ("Wind Direction", "deg"),
            ("Maximum Wind Velocity", "m/s"),
            ("Rainfall", "mm"),
            ("Rainfall Duration", "s"),
            ("Shortwave Downward Radiation", "W/m^2"),
            ("Photosynthetically Active Radiation", "umol/m^2/s"),
            ("CO2", "ppm"),
        ),
        sampling_interval=600,
    )


SCHEMA_PRESETS = {
    "synthetic": lambda: default_synth_config().schema(),
    "quincy": quincy_schema,
    "beutenberg": beutenberg_schema,
}
