"""Per-pixel vegetation indices over red/green/blue/NIR reflectance bands.

NGRDI follows the (red - green) / (red + green) orientation; this is the
negation of the more common green-minus-red convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..errors import FeatureAvailabilityError

BANDS = ("red", "green", "blue", "nir")
DENOMINATOR_EPS = 1e-12

Band = np.ndarray


@dataclass(frozen=True)
class IndexDefinition:
    name: str
    long_name: str
    bands: tuple[str, ...]
    numerator: Callable[..., Band]
    denominator: Callable[..., Band]

    @property
    def needs_nir(self) -> bool:
        return "nir" in self.bands


INDICES: dict[str, IndexDefinition] = {
    d.name: d
    for d in (
        IndexDefinition(
            "GLI",
            "Green Leaf Index",
            ("red", "green", "blue"),
            lambda red, green, blue: 2 * green - red - blue,
            lambda red, green, blue: 2 * green + red + blue,
        ),
        IndexDefinition(
            "NGRDI",
            "Normalized Green-Red Difference Index",
            ("red", "green"),
            lambda red, green: red - green,
            lambda red, green: red + green,
        ),
        IndexDefinition(
            "NDVI",
            "Normalized Difference Vegetation Index",
            ("nir", "red"),
            lambda nir, red: nir - red,
            lambda nir, red: nir + red,
        ),
        IndexDefinition(
            "GNDVI",
            "Green Normalized Difference Vegetation Index",
            ("nir", "green"),
            lambda nir, green: nir - green,
            lambda nir, green: nir + green,
        ),
        IndexDefinition(
            "SAVI",
            "Soil-Adjusted Vegetation Index",
            ("nir", "red"),
            lambda nir, red: 1.5 * (nir - red),
            lambda nir, red: nir + red + 0.5,
        ),
    )
}

RGB_INDICES = ("GLI", "NGRDI")
NIR_INDICES = ("NDVI", "GNDVI", "SAVI")


def compute_index(bands: Mapping[str, Band], index: str | IndexDefinition) -> np.ndarray:
    """Evaluate ``index`` pixelwise; pixels with a vanishing denominator map to 0."""
    d = INDICES[index] if isinstance(index, str) else index
    missing = [b for b in d.bands if b not in bands or bands[b] is None]
    if missing:
        raise FeatureAvailabilityError(f"{d.name} needs band(s) {missing}")
    args = {b: np.asarray(bands[b], dtype=np.float64) for b in d.bands}
    num = d.numerator(**args)
    den = d.denominator(**args)
    ok = np.abs(den) >= DENOMINATOR_EPS
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=ok)
    return out


def available_indices(bands: Mapping[str, Band]) -> list[str]:
    have = {b for b, v in bands.items() if v is not None}
    return [name for name, d in INDICES.items() if set(d.bands) <= have]
