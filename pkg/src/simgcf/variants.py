"""Named model configurations: SimGCF low/high and the ablation variants."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .filters import FilterSpec, ScalerParams


@dataclass(frozen=True)
class Variant:
    name: str
    quadrant: str
    space_flip: bool
    use_scaler: bool
    basis: str = "jacobi"
    description: str = ""


VARIANTS = {
    v.name: v
    for v in (
        Variant("simgcf-i", "I", False, True, description="scaled low-frequency filter"),
        Variant("simgcf-iii", "III", True, True, description="scaled high-frequency filter with space flip"),
        Variant("jgcf-l", "I", False, False, description="low-frequency Jacobi filter"),
        Variant("jgcf-h", "III", False, False, description="high-frequency Jacobi filter"),
        Variant("jgcf-h-sf", "III", True, False, description="high-frequency Jacobi filter with space flip"),
        Variant("lightgcn", "I", False, False, basis="monomial", description="uniform mean over hops"),
    )
}


def default_flip(quadrant: str) -> bool:
    """Filters that are negative at lam = 1 (III, IV) need the flip to be expressed."""
    return quadrant in ("III", "IV")


def quadrant_variant(quadrant: str, space_flip: bool | None = None) -> Variant:
    """SimGCF in an arbitrary quadrant (``--variant I`` ... ``--variant IV``)."""
    flip = default_flip(quadrant) if space_flip is None else space_flip
    return Variant(f"simgcf-{quadrant.lower()}", quadrant, flip, True)


def resolve_variant(name: str) -> Variant:
    key = name.strip()
    if key.upper() in ("I", "II", "III", "IV"):
        return quadrant_variant(key.upper())
    try:
        return VARIANTS[key.lower()]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)} or I-IV") from None


def build_filter(variant: Variant, base: FilterSpec | None = None,
                 scaler: ScalerParams | None = None) -> FilterSpec:
    """Fitted filter for a variant, starting from ``base`` backbone settings."""
    base = base or FilterSpec()
    if variant.basis != base.basis:
        base = replace(base, basis=variant.basis, base_coefficients=None)
    spec = replace(
        base,
        quadrant=variant.quadrant,
        scaler=(scaler or base.scaler or ScalerParams()) if variant.use_scaler else None,
        fitted_coefficients=None,
        fit_residual=None,
    )
    return spec.fit()
