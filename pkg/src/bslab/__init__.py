"""Numerical toolkit for radial-power products of convex bodies and their polars.

Bodies, sphere quadrature, the product functional ``I^(1/alpha) J^(1/beta)``,
exponent bounds with gamma-scans, and a small CLI on top.
"""

__version__ = "0.1.0"

from .bodies import (  # noqa: E402
    Box,
    CenteredBody,
    Ellipsoid,
    HPolytopeSym,
    LinearImage,
    Rhombus,
    body_from_dict,
    contains,
    loewner_ellipsoid,
    polar,
    radial_at,
    sandwich_check,
    support_at,
)
from .functionals import (  # noqa: E402
    ExponentPair,
    bs_product,
    dual_quermassintegral,
    mean_power,
    polar_radial_power_integral,
    radial_power_integral,
    s_integral,
    santalo_point,
)
from .quadrature import RuleConfig, gauss_product_rule, integrate, monte_carlo_rule  # noqa: E402

__all__ = [
    "Box", "CenteredBody", "Ellipsoid", "HPolytopeSym", "LinearImage", "Rhombus",
    "body_from_dict", "contains", "loewner_ellipsoid", "polar", "radial_at",
    "sandwich_check", "support_at", "ExponentPair", "bs_product",
    "dual_quermassintegral", "mean_power", "polar_radial_power_integral",
    "radial_power_integral", "s_integral", "santalo_point", "RuleConfig",
    "gauss_product_rule", "integrate", "monte_carlo_rule",
]
