"""Numerical laboratory for 3-dimensional pseudohermitian and CR geometry."""

from .catalog import CatalogError, geometry_catalog, parse_geometry
from .fields import Chart, ChartError, Field, Form, exterior_d, integrate, wedge
from .phstructure import (DeformationState, PseudohermitianStructure, StructureError,
                          solve_structure, verify_identities)

__version__ = "0.1.0"

__all__ = [
    "CatalogError", "Chart", "ChartError", "DeformationState", "Field", "Form",
    "PseudohermitianStructure", "StructureError", "exterior_d", "geometry_catalog",
    "integrate", "parse_geometry", "solve_structure", "verify_identities", "wedge",
]
