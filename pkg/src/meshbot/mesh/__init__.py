"""Triangle-mesh geometry: I/O, repair, mass properties, slicing and cuts."""
from .core import CrossSection, MassProperties, Plane, TriangleMesh, concatenate
from .io import load_mesh, parse_mesh, save_obj, save_stl, stl_bytes
from .mass import TARGET_VOLUME, mass_properties, scale_to_volume
from .repair import RepairReport, connected_component_count, is_watertight, validate_and_repair
from .slicing import area_profile, capped_halves, cross_section, plane_cut, split_by_plane
from .symmetry import best_vertical_symmetry, bilateral_symmetry_score

__all__ = [
    "CrossSection", "MassProperties", "Plane", "TriangleMesh", "concatenate",
    "load_mesh", "parse_mesh", "save_obj", "save_stl", "stl_bytes",
    "TARGET_VOLUME", "mass_properties", "scale_to_volume",
    "RepairReport", "connected_component_count", "is_watertight", "validate_and_repair",
    "area_profile", "capped_halves", "cross_section", "plane_cut", "split_by_plane",
    "best_vertical_symmetry", "bilateral_symmetry_score",
]
