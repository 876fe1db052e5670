"""Kinetic robot model: assembly, URDF export and the variant bank."""
from .assembly import (AXES, DENSITY, ElectronicsSpec, Joint, KineticRobotModel, Link, assemble,
                       density_for_total_mass)
from .bank import N_SCALES, SCALE_STEP, VariantBank, elongate, export_bank, generate_variant_bank, leg_reach
from .store import load_model, model_from_dict, model_to_dict, save_model
from .urdf import export_urdf, parse_urdf, urdf_string, validate_urdf

__all__ = [
    "AXES", "DENSITY", "ElectronicsSpec", "Joint", "KineticRobotModel", "Link", "assemble",
    "density_for_total_mass", "N_SCALES", "SCALE_STEP", "VariantBank", "elongate", "export_bank",
    "generate_variant_bank", "leg_reach", "load_model", "model_from_dict", "model_to_dict", "save_model",
    "export_urdf", "parse_urdf", "urdf_string", "validate_urdf",
]
