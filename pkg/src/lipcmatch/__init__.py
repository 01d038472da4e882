"""lipcmatch: illumination-insensitive colour template matching.

Colour images are treated as light filters: a 3x3 mixing pair maps RGB to
per-channel transmittances, addition multiplies transmittances, and scalar
multiplication exponentiates them. The distance between an image patch and a
probe is the log-ratio of the two extreme probe scalings that sandwich the
patch from above and below; sliding that distance over an image yields a map
whose regional minima are match candidates, robust to smooth lighting
changes by construction.
"""

from .algebra import (lipc_add, lipc_scalar_mul, lipc_scalar_mul_rows,
                      white_neutral)
from .greylip import grey_critical_scale, lip_scalar_mul, marginal_asplund_distance
from .maps import (THREADS_ENV_VAR, DistanceMap, MatchPoint, MatchSet, Probe,
                   asplund_map, asplund_map_tol, correlation_map,
                   default_threads, extract_minima)
from .mapio import load_distance_map, read_pgm16, save_distance_map
from .model import (ClampDiagnostics, MixingModel, ModelConstructionError,
                    clamp_gamut, from_transmittance, make_mixing_model,
                    to_transmittance)
from .pairdist import (CriticalScaleSet, ImagePairResult, TolerantPairResult,
                       ToleranceSpec, colour_pair_distance,
                       image_pair_distance, image_pair_distance_tol,
                       is_neighbour, orbit_gap, pixelwise_d1, pixelwise_dinf)
from .solver import (ProbeSolver, SolverError, contact_scales,
                     lipc_critical_scale, scaling_is_monotone)
from .synthio import (DriftSpec, ImageFormatError, NoiseSpec, SceneSpec,
                      TemplateSpec, add_noise, apply_drift, load_image,
                      make_template, random_monotone_colours,
                      random_monotone_image, save_image,
                      scene_spec_from_json, scene_spec_to_json, synth_scene)

__version__ = "0.1.0"

__all__ = [
    "THREADS_ENV_VAR",
    "ClampDiagnostics",
    "CriticalScaleSet",
    "DistanceMap",
    "DriftSpec",
    "ImageFormatError",
    "ImagePairResult",
    "MatchPoint",
    "MatchSet",
    "MixingModel",
    "ModelConstructionError",
    "NoiseSpec",
    "Probe",
    "ProbeSolver",
    "SceneSpec",
    "SolverError",
    "TemplateSpec",
    "ToleranceSpec",
    "TolerantPairResult",
    "add_noise",
    "apply_drift",
    "asplund_map",
    "asplund_map_tol",
    "clamp_gamut",
    "colour_pair_distance",
    "contact_scales",
    "correlation_map",
    "default_threads",
    "extract_minima",
    "from_transmittance",
    "grey_critical_scale",
    "image_pair_distance",
    "image_pair_distance_tol",
    "is_neighbour",
    "lip_scalar_mul",
    "lipc_add",
    "lipc_critical_scale",
    "lipc_scalar_mul",
    "lipc_scalar_mul_rows",
    "load_distance_map",
    "load_image",
    "make_mixing_model",
    "make_template",
    "marginal_asplund_distance",
    "orbit_gap",
    "pixelwise_d1",
    "pixelwise_dinf",
    "random_monotone_colours",
    "random_monotone_image",
    "read_pgm16",
    "save_distance_map",
    "save_image",
    "scaling_is_monotone",
    "scene_spec_from_json",
    "scene_spec_to_json",
    "synth_scene",
    "to_transmittance",
    "white_neutral",
]
