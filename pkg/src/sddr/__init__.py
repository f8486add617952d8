"""Radar spatial/Doppler representation toolkit.

Directional diffusion toward a radar prior, ego-velocity estimation from
Doppler geometry, point-cloud metrics, and a synthetic FMCW simulator that
supplies exact ground truth for all of them.
"""
from .cube import RadarCube, Sddr, adc_to_cube, cube_to_sddr, doppler_bin_to_velocity, soften
from .diffusion import (forward_marginal, forward_step, posterior_params, predict_x0,
                        reverse_step, sample)
from .eve import (DopplerObservations, doppler_consistency_loss, doppler_surface, eve_ransac,
                  eve_wls, radial_velocity, soft_mask)
from .kernels import BACKEND
from .metrics import (MetricParams, PointCloud, chamfer, clutter_set, emd, os_cfar, quality,
                      sddr_to_points, shot_set)
from .radar import RadarConfig
from .schedule import Schedule, build_schedule, doppler_loss_weight, spatial_loss_weight
from .simulate import (Scatterer, Scene, ground_truth, inject_ghosts, random_scene,
                       synthesize_adc)

__version__ = "0.1.0"
