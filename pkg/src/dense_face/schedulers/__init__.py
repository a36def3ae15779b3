"""Forward noising and DDIM reverse sampling.

Main Components:
- make_schedule / NoiseSchedule: cosine (default) or linear variance plans
- add_noise: closed-form forward process
- plan_timesteps / SamplerPlan: decreasing inference timesteps from T - 1 to the read-out
- ddim_step / predict_x0: deterministic (eta=0) or stochastic reverse steps
"""

from .ddim import SamplerPlan, ddim_step, plan_timesteps, predict_x0
from .noise import NoiseSchedule, add_noise, make_schedule

__all__ = [
    "NoiseSchedule",
    "SamplerPlan",
    "add_noise",
    "ddim_step",
    "make_schedule",
    "plan_timesteps",
    "predict_x0",
]
