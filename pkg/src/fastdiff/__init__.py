"""Short-time boundary asymptotics of fast diffusion equations in radial geometries."""
from .models import ConvergenceError, DiffusionModel, Kind, ParameterError, blowup_constant

__version__ = "0.1.0"
