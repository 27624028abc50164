"""Neural Boltzmann Machines: conditional RBMs whose parameters are networks of x."""
from .core import (CondParams, NbmModel, NbmSpec, condition, default_spec, energy,
                   free_energy, free_energy_backward, init_model, pd_diagnostic)
from .data import Dataset, SynthSpec
from .errors import NbmError
from .trainer import TrainConfig, cd_step, fit

__version__ = "0.1.0"
