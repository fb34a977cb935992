"""Photoacoustic initial-pressure reconstruction with Sobolev and Matern smoothing priors."""

from .acoustic import AcousticOperator, adjoint, assemble_dense, forward, propagate
from .errors import (ConstraintViolation, InvalidInput, MemoryBudgetExceeded, PatbError,
                     PatError)
from .grid import Field, GridSpec
from .sensors import SensorArray, SensorData, TimeAxis, sensor_layout
from .smoothing import MaternParams, SmoothingConfig, embed_adjoint, matern_apply
from .solver import ReconConfig, gmres, map_to_tikhonov, reconstruct
from .wavelet import WaveletSpec, dwt2, idwt2

__version__ = "0.1.0"
