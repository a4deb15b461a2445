"""Polar codes for sequences of non-identical binary memoryless symmetric channels.

The package follows a code from channel models to Monte Carlo results:

* :mod:`~nspolar.channels` and :mod:`~nspolar.quantize`: channel models
  with certified Bhattacharyya intervals, and the grid that decides which
  pairs may be combined;
* :mod:`~nspolar.speed` and :mod:`~nspolar.polarize`: polarization energy,
  speed estimates, and the layered sort-and-skip transform;
* :mod:`~nspolar.extremal`: the scalar process that certifies stage-2
  bounds, plus the construction constants;
* :mod:`~nspolar.construct`, :mod:`~nspolar.codec` and :mod:`~nspolar.sim`:
  two-stage construction, encoding and SC decoding, and simulation;
* :class:`~nspolar.estimator.NonStationaryPolarCode`: a scikit-learn style
  front end to all of the above.
"""
__version__ = "0.1.0"

from .channels import ChannelArray, ChannelModel, ZInterval, read_channel_csv, write_channel_csv
from .codec import channel_llr, encode, sc_decode, union_bound
from .construct import CodeSpec, Construction, construct_code, partition_channels, reselect
from .estimator import NonStationaryPolarCode
from .extremal import ConstantsReport, compute_constants, run_coupled, run_extremal
from .polarize import LayeredCircuit, Layer, run_det_polar1, run_det_polar2
from .quantize import QuantGrid, build_grid
from .sim import SequenceSpec, generate_sequence, run_monte_carlo
from .speed import estimate_eta, polarization_energy, speed_trace

__all__ = [
    "__version__",
    "ChannelArray", "ChannelModel", "ZInterval", "read_channel_csv", "write_channel_csv",
    "channel_llr", "encode", "sc_decode", "union_bound",
    "CodeSpec", "Construction", "construct_code", "partition_channels", "reselect",
    "NonStationaryPolarCode",
    "ConstantsReport", "compute_constants", "run_coupled", "run_extremal",
    "LayeredCircuit", "Layer", "run_det_polar1", "run_det_polar2",
    "QuantGrid", "build_grid",
    "SequenceSpec", "generate_sequence", "run_monte_carlo",
    "estimate_eta", "polarization_energy", "speed_trace",
]
