from .errors import EventFileError, HawkesInputError, IndexOutOfRange, ModelFileError, NetworkFileError, SimulationError
from .fit import fit, init_params
from .likelihood import intensity, log_likelihood_direct, log_likelihood_tensor
from .simulate import GroupKernelIntensity, LowRankIntensity, SyntheticConfig, generate_synthetic_config, simulate
from .tensors import build_tensors
from .types import EventHistory, FitReport, Hyperparams, LowRankModel, Network, Realization, TensorPair
