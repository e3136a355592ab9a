"""Light field super-resolution by restoring the principal basis of an aligned light field."""

from .alignment import (FlowField, FlowParams, FlowSet, WarpMask, align, block_matching,
                        estimate_flows, forward_warp, inverse_warp, view_variance)
from .backends import (BackendDimMismatchError, BackendError, BackendExitError,
                       BackendOutputError, BackendSpawnError, BackendTimeoutError,
                       ExternalBackend, IdentityBackend, SharpenBackend, parse_backend)
from .compaction import (Decomposition, basis_entropy, decompose, reconstruct,
                         residual_energy)
from .evaluation import EvalReport, RefocusParams, evaluate_lf, psnr, refocus, sharpness, ssim
from .lightfield import (DimensionError, LFMatrix, LightField, LightFieldError, MissingViewError,
                         flatten, load_lightfield, save_lightfield, unflatten)
from .resample import DegradationParams, degrade, upsample, upsample_lightfield
from .restoration import (PipelineConfig, PipelineResult, StageError, edit_propagate,
                          pb_superresolve, superresolve)

__version__ = "0.1.0"
