"""Zero-shot hazard analysis for annotated dashcam video."""
from .changepoint import BACKEND as CPD_BACKEND
from .errors import BackendError, HazardscopeError, ValidationError

__version__ = "0.1.0"

__all__ = ["CPD_BACKEND", "BackendError", "HazardscopeError", "ValidationError", "__version__"]
