"""Silicon microwave loss analysis: ring-down Q extraction, loss budget, and a
variable-range-hopping conductivity model with fitting."""
from .errors import (BudgetInconsistencyError, DomainError, ExtrapolationError,
                     FitEvaluationError, InputFormatError, InsufficientDataError,
                     IntegrationError, NonDecayingTraceError, OptimizationError, SilossError)

__version__ = "0.1.0"
