"""Random feature method with IMEX Runge-Kutta time stepping for evolution PDEs."""

__version__ = "0.1.0"

from .config import RunConfig, load_config  # noqa: E402
from .imex import Stepper, get_tableau, run_simulation  # noqa: E402
from .problems import PROBLEMS, make_problem  # noqa: E402

__all__ = ["PROBLEMS", "RunConfig", "Stepper", "__version__", "get_tableau", "load_config", "make_problem",
           "run_simulation"]
