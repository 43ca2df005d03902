"""Computer-assisted bounds for the quartic period-doubling renormalisation
fixed point, its expanding eigenvalue and the noise scaling eigenvalue."""

from .interval import ArithContext, Interval, Rectangle, get_context, local_context, set_context

__version__ = "0.1.0"

__all__ = ["ArithContext", "Interval", "Rectangle", "get_context", "local_context", "set_context", "__version__"]
