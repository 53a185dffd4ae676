"""pulsefront: pulsating fronts of nonlocal-dispersal monostable equations.

Numerical library and CLI for spatially periodic media in one dimension:
principal eigenpairs of the tilted dispersal operator, variational spreading
speeds, explicit sub/super-solutions, wave extraction by squeezing, decay
asymptotics, and front stability experiments.
"""

from .backend import COMPILED, backend_name

__version__ = "0.1.0"

__all__ = ["COMPILED", "backend_name", "__version__"]
