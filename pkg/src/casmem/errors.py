"""Error taxonomy shared by the library and the command line.

ConfigError covers malformed configs, files and shape mismatches (CLI exit
code 2); NumericalError covers quadrature non-convergence and degenerate
fits (exit code 3).
"""


class ConfigError(Exception):
    pass


class NumericalError(Exception):
    pass
