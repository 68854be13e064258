"""Package-specific exceptions."""


class OgmkitError(Exception):
    """Base class for ogmkit errors."""


class CertificateError(OgmkitError):
    """A convergence certificate or invariant check failed."""


class LineSearchError(OgmkitError):
    """The backtracking search grew the curvature estimate without bound."""


class ConfigError(OgmkitError):
    """An experiment configuration is malformed or inconsistent."""
