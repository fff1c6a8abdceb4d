"""Exception types shared across the package."""


class InvalidSpecError(ValueError):
    """A generative set description violates its constraints."""


class ConfigError(ValueError):
    """An experiment configuration failed to parse or validate."""


class CertificateError(RuntimeError):
    """A geometric certificate (porosity hole, cover budget) could not be produced."""


class DegenerateDataError(RuntimeError):
    """Not enough usable data for a fit or an estimate."""
