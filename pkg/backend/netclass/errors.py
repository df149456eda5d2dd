"""Exception types raised across the netclass package."""


class NetclassError(Exception):
    """Base class for all errors raised by netclass."""


class ValidationError(NetclassError, ValueError):
    """Invalid input: malformed networks, bad dimensions or hyperparameters."""


class SamplerError(NetclassError, RuntimeError):
    """Numerical failure inside a random draw or a Gibbs update."""

    def __init__(self, message: str, iteration: int = None, chain: int = None):
        self.iteration = iteration
        self.chain = chain
        location = []
        if chain is not None:
            location.append(f"chain {chain}")
        if iteration is not None:
            location.append(f"iteration {iteration}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class FormatError(NetclassError, ValueError):
    """Unreadable file or unsupported format version."""


class DiagnosticsError(NetclassError, ValueError):
    """Chains too short or otherwise unusable for a convergence diagnostic."""
