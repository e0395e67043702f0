"""Exception types shared across the simulator."""


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


class ParameterError(ContractViolation):
    """A gate parameter lies outside the range where the construction is real."""


class LeakageError(ContractViolation):
    """Population found in motional levels a measurement routine cannot handle."""


class ServerContractError(RuntimeError):
    """The server returned something that does not honor the interface."""


class TransportError(ConnectionError):
    """The remote server could not be reached or the connection broke."""
