"""Exception hierarchy shared by every module."""


class RelayCapError(Exception):
    pass


class ShapeError(RelayCapError, ValueError):
    """Operand dimensions are incompatible."""


class ContractError(RelayCapError, ValueError):
    """An input violates an operation's precondition (e.g. not Hermitian)."""


class NotPositiveDefiniteError(ContractError):
    pass


class NearSingularError(RelayCapError, ArithmeticError):
    pass


class DomainError(RelayCapError, ValueError):
    """Argument outside the domain of a closed-form expression."""


class NoConvergenceError(RelayCapError, RuntimeError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
