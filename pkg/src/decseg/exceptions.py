"""Exception types shared across the toolkit."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, order, hash)."""


class DataError(ValueError):
    """Label or image content is invalid for the taxonomy or model."""


class TrainingDivergenceError(RuntimeError):
    """The loss became non-finite during optimization."""

    def __init__(self, step, loss):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss


class PrerequisiteError(RuntimeError):
    """A pipeline stage was invoked before the stage it depends on."""
