"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes; the message names the offending dims."""


class GraphError(ValueError):
    """A model graph violates a structural invariant."""


class ModelFormatError(ValueError):
    """A serialized model (manifest or weight blob) is malformed."""


class MissingRangeError(KeyError):
    """The quantized forward pass has no calibrated range for a capture point."""

    def __init__(self, layer: str):
        super().__init__(layer)
        self.layer = layer

    def __str__(self) -> str:
        return f"no calibrated range for layer {self.layer!r}"
