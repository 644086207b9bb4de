"""Exception hierarchy. Every error raised by the package derives from AstgcnError."""


class AstgcnError(ValueError):
    pass


class ShapeMismatchError(AstgcnError):
    pass


class DimensionMismatchError(ShapeMismatchError):
    pass


class NonSquareError(AstgcnError):
    def __init__(self, shape):
        self.shape = tuple(shape)
        super().__init__(f"adjacency must be square, got shape {self.shape}")


class AsymmetricError(AstgcnError):
    def __init__(self, i, j, a_ij, a_ji):
        self.index = (int(i), int(j))
        super().__init__(f"adjacency not symmetric at ({i}, {j}): {a_ij!r} != {a_ji!r}")


class NegativeEntryError(AstgcnError):
    def __init__(self, i, j, value):
        self.index = (int(i), int(j))
        super().__init__(f"adjacency has negative entry {value!r} at ({i}, {j})")


class EmptyFileError(AstgcnError):
    pass


class RaggedRowsError(AstgcnError):
    def __init__(self, row, expected, got):
        self.row = row
        super().__init__(f"row {row} has {got} cells, expected {expected}")


class NonNumericCellError(AstgcnError):
    def __init__(self, row, col, token):
        self.row = row
        self.col = col
        self.token = token
        super().__init__(f"non-numeric cell {token!r} at row {row}, col {col}")


class DegenerateSplitError(AstgcnError):
    pass


class UnknownCategoryError(AstgcnError):
    def __init__(self, token, row):
        self.token = token
        self.row = row
        super().__init__(f"unknown category {token!r} at row {row}")


class NodeCountMismatchError(AstgcnError):
    pass


class LengthMismatchError(AstgcnError):
    pass


class IndexOutOfRangeError(AstgcnError):
    pass


class NonFiniteActivationError(AstgcnError):
    pass


class TapeMismatchError(AstgcnError):
    pass


class DivergenceDetectedError(AstgcnError):
    """Training loss became non-finite. ``last_good`` holds the parameters
    from the end of the last finite epoch."""

    def __init__(self, epoch, last_good):
        self.epoch = epoch
        self.last_good = last_good
        super().__init__(f"loss became non-finite in epoch {epoch}")


class ZeroVarianceError(AstgcnError):
    pass


class CheckpointError(AstgcnError):
    pass
