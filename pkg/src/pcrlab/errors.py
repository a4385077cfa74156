class DecodeError(Exception):
    """The master could not reconstruct the gradient from the results it has."""


class InsufficientWorkersError(DecodeError):
    def __init__(self, needed: int, got: int, missing=()):
        self.needed = needed
        self.got = got
        self.deficit = needed - got
        self.missing = tuple(missing)
        msg = f"insufficient workers: need {needed}, got {got} (deficit {self.deficit})"
        if self.missing:
            msg += f"; missing workers {list(self.missing)}"
        super().__init__(msg)


class SingularSubsetError(DecodeError):
    def __init__(self, workers, residual: float):
        self.workers = tuple(workers)
        self.residual = residual
        super().__init__(
            f"decoding system is singular for workers {list(self.workers)} "
            f"(residual {residual:.3g})"
        )


class CoverageIncompleteError(DecodeError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"coverage incomplete: missing super-batches {list(self.missing)}")


class NoFixedThresholdError(ValueError):
    def __init__(self, kind: str = "bcc"):
        super().__init__(f"{kind}: no fixed threshold (completion is a random coverage event)")
