"""Exception types shared across modules."""


class PairConflict(ValueError):
    """A triple would cover a pair that is already covered."""

    def __init__(self, pair, existing_triple_index):
        self.pair = tuple(pair)
        self.existing_triple_index = existing_triple_index
        super().__init__(
            f"pair {self.pair} already covered by triple #{existing_triple_index}"
        )


class ParseError(ValueError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class TooLarge(ValueError):
    """An exhaustive computation was refused by its size guard."""


class Unreachable(ValueError):
    """An ordered system could not have been produced by triangle removal."""

    def __init__(self, step, triple):
        self.step = step
        self.triple = tuple(triple)
        super().__init__(f"step {step}: {self.triple} is not a triangle of the leave graph")


class InvalidRoots(ValueError):
    pass


class CertificationFailed(RuntimeError):
    pass
