"""Exception hierarchy shared by all stagelab modules."""


class StagelabError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(StagelabError, ValueError):
    """A tensor reached a layer with the wrong shape."""

    def __init__(self, layer, expected, got):
        self.layer = layer
        self.expected = tuple(expected) if expected is not None else None
        self.got = tuple(got)
        super().__init__(f"{layer}: expected shape {self.expected}, got {self.got}")


class NonFiniteError(StagelabError, FloatingPointError):
    """A NaN or infinity appeared in an activation, gradient or loss."""

    def __init__(self, where, context=""):
        self.where = where
        msg = f"non-finite values in {where}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class MissingGradientError(StagelabError, RuntimeError):
    pass


class ArchiveError(StagelabError, ValueError):
    """Malformed, truncated or inconsistent tensor archive."""


class TransfusionError(StagelabError, ValueError):
    pass


class SelectorError(StagelabError, ValueError):
    pass


class UnknownStrategyError(StagelabError, KeyError):
    def __init__(self, name, valid):
        self.name = name
        self.valid = tuple(valid)
        super().__init__(f"unknown strategy {name!r}; valid names: {', '.join(self.valid)}")

    def __str__(self):
        return self.args[0]


class DatasetError(StagelabError, ValueError):
    pass


class ConfigError(StagelabError, ValueError):
    """Run configuration failed validation; ``path`` locates the bad field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
