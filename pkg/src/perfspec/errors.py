"""Exception hierarchy shared by the pipeline and the CLI exit codes."""


class ScientificInvariantError(RuntimeError):
    """A computed quantity violates a property the theory guarantees (e.g. b <= 0)."""
