"""Exception types shared across the package.

Bad inputs raise plain ValueError; NumericError marks failures of a numeric
contract on otherwise well-formed input (the CLI maps them to exit code 3).
"""


class NumericError(RuntimeError):
    """A numeric operation could not be carried out (e.g. zero variance)."""
