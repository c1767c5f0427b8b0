"""Exception hierarchy. Every error carries a machine-parseable category
so the CLI can emit single-line failure reports."""


class GcnnasError(Exception):
    category = "internal"


class ConfigError(GcnnasError):
    category = "config"


class DataError(GcnnasError):
    category = "data"


class StructuralError(GcnnasError):
    """Shape or topology mismatch between values that must agree."""

    category = "structural"


class ArgumentError(GcnnasError):
    """An argument value outside the contract of an operation."""

    category = "argument"


class ParseError(GcnnasError):
    category = "parse"


class NumericalError(GcnnasError):
    category = "numerical"
