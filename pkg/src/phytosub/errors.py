"""Exception hierarchy shared by every pipeline stage.

The CLI maps these onto exit codes: ``ConfigError`` is a usage error (1),
``EndpointUnreachable`` an endpoint error (3), everything else under
``PhytosubError`` a data error (2).
"""

from __future__ import annotations


class PhytosubError(Exception):
    """Base class for all package errors."""


class ConfigError(PhytosubError):
    pass


class MalformedRecord(PhytosubError):
    def __init__(self, line_number: int, reason: str = ""):
        self.line_number = line_number
        self.reason = reason
        msg = f"malformed record at line {line_number}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class DuplicateId(PhytosubError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"duplicate id {id!r}")


class UnknownSplit(PhytosubError):
    def __init__(self, value: object):
        self.value = value
        super().__init__(f"unknown split {value!r}")


class IoFailure(PhytosubError):
    def __init__(self, path, cause: BaseException | None = None):
        self.path = path
        super().__init__(f"cannot write {path}: {cause}" if cause else f"cannot write {path}")


class CuratedConflict(PhytosubError):
    def __init__(self, name: str, groups: tuple[str, str] = ("", "")):
        self.name = name
        self.groups = groups
        super().__init__(f"{name!r} appears in curated groups {groups[0]!r} and {groups[1]!r}")


class RecipeMismatch(PhytosubError):
    def __init__(self, record_id: str, expected: str, got: str):
        self.record_id = record_id
        super().__init__(f"record {record_id!r} references recipe {expected!r}, got {got!r}")


class UnresolvableRecipe(PhytosubError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"recipe {id!r} not found in corpus")


class Unparseable(PhytosubError):
    def __init__(self, response: str):
        self.response = response
        super().__init__(f"no validity label in response {response!r}")


class EmptyName(PhytosubError):
    pass


class CsvSchemaError(PhytosubError):
    pass


class MalformedLine(PhytosubError):
    def __init__(self, line_number: int, reason: str = ""):
        self.line_number = line_number
        msg = f"malformed line {line_number}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class EmptyInput(PhytosubError):
    pass


class UnknownNetwork(PhytosubError):
    def __init__(self, value: str):
        self.value = value
        super().__init__(f"unknown disease network {value!r}")


class NegativeScore(PhytosubError):
    def __init__(self, ingredient: str, score: float):
        self.ingredient = ingredient
        self.score = score
        super().__init__(f"negative score {score} for {ingredient!r}")


class EndpointUnreachable(PhytosubError):
    """Raised batch-wide when no request in a batch reached the endpoint."""
