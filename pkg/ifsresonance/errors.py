from typing import List, Optional


class IFSResonanceError(Exception):
    """Base class for every error raised by the toolkit."""

    kind = "error"

    def to_record(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class DomainError(IFSResonanceError, ValueError):
    kind = "domain"


class MixedModeError(DomainError):
    kind = "mixed_mode"


class ResourceError(IFSResonanceError):
    kind = "resource"

    def __init__(self, budget: str, requested: int, limit: int) -> None:
        super().__init__(f"{budget} exceeded: requested {requested}, limit {limit}")
        self.budget = budget
        self.requested = requested
        self.limit = limit

    def to_record(self) -> dict:
        record = super().to_record()
        record.update(budget=self.budget, requested=self.requested, limit=self.limit)
        return record


class NumericError(IFSResonanceError):
    kind = "numeric"


class ConsistencyError(IFSResonanceError, AssertionError):
    kind = "consistency"


class ConfigError(IFSResonanceError):
    kind = "config"

    def __init__(self, messages: List[str], line: Optional[int] = None, column: Optional[int] = None) -> None:
        super().__init__("; ".join(messages))
        self.messages = messages
        self.line = line
        self.column = column

    def to_record(self) -> dict:
        record = super().to_record()
        record["messages"] = self.messages
        if self.line is not None:
            record.update(line=self.line, column=self.column)
        return record
