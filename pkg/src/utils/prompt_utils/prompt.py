from dataclasses import dataclass
from typing import Any

PROMPT_KINDS = ("numbers", "password", "sentence")


@dataclass(frozen=True)
class Prompt:
    kind: str
    text: str

    def __post_init__(self) -> None:
        if self.kind not in PROMPT_KINDS:
            raise ValueError(f"Unknown prompt kind {self.kind!r}; expected one of {PROMPT_KINDS}")

    def __len__(self) -> int:
        return len(self.text)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "text": self.text}
