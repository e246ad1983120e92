from .generate_prompt_battery import generate_prompt_battery
from .prompt import PROMPT_KINDS, Prompt

__all__ = [
    "PROMPT_KINDS",
    "Prompt",
    "generate_prompt_battery",
]
