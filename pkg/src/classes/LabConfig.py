"""Lab configuration: KEY=VALUE text files with defaults, validation and environment overrides."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from dateutil import parser as date_parser
from dateutil import tz
from dotenv import dotenv_values, load_dotenv

from ..utils.codec_utils import MAX_BITS, MIN_BITS
from ..utils.errors import ConfigError
from ..utils.logger import setup_logger
from ..utils.ml_utils.build_dataset import FEATURE_MODES
from .CursorOffset import CursorOffset
from .CustomTypeRegistry import CustomTypeRegistry
from .KeyboardModel import KeyboardModel
from .KeystrokeClassifier import TrainingConfig
from .RoomSimulator import RoomConfig
from .TransformCodec import QuantizedTransformCodec
from .TypingSynthesizer import TypistProfile

logger = setup_logger(__name__)

REPO_ROOT = Path(__file__).resolve().parents[2]

DEFAULTS: dict[str, str] = {
    "TICK_RATE": "15",
    "DEVICE_RATE": "72",
    "DROP_RATE": "0",
    "JITTER_MS": "0",
    "SEED": "0",
    "USERS": "1",
    "OBSERVER_ID": "0",
    "STALE_RATE": "0",
    "BURST_LOSS": "false",
    "TRIGGER_THRESHOLD": "0.75",
    "QUANTIZATION": "true",
    "POSITION_BITS": "16",
    "POSITION_MIN": "-8",
    "POSITION_MAX": "8",
    "ROTATION_BITS": "9",
    "TRIGGER_BITS": "8",
    "AIM_SIGMA_MM": "4",
    "MISS_PROB": "0",
    "RIGHT_HAND_FRACTION": "0.7",
    "SPEED_QUINTILE": "0",
    "CURSOR_OFFSET_YAW_DEG": "7",
    "CURSOR_OFFSET_X": "0.02",
    "CURSOR_OFFSET_Y": "-0.01",
    "CURSOR_OFFSET_Z": "0.11",
    "PROMPT_LIMIT": "0",
    "START_TIME": "2024-01-01T00:00:00Z",
    "LAYOUT": "assets/qwerty47.layout",
    "REGISTRY": "assets/motion.registry",
    "ML_FEATURES": "bytes",
    "ML_HIDDEN": "128,64",
    "ML_LEARNING_RATE": "0.0001",
    "ML_EPOCHS": "500",
    "ML_BATCH_SIZE": "32",
    "OUTPUT_DIR": "out",
    "WORKERS": "1",
}

# Keys that change where or how fast a run happens, not what it computes
_RUNTIME_KEYS = {"OUTPUT_DIR", "WORKERS"}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_time(text: str) -> str:
    parsed = date_parser.isoparse(text.strip())
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=tz.UTC)
    return parsed.astimezone(tz.UTC).isoformat().replace("+00:00", "Z")


def _parse_widths(text: str) -> tuple[int, ...]:
    widths = tuple(int(part) for part in text.split(",") if part.strip())
    if not widths:
        raise ValueError("expected comma-separated layer widths")
    return widths


_PARSERS: dict[str, Callable[[str], Any]] = {
    "TICK_RATE": float,
    "DEVICE_RATE": float,
    "DROP_RATE": float,
    "JITTER_MS": float,
    "SEED": int,
    "USERS": int,
    "OBSERVER_ID": int,
    "STALE_RATE": float,
    "BURST_LOSS": _parse_bool,
    "TRIGGER_THRESHOLD": float,
    "QUANTIZATION": _parse_bool,
    "POSITION_BITS": int,
    "POSITION_MIN": float,
    "POSITION_MAX": float,
    "ROTATION_BITS": int,
    "TRIGGER_BITS": int,
    "AIM_SIGMA_MM": float,
    "MISS_PROB": float,
    "RIGHT_HAND_FRACTION": float,
    "SPEED_QUINTILE": int,
    "CURSOR_OFFSET_YAW_DEG": float,
    "CURSOR_OFFSET_X": float,
    "CURSOR_OFFSET_Y": float,
    "CURSOR_OFFSET_Z": float,
    "PROMPT_LIMIT": int,
    "START_TIME": _parse_time,
    "LAYOUT": str,
    "REGISTRY": str,
    "ML_FEATURES": str,
    "ML_HIDDEN": _parse_widths,
    "ML_LEARNING_RATE": float,
    "ML_EPOCHS": int,
    "ML_BATCH_SIZE": int,
    "OUTPUT_DIR": str,
    "WORKERS": int,
}


def resolve_path(path: str) -> Path:
    """Relative asset paths are taken from the repository root."""
    p = Path(path)
    return p if p.is_absolute() else REPO_ROOT / p


@dataclass(frozen=True)
class LabConfig:
    tick_rate: float = 15.0
    device_rate: float = 72.0
    drop_rate: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0
    users: int = 1
    observer_id: int = 0
    stale_rate: float = 0.0
    burst_loss: bool = False
    trigger_threshold: float = 0.75
    quantization: bool = True
    position_bits: int = 16
    position_min: float = -8.0
    position_max: float = 8.0
    rotation_bits: int = 9
    trigger_bits: int = 8
    aim_sigma_mm: float = 4.0
    miss_prob: float = 0.0
    right_hand_fraction: float = 0.7
    speed_quintile: int = 0
    cursor_offset_yaw_deg: float = 7.0
    cursor_offset_x: float = 0.02
    cursor_offset_y: float = -0.01
    cursor_offset_z: float = 0.11
    prompt_limit: int = 0
    start_time: str = "2024-01-01T00:00:00Z"
    layout: str = "assets/qwerty47.layout"
    registry: str = "assets/motion.registry"
    ml_features: str = "bytes"
    ml_hidden: tuple[int, ...] = (128, 64)
    ml_learning_rate: float = 1e-4
    ml_epochs: int = 500
    ml_batch_size: int = 32
    output_dir: str = "out"
    workers: int = 1

    @classmethod
    def from_values(cls, values: Mapping[str, Optional[str]]) -> LabConfig:
        """Validate raw KEY=VALUE pairs; every problem is collected before raising ConfigError."""
        diagnostics: list[str] = []
        unknown = sorted(set(values) - set(DEFAULTS))
        diagnostics += [f"{key}: unknown key" for key in unknown]

        parsed: dict[str, Any] = {}
        for key, default in DEFAULTS.items():
            raw = values.get(key)
            text = default if raw is None or raw.strip() == "" else raw
            try:
                parsed[key.lower()] = _PARSERS[key](text)
            except ValueError as e:
                diagnostics.append(f"{key}: cannot parse {text!r} ({e})")

        if not diagnostics:
            diagnostics += _cross_key_errors(parsed)
        if diagnostics:
            raise ConfigError(diagnostics)
        return cls(**parsed)

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> LabConfig:
        values: dict[str, Optional[str]] = {}
        if path is not None:
            if not Path(path).exists():
                raise ConfigError([f"config file {path} does not exist"])
            values = dict(dotenv_values(path))
        return cls.from_values(values).with_environment()

    def with_environment(self) -> LabConfig:
        """Apply .env.local and LAB_OUTPUT_DIR / LAB_WORKERS overrides."""
        load_dotenv(".env.local", override=False)
        updates: dict[str, Any] = {}
        output_dir = os.getenv("LAB_OUTPUT_DIR")
        if output_dir:
            updates["output_dir"] = output_dir
        workers = os.getenv("LAB_WORKERS")
        if workers:
            try:
                updates["workers"] = int(workers)
            except ValueError:
                raise ConfigError([f"LAB_WORKERS: cannot parse {workers!r}"]) from None
            if updates["workers"] < 1:
                raise ConfigError([f"LAB_WORKERS: must be at least 1, got {workers}"])
        return replace(self, **updates) if updates else self

    def with_overrides(self, overrides: Mapping[str, Any]) -> LabConfig:
        """Copy with KEY or field-name overrides, re-validated."""
        values = self.to_values()
        for key, value in overrides.items():
            name = key.upper()
            values[name] = _format_value(value)
        return LabConfig.from_values(values)

    def to_values(self) -> dict[str, str]:
        return {f.name.upper(): _format_value(getattr(self, f.name)) for f in fields(self)}

    def to_text(self) -> str:
        return "".join(f"{key}={value}\n" for key, value in self.to_values().items())

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of everything that affects results; output directory and worker count excluded."""
        relevant = {k: v for k, v in self.to_values().items() if k not in _RUNTIME_KEYS}
        return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode("utf-8")).hexdigest()

    def calibration_hash(self) -> str:
        """Hash of the settings calibration depends on: codec, layout, offsets and rates."""
        keys = (
            "TICK_RATE", "DEVICE_RATE", "QUANTIZATION", "POSITION_BITS", "POSITION_MIN", "POSITION_MAX",
            "ROTATION_BITS", "TRIGGER_BITS", "CURSOR_OFFSET_YAW_DEG", "CURSOR_OFFSET_X", "CURSOR_OFFSET_Y",
            "CURSOR_OFFSET_Z", "LAYOUT", "REGISTRY",
        )  # fmt: skip
        values = self.to_values()
        relevant = {k: values[k] for k in keys}
        return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode("utf-8")).hexdigest()

    @property
    def victim_ids(self) -> tuple[int, ...]:
        """Victims are numbered upward from 1, skipping the observer's own id."""
        ids: list[int] = []
        candidate = 1
        while len(ids) < self.users:
            if candidate != self.observer_id:
                ids.append(candidate)
            candidate += 1
        return tuple(ids)

    def room_config(self, seed: Optional[int] = None) -> RoomConfig:
        return RoomConfig(
            tick_rate=self.tick_rate,
            device_rate=self.device_rate,
            drop_rate=self.drop_rate,
            jitter_ms=self.jitter_ms,
            seed=self.seed if seed is None else seed,
            users=self.victim_ids,
            observer_id=self.observer_id,
            stale_rate=self.stale_rate,
            burst_loss=self.burst_loss,
        )

    def load_registry(self) -> CustomTypeRegistry:
        return CustomTypeRegistry.load(resolve_path(self.registry)).with_widths(self.position_bits, self.rotation_bits)

    def codec(self, registry: CustomTypeRegistry) -> QuantizedTransformCodec:
        return QuantizedTransformCodec.for_registry(
            registry,
            quantized=self.quantization,
            position_min=self.position_min,
            position_max=self.position_max,
            trigger_bits=self.trigger_bits,
        )

    def keyboard(self) -> KeyboardModel:
        return KeyboardModel.from_layout(resolve_path(self.layout))

    def cursor_offset(self) -> CursorOffset:
        return CursorOffset.from_yaw(
            self.cursor_offset_yaw_deg, self.cursor_offset_x, self.cursor_offset_y, self.cursor_offset_z
        )

    def profile(self, speed_quintile: Optional[int] = None) -> TypistProfile:
        return TypistProfile(
            speed_quintile=self.speed_quintile if speed_quintile is None else speed_quintile,
            aim_sigma=self.aim_sigma_mm / 1000.0,
            miss_prob=self.miss_prob,
            right_hand_fraction=self.right_hand_fraction,
            threshold=self.trigger_threshold,
        )

    def training_config(self, seed: Optional[int] = None) -> TrainingConfig:
        return TrainingConfig(
            learning_rate=self.ml_learning_rate,
            epochs=self.ml_epochs,
            batch_size=self.ml_batch_size,
            seed=self.seed if seed is None else seed,
            hidden=self.ml_hidden,
        )

    def output_path(self, *parts: str) -> Path:
        path = Path(self.output_dir).joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _cross_key_errors(c: dict[str, Any]) -> list[str]:
    errors: list[str] = []
    if not 0.0 < c["tick_rate"] <= c["device_rate"]:
        errors.append(f"TICK_RATE: must satisfy 0 < TICK_RATE <= DEVICE_RATE ({c['tick_rate']} > {c['device_rate']})")
    for name in ("drop_rate", "stale_rate", "miss_prob", "right_hand_fraction"):
        if not 0.0 <= c[name] <= 1.0:
            errors.append(f"{name.upper()}: must be in [0, 1], got {c[name]}")
    if c["jitter_ms"] < 0.0:
        errors.append(f"JITTER_MS: must be non-negative, got {c['jitter_ms']}")
    if not 0.05 < c["trigger_threshold"] < 1.0:
        errors.append(f"TRIGGER_THRESHOLD: must be in (0.05, 1), got {c['trigger_threshold']}")
    if not c["position_min"] < c["position_max"]:
        errors.append(f"POSITION_MIN: must be below POSITION_MAX ({c['position_min']} >= {c['position_max']})")
    if not 1 <= c["position_bits"] <= 32:
        errors.append(f"POSITION_BITS: must be in [1, 32], got {c['position_bits']}")
    if not MIN_BITS <= c["rotation_bits"] <= MAX_BITS:
        errors.append(f"ROTATION_BITS: must be in [{MIN_BITS}, {MAX_BITS}], got {c['rotation_bits']}")
    if not 1 <= c["trigger_bits"] <= 8:
        errors.append(f"TRIGGER_BITS: must be in [1, 8], got {c['trigger_bits']}")
    if not 0 <= c["speed_quintile"] <= 4:
        errors.append(f"SPEED_QUINTILE: must be in 0..4, got {c['speed_quintile']}")
    if c["users"] < 1:
        errors.append(f"USERS: need at least one victim, got {c['users']}")
    if c["aim_sigma_mm"] < 0.0:
        errors.append(f"AIM_SIGMA_MM: must be non-negative, got {c['aim_sigma_mm']}")
    if c["prompt_limit"] < 0:
        errors.append(f"PROMPT_LIMIT: must be non-negative, got {c['prompt_limit']}")
    if c["workers"] < 1:
        errors.append(f"WORKERS: must be at least 1, got {c['workers']}")
    if c["ml_features"] not in FEATURE_MODES:
        errors.append(f"ML_FEATURES: must be one of {FEATURE_MODES}, got {c['ml_features']!r}")
    if min(c["ml_hidden"]) < 1:
        errors.append(f"ML_HIDDEN: layer widths must be positive, got {c['ml_hidden']}")
    if not c["ml_learning_rate"] > 0.0:
        errors.append(f"ML_LEARNING_RATE: must be positive, got {c['ml_learning_rate']}")
    for name in ("ml_epochs", "ml_batch_size"):
        if c[name] < 1:
            errors.append(f"{name.upper()}: must be at least 1, got {c[name]}")
    for key in ("layout", "registry"):
        if not resolve_path(c[key]).exists():
            errors.append(f"{key.upper()}: file {c[key]} not found")
    return errors


def validate_config(path: Optional[str | Path] = None) -> LabConfig:
    """Load and validate a config file; missing keys take defaults. Raises ConfigError listing every bad key."""
    cfg = LabConfig.load(path)
    logger.info("Config %s valid (hash %s)", path or "<defaults>", cfg.config_hash()[:12])
    return cfg
