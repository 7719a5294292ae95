"""
Loading and cross-checking of system configurations and fault scenarios.
"""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Tuple
from dataclasses import dataclass, replace
import hashlib
import json

from marshmallow import ValidationError

from ima_sentinel import DEFAULT_PROP_DELAY_US, DEFAULT_RUN_MAFS
from ..cli.schemas.fault_scenario import FaultScenarioSchema
from ..cli.schemas.system_config import SystemConfigSchema
from .framing import VirtualLinkConfig
from .injecting import FaultScenario
from .monitoring import VariationLaw
from .partitioning import MajorFrame, PartitionConfig


class ConfigError(Exception):
    """Every problem found in a configuration document, as field path -> messages."""

    def __init__(self, messages: Mapping):
        self.messages = dict(messages)
        super().__init__("; ".join(flatten_messages(self.messages)))


def flatten_messages(messages, path: str = "") -> List[str]:
    if isinstance(messages, Mapping):
        flat = []
        for key, value in messages.items():
            flat += flatten_messages(value, f"{path}.{key}" if path else str(key))
        return flat
    if isinstance(messages, (list, tuple)):
        return [line for m in messages for line in flatten_messages(m, path)]
    return [f"{path}: {messages}" if path else str(messages)]


@dataclass(frozen=True)
class SystemConfig:
    major_frame: MajorFrame
    partitions: Tuple[PartitionConfig, ...]
    virtual_links: Tuple[VirtualLinkConfig, ...]
    laws: Tuple[VariationLaw, ...] = ()
    prop_delay: int = DEFAULT_PROP_DELAY_US  # µs
    run_mafs: int = DEFAULT_RUN_MAFS
    scenario: Optional[FaultScenario] = None
    watched_vls: Optional[Tuple[int, ...]] = None
    digest: str = ""

    @property
    def laws_by_app(self) -> Dict[int, VariationLaw]:
        return {law.app_id: law for law in self.laws}


def _parse(text: str) -> dict:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError({"_parse": [f"not valid JSON ({e})"]}) from e
    if not isinstance(document, dict):
        raise ConfigError({"_parse": ["expected a JSON object"]})
    return document


def config_digest(text: str) -> str:
    """sha256 of the canonical form of the document, so formatting does not change it."""
    canonical = json.dumps(_parse(text), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_config(text: str) -> SystemConfig:
    document = _parse(text)
    try:
        data = SystemConfigSchema().load(document)
    except ValidationError as e:
        raise ConfigError(e.normalized_messages()) from e
    return SystemConfig(
        major_frame=data["major_frame"],
        partitions=tuple(data["partitions"]),
        virtual_links=tuple(data["virtual_links"]),
        laws=tuple(data["laws"]),
        prop_delay=data["prop_delay_us"],
        run_mafs=data["run_mafs"],
        scenario=data["scenario"],
        watched_vls=tuple(data["watched_vls"]) if data["watched_vls"] is not None else None,
        digest=config_digest(text),
    )


def load_scenario(text: str) -> FaultScenario:
    try:
        return FaultScenarioSchema().load(_parse(text))
    except ValidationError as e:
        raise ConfigError(e.normalized_messages()) from e


def with_scenario(config: SystemConfig, scenario: Optional[FaultScenario], run_mafs: Optional[int] = None) -> SystemConfig:
    """The config with the scenario and run length given on the command line, if any."""
    if scenario is not None:
        config = replace(config, scenario=scenario)
    if run_mafs is not None:
        config = replace(config, run_mafs=run_mafs)
    return config
