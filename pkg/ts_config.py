"""YAML system configs: schema, loading, saving and flag merging."""

import logging
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as SchemaError, field_validator, model_validator

from ts_entropy import EntropyOptions
from ts_exceptions import ConfigError, ValidationError
from ts_geometry import RelationMatrix, free_group_relation, validate_relation
from ts_shift import DEFAULT_DEPTH_CAP, DEFAULT_ORACLE_BITS, MarkovSystem, validate_system, with_inverse_transposes

logger = logging.getLogger(__name__)

FLAG_NAMES = {"max_iters": "--iters"}


class RunOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    log_base: str = "10"
    max_iters: int = Field(300, ge=1, le=600)
    eps: float = Field(1e-13, gt=0)
    eps_zero: float = Field(1e-13, gt=0)
    auto_inverse_transpose: bool = False
    depth: int = Field(2, ge=0)
    depth_cap: int = Field(DEFAULT_DEPTH_CAP, ge=0)
    oracle_bits: float = Field(DEFAULT_ORACLE_BITS, gt=0)

    @field_validator("log_base", mode="before")
    @classmethod
    def _log_base_as_text(cls, value: Any) -> str:
        text = str(value)
        if text not in ("e", "2", "10"):
            raise ValueError(f"log_base must be one of 'e', '2', '10', got {value!r}")
        return text


class SystemConfig(BaseModel):
    """One Markov tree shift: K, alphabet, one matrix per generator, run options"""
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    generators: Optional[List[str]] = None
    K: Optional[List[List[int]]] = None
    alphabet: List[str]
    A: List[List[List[int]]]
    options: RunOptions = Field(default_factory=RunOptions)

    @field_validator("alphabet", mode="before")
    @classmethod
    def _symbols_as_text(cls, value: Any) -> Any:
        if isinstance(value, list):
            return [str(symbol) for symbol in value]
        return value

    @model_validator(mode="after")
    def _check_names(self) -> "SystemConfig":
        if self.K is None and not self.options.auto_inverse_transpose:
            raise ValueError("K is required unless options.auto_inverse_transpose is set")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet symbols must be unique")
        if self.generators is not None and len(set(self.generators)) != len(self.generators):
            raise ValueError("generator names must be unique")
        return self


def _first_error(error: SchemaError) -> ConfigError:
    problems = error.errors()
    first = problems[0]
    field = ".".join(str(part) for part in first["loc"])
    detail = "; ".join(
        f"{'.'.join(str(part) for part in problem['loc']) or '<root>'}: {problem['msg']}"
        for problem in problems
    )
    return ConfigError(first["msg"], field=field, detail=detail)


def parse_config(document: Mapping[str, Any]) -> SystemConfig:
    try:
        return SystemConfig.model_validate(document)
    except SchemaError as e:
        raise _first_error(e) from e


def read_config(path: str) -> SystemConfig:
    """Read and schema-check a YAML config"""
    try:
        with open(path, 'r') as f:
            document = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        field = f"line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"YAML parse error in {path}", field=field, detail=str(e)) from e
    if not isinstance(document, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return parse_config(document)


def build_system(config: SystemConfig) -> Tuple[RelationMatrix, MarkovSystem]:
    """Delegate structural validation to the relation and system validators"""
    generators = config.generators
    if config.options.auto_inverse_transpose:
        rank = len(config.A)
        relation = free_group_relation(rank)
        if config.K is not None and tuple(map(tuple, config.K)) != relation.entries:
            raise ConfigError("K contradicts auto_inverse_transpose", field="K",
                              detail=f"expected the F_{rank} relation {relation.entries}")
        matrices = with_inverse_transposes(config.A)
    else:
        try:
            relation = validate_relation(config.K)
        except ValidationError as e:
            logger.error(f"Invalid field K: {e}")
            raise
        matrices = config.A
    try:
        system = validate_system(relation, config.alphabet, matrices, generators)
    except ValidationError as e:
        logger.error(f"Invalid field A/alphabet/generators: {e}")
        raise
    return relation, system


def load_config(path: str) -> Tuple[RelationMatrix, MarkovSystem, RunOptions]:
    config = read_config(path)
    relation, system = build_system(config)
    logger.info(f"Loaded {path}: k={system.k}, |A|={system.alphabet_size}")
    return relation, system, config.options


def config_from_system(system: MarkovSystem, options: Optional[RunOptions] = None, name: Optional[str] = None) -> SystemConfig:
    """Explicit config (no transpose expansion) describing ``system``"""
    return SystemConfig(
        name=name,
        generators=list(system.generators),
        K=[list(row) for row in system.relation.entries],
        alphabet=list(system.symbols),
        A=[[list(row) for row in matrix] for matrix in system.transitions],
        options=(options or RunOptions()).model_copy(update={"auto_inverse_transpose": False}),
    )


def save_config(config: SystemConfig, path: str) -> None:
    with open(path, 'w') as f:
        yaml.safe_dump(config.model_dump(exclude_none=True), f, sort_keys=False)


def merge_flags(options: RunOptions, flags: Mapping[str, Any]) -> RunOptions:
    """Apply command-line values; one warning per option also set in the config"""
    updates: Dict[str, Any] = {}
    for key, value in flags.items():
        if value is None:
            continue
        if key in options.model_fields_set:
            logger.warning(
                f"Flag {FLAG_NAMES.get(key, '--' + key.replace('_', '-'))} overrides config value {getattr(options, key)!r} with {value!r}"
            )
        updates[key] = value
    if not updates:
        return options
    try:
        return RunOptions.model_validate({**options.model_dump(), **updates})
    except SchemaError as e:
        raise _first_error(e) from e


def entropy_options(options: RunOptions) -> EntropyOptions:
    return EntropyOptions(
        max_iters=options.max_iters,
        eps=options.eps,
        eps_zero=options.eps_zero,
        log_base=options.log_base,
    )
