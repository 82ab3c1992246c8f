"""Run configuration loaded from a TOML file.

Secrets never live in the file: a client names the environment variable that
holds its API key (``api_key_env``) and the key is read when the client is built.

Example::

    [models]
    provider = "openai"
    base_url = "https://api.example.com/v1"
    model = "some-vl-model"
    api_key_env = "SLIDEGEN_API_KEY"

    [models.roles.page_reviewer]
    model = "some-larger-vl-model"

    [budget]
    max_code_iterations = 5
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import SlidegenError
from .modelio import ROLES, EchoClient, Models, OpenAICompatClient, ScriptedClient
from .modelio.core import CallLedger
from .review import LoopBudget
from .slidev import LayoutConstraints

PROVIDERS = ("openai", "scripted", "echo")


class ConfigError(SlidegenError):
    pass


@dataclass(frozen=True)
class ClientConfig:
    provider: str = "echo"
    base_url: str = ""
    model: str = ""
    api_key_env: str = ""
    timeout: float = 120.0
    temperature: float = 0.0
    transcript: str = ""  # scripted provider only

    def validate(self, where: str):
        if self.provider not in PROVIDERS:
            raise ConfigError(f"{where}: unknown provider '{self.provider}' (expected one of {', '.join(PROVIDERS)})")
        if self.provider == "openai" and not (self.base_url and self.model):
            raise ConfigError(f"{where}: the openai provider needs base_url and model")
        if self.provider == "scripted" and not self.transcript:
            raise ConfigError(f"{where}: the scripted provider needs a transcript path")
        if self.timeout <= 0:
            raise ConfigError(f"{where}: timeout must be positive")


@dataclass(frozen=True)
class RendererConfig:
    backend: str = "mock"
    command: str = "slidev"
    extra_args: tuple[str, ...] = ()
    max_parallel: int = 2
    timeout: float = 600.0

    def validate(self):
        if self.backend not in ("mock", "live"):
            raise ConfigError(f"renderer.backend must be 'mock' or 'live', got '{self.backend}'")
        if self.max_parallel < 1:
            raise ConfigError("renderer.max_parallel must be at least 1")


@dataclass(frozen=True)
class EvalConfig:
    text_provider: str = "toy"
    clip_provider: str = "toy"
    longclip_provider: str = "toy"
    toy_dimension: int = 256
    coverage_direction: str = "reference_to_candidate"
    abbreviate: bool = True
    judge: bool = False

    def validate(self):
        if self.coverage_direction not in ("reference_to_candidate", "candidate_to_reference"):
            raise ConfigError(f"eval.coverage_direction '{self.coverage_direction}' is not supported")
        if self.toy_dimension < 8:
            raise ConfigError("eval.toy_dimension must be at least 8")


@dataclass(frozen=True)
class RunConfig:
    models: ClientConfig = field(default_factory=ClientConfig)
    role_models: dict[str, ClientConfig] = field(default_factory=dict)
    constraints: LayoutConstraints = field(default_factory=LayoutConstraints)
    budget: LoopBudget = field(default_factory=LoopBudget)
    renderer: RendererConfig = field(default_factory=RendererConfig)
    prefilter: bool = False
    page_workers: int = 1
    max_calls: int | None = None
    eval: EvalConfig = field(default_factory=EvalConfig)
    run_root: str = "runs"

    def validate(self) -> "RunConfig":
        self.models.validate("models")
        for role, c in self.role_models.items():
            if role not in ROLES:
                raise ConfigError(f"models.roles: unknown role '{role}'")
            c.validate(f"models.roles.{role}")
        self.renderer.validate()
        self.eval.validate()
        if self.page_workers < 1:
            raise ConfigError("run.page_workers must be at least 1")
        if self.max_calls is not None and self.max_calls < 0:
            raise ConfigError("run.max_calls must be non-negative")
        return self

    def client_config(self, role: str) -> ClientConfig:
        return self.role_models.get(role, self.models)

    def to_dict(self) -> dict[str, Any]:
        c = self.constraints
        return {
            "models": dataclasses.asdict(self.models),
            "role_models": {k: dataclasses.asdict(v) for k, v in sorted(self.role_models.items())},
            "constraints": {
                "max_lines_per_slide": c.max_lines_per_slide,
                "max_image_area_fraction": c.max_image_area_fraction,
                "allowed_layouts": sorted(c.allowed_layouts),
            },
            "budget": dataclasses.asdict(self.budget),
            "renderer": {**dataclasses.asdict(self.renderer), "extra_args": list(self.renderer.extra_args)},
            "prefilter": self.prefilter,
            "page_workers": self.page_workers,
            "max_calls": self.max_calls,
            "eval": dataclasses.asdict(self.eval),
        }

    def config_hash(self) -> str:
        """Canonical hash of every setting that can change a run's outcome."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _take(section: dict, cls, where: str, base: Path | None = None, defaults=None):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {', '.join(sorted(unknown))}")
    values = dict(section)
    if "extra_args" in values:
        values["extra_args"] = tuple(values["extra_args"])
    if base is not None and values.get("transcript"):
        p = Path(values["transcript"])
        values["transcript"] = str(p if p.is_absolute() else (base / p))
    try:
        if defaults is not None:
            return dataclasses.replace(defaults, **values)
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict, base: Path | None = None) -> RunConfig:
    data = dict(data)
    known = {"models", "constraints", "budget", "renderer", "run", "eval"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    models_sec = dict(data.get("models", {}))
    roles_sec = models_sec.pop("roles", {})
    if "api_key" in models_sec or any("api_key" in r for r in roles_sec.values()):
        raise ConfigError("API keys must come from the environment; set api_key_env instead")
    default = _take(models_sec, ClientConfig, "models", base)
    roles = {role: _take(sec, ClientConfig, f"models.roles.{role}", base, default) for role, sec in roles_sec.items()}
    cons = dict(data.get("constraints", {}))
    if "allowed_layouts" in cons:
        cons["allowed_layouts"] = frozenset(cons["allowed_layouts"])
    run = dict(data.get("run", {}))
    run_keys = {"prefilter", "page_workers", "max_calls", "root"}
    if set(run) - run_keys:
        raise ConfigError(f"run: unknown keys {', '.join(sorted(set(run) - run_keys))}")
    cfg = RunConfig(
        models=default,
        role_models=roles,
        constraints=_take(cons, LayoutConstraints, "constraints"),
        budget=_take(data.get("budget", {}), LoopBudget, "budget"),
        renderer=_take(data.get("renderer", {}), RendererConfig, "renderer"),
        prefilter=bool(run.get("prefilter", False)),
        page_workers=int(run.get("page_workers", 1)),
        max_calls=run.get("max_calls"),
        eval=_take(data.get("eval", {}), EvalConfig, "eval"),
        run_root=str(run.get("root", "runs")),
    )
    return cfg.validate()


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML config; ``None`` gives the defaults (echo client, mock renderer)."""
    if path is None:
        return RunConfig().validate()
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, base=path.parent)


def _build_client(c: ClientConfig, scripted_cache: dict):
    if c.provider == "echo":
        return EchoClient()
    if c.provider == "scripted":
        # Roles sharing one transcript share one client so occurrence indexes line up.
        if c.transcript not in scripted_cache:
            try:
                scripted_cache[c.transcript] = ScriptedClient.from_jsonl(c.transcript)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read transcript {c.transcript}: {exc}") from exc
        return scripted_cache[c.transcript]
    return OpenAICompatClient(c.base_url, c.model, api_key_env=c.api_key_env or "OPENAI_API_KEY", timeout=c.timeout, temperature=c.temperature)


def build_models(cfg: RunConfig, ledger: CallLedger | None = None) -> Models:
    cache: dict = {}
    clients = {"default": _build_client(cfg.models, cache)}
    for role, c in cfg.role_models.items():
        clients[role] = _build_client(c, cache)
    return Models(clients, ledger=ledger if ledger is not None else CallLedger(cfg.max_calls))
