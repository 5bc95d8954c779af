"""
Build the Backends bundle from the "backends" section of the pipeline config.

Each capability is configured independently:

  {"kind": "stub", "mode": "identity", ...stub options}
  {"kind": "plugin", "transport": "subprocess", "command": ["python", "tools/plugin_echo.py"]}
  {"kind": "plugin", "transport": "http", "endpoint": "http://localhost:8080/op"}

A capability may also be null (not needed by the stages being run).
Serialized backends come back already wrapped in their single-consumer queue.
"""

from dataclasses import dataclass, field

from errors import ConfigError
from backends import stubs
from backends.base import Backends, serialized
from backends.plugin import PLUGIN_CLASSES, HttpTransport, SubprocessTransport

CAPABILITIES = ("translator", "paraphraser", "captioner", "imagegen", "embedder", "scorer")

_STUB_FACTORIES = {
    "translator":  stubs.stub_translator,
    "paraphraser": stubs.stub_paraphraser,
    "captioner":   stubs.stub_captioner,
    "imagegen":    stubs.stub_imagegen,
    "embedder":    stubs.stub_embedder,
    "scorer":      stubs.stub_lm,
}


@dataclass
class BackendSpec:
    """
    Fields
    ------
    kind    : "stub" or "plugin".
    options : Remaining keys of the config entry, passed to the stub factory or transport.
    """
    kind:    str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, capability: str, raw: dict) -> "BackendSpec":
        if not isinstance(raw, dict) or "kind" not in raw:
            raise ConfigError(f"backends.{capability}: expected an object with a 'kind' key")
        options = {k: v for k, v in raw.items() if k != "kind"}
        return cls(kind=str(raw["kind"]), options=options)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.options}


@dataclass
class BackendsConfig:
    translator:  BackendSpec | None = None
    paraphraser: BackendSpec | None = None
    captioner:   BackendSpec | None = None
    imagegen:    BackendSpec | None = None
    embedder:    BackendSpec | None = None
    scorer:      BackendSpec | None = None

    def with_override(self, capability: str, value: str) -> "BackendsConfig":
        """Apply a CLI selector: "stub:<mode>" or "plugin:<command or URL>"."""
        if capability not in CAPABILITIES:
            raise ConfigError(f"unknown backend capability {capability!r}")
        kind, _, rest = value.partition(":")
        if kind == "stub":
            spec = BackendSpec("stub", {"mode": rest} if rest else {})
        elif kind == "plugin" and rest.startswith(("http://", "https://")):
            spec = BackendSpec("plugin", {"transport": "http", "endpoint": rest})
        elif kind == "plugin" and rest:
            spec = BackendSpec("plugin", {"transport": "subprocess", "command": rest.split()})
        else:
            raise ConfigError(f"--{capability} expects stub:<mode> or plugin:<command|url>, got {value!r}")
        values = {c: getattr(self, c) for c in CAPABILITIES}
        values[capability] = spec
        return BackendsConfig(**values)

    def to_dict(self) -> dict:
        return {c: (getattr(self, c).to_dict() if getattr(self, c) else None) for c in CAPABILITIES}


def _translator_maps(raw: dict) -> dict:
    # JSON keys are "src>tgt"
    maps = {}
    for key, table in raw.items():
        source, sep, target = key.partition(">")
        if not sep:
            raise ConfigError(f"translator map key {key!r} must look like 'en>fr'")
        maps[(source, target)] = table
    return maps


def _build_stub(capability: str, options: dict):
    options = dict(options)
    if capability == "translator" and "maps" in options:
        options["maps"] = _translator_maps(options["maps"])
    if capability == "embedder" and "dim" in options:
        options["d_e"] = options.pop("dim")
    try:
        return _STUB_FACTORIES[capability](**options)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"backends.{capability}: {e}") from e


def _build_plugin(capability: str, options: dict):
    if capability == "embedder" and "dim" not in options:
        raise ConfigError("backends.embedder: plugin embedder needs 'dim'")
    transport_kind = options.get("transport", "subprocess")
    timeout_s = float(options.get("timeout_s", 120.0))
    if transport_kind == "subprocess":
        command = options.get("command")
        if not command:
            raise ConfigError(f"backends.{capability}: subprocess plugin needs 'command'")
        transport = SubprocessTransport(command if isinstance(command, list) else str(command).split(), timeout_s)
    elif transport_kind == "http":
        endpoint = options.get("endpoint")
        if not endpoint:
            raise ConfigError(f"backends.{capability}: http plugin needs 'endpoint'")
        transport = HttpTransport(endpoint, timeout_s)
    else:
        raise ConfigError(f"backends.{capability}: unknown transport {transport_kind!r}")
    cls = PLUGIN_CLASSES[capability]
    if capability == "embedder":
        return cls(transport, int(options["dim"]), name=f"{capability}-plugin")
    return cls(transport, name=f"{capability}-plugin")


def build_backend(capability: str, spec: BackendSpec | None):
    if spec is None:
        return None
    if spec.kind == "stub":
        return _build_stub(capability, spec.options)
    if spec.kind == "plugin":
        return serialized(_build_plugin(capability, spec.options))
    raise ConfigError(f"backends.{capability}: unknown kind {spec.kind!r}")


def build_backends(config: BackendsConfig, only=CAPABILITIES) -> Backends:
    """Instantiate the requested capabilities; the rest stay None."""
    return Backends(**{c: build_backend(c, getattr(config, c)) for c in CAPABILITIES if c in only})
