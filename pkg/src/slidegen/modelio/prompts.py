"""Prompt templates stored as editable text files.

A template file holds ``[system]`` and ``[user]`` sections; a file without
section markers is a single system message used verbatim. Placeholders are
written ``{{name}}``.
"""

from __future__ import annotations

import hashlib
import re
from importlib import resources
from pathlib import Path

from ..errors import SlidegenError
from .core import Message

PLACEHOLDER = re.compile(r"\{\{\s*(\w+)\s*\}\}")
_SECTION = re.compile(r"^\[(system|user)\]\s*$", re.M)


class UnknownRole(SlidegenError):
    pass


class MissingBinding(SlidegenError):
    def __init__(self, name: str, template: str):
        self.name = name
        super().__init__(f"template '{template}' needs a binding for '{name}'")


def _default_dir() -> Path:
    return Path(str(resources.files("slidegen") / "prompts"))


class PromptPack:
    def __init__(self, directory: str | Path | None = None, overrides: str | Path | None = None):
        self.directory = Path(directory) if directory else _default_dir()
        self._templates: dict[str, str] = {}
        for path in sorted(self.directory.glob("*.txt")):
            self._templates[path.stem] = path.read_text(encoding="utf-8")
        if overrides:
            for path in sorted(Path(overrides).glob("*.txt")):
                self._templates[path.stem] = path.read_text(encoding="utf-8")
        version_file = self.directory / "VERSION"
        base = version_file.read_text(encoding="utf-8").strip() if version_file.exists() else "0"
        digest = hashlib.sha256()
        for key in sorted(self._templates):
            digest.update(key.encode() + b"\0" + self._templates[key].encode() + b"\0")
        self.version = f"{base}+{digest.hexdigest()[:10]}"

    def __contains__(self, key: str) -> bool:
        return key in self._templates

    def keys(self) -> list[str]:
        return sorted(self._templates)

    def template(self, key: str) -> str:
        try:
            return self._templates[key]
        except KeyError:
            raise UnknownRole(f"no prompt template named '{key}'") from None

    def placeholders(self, key: str) -> set[str]:
        return set(PLACEHOLDER.findall(self.template(key)))

    def render(self, key: str, bindings: dict[str, str] | None = None) -> list[Message]:
        text = self.template(key)
        bindings = bindings or {}

        def sub(m):
            name = m.group(1)
            if name not in bindings:
                raise MissingBinding(name, key)
            return str(bindings[name])

        markers = list(_SECTION.finditer(text))
        if not markers:
            return [Message("system", PLACEHOLDER.sub(sub, text))]
        messages = []
        for k, m in enumerate(markers):
            end = markers[k + 1].start() if k + 1 < len(markers) else len(text)
            body = text[m.end():end].strip("\n")
            messages.append(Message(m.group(1), PLACEHOLDER.sub(sub, body)))
        return messages


_default_pack: PromptPack | None = None


def default_pack() -> PromptPack:
    global _default_pack
    if _default_pack is None:
        _default_pack = PromptPack()
    return _default_pack


def render_prompt(role_name: str, bindings: dict[str, str] | None = None, pack: PromptPack | None = None) -> list[Message]:
    return (pack or default_pack()).render(role_name, bindings)
