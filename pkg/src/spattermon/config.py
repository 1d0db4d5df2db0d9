"""Strict TOML-style run configuration files.

The accepted grammar is the key/value subset the tools need (the host
interpreter predates stdlib TOML support, so this stays dependency-free):

* ``[section]`` headers
* ``key = value`` with value one of: ``"quoted string"``, ``true``/
  ``false``, integer, float, or ``[v1, v2, ...]`` of numbers/strings
* ``#`` comments and blank lines

Every subcommand declares the sections and keys it understands; anything
else is rejected by name so typos cannot silently change a run.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration: malformed syntax, unknown key, or bad value."""


def _parse_scalar(text: str, where: str):
    text = text.strip()
    if not text:
        raise ConfigError(f"{where}: empty value")
    if text.startswith('"'):
        if not text.endswith('"') or len(text) < 2:
            raise ConfigError(f"{where}: unterminated string")
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse value {text!r}") from exc


def _strip_comment(text: str) -> str:
    in_string = False
    for i, ch in enumerate(text):
        if ch == '"':
            in_string = not in_string
        elif ch == "#" and not in_string:
            return text[:i]
    return text


def _split_list(text: str, where: str) -> list[str]:
    items, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            items.append(cur)
            cur = ""
            continue
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        cur += ch
    if cur.strip():
        items.append(cur)
    if depth != 0:
        raise ConfigError(f"{where}: unbalanced brackets")
    return items


def parse_config_text(text: str, source: str = "<config>") -> dict[str, dict]:
    sections: dict[str, dict] = {}
    current: dict | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {line!r}")
            current_name = line[1:-1].strip()
            if not current_name:
                raise ConfigError(f"{where}: empty section name")
            if current_name in sections:
                raise ConfigError(f"{where}: duplicate section [{current_name}]")
            current = {}
            sections[current_name] = current
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"{where}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = _strip_comment(value).strip()
        if not key:
            raise ConfigError(f"{where}: missing key name")
        if key in current:
            raise ConfigError(f"{where}: duplicate key {key!r} in [{current_name}]")
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(f"{where}: unterminated list")
            current[key] = [
                _parse_scalar(item, where) for item in _split_list(value[1:-1], where)
            ]
        else:
            current[key] = _parse_scalar(value, where)
    return sections


def load_config(path: str | Path) -> dict[str, dict]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), str(path))


def validate_config(
    cfg: dict[str, dict],
    schema: dict[str, set[str]],
    required_sections: tuple[str, ...] = (),
) -> None:
    """Reject unknown sections/keys by name and check required sections."""
    for section, keys in cfg.items():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(keys) - schema[section]
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(f"unknown key {name!r} in section [{section}]")
    for section in required_sections:
        if section not in cfg:
            raise ConfigError(f"missing required section [{section}]")
