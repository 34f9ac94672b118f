import re
import hashlib
import logging
import configparser
from typing import Optional, Tuple, Dict, Iterable
from ..core.json import dumps
from ..core.validation import HsaccValidator
from ..types.training import TrainConfig
from .schemas import SECTIONS


_logger = logging.getLogger(__name__ + ":logger")
_SECTION_RX = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_RX = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


class ImproperlyConfiguredError(Exception):
    """
    Raised when a configuration file, or a setting override, is invalid.
    """


def resolve_key(key: str) -> Tuple[str, str]:
    """
    Resolves a setting key, which can be given as `section.name` or just
    as `name` (in this case, the name must be declared by exactly one of
    the sections).
    :param key: The key to resolve.
    :return: A (section, name) pair.
    """

    key = key.strip().lower()
    if "." in key:
        section, name = key.split(".", 1)
        if section not in SECTIONS or name not in SECTIONS[section]:
            raise ImproperlyConfiguredError(f"Unknown setting: {key}")
        return section, name
    matches = [section for section, schema in SECTIONS.items() if key in schema]
    if not matches:
        raise ImproperlyConfiguredError(f"Unknown setting: {key}")
    if len(matches) > 1:
        raise ImproperlyConfiguredError(f"Ambiguous setting: {key} (use one of: "
                                        f"{', '.join(section + '.' + key for section in matches)})")
    return matches[0], key


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    """
    Tells the line where each (section, key) was written in a config file.
    """

    result = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        match = _SECTION_RX.match(line)
        if match:
            section = match.group(1).strip().lower()
            continue
        match = _KEY_RX.match(line)
        if match and section is not None:
            result[(section, match.group(1).strip().lower())] = number
    return result


def read_config_file(path: str) -> Tuple[dict, Dict[Tuple[str, str], str]]:
    """
    Reads an INI-style configuration file, without validating its values.
    :param path: The path of the file.
    :return: The raw document ({section: {key: text}}) and the origin of
      each of its entries (file and line).
    """

    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ImproperlyConfiguredError(f"Cannot read config file {path}: {e}")

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        # Parse errors already tell the line.
        raise ImproperlyConfiguredError(str(e))

    lines = _key_lines(text)
    raw, origins = {}, {}
    for section in parser.sections():
        if section.lower() not in SECTIONS:
            raise ImproperlyConfiguredError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            raw.setdefault(section.lower(), {})[key] = value
            origins[(section.lower(), key)] = f"{path}, line {lines.get((section.lower(), key), '?')}"
    return raw, origins


def parse_override(override: str) -> Tuple[str, str, str]:
    """
    Parses a KEY=VALUE override.
    :return: A (section, name, value) triple.
    """

    if "=" not in override:
        raise ImproperlyConfiguredError(f"Invalid override (expected KEY=VALUE): {override}")
    key, value = override.split("=", 1)
    section, name = resolve_key(key)
    return section, name, value.strip()


def _describe_errors(errors: dict, origins: Dict[Tuple[str, str], str]) -> str:
    messages = []
    for section, entries in errors.items():
        for entry in entries:
            if isinstance(entry, dict):
                for key, problems in entry.items():
                    where = origins.get((section, key), "default value")
                    messages.append(f"[{section}] {key}: {'; '.join(map(str, problems))} ({where})")
            else:
                messages.append(f"[{section}]: {entry}")
    return "Validation errors on settings: " + " | ".join(messages)


def load_config(path: Optional[str] = None, overrides: Iterable[str] = (),
                seed: Optional[int] = None) -> Tuple[dict, TrainConfig]:
    """
    Loads the settings: the given file (if any), then the overrides (in
    order, the latter winning), then the seed (if given). Everything is
    validated and the absent settings take their defaults.
    :param path: The configuration file, if any.
    :param overrides: The KEY=VALUE overrides.
    :param seed: A seed overriding the train.seed setting.
    :return: The normalized document, and the training config built
      from it.
    """

    raw, origins = read_config_file(path) if path else ({}, {})
    for override in overrides:
        section, name, value = parse_override(override)
        raw.setdefault(section, {})[name] = value
        origins[(section, name)] = f"--set {override}"
    if seed is not None:
        raw.setdefault("train", {})["seed"] = seed
        origins[("train", "seed")] = "--seed"

    validator = HsaccValidator("alephvault.hsacc.schemas.settings")
    if not validator.validate(raw):
        raise ImproperlyConfiguredError(_describe_errors(validator.errors, origins))
    document = validator.document
    try:
        config = TrainConfig.from_document(document).check()
    except ValueError as e:
        raise ImproperlyConfiguredError(str(e))
    _logger.debug(f"Loaded settings: {document}")
    return document, config


def config_digest(document: dict) -> str:
    """
    A stable hash of a normalized settings document.
    """

    return hashlib.sha256(dumps(document).encode("utf-8")).hexdigest()
