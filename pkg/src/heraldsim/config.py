"""Layered INI configuration.

The packaged ``data/default.ini`` is always read first; user files are layered
on top, so a user file only needs the keys it changes.
"""
from __future__ import annotations

import configparser
from importlib import resources

from .errors import ConfigError


def _parser():
    p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    p.optionxform = str
    return p


class Config:
    def __init__(self, parser):
        self._p = parser

    @classmethod
    def load(cls, *paths, overrides=None):
        p = _parser()
        p.read_string(resources.files("heraldsim").joinpath("data/default.ini").read_text())
        for path in paths:
            if path is None:
                continue
            try:
                with open(path) as fh:
                    p.read_file(fh)
            except OSError as exc:
                raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
            except configparser.Error as exc:
                raise ConfigError("config", f"{path}: {exc}") from exc
        for (section, key), value in (overrides or {}).items():
            if not p.has_section(section):
                p.add_section(section)
            p.set(section, key, str(value))
        return cls(p)

    def with_overrides(self, overrides):
        p = _parser()
        p.read_dict({s: dict(self._p[s]) for s in self._p.sections()})
        for (section, key), value in overrides.items():
            if not p.has_section(section):
                p.add_section(section)
            p.set(section, key, str(value))
        return Config(p)

    def _raw(self, section, key):
        try:
            return self._p.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise ConfigError(f"{section}.{key}", "missing") from None

    def has(self, section, key):
        return self._p.has_option(section, key)

    def str(self, section, key, default=None):
        if default is not None and not self.has(section, key):
            return default
        return self._raw(section, key).strip()

    def float(self, section, key, default=None):
        if default is not None and not self.has(section, key):
            return float(default)
        raw = self._raw(section, key)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"not a number: {raw!r}") from None

    def int(self, section, key, default=None):
        value = self.float(section, key, default)
        if value != int(value):
            raise ConfigError(f"{section}.{key}", f"not an integer: {value!r}")
        return int(value)

    def bool(self, section, key, default=None):
        if default is not None and not self.has(section, key):
            return bool(default)
        try:
            return self._p.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"not a boolean: {self._raw(section, key)!r}") from None

    def floats(self, section, key):
        raw = self._raw(section, key)
        try:
            return tuple(float(x) for x in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"not a list of numbers: {raw!r}") from None

    def section(self, name):
        return dict(self._p[name]) if self._p.has_section(name) else {}

    def sections(self):
        return self._p.sections()

    def dump(self):
        """Canonical text of the merged configuration."""
        lines = []
        for s in sorted(self._p.sections()):
            lines.append(f"[{s}]")
            lines.extend(f"{k} = {v}" for k, v in sorted(self._p[s].items()))
            lines.append("")
        return "\n".join(lines)
