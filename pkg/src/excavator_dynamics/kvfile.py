"""Plain-text ``key = value`` files with ``#`` comments.

Used for machine geometry, lumped parameters, run configs, calibration
reports and payload records. Keys are case sensitive; a line may hold a
comma-separated list of floats.
"""

import configparser
from pathlib import Path

from .errors import ConfigError

_SECTION = "root"


def parse(text, source="<string>"):
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",),
        delimiters=("=",), strict=True,
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=str(source))
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return dict(parser[_SECTION])


def read(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse(text, source=path)


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(float(v)) for v in value)
    if hasattr(value, "tolist"):
        return format_value(value.tolist())
    return str(value)


def dumps(items, header=None):
    lines = []
    if header:
        lines.extend(f"# {line}" if line else "#" for line in header.splitlines())
    for key, value in items.items():
        lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def write(path, items, header=None):
    Path(path).write_text(dumps(items, header=header), encoding="utf-8")


def get_float(data, key, default=None, source=""):
    if key not in data:
        if default is None:
            raise ConfigError(f"{source}: missing required field '{key}'")
        return default
    try:
        return float(data[key])
    except ValueError:
        raise ConfigError(f"{source}: field '{key}' is not a number: {data[key]!r}") from None


def get_floats(data, key, count=None, default=None, source=""):
    if key not in data:
        if default is None:
            raise ConfigError(f"{source}: missing required field '{key}'")
        return list(default)
    try:
        values = [float(v) for v in data[key].split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{source}: field '{key}' must be a list of numbers") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"{source}: field '{key}' needs {count} values, got {len(values)}")
    return values


def get_bool(data, key, default=False):
    if key not in data:
        return default
    return data[key].strip().lower() in ("1", "true", "yes", "on")
