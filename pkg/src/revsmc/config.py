#!/usr/bin/env python3
"""Layered configuration of experiments."""

import copy
import importlib.resources
import pathlib

from typing import Any, Callable, Optional, TypeVar

import yaml

from revsmc.rslogging import rslogging

T = TypeVar('T')

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

MODELS: tuple[str, ...] = ('atm', 'hyperbolic', 'sis')

# lowest precedence first
LAYERS: tuple[str, ...] = ('default', 'experiment', 'input')


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range."""


class Config():
    """The configuration of one run.

    Values live in three layers, each overriding the one before:
    * `default`: `settings/config.yaml` and every model's `config.yaml`
    * `experiment`: a preset or an experiment file given by the user
    * `input`: command line options

    Values are addressed by a key path of at least three keys, e.g.
    `('core', 'experiment', 'seed')` or `('models', 'atm', 'K')`.

    Attributes:
        _layers: One nested dictionary per layer.
        _active: The merged layers, `None` while out of date.
    """

    def __init__(self) -> None:
        """Load the defaults."""

        self._layers: dict[str, dict[str, Any]] = {
            layer: {} for layer in LAYERS
        }
        self._active: Optional[dict[str, Any]] = None
        self.load()

    def load(self) -> None:
        """Load the package's and the models' defaults."""

        package: pathlib.Path = package_path()
        self.load_from_path(package / 'settings' / 'config.yaml')
        for model in MODELS:
            self.load_from_path(package / 'models' / model / 'config.yaml')

    def load_experiment(self, name_or_path: str) -> pathlib.Path:
        """Load an experiment file given as a preset name or a path.

        Args:
            name_or_path: Name of a preset (see `list_presets`) or a
                path to a YAML file.

        Returns:
            The path that was loaded.

        Raises:
            ConfigError: Neither a preset nor a readable file.
        """

        path: pathlib.Path = pathlib.Path(name_or_path).expanduser()
        if not path.is_file():
            path = preset_directory() / f'{name_or_path}.yaml'
        if not path.is_file():
            raise ConfigError(
                f'"{name_or_path}" is neither a preset nor a config file.')
        if not self.load_from_path(path, 'experiment'):
            raise ConfigError(f'Could not parse config file {path}.')
        return path

    def load_from_path(self,
                       path: pathlib.Path,
                       target: str = 'default') -> bool:
        """Merge a YAML file into a layer.

        Args:
            path: The file.
            target: The layer, one of `LAYERS`.

        Returns:
            `True` if the file was read and holds a mapping.
        """

        content: Any = _read_yaml(path)
        if content is None:
            return False
        if not isinstance(content, dict):
            logger.error('config file %s holds no mapping', str(path))
            return False
        merge(self._layer(target), content)
        self._active = None
        logger.debug('loaded config from: %s', str(path))
        return True

    def _layer(self, target: str) -> dict[str, Any]:
        if target not in self._layers:
            raise ValueError(f'Unknown configuration layer "{target}".')
        return self._layers[target]

    def _resolve(self) -> dict[str, Any]:
        """The merged layers, rebuilt after every change."""

        if self._active is None:
            active: dict[str, Any] = {}
            for layer in LAYERS:
                merge(active, self._layers[layer])
            self._active = active
        return self._active

    def as_dict(self) -> dict[str, Any]:
        """Return a copy of the merged configuration."""
        return copy.deepcopy(self._resolve())

    def has(self, *path: str) -> bool:
        """Does any layer set the value at `path`?"""

        node: Any = self._resolve()
        for key in path:
            if not isinstance(node, dict) or key not in node:
                return False
            node = node[key]
        return True

    def _get(self,
             *path: str,
             default: T,
             convert: Callable[[Any], T] = lambda t: t) -> T:
        """Return the configured value at `path` or `default`.

        Args:
            *path: The key path, at least three keys.
            default: The value to use if nothing is configured.
            convert: Function converting the raw value.

        Returns:
            The converted value.

        Raises:
            ValueError: The path is shorter than three keys or the
                default cannot be converted.
            ConfigError: The configured value could not be converted.
        """

        _check_path(path)
        # an invalid default is a programming error and must surface
        fallback: T = convert(default)

        branch: Optional[dict[str, Any]] = _branch(self._resolve(),
                                                   path[:-1],
                                                   create=False)
        if branch is None or path[-1] not in branch:
            logger.debug('no configuration for "%s"', '.'.join(path))
            return fallback

        raw: Any = branch[path[-1]]
        try:
            return convert(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f'Value {raw!r} for {".".join(path)} could '
                              'not be converted.') from e

    def get_int(self, *path: str, default: int) -> int:
        """Return the configuration or default, see Config._get()."""
        return self._get(*path, default=default, convert=_to_int)

    def get_float(self, *path: str, default: float) -> float:
        """Return the configuration or default, see Config._get()."""
        return self._get(*path, default=default, convert=float)

    def get_str(self, *path: str, default: str) -> str:
        """Return the configuration or default, see Config._get()."""
        return self._get(*path, default=default, convert=str)

    def get_bool(self, *path: str, default: bool) -> bool:
        """Return the configuration or default, see Config._get()."""
        return self._get(*path, default=default, convert=_to_bool)

    def get_list_list_float(
            self, *path: str,
            default: list[list[float]]) -> list[list[float]]:
        """Return the configuration or default, see Config._get()."""
        return self._get(
            *path,
            default=default,
            convert=lambda raw: _each(raw, lambda row: _each(row, float)))

    def _set(self,
             *path: str,
             value: Any,
             convert: Callable[[Any], Any],
             target: str = 'default') -> None:
        """Store a value in a layer.

        Args:
            *path: The key path, at least three keys.
            value: The value.
            convert: Function converting the value before storing it.
            target: The layer, one of `LAYERS`.

        Raises:
            ValueError: The path is shorter than three keys.
        """

        _check_path(path)
        branch: Optional[dict[str, Any]] = _branch(self._layer(target),
                                                   path[:-1],
                                                   create=True)
        assert branch is not None
        branch[path[-1]] = convert(value)
        self._active = None

    def set_int(self, *path: str, value: int, target: str = 'default'):
        """Set the value for a config path, see Config._set()."""
        self._set(*path, value=value, convert=int, target=target)

    def set_str(self, *path: str, value: str, target: str = 'default'):
        """Set the value for a config path, see Config._set()."""
        self._set(*path, value=value, convert=str, target=target)

    def set_yaml(self, *path: str, value: str, target: str = 'input'):
        """Set a value given as YAML text, e.g. from the command line.

        `models.atm.K=3` sets an integer, `...terminal_intervals=[[4,
        4.1]]` a nested list.
        """
        try:
            parsed: Any = yaml.safe_load(value)
        except yaml.YAMLError as e:
            raise ConfigError(
                f'Value {value!r} for {".".join(path)} is not valid YAML.'
            ) from e
        self._set(*path, value=parsed, convert=lambda v: v, target=target)


def merge(into: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge `update` into `into`.

    Nested mappings are merged key by key, everything else in `update`
    replaces the value in `into` by a copy.

    Returns:
        `into`.
    """

    for key, value in update.items():
        if isinstance(value, dict) and isinstance(into.get(key), dict):
            merge(into[key], value)
        else:
            into[key] = copy.deepcopy(value)
    return into


def _branch(tree: dict[str, Any], keys: tuple[str, ...],
            create: bool) -> Optional[dict[str, Any]]:
    """Walk `keys` down `tree`.

    Args:
        tree: The nested dictionary.
        keys: The keys to follow.
        create: Add missing (or replace non-mapping) nodes on the way.

    Returns:
        The dictionary at the end of the walk, `None` if it does not
        exist and `create` is `False`.
    """

    node: dict[str, Any] = tree
    for key in keys:
        child: Any = node.get(key)
        if not isinstance(child, dict):
            if not create:
                return None
            child = {}
            node[key] = child
        node = child
    return node


def _check_path(path: tuple[str, ...]) -> None:
    # 'core' / 'models' plus a section would return a whole subtree
    if len(path) <= 2:
        raise ValueError('Path too short.')


def _read_yaml(path: pathlib.Path) -> Any:
    """Parse a YAML file, `None` if it cannot be read or parsed."""

    try:
        with open(path, 'r', encoding='utf-8') as configfile:
            return yaml.safe_load(configfile) or {}
    except yaml.YAMLError:
        logger.error('error while parsing %s', str(path))
    except FileNotFoundError:
        logger.debug('could not open config file at %s', str(path))
    return None


def _each(values: Any, convert: Callable[[Any], T]) -> list[T]:
    """Convert every item of a YAML sequence.

    Raises:
        ValueError: `values` is no sequence.
    """

    if not isinstance(values, (list, tuple)):
        raise ValueError(f'{values!r} is no list.')
    return [convert(value) for value in values]


def _to_int(value: Any) -> int:
    """Convert to int without silently truncating floats like 2.5."""

    if isinstance(value, bool):
        raise ValueError('booleans are no integers')
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f'{value} is not an integer.')
        return int(value)
    return int(value)


def _to_bool(value: Any) -> bool:
    """Convert YAML / CLI booleans, accepting 'true' / 'false' strings."""

    if isinstance(value, str):
        lowered: str = value.strip().lower()
        if lowered in ('true', 'yes', 'on', '1'):
            return True
        if lowered in ('false', 'no', 'off', '0'):
            return False
        raise ValueError(f'{value} is not a boolean.')
    return bool(value)


def package_path() -> pathlib.Path:
    """Return the directory the `revsmc` package lives in."""
    return pathlib.Path(str(importlib.resources.files('revsmc')))


def preset_directory() -> pathlib.Path:
    """Return the directory holding the shipped experiment presets."""
    return package_path() / 'settings' / 'presets'


def list_presets() -> list[str]:
    """Return the names of all shipped presets."""
    return sorted(path.stem for path in preset_directory().glob('*.yaml'))


def preset_description(name: str) -> str:
    """Return the `description` of a shipped preset, empty if unset."""

    content: Any = _read_yaml(preset_directory() / f'{name}.yaml')
    if not isinstance(content, dict):
        logger.error('could not read preset %s', name)
        return ''
    return str(content.get('description', ''))
