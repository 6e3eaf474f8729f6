"""Backend tags, runtime configuration, kernel dispatch and the memory arbiter.

Three portable backends exist:

``GENERIC``
    one whole-range numpy call per kernel; always available.
``BLOCKED``
    the same kernel applied chunk by chunk over ``block_size`` elements.
``PARALLEL``
    a static partition of ``[0, n)`` into ``worker_count`` contiguous ranges
    run on a thread pool. It lives in the simulated ``ACCEL`` memory space so
    every call exercises the residency bookkeeping.
"""

from __future__ import annotations

import enum
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

log = logging.getLogger(__name__)

CONFIG_ENV = "HONEI_CONFIG"
DEFAULT_CONFIG_PATH = Path.home() / ".honeirc"


class Location(enum.Enum):
    HOST = "host"
    ACCEL = "accel"


class Mode(enum.Enum):
    READ = "read"
    WRITE = "write"


class BackendTag(enum.Enum):
    GENERIC = "generic"
    BLOCKED = "blocked"
    PARALLEL = "parallel"

    @property
    def location(self) -> Location:
        return Location.ACCEL if self is BackendTag.PARALLEL else Location.HOST

    @classmethod
    def parse(cls, name) -> "BackendTag":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown backend {name!r}; expected one of "
                             f"{[t.value for t in cls]}") from None


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RuntimeConfig:
    worker_count: int = field(default_factory=lambda: os.cpu_count() or 1)
    block_size: int = 4096
    default_backend: BackendTag = BackendTag.GENERIC
    source_path: Path | None = None

    def __post_init__(self):
        if self.worker_count < 1:
            raise ConfigError("worker_count must be >= 1")
        if self.block_size < 1 or self.block_size & (self.block_size - 1):
            raise ConfigError("block_size must be a power of two >= 1")


_KEYS = ("worker_count", "block_size", "default_backend")


def load_config(path=None) -> RuntimeConfig:
    """Read a ``key=value`` runtime config file.

    ``path=None`` consults ``$HONEI_CONFIG`` and then ``~/.honeirc``. A missing
    file yields the defaults. Blank lines and ``#`` comments are skipped,
    unknown keys are logged and ignored.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG_PATH
    path = Path(path)
    if not path.is_file():
        return RuntimeConfig(source_path=None)

    values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            log.warning("%s:%d: ignoring unknown key %r", path, lineno, key)
            continue
        try:
            values[key] = BackendTag.parse(value) if key == "default_backend" else int(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    try:
        return RuntimeConfig(source_path=path, **values)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


_config: RuntimeConfig | None = None
_config_lock = threading.Lock()


def get_config() -> RuntimeConfig:
    global _config
    with _config_lock:
        if _config is None:
            _config = load_config()
        return _config


def set_config(cfg: RuntimeConfig) -> None:
    global _config
    with _config_lock:
        _config = cfg


@contextmanager
def use_config(cfg: RuntimeConfig | None = None, **overrides):
    """Temporarily swap the active runtime configuration."""
    old = get_config()
    set_config(replace(cfg or old, **overrides))
    try:
        yield get_config()
    finally:
        set_config(old)


def resolve_tag(backend=None) -> BackendTag:
    return get_config().default_backend if backend is None else BackendTag.parse(backend)


# -- memory arbiter ---------------------------------------------------------

class MemoryArbiter:
    """Residency and transfer bookkeeping for container blocks.

    A block first seen is valid on the host only. Reads copy the block to the
    requested location when it is not valid there; writes assume
    read-modify-write, so they transfer first unless already valid, then
    leave the writer's location as the single (dirty) valid copy.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self.residency: dict[int, set[Location]] = {}
        self.dirty: dict[int, Location | None] = {}
        self.transfer_count = 0
        self.transfer_bytes = 0

    def acquire(self, block: int, nbytes: int, loc, mode) -> int:
        loc = _parse_location(loc)
        mode = Mode(mode)
        with self._lock:
            valid = self.residency.setdefault(block, {Location.HOST})
            self.dirty.setdefault(block, None)
            transfers = 0
            if loc not in valid:
                transfers = 1
                self.transfer_count += 1
                self.transfer_bytes += int(nbytes)
            if mode is Mode.READ:
                valid.add(loc)
                if transfers:
                    self.dirty[block] = None
            else:
                valid.clear()
                valid.add(loc)
                self.dirty[block] = loc
            return transfers

    def valid_locations(self, block: int) -> frozenset:
        with self._lock:
            return frozenset(self.residency.get(block, {Location.HOST}))

    def dirty_location(self, block: int):
        with self._lock:
            return self.dirty.get(block)

    def reset(self) -> None:
        with self._lock:
            self.residency.clear()
            self.dirty.clear()
            self.transfer_count = 0
            self.transfer_bytes = 0


def _parse_location(loc) -> Location:
    if isinstance(loc, Location):
        return loc
    try:
        return Location(str(loc).lower())
    except ValueError:
        raise ValueError(f"unknown location {loc!r}") from None


_arbiter = MemoryArbiter()


def get_arbiter() -> MemoryArbiter:
    return _arbiter


def touch(tag: BackendTag, reads=(), writes=()) -> None:
    """Register container use with the arbiter at the tag's location."""
    loc = tag.location
    for c in reads:
        _arbiter.acquire(c.block_id, c.nbytes, loc, Mode.READ)
    for c in writes:
        _arbiter.acquire(c.block_id, c.nbytes, loc, Mode.WRITE)


# -- range execution --------------------------------------------------------

def chunks(n: int, size: int):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def partition(n: int, parts: int):
    """Contiguous, near-equal split of ``[0, n)``; empty ranges dropped."""
    parts = max(1, min(parts, n))
    base, extra = divmod(n, parts)
    out, lo = [], 0
    for p in range(parts):
        hi = lo + base + (1 if p < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


_pools: dict[int, ThreadPoolExecutor] = {}
_pool_lock = threading.Lock()


def _pool(workers: int) -> ThreadPoolExecutor:
    with _pool_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = _pools[workers] = ThreadPoolExecutor(workers, thread_name_prefix="hwnum")
        return pool


def ranges_for(tag: BackendTag, n: int, cfg: RuntimeConfig | None = None):
    cfg = cfg or get_config()
    if tag is BackendTag.GENERIC:
        return [(0, n)]
    if tag is BackendTag.BLOCKED:
        return chunks(n, cfg.block_size)
    return partition(n, cfg.worker_count)


def run_ranges(tag: BackendTag, n: int, body: Callable[[int, int], object]) -> list:
    """Apply ``body(lo, hi)`` over the tag's ranges; results in range order."""
    cfg = get_config()
    rngs = ranges_for(tag, n, cfg)
    if tag is BackendTag.PARALLEL and len(rngs) > 1:
        return list(_pool(cfg.worker_count).map(lambda r: body(*r), rngs))
    return [body(lo, hi) for lo, hi in rngs]


# -- dispatch ---------------------------------------------------------------

class UnknownKernel(KeyError):
    pass


_registry: dict[str, dict[BackendTag, Callable]] = {}


def register(kernel_id: str, *tags: BackendTag):
    """Decorator registering an implementation of ``kernel_id`` for ``tags``."""
    def deco(fn):
        impls = _registry.setdefault(kernel_id, {})
        for t in tags or (BackendTag.GENERIC,):
            impls[t] = fn
        return fn
    return deco


def has_kernel(kernel_id: str, tag: BackendTag) -> bool:
    return tag in _registry.get(kernel_id, {})


def dispatch(kernel_id: str, tag, *args, **kwargs):
    """Run ``kernel_id`` on ``tag``, falling back to the generic version."""
    impls = _registry.get(kernel_id)
    if impls is None:
        raise UnknownKernel(kernel_id)
    tag = BackendTag.parse(tag)
    fn = impls.get(tag)
    if fn is None:
        fn, tag = impls[BackendTag.GENERIC], BackendTag.GENERIC
    return fn(tag, *args, **kwargs)
