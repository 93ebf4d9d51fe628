"""Per-technology production factors: energy available per unit installed kW.

Sources are named by a string on the tech:

- ``"grid"``: always 1, forced to 0 inside an outage window
- ``"generator"``: backup unit, 0 everywhere except inside an outage window
- ``"synthetic:<name>"``: built-in shape (``ones``, ``solar``, ``wind``)
- ``"fixture:<path>"``: CSV, one factor per line, length = horizon steps
- ``"remote:<url>"``: HTTP GET returning a JSON array of per-step factors

Fixture and remote reads are cached; remote cache writes are serialized.
"""

from __future__ import annotations

import json
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .timegrid import FRACTION, TimeGrid, TimeSeries


class ProviderUnavailable(RuntimeError):
    """Remote source could not be reached; caller may fall back to a fixture."""


class ProviderError(ValueError):
    """Source produced values this engine cannot accept."""


@dataclass(frozen=True)
class ProductionProvider:
    """Resolved production source: where factors come from and whether to cache."""

    kind: str      # grid | generator | synthetic | fixture | remote
    ref: str = ""  # profile name, file path, or URL
    cache: bool = True


def provider_for(source: str) -> ProductionProvider:
    if source in ("grid", "generator"):
        return ProductionProvider(source)
    kind, sep, ref = source.partition(":")
    if sep and kind in ("synthetic", "fixture", "remote"):
        return ProductionProvider(kind, ref)
    raise ProviderError(f"unknown production source {source!r}")


_cache: dict = {}
_cache_lock = threading.Lock()

_fixture_dir = "."


def clear_cache():
    with _cache_lock:
        _cache.clear()


def set_fixture_dir(path) -> None:
    """Base directory for relative ``fixture:`` paths (service config)."""
    global _fixture_dir
    _fixture_dir = str(path)


def _synthetic(name: str, grid: TimeGrid) -> np.ndarray:
    hod = grid.hour_of_day
    if name == "ones":
        return np.ones(grid.horizon_steps)
    if name == "solar":
        # half-sine between 06:00 and 18:00, zero at night
        frac = (hod + 0.5 / grid.steps_per_hour - 6.0) / 12.0
        return np.where((frac > 0) & (frac < 1), np.sin(np.pi * frac), 0.0)
    if name == "wind":
        # mild diurnal swing around 0.35, stronger overnight
        return 0.35 + 0.15 * np.cos(2 * np.pi * (hod - 2) / 24.0)
    raise ProviderError(f"unknown synthetic profile {name!r}")


def _fixture(path: str, grid: TimeGrid, cache: bool) -> np.ndarray:
    if not os.path.isabs(path):
        path = os.path.join(_fixture_dir, path)
    key = ("fixture", path, grid.horizon_steps)
    if cache:
        with _cache_lock:
            if key in _cache:
                return _cache[key]
    vals = np.loadtxt(path, dtype=float, ndmin=1)
    if vals.shape[0] != grid.horizon_steps:
        raise ProviderError(
            f"fixture {path} has {vals.shape[0]} rows, grid has "
            f"{grid.horizon_steps}")
    vals.flags.writeable = False
    if cache:
        with _cache_lock:
            _cache[key] = vals
    return vals


def _remote(url: str, grid: TimeGrid, cache: bool, timeout: float = 10.0) -> np.ndarray:
    key = ("remote", url, grid.horizon_steps)
    if cache:
        with _cache_lock:
            if key in _cache:
                return _cache[key]
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise ProviderUnavailable(f"GET {url} failed: {exc}") from exc
    vals = np.asarray(payload, dtype=float)
    if vals.ndim != 1 or vals.shape[0] != grid.horizon_steps:
        raise ProviderError(
            f"remote {url} returned {vals.shape} values, grid has "
            f"{grid.horizon_steps}")
    vals.flags.writeable = False
    if cache:
        with _cache_lock:
            _cache[key] = vals
    return vals


def _outage_window(outage):
    if outage is None:
        return None
    if hasattr(outage, "start_step"):
        return int(outage.start_step), int(outage.end_step)
    start, end = outage
    return int(start), int(end)


def production_factor(provider, grid: TimeGrid, outage=None) -> TimeSeries:
    """Resolve a production-factor series for one tech.

    ``provider`` is a ProductionProvider or a source string.  ``outage``
    is an object with ``start_step``/``end_step`` (half-open step window)
    or a plain ``(start, end)`` pair; it only affects the ``grid`` and
    ``generator`` kinds: grid availability is cut during the window, a
    backup generator may run only inside it.
    """
    if isinstance(provider, str):
        provider = provider_for(provider)
    window = _outage_window(outage)

    if provider.kind == "grid":
        vals = np.ones(grid.horizon_steps)
        if window:
            vals[window[0]:window[1]] = 0.0
        return TimeSeries(grid, vals, FRACTION)

    if provider.kind == "generator":
        vals = np.zeros(grid.horizon_steps)
        if window:
            vals[window[0]:window[1]] = 1.0
        return TimeSeries(grid, vals, FRACTION)

    if provider.kind == "synthetic":
        vals = _synthetic(provider.ref, grid)
    elif provider.kind == "fixture":
        vals = _fixture(provider.ref, grid, provider.cache)
    elif provider.kind == "remote":
        vals = _remote(provider.ref, grid, provider.cache)
    else:
        raise ProviderError(f"unknown provider kind {provider.kind!r}")

    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ProviderError(
            f"production factors from {provider.kind}:{provider.ref} fall "
            f"outside [0, 1] (min {vals.min():.4g}, max {vals.max():.4g})")
    return TimeSeries(grid, vals, FRACTION)
