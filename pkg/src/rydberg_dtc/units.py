"""Frequency unit handling.

Internally every frequency is angular, in rad/us, with hbar = 1.  Values
quoted in MHz map one-to-one onto rad/us (T1 = 1 us sets the unit) and kHz
values follow the same rule scaled by 1e-3, so ``10kHz`` -> 0.01.  The
``kHz2pi`` suffix applies the explicit angular factor instead:
``10kHz2pi`` -> 2*pi*1e-2 rad/us.
"""

from __future__ import annotations

import math
import re

from .errors import ConfigError

_SUFFIX = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z_][A-Za-z_0-9]*)?\s*$")

_SCALE = {
    "mhz": 1.0,
    "rad_us": 1.0,
    "khz": 1e-3,
    "khz2pi": 2.0 * math.pi * 1e-3,
}


def khz_to_rad_us(value: float, angular: bool = False) -> float:
    """kHz -> rad/us; ``angular`` multiplies by 2*pi."""
    return (2.0 * math.pi if angular else 1.0) * 1e-3 * value


def parse_frequency(text: str | float, *, require_unit: bool = False) -> float:
    """Parse ``"0.1MHz"``, ``"10kHz"``, ``"10kHz2pi"``, ``"0.1rad_us"`` or a bare number."""
    if isinstance(text, (int, float)):
        if require_unit:
            raise ConfigError(f"frequency {text!r} needs an explicit unit suffix")
        return float(text)
    m = _SUFFIX.match(text)
    if m is None:
        raise ConfigError(f"cannot parse frequency {text!r}")
    value, unit = float(m.group(1)), (m.group(2) or "").lower()
    if not unit:
        if require_unit:
            raise ConfigError(
                f"frequency {text!r} needs an explicit unit suffix (MHz, kHz, kHz2pi, rad_us)"
            )
        return value
    if unit not in _SCALE:
        raise ConfigError(f"unknown frequency unit {m.group(2)!r} in {text!r}")
    return value * _SCALE[unit]
