"""Assets module - imports all asset groups."""

from stokes_control.assets import (
    check_assets,
    reference_assets,
    report_assets,
    sweep_assets,
)

__all__ = [
    "reference_assets",
    "sweep_assets",
    "report_assets",
    "check_assets",
]
