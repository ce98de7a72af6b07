"""Shared fixture functions and estimator specs for the test suite."""

from __future__ import annotations

from monoquad import (ControlVariate, Preset, SimpleMC, Staircase, StrataSpec,
                      Stratified, UnitStep, optimal_strata)

FIXTURE_FUNCTIONS = [
    UnitStep(0.3),
    UnitStep(0.5),
    Staircase((0.1, 0.4, 0.9)),
    Staircase((0.0, 0.25, 0.5, 1.0)),
    Preset("identity"),
    Preset("square"),
    Preset("sqrt"),
    Preset("logistic"),
]

RANDOMIZED_SPECS = [
    SimpleMC(8),
    ControlVariate(8),
    Stratified(optimal_strata(4)),
    Stratified(StrataSpec((0.0, 0.25, 1.0), (1, 3))),
]

STRATA_SPECS = [
    optimal_strata(1),
    optimal_strata(4),
    StrataSpec((0.0, 0.25, 1.0), (1, 1)),
    StrataSpec((0.0, 0.5, 1.0), (1, 3)),
    StrataSpec((0.0, 0.125, 0.5, 0.875, 1.0), (2, 1, 1, 2)),
]
