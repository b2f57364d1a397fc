"""Sector coverings, wave packet decompositions and decoupling experiments."""

from ._wolff import (
    BudgetError,
    ConfigError,
    Covering,
    Decomposition,
    GridFunction,
    InputError,
    Lattice,
    NumericError,
    Surface,
    WolffError,
    apply_multiplier,
    build_covering,
    build_lattice,
    covering_stats,
    cross_section,
    decompose,
    exact_moment,
    exponent_table,
    knapp,
    load_surface,
    localization_relation,
    localize,
    norms,
    read_grid,
    scaling_fit,
    sector_project,
    sharpness,
    sharpness_identity,
    surface,
    synth,
    verify,
    write_grid,
)

__all__ = [name for name in dir() if not name.startswith("_")]
