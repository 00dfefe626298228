"""Python access to the jepa_fer C++ core: metrics, voting, clip protocol,
fold plans, synthetic data and gradient checks."""

from ._core import (
    ConfigError,
    DimensionError,
    FormatError,
    IoError,
    ProtocolError,
    checkpoint_checksum,
    checkpoint_entries,
    crema_d_folds,
    enumerate_clips,
    gen_synthetic,
    gradcheck,
    pca2,
    uar,
    vote_mv,
    vote_pbv,
    war,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "FormatError",
    "IoError",
    "ProtocolError",
    "checkpoint_checksum",
    "checkpoint_entries",
    "crema_d_folds",
    "enumerate_clips",
    "gen_synthetic",
    "gradcheck",
    "pca2",
    "uar",
    "vote_mv",
    "vote_pbv",
    "war",
]
