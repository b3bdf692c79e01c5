"""Spatial dataset container with train / validation partitions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gp_exact import GPData
from .spatial import as_locations


@dataclass(frozen=True)
class Dataset:
    """Locations and responses of ``N`` observations plus disjoint index partitions.

    ``train`` is the pool from which test sets and subsamples are drawn;
    ``validate`` is held out for final evaluation only.
    """

    locations: np.ndarray
    z: np.ndarray
    train: np.ndarray
    validate: np.ndarray
    label: str = "data"
    params: Optional[object] = None

    def __post_init__(self):
        S = as_locations(self.locations)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if len(z) != len(S):
            raise ValueError("locations and responses differ in length")
        train = np.asarray(self.train, dtype=np.intp)
        validate = np.asarray(self.validate, dtype=np.intp)
        if np.intersect1d(train, validate).size:
            raise ValueError("train and validation partitions overlap")
        for name, val in (("locations", S), ("z", z), ("train", train), ("validate", validate)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def N(self) -> int:
        return len(self.z)

    def subset(self, idx, centered: bool = False) -> GPData:
        """Observations at ``idx`` as :class:`GPData` (mean-centred on request)."""
        idx = np.asarray(idx, dtype=np.intp)
        z = self.z[idx]
        return GPData(self.locations[idx], z, float(z.mean()) if centered else 0.0)

    def validation_data(self) -> GPData:
        return self.subset(self.validate)

    def search_view(self) -> "Dataset":
        """Copy whose validation responses are NaN and whose validation partition is empty.

        Samplers and the exchange search get this view, so any accidental use
        of a held-out response propagates NaN instead of leaking information.
        """
        z = np.array(self.z)
        z[self.validate] = np.nan
        return Dataset(self.locations, z, self.train, np.zeros(0, dtype=np.intp),
                       self.label, self.params)


def random_split(N: int, n_validate: int, rng: np.random.Generator):
    """Uniform random ``(train, validate)`` index split."""
    if not 0 <= n_validate < N:
        raise ValueError("validation size must be in [0, N)")
    perm = rng.permutation(N)
    return np.sort(perm[n_validate:]), np.sort(perm[:n_validate])
