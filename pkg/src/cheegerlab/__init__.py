"""cheegerlab: p-Laplacian eigenpairs and higher-order Cheeger constants
on uniform grid discretizations of box domains."""

from .domain import (Box, CellSet, DomainSpec, Grid, GridError, PerimeterMode,
                     build_grid, builtin_specs, inscribed_rectangle, iso_ratio,
                     load_spec, make_comb, perimeter, volume)
from .fields import (Exponent, LevelInterval, ScalarField, band_energy,
                     level_mass, p_energy, p_norm, rayleigh, rel_dist,
                     superlevel_set, truncate)
from .spectrum import (Eigenpair, SolverError, SpectrumSlice, first_eigenpair,
                       lambda_upper_from_family, spectrum_p2)
from .sweep import SweepResult, check_band_bound, sweep
from .decomposition import (DecompositionError, DisjointFamily, IntervalScheme,
                            RegionFamily, assemble_regions, build_scheme,
                            decompose, disjoint_family, heavy_constant,
                            multiaxis_decompose_experimental)
from .estimator import (BruteForceBudgetError, CheegerReport,
                        counterexample_comb, faber_krahn_lower, hk_bruteforce,
                        hk_local_search, hk_upper, p_to_one_sweep,
                        partition_upper, unit_ball_volume, verify_bilateral)

__version__ = "0.1.0"
