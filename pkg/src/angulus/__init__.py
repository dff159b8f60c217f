"""Dichotomy spectra, spectral bundles and outer angular values of
linear nonautonomous difference equations ``u_{n+1} = A_n u_n``."""
from .angular import (AngularValueReport, Candidate, TraceSpace, angle_sum,
                      reduction_decay_check, theta1_hat, theta1_sweep, theta2_hat,
                      trace_space_of)
from .bundles import (BundleSet, FiberBundle, ResolventPoints, choose_resolvent_points,
                      compute_bundles, compute_fiber_bundle, solve_block_subdivided,
                      solve_impulse)
from .linalg import (Subspace, grassmann_distance, min_norm_least_squares, orthonormalize,
                     principal_angle, qr_factor)
from .models import CATALOG, SystemModel, catalog_get, variational_sequence
from .pipeline import PipelineSettings, run, run_catalog
from .spectrum import (BohlTable, SpectralInterval, SpectrumReport, bohl_exponents,
                       compute_spectrum, spectral_intervals, triangularize)

__version__ = "0.1.0"
