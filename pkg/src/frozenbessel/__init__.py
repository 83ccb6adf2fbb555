"""Freezing limits of multivariate Bessel processes of types A, B and D.

Drift fields and chambers (``model``), special starting points from
orthogonal-polynomial zeros (``polyroots``), the frozen flow (``flow``),
the Gaussian fluctuation process and its covariance (``fluctuation``),
Euler-Maruyama ensembles (``simulate``) and the experiment harness.
"""
from .errors import (ChamberError, ExperimentError, FreezingError, IntegrationError,
                     SingularityError, UsageError)
from .model import (ChamberPoint, Kind, Multiplicity, RootSystem, bessel_drift,
                    chamber_contains, frozen_drift, frozen_drift_jacobian)
from .polyroots import SpecialStart, hermite_zeros, laguerre_zeros, special_start
from .numerics import RngStream, SymEig, expm_sym, integrate_ode, sym_eig
from .flow import FlowSolution, evolve_phi, phi_ou, phi_ou_special, phi_special
from .fluctuation import (ClosedFormCovariance, FluctuationModel, covariance_closed_form,
                          covariance_numeric, eigenvalue_a, eigenvalue_b, fluct_matrix,
                          fluct_matrix_ou, fluct_matrix_power, simulate_W)
from .simulate import (BesselPaths, CoupledPath, SimScheme, fold_to_B, simulate_bessel,
                       simulate_coupled, simulate_ou)

__version__ = "0.1.0"
