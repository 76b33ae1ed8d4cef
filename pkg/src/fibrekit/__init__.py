"""Numerical toolkit for complex fiber bundles in adapted coordinates."""

from .bundle import (AdaptedChart, Connection10Spec, DbarSpec, HiggsSpec, MixedTensor, PrincipalConnectionSpec,
                     TransitionMap, cech_cocycle, curvature_correspondence_check, curvature_F11,
                     curvature_F11_pure, curvature_F20, dbar_decomposition_RA1, dolbeault_closedness_defect,
                     induced_connection_from_principal, ks_tensor, mixed_relative_holomorphy_defect,
                     pseudo_curvature_G11, pseudo_curvature_G20, relative_holomorphy_defect)
from .errors import (DegenerateTwist, DimensionMismatch, FibrekitError, IncompleteTransport, IndexOutOfRange,
                     NonFiniteEvaluation, NotRelativelyHolomorphic, SingularFiberJacobian, SingularMetric,
                     UnknownFamily)
from .families import AbelianFamilyPoint, HermitianBundleSpec, HyperkahlerFrame, load_family
from .linalg import ChartFunction, SiegelPoint, posdef_check, siegel_sample, wirtinger_derivative
from .simpson import (ComplexStructurePair, FiberMetricSpec, TwistingMap, connection_from_relative_kahler,
                      simpson_flat_to_higgs, simpson_higgs_to_flat, theta_bar_J, twisted_connection_to_higgs,
                      twisted_higgs_to_connection)
from .transport import (BasePath, Status, TransportResult, completeness_probe, horizontal_lift, monodromy,
                        path_independence_check, transport_jacobian)
from .verify import SuiteConfig, VerificationReport, report_serialize, run_suite

__version__ = "0.1.0"
