"""Mixed linear and circular coordinates for multichannel time series, with
curve clustering and a cluster-coupled multi-output Gaussian process."""
from .cluster import Clustering, centroid_series, hcluster
from .config import PipelineConfig, load_config
from .decompose import (PrincipalComponents, SeparatedComponents, classify_linear,
                        count_inversions, kendall_tau, pca)
from .errors import (ComplexityError, ConfigError, InputError, NumericalError, StageError,
                     TopomixError)
from .metric import (CurveDescriptor, DistanceMatrix, curve_distance, distance_matrix, phi, t_i,
                     t_l, t_m)
from .mogp import (HyperParams, MOGPModel, TaskMatrix, build_gram, gp_fit, gp_predict,
                   regularizer, task_matrix)
from .persistence import (CircularCoordinate, MixedCoordinates, PersistenceConfig,
                          PersistenceDiagram, ThresholdRule, circular_coordinate, delay_embed,
                          maxmin_landmarks, mixed_coordinates, periodic_coordinate,
                          rips_persistence)
from .pipeline import RunReport, run_pipeline
from .series_io import (LinearTrend, ResidualSet, TimeSeriesSet, detrend, load_csv, synth_fig2,
                        write_csv)

__version__ = "0.1.0"
