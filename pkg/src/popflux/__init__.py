"""popflux: dynamic population estimation from anonymized mobility data.

Pipeline stages: preprocess probe trajectories, transform them into
dwell-time pseudo-counts per spatiotemporal partition, fuse the counts
with a disaggregated static census prior through a Dirichlet-categorical
posterior, then analyze the estimates (per-interval rank correlation,
z-score time series, density-based clustering).
"""

__version__ = "0.1.0"

from .errors import (
    ConstantSeriesError,
    InputError,
    ModelError,
    OutOfExtentError,
    PopfluxError,
    SchemeMismatchError,
)
from .grid import (
    CellId,
    Extent,
    IntervalId,
    Projection,
    SpatialScheme,
    TemporalScheme,
    children_of,
    parent_of,
)
from .ingest import PreprocessConfig, Probe, Trajectory, parse_probes, preprocess, preprocess_all
from .transform import (
    PseudoCountField,
    accumulate,
    baseline_probe_count,
    baseline_trajectory_count,
    coarsen_spatial,
    coarsen_temporal,
    dwell_field,
    dwell_intersections,
    field_of_trajectory,
)
from .prior import SourceZone, StaticPopulation, disaggregate, load_static_population
from .estimator import (
    EstimatorConfig,
    PopulationField,
    PowerLawConfig,
    posterior_population,
    power_law_estimate,
    power_law_raw,
    spatial_coarsen_estimate,
)
from .analytics import (
    CellTimeSeries,
    ClusterResult,
    Envelope,
    cluster_envelopes,
    dissimilarity_matrix,
    per_interval_prior_correlation,
    spearman,
    sqrt_pearson_dissimilarity,
    zscore,
    zscore_values,
)
from .clustering import hdbscan_labels
from .synth import (
    Agent,
    GroundTruthField,
    SynthConfig,
    census_of,
    generate_world,
    simulate_probes,
    true_occupancy,
)
