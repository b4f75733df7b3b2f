"""Kernel two-sample tests for Poisson process intensities.

Wild-bootstrap-calibrated single tests and aggregated adaptive multiple
tests, plus a reproducible Monte Carlo harness for level/power studies.
"""

from .aggregate import (
    AggregateReport,
    KernelCollection,
    collection_from_id,
    estimate_u_alpha,
    example1_nested,
    example2_threshold,
    example4_bandwidths,
    run_multi_test,
    singleton,
)
from .backends import backend_name
from .experiments import (
    StudyConfig,
    StudyReport,
    ks_baseline,
    level_study,
    power_study,
    reproduce_experiment,
    write_report,
)
from .intensity import (
    IntensityModel,
    PiecewiseConstantModel,
    SpikeTable,
    SPIKE_TABLE,
    make_f1,
    make_g1,
    make_g2,
    model_from_id,
    normalize_g2,
)
from .kernels import (
    ApproxKernel,
    GaussianRKHS,
    HaarNested,
    HaarSingle,
    evaluate,
    gram,
    haar_eval,
    haar_project,
    kernel_from_id,
    kernel_id,
)
from .point_process import (
    MarkedPool,
    PointPattern,
    draw_rademacher,
    pool,
    read_pattern_csv,
    read_pool_csv,
    simulate,
    split_by_mark,
    write_pattern_csv,
    write_pool_csv,
)
from .single_test import (
    TestReport,
    bootstrap,
    empirical_quantile,
    expected_statistic,
    run_single_test,
    statistic,
)
from .streams import stream

__version__ = "0.1.0"
