"""Prior-based hierarchical segmentation with closed-form stochastic watershed."""

from hrfseg.errors import ConfigError, FormatError, HrfError, ValidationError
from hrfseg.raster_io import (
    load_label_map,
    load_raster,
    save_label_map,
    save_raster,
    save_ucm,
)
from hrfseg.fine_partition import (
    RegionPriorMeans,
    morphological_gradient,
    region_prior_means,
    watershed,
)
from hrfseg.graph_core import Rag, Tree, UnionFind, build_rag, minimum_spanning_tree
from hrfseg.sws import (
    ChiParams,
    DensityField,
    HierarchyValuation,
    chain,
    chi_valuation,
    combine_priors,
    prior_density,
    sws_valuation,
    uniform_density,
)
from hrfseg.hierarchy import (
    Ultrametric,
    cut_k,
    cut_threshold,
    marker_cut,
    render_ucm,
    ultrametric,
)
from hrfseg.mc_oracle import TrialReport, estimate_cut_frequencies, sample_markers

__version__ = "0.1.0"
