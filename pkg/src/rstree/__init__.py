"""Radial spanning trees and directed spanning forests on Poisson samples."""
from .forest import (ClusterScene, Forest, GreedySpec, build_dsf, build_greedy, build_rst,
                     build_voronoi_internal, build_voronoi_local, sample_cluster_scene)
from .pointprocess import (ConfigError, Disk, DuplicatePointError, PointSet, PoissonField, Rect,
                           SamplerConfig, enforce_nonequidistance, sample, sample_binomial_disk,
                           sample_palm_poisson, sample_radial_chain)

__version__ = "0.1.0"
