//! Persistent homology of neural representation point clouds.
//!
//! The pipeline reads activation clouds, optionally normalizes them and drops
//! LOF outliers, builds a Vietoris-Rips filtration, reduces it to persistence
//! pairs and compares the resulting diagrams with the bottleneck distance.
//!
//! ```
//! use neurotopo::{compute_persistence, build_filtration, distance_matrix, FiltrationConfig, PointCloud, Scale};
//!
//! let cloud = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
//! let dm = distance_matrix(&cloud);
//! let f = build_filtration(&dm, &FiltrationConfig::new(1, Scale::Diameter).with_threshold(Some(2.0))).unwrap();
//! let pairs = compute_persistence(&f).unwrap();
//! assert!(pairs.iter().any(|p| p.dim == 1 && p.birth == 1.0 && p.death == 2f64.sqrt()));
//! ```

pub mod bottleneck;
pub mod diagram;
pub mod embed;
pub mod error;
pub mod experiments;
pub mod outlier;
pub mod persistence;
pub mod plot;
pub mod pointcloud;
pub mod rips;

pub use bottleneck::{
    bottleneck_distance, bottleneck_matching, matching_cost, pairwise_distances, DiagramDistanceMatrix, Matching,
};
pub use diagram::{
    diagram_stats, load_diagram, quantile_summary, save_diagram, DiagramStatistics, PersistenceDiagram,
};
pub use embed::{classical_mds, Embedder, EmbedderRegistry, Embedding2D};
pub use error::{Error, Result};
pub use experiments::{CloudSet, Experiment, ExperimentRegistry, ExperimentRequest, PipelineConfig};
pub use outlier::{filter_outliers, lof_scores, LofReport};
pub use persistence::{
    betti_numbers, compute_persistence, EngineRegistry, PersistencePair, ReductionEngine,
};
pub use pointcloud::{
    distance_matrix, load_cloud, normalize_cloud, save_cloud, subsample, CloudFormat, CsvOptions, DistanceMatrix,
    PointCloud, SourceMeta,
};
pub use rips::{build_filtration, Filtration, FiltrationConfig, FiltrationSimplex, Scale};
