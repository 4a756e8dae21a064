use std::path::{Path, PathBuf};
use std::sync::Arc;

use neurotopo::bottleneck::pairwise_distances;
use neurotopo::embed::ClassicalMds;
use neurotopo::experiments::{
    class_matrix_and_embedding, layer_heatmap, lof_comparison, subsample_study, LofConfig,
};
use neurotopo::pointcloud::save_cloud;
use neurotopo::{bottleneck_distance, CloudFormat, CloudSet, PipelineConfig, PointCloud, SourceMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(seed: u64, n: usize, d: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    PointCloud::from_rows(&rows).unwrap()
}

fn noisy_circle(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            vec![t.cos() + 0.05 * rng.sample::<f64, _>(StandardNormal), t.sin() + 0.05 * rng.sample::<f64, _>(StandardNormal)]
        })
        .collect();
    PointCloud::from_rows(&rows).unwrap()
}

fn blob(seed: u64, n: usize) -> PointCloud {
    let g = gaussian(seed, n, 2);
    let rows: Vec<Vec<f64>> = g.rows().map(|r| r.iter().map(|x| x * 0.3).collect()).collect();
    PointCloud::from_rows(&rows).unwrap()
}

fn write_set(dir: &Path, clouds: &[(SourceMeta, PointCloud)]) -> PathBuf {
    let mut manifest = String::from("model,layer,class,path\n");
    for (i, (meta, cloud)) in clouds.iter().enumerate() {
        let name = format!("c{i}.tdac");
        save_cloud(cloud, &dir.join(&name), CloudFormat::TdacBinary).unwrap();
        manifest.push_str(&format!("{},{},{},{name}\n", meta.model, meta.layer, meta.class));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

fn raw_pipeline(max_dim: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig { normalize: false, ..PipelineConfig::default() };
    cfg.filtration.max_dim = max_dim;
    cfg
}

#[test]
fn subsample_at_full_size_is_the_baseline() {
    let cloud = gaussian(1, 60, 4);
    let cfg = raw_pipeline(1);
    let t = subsample_study(&cloud, &[60], 3, &[0, 1], &cfg).unwrap();
    assert_eq!(t.rows.len(), 1);
    let row = &t.rows[0];
    assert_eq!(row.per_dim[0], (t.baseline.diagram.finite(0).count(), 0.0));
    assert_eq!(row.per_dim[1], (t.baseline.diagram.finite(1).count(), 0.0));
    let other = subsample_study(&cloud, &[30, 60], 4, &[1], &cfg).unwrap();
    assert_eq!(other.rows[1].per_dim[0].1, 0.0);
}

#[test]
fn subsample_rejects_bad_sizes() {
    let cloud = gaussian(1, 20, 3);
    assert!(subsample_study(&cloud, &[21], 0, &[0], &raw_pipeline(0)).is_err());
    assert!(subsample_study(&cloud, &[10, 5], 0, &[0], &raw_pipeline(0)).is_err());
    assert!(subsample_study(&cloud, &[10], 0, &[1], &raw_pipeline(0)).is_err());
}

#[test]
fn subsample_h0_count_law_with_lof() {
    let cloud = gaussian(9, 200, 6);
    let cfg = PipelineConfig { lof: Some(LofConfig::default()), ..raw_pipeline(0) };
    let sizes: Vec<usize> = (50..=200).step_by(25).collect();
    let t = subsample_study(&cloud, &sizes, 7, &[0], &cfg).unwrap();
    assert_eq!(t.rows.len(), 7);
    for r in &t.rows {
        assert_eq!(r.kept, r.size - r.removed);
        assert_eq!(r.per_dim[0].0, r.size - 1 - r.removed, "size {}", r.size);
    }
    assert!(t.to_csv().starts_with("size,kept,removed,h0_count,h0_bottleneck\n"));
}

fn four_classes(dir: &Path) -> CloudSet {
    let clouds: Vec<(SourceMeta, PointCloud)> = (0..4)
        .map(|c| {
            let cloud = if c == 0 { noisy_circle(c, 24) } else { blob(c + 10, 24) };
            (SourceMeta::new("m", "L1", format!("k{c}")), cloud)
        })
        .collect();
    CloudSet::load(&write_set(dir, &clouds)).unwrap()
}

#[test]
fn lof_comparison_pair_counts() {
    let dir = tempfile::tempdir().unwrap();
    let set = four_classes(dir.path());
    let t = lof_comparison(&set, LofConfig { k: 5, threshold: 1.5 }, &[0, 1], None, 1, &raw_pipeline(1)).unwrap();
    assert_eq!(t.rows.len(), 4);
    for r in &t.rows {
        assert_eq!((r.all.pairs, r.class.pairs), (28, 4));
    }
    let capped = lof_comparison(&set, LofConfig { k: 5, threshold: 1.5 }, &[1], Some(10), 1, &raw_pipeline(1)).unwrap();
    assert_eq!(capped.rows[0].all.pairs, 10);
}

#[test]
fn lof_comparison_two_classes() {
    let dir = tempfile::tempdir().unwrap();
    let clouds = vec![
        (SourceMeta::new("m", "L1", "a"), blob(1, 12)),
        (SourceMeta::new("m", "L1", "b"), blob(2, 12)),
        (SourceMeta::new("m", "L1", "tiny"), blob(3, 3)),
    ];
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let t = lof_comparison(&set, LofConfig { k: 3, threshold: 1.5 }, &[0], None, 0, &raw_pipeline(0)).unwrap();
    assert_eq!((t.rows[0].all.pairs, t.rows[0].class.pairs), (6, 2));
}

#[test]
fn infinite_lof_threshold_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let set = four_classes(dir.path());
    let t = lof_comparison(&set, LofConfig { k: 5, threshold: f64::INFINITY }, &[0, 1], None, 2, &raw_pipeline(1)).unwrap();
    assert_eq!(t.table(false), t.table(true));
}

#[test]
fn class_distances_are_smaller_than_all_distances() {
    // two interleaved loops in one class, blobs in the others
    let dir = tempfile::tempdir().unwrap();
    let mut clouds = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let loops: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            if i % 2 == 0 { vec![t.cos(), t.sin(), 0.0] } else { vec![1.0 + t.cos(), 0.0, t.sin()] }
        })
        .collect();
    clouds.push((SourceMeta::new("m", "L", "loops"), PointCloud::from_rows(&loops).unwrap()));
    for c in 0..3 {
        let g = gaussian(20 + c, 60, 3);
        let rows: Vec<Vec<f64>> = g.rows().map(|r| r.iter().map(|x| x * (0.2 + 0.4 * c as f64)).collect()).collect();
        clouds.push((SourceMeta::new("m", "L", format!("blob{c}")), PointCloud::from_rows(&rows).unwrap()));
    }
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let t = lof_comparison(&set, LofConfig::default(), &[0, 1], None, 5, &raw_pipeline(1)).unwrap();
    let (class, all): (f64, f64) = t.rows.iter().fold((0.0, 0.0), |(c, a), r| (c + r.class.mean, a + r.all.mean));
    assert!(class < all, "class {class} vs all {all}");
}

#[test]
fn heatmap_of_identical_layers_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = blob(5, 20);
    let clouds: Vec<_> = ["L1", "L2", "L3"]
        .iter()
        .flat_map(|l| ["a", "b"].map(|c| (SourceMeta::new("m", *l, c), cloud.clone())))
        .collect();
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let order: Vec<String> = ["L1", "L2", "L3"].map(String::from).to_vec();
    let maps = layer_heatmap(&set, &order, &[0, 1], &raw_pipeline(1)).unwrap();
    assert_eq!(maps.len(), 2);
    for m in &maps {
        for i in 0..3 {
            for j in i..3 {
                assert_eq!(m.get(i, j), 0.0);
            }
        }
    }
}

#[test]
fn heatmap_entry_is_a_bottleneck_distance() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (noisy_circle(1, 25), blob(2, 25));
    let clouds = vec![(SourceMeta::new("m", "in", "a"), x.clone()), (SourceMeta::new("m", "out", "a"), y.clone())];
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let cfg = raw_pipeline(1);
    let maps = layer_heatmap(&set, &["in".to_string(), "out".to_string()], &[1], &cfg).unwrap();
    let dx = neurotopo::experiments::cloud_diagram(&x, &cfg).unwrap().diagram;
    let dy = neurotopo::experiments::cloud_diagram(&y, &cfg).unwrap().diagram;
    assert_eq!(maps[0].get(0, 1), bottleneck_distance(&dx, &dy, 1).unwrap());
}

#[test]
fn heatmap_reports_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let clouds = vec![
        (SourceMeta::new("m", "L1", "a"), blob(1, 10)),
        (SourceMeta::new("m", "L1", "b"), blob(2, 10)),
        (SourceMeta::new("m", "L2", "a"), blob(3, 10)),
    ];
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let err = layer_heatmap(&set, &["L1".into(), "L2".into()], &[0], &raw_pipeline(0)).unwrap_err();
    assert!(err.to_string().contains("(m, L2, b)"), "{err}");
}

#[test]
fn class_matrix_of_identical_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = blob(8, 15);
    let clouds: Vec<_> = ["x", "y", "z"].map(|c| (SourceMeta::new("m", "L", c), cloud.clone())).to_vec();
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let (m, e) = class_matrix_and_embedding(&set, "L", 1, &raw_pipeline(1), &ClassicalMds).unwrap();
    assert_eq!(m.labels, vec!["m/x", "m/y", "m/z"]);
    assert!(m.values.iter().all(|v| *v == 0.0));
    assert!(e.coords.iter().all(|c| *c == e.coords[0]));
}

#[test]
fn class_matrix_separates_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let mut clouds = Vec::new();
    for i in 0..5 {
        clouds.push((SourceMeta::new("circle", "L", format!("c{i}")), noisy_circle(100 + i, 30)));
        clouds.push((SourceMeta::new("blob", "L", format!("c{i}")), blob(200 + i, 30)));
    }
    let set = CloudSet::load(&write_set(dir.path(), &clouds)).unwrap();
    let (m, _) = class_matrix_and_embedding(&set, "L", 1, &raw_pipeline(1), &ClassicalMds).unwrap();
    assert_eq!(m.len(), 10);
    let model = |i: usize| m.labels[i].split('/').next().unwrap().to_string();
    let (mut within, mut cross) = (Vec::new(), Vec::new());
    for i in 0..10 {
        for j in i + 1..10 {
            if model(i) == model(j) { within.push(m.get(i, j)) } else { cross.push(m.get(i, j)) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&within) < mean(&cross));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let set = four_classes(dir.path());
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let t = lof_comparison(&set, LofConfig { k: 5, threshold: 1.5 }, &[0, 1], Some(12), 3, &raw_pipeline(1)).unwrap();
            let labeled: Vec<(String, neurotopo::PersistenceDiagram)> = (0..4)
                .map(|i| {
                    let c = set.load_cloud(i).unwrap();
                    (i.to_string(), neurotopo::experiments::cloud_diagram(&c, &raw_pipeline(1)).unwrap().diagram)
                })
                .collect();
            (t.to_csv(), pairwise_distances(&labeled, 1).unwrap().to_csv())
        })
    };
    assert_eq!(run(1), run(6));
}

#[test]
fn registry_requires_parameters() {
    use neurotopo::experiments::ExperimentRequest;
    let reg = neurotopo::ExperimentRegistry::default();
    let req = ExperimentRequest::default();
    for name in reg.names() {
        let err = reg.get(name).unwrap().run(&req).unwrap_err();
        assert!(matches!(err, neurotopo::Error::Usage(_)), "{name}: {err}");
    }
    let _ = Arc::new(ClassicalMds);
}
