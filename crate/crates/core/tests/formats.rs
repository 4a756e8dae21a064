use std::path::Path;

use neurotopo::pointcloud::encode_tdac;
use neurotopo::{load_cloud, CloudFormat, CloudSet, CsvOptions, Error, PointCloud, SourceMeta};

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn golden_tdac_fixture_decodes() {
    // written independently with Python's struct module: "<4sIQQ" header, then "<6d"
    let path = fixture("golden.tdac");
    let cloud = load_cloud(&path, CloudFormat::detect(&path).unwrap(), CsvOptions::default()).unwrap();
    assert_eq!((cloud.len(), cloud.dim()), (2, 3));
    assert_eq!(cloud.row(0), &[0.5, -1.25, 3.0]);
    assert_eq!(cloud.row(1), &[1e-3, 2.0, -0.0]);
    assert!(cloud.row(1)[2].is_sign_negative());
    assert_eq!(encode_tdac(&cloud), std::fs::read(&path).unwrap());
}

#[test]
fn tdac_header_layout() {
    let bytes = encode_tdac(&PointCloud::from_rows(&[[1.0f64]]).unwrap());
    assert_eq!(&bytes[..4], b"TDAC");
    assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
    assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
    assert_eq!(&bytes[16..24], &1u64.to_le_bytes());
    assert_eq!(&bytes[24..], &1.0f64.to_le_bytes());
}

#[test]
fn manifest_resolves_paths_next_to_it() {
    let set = CloudSet::load(&fixture("manifest.csv")).unwrap();
    assert_eq!(set.entries.len(), 2);
    assert_eq!(set.entries[0].0, SourceMeta::new("plain", "Conv 1", "cat"));
    let dog = set.load_cloud(1).unwrap();
    assert_eq!((dog.len(), dog.dim()), (4, 3));
    assert_eq!(dog.meta().unwrap().class, "dog");
}

#[test]
fn manifest_rejects_missing_files_and_duplicate_keys() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "model,layer,class,path\na,b,c,nowhere.csv\n").unwrap();
    let err = CloudSet::load(&m).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

    std::fs::write(dir.path().join("x.csv"), "1,2\n3,4\n").unwrap();
    std::fs::write(&m, "model,layer,class,path\na,b,c,x.csv\na,b,c,x.csv\n").unwrap();
    let err = CloudSet::load(&m).unwrap_err();
    assert!(err.to_string().contains("duplicate key"), "{err}");

    std::fs::write(&m, "model,layer,path\na,b,x.csv\n").unwrap();
    assert!(CloudSet::load(&m).is_err());
}

#[test]
fn truncated_tdac_is_a_parse_error() {
    let bytes = std::fs::read(fixture("golden.tdac")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cut.tdac");
    std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
    let err = load_cloud(&p, CloudFormat::TdacBinary, CsvOptions::default()).unwrap_err();
    assert!(err.to_string().contains("payload has"), "{err}");
}
