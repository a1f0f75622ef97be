//! Replays the checked-in fuzz corpus through the same entry points as the fuzz targets.

use std::path::PathBuf;

use bdp_cli::config::RunConfig;
use bdp_cli::io::{parse_observations, parse_params, write_observations};
use bdp_core::models::{motif_covariates, ModelSpec};
use bdp_core::process::Observation;
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    assert!(!entries.is_empty(), "no seeds in {}", dir.display());
    entries
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect()
}

fn csv_round_trip(data: &[u8]) {
    if let Ok(rows) = parse_observations(data) {
        if rows.iter().all(|r| r.z.len() == rows[0].z.len()) {
            let mut buf = Vec::new();
            write_observations(&mut buf, &rows).unwrap();
            assert_eq!(parse_observations(&buf).unwrap(), rows);
        }
    }
}

#[test]
fn observations_csv_seeds() {
    let mut parsed = 0;
    for (path, bytes) in corpus("observations_csv") {
        csv_round_trip(&bytes);
        if parse_observations(&bytes).is_ok() {
            parsed += 1;
        } else {
            assert!(
                path.ends_with("bad_row.csv"),
                "{} failed to parse",
                path.display()
            );
        }
    }
    assert_eq!(parsed, 4);
}

#[test]
fn params_list_seeds() {
    for (path, bytes) in corpus("params_list") {
        let text = std::str::from_utf8(&bytes).unwrap();
        let result = parse_params(text);
        let name = path.file_stem().unwrap().to_str().unwrap();
        match name {
            "pair" | "negative" => assert!(result.unwrap().iter().all(|v| v.is_finite())),
            _ => assert!(result.is_err(), "{name} should be rejected"),
        }
    }
}

#[test]
fn run_config_seeds() {
    for (path, bytes) in corpus("run_config") {
        let text = std::str::from_utf8(&bytes).unwrap();
        let ok = RunConfig::from_toml_str(text).is_ok();
        assert_eq!(ok, path.ends_with("full.toml"), "{}", path.display());
    }
}

#[test]
fn model_spec_seeds() {
    let mut built = 0;
    for (_, bytes) in corpus("model_spec") {
        let text = std::str::from_utf8(&bytes).unwrap();
        if let Ok(spec) = text.parse::<ModelSpec>() {
            let again: ModelSpec = spec.to_string().parse().unwrap();
            assert_eq!(again, spec);
            built += spec.build().is_ok() as usize;
        }
        let _ = motif_covariates(text);
    }
    assert_eq!(built, 6);
}

fn observation() -> impl Strategy<Value = Vec<Observation>> {
    (0usize..3).prop_flat_map(|dim| {
        prop::collection::vec(
            (
                0usize..10_000,
                0usize..10_000,
                0.0f64..1e6,
                prop::collection::vec(-1e9f64..1e9, dim),
            )
                .prop_map(|(a, b, t, z)| Observation::with_covariates(a, b, t, z)),
            1..20,
        )
    })
}

proptest! {
    #[test]
    fn csv_writer_round_trips(rows in observation()) {
        let mut buf = Vec::new();
        write_observations(&mut buf, &rows).unwrap();
        prop_assert_eq!(parse_observations(&buf).unwrap(), rows);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        csv_round_trip(&bytes);
        if let Ok(text) = std::str::from_utf8(&bytes) {
            let _ = parse_params(text);
            let _ = RunConfig::from_toml_str(text);
            let _ = text.parse::<ModelSpec>();
        }
    }
}
