#![no_main]

use bdp_cli::io::{parse_observations, write_observations};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_observations(data) {
        if rows.iter().all(|r| r.z.len() == rows[0].z.len()) {
            let mut buf = Vec::new();
            write_observations(&mut buf, &rows).unwrap();
            assert_eq!(parse_observations(&buf).unwrap(), rows);
        }
    }
});
