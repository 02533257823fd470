//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepwise_core::{parse_table, Table, TableFormat};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn us_open() -> Arc<Table> {
    Arc::new(parse_table(&read_fixture("us_open_1938.json"), TableFormat::Json).expect("fixture parses"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const TEXT_VALUES: [&str; 4] = ["ann", "bo", "cy", "di"];
const COLUMN_NAMES: [&str; 4] = ["name", "team", "points", "wins"];

/// A small table with 2..=max_cols columns and 1..=max_rows rows. Text
/// columns draw from a four-word vocabulary and numeric ones from 0..=9, so
/// ties and repeated values are common.
pub fn random_table(rng: &mut ChaCha8Rng, max_cols: usize, max_rows: usize) -> Arc<Table> {
    let cols = rng.random_range(2..=max_cols);
    let rows = rng.random_range(1..=max_rows);
    let mut names: Vec<&str> = COLUMN_NAMES.to_vec();
    names.shuffle(rng);
    let header: Vec<String> = names[..cols].iter().map(|s| s.to_string()).collect();
    // at least one text and one numeric column
    let numeric: Vec<bool> = (0..cols).map(|i| if i < 2 { i == 1 } else { rng.random_bool(0.5) }).collect();
    let body = (0..rows)
        .map(|_| {
            numeric
                .iter()
                .map(|&n| {
                    if n {
                        rng.random_range(0..=9).to_string()
                    } else {
                        TEXT_VALUES[rng.random_range(0..TEXT_VALUES.len())].to_string()
                    }
                })
                .collect()
        })
        .collect();
    Arc::new(Table::from_strings("random", header, body).expect("generated table is valid"))
}

/// The same table with its rows permuted.
pub fn shuffled(t: &Table, rng: &mut ChaCha8Rng) -> Arc<Table> {
    let mut rows = t.rows().to_vec();
    rows.shuffle(rng);
    Arc::new(t.with_rows(rows))
}
