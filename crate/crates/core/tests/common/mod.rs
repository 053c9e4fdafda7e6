#![allow(dead_code)]

pub mod golden;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes a random OpenKE directory with `entities` nodes, `relations`
/// relations and `triples` distinct edges (no self loops).
pub fn write_toy_dataset(dir: &Path, entities: u32, relations: u32, triples: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = std::collections::BTreeSet::new();
    while edges.len() < triples {
        let (h, t) = (rng.gen_range(0..entities), rng.gen_range(0..entities));
        if h != t {
            edges.insert((h, t, rng.gen_range(0..relations)));
        }
    }
    fs::create_dir_all(dir).unwrap();
    let mut ents = format!("{entities}\n");
    for i in 0..entities {
        let _ = writeln!(ents, "entity_{i} {i}");
    }
    let mut rels = format!("{relations}\n");
    for i in 0..relations {
        let _ = writeln!(rels, "relation_name_{i} {i}");
    }
    let mut train = format!("{}\n", edges.len());
    for (h, t, r) in &edges {
        let _ = writeln!(train, "{h} {t} {r}");
    }
    fs::write(dir.join("entity2id.txt"), ents).unwrap();
    fs::write(dir.join("relation2id.txt"), rels).unwrap();
    fs::write(dir.join("train2id.txt"), train).unwrap();
}
