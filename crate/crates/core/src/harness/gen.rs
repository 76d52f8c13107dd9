use std::io;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{write_dimacs, Formula};

/// Uniform random k-CNF with `k` distinct variables per clause.
pub fn random_kcnf(num_vars: usize, num_clauses: usize, k: usize, seed: u64) -> Formula {
    assert!(k <= num_vars, "clause width exceeds variable count");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Formula::new(num_vars);
    for _ in 0..num_clauses {
        let clause: Vec<i32> = sample(&mut rng, num_vars, k)
            .into_iter()
            .map(|v| {
                let v = v as i32 + 1;
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        f.add_dimacs(&clause);
    }
    f
}

/// Writes `count` random 3-CNF files named `rand-<vars>-<i>.cnf` into `dir`.
pub fn write_instances(
    dir: &Path,
    count: usize,
    num_vars: usize,
    ratio: f64,
    seed: u64,
) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let clauses = (num_vars as f64 * ratio).round() as usize;
    (0..count)
        .map(|i| {
            let f = random_kcnf(num_vars, clauses, 3, seed.wrapping_add(i as u64));
            let path = dir.join(format!("rand-{num_vars}-{i:03}.cnf"));
            std::fs::write(&path, write_dimacs(&f))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;

    #[test]
    fn generated_files_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_instances(dir.path(), 3, 20, 4.25, 1).unwrap();
        assert_eq!(paths.len(), 3);
        let f = parse_dimacs(&std::fs::read(&paths[0]).unwrap()).unwrap();
        assert_eq!(f.num_vars(), 20);
        assert_eq!(f.num_clauses(), 85);
        assert_eq!(f, random_kcnf(20, 85, 3, 1));
        assert!(f.clauses().all(|c| c.len() == 3));
    }
}
