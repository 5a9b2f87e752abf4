//! Semantic-accuracy surrogate and semantic rate.
//!
//! The accuracy of the semantic codec is looked up in a frozen table
//! `eps(k, snr)` indexed by symbols-per-word `k` and SNR in dB, standing in
//! for measurements of a trained codec. The built-in table is generated from
//! a logistic family (sigmoid in SNR, saturating in `k`) and shipped as a
//! CSV data file; a measured table with the same format drops in via
//! `semantics.table_path`.

use std::path::Path;

use crate::error::{Error, Result};

/// Grid of semantic-similarity values with validated monotonicity.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    k_values: Vec<f64>,
    snr_grid_db: Vec<f64>,
    /// Row-major `[k][snr]`.
    eps: Vec<f64>,
}

/// Source statistics of the semantic encoder for one task type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticSourceStats {
    /// Average semantic units carried by one sentence.
    pub units_per_sentence: f64,
    /// Average words per sentence.
    pub words_per_sentence: f64,
    /// Semantic symbols transmitted per word.
    pub symbols_per_word: f64,
}

impl SemanticSourceStats {
    pub fn validate(&self) -> Result<()> {
        if self.units_per_sentence > 0.0
            && self.words_per_sentence > 0.0
            && self.symbols_per_word > 0.0
        {
            Ok(())
        } else {
            Err(Error::config(
                "semantic source statistics must be strictly positive".to_string(),
            ))
        }
    }
}

/// The logistic family behind the built-in table.
pub fn logistic_accuracy(k: f64, snr_db: f64) -> f64 {
    let eps_max = 1.0 - 0.5 / k;
    let midpoint = 12.0 - 0.4 * k;
    eps_max / (1.0 + (-0.3 * (snr_db - midpoint)).exp())
}

/// Sample the logistic family on the default grids.
pub fn generate_default_table() -> AccuracyTable {
    let k_values: Vec<f64> = vec![5.0, 10.0, 15.0, 20.0];
    let snr_grid_db: Vec<f64> = (0..8).map(|i| -10.0 + 5.0 * i as f64).collect();
    let mut eps = Vec::with_capacity(k_values.len() * snr_grid_db.len());
    for &k in &k_values {
        for &s in &snr_grid_db {
            eps.push(logistic_accuracy(k, s));
        }
    }
    AccuracyTable::new(k_values, snr_grid_db, eps).expect("default table satisfies invariants")
}

const BUILTIN_TABLE_CSV: &str = include_str!("../data/default_accuracy_table.csv");

impl AccuracyTable {
    /// Build a table from grids and a row-major value matrix, validating all
    /// invariants.
    pub fn new(k_values: Vec<f64>, snr_grid_db: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        if k_values.is_empty() || snr_grid_db.is_empty() {
            return Err(Error::config("accuracy table must be non-empty".to_string()));
        }
        if eps.len() != k_values.len() * snr_grid_db.len() {
            return Err(Error::config(format!(
                "accuracy table has {} values, expected {} ({} k x {} snr)",
                eps.len(),
                k_values.len() * snr_grid_db.len(),
                k_values.len(),
                snr_grid_db.len()
            )));
        }
        let strictly_increasing =
            |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if !strictly_increasing(&k_values) {
            return Err(Error::config(
                "accuracy table k values must be strictly increasing".to_string(),
            ));
        }
        if !strictly_increasing(&snr_grid_db) {
            return Err(Error::config(
                "accuracy table SNR grid must be strictly increasing".to_string(),
            ));
        }
        let table = AccuracyTable {
            k_values,
            snr_grid_db,
            eps,
        };
        table.check_monotonicity()?;
        Ok(table)
    }

    fn check_monotonicity(&self) -> Result<()> {
        let (nk, ns) = (self.k_values.len(), self.snr_grid_db.len());
        for ki in 0..nk {
            for si in 0..ns {
                let v = self.node(ki, si);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::config(format!(
                        "accuracy value {v} at k={}, snr={} dB outside [0,1]",
                        self.k_values[ki], self.snr_grid_db[si]
                    )));
                }
                if si + 1 < ns && self.node(ki, si + 1) < v {
                    return Err(Error::config(format!(
                        "accuracy not monotone in SNR at k={}",
                        self.k_values[ki]
                    )));
                }
                if ki + 1 < nk && self.node(ki + 1, si) < v {
                    return Err(Error::config(format!(
                        "accuracy not monotone in k at snr={} dB",
                        self.snr_grid_db[si]
                    )));
                }
            }
        }
        Ok(())
    }

    /// The built-in frozen table.
    pub fn builtin() -> AccuracyTable {
        Self::from_csv_str(BUILTIN_TABLE_CSV).expect("built-in table is valid")
    }

    /// Parse the `k,snr_db,eps` CSV format. Rows may be in any order but the
    /// grid must be complete.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "k,snr_db,eps" => {}
            _ => {
                return Err(Error::config(
                    "accuracy table CSV must start with header `k,snr_db,eps`".to_string(),
                ))
            }
        }
        for (lineno, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| {
                        Error::config(format!("table line {}: missing {name}", lineno + 1))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| {
                        Error::config(format!("table line {}: bad {name}", lineno + 1))
                    })
            };
            let k = field("k")?;
            let snr = field("snr_db")?;
            let eps = field("eps")?;
            rows.push((k, snr, eps));
        }
        let mut k_values: Vec<f64> = rows.iter().map(|r| r.0).collect();
        k_values.sort_by(|a, b| a.total_cmp(b));
        k_values.dedup();
        let mut snr_grid: Vec<f64> = rows.iter().map(|r| r.1).collect();
        snr_grid.sort_by(|a, b| a.total_cmp(b));
        snr_grid.dedup();
        let (nk, ns) = (k_values.len(), snr_grid.len());
        if rows.len() != nk * ns {
            return Err(Error::config(format!(
                "accuracy table grid incomplete: {} rows for {} k x {} snr nodes",
                rows.len(),
                nk,
                ns
            )));
        }
        let mut eps = vec![f64::NAN; nk * ns];
        for (k, snr, v) in rows {
            let ki = k_values.iter().position(|&x| x == k).unwrap();
            let si = snr_grid.iter().position(|&x| x == snr).unwrap();
            if !eps[ki * ns + si].is_nan() {
                return Err(Error::config(format!(
                    "accuracy table node (k={k}, snr={snr}) duplicated"
                )));
            }
            eps[ki * ns + si] = v;
        }
        AccuracyTable::new(k_values, snr_grid, eps)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::missing(format!("accuracy table {}: {e}", path.display()))
        })?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,snr_db,eps\n");
        for (ki, &k) in self.k_values.iter().enumerate() {
            for (si, &s) in self.snr_grid_db.iter().enumerate() {
                out.push_str(&format!("{k},{s},{}\n", self.node(ki, si)));
            }
        }
        out
    }

    fn node(&self, ki: usize, si: usize) -> f64 {
        self.eps[ki * self.snr_grid_db.len() + si]
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k_values
    }

    pub fn snr_grid_db(&self) -> &[f64] {
        &self.snr_grid_db
    }

    /// Whether `k` lies within the table's covered range.
    pub fn covers_k(&self, k: f64) -> bool {
        k >= self.k_values[0] && k <= *self.k_values.last().unwrap()
    }

    /// Semantic similarity at `(k, gamma)` with `gamma` a linear SNR.
    ///
    /// Bilinear interpolation in `(k, 10 log10 gamma)`; queries beyond the
    /// SNR grid clamp to the edge values, and `gamma = 0` maps to the lowest
    /// grid point. `k` outside the covered range is a configuration error.
    pub fn similarity(&self, k: f64, gamma: f64) -> Result<f64> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::invalid(format!("SNR must be non-negative, got {gamma}")));
        }
        if !self.covers_k(k) {
            return Err(Error::config(format!(
                "symbols-per-word k={k} not covered by the accuracy table (range [{}, {}])",
                self.k_values[0],
                self.k_values.last().unwrap()
            )));
        }
        let snr_db = if gamma > 0.0 {
            10.0 * gamma.log10()
        } else {
            f64::NEG_INFINITY
        };
        let x = snr_db.clamp(self.snr_grid_db[0], *self.snr_grid_db.last().unwrap());
        let (ki, tk) = Self::locate(&self.k_values, k);
        let (si, ts) = Self::locate(&self.snr_grid_db, x);
        let ki1 = (ki + 1).min(self.k_values.len() - 1);
        let si1 = (si + 1).min(self.snr_grid_db.len() - 1);
        let v00 = self.node(ki, si);
        let v01 = self.node(ki, si1);
        let v10 = self.node(ki1, si);
        let v11 = self.node(ki1, si1);
        let low = v00 * (1.0 - ts) + v01 * ts;
        let high = v10 * (1.0 - ts) + v11 * ts;
        Ok(low * (1.0 - tk) + high * tk)
    }

    /// Bracketing index and interpolation weight; exact at nodes.
    fn locate(grid: &[f64], x: f64) -> (usize, f64) {
        debug_assert!(x >= grid[0] && x <= *grid.last().unwrap());
        if grid.len() == 1 {
            return (0, 0.0);
        }
        let mut i = match grid.binary_search_by(|g| g.total_cmp(&x)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= grid.len() {
            i = grid.len() - 2;
        }
        let t = if x == grid[i] {
            0.0
        } else {
            (x - grid[i]) / (grid[i + 1] - grid[i])
        };
        (i, t)
    }
}

/// Semantic throughput in semantic units per second.
pub fn semantic_rate(stats: &SemanticSourceStats, bandwidth_hz: f64, eps: f64) -> Result<f64> {
    if bandwidth_hz <= 0.0 {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth_hz}"
        )));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!(
            "similarity must lie in [0,1], got {eps}"
        )));
    }
    stats.validate()?;
    Ok(bandwidth_hz * stats.units_per_sentence * eps
        / (stats.words_per_sentence * stats.symbols_per_word))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats() -> SemanticSourceStats {
        SemanticSourceStats {
            units_per_sentence: 30.0,
            words_per_sentence: 20.0,
            symbols_per_word: 15.0,
        }
    }

    /// One-time generator for the frozen data file; run with
    /// `cargo test -p semoff-core regenerate_builtin_table -- --ignored`.
    #[test]
    #[ignore]
    fn regenerate_builtin_table() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("data/default_accuracy_table.csv");
        std::fs::write(&path, generate_default_table().to_csv_string()).unwrap();
    }

    #[test]
    fn builtin_matches_generator() {
        let builtin = AccuracyTable::builtin();
        let generated = generate_default_table();
        assert_eq!(builtin.k_values(), generated.k_values());
        assert_eq!(builtin.snr_grid_db(), generated.snr_grid_db());
        for (a, b) in builtin.eps.iter().zip(generated.eps.iter()) {
            assert!((a - b).abs() <= 1e-14 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn node_queries_are_bit_exact() {
        let t = AccuracyTable::builtin();
        for (ki, &k) in t.k_values().to_vec().iter().enumerate() {
            for (si, &s) in t.snr_grid_db().to_vec().iter().enumerate() {
                let gamma = 10f64.powf(s / 10.0);
                assert_eq!(t.similarity(k, gamma).unwrap(), t.node(ki, si));
            }
        }
    }

    #[test]
    fn midpoint_between_snr_nodes() {
        let t = AccuracyTable::new(
            vec![10.0],
            vec![0.0, 10.0],
            vec![0.4, 0.8],
        )
        .unwrap();
        let gamma = 10f64.powf(5.0 / 10.0); // 5 dB, midway
        assert!((t.similarity(10.0, gamma).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_snr_maps_to_lowest_grid_point() {
        let t = AccuracyTable::builtin();
        assert_eq!(t.similarity(15.0, 0.0).unwrap(), t.similarity(15.0, 1e-10).unwrap());
        let above_top = t.similarity(15.0, 1e12).unwrap();
        let at_top = t.similarity(15.0, 10f64.powf(2.5)).unwrap();
        assert_eq!(above_top, at_top);
    }

    #[test]
    fn uncovered_k_is_config_error() {
        let t = AccuracyTable::builtin();
        assert!(matches!(t.similarity(4.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(t.similarity(25.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn loader_rejects_nonmonotone_table() {
        let csv = "k,snr_db,eps\n5,0,0.9\n5,10,0.1\n";
        assert!(AccuracyTable::from_csv_str(csv).is_err());
        let csv_k = "k,snr_db,eps\n5,0,0.9\n10,0,0.1\n";
        assert!(AccuracyTable::from_csv_str(csv_k).is_err());
        let csv_range = "k,snr_db,eps\n5,0,1.5\n";
        assert!(AccuracyTable::from_csv_str(csv_range).is_err());
    }

    #[test]
    fn loader_rejects_incomplete_grid() {
        let csv = "k,snr_db,eps\n5,0,0.1\n5,10,0.2\n10,0,0.15\n";
        assert!(AccuracyTable::from_csv_str(csv).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = AccuracyTable::builtin();
        let back = AccuracyTable::from_csv_str(&t.to_csv_string()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn rate_hand_evaluated() {
        let rate = semantic_rate(&stats(), 1e5, 0.9).unwrap();
        assert!((rate - 9000.0).abs() < 1e-9);
    }

    #[test]
    fn rate_zero_similarity() {
        assert_eq!(semantic_rate(&stats(), 1e5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rate_linear_in_bandwidth() {
        let r1 = semantic_rate(&stats(), 1e5, 0.5).unwrap();
        let r2 = semantic_rate(&stats(), 2e5, 0.5).unwrap();
        assert!((r2 - 2.0 * r1).abs() / r2 < 1e-12);
    }

    proptest! {
        #[test]
        fn similarity_in_unit_interval_and_monotone(
            k in 5.0f64..20.0,
            g1 in 0.0f64..1e4,
            g2 in 0.0f64..1e4,
        ) {
            let t = AccuracyTable::builtin();
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let e_lo = t.similarity(k, lo).unwrap();
            let e_hi = t.similarity(k, hi).unwrap();
            prop_assert!((0.0..=1.0).contains(&e_lo));
            prop_assert!(e_lo <= e_hi + 1e-15);
        }

        #[test]
        fn similarity_monotone_in_k(
            k1 in 5.0f64..20.0,
            k2 in 5.0f64..20.0,
            g in 0.0f64..1e4,
        ) {
            let t = AccuracyTable::builtin();
            let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
            prop_assert!(t.similarity(lo, g).unwrap() <= t.similarity(hi, g).unwrap() + 1e-15);
        }

        #[test]
        fn rate_inverse_linear_in_k(c in 1.5f64..4.0, eps in 0.0f64..1.0) {
            let s1 = stats();
            let s2 = SemanticSourceStats { symbols_per_word: c * s1.symbols_per_word, ..s1 };
            let r1 = semantic_rate(&s1, 1e5, eps).unwrap();
            let r2 = semantic_rate(&s2, 1e5, eps).unwrap();
            prop_assert!((r1 - c * r2).abs() <= 1e-12 * r1.abs().max(1e-300));
        }
    }
}
