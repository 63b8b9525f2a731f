use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::ColumnRef;
use crate::sql::WorkloadFeatures;

/// Pairs kept per meta-feature when no length is given.
pub const DEFAULT_META_LEN: usize = 20;

/// Normalized `(frequency, ndv)` pairs of a workload's columns.
///
/// Pairs lie in `[0, 1]`, are sorted descending and have a fixed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeature {
    pub pairs: Vec<(f64, f64)>,
}

impl MetaFeature {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.pairs.iter().flat_map(|&(f, n)| [f, n]).collect()
    }
}

/// Clause occurrence count and catalog NDV per workload column, each divided by
/// its workload maximum, sorted descending, padded or truncated to `k`.
pub fn build_meta_feature(features: &WorkloadFeatures, k: usize) -> MetaFeature {
    assert!(k >= 1, "meta-feature length must be positive");
    let mut freq: BTreeMap<ColumnRef, u64> = BTreeMap::new();
    for q in &features.per_query {
        for c in &q.where_columns {
            *freq.entry(c.clone()).or_default() += 1;
        }
    }
    for m in [&features.join_freq, &features.groupby_freq, &features.orderby_freq] {
        for (c, n) in m {
            *freq.entry(c.clone()).or_default() += u64::from(*n);
        }
    }
    let stats = features.column_stats();
    let raw: Vec<(f64, f64)> = freq
        .iter()
        .map(|(c, &n)| (n as f64, stats.get(c).map_or(0, |s| s.ndv) as f64))
        .collect();
    let max_f = raw.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_n = raw.iter().map(|p| p.1).fold(0.0, f64::max);
    let norm = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };
    let mut pairs: Vec<(f64, f64)> = raw.iter().map(|&(f, n)| (norm(f, max_f), norm(n, max_n))).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    pairs.resize(k, (0.0, 0.0));
    MetaFeature { pairs }
}

/// Cosine of the flattened vectors; zero when either is the zero vector.
pub fn cosine_similarity(a: &MetaFeature, b: &MetaFeature) -> f64 {
    assert_eq!(a.len(), b.len(), "meta-features differ in length");
    let (x, y) = (a.flatten(), b.flatten());
    let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        (dot / (nx * ny)).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::sql::{extract_workload_features, SimEstimator, Workload};
    use proptest::prelude::*;

    fn features(qs: &[&str]) -> WorkloadFeatures {
        let c = Catalog::from_json(
            r#"{"tables":[{"name":"t","rows":1000,"columns":[
              {"name":"a","type":"int","ndv":100},{"name":"b","type":"int","ndv":100},{"name":"c","type":"int","ndv":10}]}]}"#,
        )
        .unwrap();
        let w = Workload::new("w", qs.iter().map(|s| s.to_string()).collect()).unwrap();
        extract_workload_features(&w, &c, &SimEstimator::new(c.clone())).unwrap()
    }

    #[test]
    fn single_column() {
        let m = build_meta_feature(&features(&["SELECT * FROM t WHERE a = 1"]), 20);
        assert_eq!(m.len(), 20);
        assert_eq!(m.pairs[0], (1.0, 1.0));
        assert!(m.pairs[1..].iter().all(|p| *p == (0.0, 0.0)));
    }

    #[test]
    fn hand_normalized_pairs() {
        // a: 4 occurrences, b: 2, both ndv 100.
        let f = features(&[
            "SELECT * FROM t WHERE a = 1 AND b = 2",
            "SELECT * FROM t WHERE a = 3 ORDER BY b",
            "SELECT a, count(*) FROM t GROUP BY a",
            "SELECT * FROM t WHERE a > 5",
        ]);
        let m = build_meta_feature(&f, 3);
        assert_eq!(m.pairs, vec![(1.0, 1.0), (0.5, 1.0), (0.0, 0.0)]);
    }

    #[test]
    fn empty_and_truncated() {
        let m = build_meta_feature(&WorkloadFeatures::default(), 4);
        assert!(m.flatten().iter().all(|v| *v == 0.0));
        let f = features(&["SELECT * FROM t WHERE a = 1 AND b = 2 AND c = 3"]);
        assert_eq!(build_meta_feature(&f, 2).len(), 2);
    }

    #[test]
    fn cosine_examples() {
        let x = MetaFeature {
            pairs: vec![(1.0, 0.5), (0.2, 0.0)],
        };
        assert!((cosine_similarity(&x, &x) - 1.0).abs() < 1e-12);
        let e1 = MetaFeature {
            pairs: vec![(1.0, 0.0), (0.0, 0.0)],
        };
        let e2 = MetaFeature {
            pairs: vec![(0.0, 1.0), (0.0, 0.0)],
        };
        assert_eq!(cosine_similarity(&e1, &e2), 0.0);
        let zero = MetaFeature {
            pairs: vec![(0.0, 0.0); 2],
        };
        assert_eq!(cosine_similarity(&zero, &x), 0.0);
    }

    fn arb_meta(k: usize) -> impl Strategy<Value = MetaFeature> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), k).prop_map(|pairs| MetaFeature { pairs })
    }

    proptest! {
        #[test]
        fn cosine_bounded(a in arb_meta(5), b in arb_meta(5)) {
            let c = cosine_similarity(&a, &b);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        }

        #[test]
        fn meta_sorted_and_bounded(qsel in prop::collection::vec(0..5usize, 1..8), k in 1..6usize) {
            let texts = ["SELECT * FROM t WHERE a = 1", "SELECT * FROM t WHERE b < 3 ORDER BY c",
                         "SELECT c, count(*) FROM t GROUP BY c", "SELECT * FROM t WHERE a = 1 AND c = 2",
                         "SELECT * FROM t"];
            let qs: Vec<&str> = qsel.iter().map(|&i| texts[i]).collect();
            let m = build_meta_feature(&features(&qs), k);
            prop_assert_eq!(m.len(), k);
            prop_assert!(m.flatten().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(m.pairs.windows(2).all(|w| w[0].0 > w[1].0 || (w[0].0 == w[1].0 && w[0].1 >= w[1].1)));
        }
    }
}
