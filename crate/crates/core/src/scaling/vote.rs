use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::index::{IndexAction, IndexDef};

/// Per-definition recommendation counts; every stored count is at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub create_counts: BTreeMap<IndexDef, usize>,
    pub drop_counts: BTreeMap<IndexDef, usize>,
}

/// Counts each definition at most once per option.
pub fn tally(options: &[Vec<IndexAction>]) -> VoteTally {
    let mut t = VoteTally::default();
    for option in options {
        let distinct: BTreeSet<&IndexAction> = option.iter().collect();
        for a in distinct {
            let map = match a {
                IndexAction::Create(_) => &mut t.create_counts,
                IndexAction::Drop(_) => &mut t.drop_counts,
            };
            *map.entry(a.def().clone()).or_default() += 1;
        }
    }
    t
}

/// Merges sampled recommendations into one option.
///
/// DROPs recommended at least twice come first. CREATEs keep every
/// single-column definition and multi-column ones recommended at least twice.
/// A kept definition that is a strict prefix of another kept one is removed
/// and its count added to that longer definition. Prefixes fold shortest
/// first; a prefix with several extensions folds into the one with the highest
/// current count, then the narrowest, then the smallest name. CREATEs are
/// ordered by count descending, width ascending, name ascending.
pub fn index_guided_major_voting(tally: &VoteTally) -> Vec<IndexAction> {
    let mut drops: Vec<(&IndexDef, usize)> = tally
        .drop_counts
        .iter()
        .filter(|(_, &c)| c >= 2)
        .map(|(d, &c)| (d, c))
        .collect();
    drops.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.name().cmp(&b.0.name())));

    let mut kept: BTreeMap<IndexDef, usize> = tally
        .create_counts
        .iter()
        .filter(|(d, &c)| d.width() == 1 || c >= 2)
        .map(|(d, &c)| (d.clone(), c))
        .collect();
    loop {
        let prefix = kept
            .keys()
            .filter(|p| kept.keys().any(|o| p.is_strict_prefix_of(o)))
            .min_by(|a, b| a.width().cmp(&b.width()).then_with(|| a.name().cmp(&b.name())))
            .cloned();
        let Some(prefix) = prefix else { break };
        let target = kept
            .iter()
            .filter(|(o, _)| prefix.is_strict_prefix_of(o))
            .min_by(|(a, ca), (b, cb)| {
                cb.cmp(ca)
                    .then_with(|| a.width().cmp(&b.width()))
                    .then_with(|| a.name().cmp(&b.name()))
            })
            .map(|(o, _)| o.clone())
            .expect("prefix has an extension");
        let moved = kept.remove(&prefix).expect("prefix is kept");
        *kept.get_mut(&target).expect("target is kept") += moved;
    }
    let mut creates: Vec<(IndexDef, usize)> = kept.into_iter().collect();
    creates.sort_by(|(a, ca), (b, cb)| {
        cb.cmp(ca)
            .then_with(|| a.width().cmp(&b.width()))
            .then_with(|| a.name().cmp(&b.name()))
    });
    drops
        .into_iter()
        .map(|(d, _)| IndexAction::Drop(d.clone()))
        .chain(creates.into_iter().map(|(d, _)| IndexAction::Create(d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(t: &str, cols: &[&str]) -> IndexAction {
        IndexAction::Create(IndexDef::new(t, cols.iter().copied()).unwrap())
    }

    fn d(t: &str, cols: &[&str]) -> IndexAction {
        IndexAction::Drop(IndexDef::new(t, cols.iter().copied()).unwrap())
    }

    #[test]
    fn counting() {
        let one = tally(&[vec![c("t", &["a"]), c("t", &["a"]), d("t", &["b"])]]);
        assert!(one
            .create_counts
            .values()
            .chain(one.drop_counts.values())
            .all(|&n| n == 1));
        let opts: Vec<Vec<IndexAction>> = (0..8)
            .map(|i| {
                if i < 5 {
                    vec![c("t", &["a"])]
                } else {
                    vec![d("t", &["a"])]
                }
            })
            .collect();
        let t = tally(&opts);
        assert_eq!(t.create_counts[&IndexDef::single("t", "a")], 5);
        assert_eq!(t.drop_counts[&IndexDef::single("t", "a")], 3);
    }

    #[test]
    fn prefix_pair_folds_into_longer_index() {
        let opts = vec![
            vec![
                c("lineitem", &["l_orderkey"]),
                c("lineitem", &["l_orderkey", "l_suppkey"]),
            ],
            vec![c("lineitem", &["l_orderkey", "l_suppkey"])],
            vec![c("part", &["p_size"])],
            vec![c("part", &["p_size"])],
        ];
        let t = tally(&opts);
        assert_eq!(
            index_guided_major_voting(&t),
            vec![c("lineitem", &["l_orderkey", "l_suppkey"]), c("part", &["p_size"])]
        );
    }

    #[test]
    fn thresholds() {
        let t = tally(&[vec![c("t", &["a", "b"]), d("t", &["c"]), c("t", &["x"])]]);
        assert_eq!(index_guided_major_voting(&t), vec![c("t", &["x"])]);
        let t = tally(&[vec![d("t", &["c"]), c("t", &["x"])], vec![d("t", &["c"])]]);
        assert_eq!(index_guided_major_voting(&t), vec![d("t", &["c"]), c("t", &["x"])]);
    }

    #[test]
    fn chains_fold_to_the_longest() {
        let opts = vec![
            vec![c("t", &["a"]), c("t", &["a", "b"]), c("t", &["a", "b", "c"])],
            vec![c("t", &["a", "b"]), c("t", &["a", "b", "c"])],
        ];
        assert_eq!(index_guided_major_voting(&tally(&opts)), vec![c("t", &["a", "b", "c"])]);
    }
}
