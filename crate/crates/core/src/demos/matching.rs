use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::demos::{cosine_similarity, DemoPool, Demonstration, MetaFeature};
use crate::error::DemoError;
use crate::registry::Registry;

pub const DEFAULT_KMEANS_K: usize = 8;
const KMEANS_MAX_ITERS: usize = 100;

/// Orders candidate demonstrations for a query meta-feature.
///
/// Candidates arrive sorted by id. The result is a permutation of their indices.
pub trait MatchStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn rank(&self, candidates: &[&Demonstration], query: &MetaFeature) -> Vec<usize>;
}

/// Full ranking of the pool, most relevant first, without `exclude_schema` entries.
pub fn match_demonstrations<'p>(
    pool: &'p DemoPool,
    query: &MetaFeature,
    strategy: &dyn MatchStrategy,
    exclude_schema: Option<&str>,
) -> Result<Vec<&'p Demonstration>, DemoError> {
    let mut candidates: Vec<&Demonstration> = pool
        .demos()
        .iter()
        .filter(|d| Some(d.schema_id.as_str()) != exclude_schema)
        .collect();
    if candidates.is_empty() {
        return Err(DemoError::MatchEmpty);
    }
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    let order = strategy.rank(&candidates, query);
    debug_assert_eq!(order.len(), candidates.len());
    Ok(order.into_iter().map(|i| candidates[i]).collect())
}

/// Descending cosine similarity; ties by id.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineMatch;

impl MatchStrategy for CosineMatch {
    fn name(&self) -> &'static str {
        "cosine"
    }

    fn rank(&self, candidates: &[&Demonstration], query: &MetaFeature) -> Vec<usize> {
        let sims: Vec<f64> = candidates.iter().map(|d| cosine_similarity(&d.meta, query)).collect();
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        order
    }
}

/// Seeded shuffle, independent of the query.
#[derive(Debug, Clone, Copy)]
pub struct RandomMatch {
    pub seed: u64,
}

impl MatchStrategy for RandomMatch {
    fn name(&self) -> &'static str {
        "random"
    }

    fn rank(&self, candidates: &[&Demonstration], _query: &MetaFeature) -> Vec<usize> {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        order
    }
}

/// Lloyd's k-means over flattened meta-features.
///
/// The query's nearest cluster comes first, then the rest by center distance;
/// members of each cluster appear in seeded random order.
#[derive(Debug, Clone, Copy)]
pub struct KMeansMatch {
    pub k: usize,
    pub seed: u64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> usize {
    (0..centers.len())
        .min_by(|&a, &b| dist2(&centers[a], p).total_cmp(&dist2(&centers[b], p)).then(a.cmp(&b)))
        .expect("at least one center")
}

/// Cluster assignment of each point.
pub(crate) fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let k = k.clamp(1, points.len());
    let mut centers: Vec<Vec<f64>> = index::sample(rng, points.len(), k)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(&centers, p)).collect();
    for _ in 0..KMEANS_MAX_ITERS {
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p)
                .collect();
            // Empty clusters keep their previous center.
            if members.is_empty() {
                continue;
            }
            for (j, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(&centers, p)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    (centers, assign)
}

impl MatchStrategy for KMeansMatch {
    fn name(&self) -> &'static str {
        "kmeans"
    }

    fn rank(&self, candidates: &[&Demonstration], query: &MetaFeature) -> Vec<usize> {
        let points: Vec<Vec<f64>> = candidates.iter().map(|d| d.meta.flatten()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (centers, assign) = kmeans(&points, self.k, &mut rng);
        let q = query.flatten();
        let mut clusters: Vec<usize> = (0..centers.len()).collect();
        clusters.sort_by(|&a, &b| {
            dist2(&centers[a], &q)
                .total_cmp(&dist2(&centers[b], &q))
                .then(a.cmp(&b))
        });
        let mut order = Vec::with_capacity(candidates.len());
        for c in clusters {
            let mut members: Vec<usize> = (0..candidates.len()).filter(|&i| assign[i] == c).collect();
            members.shuffle(&mut rng);
            order.extend(members);
        }
        order
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatchArgs {
    pub seed: u64,
    pub k: usize,
}

impl Default for MatchArgs {
    fn default() -> Self {
        MatchArgs {
            seed: 0,
            k: DEFAULT_KMEANS_K,
        }
    }
}

pub type MatchRegistry = Registry<dyn MatchStrategy, MatchArgs, DemoError>;

pub fn match_registry() -> MatchRegistry {
    Registry::new("match strategy")
        .with("cosine", |_: &MatchArgs| {
            Ok(Box::new(CosineMatch) as Box<dyn MatchStrategy>)
        })
        .with("random", |a: &MatchArgs| {
            Ok(Box::new(RandomMatch { seed: a.seed }) as Box<dyn MatchStrategy>)
        })
        .with("kmeans", |a: &MatchArgs| {
            Ok(Box::new(KMeansMatch { k: a.k, seed: a.seed }) as Box<dyn MatchStrategy>)
        })
}
