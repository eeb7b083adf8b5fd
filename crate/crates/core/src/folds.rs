//! Video-grouped, class-stratified k-fold splitting of the merged
//! training + validation pool.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{LabeledSample, CLASS_COUNT};

pub const DEFAULT_FOLDS: usize = 5;

/// Assignment of whole videos to folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, video_id: &str) -> Option<usize> {
        self.assignment.get(video_id).copied()
    }

    pub fn check(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!(
                "fold count k={} must be >= 2",
                self.k
            )));
        }
        if let Some((video, fold)) = self.assignment.iter().find(|(_, &f)| f >= self.k) {
            return Err(Error::invalid(format!(
                "video {video:?} assigned to fold {fold} outside 0..{}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct VideoStats {
    frames: u64,
    classes: [u64; CLASS_COUNT],
}

/// Absolute deviation of a fold's class counts from the global proportions.
fn deviation(counts: &[u64; CLASS_COUNT], size: u64, global: &[f64; CLASS_COUNT]) -> f64 {
    counts
        .iter()
        .zip(global)
        .map(|(&c, &g)| (c as f64 - g * size as f64).abs())
        .sum()
}

/// Greedy assignment of videos to `k` folds.
///
/// Videos are taken largest first (seeded shuffle among equal sizes). Each
/// goes to the fold with the lowest cost, where the cost adds the fold's
/// relative load to the per-frame change in class-count deviation from the
/// global label distribution. A fold is only eligible if receiving the
/// video keeps `max size - min size` within the largest video's frame
/// count, which bounds every fold's distance from `N / k` by that count.
pub fn split_five_fold(samples: &[LabeledSample], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count k={k} must be >= 2")));
    }
    let mut videos: BTreeMap<&str, VideoStats> = BTreeMap::new();
    for s in samples {
        let v = videos.entry(&s.video_id).or_insert(VideoStats {
            frames: 0,
            classes: [0; CLASS_COUNT],
        });
        v.frames += 1;
        v.classes[s.label.index()] += 1;
    }
    if videos.len() < k {
        return Err(Error::invalid(format!(
            "{} distinct videos cannot fill {k} folds",
            videos.len()
        )));
    }

    let total = samples.len() as u64;
    let mut global = [0.0; CLASS_COUNT];
    for v in videos.values() {
        for (g, &c) in global.iter_mut().zip(&v.classes) {
            *g += c as f64;
        }
    }
    for g in &mut global {
        *g /= total as f64;
    }
    let target = total as f64 / k as f64;
    let largest = videos.values().map(|v| v.frames).max().unwrap_or(0);

    let mut order: Vec<(&str, VideoStats)> = videos.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by(|a, b| b.1.frames.cmp(&a.1.frames));

    let mut sizes = vec![0u64; k];
    let mut counts = vec![[0u64; CLASS_COUNT]; k];
    let mut fold_of = Vec::with_capacity(order.len());
    for (_, stats) in &order {
        let min_size = *sizes.iter().min().expect("k >= 2");
        let mut best: Option<(usize, f64)> = None;
        for f in 0..k {
            let new_size = sizes[f] + stats.frames;
            if new_size - min_size > largest {
                continue;
            }
            let mut new_counts = counts[f];
            for (c, &v) in new_counts.iter_mut().zip(&stats.classes) {
                *c += v;
            }
            let delta = deviation(&new_counts, new_size, &global)
                - deviation(&counts[f], sizes[f], &global);
            let cost = new_size as f64 / target + delta / stats.frames as f64;
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((f, cost));
            }
        }
        let (f, _) = best.ok_or_else(|| Error::Invariant("no eligible fold".into()))?;
        sizes[f] += stats.frames;
        for (c, &v) in counts[f].iter_mut().zip(&stats.classes) {
            *c += v;
        }
        fold_of.push(f);
    }

    let stats: Vec<VideoStats> = order.iter().map(|(_, s)| *s).collect();
    refine(&stats, &mut fold_of, k, largest, &global);

    let assignment = order
        .iter()
        .zip(fold_of)
        .map(|((video, _), f)| (video.to_string(), f))
        .collect();
    Ok(FoldPlan {
        k,
        seed,
        assignment,
    })
}

const MAX_REFINE_PASSES: usize = 100;

struct FoldTotals {
    sizes: Vec<u64>,
    counts: Vec<[u64; CLASS_COUNT]>,
}

impl FoldTotals {
    fn build(stats: &[VideoStats], fold_of: &[usize], k: usize) -> Self {
        let mut t = Self {
            sizes: vec![0; k],
            counts: vec![[0; CLASS_COUNT]; k],
        };
        for (s, &f) in stats.iter().zip(fold_of) {
            t.apply(s, f, true);
        }
        t
    }

    fn apply(&mut self, s: &VideoStats, fold: usize, add: bool) {
        if add {
            self.sizes[fold] += s.frames;
        } else {
            self.sizes[fold] -= s.frames;
        }
        for (c, &v) in self.counts[fold].iter_mut().zip(&s.classes) {
            if add {
                *c += v;
            } else {
                *c -= v;
            }
        }
    }

    fn spread(&self) -> u64 {
        self.sizes.iter().max().unwrap_or(&0) - self.sizes.iter().min().unwrap_or(&0)
    }

    /// Worst per-fold class-proportion deviation, then the total squared
    /// deviation as a tie-breaker.
    fn objective(&self, global: &[f64; CLASS_COUNT]) -> (f64, f64) {
        let mut worst: f64 = 0.0;
        let mut total = 0.0;
        for (size, counts) in self.sizes.iter().zip(&self.counts) {
            if *size == 0 {
                continue;
            }
            for (&c, &g) in counts.iter().zip(global) {
                let d = (c as f64 / *size as f64 - g).abs();
                worst = worst.max(d);
                total += d * d;
            }
        }
        (worst, total)
    }
}

/// Local search after the greedy pass: single-video moves and pairwise
/// swaps, accepted only if they lower the objective and keep the size
/// spread within `largest`. Deterministic (fixed visiting order).
fn refine(
    stats: &[VideoStats],
    fold_of: &mut [usize],
    k: usize,
    largest: u64,
    global: &[f64; CLASS_COUNT],
) {
    let mut totals = FoldTotals::build(stats, fold_of, k);
    let mut current = totals.objective(global);
    let better = |a: (f64, f64), b: (f64, f64)| {
        a.0 < b.0 - 1e-12 || (a.0 <= b.0 + 1e-12 && a.1 < b.1 - 1e-12)
    };
    for _ in 0..MAX_REFINE_PASSES {
        let mut improved = false;
        for v in 0..stats.len() {
            for to in 0..k {
                let from = fold_of[v];
                if to == from {
                    continue;
                }
                totals.apply(&stats[v], from, false);
                totals.apply(&stats[v], to, true);
                let candidate = totals.objective(global);
                if totals.spread() <= largest && better(candidate, current) {
                    fold_of[v] = to;
                    current = candidate;
                    improved = true;
                } else {
                    totals.apply(&stats[v], to, false);
                    totals.apply(&stats[v], from, true);
                }
            }
        }
        for a in 0..stats.len() {
            for b in a + 1..stats.len() {
                let (fa, fb) = (fold_of[a], fold_of[b]);
                if fa == fb {
                    continue;
                }
                totals.apply(&stats[a], fa, false);
                totals.apply(&stats[b], fb, false);
                totals.apply(&stats[a], fb, true);
                totals.apply(&stats[b], fa, true);
                let candidate = totals.objective(global);
                if totals.spread() <= largest && better(candidate, current) {
                    fold_of[a] = fb;
                    fold_of[b] = fa;
                    current = candidate;
                    improved = true;
                } else {
                    totals.apply(&stats[a], fb, false);
                    totals.apply(&stats[b], fa, false);
                    totals.apply(&stats[a], fa, true);
                    totals.apply(&stats[b], fb, true);
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Splits `samples` into (train, test) for one held-out fold, keeping input order.
pub fn fold_view(
    samples: &[LabeledSample],
    plan: &FoldPlan,
    test_fold: usize,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if test_fold >= plan.k {
        return Err(Error::invalid(format!(
            "test fold {test_fold} outside 0..{}",
            plan.k
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in samples {
        let fold = plan.fold_of(&s.video_id).ok_or_else(|| {
            Error::invalid(format!("video {:?} missing from fold plan", s.video_id))
        })?;
        if fold == test_fold {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, test))
}
