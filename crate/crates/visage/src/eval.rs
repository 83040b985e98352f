//! Evaluation metrics: landmark distances in vertex space, sync AUC by
//! exhaustive pair ranking, style-code cluster quality, and the 2-D
//! principal-direction projection behind the style-space table.

use std::collections::BTreeMap;

use visage_core::config::ModelConfig;
use visage_core::disc::{mouth_points, SyncDisc, SYNC_EPS};
use visage_core::motion::{extract_window, FaceBasis, MotionSequence, PhonemeSequence};
use visage_core::nn::{Lease, ParamStore};
use visage_core::rng::SeedRng;
use visage_core::tape::Tape;
use visage_core::tensor::Tensor;

use crate::error::{CliError, Result};

/// Mean per-vertex landmark distance between two aligned sequences, in the
/// vertex space spanned by `basis`. With `mouth_only` the mean runs over
/// the basis's mouth vertices (the M-LMD analogue); otherwise over all
/// vertices (F-LMD). The shared mean shape cancels, so only coefficient
/// differences enter.
pub fn landmark_distance(
    basis: &FaceBasis,
    pred: &MotionSequence,
    gt: &MotionSequence,
    mouth_only: bool,
) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(CliError::run(format!(
            "landmark distance needs aligned sequences, got {} vs {} frames",
            pred.len(),
            gt.len()
        )));
    }
    let rows: Tensor<f32>;
    let matrix = if mouth_only {
        rows = basis.mouth_rows().0;
        &rows
    } else {
        &basis.vertex_basis
    };
    let n_vertices = matrix.rows() / 3;
    let mut total = 0.0f64;
    for t in 0..pred.len() {
        let pc = pred.frame(t).coeffs();
        let gc = gt.frame(t).coeffs();
        let mut diff = [0.0f64; 64];
        for c in 0..64 {
            diff[c] = pc[c] as f64 - gc[c] as f64;
        }
        for v in 0..n_vertices {
            let mut sq = 0.0f64;
            for d in 0..3 {
                let row = 3 * v + d;
                let mut offset = 0.0f64;
                for c in 0..64 {
                    offset += matrix.get(row, c) as f64 * diff[c];
                }
                sq += offset * offset;
            }
            total += sq.sqrt();
        }
    }
    Ok(total / (pred.len() * n_vertices) as f64)
}

/// Area under the ROC curve by exhaustive pair ranking (Mann-Whitney with
/// average ranks for ties): the probability that a random positive score
/// outranks a random negative one, ties counting half.
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    assert!(!pos.is_empty() && !neg.is_empty(), "auc needs both classes");
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks are 1-based; tied scores share the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    u / (np * nn)
}

/// Sync scores of one clip: the aligned (frame t, window t) pairs are the
/// positives; every (frame t, window u) with the windows fully disjoint
/// (|t-u| >= window span) is a negative. Scores are the discriminator's
/// cosine, reproduced on plain values.
pub fn clip_sync_scores(
    disc: &SyncDisc,
    ps: &ParamStore<f32>,
    cfg: &ModelConfig,
    basis: &FaceBasis,
    motion: &MotionSequence,
    phonemes: &PhonemeSequence,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if motion.len() != phonemes.len() {
        return Err(CliError::run(
            "sync scoring needs aligned motion and phonemes".to_string(),
        ));
    }
    let n = motion.len();
    let mut tape: Tape<f32> = Tape::new();

    let mut mouth = Vec::with_capacity(n);
    for t in 0..n {
        let flat = mouth_points(motion.frame(t), basis);
        let m = flat.len() / 3;
        let pts = tape.constant(Tensor::from_vec(m, 3, flat));
        let e = disc.mouth_embed(ps, &mut tape, pts, Lease::Frozen);
        mouth.push(tape.value(e).data().to_vec());
    }

    let mut window_embeds: BTreeMap<Vec<u32>, Vec<f32>> = BTreeMap::new();
    let mut window_of = Vec::with_capacity(n);
    for t in 0..n {
        let window = extract_window(phonemes, t, cfg.window)?;
        if !window_embeds.contains_key(&window) {
            let e = disc.audio_embed(ps, &mut tape, &window, Lease::Frozen)?;
            window_embeds.insert(window.clone(), tape.value(e).data().to_vec());
        }
        window_of.push(window);
    }

    let score = |m: &[f32], a: &[f32]| -> f64 {
        let mut dot = 0.0f32;
        let mut na = 0.0f32;
        let mut nb = 0.0f32;
        for (&x, &y) in m.iter().zip(a) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        let denom = (na.sqrt() * nb.sqrt()).max(SYNC_EPS as f32);
        (dot / denom) as f64
    };

    let span = cfg.window_len();
    let mut pos = Vec::with_capacity(n);
    let mut neg = Vec::new();
    for t in 0..n {
        pos.push(score(&mouth[t], &window_embeds[&window_of[t]]));
        for u in 0..n {
            if t.abs_diff(u) >= span {
                neg.push(score(&mouth[t], &window_embeds[&window_of[u]]));
            }
        }
    }
    Ok((pos, neg))
}

/// AUC over a set of (motion, phonemes) items, pooling the per-clip scores.
pub fn sync_auc(
    disc: &SyncDisc,
    ps: &ParamStore<f32>,
    cfg: &ModelConfig,
    basis: &FaceBasis,
    items: &[(&MotionSequence, &PhonemeSequence)],
) -> Result<f64> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (motion, phonemes) in items {
        let (p, n) = clip_sync_scores(disc, ps, cfg, basis, motion, phonemes)?;
        pos.extend(p);
        neg.extend(n);
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(CliError::run(
            "sync AUC needs clips long enough for disjoint windows".to_string(),
        ));
    }
    Ok(auc(&pos, &neg))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette coefficient of labeled points under Euclidean distance.
/// Singleton clusters contribute 0, matching the usual convention.
pub fn silhouette(points: &[Vec<f64>], labels: &[u32]) -> f64 {
    assert_eq!(points.len(), labels.len(), "silhouette inputs");
    assert!(!points.is_empty(), "silhouette needs points");
    let classes: Vec<u32> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    assert!(classes.len() >= 2, "silhouette needs >= 2 clusters");
    let mut total = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let e = sums.entry(labels[j]).or_insert((0.0, 0));
            e.0 += euclidean(p, q);
            e.1 += 1;
        }
        let own = sums.get(&labels[i]).copied();
        let a = match own {
            Some((sum, count)) if count > 0 => sum / count as f64,
            _ => {
                continue; // singleton cluster: contributes 0
            }
        };
        let b = classes
            .iter()
            .filter(|&&c| c != labels[i])
            .filter_map(|c| sums.get(c))
            .map(|&(sum, count)| sum / count as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / points.len() as f64
}

/// Per-label mean points of a labeled set.
pub fn centroids(points: &[Vec<f64>], labels: &[u32]) -> BTreeMap<u32, Vec<f64>> {
    assert_eq!(points.len(), labels.len());
    let mut acc: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for (p, &l) in points.iter().zip(labels) {
        let e = acc
            .entry(l)
            .or_insert_with(|| (vec![0.0; p.len()], 0));
        for (s, v) in e.0.iter_mut().zip(p) {
            *s += v;
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(l, (mut sum, n))| {
            for s in &mut sum {
                *s /= n as f64;
            }
            (l, sum)
        })
        .collect()
}

/// Fraction of test points whose nearest training centroid carries their
/// own label. Ties break toward the smaller label, deterministically.
pub fn nearest_centroid_accuracy(
    train_points: &[Vec<f64>],
    train_labels: &[u32],
    test_points: &[Vec<f64>],
    test_labels: &[u32],
) -> f64 {
    assert_eq!(test_points.len(), test_labels.len());
    assert!(!test_points.is_empty(), "accuracy needs test points");
    let cents = centroids(train_points, train_labels);
    let mut hits = 0usize;
    for (p, &want) in test_points.iter().zip(test_labels) {
        let mut best = (f64::INFINITY, u32::MAX);
        for (&label, c) in &cents {
            let d = euclidean(p, c);
            if d < best.0 {
                best = (d, label);
            }
        }
        if best.1 == want {
            hits += 1;
        }
    }
    hits as f64 / test_points.len() as f64
}

/// Top two principal directions of a point set by power iteration with
/// deflation, and the centered points projected onto them. Deterministic:
/// fixed-seed start vectors, and each direction's sign is chosen so its
/// largest-magnitude component is positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Vec<(f64, f64)> {
    assert!(!points.is_empty(), "projection needs points");
    let d = points[0].len();
    assert!(points.iter().all(|p| p.len() == d), "ragged points");
    let n = points.len();
    let mut mean = vec![0.0f64; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // covariance (biased) in f64
    let mut cov = vec![0.0f64; d * d];
    for p in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += p[i] * p[j];
            }
        }
    }
    for c in &mut cov {
        *c /= n as f64;
    }

    let v1 = top_eigenvector(&cov, d, 1);
    let l1 = rayleigh(&cov, d, &v1);
    // deflate: cov -= l1 * v1 v1^T
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated[i * d + j] -= l1 * v1[i] * v1[j];
        }
    }
    let v2 = top_eigenvector(&deflated, d, 2);

    centered
        .iter()
        .map(|p| {
            let x = p.iter().zip(&v1).map(|(a, b)| a * b).sum();
            let y = p.iter().zip(&v2).map(|(a, b)| a * b).sum();
            (x, y)
        })
        .collect()
}

fn rayleigh(mat: &[f64], d: usize, v: &[f64]) -> f64 {
    let mut mv = vec![0.0f64; d];
    for i in 0..d {
        for j in 0..d {
            mv[i] += mat[i * d + j] * v[j];
        }
    }
    v.iter().zip(&mv).map(|(a, b)| a * b).sum()
}

fn top_eigenvector(mat: &[f64], d: usize, stream: u64) -> Vec<f64> {
    let mut rng = SeedRng::derive(0x9ca1e, stream);
    let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    normalize(&mut v);
    for _ in 0..512 {
        let mut next = vec![0.0f64; d];
        for i in 0..d {
            for j in 0..d {
                next[i] += mat[i * d + j] * v[j];
            }
        }
        let norm: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break; // zero matrix: keep the start vector
        }
        for x in &mut next {
            *x /= norm;
        }
        let drift: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if drift < 1e-14 {
            break;
        }
    }
    // sign convention: largest-magnitude component positive
    let lead = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if v[lead] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

fn normalize(v: &mut [f64]) {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use visage_core::motion::ExpressionFrame;
    use visage_core::synth::gen_basis;

    #[test]
    fn auc_matches_hand_counts() {
        assert_eq!(auc(&[3.0, 2.0], &[1.0]), 1.0);
        assert_eq!(auc(&[1.0], &[3.0, 2.0]), 0.0);
        assert_eq!(auc(&[0.9, 0.4], &[0.5, 0.1]), 0.75);
        assert_eq!(auc(&[0.5], &[0.5]), 0.5);
        assert_eq!(auc(&[1.0, 1.0], &[1.0, 0.0]), 0.75);
    }

    #[test]
    fn auc_is_brute_force_pair_counting() {
        let mut rng = SeedRng::new(8);
        for _ in 0..20 {
            let pos: Vec<f64> = (0..9).map(|_| (rng.below(12) as f64) / 4.0).collect();
            let neg: Vec<f64> = (0..7).map(|_| (rng.below(12) as f64) / 4.0).collect();
            let mut wins = 0.0;
            for p in &pos {
                for n in &neg {
                    if p > n {
                        wins += 1.0;
                    } else if p == n {
                        wins += 0.5;
                    }
                }
            }
            let brute = wins / (pos.len() * neg.len()) as f64;
            assert!((auc(&pos, &neg) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn landmark_distance_is_zero_on_identical_sequences() {
        let basis = gen_basis(3, 64).unwrap();
        let mut rng = SeedRng::new(4);
        let frames: Vec<ExpressionFrame> = (0..5)
            .map(|_| {
                let mut c = [0.0f32; 64];
                for v in &mut c {
                    *v = rng.uniform_in(-2.0, 2.0) as f32;
                }
                ExpressionFrame::new(c).unwrap()
            })
            .collect();
        let m = MotionSequence::new(frames, 30.0).unwrap();
        assert_eq!(landmark_distance(&basis, &m, &m, false).unwrap(), 0.0);
        assert_eq!(landmark_distance(&basis, &m, &m, true).unwrap(), 0.0);
    }

    #[test]
    fn landmark_distance_matches_a_direct_reconstruction() {
        // Independent oracle: reconstruct both frames' full vertex vectors
        // (mean included) and average the per-vertex distances.
        let basis = gen_basis(6, 64).unwrap();
        let mut rng = SeedRng::new(5);
        let mut mk = || {
            let mut c = [0.0f32; 64];
            for v in &mut c {
                *v = rng.uniform_in(-1.0, 1.0) as f32;
            }
            MotionSequence::new(vec![ExpressionFrame::new(c).unwrap()], 30.0).unwrap()
        };
        let a = mk();
        let b = mk();
        let p = basis.vertex_count();
        let reconstruct = |m: &MotionSequence| -> Vec<f64> {
            (0..3 * p)
                .map(|row| {
                    let mut x = basis.mean_shape[row] as f64;
                    for c in 0..64 {
                        x += basis.vertex_basis.get(row, c) as f64
                            * m.frame(0).coeffs()[c] as f64;
                    }
                    x
                })
                .collect()
        };
        let va = reconstruct(&a);
        let vb = reconstruct(&b);
        let mut want = 0.0f64;
        for v in 0..p {
            let dx = va[3 * v] - vb[3 * v];
            let dy = va[3 * v + 1] - vb[3 * v + 1];
            let dz = va[3 * v + 2] - vb[3 * v + 2];
            want += (dx * dx + dy * dy + dz * dz).sqrt();
        }
        want /= p as f64;
        let got = landmark_distance(&basis, &a, &b, false).unwrap();
        assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
    }

    #[test]
    fn mouth_distance_ignores_non_mouth_vertices() {
        // Perturb only upper-face coefficients: mouth landmarks barely move
        // because the lower 13 columns carry the mouth energy.
        let basis = gen_basis(1, 64).unwrap();
        let zero = MotionSequence::new(vec![ExpressionFrame::zeros()], 30.0).unwrap();
        let mut c = [0.0f32; 64];
        for v in c.iter_mut().skip(13) {
            *v = 1.0;
        }
        let upper = MotionSequence::new(vec![ExpressionFrame::new(c).unwrap()], 30.0).unwrap();
        let mouth = landmark_distance(&basis, &upper, &zero, true).unwrap();
        let full = landmark_distance(&basis, &upper, &zero, false).unwrap();
        assert!(
            mouth < 0.35 * full,
            "mouth {mouth} should be well below full {full}"
        );
    }

    #[test]
    fn silhouette_matches_a_hand_computed_pair_of_clusters() {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ];
        let labels = [0, 0, 1, 1];
        let a = 1.0f64;
        let b = (10.0f64 + 101.0f64.sqrt()) / 2.0;
        let want = (b - a) / b;
        let got = silhouette(&points, &labels);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn silhouette_is_poor_for_interleaved_clusters() {
        let points: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let labels = [0, 1, 0, 1, 0, 1, 0, 1];
        assert!(silhouette(&points, &labels) < 0.0);
    }

    #[test]
    fn singleton_clusters_contribute_zero() {
        let points = vec![vec![0.0], vec![0.1], vec![5.0]];
        let labels = [0, 0, 1];
        // the two label-0 points each score; the singleton adds 0
        let s = silhouette(&points, &labels);
        let a0 = 0.1;
        let b0 = 5.0;
        let a1 = 0.1;
        let b1 = 4.9;
        let want = ((b0 - a0) / b0 + (b1 - a1) / b1) / 3.0;
        assert!((s - want).abs() < 1e-12);
    }

    #[test]
    fn nearest_centroid_accuracy_matches_hand_example() {
        let train = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let train_labels = [0, 0, 1, 1];
        let test = vec![vec![0.2], vec![10.2], vec![4.0]];
        let test_labels = [0, 1, 1];
        // centroids: 0.5 and 10.5; 4.0 is nearer to 0.5 -> predicted 0 (miss)
        let acc = nearest_centroid_accuracy(&train, &train_labels, &test, &test_labels);
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pca_directions_satisfy_the_eigen_property() {
        let mut rng = SeedRng::new(17);
        let points: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a = rng.normal() * 3.0;
                let b = rng.normal();
                let c = rng.normal() * 0.2;
                vec![a + b, a - b, c + 0.5 * a, c]
            })
            .collect();
        let d = 4;
        let n = points.len();
        let mut mean = vec![0.0; d];
        for p in &points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n as f64;
            }
        }
        let mut cov = vec![0.0; d * d];
        for p in &points {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n as f64;
                }
            }
        }
        let v1 = top_eigenvector(&cov, d, 1);
        let l1 = rayleigh(&cov, d, &v1);
        let mut resid = 0.0f64;
        for i in 0..d {
            let mut mv = 0.0;
            for j in 0..d {
                mv += cov[i * d + j] * v1[j];
            }
            resid = resid.max((mv - l1 * v1[i]).abs());
        }
        assert!(resid < 1e-8 * l1.max(1.0), "eigen residual {resid}");

        // Rayleigh quotient of any direction never beats the top eigenvalue.
        for _ in 0..50 {
            let mut u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            normalize(&mut u);
            assert!(rayleigh(&cov, d, &u) <= l1 + 1e-9);
        }
    }

    #[test]
    fn pca_projection_finds_the_stretched_direction() {
        // Points stretched along a known unit direction e, with small noise.
        let e = {
            let mut e = vec![0.5f64, -0.5, 0.5, 0.5];
            normalize(&mut e);
            e
        };
        let mut rng = SeedRng::new(23);
        let points: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let along = rng.normal() * 5.0;
                (0..4)
                    .map(|i| along * e[i] + rng.normal() * 0.05)
                    .collect()
            })
            .collect();
        let proj = pca_2d(&points);
        assert_eq!(proj.len(), points.len());
        // The x coordinate must capture nearly all the variance.
        let var_x: f64 = proj.iter().map(|(x, _)| x * x).sum::<f64>() / 60.0;
        let var_y: f64 = proj.iter().map(|(_, y)| y * y).sum::<f64>() / 60.0;
        assert!(var_x > 20.0, "var_x {var_x}");
        assert!(var_y < 0.5 * var_x, "var_y {var_y} vs var_x {var_x}");
    }

    #[test]
    fn pca_is_deterministic() {
        let mut rng = SeedRng::new(3);
        let points: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.normal()).collect())
            .collect();
        assert_eq!(pca_2d(&points), pca_2d(&points));
    }

    #[test]
    fn two_cluster_codes_separate_along_the_first_axis() {
        // Brute-force oracle for the projection's headline use: when the
        // between-cluster spread dominates, axis 1 orders the centroids.
        let mut rng = SeedRng::new(31);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2u32 {
            let offset = if i == 0 { -4.0 } else { 4.0 };
            for _ in 0..15 {
                points.push(vec![
                    offset + rng.normal() * 0.3,
                    rng.normal() * 0.3,
                    rng.normal() * 0.3,
                ]);
                labels.push(i);
            }
        }
        let proj = pca_2d(&points);
        let px: Vec<Vec<f64>> = proj.iter().map(|&(x, _)| vec![x]).collect();
        let cents = centroids(&px, &labels);
        let gap = (cents[&0][0] - cents[&1][0]).abs();
        assert!(gap > 6.0, "centroid gap along axis 1 is {gap}");
        let acc = nearest_centroid_accuracy(&px, &labels, &px, &labels);
        assert_eq!(acc, 1.0);
    }
}
