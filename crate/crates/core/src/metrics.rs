//! Clustering evaluation: optimal cluster-to-class matching, accuracy, NMI
//! (geometric-mean normalization) and the adjusted Rand index.

use crate::error::{Error, Result};

/// Square contingency table, `counts[c][t]` = points in cluster `c` with
/// true class `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let rows = counts.len();
        for r in &counts {
            if r.len() != rows {
                return Err(Error::NonSquare {
                    rows,
                    cols: r.len(),
                });
            }
        }
        Ok(ConfusionMatrix { counts })
    }

    /// Builds a `k×k` table, where `k` covers every label that occurs.
    pub fn from_labels(pred: &[usize], truth: &[usize]) -> Result<Self> {
        check_lengths(pred, truth)?;
        let k = pred.iter().chain(truth).map(|&v| v + 1).max().unwrap_or(0);
        let mut counts = vec![vec![0u64; k]; k];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, cluster: usize, class: usize) -> u64 {
        self.counts[cluster][class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

/// Permutation `π` (cluster → class) maximizing `Σ_c counts[c][π(c)]`.
///
/// Shortest augmenting paths with row/column potentials, O(K³).
pub fn hungarian_match(cm: &ConfusionMatrix) -> Vec<usize> {
    let n = cm.k();
    if n == 0 {
        return Vec::new();
    }
    let max = cm.counts.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimize max − count; 1-based arrays with a virtual column 0.
    let cost = |i: usize, j: usize| max - cm.counts[i - 1][j - 1] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Fraction of points whose cluster maps to their class under the best
/// one-to-one matching.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let cm = ConfusionMatrix::from_labels(pred, truth)?;
    let perm = hungarian_match(&cm);
    let hits: u64 = perm.iter().enumerate().map(|(c, &t)| cm.get(c, t)).sum();
    Ok(hits as f64 / pred.len() as f64)
}

/// Fraction of points whose predicted class equals the true class.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64)
}

/// A partition-comparison score with a flag for inputs where the score is
/// undefined (a partition with a single block) and `value` is set to 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionScore {
    pub value: f64,
    pub degenerate: bool,
}

struct Contingency {
    table: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
    n: u64,
}

fn contingency(pred: &[usize], truth: &[usize]) -> Result<Contingency> {
    check_lengths(pred, truth)?;
    let kp = pred.iter().max().map_or(0, |&m| m + 1);
    let kt = truth.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0u64; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
    }
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..kt).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        table,
        rows,
        cols,
        n: pred.len() as u64,
    })
}

fn blocks(sizes: &[u64]) -> usize {
    sizes.iter().filter(|&&s| s > 0).count()
}

fn entropy(sizes: &[u64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(C; T) / √(H(C) H(T))`.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<PartitionScore> {
    let c = contingency(pred, truth)?;
    if blocks(&c.rows) < 2 || blocks(&c.cols) < 2 {
        return Ok(PartitionScore {
            value: 0.0,
            degenerate: true,
        });
    }
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    let denom = (entropy(&c.rows, n) * entropy(&c.cols, n)).sqrt();
    Ok(PartitionScore {
        value: (mi / denom).clamp(0.0, 1.0),
        degenerate: false,
    })
}

fn pairs(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index with the permutation-model expectation.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<PartitionScore> {
    let c = contingency(pred, truth)?;
    let index: f64 = c.table.iter().flatten().map(|&v| pairs(v)).sum();
    let a: f64 = c.rows.iter().map(|&v| pairs(v)).sum();
    let b: f64 = c.cols.iter().map(|&v| pairs(v)).sum();
    let total = pairs(c.n);
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = 0.5 * (a + b);
    let denom = max - expected;
    let single = blocks(&c.rows) < 2 || blocks(&c.cols) < 2;
    if denom == 0.0 {
        return Ok(PartitionScore {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(PartitionScore {
        value: (index - expected) / denom,
        degenerate: single,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cm: &ConfusionMatrix) -> u64 {
        fn rec(cm: &ConfusionMatrix, row: usize, used: &mut Vec<bool>) -> u64 {
            if row == cm.k() {
                return 0;
            }
            let mut best = 0;
            for j in 0..cm.k() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(cm.get(row, j) + rec(cm, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cm, 0, &mut vec![false; cm.k()])
    }

    #[test]
    fn diagonal_and_anti_diagonal() {
        let d = ConfusionMatrix::new(vec![vec![5, 0, 0], vec![0, 5, 0], vec![0, 0, 5]]).unwrap();
        assert_eq!(hungarian_match(&d), vec![0, 1, 2]);
        let a = ConfusionMatrix::new(vec![vec![0, 0, 5], vec![0, 5, 0], vec![5, 0, 0]]).unwrap();
        assert_eq!(hungarian_match(&a), vec![2, 1, 0]);
    }

    #[test]
    fn matches_brute_force_on_a_fixed_matrix() {
        let cm = ConfusionMatrix::new(vec![
            vec![3, 9, 1, 4, 7],
            vec![8, 2, 6, 0, 5],
            vec![1, 1, 9, 3, 2],
            vec![4, 7, 2, 8, 1],
            vec![6, 3, 5, 2, 9],
        ])
        .unwrap();
        let perm = hungarian_match(&cm);
        let got: u64 = perm.iter().enumerate().map(|(c, &t)| cm.get(c, t)).sum();
        assert_eq!(got, brute_force(&cm));
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(
            ConfusionMatrix::new(vec![vec![1, 2], vec![3]]),
            Err(Error::NonSquare { .. })
        ));
    }

    #[test]
    fn accuracy_examples() {
        let t = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 2, 0, 0, 1, 1], &t).unwrap(), 1.0);
        let truth = [0, 0, 0, 0, 1, 1, 1, 1];
        let pred = [0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&pred, &truth).unwrap(), 0.5);
        assert!(matches!(
            clustering_accuracy(&[0], &[0, 1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn nmi_ari_examples() {
        let t = [0, 1, 2, 0, 1, 2, 2];
        let p = [1, 2, 0, 1, 2, 0, 0];
        assert!((nmi(&p, &t).unwrap().value - 1.0).abs() < 1e-12);
        assert!((ari(&p, &t).unwrap().value - 1.0).abs() < 1e-12);
        let single = nmi(&[0; 7], &t).unwrap();
        assert_eq!(
            single,
            PartitionScore {
                value: 0.0,
                degenerate: true
            }
        );
        let a = ari(&[0; 7], &t).unwrap();
        assert_eq!(a.value, 0.0);
        assert!(a.degenerate);
    }

    #[test]
    fn ari_known_value() {
        // Two blocks each; contingency [[2, 1], [0, 3]].
        let p = [0, 0, 0, 1, 1, 1];
        let t = [0, 0, 1, 1, 1, 1];
        // index = 1 + 3 = 4, a = 3 + 3 = 6, b = 1 + 6 = 7, total = 15.
        let expected = (4.0 - 6.0 * 7.0 / 15.0) / (6.5 - 6.0 * 7.0 / 15.0);
        assert!((ari(&p, &t).unwrap().value - expected).abs() < 1e-15);
    }
}
