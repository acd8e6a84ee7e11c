//! Agreement scores between recovered and planted structure.

use std::collections::HashMap;

use ndarray::Array2;

/// Adjusted Rand index of two labelings of the same items. Two labelings
/// that each put everything in one group score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let pairs = |c: usize| (c * c.saturating_sub(1)) as f64 / 2.0;
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sum_a * sum_b / pairs(n).max(1.0);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Pairs rows of `truth` with rows of `estimate` by repeatedly taking the
/// most similar unmatched pair. Returns `(truth_row, estimate_row, cosine)`
/// in truth-row order.
pub fn greedy_match(truth: &Array2<f64>, estimate: &Array2<f64>) -> Vec<(usize, usize, f64)> {
    let mut cands: Vec<(usize, usize, f64)> = Vec::new();
    for (i, t) in truth.rows().into_iter().enumerate() {
        for (j, e) in estimate.rows().into_iter().enumerate() {
            cands.push((i, j, cosine(&t.to_vec(), &e.to_vec())));
        }
    }
    cands.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let (mut used_t, mut used_e) = (vec![false; truth.nrows()], vec![false; estimate.nrows()]);
    let mut out = Vec::new();
    for (i, j, c) in cands {
        if !used_t[i] && !used_e[j] {
            used_t[i] = true;
            used_e[j] = true;
            out.push((i, j, c));
        }
    }
    out.sort_by_key(|m| m.0);
    out
}
