//! Brute-force reference implementations for tests. Nothing here shares
//! code with `lir-core`; each routine takes the slow, obvious route.

use num_rational::Ratio;

/// Eigenvalues of a symmetric matrix (row-major `n×n`) by cyclic two-sided
/// Jacobi rotations, sorted descending.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let (vals, _) = jacobi_eigen(a, n);
    vals
}

/// Eigenvalues (descending) and matching eigenvectors as columns of a
/// row-major `n×n` matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Jᵀ A J with J the (p, q) rotation
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let vals = idx.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (dst, &src) in idx.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + dst] = v[k * n + src];
        }
    }
    (vals, vecs)
}

/// `MᵀM` for a row-major `rows×cols` matrix.
pub fn gram(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            g[i * cols + j] = (0..rows).map(|r| m[r * cols + i] * m[r * cols + j]).sum();
        }
    }
    g
}

/// Average precision in exact rational arithmetic. `hits[i]` says whether
/// the item at rank `i + 1` is relevant; `total_relevant` is the size of the
/// relevant set.
pub fn average_precision_exact(hits: &[bool], total_relevant: usize) -> Ratio<i64> {
    assert!(total_relevant > 0);
    let mut sum = Ratio::from_integer(0i64);
    for k in 1..=hits.len() {
        if hits[k - 1] {
            sum += precision_at(hits, k);
        }
    }
    sum / Ratio::from_integer(total_relevant as i64)
}

/// Precision@k by recounting the prefix from scratch.
pub fn precision_at(hits: &[bool], k: usize) -> Ratio<i64> {
    let relevant = hits[..k].iter().filter(|&&h| h).count() as i64;
    Ratio::new(relevant, k as i64)
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Ranking by exact cosine via selection sort: repeatedly pick the best
/// remaining candidate (highest cosine, then smallest id).
pub fn brute_force_ranking(query: &[f64], candidates: &[(String, Vec<f64>)]) -> Vec<String> {
    let cos = |v: &[f64]| {
        let dot: f64 = query.iter().zip(v).map(|(a, b)| a * b).sum();
        let nq = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nq == 0.0 || nv == 0.0 {
            0.0
        } else {
            dot / (nq * nv)
        }
    };
    let mut remaining: Vec<(String, f64)> = candidates.iter().map(|(id, v)| (id.clone(), cos(v))).collect();
    let mut out = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (ref id, s) = remaining[i];
            let (ref bid, bs) = remaining[best];
            if s > bs || (s == bs && id < bid) {
                best = i;
            }
        }
        out.push(remaining.remove(best).0);
    }
    out
}

/// Index of the nearest neighbour by cosine (first on ties).
pub fn nearest_neighbor(query: &[f64], candidates: &[Vec<f64>]) -> usize {
    let cos = |v: &[f64]| {
        let dot: f64 = query.iter().zip(v).map(|(a, b)| a * b).sum();
        let n = (query.iter().map(|x| x * x).sum::<f64>() * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if n == 0.0 {
            0.0
        } else {
            dot / n
        }
    };
    let mut best = 0;
    for i in 1..candidates.len() {
        if cos(&candidates[i]) > cos(&candidates[best]) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let vals = jacobi_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ap_fixture() {
        let ap = average_precision_exact(&[true, false, true], 2);
        assert_eq!(ap, Ratio::new(5, 6));
    }

    #[test]
    fn brute_ranking() {
        let c = vec![
            ("b".to_string(), vec![0.0, 1.0]),
            ("a".to_string(), vec![0.0, 2.0]),
            ("c".to_string(), vec![1.0, 0.0]),
        ];
        assert_eq!(brute_force_ranking(&[1.0, 0.0], &c), ["c", "a", "b"]);
    }
}
