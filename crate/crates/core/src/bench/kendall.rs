use crate::error::{Error, Result};

/// Tie-adjusted Kendall rank correlation (τ-b).
///
/// Runs in O(n log n): sort by `a`, then count the inversions a merge sort
/// on `b` has to undo. `-0.0` and `0.0` compare equal; NaN is rejected.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewObservations(n));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Config("Kendall tau input contains NaN".into()));
    }
    let norm = |v: f64| if v == 0.0 { 0.0 } else { v };
    let mut pairs: Vec<(f64, f64)> = a.iter().zip(b).map(|(&x, &y)| (norm(x), norm(y))).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let n0 = (n * (n - 1) / 2) as u64;
    let tied_a = tied_pairs(&pairs, |p, q| p.0 == q.0);
    let tied_ab = tied_pairs(&pairs, |p, q| p == q);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let tied_b = tied_pairs(&ys, |p, q| p == q);

    if tied_a == n0 || tied_b == n0 {
        return Err(Error::AllTied);
    }
    let num = n0 as f64 - tied_a as f64 - tied_b as f64 + tied_ab as f64 - 2.0 * swaps as f64;
    let den = ((n0 - tied_a) as f64 * (n0 - tied_b) as f64).sqrt();
    Ok((num / den).clamp(-1.0, 1.0))
}

/// Pairs inside runs of equal adjacent elements of a sorted slice.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` ascending, returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo) + merge_count(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}
