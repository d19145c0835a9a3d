use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, Vector2};

use crate::assignment::best_assignment;
use crate::error::{Error, Result};

fn check(c: f64, p: f64) -> Result<()> {
    if !(c > 0.0) || !(p >= 1.0) || !c.is_finite() || !p.is_finite() {
        return Err(Error::Argument(format!("OSPA needs c > 0 and p >= 1, got c = {c}, p = {p}")));
    }
    Ok(())
}

/// OSPA from a matrix of base distances already cut off at `c`, rows being
/// one set and columns the other.
pub fn ospa_from_distances(d: &DMatrix<f64>, c: f64, p: f64) -> Result<f64> {
    check(c, p)?;
    let (m, n) = d.shape();
    if m == 0 && n == 0 {
        return Ok(0.0);
    }
    let d = if m > n { d.transpose() } else { d.clone() };
    let (small, large) = (m.min(n), m.max(n));
    let mut total = c.powf(p) * (large - small) as f64;
    if small > 0 {
        let cost = d.map(|x| x.min(c).powf(p));
        let a = best_assignment(&cost)?.ok_or(Error::DegenerateUpdate)?;
        total += a.cols.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>();
    }
    Ok((total / large as f64).powf(1.0 / p))
}

/// OSPA distance between two point sets in the plane.
pub fn ospa(x: &[Vector2<f64>], y: &[Vector2<f64>], c: f64, p: f64) -> Result<f64> {
    let d = DMatrix::from_fn(x.len(), y.len(), |i, j| (x[i] - y[j]).norm().min(c));
    ospa_from_distances(&d, c, p)
}

/// Positions of identified tracks, keyed by step then by identity.
pub type TrackHistory<K> = BTreeMap<usize, BTreeMap<K, Vector2<f64>>>;

/// Windowed OSPA over tracks at `step`: every track present somewhere in
/// steps `step - window + 1 ..= step` takes part, and the base distance of
/// a track pair is the `p`-mean over the window steps where either exists of
/// the cut-off distance, with `c` when only one of them exists. With a
/// window of one this equals plain OSPA.
pub fn ospa2_windowed<A: Ord + Clone, B: Ord + Clone>(
    estimates: &TrackHistory<A>,
    truth: &TrackHistory<B>,
    step: usize,
    window: usize,
    c: f64,
    p: f64,
) -> Result<f64> {
    check(c, p)?;
    if window == 0 {
        return Err(Error::Argument("window must be at least 1".into()));
    }
    let steps: Vec<usize> = (step.saturating_sub(window - 1)..=step).collect();
    let empty_a = BTreeMap::new();
    let empty_b = BTreeMap::new();
    let est_at: Vec<&BTreeMap<A, Vector2<f64>>> = steps.iter().map(|k| estimates.get(k).unwrap_or(&empty_a)).collect();
    let tru_at: Vec<&BTreeMap<B, Vector2<f64>>> = steps.iter().map(|k| truth.get(k).unwrap_or(&empty_b)).collect();
    let est_ids: Vec<A> = est_at.iter().flat_map(|m| m.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let tru_ids: Vec<B> = tru_at.iter().flat_map(|m| m.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let d = DMatrix::from_fn(est_ids.len(), tru_ids.len(), |i, j| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (e, t) in est_at.iter().zip(&tru_at) {
            let dist = match (e.get(&est_ids[i]), t.get(&tru_ids[j])) {
                (Some(a), Some(b)) => (a - b).norm().min(c),
                (None, None) => continue,
                _ => c,
            };
            sum += dist.powf(p);
            count += 1;
        }
        (sum / count as f64).powf(1.0 / p)
    });
    ospa_from_distances(&d, c, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_and_one_sided() {
        assert_eq!(ospa(&[], &[], 100.0, 2.0).unwrap(), 0.0);
        assert_eq!(ospa(&[Vector2::new(0.0, 0.0)], &[], 100.0, 2.0).unwrap(), 100.0);
        assert!(ospa(&[], &[], 0.0, 2.0).is_err());
    }

    #[test]
    fn window_of_one_is_plain_ospa() {
        let mut est: TrackHistory<u32> = BTreeMap::new();
        let mut tru: TrackHistory<u32> = BTreeMap::new();
        est.entry(3).or_default().insert(7, Vector2::new(0.0, 3.0));
        est.entry(3).or_default().insert(8, Vector2::new(50.0, 0.0));
        tru.entry(3).or_default().insert(1, Vector2::new(0.0, 0.0));
        let a = ospa2_windowed(&est, &tru, 3, 1, 100.0, 2.0).unwrap();
        let b = ospa(
            &[Vector2::new(0.0, 3.0), Vector2::new(50.0, 0.0)],
            &[Vector2::new(0.0, 0.0)],
            100.0,
            2.0,
        )
        .unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}
