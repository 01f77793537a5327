//! Support-volume bookkeeping for evolving classical ensembles: total,
//! observed and unobserved covariance volumes under symplectic flows.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::linalg::{symmetric_eigen_sorted, EigenReal};
use crate::scalar::Real;

/// Smallest ensemble accepted by [`track_volumes`].
pub const MIN_ENSEMBLE: usize = 1000;

/// Flow on phase-space points `x = (q_1..q_n, p_1..p_n)`.
pub trait PhaseFlow<T>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], t: T) -> Vec<T>;
}

/// Identity flow.
#[derive(Clone, Copy, Debug)]
pub struct Identity {
    pub dim: usize,
}

impl<T: Real> PhaseFlow<T> for Identity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], _t: T) -> Vec<T> {
        x.to_vec()
    }
}

/// Free-particle shear `q_i → q_i + p_i t` on `pairs` degrees of freedom.
#[derive(Clone, Copy, Debug)]
pub struct Shear {
    pub pairs: usize,
}

impl<T: Real> PhaseFlow<T> for Shear {
    fn dim(&self) -> usize {
        2 * self.pairs
    }

    fn apply(&self, x: &[T], t: T) -> Vec<T> {
        let n = self.pairs;
        let mut y = x.to_vec();
        for i in 0..n {
            y[i] = x[i] + x[n + i] * t;
        }
        y
    }
}

/// Harmonic rotation with frequency `omega` on every pair.
#[derive(Clone, Copy, Debug)]
pub struct Rotation<T> {
    pub pairs: usize,
    pub omega: T,
}

impl<T: Real> PhaseFlow<T> for Rotation<T> {
    fn dim(&self) -> usize {
        2 * self.pairs
    }

    fn apply(&self, x: &[T], t: T) -> Vec<T> {
        let n = self.pairs;
        let (c, s) = ((self.omega * t).cos(), (self.omega * t).sin());
        let mut y = x.to_vec();
        for i in 0..n {
            y[i] = c * x[i] + s * x[n + i] / self.omega;
            y[n + i] = -s * self.omega * x[i] + c * x[n + i];
        }
        y
    }
}

/// Uncorrelated Gaussian cloud, one point per row.
pub fn gaussian_ensemble<T: Real>(
    size: usize,
    means: &[T],
    stds: &[T],
    seed: u64,
) -> Result<DMatrix<T>> {
    if means.len() != stds.len() || means.is_empty() {
        return Err(invalid(
            "means and standard deviations must have equal, nonzero length",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists = stds
        .iter()
        .map(|s| Normal::new(0.0, s.as_f64()).map_err(|e| invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = DMatrix::from_element(size, means.len(), T::zero());
    for r in 0..size {
        for (c, d) in dists.iter().enumerate() {
            out[(r, c)] = means[c] + T::lit(d.sample(&mut rng));
        }
    }
    Ok(out)
}

/// Sample covariance of the selected columns.
pub fn covariance<T: Real>(points: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    let n = points.nrows();
    let nf = T::from_usize_lossy(n);
    let means: Vec<T> = cols
        .iter()
        .map(|&c| points.column(c).iter().copied().sum::<T>() / nf)
        .collect();
    let k = cols.len();
    let mut cov = DMatrix::from_element(k, k, T::zero());
    for a in 0..k {
        for b in a..k {
            let mut s = T::zero();
            for r in 0..n {
                s += (points[(r, cols[a])] - means[a]) * (points[(r, cols[b])] - means[b]);
            }
            let v = s / T::from_usize_lossy(n - 1);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// Covariance-ellipsoid proxy `√det Σ`; on rank deficiency the product of the
/// nonzero eigenvalues is used and the fallback flag set.
pub fn covariance_volume<T: EigenReal>(cov: &DMatrix<T>) -> (T, bool) {
    let (values, _) = symmetric_eigen_sorted(cov);
    let top = values
        .iter()
        .fold(T::zero(), |m, &v| num_traits::Float::max(m, v));
    let cutoff = top * T::lit(1e-12);
    let mut prod = T::one();
    let mut degenerate = false;
    for &v in &values {
        if v > cutoff {
            prod *= v;
        } else {
            degenerate = true;
        }
    }
    (num_traits::Float::sqrt(prod), degenerate)
}

/// Area of the convex hull of 2-D points (monotone chain).
pub fn hull_area_2d<T: Real>(pts: &[(T, T)]) -> T {
    let mut p: Vec<(T, T)> = pts.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    p.dedup();
    if p.len() < 3 {
        return T::zero();
    }
    let cross =
        |o: (T, T), a: (T, T), b: (T, T)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(T, T)> = Vec::with_capacity(2 * p.len());
    for &pt in p.iter().chain(p.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= T::zero()
        {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    let mut area = T::zero();
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        area += a.0 * b.1 - b.0 * a.1;
    }
    area.abs() * T::lit(0.5)
}

/// Hull volume of the selected coordinates; supports one or two columns.
pub fn hull_volume<T: Real>(points: &DMatrix<T>, cols: &[usize]) -> Result<T> {
    match cols {
        [c] => {
            let col = points.column(*c);
            let (lo, hi) = col
                .iter()
                .fold((T::infinity(), T::neg_infinity()), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            Ok(hi - lo)
        }
        [a, b] => {
            let pts: Vec<(T, T)> = (0..points.nrows())
                .map(|r| (points[(r, *a)], points[(r, *b)]))
                .collect();
            Ok(hull_area_2d(&pts))
        }
        _ => Err(LabError::Unsupported(
            "hull volumes are provided for one or two coordinates".into(),
        )),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeTrack {
    pub times: Vec<f64>,
    pub v_total: Vec<f64>,
    pub v_observed: Vec<f64>,
    pub v_unobserved: Vec<f64>,
    pub product_ratio: Vec<f64>,
    /// Some covariance was rank deficient and used the pseudo-volume.
    pub pseudo_volume: bool,
    /// Largest `|v_total(t)/v_total(0) - 1|`.
    pub total_drift: f64,
    pub band: (f64, f64),
    /// Indices of samples whose product ratio leaves the band.
    pub out_of_band: Vec<usize>,
}

impl VolumeTrack {
    /// Builds a track from raw series, computing ratio, drift and band flags.
    pub fn from_series(
        times: Vec<f64>,
        v_total: Vec<f64>,
        v_observed: Vec<f64>,
        v_unobserved: Vec<f64>,
        band: (f64, f64),
    ) -> Result<Self> {
        let n = times.len();
        if v_total.len() != n || v_observed.len() != n || v_unobserved.len() != n || n == 0 {
            return Err(invalid("volume series must share the time axis"));
        }
        if v_total
            .iter()
            .chain(&v_observed)
            .chain(&v_unobserved)
            .any(|v| !(*v > 0.0))
        {
            return Err(invalid("volumes must be positive"));
        }
        let product_ratio: Vec<f64> = (0..n)
            .map(|i| v_observed[i] * v_unobserved[i] / v_total[i])
            .collect();
        let total_drift = v_total
            .iter()
            .map(|v| (v / v_total[0] - 1.0).abs())
            .fold(0.0, f64::max);
        let out_of_band = product_ratio
            .iter()
            .enumerate()
            .filter(|(_, r)| **r < band.0 || **r > band.1)
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            times,
            v_total,
            v_observed,
            v_unobserved,
            product_ratio,
            pseudo_volume: false,
            total_drift,
            band,
            out_of_band,
        })
    }

    /// CSV rows `t,v_total,v_observed,v_unobserved,product_ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v_total,v_observed,v_unobserved,product_ratio\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.times[i],
                self.v_total[i],
                self.v_observed[i],
                self.v_unobserved[i],
                self.product_ratio[i]
            );
        }
        out
    }
}

/// Default flagged band for the product ratio.
pub const DEFAULT_BAND: (f64, f64) = (0.5, 2.0);

/// Evolves the ensemble and records covariance volumes of all, observed and
/// unobserved coordinates at each time.
pub fn track_volumes<T: EigenReal, F: PhaseFlow<T>>(
    ensemble: &DMatrix<T>,
    flow: &F,
    observed: &[usize],
    times: &[T],
    band: (f64, f64),
) -> Result<VolumeTrack> {
    let dim = flow.dim();
    if ensemble.ncols() != dim {
        return Err(invalid(
            "ensemble dimension differs from the flow dimension",
        ));
    }
    if ensemble.nrows() < MIN_ENSEMBLE {
        return Err(invalid(format!(
            "ensemble needs at least {MIN_ENSEMBLE} points"
        )));
    }
    let mut seen = vec![false; dim];
    for &i in observed {
        if i >= dim || seen[i] {
            return Err(invalid("observed indices must be distinct coordinates"));
        }
        seen[i] = true;
    }
    if observed.is_empty() || observed.len() == dim {
        return Err(invalid(
            "observed and unobserved sets must both be nonempty",
        ));
    }
    let unobserved: Vec<usize> = (0..dim).filter(|i| !seen[*i]).collect();
    let all: Vec<usize> = (0..dim).collect();
    let mut series = (Vec::new(), Vec::new(), Vec::new());
    let mut pseudo = false;
    for &t in times {
        let rows: Vec<Vec<T>> = (0..ensemble.nrows())
            .into_par_iter()
            .map(|r| {
                let x: Vec<T> = ensemble.row(r).iter().copied().collect();
                flow.apply(&x, t)
            })
            .collect();
        let moved = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
        let mut vol = |cols: &[usize]| {
            let (v, d) = covariance_volume(&covariance(&moved, cols));
            pseudo |= d;
            v.as_f64()
        };
        series.0.push(vol(&all));
        series.1.push(vol(observed));
        series.2.push(vol(&unobserved));
    }
    let mut track = VolumeTrack::from_series(
        times.iter().map(|t| t.as_f64()).collect(),
        series.0,
        series.1,
        series.2,
        band,
    )?;
    track.pseudo_volume = pseudo;
    Ok(track)
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationVerdict {
    pub localizes: bool,
    pub observed_slope: f64,
    pub unobserved_slope: f64,
    /// Two-sided confidence interval of the observed slope.
    pub observed_interval: (f64, f64),
    pub total_conserved: bool,
    pub observed_fit: LinearFit,
}

/// Relative drift of the total volume tolerated by the verdict.
pub const TOTAL_DRIFT_LIMIT: f64 = 1e-6;

/// Fits `log v` against `t`; localization needs a significantly negative
/// observed slope at the given confidence and a conserved total volume.
pub fn localization_verdict(track: &VolumeTrack, confidence: f64) -> Result<LocalizationVerdict> {
    if track.times.len() < 5 {
        return Err(invalid(
            "localization verdict needs at least 5 time samples",
        ));
    }
    let logs = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    let fit_obs = linear_fit(&track.times, &logs(&track.v_observed))
        .ok_or_else(|| invalid("time samples must not all coincide"))?;
    let fit_un = linear_fit(&track.times, &logs(&track.v_unobserved))
        .ok_or_else(|| invalid("time samples must not all coincide"))?;
    let interval = fit_obs.slope_interval(confidence);
    let total_conserved = track.total_drift < TOTAL_DRIFT_LIMIT;
    Ok(LocalizationVerdict {
        localizes: interval.1 < 0.0 && total_conserved,
        observed_slope: fit_obs.slope,
        unobserved_slope: fit_un.slope,
        observed_interval: interval,
        total_conserved,
        observed_fit: fit_obs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(var_q: f64, var_p: f64, seed: u64) -> DMatrix<f64> {
        gaussian_ensemble(4000, &[0.0, 0.0], &[var_q.sqrt(), var_p.sqrt()], seed).unwrap()
    }

    #[test]
    fn shear_conserves_total_and_tracks_covariance() {
        let pts = cloud(1.0, 1e-3, 7);
        let times: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
        let track = track_volumes(&pts, &Shear { pairs: 1 }, &[0], &times, (0.9, 1.1)).unwrap();
        assert!(track.total_drift < 1e-6, "{}", track.total_drift);
        assert!(track.out_of_band.is_empty(), "{:?}", track.product_ratio);
        // covariance propagation: var_q(t) = var_q + 2t cov + t² var_p
        let c = covariance(&pts, &[0, 1]);
        for (t, v) in times.iter().zip(&track.v_observed) {
            let exact = (c[(0, 0)] + 2.0 * t * c[(0, 1)] + t * t * c[(1, 1)]).sqrt();
            assert!((v - exact).abs() < 1e-9 * exact);
        }
        let v0 = track.v_unobserved[0];
        assert!(track
            .v_unobserved
            .iter()
            .all(|v| (v - v0).abs() < 1e-12 * v0));
        let verdict = localization_verdict(&track, 0.95).unwrap();
        assert!(!verdict.localizes);
        assert!(verdict.observed_slope > 0.0);
    }

    #[test]
    fn identity_and_rotation() {
        let pts = cloud(0.5, 2.0, 3);
        let times: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let id = track_volumes(&pts, &Identity { dim: 2 }, &[1], &times, DEFAULT_BAND).unwrap();
        assert!(id.v_observed.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(id.total_drift, 0.0);
        let rot = track_volumes(
            &pts,
            &Rotation {
                pairs: 1,
                omega: 1.3,
            },
            &[0],
            &times,
            DEFAULT_BAND,
        )
        .unwrap();
        assert!(rot.total_drift < 1e-10);
        let v = localization_verdict(&id, 0.95).unwrap();
        assert!(!v.localizes);
        assert_eq!(v.observed_slope, 0.0);
    }

    #[test]
    fn synthetic_contracting_track_localizes() {
        let times: Vec<f64> = (0..10).map(|i| 0.3 * i as f64).collect();
        let obs: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let un: Vec<f64> = times.iter().map(|t| t.exp()).collect();
        let track =
            VolumeTrack::from_series(times.clone(), vec![1.0; 10], obs, un, DEFAULT_BAND).unwrap();
        let v = localization_verdict(&track, 0.95).unwrap();
        assert!(v.localizes);
        assert!((v.observed_slope + 1.0).abs() < 1e-12);
        assert!((v.unobserved_slope - 1.0).abs() < 1e-12);
        let short = VolumeTrack::from_series(
            vec![0.0, 1.0],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![1.0; 2],
            DEFAULT_BAND,
        )
        .unwrap();
        assert!(localization_verdict(&short, 0.95).is_err());
    }

    #[test]
    fn hull_cross_check_for_uniform_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = rand_distr::Uniform::new(0.0, 1.0).unwrap();
        let pts: Vec<(f64, f64)> = (0..5000)
            .map(|_| (u.sample(&mut rng), u.sample(&mut rng)))
            .collect();
        let a = hull_area_2d(&pts);
        assert!(a < 1.0 && a > 0.98);
        let tri: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.2, 0.2)];
        assert!((hull_area_2d(&tri) - 0.5).abs() < 1e-15);
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 3.0, 2.0, 1.0]);
        assert_eq!(hull_volume(&m, &[0]).unwrap(), 3.0);
        assert!(hull_volume(&m, &[0, 1, 2]).is_err());
        // covariance proxy of a unit-variance Gaussian tracks the hull up to a fixed factor
        let g = gaussian_ensemble(3000, &[0.0, 0.0], &[1.0, 1.0], 2).unwrap();
        let (v, _): (f64, bool) = covariance_volume(&covariance(&g, &[0, 1]));
        assert!((v - 1.0).abs() < 0.1);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let mut pts = cloud(1.0, 1.0, 5);
        for r in 0..pts.nrows() {
            pts[(r, 1)] = 2.0 * pts[(r, 0)];
        }
        let (_, degenerate) = covariance_volume(&covariance(&pts, &[0, 1]));
        assert!(degenerate);
        let times = [0.0, 1.0];
        let track = track_volumes(&pts, &Identity { dim: 2 }, &[0], &times, DEFAULT_BAND).unwrap();
        assert!(track.pseudo_volume);
        assert!(track_volumes(&pts, &Identity { dim: 2 }, &[0, 1], &times, DEFAULT_BAND).is_err());
        assert!(track_volumes(&pts, &Identity { dim: 2 }, &[2], &times, DEFAULT_BAND).is_err());
        let small = gaussian_ensemble(10, &[0.0, 0.0], &[1.0, 1.0], 1).unwrap();
        assert!(track_volumes(&small, &Identity { dim: 2 }, &[0], &times, DEFAULT_BAND).is_err());
        let csv = track.to_csv();
        assert!(csv.starts_with("t,v_total,v_observed,v_unobserved,product_ratio\n"));
    }
}
