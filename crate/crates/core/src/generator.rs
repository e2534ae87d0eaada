//! Synthetic unions of subspaces with bounded or missing-entry corruption.
//!
//! Everything is drawn from ChaCha8 streams keyed on (seed, domain, index),
//! so outputs are bit-identical across runs and platforms for a given
//! (config, seed), and the mask stream for a column depends only on the seed
//! and the column index, never on the data values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DataMatrix, MaskMatrix, Role, SubspaceEnsemble};
use crate::{real, Col, Mat, Real};

const DOMAIN_BASIS: u64 = 1;
const DOMAIN_POINT: u64 = 2;
const DOMAIN_NOISE: u64 = 3;
const DOMAIN_MASK: u64 = 4;

/// Corruption models applied to the clean matrix Y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel<T: Real> {
    /// X = Y.
    Clean,
    /// z_i drawn uniformly from the delta-ball (direction uniform on the
    /// sphere, radius delta * U^(1/n)).
    BoundedBall { delta: T },
    /// z_i points toward a uniformly chosen *other* subspace: the projection
    /// of y_i onto it, renormalized to length delta. Stress mode; the bound
    /// ||z_i|| <= delta still holds exactly.
    AdversarialCross { delta: T },
    /// Exactly per_subspace[l] entries of each column with label l are
    /// zeroed, positions uniform without replacement.
    MissingEntries { per_subspace: Vec<usize> },
    /// Caller-provided corruption matrix, X = Y + Z.
    Explicit { corruption: Mat<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig<T: Real> {
    /// Ambient dimension n.
    pub ambient_dim: usize,
    /// Subspace dimensions d_l.
    pub dims: Vec<usize>,
    /// Sampling densities kappa_l; subspace l gets round(kappa_l * d_l) points.
    pub kappas: Vec<T>,
    pub noise: NoiseModel<T>,
    pub seed: u64,
}

impl<T: Real> GeneratorConfig<T> {
    /// Points per subspace, N_l = round(kappa_l * d_l).
    pub fn counts(&self) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.kappas)
            .map(|(&d, &k)| (crate::to_f64(k) * d as f64).round() as usize)
            .collect()
    }

    pub fn total_points(&self) -> usize {
        self.counts().iter().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.ambient_dim;
        if n == 0 {
            return Err(Error::InvalidParameter(
                "ambient_dim must be positive".into(),
            ));
        }
        if self.dims.is_empty() || self.dims.len() != self.kappas.len() {
            return Err(Error::InvalidParameter(
                "dims and kappas must be non-empty and of equal length".into(),
            ));
        }
        for (l, (&d, &k)) in self.dims.iter().zip(&self.kappas).enumerate() {
            if d == 0 || d > n {
                return Err(Error::InvalidParameter(format!(
                    "subspace {l}: dimension {d} outside 1..={n}"
                )));
            }
            if !k.is_finite() || k <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "subspace {l}: kappa must be finite and positive"
                )));
            }
        }
        for (l, (&count, &d)) in self.counts().iter().zip(&self.dims).enumerate() {
            if count < d + 1 {
                return Err(Error::InvalidParameter(format!(
                    "subspace {l}: round(kappa*d) = {count} points cannot cover \
                     dimension {d}; need at least d+1"
                )));
            }
        }
        match &self.noise {
            NoiseModel::Clean => {}
            NoiseModel::BoundedBall { delta } | NoiseModel::AdversarialCross { delta } => {
                if !delta.is_finite() || *delta < T::zero() {
                    return Err(Error::InvalidParameter(
                        "noise level delta must be finite and nonnegative".into(),
                    ));
                }
                if matches!(self.noise, NoiseModel::AdversarialCross { .. }) && self.dims.len() < 2
                {
                    return Err(Error::InvalidParameter(
                        "adversarial noise needs at least two subspaces".into(),
                    ));
                }
            }
            NoiseModel::MissingEntries { per_subspace } => {
                if per_subspace.len() != self.dims.len() {
                    return Err(Error::InvalidParameter(
                        "per_subspace missing counts must match the number of subspaces".into(),
                    ));
                }
                if per_subspace.iter().any(|&m| m >= n) {
                    return Err(Error::InvalidParameter(format!(
                        "missing counts must stay below the ambient dimension {n}"
                    )));
                }
            }
            NoiseModel::Explicit { corruption } => {
                if corruption.nrows() != n || corruption.ncols() != self.total_points() {
                    return Err(Error::DimensionMismatch(
                        "explicit corruption has the wrong shape".into(),
                    ));
                }
                if corruption.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("explicit corruption entry".into()));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset: X = Y + Z, optional observation mask, ground truth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset<T: Real> {
    pub observed: DataMatrix<T>,
    pub clean: DataMatrix<T>,
    pub corruption: Mat<T>,
    pub mask: Option<MaskMatrix>,
    pub truth: SubspaceEnsemble<T>,
}

impl<T: Real> Dataset<T> {
    /// Measured corruption level, max_i ||z_i||_2.
    pub fn max_corruption_norm(&self) -> T {
        let mut best = T::zero();
        for col in self.corruption.column_iter() {
            best = best.max(col.norm());
        }
        best
    }
}

/// splitmix64; mixes (seed, domain, index) into one stream key.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain) ^ mix(mix(index))))
}

fn standard_normal<T: Real>(rng: &mut ChaCha8Rng) -> T {
    real(rng.sample::<f64, _>(StandardNormal))
}

/// Unit vector uniform on the sphere of R^dim.
fn unit_sphere<T: Real>(dim: usize, rng: &mut ChaCha8Rng) -> Col<T> {
    loop {
        let g = Col::<T>::from_fn(dim, |_, _| standard_normal(rng));
        let norm = g.norm();
        if norm > T::zero() {
            return g / norm;
        }
    }
}

/// Haar-distributed orthonormal bases: QR of an iid Gaussian matrix with the
/// sign of each R diagonal entry fixed to +.
pub fn sample_subspaces<T: Real>(
    ambient_dim: usize,
    dims: &[usize],
    seed: u64,
) -> Result<Vec<Mat<T>>> {
    let mut bases = Vec::with_capacity(dims.len());
    for (l, &d) in dims.iter().enumerate() {
        if d == 0 || d > ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "subspace {l}: dimension {d} outside 1..={ambient_dim}"
            )));
        }
        let mut rng = stream_rng(seed, DOMAIN_BASIS, l as u64);
        let g = Mat::<T>::from_fn(ambient_dim, d, |_, _| standard_normal(&mut rng));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for k in 0..d {
            if r[(k, k)] < T::zero() {
                let negated = -q.column(k);
                q.set_column(k, &negated);
            }
        }
        bases.push(q);
    }
    Ok(bases)
}

/// Uniform unit-sphere points on each subspace; columns grouped by subspace,
/// labels in the same order.
pub fn sample_points<T: Real>(
    bases: &[Mat<T>],
    counts: &[usize],
    seed: u64,
) -> Result<(Mat<T>, Vec<usize>)> {
    if bases.len() != counts.len() {
        return Err(Error::DimensionMismatch(
            "bases and counts must have equal length".into(),
        ));
    }
    let n = bases[0].nrows();
    let total: usize = counts.iter().sum();
    let mut y = Mat::<T>::zeros(n, total);
    let mut labels = Vec::with_capacity(total);
    let mut col = 0usize;
    for (l, (u, &count)) in bases.iter().zip(counts).enumerate() {
        for _ in 0..count {
            let mut rng = stream_rng(seed, DOMAIN_POINT, col as u64);
            let coeff = unit_sphere::<T>(u.ncols(), &mut rng);
            y.set_column(col, &(u * coeff));
            labels.push(l);
            col += 1;
        }
    }
    Ok((y, labels))
}

/// Adds z_i uniform in the delta-ball to every column. Returns (X, Z).
pub fn add_bounded_noise<T: Real>(y: &Mat<T>, delta: T, seed: u64) -> (Mat<T>, Mat<T>) {
    let (n, cols) = y.shape();
    let mut z = Mat::<T>::zeros(n, cols);
    if delta > T::zero() {
        let exponent = real::<T>(1.0 / n as f64);
        for i in 0..cols {
            let mut rng = stream_rng(seed, DOMAIN_NOISE, i as u64);
            let dir = unit_sphere::<T>(n, &mut rng);
            let radius = delta * real::<T>(rng.random::<f64>()).powf(exponent);
            z.set_column(i, &(dir * radius));
        }
    }
    (y + &z, z)
}

/// Adversarial bounded corruption: z_i is the projection of y_i onto a
/// uniformly chosen other subspace, renormalized to length delta. Columns
/// whose projection is numerically zero fall back to a ball draw.
pub fn add_adversarial_noise<T: Real>(
    y: &Mat<T>,
    truth: &SubspaceEnsemble<T>,
    delta: T,
    seed: u64,
) -> Result<(Mat<T>, Mat<T>)> {
    let num = truth.num_subspaces();
    if num < 2 {
        return Err(Error::InvalidParameter(
            "adversarial noise needs at least two subspaces".into(),
        ));
    }
    let (n, cols) = y.shape();
    let mut z = Mat::<T>::zeros(n, cols);
    if delta > T::zero() {
        for i in 0..cols {
            let mut rng = stream_rng(seed, DOMAIN_NOISE, i as u64);
            let own = truth.labels[i];
            let pick = rng.random_range(0..num - 1);
            let other = if pick >= own { pick + 1 } else { pick };
            let u = &truth.bases[other];
            let proj = u * (u.transpose() * y.column(i));
            let norm = proj.norm();
            // The adversarial draw always spends the full budget delta.
            let dir = if norm > real::<T>(1e-12) {
                proj / norm
            } else {
                unit_sphere::<T>(n, &mut rng)
            };
            z.set_column(i, &(dir * delta));
        }
    }
    Ok((y + &z, z))
}

/// Zeroes exactly `per_subspace[labels[i]]` uniformly chosen entries of each
/// column. The mask stream is keyed on (seed, column) only, so it does not
/// depend on the values of `y`. Returns (zero-filled X, mask).
pub fn apply_missing<T: Real>(
    y: &Mat<T>,
    labels: &[usize],
    per_subspace: &[usize],
    seed: u64,
) -> Result<(Mat<T>, MaskMatrix)> {
    let (n, cols) = y.shape();
    if labels.len() != cols {
        return Err(Error::DimensionMismatch(
            "labels must match the number of columns".into(),
        ));
    }
    let mut x = y.clone();
    let mut observed = nalgebra::DMatrix::from_element(n, cols, true);
    for i in 0..cols {
        let l = labels[i];
        let m = *per_subspace
            .get(l)
            .ok_or_else(|| Error::LabelMismatch(format!("label {l} has no missing count")))?;
        if m >= n {
            return Err(Error::InvalidParameter(format!(
                "column {i}: cannot drop {m} of {n} entries"
            )));
        }
        // Partial Fisher-Yates: first m entries of a virtual shuffle of 0..n.
        let mut rng = stream_rng(seed, DOMAIN_MASK, i as u64);
        let mut idx: Vec<usize> = (0..n).collect();
        for k in 0..m {
            let j = k + rng.random_range(0..n - k);
            idx.swap(k, j);
            let row = idx[k];
            observed[(row, i)] = false;
            x[(row, i)] = T::zero();
        }
    }
    Ok((x, MaskMatrix { observed }))
}

/// Draws a full dataset from the config: bases, points, corruption, mask.
pub fn generate<T: Real>(config: &GeneratorConfig<T>) -> Result<Dataset<T>> {
    config.validate()?;
    let counts = config.counts();
    let bases = sample_subspaces::<T>(config.ambient_dim, &config.dims, config.seed)?;
    let (y, labels) = sample_points(&bases, &counts, config.seed)?;
    let truth = SubspaceEnsemble::new(bases, labels)?;

    let (x, z, mask) = match &config.noise {
        NoiseModel::Clean => (y.clone(), Mat::<T>::zeros(y.nrows(), y.ncols()), None),
        NoiseModel::BoundedBall { delta } => {
            let (x, z) = add_bounded_noise(&y, *delta, config.seed);
            (x, z, None)
        }
        NoiseModel::AdversarialCross { delta } => {
            let (x, z) = add_adversarial_noise(&y, &truth, *delta, config.seed)?;
            (x, z, None)
        }
        NoiseModel::MissingEntries { per_subspace } => {
            let (x, mask) = apply_missing(&y, &truth.labels, per_subspace, config.seed)?;
            let z = &x - &y;
            (x, z, Some(mask))
        }
        NoiseModel::Explicit { corruption } => (y.clone() + corruption, corruption.clone(), None),
    };

    Ok(Dataset {
        observed: DataMatrix::new(x, Role::Observed)?,
        clean: DataMatrix::new(y, Role::Clean)?,
        corruption: z,
        mask,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(noise: NoiseModel<f64>) -> GeneratorConfig<f64> {
        GeneratorConfig {
            ambient_dim: 12,
            dims: vec![3, 2],
            kappas: vec![3.0, 4.0],
            noise,
            seed: 7,
        }
    }

    #[test]
    fn counts_round_kappa_times_dim() {
        let cfg = base_config(NoiseModel::Clean);
        assert_eq!(cfg.counts(), vec![9, 8]);
        assert_eq!(cfg.total_points(), 17);
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let cfg = base_config(NoiseModel::BoundedBall { delta: 0.2 });
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.observed.values, b.observed.values);
        assert_eq!(a.clean.values, b.clean.values);
        assert_eq!(a.corruption, b.corruption);
    }

    #[test]
    fn different_seeds_differ() {
        let mut cfg = base_config(NoiseModel::Clean);
        let a = generate(&cfg).unwrap();
        cfg.seed = 8;
        let b = generate(&cfg).unwrap();
        assert_ne!(a.clean.values, b.clean.values);
    }

    #[test]
    fn bases_are_orthonormal_and_points_unit() {
        let cfg = base_config(NoiseModel::Clean);
        let ds = generate(&cfg).unwrap();
        for u in &ds.truth.bases {
            let gram = u.transpose() * u;
            let eye = Mat::<f64>::identity(u.ncols(), u.ncols());
            assert!((gram - eye).amax() < 1e-12);
        }
        for col in ds.clean.values.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        for (i, &l) in ds.truth.labels.iter().enumerate() {
            let u = &ds.truth.bases[l];
            let y = ds.clean.values.column(i);
            assert!((&y - u * (u.transpose() * &y)).norm() < 1e-12);
        }
    }

    #[test]
    fn ball_noise_stays_in_the_ball_and_matches_radius_law() {
        let delta = 0.5;
        let cfg = GeneratorConfig {
            ambient_dim: 6,
            dims: vec![2],
            kappas: vec![600.0],
            noise: NoiseModel::BoundedBall { delta },
            seed: 3,
        };
        let ds = generate(&cfg).unwrap();
        let norms: Vec<f64> = ds.corruption.column_iter().map(|c| c.norm()).collect();
        assert!(norms.iter().all(|&r| r <= delta + 1e-15));
        // E ||z|| = delta * n/(n+1); 1200 samples put the mean well within 0.01.
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        let expected = delta * 6.0 / 7.0;
        assert!(
            (mean - expected).abs() < 0.01,
            "mean radius {mean} vs {expected}"
        );
    }

    #[test]
    fn subspace_directions_are_isotropic() {
        // 1-d subspaces are uniform unit vectors: E <u, e1>^2 = 1/n.
        let n = 8;
        let trials = 2000;
        let mut acc = 0.0;
        for t in 0..trials {
            let bases = sample_subspaces::<f64>(n, &[1], t as u64).unwrap();
            acc += bases[0][(0, 0)].powi(2);
        }
        let mean = acc / trials as f64;
        assert!((mean - 1.0 / n as f64).abs() < 0.015, "mean {mean}");
    }

    #[test]
    fn sphere_points_have_near_zero_mean() {
        let cfg = GeneratorConfig {
            ambient_dim: 3,
            dims: vec![3],
            kappas: vec![700.0],
            noise: NoiseModel::Clean,
            seed: 11,
        };
        let ds = generate(&cfg).unwrap();
        let cols = ds.clean.values.ncols() as f64;
        let mean = ds.clean.values.column_sum() / cols;
        assert!(mean.norm() < 0.05, "mean norm {}", mean.norm());
    }

    #[test]
    fn missing_entries_are_exact_and_value_independent() {
        let cfg = base_config(NoiseModel::MissingEntries {
            per_subspace: vec![4, 2],
        });
        let ds = generate(&cfg).unwrap();
        let mask = ds.mask.as_ref().unwrap();
        for (i, &l) in ds.truth.labels.iter().enumerate() {
            let dropped = 12 - mask.observed_count(i);
            assert_eq!(dropped, [4, 2][l]);
            for row in 0..12 {
                if mask.observed[(row, i)] {
                    assert_eq!(ds.observed.values[(row, i)], ds.clean.values[(row, i)]);
                } else {
                    assert_eq!(ds.observed.values[(row, i)], 0.0);
                }
            }
        }
        // Same labels and seed, different values: identical mask.
        let other = Mat::<f64>::from_fn(12, 17, |r, c| (r * 17 + c) as f64);
        let (_, mask2) = apply_missing(&other, &ds.truth.labels, &[4, 2], cfg.seed).unwrap();
        assert_eq!(mask.observed, mask2.observed);
    }

    #[test]
    fn adversarial_noise_has_exact_budget_and_points_at_other_subspaces() {
        let cfg = base_config(NoiseModel::AdversarialCross { delta: 0.3 });
        let ds = generate(&cfg).unwrap();
        for col in ds.corruption.column_iter() {
            assert!((col.norm() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = base_config(NoiseModel::Clean);
        cfg.kappas = vec![0.5, 4.0]; // round(0.5*3) = 2 < d+1
        assert!(generate(&cfg).is_err());

        let cfg = base_config(NoiseModel::MissingEntries {
            per_subspace: vec![12, 0],
        });
        assert!(generate(&cfg).is_err());

        let cfg = GeneratorConfig::<f64> {
            ambient_dim: 12,
            dims: vec![3],
            kappas: vec![3.0],
            noise: NoiseModel::AdversarialCross { delta: 0.1 },
            seed: 0,
        };
        assert!(generate(&cfg).is_err());

        let cfg = base_config(NoiseModel::Explicit {
            corruption: Mat::<f64>::zeros(12, 3),
        });
        assert!(generate(&cfg).is_err());
    }
}
