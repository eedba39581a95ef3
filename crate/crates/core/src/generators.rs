//! Seeded synthetic regressors, parameter matrices and noise.
//!
//! Every generator draws from a `ChaCha8Rng` seeded with the spec seed, on
//! a stream reserved for its purpose, so outputs are bitwise reproducible.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth, IndexSet};
use crate::error::{Error, Result};

const STREAM_NOISE: u64 = 1 << 32;
const STREAM_TRUTH: u64 = 2 << 32;
const MAX_RETRIES: u64 = 5;
/// Trajectories leaving this range are treated as divergent.
const DIVERGENCE_LIMIT: f64 = 1e12;

/// Subsystem parameters `(a_i, b_i)` of the switched system.
pub const SWITCHED_PARAMS: [(f64, f64); 3] = [(-0.40, -0.15), (1.55, -2.10), (1.0, -0.65)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianStatic,
    SwitchedArx,
    LinearArx,
    Narx,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] = [
        GeneratorKind::GaussianStatic,
        GeneratorKind::SwitchedArx,
        GeneratorKind::LinearArx,
        GeneratorKind::Narx,
    ];

    fn stream(self) -> u64 {
        match self {
            GeneratorKind::GaussianStatic => 0,
            GeneratorKind::SwitchedArx => 1,
            GeneratorKind::LinearArx => 2,
            GeneratorKind::Narx => 3,
        }
    }

    pub fn is_dynamic(self) -> bool {
        self != GeneratorKind::GaussianStatic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    /// Standard deviation of the white input of dynamic systems.
    pub input_std: f64,
    /// Samples simulated and discarded before recording.
    pub burn_in: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            input_std: 1.0,
            burn_in: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(default)]
    pub params: GeneratorParams,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, big_n: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            big_n,
            params: GeneratorParams::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.big_n < self.n + 1 {
            return Err(Error::InvalidArgument(format!(
                "N = {} must be at least n + 1 = {}",
                self.big_n,
                self.n + 1
            )));
        }
        if self.kind.is_dynamic() && self.n != 2 {
            return Err(Error::InvalidArgument(format!(
                "{:?} produces the regressor (y[t-1], u[t-1]); n must be 2, got {}",
                self.kind, self.n
            )));
        }
        if !(self.params.input_std >= 0.0) || !self.params.input_std.is_finite() {
            return Err(Error::InvalidArgument("input_std must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    pub x: DMatrix<f64>,
    /// True when every entry is zero.
    pub degenerate: bool,
    /// Number of reseeds needed after divergent trajectories.
    pub retries: u64,
}

/// Generates the `n x N` regressor matrix described by `spec`.
pub fn gen_regressors(spec: &GeneratorSpec) -> Result<Regressors> {
    spec.validate()?;
    for attempt in 0..=MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.kind.stream() | (attempt << 8));
        if let Some(x) = simulate(spec, &mut rng) {
            let degenerate = x.iter().all(|v| *v == 0.0);
            return Ok(Regressors {
                x,
                degenerate,
                retries: attempt,
            });
        }
    }
    Err(Error::Numerical(format!(
        "trajectory diverged after {MAX_RETRIES} reseeds for {spec:?}"
    )))
}

fn simulate(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Option<DMatrix<f64>> {
    let big_n = spec.big_n;
    if spec.kind == GeneratorKind::GaussianStatic {
        return Some(DMatrix::from_fn(spec.n, big_n, |_, _| StandardNormal.sample(rng)));
    }
    let input = Normal::new(0.0, spec.params.input_std).ok()?;
    let total = spec.params.burn_in + big_n;
    let mut x = DMatrix::zeros(2, big_n);
    let (mut y_prev, mut u_prev) = (0.0_f64, 0.0_f64);
    for t in 0..total {
        if t >= spec.params.burn_in {
            let c = t - spec.params.burn_in;
            x[(0, c)] = y_prev;
            x[(1, c)] = u_prev;
        }
        let y = match spec.kind {
            GeneratorKind::SwitchedArx => {
                let (a, b) = SWITCHED_PARAMS[rng.random_range(0..3)];
                a * y_prev + b * u_prev
            }
            GeneratorKind::LinearArx => {
                let (a, b) = SWITCHED_PARAMS[0];
                a * y_prev + b * u_prev
            }
            GeneratorKind::Narx => (y_prev + 2.5) / (1.0 + y_prev * y_prev) + u_prev,
            GeneratorKind::GaussianStatic => unreachable!(),
        };
        if !y.is_finite() || y.abs() > DIVERGENCE_LIMIT {
            return None;
        }
        y_prev = y;
        u_prev = input.sample(rng);
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub outlier_fraction: f64,
    #[serde(default = "default_amplitude")]
    pub outlier_amplitude: f64,
    #[serde(default)]
    pub dense_bound: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    1e6
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidArgument(format!(
                "outlier_fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        if !(self.outlier_amplitude > 0.0) || !self.outlier_amplitude.is_finite() {
            return Err(Error::InvalidArgument("outlier_amplitude must be positive".into()));
        }
        if !(self.dense_bound >= 0.0) || !self.dense_bound.is_finite() {
            return Err(Error::InvalidArgument("dense_bound must be nonnegative".into()));
        }
        Ok(())
    }

    /// `floor(outlier_fraction * N)`, guarded against the product landing
    /// just below an integer in floating point.
    pub fn outlier_count(&self, big_n: usize) -> usize {
        let p = self.outlier_fraction * big_n as f64;
        (p + 1e-9 * p.max(1.0)).floor() as usize
    }

    /// Fraction producing exactly `d` outliers among `big_n` columns.
    pub fn fraction_for(d: usize, big_n: usize) -> f64 {
        d as f64 / big_n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    pub y: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub s0: IndexSet,
    pub sc: IndexSet,
}

impl NoisyData {
    pub fn dataset(&self, x: &DMatrix<f64>) -> Result<Dataset> {
        Dataset::new(self.y.clone(), x.clone())
    }

    pub fn ground_truth(&self, a0: &DMatrix<f64>) -> GroundTruth {
        GroundTruth {
            a0: a0.clone(),
            e: self.e.clone(),
            f: self.f.clone(),
        }
    }
}

/// Forms `Y = A0 X + E + F` with uniformly bounded dense noise `E` and
/// `floor(fraction * N)` outlier columns in `F`.
pub fn inject_noise(x: &DMatrix<f64>, a0: &DMatrix<f64>, noise: &NoiseSpec) -> Result<NoisyData> {
    noise.validate()?;
    if a0.ncols() != x.nrows() {
        return Err(Error::Shape(format!(
            "A0 has {} columns but X has {} rows",
            a0.ncols(),
            x.nrows()
        )));
    }
    let (m, big_n) = (a0.nrows(), x.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(STREAM_NOISE);

    let count = noise.outlier_count(big_n);
    let sc = IndexSet::from_indices(sample(&mut rng, big_n, count).into_vec());
    let mut f = DMatrix::zeros(m, big_n);
    for t in sc.iter() {
        let mut col: nalgebra::DVector<f64> =
            nalgebra::DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        while col.norm() == 0.0 {
            col = nalgebra::DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        }
        col *= noise.outlier_amplitude / col.norm();
        f.set_column(t, &col);
    }
    let b = noise.dense_bound;
    let e = if b > 0.0 {
        DMatrix::from_fn(m, big_n, |_, _| rng.random_range(-b..=b))
    } else {
        DMatrix::zeros(m, big_n)
    };
    let y = a0 * x + &e + &f;
    Ok(NoisyData {
        y,
        e,
        f,
        s0: sc.complement(big_n),
        sc,
    })
}

/// Standard Gaussian `m x n` parameter matrix.
pub fn ground_truth_matrix(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("ground truth needs m, n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_TRUTH);
    Ok(DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize_regressors, partition_outliers};

    #[test]
    fn gaussian_shape_and_normalization() {
        let r = gen_regressors(&GeneratorSpec::new(GeneratorKind::GaussianStatic, 2, 200, 1)).unwrap();
        assert_eq!(r.x.shape(), (2, 200));
        assert!(!r.degenerate);
        let xn = normalize_regressors(&r.x).unwrap();
        assert!(xn.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn deterministic() {
        for kind in GeneratorKind::ALL {
            let spec = GeneratorSpec::new(kind, 2, 120, 42);
            let a = gen_regressors(&spec).unwrap();
            let b = gen_regressors(&spec).unwrap();
            assert_eq!(a, b);
            assert!(a.x.iter().all(|v| v.is_finite()));
            let other = gen_regressors(&GeneratorSpec { seed: 43, ..spec }).unwrap();
            assert_ne!(a.x, other.x);
        }
    }

    #[test]
    fn zero_input_is_degenerate() {
        let mut spec = GeneratorSpec::new(GeneratorKind::LinearArx, 2, 50, 3);
        spec.params.input_std = 0.0;
        let r = gen_regressors(&spec).unwrap();
        assert!(r.degenerate);
        assert!(r.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_arx_recursion() {
        let spec = GeneratorSpec::new(GeneratorKind::LinearArx, 2, 30, 9);
        let x = gen_regressors(&spec).unwrap().x;
        for t in 1..30 {
            let want = -0.40 * x[(0, t - 1)] - 0.15 * x[(1, t - 1)];
            assert!((x[(0, t)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn narx_recursion() {
        let spec = GeneratorSpec::new(GeneratorKind::Narx, 2, 30, 9);
        let x = gen_regressors(&spec).unwrap().x;
        for t in 1..30 {
            let y = x[(0, t - 1)];
            let want = (y + 2.5) / (1.0 + y * y) + x[(1, t - 1)];
            assert!((x[(0, t)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn switched_uses_one_subsystem_per_step() {
        let spec = GeneratorSpec::new(GeneratorKind::SwitchedArx, 2, 60, 5);
        let x = gen_regressors(&spec).unwrap().x;
        for t in 1..60 {
            let (y, u) = (x[(0, t - 1)], x[(1, t - 1)]);
            assert!(SWITCHED_PARAMS
                .iter()
                .any(|(a, b)| (x[(0, t)] - (a * y + b * u)).abs() < 1e-9));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_regressors(&GeneratorSpec::new(GeneratorKind::Narx, 3, 50, 0)).is_err());
        assert!(gen_regressors(&GeneratorSpec::new(GeneratorKind::GaussianStatic, 3, 3, 0)).is_err());
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"kind":"bogus","n":2,"N":10}"#).is_err());
    }

    #[test]
    fn spec_json() {
        let s: GeneratorSpec =
            serde_json::from_str(r#"{"kind":"switched_arx","n":2,"N":200,"seed":4}"#).unwrap();
        assert_eq!(s, GeneratorSpec::new(GeneratorKind::SwitchedArx, 2, 200, 4));
    }

    fn noise(fraction: f64, dense: f64) -> NoiseSpec {
        NoiseSpec {
            outlier_fraction: fraction,
            outlier_amplitude: 1e6,
            dense_bound: dense,
            seed: 8,
        }
    }

    #[test]
    fn clean_injection() {
        let x = gen_regressors(&GeneratorSpec::new(GeneratorKind::GaussianStatic, 2, 40, 1)).unwrap().x;
        let a0 = ground_truth_matrix(1, 2, 0).unwrap();
        let d = inject_noise(&x, &a0, &noise(0.0, 0.0)).unwrap();
        assert_eq!(d.y, &a0 * &x);
        assert!(d.sc.is_empty());
        assert_eq!(d.s0.len(), 40);
    }

    #[test]
    fn outlier_count_and_partition() {
        let x = gen_regressors(&GeneratorSpec::new(GeneratorKind::GaussianStatic, 2, 200, 1)).unwrap().x;
        let a0 = ground_truth_matrix(3, 2, 0).unwrap();
        let d = inject_noise(&x, &a0, &noise(0.1, 0.05)).unwrap();
        assert_eq!(d.sc.len(), 20);
        let (s0, sc) = partition_outliers(&d.f, 0.0);
        assert_eq!((s0, sc), (d.s0.clone(), d.sc.clone()));
        for t in d.sc.iter() {
            assert!((d.f.column(t).norm() - 1e6).abs() < 1e-6);
        }
        assert!(d.e.amax() <= 0.05);
        assert_eq!(d.y, &a0 * &x + &d.e + &d.f);
    }

    #[test]
    fn fraction_floor_is_exact_on_integer_products() {
        for big_n in [10, 100, 200, 1000] {
            for d in 0..big_n {
                let s = NoiseSpec {
                    outlier_fraction: NoiseSpec::fraction_for(d, big_n),
                    ..noise(0.0, 0.0)
                };
                assert_eq!(s.outlier_count(big_n), d);
            }
        }
        assert_eq!(noise(0.29, 0.0).outlier_count(100), 29);
        assert_eq!(noise(0.105, 0.0).outlier_count(200), 21);
    }

    #[test]
    fn invalid_noise() {
        let x = DMatrix::identity(2, 3);
        let a0 = ground_truth_matrix(1, 2, 0).unwrap();
        assert!(inject_noise(&x, &a0, &noise(1.0, 0.0)).is_err());
        assert!(inject_noise(&x, &a0, &noise(0.2, -1.0)).is_err());
        let bad = ground_truth_matrix(1, 3, 0).unwrap();
        assert!(inject_noise(&x, &bad, &noise(0.0, 0.0)).is_err());
    }

    #[test]
    fn truth_matrix() {
        let a = ground_truth_matrix(1, 2, 5).unwrap();
        assert_eq!(a.shape(), (1, 2));
        assert_eq!(a, ground_truth_matrix(1, 2, 5).unwrap());
        assert_eq!(ground_truth_matrix(1, 1, 5).unwrap().shape(), (1, 1));
    }
}
