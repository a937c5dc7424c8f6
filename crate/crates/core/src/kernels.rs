//! Kernel bases: truncated Gaussian (continuous), discretized Gaussian
//! (discrete grid) and Aitchison-Aitken (categorical).

use rand::Rng;

use crate::error::{config_err, domain_err, Result};
use crate::normal::{log_ndtr_diff, ndtr, ndtri, LN_SQRT_2PI};
use crate::space::ParamValue;

/// Gaussian kernel `g(x, center | b)` truncated to `[low, high]` and
/// renormalized by its mass `Z(center) = int_low^high g`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedGaussian {
    center: f64,
    bandwidth: f64,
    low: f64,
    high: f64,
    log_mass: f64,
}

impl TruncatedGaussian {
    pub fn new(center: f64, bandwidth: f64, low: f64, high: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(config_err(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !(low < high) || !center.is_finite() {
            return Err(config_err(format!(
                "invalid truncated Gaussian: center {center} on [{low}, {high}]"
            )));
        }
        let log_mass = log_ndtr_diff((low - center) / bandwidth, (high - center) / bandwidth);
        Ok(Self {
            center,
            bandwidth,
            low,
            high,
            log_mass,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `ln Z(center)`, the log of the untruncated kernel's mass on the domain.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }

    /// Log-density without the domain check.
    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.bandwidth;
        -0.5 * z * z - LN_SQRT_2PI - self.bandwidth.ln() - self.log_mass
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        if !(self.low..=self.high).contains(&x) {
            return Err(domain_err("truncated Gaussian support", x));
        }
        Ok(self.log_density(x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.log_pdf(x).map(f64::exp)
    }

    /// CDF of the truncated distribution.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.low {
            return 0.0;
        }
        if x >= self.high {
            return 1.0;
        }
        let lo = (self.low - self.center) / self.bandwidth;
        let z = (x - self.center) / self.bandwidth;
        (log_ndtr_diff(lo, z) - self.log_mass).exp()
    }

    /// Inverse-CDF draw from the truncated distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let lo = (self.low - self.center) / self.bandwidth;
        let hi = (self.high - self.center) / self.bandwidth;
        // work in whichever tail keeps the CDF values away from 1
        let z = if lo > 0.0 {
            let (a, b) = (ndtr(-hi), ndtr(-lo));
            -ndtri(b - u * (b - a))
        } else {
            let (a, b) = (ndtr(lo), ndtr(hi));
            ndtri(a + u * (b - a))
        };
        (self.center + self.bandwidth * z).clamp(self.low, self.high)
    }
}

/// Gaussian kernel integrated over the cells of a discrete grid
/// `{low, low + step, ..., low + (count - 1) step}` and normalized over
/// `[low - step/2, high + step/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteGaussian {
    center: f64,
    bandwidth: f64,
    low: f64,
    step: f64,
    count: usize,
    log_mass: f64,
}

impl DiscreteGaussian {
    /// Basis centered on grid point `index`.
    pub fn at_index(index: usize, bandwidth: f64, low: f64, step: f64, count: usize) -> Result<Self> {
        if index >= count {
            return Err(domain_err("discrete kernel center", index as f64));
        }
        Self::new(low + index as f64 * step, bandwidth, low, step, count)
    }

    /// Basis centered on an arbitrary real coordinate (used by the prior).
    pub fn new(center: f64, bandwidth: f64, low: f64, step: f64, count: usize) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(config_err(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !(step > 0.0) || count == 0 {
            return Err(config_err("discrete kernel needs step > 0 and count >= 1"));
        }
        let high = low + (count - 1) as f64 * step;
        let log_mass = log_ndtr_diff(
            (low - 0.5 * step - center) / bandwidth,
            (high + 0.5 * step - center) / bandwidth,
        );
        Ok(Self {
            center,
            bandwidth,
            low,
            step,
            count,
            log_mass,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// Log-probability without the range check.
    pub fn log_density(&self, index: usize) -> f64 {
        let x = self.low + index as f64 * self.step;
        let lo = (x - 0.5 * self.step - self.center) / self.bandwidth;
        let hi = (x + 0.5 * self.step - self.center) / self.bandwidth;
        log_ndtr_diff(lo, hi) - self.log_mass
    }

    pub fn pmf(&self, index: usize) -> Result<f64> {
        if index >= self.count {
            return Err(domain_err("discrete grid index", index as f64));
        }
        Ok(self.log_density(index).exp())
    }

    /// Draws from the continuous truncated Gaussian on the grid's cell
    /// extent and rounds to the enclosing cell; cell probabilities equal the pmf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let high = self.low + (self.count - 1) as f64 * self.step;
        let g = TruncatedGaussian {
            center: self.center,
            bandwidth: self.bandwidth,
            low: self.low - 0.5 * self.step,
            high: high + 0.5 * self.step,
            log_mass: self.log_mass,
        };
        let x = g.sample(rng);
        (((x - self.low) / self.step).round().max(0.0) as usize).min(self.count - 1)
    }
}

/// Aitchison-Aitken kernel: `1 - b` on the center, `b / (C - 1)` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct AitchisonAitken {
    center: usize,
    bandwidth: f64,
    n_choices: usize,
}

impl AitchisonAitken {
    pub fn new(center: usize, bandwidth: f64, n_choices: usize) -> Result<Self> {
        if center >= n_choices {
            return Err(domain_err("categorical kernel center", center as f64));
        }
        if !(0.0..1.0).contains(&bandwidth) {
            return Err(config_err(format!(
                "categorical bandwidth must lie in [0, 1), got {bandwidth}"
            )));
        }
        if n_choices == 1 && bandwidth > 0.0 {
            return Err(config_err("categorical bandwidth must be 0 for a single choice"));
        }
        Ok(Self {
            center,
            bandwidth,
            n_choices,
        })
    }

    /// The uniform pmf, expressed as the kernel at its symmetry point `b = (C-1)/C`.
    pub fn uniform(n_choices: usize) -> Result<Self> {
        Self::new(0, (n_choices - 1) as f64 / n_choices as f64, n_choices)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn pmf_unchecked(&self, category: usize) -> f64 {
        if category == self.center {
            1.0 - self.bandwidth
        } else {
            self.bandwidth / (self.n_choices - 1) as f64
        }
    }

    pub fn pmf(&self, category: usize) -> Result<f64> {
        if category >= self.n_choices {
            return Err(domain_err("category", category as f64));
        }
        Ok(self.pmf_unchecked(category))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.n_choices == 1 || rng.random::<f64>() >= self.bandwidth {
            return self.center;
        }
        let k = rng.random_range(0..self.n_choices - 1);
        if k >= self.center {
            k + 1
        } else {
            k
        }
    }
}

/// One-dimensional kernel of any of the three families.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelBasis {
    Gaussian(TruncatedGaussian),
    Discrete(DiscreteGaussian),
    Categorical(AitchisonAitken),
}

impl KernelBasis {
    /// Log-density (log-probability for discrete kinds) at a transformed value.
    /// A value of the wrong kind has density zero.
    pub fn log_density(&self, value: ParamValue) -> f64 {
        match (self, value) {
            (KernelBasis::Gaussian(k), ParamValue::Real(x)) => k.log_density(x),
            (KernelBasis::Discrete(k), ParamValue::Index(i)) => k.log_density(i),
            (KernelBasis::Categorical(k), ParamValue::Index(i)) => k.pmf_unchecked(i).ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            KernelBasis::Gaussian(k) => ParamValue::Real(k.sample(rng)),
            KernelBasis::Discrete(k) => ParamValue::Index(k.sample(rng)),
            KernelBasis::Categorical(k) => ParamValue::Index(k.sample(rng)),
        }
    }

    /// Log of the truncation mass `Z` for the Gaussian families; 0 for categorical.
    pub fn log_truncation_mass(&self) -> f64 {
        match self {
            KernelBasis::Gaussian(k) => k.log_mass(),
            KernelBasis::Discrete(k) => k.log_mass(),
            KernelBasis::Categorical(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Independent CDF oracle: Simpson quadrature of the standard normal density.
    fn normal_mass(lo: f64, hi: f64) -> f64 {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            acc += f(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn truncated_gaussian_reference_value() {
        // g = 1/sqrt(2 pi 0.01) = 3.98942..., Z = Phi(5) - Phi(-5)
        let k = TruncatedGaussian::new(0.5, 0.1, 0.0, 1.0).unwrap();
        let expected = (1.0 / (2.0 * PI * 0.01).sqrt()) / normal_mass(-5.0, 5.0);
        assert!((k.pdf(0.5).unwrap() - expected).abs() < 1e-9);
        assert!((k.pdf(0.5).unwrap() - 3.98942).abs() < 1e-4);
    }

    #[test]
    fn truncated_gaussian_normalizes() {
        for &(c, b) in &[(0.5, 0.1), (0.0, 0.05), (1.0, 0.3), (0.2, 2.0), (0.9, 0.01)] {
            let k = TruncatedGaussian::new(c, b, 0.0, 1.0).unwrap();
            let total = trapezoid(|x| k.pdf(x).unwrap(), 0.0, 1.0, 10_000);
            assert!((total - 1.0).abs() < 1e-6, "c={c} b={b}: {total}");
        }
    }

    #[test]
    fn truncated_gaussian_flat_limit() {
        let k = TruncatedGaussian::new(0.5, 100.0, 0.0, 1.0).unwrap();
        let (a, b) = (k.pdf(0.5).unwrap(), k.pdf(0.0).unwrap());
        assert!(a / b < 1.01);
        assert!((a - 1.0).abs() < 1e-4);
    }

    #[test]
    fn truncated_gaussian_reflection_symmetry() {
        let (lo, hi) = (-1.0, 3.0);
        let mirror = |x: f64| lo + hi - x;
        let k = TruncatedGaussian::new(0.3, 0.7, lo, hi).unwrap();
        let m = TruncatedGaussian::new(mirror(0.3), 0.7, lo, hi).unwrap();
        for i in 0..=20 {
            let x = lo + (hi - lo) * i as f64 / 20.0;
            assert!((k.pdf(x).unwrap() - m.pdf(mirror(x)).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_gaussian_rejects_outside_support() {
        let k = TruncatedGaussian::new(0.5, 0.1, 0.0, 1.0).unwrap();
        assert!(k.pdf(1.01).is_err());
        assert!(TruncatedGaussian::new(0.5, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn truncated_gaussian_sampling_ks() {
        let k = TruncatedGaussian::new(0.1, 0.3, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| k.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        xs.sort_by(f64::total_cmp);
        // analytic truncated CDF from the quadrature oracle
        let z_total = normal_mass(-0.1 / 0.3, 0.9 / 0.3);
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate().step_by(97) {
            let cdf = normal_mass(-0.1 / 0.3, (x - 0.1) / 0.3) / z_total;
            ks = ks
                .max((cdf - i as f64 / n as f64).abs())
                .max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn discrete_single_cell_and_sum() {
        let k = DiscreteGaussian::at_index(0, 0.3, 2.0, 0.5, 1).unwrap();
        assert!((k.pmf(0).unwrap() - 1.0).abs() < 1e-12);
        assert!(k.pmf(1).is_err());
        for &(c, b, count) in &[(0usize, 0.2, 5usize), (3, 1.5, 7), (9, 0.05, 10), (1, 50.0, 3)] {
            let k = DiscreteGaussian::at_index(c, b, -1.0, 0.5, count).unwrap();
            let total: f64 = (0..count).map(|i| k.pmf(i).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{total}");
        }
    }

    #[test]
    fn discrete_flat_limit() {
        let (low, step, count) = (0.0, 1.0, 3);
        let b = 1000.0 * ((count - 1) as f64 * step + step);
        let k = DiscreteGaussian::at_index(1, b, low, step, count).unwrap();
        for i in 0..count {
            assert!((k.pmf(i).unwrap() - 1.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn discrete_matches_cdf_difference_oracle() {
        // K=3, q=1, L=0, center=1, b=0.5
        let k = DiscreteGaussian::at_index(1, 0.5, 0.0, 1.0, 3).unwrap();
        let z = normal_mass(-3.0, 3.0);
        let expected = [
            normal_mass(-3.0, -1.0) / z,
            normal_mass(-1.0, 1.0) / z,
            normal_mass(1.0, 3.0) / z,
        ];
        for (i, e) in expected.iter().enumerate() {
            assert!((k.pmf(i).unwrap() - e).abs() < 1e-10, "{i}");
        }
    }

    #[test]
    fn discrete_sampling_frequencies() {
        let k = DiscreteGaussian::at_index(1, 3000.0, 0.0, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[k.sample(&mut rng)] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn aitchison_aitken_values() {
        let k = AitchisonAitken::new(0, 0.3, 2).unwrap();
        assert!((k.pmf(0).unwrap() - 0.7).abs() < 1e-15);
        assert!((k.pmf(1).unwrap() - 0.3).abs() < 1e-15);
        let d = AitchisonAitken::new(2, 0.0, 4).unwrap();
        assert_eq!(
            (0..4).map(|c| d.pmf(c).unwrap()).collect::<Vec<_>>(),
            [0.0, 0.0, 1.0, 0.0]
        );
        let u = AitchisonAitken::uniform(5).unwrap();
        for c in 0..5 {
            assert!((u.pmf(c).unwrap() - 0.2).abs() < 1e-15);
        }
        assert!(AitchisonAitken::new(0, 0.2, 1).is_err());
        assert!(AitchisonAitken::new(0, 1.0, 3).is_err());
        assert!(AitchisonAitken::new(0, 0.0, 1).is_ok());
    }

    #[test]
    fn aitchison_aitken_sums_to_one_and_is_permutation_invariant() {
        for c in 2..8 {
            for &b in &[0.0, 0.1, 0.5, 0.99] {
                let k = AitchisonAitken::new(1, b, c).unwrap();
                let total: f64 = (0..c).map(|i| k.pmf(i).unwrap()).sum();
                assert!((total - 1.0).abs() < 1e-14);
                let others: Vec<f64> = (0..c).filter(|&i| i != 1).map(|i| k.pmf(i).unwrap()).collect();
                assert!(others.windows(2).all(|w| w[0] == w[1]));
            }
        }
    }

    #[test]
    fn aitchison_aitken_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = AitchisonAitken::new(3, 0.0, 5).unwrap();
        assert!((0..1000).all(|_| k.sample(&mut rng) == 3));
        let k = AitchisonAitken::new(1, 0.6, 4).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[k.sample(&mut rng)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = k.pmf(i).unwrap();
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - n as f64 * p).abs() < 4.0 * sigma, "{counts:?}");
        }
    }
}
