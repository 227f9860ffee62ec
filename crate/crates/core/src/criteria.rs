//! Monotone criteria `j` applied to the aggregate outcome, and their
//! expectations under a Gaussian law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Sample count used when a closed form is unavailable.
pub const FALLBACK_MC_SAMPLES: usize = 200_000;
const FALLBACK_MC_SEED: u64 = 0x5_eed0_fa99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Criterion {
    Identity,
    /// `h^κ` with `0 < κ < 1`.
    Power { kappa: f64 },
    /// `1{h ≥ x̄}`; ties pay 1.
    Threshold { xbar: f64 },
}

impl Criterion {
    pub fn power(kappa: f64) -> Result<Self> {
        let c = Criterion::Power { kappa };
        c.validate()?;
        Ok(c)
    }

    pub fn threshold(xbar: f64) -> Result<Self> {
        let c = Criterion::Threshold { xbar };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Criterion::Identity => Ok(()),
            Criterion::Power { kappa } if kappa > 0.0 && kappa < 1.0 => Ok(()),
            Criterion::Power { kappa } => domain(format!("power exponent must lie in (0, 1), got {kappa}")),
            Criterion::Threshold { xbar } if xbar.is_finite() => Ok(()),
            Criterion::Threshold { xbar } => domain(format!("threshold must be finite, got {xbar}")),
        }
    }

    pub fn evaluate(&self, h: f64) -> Result<f64> {
        match *self {
            Criterion::Power { .. } if h < 0.0 => {
                domain(format!("power criterion undefined at negative outcome {h}"))
            }
            _ => Ok(self.evaluate_clamped(h)),
        }
    }

    /// Like [`evaluate`](Self::evaluate) but the power variant reads negative
    /// inputs as zero. Used on Gaussian draws.
    pub fn evaluate_clamped(&self, h: f64) -> f64 {
        match *self {
            Criterion::Identity => h,
            Criterion::Power { kappa } => h.max(0.0).powf(kappa),
            Criterion::Threshold { xbar } => {
                if h >= xbar {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[j(h)]` for `h ~ N(mu, sigma_sq)`.
    ///
    /// Closed form for identity and threshold; the power variant falls back to a
    /// fixed-seed Monte-Carlo average of [`FALLBACK_MC_SAMPLES`] draws.
    pub fn gaussian_expectation(&self, mu: f64, sigma_sq: f64) -> Result<f64> {
        check_sigma(sigma_sq)?;
        self.validate()?;
        match *self {
            Criterion::Identity => Ok(mu),
            Criterion::Threshold { xbar } => Ok(normal_cdf((mu - xbar) / sigma_sq.sqrt())),
            Criterion::Power { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(FALLBACK_MC_SEED);
                self.gaussian_expectation_mc(mu, sigma_sq, FALLBACK_MC_SAMPLES, &mut rng)
            }
        }
    }

    /// `(1/m) Σ j(h_ℓ)` with `h_ℓ ~ N(mu, sigma_sq)`.
    pub fn gaussian_expectation_mc<R: Rng + ?Sized>(
        &self,
        mu: f64,
        sigma_sq: f64,
        m: usize,
        rng: &mut R,
    ) -> Result<f64> {
        check_sigma(sigma_sq)?;
        if m == 0 {
            return domain("Monte-Carlo sample count must be at least 1");
        }
        let sigma = sigma_sq.sqrt();
        let total: f64 = (0..m)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                self.evaluate_clamped(mu + sigma * z)
            })
            .sum();
        Ok(total / m as f64)
    }
}

fn check_sigma(sigma_sq: f64) -> Result<()> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return domain(format!("variance must be positive and finite, got {sigma_sq}"));
    }
    Ok(())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        assert_eq!(Criterion::threshold(5.0).unwrap().evaluate(5.0).unwrap(), 1.0);
        assert_eq!(Criterion::threshold(5.0).unwrap().evaluate(4.999).unwrap(), 0.0);
        assert_eq!(Criterion::power(0.5).unwrap().evaluate(4.0).unwrap(), 2.0);
        assert_eq!(Criterion::Identity.evaluate(2.5).unwrap(), 2.5);
        assert!(Criterion::power(0.5).unwrap().evaluate(-1.0).is_err());
        assert_eq!(Criterion::power(0.5).unwrap().evaluate_clamped(-1.0), 0.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(Criterion::power(1.0).is_err());
        assert!(Criterion::power(0.0).is_err());
        assert!(Criterion::threshold(f64::NAN).is_err());
        assert!(Criterion::Identity.gaussian_expectation(0.0, 0.0).is_err());
        assert!(Criterion::Identity.gaussian_expectation(0.0, -1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Criterion::Identity
            .gaussian_expectation_mc(0.0, 1.0, 0, &mut rng)
            .is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        // 30-digit reference values of Φ
        let table = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (1.959_963_984_540_054, 0.975),
            (-3.5, 2.326_290_790_355_250_4e-4),
            (-8.0, 6.220_960_574_271_784e-16),
            (6.0, 0.999_999_999_013_412_4),
        ];
        for (x, expected) in table {
            assert!((normal_cdf(x) - expected).abs() <= 1e-12, "x = {x}");
        }
    }

    #[test]
    fn closed_form_examples() {
        let mu = 7.0;
        let sigma_sq: f64 = 4.0;
        let t = Criterion::threshold(mu).unwrap();
        assert!((t.gaussian_expectation(mu, sigma_sq).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(Criterion::Identity.gaussian_expectation(3.0, 11.0).unwrap(), 3.0);
        let t = Criterion::threshold(mu - 1.959_964 * sigma_sq.sqrt()).unwrap();
        assert!((t.gaussian_expectation(mu, sigma_sq).unwrap() - 0.975).abs() < 1e-6);
    }

    #[test]
    fn mc_examples() {
        let m = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mu, sigma_sq): (f64, f64) = (-2.0, 9.0);
        let v = Criterion::Identity
            .gaussian_expectation_mc(mu, sigma_sq, m, &mut rng)
            .unwrap();
        assert!((v - mu).abs() <= 4.0 * sigma_sq.sqrt() / (m as f64).sqrt());

        let v = Criterion::threshold(1.5)
            .unwrap()
            .gaussian_expectation_mc(1.5, 2.0, m, &mut rng)
            .unwrap();
        assert!((v - 0.5).abs() <= 0.002);
    }

    #[test]
    fn power_mc_matches_quadrature() {
        // E[√h], h ~ N(100, 1), by adaptive quadrature at 30 digits
        let reference = 9.999_874_988_278_172;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = Criterion::power(0.5)
            .unwrap()
            .gaussian_expectation_mc(100.0, 1.0, 1_000_000, &mut rng)
            .unwrap();
        assert!((v / reference - 1.0).abs() < 1e-3);
        let closed = Criterion::power(0.5).unwrap().gaussian_expectation(100.0, 1.0).unwrap();
        assert!((closed / reference - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mc_is_seed_deterministic_and_converges() {
        let c = Criterion::threshold(1.0).unwrap();
        let exact = c.gaussian_expectation(0.0, 1.0).unwrap();
        let run = |m, seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            c.gaussian_expectation_mc(0.0, 1.0, m, &mut rng).unwrap()
        };
        assert_eq!(run(1000, 5), run(1000, 5));
        // average absolute error over several seeds shrinks with m
        let err = |m| (0..8).map(|s| (run(m, s) - exact).abs()).sum::<f64>() / 8.0;
        assert!(err(100_000) < err(1_000));
    }

    proptest! {
        #[test]
        fn monotone(h1 in 0.0f64..100.0, dh in 0.0f64..50.0, kappa in 0.01f64..0.99, xbar in 0.0f64..100.0) {
            for c in [Criterion::Identity, Criterion::Power { kappa }, Criterion::Threshold { xbar }] {
                prop_assert!(c.evaluate(h1).unwrap() <= c.evaluate(h1 + dh).unwrap());
            }
        }

        #[test]
        fn threshold_expectation_strictly_monotone(mu in -3.0f64..3.0, d in 0.01f64..1.0, xbar in -3.0f64..3.0, s in 1.0f64..4.0) {
            let c = Criterion::Threshold { xbar };
            let base = c.gaussian_expectation(mu, s).unwrap();
            prop_assert!(c.gaussian_expectation(mu + d, s).unwrap() > base);
            let higher = Criterion::Threshold { xbar: xbar + d };
            prop_assert!(higher.gaussian_expectation(mu, s).unwrap() < base);
        }

        #[test]
        fn threshold_complement_symmetry(mu in -50.0f64..50.0, xbar in -50.0f64..50.0, s in 0.01f64..100.0) {
            let c = Criterion::Threshold { xbar };
            let a = c.gaussian_expectation(mu, s).unwrap();
            let b = c.gaussian_expectation(2.0 * xbar - mu, s).unwrap();
            prop_assert!((a + b - 1.0).abs() <= 1e-10);
        }
    }
}
