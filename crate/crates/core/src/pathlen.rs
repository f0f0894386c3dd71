//! Path-length distribution laws.
//!
//! A law describes the density `p(s)` of the distance a particle travels
//! between consecutive interactions, together with everything transport
//! needs from it: the survival (complementary CDF), the path-dependent
//! cross section `sigma_t(s) = p(s) / survival(s)`, exact samplers, and the
//! first two moments.
//!
//! Three variants are supported:
//!
//! * `ClassicalExponential` — constant cross section, `p(s) = S e^{-S s}`;
//! * `DiffusionMatched` — gamma law of shape 2, `p(s) = lambda^2 s e^{-lambda s}`
//!   with `lambda = sqrt(6 / <s^2>)`, the choice that makes transport agree
//!   with the diffusion solution in an infinite medium;
//! * `Tabulated` — piecewise-linear density from measured chord data.
//!
//! Lengths are expressed in mean-free-path-scale units throughout.

use std::path::Path;

use rand::Rng;

use crate::error::Error;
use crate::quadrature;

/// First and second moments of a path-length density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `int s p(s) ds` (length).
    pub first: f64,
    /// `int s^2 p(s) ds` (length squared).
    pub second: f64,
}

/// A probability law for the free path between interactions.
#[derive(Debug, Clone, PartialEq)]
pub enum PathLengthLaw {
    /// Constant cross section; exponential free paths.
    ClassicalExponential { sigma_t: f64 },
    /// `p(s) = lambda^2 s e^{-lambda s}`, `lambda = sqrt(6 / mean_square_free_path)`.
    DiffusionMatched {
        mean_square_free_path: f64,
        lambda: f64,
    },
    /// Piecewise-linear density on a finite support.
    Tabulated(TabulatedLaw),
}

impl PathLengthLaw {
    /// Classical law with constant cross section `sigma_t` (1/length).
    pub fn exponential(sigma_t: f64) -> Result<Self, Error> {
        if !(sigma_t > 0.0) || !sigma_t.is_finite() {
            return Err(Error::domain(format!(
                "exponential law needs sigma_t > 0, got {sigma_t}"
            )));
        }
        Ok(PathLengthLaw::ClassicalExponential { sigma_t })
    }

    /// The law that reproduces diffusion exactly for a medium whose true
    /// mean-squared free path is `mean_square_free_path` (length squared).
    pub fn diffusion_matched(mean_square_free_path: f64) -> Result<Self, Error> {
        if !(mean_square_free_path > 0.0) || !mean_square_free_path.is_finite() {
            return Err(Error::domain(format!(
                "diffusion-matched law needs <s^2> > 0, got {mean_square_free_path}"
            )));
        }
        Ok(PathLengthLaw::DiffusionMatched {
            mean_square_free_path,
            lambda: (6.0 / mean_square_free_path).sqrt(),
        })
    }

    /// Law from tabulated `(s, p)` pairs; see [`TabulatedLaw::new`].
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self, Error> {
        Ok(PathLengthLaw::Tabulated(TabulatedLaw::new(points)?))
    }

    /// Load a tabulated law from a two-column text file (`s p(s)` per row,
    /// `#` comments, strictly increasing `s`).
    pub fn tabulated_from_file(path: impl AsRef<Path>) -> Result<Self, Error> {
        Ok(PathLengthLaw::Tabulated(TabulatedLaw::from_file(path)?))
    }

    /// Probability density at `s >= 0`.
    pub fn pdf(&self, s: f64) -> Result<f64, Error> {
        check_nonnegative(s, "pdf")?;
        Ok(match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => sigma_t * (-sigma_t * s).exp(),
            PathLengthLaw::DiffusionMatched { lambda, .. } => {
                lambda * lambda * s * (-lambda * s).exp()
            }
            PathLengthLaw::Tabulated(t) => t.pdf(s),
        })
    }

    /// Probability that the free path exceeds `s`.
    pub fn survival(&self, s: f64) -> Result<f64, Error> {
        check_nonnegative(s, "survival")?;
        Ok(match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => (-sigma_t * s).exp(),
            PathLengthLaw::DiffusionMatched { lambda, .. } => {
                (1.0 + lambda * s) * (-lambda * s).exp()
            }
            PathLengthLaw::Tabulated(t) => t.survival(s),
        })
    }

    /// Cumulative distribution `1 - survival(s)`.
    pub fn cdf(&self, s: f64) -> Result<f64, Error> {
        check_nonnegative(s, "cdf")?;
        Ok(match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => -(-sigma_t * s).exp_m1(),
            PathLengthLaw::DiffusionMatched { lambda, .. } => {
                1.0 - (1.0 + lambda * s) * (-lambda * s).exp()
            }
            PathLengthLaw::Tabulated(t) => t.cdf(s),
        })
    }

    /// Path-dependent cross section (hazard rate) `p(s) / survival(s)`.
    ///
    /// Fails where the survival has already dropped to zero (beyond the
    /// support of a tabulated law).
    pub fn sigma_t_of_s(&self, s: f64) -> Result<f64, Error> {
        check_nonnegative(s, "sigma_t_of_s")?;
        match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => Ok(*sigma_t),
            PathLengthLaw::DiffusionMatched { lambda, .. } => {
                Ok(lambda * lambda * s / (1.0 + lambda * s))
            }
            PathLengthLaw::Tabulated(t) => {
                let surv = t.survival(s);
                if surv <= 0.0 {
                    return Err(Error::domain(format!(
                        "sigma_t_of_s({s}) undefined: survival is zero beyond the tabulated support"
                    )));
                }
                Ok(t.pdf(s) / surv)
            }
        }
    }

    /// Optical depth `int_0^s sigma_t_of_s(s') ds'`, i.e. `-ln(survival)`.
    ///
    /// Returns infinity past the support of a tabulated law.
    pub fn optical_depth(&self, s: f64) -> Result<f64, Error> {
        check_nonnegative(s, "optical_depth")?;
        Ok(match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => sigma_t * s,
            PathLengthLaw::DiffusionMatched { lambda, .. } => lambda * s - (lambda * s).ln_1p(),
            PathLengthLaw::Tabulated(t) => {
                let surv = t.survival(s);
                if surv > 0.0 {
                    -surv.ln()
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    /// Draw one free path. Exact per variant: inversion for the exponential,
    /// the two-exponential (gamma shape 2) identity for the diffusion-matched
    /// law, and per-segment CDF inversion for tabulated densities.
    pub fn sample_free_path<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let s = match self {
                PathLengthLaw::ClassicalExponential { sigma_t } => {
                    invert_exponential(*sigma_t, open_unit(rng))
                }
                PathLengthLaw::DiffusionMatched { lambda, .. } => {
                    invert_gamma2(*lambda, open_unit(rng), open_unit(rng))
                }
                PathLengthLaw::Tabulated(t) => t.invert_cdf(open_unit(rng)),
            };
            if s > 0.0 {
                return s;
            }
        }
    }

    /// First and second moments; closed form for the analytic variants,
    /// per-segment adaptive quadrature for tabulated laws.
    pub fn moments(&self) -> Result<Moments, Error> {
        match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => Ok(Moments {
                first: 1.0 / sigma_t,
                second: 2.0 / (sigma_t * sigma_t),
            }),
            PathLengthLaw::DiffusionMatched {
                mean_square_free_path,
                lambda,
            } => Ok(Moments {
                first: 2.0 / lambda,
                second: *mean_square_free_path,
            }),
            PathLengthLaw::Tabulated(_) => self.moments_by_quadrature(),
        }
    }

    /// Moments via adaptive quadrature of `s^k p(s)`, independent of the
    /// closed forms. Used for verification and for tabulated laws.
    pub fn moments_by_quadrature(&self) -> Result<Moments, Error> {
        Ok(Moments {
            first: self.integrate_weighted(1)?,
            second: self.integrate_weighted(2)?,
        })
    }

    /// `int p(s) ds` by adaptive quadrature (should be 1 for any law).
    pub fn normalization_by_quadrature(&self) -> Result<f64, Error> {
        self.integrate_weighted(0)
    }

    fn integrate_weighted(&self, power: i32) -> Result<f64, Error> {
        match self {
            PathLengthLaw::Tabulated(t) => {
                // The density is polynomial on each segment; integrating
                // segment by segment keeps the quadrature exact.
                let mut total = 0.0;
                for w in t.s.windows(2) {
                    total += quadrature::integrate(
                        |s| s.powi(power) * t.pdf(s),
                        w[0],
                        w[1],
                        quadrature::DEFAULT_REL_TOL,
                    )?;
                }
                Ok(total)
            }
            _ => {
                let scale = self.decay_length();
                quadrature::integrate_to_inf(
                    |s| s.powi(power) * self.pdf(s).unwrap_or(0.0),
                    0.0,
                    scale,
                    quadrature::DEFAULT_REL_TOL,
                )
            }
        }
    }

    /// Characteristic decay length of the tail, used to scale the
    /// semi-infinite substitution.
    fn decay_length(&self) -> f64 {
        match self {
            PathLengthLaw::ClassicalExponential { sigma_t } => 1.0 / sigma_t,
            PathLengthLaw::DiffusionMatched { lambda, .. } => 1.0 / lambda,
            PathLengthLaw::Tabulated(t) => t.s[t.s.len() - 1].max(f64::MIN_POSITIVE),
        }
    }
}

fn check_nonnegative(s: f64, what: &str) -> Result<(), Error> {
    if s < 0.0 || s.is_nan() {
        Err(Error::domain(format!("{what} requires s >= 0, got {s}")))
    } else {
        Ok(())
    }
}

/// Exponential free path by inversion: `s = -ln(u) / sigma_t`, `u` in (0, 1].
pub fn invert_exponential(sigma_t: f64, u: f64) -> f64 {
    -u.ln() / sigma_t
}

/// Gamma-shape-2 free path as a sum of two exponentials:
/// `s = -ln(u1 u2) / lambda`, `u1, u2` in (0, 1].
pub fn invert_gamma2(lambda: f64, u1: f64, u2: f64) -> f64 {
    -(u1.ln() + u2.ln()) / lambda
}

/// Uniform draw on the open-top interval (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Piecewise-linear density on strictly increasing abscissae, zero outside
/// the tabulated support, renormalized to unit mass at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    s: Vec<f64>,
    p: Vec<f64>,
    /// CDF at each abscissa (cum[0] = 0).
    cum: Vec<f64>,
    /// Mass at or above each abscissa; kept separately so the survival of
    /// the tail does not go through a `1 - (1 - eps)` cancellation.
    tail: Vec<f64>,
    norm: f64,
}

impl TabulatedLaw {
    /// Build from `(s, p)` pairs. The raw values are renormalized; the
    /// constant that was divided out is available from
    /// [`normalization_constant`](Self::normalization_constant).
    pub fn new(points: &[(f64, f64)]) -> Result<Self, Error> {
        if points.len() < 2 {
            return Err(Error::domain(
                "tabulated law needs at least two (s, p) points",
            ));
        }
        let (s, mut p): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if s[0] < 0.0 {
            return Err(Error::domain(format!(
                "tabulated abscissae must satisfy s >= 0, got {}",
                s[0]
            )));
        }
        for w in s.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::domain(format!(
                    "tabulated abscissae must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for (&si, &pi) in s.iter().zip(&p) {
            if !si.is_finite() || !pi.is_finite() || pi < 0.0 {
                return Err(Error::domain(format!(
                    "tabulated density must be finite and nonnegative, got p({si}) = {pi}"
                )));
            }
        }

        // Trapezoid integral is exact for the piecewise-linear density.
        let norm: f64 = s
            .windows(2)
            .zip(p.windows(2))
            .map(|(sw, pw)| 0.5 * (pw[0] + pw[1]) * (sw[1] - sw[0]))
            .sum();
        if !(norm > 0.0) {
            return Err(Error::domain("tabulated density has zero total mass"));
        }
        for pi in &mut p {
            *pi /= norm;
        }

        let n = s.len();
        let mut cum = vec![0.0; n];
        for i in 1..n {
            cum[i] = cum[i - 1] + 0.5 * (p[i - 1] + p[i]) * (s[i] - s[i - 1]);
        }
        let mut tail = vec![0.0; n];
        for i in (0..n - 1).rev() {
            tail[i] = tail[i + 1] + 0.5 * (p[i] + p[i + 1]) * (s[i + 1] - s[i]);
        }

        Ok(TabulatedLaw {
            s,
            p,
            cum,
            tail,
            norm,
        })
    }

    /// Parse a two-column whitespace-separated text file. Lines starting
    /// with `#` (and inline `#` comments) are ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::TabulatedFormat {
                        line: idx + 1,
                        message: format!("expected two columns, got {line:?}"),
                    })
                }
            };
            let parse = |txt: &str| {
                txt.parse::<f64>().map_err(|_| Error::TabulatedFormat {
                    line: idx + 1,
                    message: format!("not a number: {txt:?}"),
                })
            };
            points.push((parse(a)?, parse(b)?));
        }
        Self::new(&points)
    }

    /// Raw-table mass that was divided out at construction.
    pub fn normalization_constant(&self) -> f64 {
        self.norm
    }

    /// The tabulated abscissae (strictly increasing).
    pub fn abscissae(&self) -> &[f64] {
        &self.s
    }

    /// Renormalized density values at the abscissae.
    pub fn densities(&self) -> &[f64] {
        &self.p
    }

    /// Support of the density, `[s_min, s_max]`.
    pub fn support(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    fn segment_of(&self, s: f64) -> usize {
        // Index i with s in [s_i, s_{i+1}); callers guarantee s in support.
        self.s
            .partition_point(|&x| x <= s)
            .clamp(1, self.s.len() - 1)
            - 1
    }

    pub fn pdf(&self, s: f64) -> f64 {
        let (lo, hi) = self.support();
        if s < lo || s > hi {
            return 0.0;
        }
        let i = self.segment_of(s);
        let t = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.p[i] + t * (self.p[i + 1] - self.p[i])
    }

    pub fn cdf(&self, s: f64) -> f64 {
        let (lo, hi) = self.support();
        if s <= lo {
            return 0.0;
        }
        if s >= hi {
            return 1.0;
        }
        let i = self.segment_of(s);
        let d = s - self.s[i];
        (self.cum[i] + 0.5 * (self.p[i] + self.pdf(s)) * d).min(1.0)
    }

    pub fn survival(&self, s: f64) -> f64 {
        let (lo, hi) = self.support();
        if s <= lo {
            return 1.0;
        }
        if s >= hi {
            return 0.0;
        }
        let i = self.segment_of(s);
        let d = s - self.s[i];
        (self.tail[i] - 0.5 * (self.p[i] + self.pdf(s)) * d).max(0.0)
    }

    /// Invert the piecewise-quadratic CDF at `u` in (0, 1).
    pub fn invert_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // Segment with cum[i] <= u < cum[i+1].
        let i = self
            .cum
            .partition_point(|&c| c <= u)
            .clamp(1, self.s.len() - 1)
            - 1;
        let h = self.s[i + 1] - self.s[i];
        let slope = (self.p[i + 1] - self.p[i]) / h;
        let target = u - self.cum[i];
        // Solve p_i d + slope d^2 / 2 = target with the cancellation-free
        // root 2t / (p_i + sqrt(p_i^2 + 2 slope t)).
        let disc = (self.p[i] * self.p[i] + 2.0 * slope * target).max(0.0);
        let denom = self.p[i] + disc.sqrt();
        let d = if denom > 0.0 {
            2.0 * target / denom
        } else {
            0.0
        };
        (self.s[i] + d.clamp(0.0, h)).min(self.s[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    // sqrt(6 / 6.2898) to high precision.
    const LAMBDA_PEBBLE: f64 = 0.976691047892568114;
    // sqrt(6 * 6.2898) / 3.
    const MEAN_PEBBLE: f64 = 2.047730451011558308;

    fn triangle() -> PathLengthLaw {
        // p(s) = s/2 on [0, 2]; cdf = s^2/4; mean 4/3; second moment 2.
        PathLengthLaw::tabulated(&[(0.0, 0.0), (2.0, 1.0)]).unwrap()
    }

    #[test]
    fn diffusion_matched_lambda() {
        match PathLengthLaw::diffusion_matched(6.0).unwrap() {
            PathLengthLaw::DiffusionMatched { lambda, .. } => assert_eq!(lambda, 1.0),
            _ => unreachable!(),
        }
        match PathLengthLaw::diffusion_matched(6.2898).unwrap() {
            PathLengthLaw::DiffusionMatched { lambda, .. } => {
                assert_relative_eq!(lambda, LAMBDA_PEBBLE, max_relative = 1e-14);
            }
            _ => unreachable!(),
        }
        // The law matched to a classical medium recovers lambda = sqrt(3) Sigma_t.
        let sigma = 0.5934;
        match PathLengthLaw::diffusion_matched(2.0 / (sigma * sigma)).unwrap() {
            PathLengthLaw::DiffusionMatched { lambda, .. } => {
                assert_relative_eq!(lambda, 3f64.sqrt() * sigma, max_relative = 1e-12);
            }
            _ => unreachable!(),
        }
        assert!(PathLengthLaw::diffusion_matched(0.0).is_err());
        assert!(PathLengthLaw::diffusion_matched(-1.0).is_err());
        assert!(PathLengthLaw::exponential(0.0).is_err());
    }

    #[test]
    fn pdf_values() {
        let dm = PathLengthLaw::diffusion_matched(6.0).unwrap();
        assert_eq!(dm.pdf(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            dm.pdf(1.0).unwrap(),
            0.367879441171442322,
            max_relative = 1e-15
        );
        let exp = PathLengthLaw::exponential(0.5934).unwrap();
        assert_relative_eq!(exp.pdf(0.0).unwrap(), 0.5934, max_relative = 1e-15);
        assert!(dm.pdf(-0.1).is_err());
    }

    #[test]
    fn survival_values() {
        let dm = PathLengthLaw::diffusion_matched(6.0).unwrap();
        assert_eq!(dm.survival(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            dm.survival(1.0).unwrap(),
            0.735758882342884643,
            max_relative = 1e-15
        );
        let exp = PathLengthLaw::exponential(1.0).unwrap();
        assert_relative_eq!(
            exp.survival(std::f64::consts::LN_2).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        assert_eq!(triangle().survival(0.0).unwrap(), 1.0);
        assert!(dm.survival(-1e-9).is_err());
    }

    #[test]
    fn hazard_values() {
        let dm = PathLengthLaw::diffusion_matched(6.0).unwrap();
        assert_eq!(dm.sigma_t_of_s(0.0).unwrap(), 0.0);
        assert_relative_eq!(dm.sigma_t_of_s(1.0).unwrap(), 0.5, max_relative = 1e-15);
        // Approaches lambda from below.
        let pebble = PathLengthLaw::diffusion_matched(6.2898).unwrap();
        let far = pebble.sigma_t_of_s(1e7).unwrap();
        assert!(far < LAMBDA_PEBBLE);
        assert_relative_eq!(far, LAMBDA_PEBBLE, max_relative = 1e-6);
        // Constant for the exponential law.
        let exp = PathLengthLaw::exponential(0.5934).unwrap();
        assert_eq!(exp.sigma_t_of_s(0.0).unwrap(), 0.5934);
        assert_eq!(exp.sigma_t_of_s(17.0).unwrap(), 0.5934);
        // Beyond a tabulated support the hazard is undefined.
        assert!(triangle().sigma_t_of_s(3.0).is_err());
    }

    #[test]
    fn hazard_monotone_and_bounded() {
        let pebble = PathLengthLaw::diffusion_matched(6.2898).unwrap();
        let mut prev = -1.0;
        for k in 0..=2000 {
            let s = 40.0 * k as f64 / 2000.0;
            let h = pebble.sigma_t_of_s(s).unwrap();
            assert!(h > prev, "hazard not strictly increasing at s = {s}");
            assert!(h < LAMBDA_PEBBLE);
            prev = h;
        }
    }

    #[test]
    fn closed_form_moments() {
        let m = PathLengthLaw::diffusion_matched(6.0)
            .unwrap()
            .moments()
            .unwrap();
        assert_eq!(m.first, 2.0);
        assert_eq!(m.second, 6.0);

        let m = PathLengthLaw::diffusion_matched(6.2898)
            .unwrap()
            .moments()
            .unwrap();
        assert_relative_eq!(m.first, MEAN_PEBBLE, max_relative = 1e-14);
        assert_eq!(m.second, 6.2898);

        let m = PathLengthLaw::exponential(0.5934)
            .unwrap()
            .moments()
            .unwrap();
        assert_relative_eq!(m.first, 1.685203909673070442, max_relative = 1e-14);
        assert_relative_eq!(m.second, 5.679824434354804319, max_relative = 1e-14);
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        for law in [
            PathLengthLaw::diffusion_matched(6.2898).unwrap(),
            PathLengthLaw::exponential(0.5934).unwrap(),
            PathLengthLaw::exponential(2.0).unwrap(),
        ] {
            let closed = law.moments().unwrap();
            let quad = law.moments_by_quadrature().unwrap();
            assert_abs_diff_eq!(
                law.normalization_by_quadrature().unwrap(),
                1.0,
                epsilon = 1e-8
            );
            assert_abs_diff_eq!(quad.first, closed.first, epsilon = 1e-8);
            assert_abs_diff_eq!(quad.second, closed.second, epsilon = 1e-8);
        }
    }

    #[test]
    fn inversion_maps() {
        let e = (-1.0f64).exp();
        assert_relative_eq!(invert_gamma2(1.0, e, e), 2.0, max_relative = 1e-15);
        assert_relative_eq!(invert_exponential(2.0, e), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn sampled_moments_match() {
        use rand::SeedableRng;
        let law = PathLengthLaw::diffusion_matched(6.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let s = law.sample_free_path(&mut rng);
            assert!(s > 0.0);
            sum += s;
            sum2 += s * s;
        }
        let nf = n as f64;
        // Gamma(2, lambda=1): var(s) = 2, var(s^2) = E s^4 - (E s^2)^2 = 120 - 36.
        let se_mean = (2.0f64 / nf).sqrt();
        let se_m2 = (84.0f64 / nf).sqrt();
        assert!((sum / nf - 2.0).abs() < 4.0 * se_mean);
        assert!((sum2 / nf - 6.0).abs() < 4.0 * se_m2);
    }

    #[test]
    fn sampler_ks_fidelity() {
        use rand::SeedableRng;
        for (name, law) in [
            ("dm", PathLengthLaw::diffusion_matched(6.2898).unwrap()),
            ("exp", PathLengthLaw::exponential(0.5934).unwrap()),
            ("tab", triangle()),
        ] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let samples: Vec<f64> = (0..100_000)
                .map(|_| law.sample_free_path(&mut rng))
                .collect();
            let p = crate::stats::ks_test(&samples, |s| law.cdf(s).unwrap());
            assert!(
                p.p_value > 0.001,
                "{name}: KS p-value {} too small",
                p.p_value
            );
        }
    }

    #[test]
    fn triangle_tabulated_basics() {
        let law = triangle();
        assert_relative_eq!(law.pdf(1.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(law.cdf(1.0).unwrap(), 0.25, max_relative = 1e-15);
        assert_relative_eq!(law.survival(1.0).unwrap(), 0.75, max_relative = 1e-15);
        assert_relative_eq!(
            law.sigma_t_of_s(1.0).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-15
        );
        assert_eq!(law.pdf(2.5).unwrap(), 0.0);
        assert_eq!(law.survival(2.5).unwrap(), 0.0);
        let m = law.moments().unwrap();
        assert_abs_diff_eq!(m.first, 4.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.second, 2.0, epsilon = 1e-10);
        if let PathLengthLaw::Tabulated(t) = &law {
            assert_relative_eq!(t.invert_cdf(0.25), 1.0, max_relative = 1e-12);
            assert_eq!(t.normalization_constant(), 1.0);
        }
    }

    #[test]
    fn tabulated_renormalizes_and_reports() {
        // Same triangle scaled by 3: mass 3 is divided out.
        let law = TabulatedLaw::new(&[(0.0, 0.0), (2.0, 3.0)]).unwrap();
        assert_relative_eq!(law.normalization_constant(), 3.0, max_relative = 1e-15);
        assert_relative_eq!(law.pdf(2.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn tabulated_rejects_bad_input() {
        assert!(TabulatedLaw::new(&[(0.0, 1.0)]).is_err());
        assert!(TabulatedLaw::new(&[(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(TabulatedLaw::new(&[(1.0, 1.0), (0.5, 1.0)]).is_err());
        assert!(TabulatedLaw::new(&[(-1.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(TabulatedLaw::new(&[(0.0, -0.5), (1.0, 1.0)]).is_err());
        assert!(TabulatedLaw::new(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn tabulated_file_round_trip() {
        let dir = std::env::temp_dir().join("nctrans-pathlen-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("chords.txt");
        std::fs::write(
            &path,
            "# chord data\n0.0 0.0\n1.0 0.5   # peak\n2.0 1.0\n\n",
        )
        .unwrap();
        let law = PathLengthLaw::tabulated_from_file(&path).unwrap();
        assert_relative_eq!(law.pdf(1.0).unwrap(), 0.5, max_relative = 1e-14);

        std::fs::write(&path, "0.0 0.0\nnope 1.0\n").unwrap();
        match PathLengthLaw::tabulated_from_file(&path) {
            Err(Error::TabulatedFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::write(&path, "0.0 0.0 7.0\n1.0 1.0\n").unwrap();
        assert!(PathLengthLaw::tabulated_from_file(&path).is_err());
    }

    #[test]
    fn optical_depth_closed_forms() {
        let dm = PathLengthLaw::diffusion_matched(6.0).unwrap();
        // lambda s - ln(1 + lambda s) at s = 1, lambda = 1.
        assert_relative_eq!(
            dm.optical_depth(1.0).unwrap(),
            1.0 - 2f64.ln(),
            max_relative = 1e-14
        );
        let exp = PathLengthLaw::exponential(0.5).unwrap();
        assert_eq!(exp.optical_depth(3.0).unwrap(), 1.5);
        assert_eq!(triangle().optical_depth(5.0).unwrap(), f64::INFINITY);
    }
}
