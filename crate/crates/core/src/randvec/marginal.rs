use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_ln_pdf, norm_ppf, EULER_GAMMA};

/// One-dimensional marginal law. Lognormal and Gumbel are given by the mean
/// and standard deviation of the physical variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Marginal {
    Normal { mu: f64, sigma: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Gumbel { mu: f64, sigma: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Marginal {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Normal { mu, sigma }.validated()
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Lognormal { mu, sigma }.validated()
    }

    pub fn gumbel(mu: f64, sigma: f64) -> Result<Self> {
        Self::Gumbel { mu, sigma }.validated()
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::Uniform { lower, upper }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Normal { mu, sigma } | Self::Gumbel { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
            Self::Lognormal { mu, sigma } => mu.is_finite() && mu > 0.0 && sigma.is_finite() && sigma > 0.0,
            Self::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && upper > lower,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!("invalid marginal parameters: {self:?}")))
        }
    }

    /// Log-space parameters `(λ, ζ)` of a lognormal from its moments.
    pub fn lognormal_params(mu: f64, sigma: f64) -> (f64, f64) {
        let zeta2 = (sigma * sigma / (mu * mu)).ln_1p();
        (mu.ln() - 0.5 * zeta2, zeta2.sqrt())
    }

    /// Location and scale of a Gumbel (maximum) law from its moments.
    pub fn gumbel_params(mu: f64, sigma: f64) -> (f64, f64) {
        let scale = sigma * 6f64.sqrt() / std::f64::consts::PI;
        (mu - EULER_GAMMA * scale, scale)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Normal { mu, .. } | Self::Lognormal { mu, .. } | Self::Gumbel { mu, .. } => mu,
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Self::Normal { sigma, .. } | Self::Lognormal { sigma, .. } | Self::Gumbel { sigma, .. } => sigma,
            Self::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Self::Normal { .. } | Self::Gumbel { .. } => true,
            Self::Lognormal { .. } => x > 0.0,
            Self::Uniform { lower, upper } => (lower..=upper).contains(&x),
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => norm_ln_pdf((x - mu) / sigma) - sigma.ln(),
            Self::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (lambda, zeta) = Self::lognormal_params(mu, sigma);
                let lx = x.ln();
                norm_ln_pdf((lx - lambda) / zeta) - zeta.ln() - lx
            }
            Self::Gumbel { mu, sigma } => {
                let (loc, scale) = Self::gumbel_params(mu, sigma);
                let t = (x - loc) / scale;
                -scale.ln() - t - (-t).exp()
            }
            Self::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => norm_cdf((x - mu) / sigma),
            Self::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let (lambda, zeta) = Self::lognormal_params(mu, sigma);
                norm_cdf((x.ln() - lambda) / zeta)
            }
            Self::Gumbel { mu, sigma } => {
                let (loc, scale) = Self::gumbel_params(mu, sigma);
                (-(-(x - loc) / scale).exp()).exp()
            }
            Self::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        self.from_standard_normal(norm_ppf(u))
    }

    /// `F⁻¹(Φ(z))`, evaluated without passing through the unit interval where
    /// a closed form exists so the tails keep their precision.
    pub fn from_standard_normal(&self, z: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => mu + sigma * z,
            Self::Lognormal { mu, sigma } => {
                let (lambda, zeta) = Self::lognormal_params(mu, sigma);
                (lambda + zeta * z).exp()
            }
            Self::Gumbel { mu, sigma } => {
                let (loc, scale) = Self::gumbel_params(mu, sigma);
                let lnu = if z > 0.0 { (-norm_cdf(-z)).ln_1p() } else { norm_cdf(z).ln() };
                loc - scale * (-lnu).ln()
            }
            Self::Uniform { lower, upper } => {
                let u = if z > 0.0 { 1.0 - norm_cdf(-z) } else { norm_cdf(z) };
                lower + (upper - lower) * u
            }
        }
    }

    /// `Φ⁻¹(F(x))`.
    pub fn to_standard_normal(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => (x - mu) / sigma,
            Self::Lognormal { mu, sigma } => {
                let (lambda, zeta) = Self::lognormal_params(mu, sigma);
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                (x.ln() - lambda) / zeta
            }
            Self::Gumbel { mu, sigma } => {
                let (loc, scale) = Self::gumbel_params(mu, sigma);
                let e = (-(x - loc) / scale).exp();
                let cdf = (-e).exp();
                if cdf > 0.5 {
                    -norm_ppf(-(-e).exp_m1())
                } else {
                    norm_ppf(cdf)
                }
            }
            Self::Uniform { lower, upper } => {
                let u = (x - lower) / (upper - lower);
                if u > 0.5 {
                    -norm_ppf(1.0 - u)
                } else {
                    norm_ppf(u)
                }
            }
        }
    }
}
