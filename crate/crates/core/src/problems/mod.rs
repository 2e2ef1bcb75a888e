//! Method-of-lines test problems: 1D nonlinear diffusion and 2D field-aligned
//! anisotropic diffusion on the unit interval/square with homogeneous Dirichlet data.

mod diffusion1d;
mod diffusion2d;
mod field;

pub use diffusion1d::{Diffusion1D, Diffusion1DParams};
pub use diffusion2d::{Diffusion2D, Diffusion2DParams};
pub use field::{two_wire_field, Field, DEFAULT_WIRE_POSITIONS, DEFAULT_WIRE_STRENGTHS};

/// Gaussian source `exp(−½((x − ½)/σ)²)`.
pub fn source_gaussian(x: f64, sigma: f64) -> f64 {
    let z = (x - 0.5) / sigma;
    (-0.5 * z * z).exp()
}

/// `g(u) = β₁u + (2/7)β₂·sign(u)|u|^{7/2}`, the flux potential whose derivative is `μ(|u|)`.
pub fn g_flux(u: f64, beta1: f64, beta2: f64) -> f64 {
    let a = u.abs();
    beta1 * u + (2.0 / 7.0) * beta2 * u.signum() * a * a * a * a.sqrt()
}

/// `g'(u) = β₁ + β₂|u|^{5/2}`.
pub fn g_prime(u: f64, beta1: f64, beta2: f64) -> f64 {
    let a = u.abs();
    beta1 + beta2 * a * a * a.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn source_examples() {
        assert_eq!(source_gaussian(0.5, 0.05), 1.0);
        assert_relative_eq!(
            source_gaussian(0.55, 0.05),
            (-0.5f64).exp(),
            max_relative = 1e-12
        );
        for d in [0.01, 0.1, 0.37] {
            assert_relative_eq!(
                source_gaussian(0.5 - d, 0.05),
                source_gaussian(0.5 + d, 0.05),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn flux_examples() {
        assert_eq!(g_flux(0.0, 1.0, 7.0), 0.0);
        assert_relative_eq!(g_flux(1.0, 1.0, 7.0), 3.0, max_relative = 1e-15);
        assert_relative_eq!(g_prime(1.0, 5e-5, 5e-3), 5.05e-3, max_relative = 1e-14);
        assert_eq!(g_flux(-0.3, 0.2, 1.1), -g_flux(0.3, 0.2, 1.1));
    }

    #[test]
    fn g_prime_is_derivative() {
        for u in [-1.3, -0.2, 0.0, 0.05, 0.7, 2.0] {
            let d = 1e-6;
            let fd = (g_flux(u + d, 0.3, 2.0) - g_flux(u - d, 0.3, 2.0)) / (2.0 * d);
            assert_relative_eq!(
                fd,
                g_prime(u, 0.3, 2.0),
                max_relative = 1e-8,
                epsilon = 1e-9
            );
        }
    }
}
