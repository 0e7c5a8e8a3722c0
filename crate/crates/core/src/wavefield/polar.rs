use num_complex::Complex64;

use super::FieldError;

/// Polar-form quantities of a field at one event: R², the phase gradient
/// ∂μS (covariant components, ordered t, x, y, z) and the quantum mass M².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub r2: f64,
    pub grad_s: [f64; 4],
    pub msq: f64,
}

impl Polar {
    /// Local energy E = −∂S/∂t.
    pub fn energy(&self) -> f64 {
        -self.grad_s[0]
    }

    /// Local momentum P = ∇S.
    pub fn momentum(&self) -> [f64; 3] {
        [self.grad_s[1], self.grad_s[2], self.grad_s[3]]
    }

    /// ∂μS ∂^μS with signature (+,−,−,−).
    pub fn grad_s_squared(&self) -> f64 {
        minkowski_square(&self.grad_s)
    }
}

/// (+,−,−,−) square of a four-vector. Unused spatial slots must be zero.
pub fn minkowski_square(v: &[f64; 4]) -> f64 {
    v[0] * v[0] - v[1] * v[1] - v[2] * v[2] - v[3] * v[3]
}

/// Split Φ = R·exp(iS) into R², ∂μS and M² = m² + □R/R using the field value
/// and its analytic first and (diagonal) second derivatives.
///
/// The phase gradient is Im(Φ*∂μΦ)/|Φ|², so no branch of the logarithm is
/// ever chosen. □R/R comes from differentiating R = √(ΦΦ*) twice:
/// R ∂μ∂μR = |∂μΦ|² + Re(Φ*∂μ∂μΦ) − (Re Φ*∂μΦ)²/R².
///
/// Components of `dphi`/`d2phi` beyond `dim` spatial directions are ignored.
pub fn polar_decompose(
    phi: Complex64,
    dphi: &[Complex64; 4],
    d2phi: &[Complex64; 4],
    dim: usize,
    mass: f64,
    node_threshold: f64,
) -> Result<Polar, FieldError> {
    let r2 = phi.norm_sqr();
    if !(r2 > node_threshold) {
        return Err(FieldError::NodeProximity {
            r2,
            threshold: node_threshold,
        });
    }
    let conj = phi.conj();
    let mut grad_s = [0.0; 4];
    let mut box_r_over_r = 0.0;
    for mu in 0..=dim {
        let bilinear = conj * dphi[mu];
        grad_s[mu] = bilinear.im / r2;
        let re = bilinear.re;
        let r_ddr = dphi[mu].norm_sqr() + (conj * d2phi[mu]).re - re * re / r2;
        let sign = if mu == 0 { 1.0 } else { -1.0 };
        box_r_over_r += sign * r_ddr / r2;
    }
    Ok(Polar {
        r2,
        grad_s,
        msq: mass * mass + box_r_over_r,
    })
}
