//! Tangent overestimators of the concave parts of the coupling and power constraints.

/// Concave part of the small-signal coupling constraint, `-coeff e^{2ν+a}`.
pub fn coupling_concave(nu: f64, a: f64, coeff: f64) -> f64 {
    -coeff * (2.0 * nu + a).exp()
}

/// Tangent of [`coupling_concave`] at `(nu_ref, a_ref)`.
pub fn linearize_l1(nu: f64, a: f64, nu_ref: f64, a_ref: f64, coeff: f64) -> f64 {
    -coeff * (2.0 * nu_ref + a_ref).exp() * (2.0 * (nu - nu_ref) + (a - a_ref) + 1.0)
}

/// Gradient of [`linearize_l1`] in `(ν, a)`.
pub fn linearize_l1_gradient(nu_ref: f64, a_ref: f64, coeff: f64) -> [f64; 2] {
    let e = coeff * (2.0 * nu_ref + a_ref).exp();
    [-2.0 * e, -e]
}

/// Concave part of the peak-power constraint, `-(αδ/4)(e^{2ν+a} + e^a)`.
pub fn power_concave(nu: f64, a: f64, delta_coeff: f64) -> f64 {
    -delta_coeff * ((2.0 * nu + a).exp() + a.exp())
}

/// Tangent of [`power_concave`] at `(nu_ref, a_ref)`.
pub fn linearize_l2(nu: f64, a: f64, nu_ref: f64, a_ref: f64, delta_coeff: f64) -> f64 {
    -delta_coeff
        * ((2.0 * nu_ref + a_ref).exp() * (2.0 * (nu - nu_ref) + (a - a_ref) + 1.0) + a_ref.exp() * (a - a_ref + 1.0))
}

/// Gradient of [`linearize_l2`] in `(ν, a)`.
pub fn linearize_l2_gradient(nu_ref: f64, a_ref: f64, delta_coeff: f64) -> [f64; 2] {
    let e2 = (2.0 * nu_ref + a_ref).exp();
    let e1 = a_ref.exp();
    [-2.0 * delta_coeff * e2, -delta_coeff * (e2 + e1)]
}
