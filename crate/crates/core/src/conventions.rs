//! Normalizations used throughout the crate.
//!
//! * Metric: `g_{ij̄} = ∂_i ∂_j̄ Φ` for the total potential `Φ`.
//! * Kähler form: `ω = (i/2π) g_{ij̄} dz^i ∧ dz̄^j`, so that
//!   `ωⁿ/n! = det g ∏_i dx_i dy_i / π` and `∫_{ℂP¹} ω = 1` for `Φ = log(1+|z|²)`.
//!   A factor of class `d` has volume `dⁿ/n!`.
//! * Prequantum form: `ω_pre = i ∂∂̄Φ = 2π ω`. The Hermitian metric on `L^k`
//!   is `e^{-kΦ}`, its Chern connection is `∇s = ds - k ∂Φ s` in the affine
//!   trivialization and `∇² = -i k ω_pre`. Hamiltonian vector fields solve
//!   `df = ι_{X_f} ω_pre`.
//! * Curvature: `R_{ij̄kl̄} = -∂_k∂_l̄ g_{ij̄} + g^{pq̄} ∂_k g_{iq̄} ∂_l̄ g_{pj̄}`,
//!   `Ric_{ij̄} = g^{kl̄} R_{ij̄kl̄} = -∂_i∂_j̄ log det g`, `S = g^{ij̄} Ric_{ij̄}`.
//!   Round ℂPⁿ has `R_{ij̄kl̄} = g_{ij̄}g_{kl̄} + g_{il̄}g_{kj̄}` and `S = n(n+1)`.
//! * Laplacian: `Δf = g^{ij̄} ∂_i∂_j̄ f` (non-positive spectrum; `Δh = -2h`
//!   for the height function of round ℂP¹).
//! * Norms: `|Ric|² = Ric_{ij̄} Ric_{pq̄} g^{iq̄} g^{pj̄}` and `|R|²` the full
//!   contraction with four inverse metrics; computed in a unitary frame.
//! * Bergman density: `ρ_k = Σ |s_a|² e^{-kΦ}` over an L²(ωⁿ/n!) orthonormal
//!   basis, so `∫ ρ_k ωⁿ/n! = dim H⁰` and on round ℂPⁿ
//!   `ρ_k = (k+1)⋯(k+n)`, i.e. `a₀ = 1`, `a₁ = S/2`.
//! * Matrix convention for operators: `A_{cd} = ⟨A e_c, e_d⟩`.
//! * Density integrals reported against the Chern-number table use `∫ · ωⁿ`
//!   (not divided by `n!`).

/// `∫_{ℂP¹} ω` for the class-one Fubini–Study potential.
pub const LINE_VOLUME: f64 = 1.0;

/// Ratio `ω_pre / ω`.
pub const PREQUANTUM_FACTOR: f64 = 2.0 * std::f64::consts::PI;

/// Value of the symmetric-space constant `c` in `R = c (g g + g g)` for the
/// class-one Fubini–Study metric.
pub const FUBINI_STUDY_CURVATURE: f64 = 1.0;
