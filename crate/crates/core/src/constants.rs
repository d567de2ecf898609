//! Constants frozen from `examples/calibrate.rs`. Rerun it after changing a generator.

/// Duality radius `r_d` (half of the calibrated inversion radius), any `d`.
/// Calibration gives 0.3566, 0.3565, 0.3550 for `d = 2, 3, 4`; this is `1/(2√2)` rounded down.
pub const R_D: f64 = 0.3535;

/// Spacing of the sharpness line net, in units of `δ`.
pub const SHARPNESS_NET_CONSTANT: f64 = 1.0;

/// Frostman constant bound for the sharpness point sets, `k = 6..10`.
/// Measured `k = 6` values are 5.57 (`t = 3/2`) and 3.02 (`t = 5/4`).
pub const FROSTMAN_CONSTANT: f64 = 10.0;

/// Constant `A` in `|I_δ| <= A · rhs(ε = 0.1)` with `C_F = 1`.
/// Largest measured ratio over the twenty instances is 1.76.
pub const INCIDENCE_CONSTANT: f64 = 2.0;
