//! Explicit constants extracted from the lower-bound arguments.

use std::f64::consts::E;

/// Squared gap `(1 - sqrt(15/17))^2` between the level-set mean and its floor.
pub fn level_gap() -> f64 {
    (1.0 - (15.0_f64 / 17.0).sqrt()).powi(2)
}

/// Lower constant in `t_H^pi >= c * t_rel` and in the nested-exit bound
/// `max_D E_{pi_D}[T_{D^c}] >= c / lambda(B)`.
pub fn exit_lower() -> f64 {
    level_gap() * (20.0_f64 / 19.0).ln() / 4.0
}

/// `b = (1 + e^{-2}) / 2`.
pub fn geom_b() -> f64 {
    (1.0 + (-2.0_f64).exp()) / 2.0
}

/// `1 / (1 - sqrt(b))`, the upper constant relating `t_H^pi` to the geometric
/// relaxation time.
pub fn geom_upper_factor() -> f64 {
    1.0 / (1.0 - geom_b().sqrt())
}

/// Factor `K` with `rel(sqrt(19/20)) >= rel(1/e) / K`, from chaining the
/// comparison `(eps / (1 - eps)) rel(eps) <= rel(1/2)` twice.
pub fn geom_comparison_factor() -> f64 {
    let eps = 1.0 - (19.0_f64 / 20.0).sqrt();
    (1.0 - eps) / eps * (E - 1.0)
}

/// Lower constant in `t_H^pi >= c * rel(1/e)`.
pub fn geom_lower() -> f64 {
    (1.0 / (1.0 - level_gap())).ln() / (2.0 * geom_comparison_factor())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recomputed_values() {
        assert!((exit_lower() - 4.7186e-5).abs() < 1e-8);
        assert!(exit_lower() >= 4.7e-5);
        assert!((geom_upper_factor() - 4.05576).abs() < 1e-5);
        assert!((geom_comparison_factor() - 66.14).abs() < 0.01);
        assert!((geom_lower() - 2.787e-5).abs() < 1e-8);
    }

    #[test]
    fn small_geometric_times_are_covered() {
        // Below 2K the bound t_H^pi >= 1 has to carry the lower constant.
        assert!(geom_lower() * 2.0 * geom_comparison_factor() <= 1.0);
    }
}
