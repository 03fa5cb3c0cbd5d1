//! Mean lesion-count ODEs.
//!
//! Full system: `y' = a x + b x^2`, `x' = -(a + r) x - 2 b L(x)` where the
//! pair loss `L(x)` is `x` in the literal form and `x^2` in the
//! pair-consistent form. The reduced system drops the pair loss from `x'`
//! and has a closed form.

use serde::{Deserialize, Serialize};

use super::integrate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MkmVariant {
    /// `x' = -(a + r) x - 2 b x`
    #[default]
    Literal,
    /// `x' = -(a + r) x - 2 b x^2`
    PairConsistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MkmParams {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub variant: MkmVariant,
    #[serde(default)]
    pub reduced: bool,
}

/// `(t, x, y)` at each requested time.
pub fn solve_mkm(x0: f64, y0: f64, params: &MkmParams, times: &[f64], dt: f64) -> Vec<(f64, f64, f64)> {
    let MkmParams { r, a, b, variant, reduced } = *params;
    let sol = integrate(vec![x0, y0], times, &[], dt, |_, _, u, du| {
        let x = u[0];
        let pair_loss = if reduced {
            0.0
        } else {
            match variant {
                MkmVariant::Literal => 2.0 * b * x,
                MkmVariant::PairConsistent => 2.0 * b * x * x,
            }
        };
        du[0] = -(a + r) * x - pair_loss;
        du[1] = a * x + b * x * x;
    });
    times.iter().zip(sol).map(|(t, u)| (*t, u[0], u[1])).collect()
}

/// Closed form of the reduced system.
pub fn reduced_closed_form(x0: f64, y0: f64, r: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    let k = a + r;
    if k == 0.0 {
        return (x0, y0 + b * x0 * x0 * t);
    }
    let x = x0 * (-k * t).exp();
    let y = y0 + a * x0 * (1.0 - (-k * t).exp()) / k + b * x0 * x0 * (1.0 - (-2.0 * k * t).exp()) / (2.0 * k);
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(b: f64, variant: MkmVariant, reduced: bool) -> MkmParams {
        MkmParams { r: 4.0, a: 0.1, b, variant, reduced }
    }

    #[test]
    fn no_lesions_stay_put() {
        let out = solve_mkm(0.0, 3.0, &params(0.1, MkmVariant::Literal, false), &[1.0, 2.0], 1e-3);
        for (_, x, y) in out {
            assert_eq!(x, 0.0);
            assert_eq!(y, 3.0);
        }
    }

    #[test]
    fn reduced_matches_closed_form() {
        let p = params(0.05, MkmVariant::Literal, true);
        let out = solve_mkm(20.0, 0.0, &p, &[0.5, 2.0], 1e-3);
        assert!((out[0].1 - 2.5735).abs() < 2e-3);
        assert!((out[0].1 - 20.0 * (-2.05f64).exp()).abs() < 1e-10);
        for (t, x, y) in out {
            let (cx, cy) = reduced_closed_form(20.0, 0.0, 4.0, 0.1, 0.05, t);
            assert!((x - cx).abs() < 1e-10 && (y - cy).abs() < 1e-10);
        }
    }

    #[test]
    fn full_equals_reduced_without_pairs() {
        let times = [0.1, 0.7, 3.0];
        for variant in [MkmVariant::Literal, MkmVariant::PairConsistent] {
            let full = solve_mkm(12.0, 1.0, &params(0.0, variant, false), &times, 1e-3);
            let red = solve_mkm(12.0, 1.0, &params(0.0, variant, true), &times, 1e-3);
            for (f, r) in full.iter().zip(&red) {
                assert!((f.1 - r.1).abs() < 1e-12 && (f.2 - r.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variants_differ_in_pair_loss() {
        let lit = solve_mkm(10.0, 0.0, &params(0.1, MkmVariant::Literal, false), &[0.2], 1e-4);
        let pc = solve_mkm(10.0, 0.0, &params(0.1, MkmVariant::PairConsistent, false), &[0.2], 1e-4);
        assert!(pc[0].1 < lit[0].1);
        // literal form is linear: x = x0 exp(-(a + r + 2b) t)
        assert!((lit[0].1 - 10.0 * (-(4.3f64) * 0.2).exp()).abs() < 1e-9);
    }
}
