//! Deterministic and non-spatial oracles: the master equation for the
//! counts `(X, Y)`, the mean ODEs, an exact Gillespie simulator and the
//! large-population limit equations.

pub mod limit;
pub mod master;
pub mod mkm;
pub mod nonspatial;

use serde::{Deserialize, Serialize};

/// How the pair channel intensity depends on the number `x` of X lesions.
///
/// The spatial engine fires every unordered pair at rate `b`, i.e. `Unordered`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairConvention {
    /// `b x (x - 1) / 2`
    #[default]
    Unordered,
    /// `b x (x - 1)`
    Ordered,
    /// `b x^2`, applied only while `x >= 2`
    Square,
}

impl PairConvention {
    #[inline]
    pub fn intensity(self, b: f64, x: u64) -> f64 {
        if x < 2 {
            return 0.0;
        }
        let x = x as f64;
        match self {
            PairConvention::Unordered => b * x * (x - 1.0) / 2.0,
            PairConvention::Ordered => b * x * (x - 1.0),
            PairConvention::Square => b * x * x,
        }
    }

    /// Pair intensity per unit squared density in the large-population limit,
    /// i.e. `c` in `c * b * u^2`.
    pub fn limit_factor(self) -> f64 {
        match self {
            PairConvention::Unordered => 0.5,
            PairConvention::Ordered | PairConvention::Square => 1.0,
        }
    }
}

/// Constant rates of the non-spatial model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarRates {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub convention: PairConvention,
}

fn one() -> f64 {
    1.0
}

impl ScalarRates {
    pub fn new(r: f64, a: f64, b: f64) -> Self {
        Self { r, a, b, p: 1.0, convention: PairConvention::Unordered }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = [self.r, self.a, self.b].iter().all(|v| v.is_finite() && *v >= 0.0) && (0.0..=1.0).contains(&self.p);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config("rates must be >= 0 and p in [0,1]".into()))
        }
    }
}

/// Classic fourth-order Runge-Kutta step for `y' = f(t, y)`.
pub(crate) fn rk4_step(t: f64, y: &mut [f64], dt: f64, f: &mut impl FnMut(f64, &[f64], &mut [f64])) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates `y' = f(t, y)` from `0` through the ascending `times` with RK4
/// steps no longer than `dt`, never stepping across a time in `breaks`.
/// `f` also receives the start of the current step, so piecewise terms can
/// be switched on the step rather than the stage time.
/// Returns the state at each entry of `times`.
pub(crate) fn integrate(
    y0: Vec<f64>,
    times: &[f64],
    breaks: &[f64],
    dt: f64,
    mut f: impl FnMut(f64, f64, &[f64], &mut [f64]),
) -> Vec<Vec<f64>> {
    let mut y = y0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while target - t > 1e-14 * target.abs().max(1.0) {
            let mut h = dt.min(target - t);
            if let Some(b) = breaks.iter().copied().find(|b| *b > t + 1e-14 && *b < t + h) {
                h = b - t;
            }
            let t0 = t;
            rk4_step(t, &mut y, h, &mut |s, u: &[f64], du: &mut [f64]| f(s, t0, u, du));
            t += h;
        }
        t = t.max(target);
        out.push(y.clone());
    }
    out
}
