//! Exact Gillespie simulation of the count chain `(X, Y)`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::master::InitialLaw;
use super::ScalarRates;
use crate::error::Result;
use crate::rng::{replicate_stream, Purpose, SimRng};

/// `(X, Y)` at each of the ascending `times`.
pub fn gillespie_path(x0: u64, y0: u64, rates: &ScalarRates, times: &[f64], rng: &mut SimRng) -> Vec<(u64, u64)> {
    let ScalarRates { r, a, b, p, convention } = *rates;
    let (mut x, mut y, mut t) = (x0, y0, 0.0);
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    loop {
        let pair = convention.intensity(b, x);
        let total = x as f64 * (r + a) + pair;
        let dt = if total > 0.0 { rng.sample::<f64, _>(Exp1) / total } else { f64::INFINITY };
        while next < times.len() && times[next] < t + dt {
            out.push((x, y));
            next += 1;
        }
        if next == times.len() {
            return out;
        }
        t += dt;
        let u = rng.random::<f64>() * total;
        if u < x as f64 * r {
            x -= 1;
        } else if u < x as f64 * (r + a) {
            x -= 1;
            y += 1;
        } else {
            x -= 2;
            if rng.random::<f64>() < p {
                y += 1;
            }
        }
    }
}

fn sample_initial(law: &InitialLaw, rng: &mut SimRng) -> (u64, u64) {
    match law {
        InitialLaw::Fixed { x0, y0 } => (*x0, *y0),
        InitialLaw::Poisson { mean_x, y0 } => {
            let x = if *mean_x > 0.0 { rng.sample(rand_distr::Poisson::new(*mean_x).expect("validated mean")) as u64 } else { 0 };
            (x, *y0)
        }
        InitialLaw::Table { entries } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for &(x, y, w) in entries {
                acc += w;
                if u < acc {
                    return (x, y);
                }
            }
            entries.last().map(|e| (e.0, e.1)).unwrap_or((0, 0))
        }
    }
}

/// Ensemble statistics at each checkpoint.
#[derive(Clone, Debug)]
pub struct NonspatialSummary {
    pub times: Vec<f64>,
    pub replicates: usize,
    /// Fraction of replicates with `Y = 0`.
    pub survival: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    /// `E[X (X - 1)]`
    pub factorial_x: Vec<f64>,
    /// Per-replicate paths, kept when requested.
    pub paths: Vec<Vec<(u64, u64)>>,
}

/// Runs `replicates` independent chains; replicate `i` uses the jump stream
/// of replicate `i` (and its initial stream for random starts).
pub fn simulate_nonspatial(
    law: &InitialLaw,
    rates: &ScalarRates,
    times: &[f64],
    replicates: usize,
    master_seed: u64,
    keep_paths: bool,
) -> Result<NonspatialSummary> {
    rates.validate()?;
    law.validate()?;
    let paths: Vec<Vec<(u64, u64)>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut init_rng = replicate_stream(master_seed, rep, Purpose::Initial);
            let (x0, y0) = sample_initial(law, &mut init_rng);
            let mut rng = replicate_stream(master_seed, rep, Purpose::Jump);
            gillespie_path(x0, y0, rates, times, &mut rng)
        })
        .collect();
    let n = replicates.max(1) as f64;
    let k = times.len();
    let mut s = NonspatialSummary {
        times: times.to_vec(),
        replicates,
        survival: vec![0.0; k],
        mean_x: vec![0.0; k],
        mean_y: vec![0.0; k],
        factorial_x: vec![0.0; k],
        paths: Vec::new(),
    };
    for path in &paths {
        for (i, &(x, y)) in path.iter().enumerate() {
            s.survival[i] += f64::from(u8::from(y == 0)) / n;
            s.mean_x[i] += x as f64 / n;
            s.mean_y[i] += y as f64 / n;
            s.factorial_x[i] += (x * x.saturating_sub(1)) as f64 / n;
        }
    }
    if keep_paths {
        s.paths = paths;
    }
    Ok(s)
}
