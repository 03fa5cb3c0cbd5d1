//! Reaction-rate model: repair `r`, death `a`, pairwise interaction `b`,
//! lethal-pair probability `p`, interaction kernels and placement laws for
//! newly created lethal lesions.
//!
//! Local concentrations `<Gamma_q, nu>` exclude the focal lesion(s): a lesion
//! never contributes to its own rate.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::state::{Exclude, LesionType, SystemState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeFilter {
    XOnly,
    YOnly,
    #[default]
    Both,
}

impl TypeFilter {
    pub fn includes(self, ty: LesionType) -> bool {
        match self {
            TypeFilter::Both => true,
            TypeFilter::XOnly => ty == LesionType::X,
            TypeFilter::YOnly => ty == LesionType::Y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelShape {
    Constant { value: f64 },
    /// `weight * 1{|d| < epsilon}`
    BallIndicator { weight: f64, epsilon: f64 },
    /// `weight / sqrt(2 pi eps^2) * exp(-d^2 / (2 eps^2))`
    Gaussian { weight: f64, epsilon: f64 },
    /// Sum of two Gaussians, giving a sharp core with a fat tail.
    TwoGaussian { weight1: f64, epsilon1: f64, weight2: f64, epsilon2: f64 },
}

/// Spatial interaction kernel, a function of the separation distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct Kernel {
    pub shape: KernelShape,
    pub filter: TypeFilter,
}

#[inline]
fn gaussian(weight: f64, eps: f64, d2: f64) -> f64 {
    weight / (2.0 * PI * eps * eps).sqrt() * (-d2 / (2.0 * eps * eps)).exp()
}

impl Kernel {
    pub fn new(shape: KernelShape) -> Result<Self> {
        Self::with_filter(shape, TypeFilter::Both)
    }

    pub fn with_filter(shape: KernelShape, filter: TypeFilter) -> Result<Self> {
        let ok = |w: f64, e: f64| w >= 0.0 && w.is_finite() && e > 0.0 && e.is_finite();
        let valid = match shape {
            KernelShape::Constant { value } => value >= 0.0 && value.is_finite(),
            KernelShape::BallIndicator { weight, epsilon }
            | KernelShape::Gaussian { weight, epsilon } => ok(weight, epsilon),
            KernelShape::TwoGaussian { weight1, epsilon1, weight2, epsilon2 } => {
                ok(weight1, epsilon1) && ok(weight2, epsilon2)
            }
        };
        if !valid {
            return Err(Error::Config(format!(
                "kernel {shape:?}: weights must be >= 0 and widths > 0"
            )));
        }
        Ok(Self { shape, filter })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(KernelShape::Constant { value }).expect("valid constant kernel")
    }

    /// Kernel value at squared separation `d2`.
    #[inline]
    pub fn eval_sq(&self, d2: f64) -> f64 {
        match self.shape {
            KernelShape::Constant { value } => value,
            KernelShape::BallIndicator { weight, epsilon } => {
                if d2 < epsilon * epsilon {
                    weight
                } else {
                    0.0
                }
            }
            KernelShape::Gaussian { weight, epsilon } => gaussian(weight, epsilon, d2),
            KernelShape::TwoGaussian { weight1, epsilon1, weight2, epsilon2 } => {
                gaussian(weight1, epsilon1, d2) + gaussian(weight2, epsilon2, d2)
            }
        }
    }

    #[inline]
    pub fn eval(&self, distance: f64) -> f64 {
        self.eval_sq(distance * distance)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.shape, KernelShape::Constant { .. })
    }

    /// Distance beyond which the kernel vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self.shape {
            KernelShape::BallIndicator { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    /// Uniform upper bound of the kernel.
    pub fn sup(&self) -> f64 {
        self.eval_sq(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpec {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon2: Option<f64>,
    #[serde(default)]
    types: TypeFilter,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(s: KernelSpec) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("kernel `{}` needs `{name}`", s.kind)))
        };
        let shape = match s.kind.as_str() {
            "constant" => KernelShape::Constant { value: need(s.value, "value")? },
            "ball_indicator" => KernelShape::BallIndicator {
                weight: need(s.weight, "weight")?,
                epsilon: need(s.epsilon, "epsilon")?,
            },
            "gaussian" => KernelShape::Gaussian {
                weight: need(s.weight, "weight")?,
                epsilon: need(s.epsilon, "epsilon")?,
            },
            "two_gaussian" => KernelShape::TwoGaussian {
                weight1: need(s.weight, "weight")?,
                epsilon1: need(s.epsilon, "epsilon")?,
                weight2: need(s.weight2, "weight2")?,
                epsilon2: need(s.epsilon2, "epsilon2")?,
            },
            other => return Err(Error::Config(format!("unknown kernel kind `{other}`"))),
        };
        Kernel::with_filter(shape, s.types)
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        let mut s = KernelSpec {
            kind: String::new(),
            value: None,
            weight: None,
            epsilon: None,
            weight2: None,
            epsilon2: None,
            types: k.filter,
        };
        match k.shape {
            KernelShape::Constant { value } => {
                s.kind = "constant".into();
                s.value = Some(value);
            }
            KernelShape::BallIndicator { weight, epsilon } => {
                s.kind = "ball_indicator".into();
                s.weight = Some(weight);
                s.epsilon = Some(epsilon);
            }
            KernelShape::Gaussian { weight, epsilon } => {
                s.kind = "gaussian".into();
                s.weight = Some(weight);
                s.epsilon = Some(epsilon);
            }
            KernelShape::TwoGaussian { weight1, epsilon1, weight2, epsilon2 } => {
                s.kind = "two_gaussian".into();
                s.weight = Some(weight1);
                s.epsilon = Some(epsilon1);
                s.weight2 = Some(weight2);
                s.epsilon2 = Some(epsilon2);
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Response `g(v)` of a rate to the local concentration `v`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Response {
    #[default]
    Constant,
    /// `1 + 1/(v+1)` or `1 - 1/(v+1)`
    Saturating { sign: Sign },
    /// `1 + slope * v`
    Affine { slope: f64 },
}

impl Response {
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            Response::Constant => 1.0,
            Response::Saturating { sign: Sign::Plus } => 1.0 + 1.0 / (v + 1.0),
            Response::Saturating { sign: Sign::Minus } => 1.0 - 1.0 / (v + 1.0),
            Response::Affine { slope } => 1.0 + slope * v,
        }
    }

    /// Coefficients `(c0, c1)` with `g(v) <= c0 + c1 * v` for `v >= 0`.
    pub fn growth_bound(&self) -> (f64, f64) {
        match *self {
            Response::Constant => (1.0, 0.0),
            Response::Saturating { sign: Sign::Plus } => (2.0, 0.0),
            Response::Saturating { sign: Sign::Minus } => (1.0, 0.0),
            Response::Affine { slope } => (1.0, slope.max(0.0)),
        }
    }
}

pub(crate) fn check_rate(name: &'static str, value: f64, cap: Option<f64>) -> Result<f64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidRate { name, value });
    }
    if let Some(cap) = cap {
        if value > cap {
            return Err(Error::RateCap { name, value, cap });
        }
    }
    Ok(value)
}

/// A per-lesion rate `base * g(<Gamma_q, nu>)` for the repair or death channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnaryRate {
    pub base: f64,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    #[serde(default)]
    pub response: Response,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

fn default_kernel() -> Kernel {
    Kernel::constant(1.0)
}

impl UnaryRate {
    pub fn constant(base: f64) -> Self {
        Self { base, kernel: default_kernel(), response: Response::Constant, cap: None }
    }

    pub fn is_spatially_constant(&self) -> bool {
        self.response == Response::Constant
    }
}

/// Separation-dependent pair rate `bbar(|q1 - q2|) * g(<Gamma^b, nu>)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRate {
    pub kernel: Kernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_kernel: Option<Kernel>,
    #[serde(default)]
    pub response: Response,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

impl PairRate {
    pub fn constant(b: f64) -> Self {
        Self { kernel: Kernel::constant(b), density_kernel: None, response: Response::Constant, cap: None }
    }

    pub fn is_spatially_constant(&self) -> bool {
        self.kernel.is_constant() && (self.density_kernel.is_none() || self.response == Response::Constant)
    }
}

/// Probability that an interacting pair produces a lethal lesion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairProbability {
    Constant { p: f64 },
    /// `p0 * exp(-|q1 - q2| / length)`
    Exponential { p0: f64, length: f64 },
    /// `near` below `radius`, `far` beyond.
    Step { near: f64, far: f64, radius: f64 },
}

impl PairProbability {
    pub fn eval(&self, q1: &Point, q2: &Point) -> f64 {
        match *self {
            PairProbability::Constant { p } => p,
            PairProbability::Exponential { p0, length } => p0 * (-q1.dist(q2) / length).exp(),
            PairProbability::Step { near, far, radius } => {
                if q1.dist(q2) < radius {
                    near
                } else {
                    far
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        let ok = match *self {
            PairProbability::Constant { p } => unit(p),
            PairProbability::Exponential { p0, length } => unit(p0) && length > 0.0,
            PairProbability::Step { near, far, radius } => unit(near) && unit(far) && radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("pair probability {self:?} must lie in [0,1]")))
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PairProbability::Constant { .. })
    }
}

/// Where a newly created lethal lesion is placed relative to its parent(s).
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// At the parent; for a pair, at one of the two parents chosen uniformly.
    #[default]
    AtParent,
    Midpoint,
    /// `sum_j w_j delta_{alpha_j q1 + (1 - alpha_j) q2}`
    SegmentMixture { weights: Vec<f64>, alphas: Vec<f64> },
    SegmentUniform,
}

impl Placement {
    pub fn validate(&self) -> Result<()> {
        if let Placement::SegmentMixture { weights, alphas } = self {
            let sum: f64 = weights.iter().sum();
            if weights.is_empty()
                || weights.len() != alphas.len()
                || weights.iter().any(|w| *w < 0.0)
                || (sum - 1.0).abs() > 1e-9
                || alphas.iter().any(|a| !(0.0..=1.0).contains(a))
            {
                return Err(Error::Config(
                    "segment mixture needs matching weights summing to 1 and alphas in [0,1]".into(),
                ));
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, q1: &Point, q2: &Point, rng: &mut R) -> Point {
        match self {
            Placement::AtParent => {
                if rng.random::<f64>() < 0.5 {
                    *q1
                } else {
                    *q2
                }
            }
            Placement::Midpoint => q1.lerp(q2, 0.5),
            Placement::SegmentMixture { weights, alphas } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = alphas.len() - 1;
                for (j, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                q1.lerp(q2, alphas[pick])
            }
            Placement::SegmentUniform => q1.lerp(q2, rng.random::<f64>()),
        }
    }

    /// Sample a position for a lethal lesion created from one or two parents.
    pub fn sample<R: Rng + ?Sized>(&self, domain: &Domain, parents: &[Point], rng: &mut R) -> Result<Point> {
        let q = match parents {
            [q] => *q,
            [q1, q2] => self.draw(q1, q2, rng),
            _ => return Err(Error::Input("placement needs one or two parents".into())),
        };
        if !domain.contains_unchecked(&q) {
            return Err(Error::Placement(q));
        }
        Ok(q)
    }
}

/// The full reaction model.
///
/// `scale` is the population scale `K` of the large-population rescaling:
/// concentrations seen by the response functions are divided by `K` and the
/// pair rate is divided by `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateModel {
    pub repair: UnaryRate,
    pub death: UnaryRate,
    pub pair: PairRate,
    pub lethal_prob: PairProbability,
    #[serde(default)]
    pub death_placement: Placement,
    #[serde(default = "midpoint")]
    pub pair_placement: Placement,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
}

fn midpoint() -> Placement {
    Placement::Midpoint
}
fn one() -> f64 {
    1.0
}
fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl RateModel {
    /// Constant rates with global kernels.
    pub fn constant(r: f64, a: f64, b: f64, p: f64) -> Self {
        Self {
            repair: UnaryRate::constant(r),
            death: UnaryRate::constant(a),
            pair: PairRate::constant(b),
            lethal_prob: PairProbability::Constant { p },
            death_placement: Placement::AtParent,
            pair_placement: Placement::Midpoint,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r", &self.repair), ("a", &self.death)] {
            if !(r.base >= 0.0 && r.base.is_finite()) {
                return Err(Error::Config(format!("{name}: base rate must be >= 0")));
            }
        }
        if !(self.scale >= 1.0 && self.scale.is_finite()) {
            return Err(Error::Config("scale K must be >= 1".into()));
        }
        self.lethal_prob.validate()?;
        self.death_placement.validate()?;
        self.pair_placement.validate()
    }

    /// Copy with the large-population rescaling applied.
    pub fn rescaled(&self, k: f64) -> Self {
        Self { scale: k, ..self.clone() }
    }

    /// True when every rate is independent of positions and concentrations,
    /// so channel totals have closed forms.
    pub fn is_spatially_constant(&self) -> bool {
        self.repair.is_spatially_constant()
            && self.death.is_spatially_constant()
            && self.pair.is_spatially_constant()
            && self.lethal_prob.is_constant()
    }

    fn unary(&self, name: &'static str, rate: &UnaryRate, q: &Point, state: &SystemState, exclude: Exclude) -> Result<f64> {
        let g = if rate.response == Response::Constant {
            1.0
        } else {
            let v = state.kernel_mass_excluding(q, &rate.kernel, exclude) / self.scale;
            rate.response.eval(v)
        };
        check_rate(name, rate.base * g, rate.cap)
    }

    /// Repair rate of an X lesion at `q`, excluding `exclude` from the local concentration.
    pub fn eval_r(&self, q: &Point, state: &SystemState, exclude: Exclude) -> Result<f64> {
        self.unary("r", &self.repair, q, state, exclude)
    }

    pub fn eval_a(&self, q: &Point, state: &SystemState, exclude: Exclude) -> Result<f64> {
        self.unary("a", &self.death, q, state, exclude)
    }

    /// Interaction rate of the pair `(q1, q2)`. The concentration term is
    /// evaluated at the pair midpoint without the two focal lesions.
    pub fn eval_b_pair(&self, q1: &Point, q2: &Point, state: &SystemState, exclude: Exclude) -> Result<f64> {
        if q1 == q2 {
            return Err(Error::DegeneratePair(*q1));
        }
        Ok(self.pair_rate_sq(q1, q2, q1.dist_sq(q2), state, exclude)?)
    }

    #[inline]
    pub(crate) fn pair_rate_sq(&self, q1: &Point, q2: &Point, d2: f64, state: &SystemState, exclude: Exclude) -> Result<f64> {
        let bbar = self.pair.kernel.eval_sq(d2);
        let g = match (&self.pair.density_kernel, self.pair.response) {
            (Some(kernel), response) if response != Response::Constant && bbar > 0.0 => {
                let mid = q1.lerp(q2, 0.5);
                response.eval(state.kernel_mass_excluding(&mid, kernel, exclude) / self.scale)
            }
            _ => 1.0,
        };
        check_rate("b", bbar * g, self.pair.cap).map(|b| b / self.scale)
    }

    pub fn eval_p(&self, q1: &Point, q2: &Point) -> f64 {
        self.lethal_prob.eval(q1, q2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn state_with(xs: Vec<Point>, ys: Vec<Point>) -> SystemState {
        SystemState::new(0.0, xs, ys).unwrap()
    }

    #[test]
    fn constant_repair_ignores_state() {
        let m = RateModel::constant(4.0, 0.0, 0.0, 1.0);
        let s = state_with(vec![Point::xy(0.1, 0.1); 3], vec![]);
        assert_eq!(m.eval_r(&Point::xy(0.5, 0.5), &s, Exclude::None).unwrap(), 4.0);
    }

    #[test]
    fn saturating_response_on_empty_neighborhood() {
        let mut m = RateModel::constant(4.0, 0.0, 0.0, 1.0);
        m.repair.kernel = Kernel::new(KernelShape::BallIndicator { weight: 1.0, epsilon: 0.1 }).unwrap();
        m.repair.response = Response::Saturating { sign: Sign::Plus };
        let s = state_with(vec![], vec![]);
        assert_eq!(m.eval_r(&Point::xy(0.5, 0.5), &s, Exclude::None).unwrap(), 8.0);
    }

    #[test]
    fn cap_violation_is_an_error() {
        let mut m = RateModel::constant(6.0, 0.0, 0.0, 1.0);
        m.repair.response = Response::Saturating { sign: Sign::Plus };
        m.repair.cap = Some(10.0);
        let s = state_with(vec![], vec![]);
        let err = m.eval_r(&Point::xy(0.5, 0.5), &s, Exclude::None).unwrap_err();
        assert!(matches!(err, Error::RateCap { value, cap, .. } if value == 12.0 && cap == 10.0));
    }

    #[test]
    fn negative_response_is_an_error() {
        let mut m = RateModel::constant(1.0, 0.0, 0.0, 1.0);
        m.repair.response = Response::Affine { slope: -1.0 };
        let s = state_with(vec![Point::xy(0.5, 0.5), Point::xy(0.5, 0.51)], vec![]);
        let err = m.eval_r(&Point::xy(0.5, 0.5), &s, Exclude::None).unwrap_err();
        assert!(matches!(err, Error::InvalidRate { .. }));
        assert!(err.is_config());
    }

    #[test]
    fn step_pair_rate() {
        let mut m = RateModel::constant(0.0, 0.0, 0.0, 1.0);
        m.pair.kernel = Kernel::new(KernelShape::BallIndicator { weight: 0.1, epsilon: 0.5 }).unwrap();
        let s = state_with(vec![], vec![]);
        let b = m.eval_b_pair(&Point::xy(0.0, 0.0), &Point::xy(0.3, 0.0), &s, Exclude::None).unwrap();
        assert_eq!(b, 0.1);
        let b = m.eval_b_pair(&Point::xy(0.0, 0.0), &Point::xy(0.7, 0.0), &s, Exclude::None).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn gaussian_pair_rate_at_contact() {
        let mut m = RateModel::constant(0.0, 0.0, 0.0, 1.0);
        m.pair.kernel = Kernel::new(KernelShape::Gaussian { weight: 1.0, epsilon: 1.0 }).unwrap();
        let s = state_with(vec![], vec![]);
        let b = m.eval_b_pair(&Point::xy(0.0, 0.0), &Point::xy(1e-9, 0.0), &s, Exclude::None).unwrap();
        assert!((b - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn coincident_pair_is_rejected() {
        let m = RateModel::constant(0.0, 0.0, 1.0, 1.0);
        let s = state_with(vec![], vec![]);
        let q = Point::xy(0.2, 0.2);
        assert!(matches!(m.eval_b_pair(&q, &q, &s, Exclude::None), Err(Error::DegeneratePair(_))));
    }

    #[test]
    fn rescaling_divides_pair_rate() {
        let m = RateModel::constant(1.0, 1.0, 0.5, 1.0).rescaled(10.0);
        let s = state_with(vec![], vec![]);
        let b = m.eval_b_pair(&Point::xy(0.0, 0.0), &Point::xy(0.1, 0.0), &s, Exclude::None).unwrap();
        assert!((b - 0.05).abs() < 1e-15);
        assert_eq!(m.eval_r(&Point::xy(0.0, 0.0), &s, Exclude::None).unwrap(), 1.0);
    }

    #[test]
    fn two_gaussian_is_sum_of_gaussians() {
        let g1 = Kernel::new(KernelShape::Gaussian { weight: 0.3, epsilon: 0.05 }).unwrap();
        let g2 = Kernel::new(KernelShape::Gaussian { weight: 0.02, epsilon: 0.5 }).unwrap();
        let two = Kernel::new(KernelShape::TwoGaussian { weight1: 0.3, epsilon1: 0.05, weight2: 0.02, epsilon2: 0.5 }).unwrap();
        for i in 0..200 {
            let d = i as f64 * 0.01;
            assert!((two.eval(d) - g1.eval(d) - g2.eval(d)).abs() < 1e-15);
            if d > 0.5 {
                assert!(two.eval(d) > g1.eval(d));
            }
        }
    }

    #[test]
    fn invalid_kernels_rejected() {
        assert!(Kernel::new(KernelShape::Gaussian { weight: 1.0, epsilon: 0.0 }).is_err());
        assert!(Kernel::new(KernelShape::BallIndicator { weight: -1.0, epsilon: 1.0 }).is_err());
    }

    #[test]
    fn placement_examples() {
        let dom = Domain::cuboid(Point::xy(-1.0, -1.0), Point::xy(2.0, 2.0)).unwrap();
        let mut rng = stream(1, 0);
        let q = Placement::Midpoint.sample(&dom, &[Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)], &mut rng).unwrap();
        assert_eq!(q, Point::xy(0.5, 0.0));
        let q = Placement::AtParent.sample(&dom, &[Point::xy(0.3, 0.3)], &mut rng).unwrap();
        assert_eq!(q, Point::xy(0.3, 0.3));

        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += Placement::SegmentUniform
                .sample(&dom, &[Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)], &mut rng)
                .unwrap()
                .get(0);
        }
        let tol = 3.0 * (1.0 / 12f64).sqrt() / (n as f64).sqrt();
        assert!((sum / n as f64 - 0.5).abs() < tol);
    }

    #[test]
    fn mixture_validation() {
        assert!(Placement::SegmentMixture { weights: vec![0.5, 0.4], alphas: vec![0.1, 0.2] }.validate().is_err());
        assert!(Placement::SegmentMixture { weights: vec![0.5, 0.5], alphas: vec![0.1, 1.2] }.validate().is_err());
        assert!(Placement::SegmentMixture { weights: vec![0.5, 0.5], alphas: vec![0.1, 0.9] }.validate().is_ok());
    }

    #[test]
    fn kernel_spec_round_trip() {
        let k = Kernel::with_filter(
            KernelShape::TwoGaussian { weight1: 1.0, epsilon1: 0.1, weight2: 0.5, epsilon2: 1.0 },
            TypeFilter::XOnly,
        )
        .unwrap();
        let text = toml::to_string(&k).unwrap();
        let back: Kernel = toml::from_str(&text).unwrap();
        assert_eq!(k, back);
        assert!(toml::from_str::<Kernel>("kind = \"gaussian\"\nweight = 1.0\n").is_err());
        assert!(toml::from_str::<Kernel>("kind = \"constant\"\nvalue = 1.0\nbogus = 2\n").is_err());
    }

    fn random_point(rng: &mut impl Rng) -> Point {
        Point::xy(rng.random(), rng.random())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pair_rate_is_symmetric(seed in 0u64..10_000) {
            let mut rng = stream(seed, 0);
            let mut m = RateModel::constant(1.0, 1.0, 0.0, 1.0);
            m.pair.kernel = Kernel::new(KernelShape::Gaussian { weight: 0.2, epsilon: 0.1 }).unwrap();
            m.pair.density_kernel = Some(Kernel::new(KernelShape::BallIndicator { weight: 1.0, epsilon: 0.3 }).unwrap());
            m.pair.response = Response::Affine { slope: 0.5 };
            let xs: Vec<Point> = (0..10).map(|_| random_point(&mut rng)).collect();
            let s = state_with(xs.clone(), vec![random_point(&mut rng)]);
            for _ in 0..16 {
                let (q1, q2) = (random_point(&mut rng), random_point(&mut rng));
                let b12 = m.eval_b_pair(&q1, &q2, &s, Exclude::None).unwrap();
                let b21 = m.eval_b_pair(&q2, &q1, &s, Exclude::None).unwrap();
                prop_assert!((b12 - b21).abs() <= 1e-15 * b12.max(1.0));
                prop_assert_eq!(m.eval_p(&q1, &q2), m.eval_p(&q2, &q1));
            }
        }

        #[test]
        fn rates_respect_growth_bounds(seed in 0u64..10_000, n in 0usize..30) {
            let mut rng = stream(seed, 1);
            let gauss = Kernel::new(KernelShape::Gaussian { weight: 0.05, epsilon: 0.2 }).unwrap();
            let mut m = RateModel::constant(2.0, 0.3, 0.0, 1.0);
            m.repair.kernel = gauss;
            m.repair.response = Response::Saturating { sign: Sign::Plus };
            m.death.kernel = gauss;
            m.death.response = Response::Affine { slope: 0.7 };
            m.pair.kernel = Kernel::new(KernelShape::BallIndicator { weight: 0.4, epsilon: 0.25 }).unwrap();
            m.pair.density_kernel = Some(gauss);
            m.pair.response = Response::Affine { slope: 0.2 };
            let xs: Vec<Point> = (0..n).map(|_| random_point(&mut rng)).collect();
            let s = state_with(xs, vec![]);
            let total = s.total_mass();
            let vmax = total as f64 * gauss.sup();
            let q = random_point(&mut rng);
            let r = m.eval_r(&q, &s, Exclude::None).unwrap();
            let (c0, _) = m.repair.response.growth_bound();
            prop_assert!(r <= m.repair.base * c0 + 1e-12);
            let a = m.eval_a(&q, &s, Exclude::None).unwrap();
            let (c0, c1) = m.death.response.growth_bound();
            prop_assert!(a <= m.death.base * c0.max(c1) * (1.0 + vmax) + 1e-12);
            let q2 = random_point(&mut rng);
            let b = m.eval_b_pair(&q, &q2, &s, Exclude::None).unwrap();
            let (c0, c1) = m.pair.response.growth_bound();
            prop_assert!(b <= m.pair.kernel.sup() * c0.max(c1) * (1.0 + vmax) + 1e-12);
        }

        #[test]
        fn placement_stays_on_segment(seed in 0u64..10_000) {
            let mut rng = stream(seed, 2);
            let dom = Domain::disk(Point::xy(0.5, 0.5), 0.5).unwrap();
            let specs = [
                Placement::Midpoint,
                Placement::SegmentUniform,
                Placement::AtParent,
                Placement::SegmentMixture { weights: vec![0.3, 0.7], alphas: vec![0.25, 0.9] },
            ];
            let q1 = dom.sample_uniform(&mut rng);
            let q2 = dom.sample_uniform(&mut rng);
            for spec in &specs {
                let q = spec.sample(&dom, &[q1, q2], &mut rng).unwrap();
                // distance from q to the segment [q1, q2]
                let d = q2 - q1;
                let t = ((q - q1).get(0) * d.get(0) + (q - q1).get(1) * d.get(1)) / d.norm_sq();
                let proj = q1 + d * t.clamp(0.0, 1.0);
                prop_assert!(q.dist(&proj) < 1e-12);
            }
        }
    }
}
