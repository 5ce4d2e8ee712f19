//! The damping coefficient as a group-invariant field on the disk, its averages along
//! the geodesic flow, and sampling estimates of the asymptotic damping constants.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    bolza_translation_length, gauss_legendre, hyperbolic_distance, radius_at_distance, Complex,
    FundamentalDomain, GeodesicState, MobiusTransform,
};

/// Largest quadrature substep used for flow averages.
pub const FLOW_QUADRATURE_STEP: f64 = 0.1;

/// Gauss–Legendre nodes per flow substep.
const FLOW_QUADRATURE_NODES: usize = 8;

/// Default threshold for the geometric-control check.
pub const DEFAULT_CONTROL_THRESHOLD: f64 = 1e-6;

/// Slack allowed when asserting `0 ≤ ⟨a⟩_T ≤ ‖a‖_∞`.
const AVERAGE_SLACK: f64 = 1e-12;

/// Bump radii are capped at half the systole so the translates of one bump are disjoint.
pub fn max_bump_radius() -> f64 {
    0.5 * bolza_translation_length()
}

/// One smooth bump `height · exp(1 − 1/(1 − (d/r)²))` with `d` the hyperbolic distance
/// to `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Complex,
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingKind {
    Constant { value: f64 },
    BumpSum { bumps: Vec<Bump> },
}

/// Compactly supported C^∞ profile on `[0, 1)`, equal to 1 at 0.
pub fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

#[derive(Debug, Clone)]
struct PreparedBump {
    bump: Bump,
    // translates of the reduced center that can reach the closed octagon
    lifts: Vec<Complex>,
}

/// Nonnegative damping field on the Bolza surface.
#[derive(Debug, Clone)]
pub struct DampingField {
    kind: DampingKind,
    sup_norm: f64,
    domain: FundamentalDomain,
    prepared: Vec<PreparedBump>,
}

impl DampingField {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Argument(format!(
                "constant damping must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Self {
            kind: DampingKind::Constant { value },
            sup_norm: value,
            domain: FundamentalDomain::bolza(),
            prepared: Vec::new(),
        })
    }

    pub fn zero() -> Self {
        Self::constant(0.0).expect("zero is a valid constant")
    }

    pub fn bump_sum(bumps: Vec<Bump>) -> Result<Self> {
        let domain = FundamentalDomain::bolza();
        let cap = max_bump_radius();
        let reach = domain.circumradius();
        let mut prepared = Vec::with_capacity(bumps.len());
        for (i, b) in bumps.iter().enumerate() {
            if !(b.radius > 0.0 && b.radius <= cap) {
                return Err(Error::Argument(format!(
                    "bump {i}: radius {} outside (0, {cap:.6}]",
                    b.radius
                )));
            }
            if !(b.height >= 0.0) || !b.height.is_finite() {
                return Err(Error::Argument(format!(
                    "bump {i}: height must be finite and nonnegative"
                )));
            }
            let (c0, _) = domain.unwrap(b.center)?;
            let lifts = orbit_within(&domain, c0, reach + b.radius)?;
            prepared.push(PreparedBump { bump: *b, lifts });
        }
        let sup_norm = bump_sup_bound(&domain, &prepared)?;
        Ok(Self {
            kind: DampingKind::BumpSum { bumps },
            sup_norm,
            domain,
            prepared,
        })
    }

    pub fn from_kind(kind: DampingKind) -> Result<Self> {
        match kind {
            DampingKind::Constant { value } => Self::constant(value),
            DampingKind::BumpSum { bumps } => Self::bump_sum(bumps),
        }
    }

    pub fn single_bump(center: Complex, radius: f64, height: f64) -> Result<Self> {
        Self::bump_sum(vec![Bump {
            center,
            radius,
            height,
        }])
    }

    pub fn kind(&self) -> &DampingKind {
        &self.kind
    }

    /// `‖a‖_∞`: exact when the bump supports are pairwise disjoint on the surface,
    /// otherwise the sum of the heights of overlapping bumps (an upper bound).
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            DampingKind::Constant { value } => Some(value),
            DampingKind::BumpSum { .. } => None,
        }
    }

    pub fn domain(&self) -> &FundamentalDomain {
        &self.domain
    }

    /// Value of the field at a disk point.
    pub fn evaluate(&self, z: Complex) -> Result<f64> {
        match self.kind {
            DampingKind::Constant { value } => {
                if z.norm_sqr() < 1.0 && z.re.is_finite() && z.im.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::Domain(z))
                }
            }
            DampingKind::BumpSum { .. } => {
                let (rep, _) = self.domain.unwrap(z)?;
                Ok(self.evaluate_reduced(rep))
            }
        }
    }

    /// Evaluates at a point already known to lie in the closed octagon.
    pub(crate) fn evaluate_reduced(&self, w: Complex) -> f64 {
        if let Some(c) = self.constant_value() {
            return c;
        }
        let mut total = 0.0;
        for p in &self.prepared {
            let r = p.bump.radius;
            for &c in &p.lifts {
                let d = disk_distance(w, c);
                if d < r {
                    total += p.bump.height * bump_profile(d / r);
                }
            }
        }
        total
    }

    /// Time average `(1/T)∫₀ᵀ a(φ_t s) dt`.
    pub fn flow_average(&self, s: &GeodesicState, t: f64) -> Result<f64> {
        Ok(self.flow_average_with_end(s, t)?.0)
    }

    /// Time average together with the reduced end state `φ_T s`.
    pub fn flow_average_with_end(
        &self,
        s: &GeodesicState,
        t: f64,
    ) -> Result<(f64, GeodesicState)> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Argument(format!("averaging time must be positive, got {t}")));
        }
        let (start, _) = self.domain.unwrap_state(s)?;
        let rule = gauss_legendre(FLOW_QUADRATURE_NODES);
        let (integral, end) = self.integrate_along(&start, t, &rule)?;
        let avg = integral / t;
        self.check_average(avg)?;
        Ok((avg, end))
    }

    fn check_average(&self, avg: f64) -> Result<()> {
        let slack = AVERAGE_SLACK * (1.0 + self.sup_norm);
        if !(avg >= -slack && avg <= self.sup_norm + slack) {
            return Err(Error::Numerical(format!(
                "flow average {avg} outside [0, {}]",
                self.sup_norm
            )));
        }
        Ok(())
    }

    /// `∫₀ᵀ a(φ_t s) dt` starting from a reduced state.
    fn integrate_along(
        &self,
        start: &GeodesicState,
        t: f64,
        rule: &(Vec<f64>, Vec<f64>),
    ) -> Result<(f64, GeodesicState)> {
        let steps = ((t / FLOW_QUADRATURE_STEP) - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut state = *start;
        let mut total = 0.0;
        let (xs, ws) = rule;
        for _ in 0..steps {
            if let Some(c) = self.constant_value() {
                total += c * h;
            } else {
                let mut part = 0.0;
                for (x, w) in xs.iter().zip(ws) {
                    let p = state.advance(0.5 * h * (x + 1.0))?;
                    part += w * self.evaluate(p.point)?;
                }
                total += 0.5 * h * part;
            }
            let moved = state.advance(h)?;
            state = self.domain.unwrap_state(&moved)?.0;
        }
        Ok((total, state))
    }

    /// Cumulative averages `⟨a⟩_T(s)` for every `T` of an increasing grid.
    pub fn flow_averages_on_grid(&self, s: &GeodesicState, grid: &[f64]) -> Result<Vec<f64>> {
        let rule = gauss_legendre(FLOW_QUADRATURE_NODES);
        let (mut state, _) = self.domain.unwrap_state(s)?;
        let mut elapsed = 0.0;
        let mut integral = 0.0;
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            let dt = t - elapsed;
            if dt > 0.0 {
                let (part, end) = self.integrate_along(&state, dt, &rule)?;
                integral += part;
                state = end;
                elapsed = t;
            }
            let avg = integral / t;
            self.check_average(avg)?;
            out.push(avg);
        }
        Ok(out)
    }
}

/// Hyperbolic distance without the domain checks.
fn disk_distance(z: Complex, c: Complex) -> f64 {
    let num = (z - c).norm();
    let den = (Complex::new(1.0, 0.0) - z.conj() * c).norm();
    2.0 * (num / den).min(1.0 - 1e-16).atanh()
}

/// All points of the orbit of `c` (a point of the closed octagon) within hyperbolic
/// distance `radius` of the origin, found by a breadth-first walk over tiles.
fn orbit_within(domain: &FundamentalDomain, c: Complex, radius: f64) -> Result<Vec<Complex>> {
    let rv = domain.circumradius();
    let keep_tiles = radius + rv;
    let explore = keep_tiles + 2.0 * rv;
    let key = |z: Complex| ((z.re * 1e7).round() as i64, (z.im * 1e7).round() as i64);
    let origin = Complex::new(0.0, 0.0);
    let mut seen: HashSet<(i64, i64)> = HashSet::new();
    let mut frontier = VecDeque::from([MobiusTransform::identity()]);
    seen.insert(key(origin));
    let mut lifts = Vec::new();
    while let Some(g) = frontier.pop_front() {
        let center = g.apply(origin);
        let dc = hyperbolic_distance(origin, center)?;
        if dc <= keep_tiles {
            let lift = g.apply(c);
            if hyperbolic_distance(origin, lift)? < radius {
                lifts.push(lift);
            }
        }
        for p in domain.pairings() {
            let next = g.compose(p)?;
            let nc = next.apply(origin);
            if hyperbolic_distance(origin, nc)? > explore {
                continue;
            }
            if seen.insert(key(nc)) {
                frontier.push_back(next);
            }
        }
    }
    lifts.sort_by(|a, b| {
        a.norm_sqr()
            .partial_cmp(&b.norm_sqr())
            .unwrap()
            .then(a.arg().partial_cmp(&b.arg()).unwrap())
    });
    Ok(lifts)
}

fn bump_sup_bound(domain: &FundamentalDomain, prepared: &[PreparedBump]) -> Result<f64> {
    let mut sup = 0.0f64;
    for (i, p) in prepared.iter().enumerate() {
        let mut level = p.bump.height;
        let (ci, _) = domain.unwrap(p.bump.center)?;
        for (j, q) in prepared.iter().enumerate() {
            if i == j {
                continue;
            }
            let overlaps = q.lifts.iter().any(|&l| {
                hyperbolic_distance(ci, l).map_or(false, |d| d < p.bump.radius + q.bump.radius)
            });
            if overlaps {
                level += q.bump.height;
            }
        }
        sup = sup.max(level);
    }
    Ok(sup)
}

/// Per-`T` extremes of the flow average over a sample of unit tangent vectors.
#[derive(Debug, Clone, Serialize)]
pub struct FlowAverageReport {
    pub t_grid: Vec<f64>,
    pub inf_estimates: Vec<f64>,
    pub sup_estimates: Vec<f64>,
    pub a_minus_est: f64,
    pub a_plus_est: f64,
    pub sample_size: usize,
    pub converged: bool,
    /// Index of the sample attaining the infimum at the largest `T`.
    pub argmin_sample: usize,
}

/// Estimates `a_−` and `a_+` from flow averages on a sample and a time grid.
pub fn estimate_asymptotic_constants(
    a: &DampingField,
    samples: &[GeodesicState],
    t_grid: &[f64],
) -> Result<FlowAverageReport> {
    if samples.is_empty() {
        return Err(Error::Argument("empty geodesic sample".into()));
    }
    validate_grid(t_grid)?;
    if *t_grid.last().unwrap() < 20.0 {
        return Err(Error::Argument("largest averaging time must be at least 20".into()));
    }
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| a.flow_averages_on_grid(s, t_grid))
        .collect::<Result<_>>()?;
    let g = t_grid.len();
    let mut inf = vec![f64::INFINITY; g];
    let mut sup = vec![f64::NEG_INFINITY; g];
    let mut argmin = 0;
    for (i, row) in per_sample.iter().enumerate() {
        for k in 0..g {
            if row[k] < inf[k] {
                inf[k] = row[k];
                if k == g - 1 {
                    argmin = i;
                }
            }
            sup[k] = sup[k].max(row[k]);
        }
    }
    let converged = g >= 2
        && (inf[g - 1] - inf[g - 2]).abs() < 1e-3
        && (sup[g - 1] - sup[g - 2]).abs() < 1e-3;
    Ok(FlowAverageReport {
        t_grid: t_grid.to_vec(),
        a_minus_est: inf[g - 1],
        a_plus_est: sup[g - 1],
        inf_estimates: inf,
        sup_estimates: sup,
        sample_size: samples.len(),
        converged,
        argmin_sample: argmin,
    })
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Argument("empty time grid".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::Argument("time grid entries must be positive".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Outcome of a sampled geometric-control test.
#[derive(Debug, Clone, Serialize)]
pub struct ControlReport {
    pub controlled: bool,
    pub witness: Option<GeodesicState>,
    pub min_average: f64,
    pub length: f64,
    pub threshold: f64,
    pub sample_size: usize,
}

/// Sampling certificate for the geometric control condition: every sampled geodesic
/// segment of length `length` sees average damping above `threshold`. A `true`
/// answer is evidence, not a proof.
pub fn check_geometric_control(
    a: &DampingField,
    length: f64,
    samples: &[GeodesicState],
    threshold: f64,
) -> Result<ControlReport> {
    if samples.is_empty() {
        return Err(Error::Argument("empty geodesic sample".into()));
    }
    if !(length > 0.0) || !(threshold > 0.0) {
        return Err(Error::Argument("length and threshold must be positive".into()));
    }
    let averages: Vec<f64> = samples
        .par_iter()
        .map(|s| a.flow_average(s, length))
        .collect::<Result<_>>()?;
    let (idx, min) = averages
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    let controlled = min > threshold;
    Ok(ControlReport {
        controlled,
        witness: if controlled { None } else { Some(samples[idx]) },
        min_average: min,
        length,
        threshold,
        sample_size: samples.len(),
    })
}

/// Axis states of all reduced words of length one and two in the side pairings.
pub fn closed_geodesic_samples(domain: &FundamentalDomain) -> Result<Vec<GeodesicState>> {
    let p = domain.pairings();
    let mut out = Vec::new();
    let mut push = |t: &MobiusTransform| -> Result<()> {
        if let Some(s) = t.axis_state() {
            out.push(domain.unwrap_state(&s)?.0);
        }
        Ok(())
    };
    for t in p {
        push(t)?;
    }
    for i in 0..8 {
        for j in 0..8 {
            if j == (i + 4) % 8 {
                continue;
            }
            push(&p[i].compose(&p[j])?)?;
        }
    }
    Ok(out)
}

/// Default sample of the unit tangent bundle: closed-geodesic axes first, then a polar
/// grid of base points in the octagon times equally spaced directions.
pub fn sample_states(
    domain: &FundamentalDomain,
    radial: usize,
    angular: usize,
    directions: usize,
) -> Result<Vec<GeodesicState>> {
    let mut out = closed_geodesic_samples(domain)?;
    let rmax = 0.95 * domain.inradius();
    let mut points = vec![Complex::new(0.0, 0.0)];
    for i in 1..=radial {
        let r = radius_at_distance(rmax * i as f64 / radial as f64);
        for k in 0..angular {
            let phi = 2.0 * PI * (k as f64 + 0.5 * (i % 2) as f64) / angular as f64;
            points.push(Complex::from_polar(r, phi));
        }
    }
    for z in points {
        for d in 0..directions {
            let theta = 2.0 * PI * (d as f64 + 0.25) / directions as f64;
            out.push(GeodesicState::new(z, theta));
        }
    }
    Ok(out)
}

/// The axis of the first generator, which passes through the center along the real
/// diameter.
pub fn generator_axis_state() -> GeodesicState {
    GeodesicState::new(Complex::new(0.0, 0.0), 0.0)
}

/// Named damping presets used by the acceptance suite and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingPreset {
    Constant,
    SingleBump,
    AxisAvoidingBump,
}

impl DampingPreset {
    pub const ALL: [DampingPreset; 3] = [
        DampingPreset::Constant,
        DampingPreset::SingleBump,
        DampingPreset::AxisAvoidingBump,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DampingPreset::Constant => "constant",
            DampingPreset::SingleBump => "single_bump",
            DampingPreset::AxisAvoidingBump => "axis_avoiding_bump",
        }
    }

    pub fn field(&self) -> Result<DampingField> {
        match self {
            DampingPreset::Constant => DampingField::constant(0.3),
            DampingPreset::SingleBump => {
                DampingField::single_bump(Complex::new(0.0, 0.0), 1.2, 1.0)
            }
            DampingPreset::AxisAvoidingBump => DampingField::single_bump(
                Complex::from_polar(radius_at_distance(1.3), 0.5 * PI),
                1.2,
                1.0,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_disk_point(rng: &mut ChaCha8Rng, rmax: f64) -> Complex {
        Complex::from_polar(rng.gen_range(0.0..rmax), rng.gen_range(-PI..PI))
    }

    #[test]
    fn constant_field_evaluates_everywhere() {
        let a = DampingField::constant(0.5).unwrap();
        assert_eq!(a.evaluate(Complex::new(0.3, -0.7)).unwrap(), 0.5);
        assert!(a.evaluate(Complex::new(1.0, 0.0)).is_err());
        assert!(DampingField::constant(-1.0).is_err());
    }

    #[test]
    fn bump_peak_and_support() {
        let a = DampingField::single_bump(Complex::new(0.0, 0.0), 0.5, 1.0).unwrap();
        assert!((a.evaluate(Complex::new(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        let edge = radius_at_distance(0.5);
        for k in 0..16 {
            let z = Complex::from_polar(edge * (1.0 + 1e-9), k as f64);
            assert_eq!(a.evaluate(z).unwrap(), 0.0);
        }
        assert_eq!(a.sup_norm(), 1.0);
    }

    #[test]
    fn radius_cap_enforced() {
        assert!(DampingField::single_bump(Complex::new(0.0, 0.0), 1.6, 1.0).is_err());
        assert!(DampingField::single_bump(Complex::new(0.0, 0.0), max_bump_radius(), 1.0).is_ok());
    }

    #[test]
    fn bump_field_is_group_invariant() {
        let domain = FundamentalDomain::bolza();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fields = [
            DampingPreset::SingleBump.field().unwrap(),
            DampingPreset::AxisAvoidingBump.field().unwrap(),
            DampingField::single_bump(domain.vertices()[2] * 0.999, 1.4, 0.7).unwrap(),
        ];
        for a in &fields {
            for _ in 0..100 {
                let z = random_disk_point(&mut rng, 0.75);
                let v = a.evaluate(z).unwrap();
                for g in domain.pairings() {
                    let w = a.evaluate(g.apply(z)).unwrap();
                    assert!((v - w).abs() <= 1e-10, "{v} vs {w}");
                }
            }
        }
    }

    #[test]
    fn bump_centered_at_vertex_is_continuous_across_sides() {
        // the support wraps around the vertex cycle; every corner sees the same value
        let domain = FundamentalDomain::bolza();
        let v0 = domain.vertices()[0];
        let a = DampingField::single_bump(v0, 1.0, 1.0).unwrap();
        for v in domain.vertices() {
            assert!((a.evaluate(*v * (1.0 - 1e-12)).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_averages_are_exact() {
        let a = DampingField::constant(0.37).unwrap();
        let s = GeodesicState::new(Complex::new(0.2, 0.1), 1.0);
        for t in [0.05, 1.0, 7.3, 25.0] {
            assert!((a.flow_average(&s, t).unwrap() - 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn average_is_additive() {
        let a = DampingPreset::SingleBump.field().unwrap();
        let s = GeodesicState::new(Complex::new(0.1, -0.2), 0.4);
        let t = 3.7;
        let (first, mid) = a.flow_average_with_end(&s, t).unwrap();
        let second = a.flow_average(&mid, t).unwrap();
        let whole = a.flow_average(&s, 2.0 * t).unwrap();
        assert!((whole - 0.5 * (first + second)).abs() < 1e-7);
    }

    #[test]
    fn average_matches_fine_riemann_sum() {
        let a = DampingPreset::SingleBump.field().unwrap();
        let s = GeodesicState::new(Complex::new(0.05, 0.0), 2.0);
        let domain = FundamentalDomain::bolza();
        let t = 4.0;
        let n = 40_000;
        let h = t / n as f64;
        let mut state = domain.unwrap_state(&s).unwrap().0;
        let mut sum = 0.0;
        for _ in 0..n {
            let mid = state.advance(0.5 * h).unwrap();
            sum += a.evaluate(mid.point).unwrap() * h;
            state = domain.unwrap_state(&state.advance(h).unwrap()).unwrap().0;
        }
        let avg = a.flow_average(&s, t).unwrap();
        assert!((avg - sum / t).abs() < 1e-6 * (1.0 + avg), "{avg} vs {}", sum / t);
    }

    #[test]
    fn axis_avoiding_bump_misses_the_axis() {
        let a = DampingPreset::AxisAvoidingBump.field().unwrap();
        let axis = generator_axis_state();
        for t in [1.0, 3.0, 10.0, 20.0] {
            assert_eq!(a.flow_average(&axis, t).unwrap(), 0.0);
        }
        let domain = FundamentalDomain::bolza();
        let samples = sample_states(&domain, 2, 6, 4).unwrap();
        let report = check_geometric_control(&a, 10.0, &samples, DEFAULT_CONTROL_THRESHOLD).unwrap();
        assert!(!report.controlled);
        let witness = report.witness.unwrap();
        assert_eq!(a.flow_average(&witness, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn axis_is_the_first_sample() {
        let domain = FundamentalDomain::bolza();
        let samples = closed_geodesic_samples(&domain).unwrap();
        assert!(samples[0].separation(&generator_axis_state()) < 1e-12);
        assert_eq!(samples.len(), 8 + 56);
    }

    #[test]
    fn report_orders_fields() {
        let domain = FundamentalDomain::bolza();
        let samples = sample_states(&domain, 1, 4, 2).unwrap();
        let grid = [5.0, 10.0, 20.0];
        let small = DampingField::single_bump(Complex::new(0.0, 0.0), 0.8, 0.5).unwrap();
        let big = DampingField::single_bump(Complex::new(0.0, 0.0), 1.2, 1.0).unwrap();
        let r1 = estimate_asymptotic_constants(&small, &samples, &grid).unwrap();
        let r2 = estimate_asymptotic_constants(&big, &samples, &grid).unwrap();
        for k in 0..grid.len() {
            assert!(r1.inf_estimates[k] <= r2.inf_estimates[k] + 1e-15);
            assert!(r1.sup_estimates[k] <= r2.sup_estimates[k] + 1e-15);
        }
        assert!(0.0 <= r2.a_minus_est && r2.a_minus_est <= r2.a_plus_est);
        assert!(r2.a_plus_est <= big.sup_norm());
        let c = DampingField::constant(0.2).unwrap();
        let rc = estimate_asymptotic_constants(&c, &samples, &grid).unwrap();
        assert!((rc.a_minus_est - 0.2).abs() < 1e-12 && (rc.a_plus_est - 0.2).abs() < 1e-12);
        assert!(rc.converged);
        assert!(estimate_asymptotic_constants(&c, &[], &grid).is_err());
        assert!(estimate_asymptotic_constants(&c, &samples, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn impossible_threshold_fails_control() {
        let a = DampingField::constant(0.4).unwrap();
        let domain = FundamentalDomain::bolza();
        let samples = sample_states(&domain, 1, 4, 2).unwrap();
        let ok = check_geometric_control(&a, 2.0, &samples, 1e-6).unwrap();
        assert!(ok.controlled && ok.witness.is_none());
        let bad = check_geometric_control(&a, 2.0, &samples, 1.0).unwrap();
        assert!(!bad.controlled && bad.witness.is_some());
    }
}
