//! Poincaré-disk arithmetic, the Bolza surface group and the geodesic flow on
//! its unit tangent bundle.
//!
//! All isometries are stored in SU(1,1) normal form
//! `z ↦ (αz + β) / (conj(β) z + conj(α))` with `|α|² − |β|² = 1`; the metric is
//! `ds² = 4|dz|² / (1 − |z|²)²` (curvature −1).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Determinant drift beyond which a composition is rejected instead of renormalized.
pub const DETERMINANT_REJECT: f64 = 1e-8;

/// Default cap on the number of side-pairing reductions performed by [`FundamentalDomain::unwrap`].
pub const DEFAULT_MAX_WORDS: usize = 8;

/// Default maximal flow substep between two unwraps.
pub const DEFAULT_FLOW_SUBSTEP: f64 = 1.0;

/// Tolerance used when deciding whether a point lies in the closed fundamental domain.
const DOMAIN_TOL: f64 = 1e-12;

/// An orientation-preserving isometry of the Poincaré disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobiusTransform {
    alpha: Complex,
    beta: Complex,
}

impl MobiusTransform {
    pub fn identity() -> Self {
        Self {
            alpha: Complex::new(1.0, 0.0),
            beta: Complex::new(0.0, 0.0),
        }
    }

    /// Builds a transform from its normal-form coefficients, renormalizing small
    /// determinant drift and rejecting anything beyond [`DETERMINANT_REJECT`].
    pub fn new(alpha: Complex, beta: Complex) -> Result<Self> {
        Self { alpha, beta }.renormalized()
    }

    /// Hyperbolic translation of length `length` along the diameter at angle `angle`,
    /// moving the origin towards `e^{i angle}`.
    pub fn translation(angle: f64, length: f64) -> Self {
        let half = 0.5 * length;
        Self {
            alpha: Complex::new(half.cosh(), 0.0),
            beta: Complex::from_polar(half.sinh(), angle),
        }
    }

    /// Rotation about the origin by `angle`.
    pub fn rotation(angle: f64) -> Self {
        Self {
            alpha: Complex::from_polar(1.0, 0.5 * angle),
            beta: Complex::new(0.0, 0.0),
        }
    }

    /// The transvection along the geodesic through `0` and `z` that sends `z` to `0`.
    pub fn to_origin(z: Complex) -> Result<Self> {
        let r2 = z.norm_sqr();
        if r2 >= 1.0 {
            return Err(Error::Domain(z));
        }
        let s = (1.0 - r2).sqrt();
        Ok(Self {
            alpha: Complex::new(1.0 / s, 0.0),
            beta: -z / s,
        })
    }

    pub fn alpha(&self) -> Complex {
        self.alpha
    }

    pub fn beta(&self) -> Complex {
        self.beta
    }

    /// `|α|² − |β|²`, equal to one for a valid disk isometry.
    pub fn determinant(&self) -> f64 {
        self.alpha.norm_sqr() - self.beta.norm_sqr()
    }

    fn renormalized(self) -> Result<Self> {
        let det = self.determinant();
        let drift = (det - 1.0).abs();
        if !det.is_finite() || drift > DETERMINANT_REJECT {
            return Err(Error::Degraded { det, drift });
        }
        let s = det.sqrt();
        Ok(Self {
            alpha: self.alpha / s,
            beta: self.beta / s,
        })
    }

    pub fn apply(&self, z: Complex) -> Complex {
        (self.alpha * z + self.beta) / (self.beta.conj() * z + self.alpha.conj())
    }

    /// Argument of the complex derivative at `z`; tangent directions rotate by this angle.
    pub fn derivative_arg(&self, z: Complex) -> f64 {
        -2.0 * (self.beta.conj() * z + self.alpha.conj()).arg()
    }

    /// `self ∘ other` as maps of the disk.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let (a1, b1) = (self.alpha, self.beta);
        let (a2, b2) = (other.alpha, other.beta);
        Self {
            alpha: a1 * a2 + b1 * b2.conj(),
            beta: a1 * b2 + b1 * a2.conj(),
        }
        .renormalized()
    }

    pub fn inverse(&self) -> Self {
        Self {
            alpha: self.alpha.conj(),
            beta: -self.beta,
        }
    }

    /// Distance to the identity in the projective sense (`±I` both count as identity).
    pub fn identity_defect(&self) -> f64 {
        let plus = (self.alpha - 1.0).norm().max(self.beta.norm());
        let minus = (self.alpha + 1.0).norm().max(self.beta.norm());
        plus.min(minus)
    }

    /// Largest entrywise distance between two transforms modulo sign.
    pub fn distance_to(&self, other: &Self) -> f64 {
        let plus = (self.alpha - other.alpha)
            .norm()
            .max((self.beta - other.beta).norm());
        let minus = (self.alpha + other.alpha)
            .norm()
            .max((self.beta + other.beta).norm());
        plus.min(minus)
    }

    /// `|trace|` of the SU(1,1) matrix.
    pub fn trace_abs(&self) -> f64 {
        2.0 * self.alpha.re.abs()
    }

    /// Translation length `2 arccosh(|tr|/2)`; zero for elliptic and parabolic elements.
    pub fn translation_length(&self) -> f64 {
        let half = 0.5 * self.trace_abs();
        if half <= 1.0 {
            0.0
        } else {
            2.0 * half.acosh()
        }
    }

    /// Repelling and attracting boundary fixed points of a hyperbolic transform.
    pub fn fixed_points(&self) -> Option<(Complex, Complex)> {
        if self.trace_abs() <= 2.0 + 1e-12 || self.beta.norm() < 1e-15 {
            return None;
        }
        // conj(β) z² + (conj(α) − α) z − β = 0
        let a = self.beta.conj();
        let b = self.alpha.conj() - self.alpha;
        let c = -self.beta;
        let disc = (b * b - 4.0 * a * c).sqrt();
        let z1 = (-b + disc) / (2.0 * a);
        let z2 = (-b - disc) / (2.0 * a);
        // attracting fixed point has |T'(z)| < 1, i.e. |conj(β) z + conj(α)| > 1
        let attracting = |z: Complex| (self.beta.conj() * z + self.alpha.conj()).norm() > 1.0;
        let (rep, att) = if attracting(z1) { (z2, z1) } else { (z1, z2) };
        Some((rep / rep.norm(), att / att.norm()))
    }

    /// The unit tangent vector on the translation axis closest to the origin,
    /// pointing towards the attracting fixed point.
    pub fn axis_state(&self) -> Option<GeodesicState> {
        let (rep, att) = self.fixed_points()?;
        let a = rep.arg();
        let mut delta = att.arg() - a;
        while delta <= -PI {
            delta += 2.0 * PI;
        }
        while delta > PI {
            delta -= 2.0 * PI;
        }
        let half = 0.5 * delta.abs();
        let mid = a + 0.5 * delta;
        if half.cos() < 1e-14 {
            return Some(GeodesicState::new(Complex::new(0.0, 0.0), att.arg()));
        }
        let r = (1.0 - half.sin()) / half.cos();
        Some(GeodesicState::new(
            Complex::from_polar(r, mid),
            mid + delta.signum() * 0.5 * PI,
        ))
    }
}

impl Default for MobiusTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn check_disk(z: Complex) -> Result<()> {
    if z.norm_sqr() < 1.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(z))
    }
}

/// Hyperbolic distance in the curvature −1 disk.
pub fn hyperbolic_distance(z1: Complex, z2: Complex) -> Result<f64> {
    check_disk(z1)?;
    check_disk(z2)?;
    let num = (z1 - z2).norm();
    let den = (Complex::new(1.0, 0.0) - z1.conj() * z2).norm();
    Ok(2.0 * (num / den).min(1.0).atanh())
}

/// Euclidean radius of the point at hyperbolic distance `d` from the origin.
pub fn radius_at_distance(d: f64) -> f64 {
    (0.5 * d).tanh()
}

/// Hyperbolic area density `4 / (1 − |z|²)²` relative to Lebesgue measure.
#[inline]
pub fn area_density(z: Complex) -> f64 {
    let s = 1.0 - z.norm_sqr();
    4.0 / (s * s)
}

/// Midpoint of the geodesic segment between two disk points.
pub fn geodesic_midpoint(z1: Complex, z2: Complex) -> Result<Complex> {
    let to0 = MobiusTransform::to_origin(z1)?;
    let w = to0.apply(z2);
    let d = 2.0 * w.norm().min(1.0 - 1e-16).atanh();
    let mid = if w.norm() == 0.0 {
        Complex::new(0.0, 0.0)
    } else {
        w / w.norm() * radius_at_distance(0.5 * d)
    };
    Ok(to0.inverse().apply(mid))
}

/// Point and direction on the unit tangent bundle of the disk; the direction is the
/// Euclidean angle of the unit tangent vector, which the conformal metric identifies
/// with a unit covector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicState {
    pub point: Complex,
    pub direction: f64,
}

impl GeodesicState {
    pub fn new(point: Complex, direction: f64) -> Self {
        Self {
            point,
            direction: wrap_angle(direction),
        }
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.point, self.direction + PI)
    }

    /// Advances along the geodesic in the disk without reducing to the fundamental domain.
    pub fn advance(&self, t: f64) -> Result<GeodesicState> {
        check_disk(self.point)?;
        let z = self.point;
        let (len, dir) = if t >= 0.0 {
            (t, self.direction)
        } else {
            (-t, self.direction + PI)
        };
        let p = Complex::from_polar(radius_at_distance(len), dir);
        let one = Complex::new(1.0, 0.0);
        let w = (p + z) / (one + z.conj() * p);
        let theta = dir - 2.0 * (one + z.conj() * p).arg();
        let theta = if t >= 0.0 { theta } else { theta + PI };
        if w.norm_sqr() >= 1.0 {
            return Err(Error::Domain(w));
        }
        Ok(GeodesicState::new(w, theta))
    }

    /// Image under a disk isometry (point and direction).
    pub fn transformed(&self, t: &MobiusTransform) -> GeodesicState {
        GeodesicState::new(
            t.apply(self.point),
            self.direction + t.derivative_arg(self.point),
        )
    }

    /// Distance on the unit tangent bundle used in tests: point distance plus angle gap.
    pub fn separation(&self, other: &GeodesicState) -> f64 {
        let dp = (self.point - other.point).norm();
        let da = wrap_angle(self.direction - other.direction).abs();
        dp + da
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// The regular octagon with interior angles π/4 and its Bolza side pairings.
///
/// Vertex `j` sits at angle `(2j − 1)π/8`, side `j` joins vertices `j` and `j + 1`
/// and has its midpoint at angle `jπ/4`. Pairing `j` is the translation along the
/// diameter at angle `jπ/4` by the systole length; it maps side `j + 4` onto side `j`.
/// Pairings `0..4` are the generators, pairings `4..8` their inverses.
#[derive(Debug, Clone, Serialize)]
pub struct FundamentalDomain {
    vertices: [Complex; 8],
    pairings: [MobiusTransform; 8],
    neighbor_centers: [Complex; 8],
    genus: usize,
}

/// `2 arccosh(1 + √2)`, the translation length of every Bolza generator.
pub fn bolza_translation_length() -> f64 {
    2.0 * (1.0 + 2f64.sqrt()).acosh()
}

/// The four Bolza generators.
pub fn bolza_generators() -> [MobiusTransform; 4] {
    let ell = bolza_translation_length();
    std::array::from_fn(|k| MobiusTransform::translation(k as f64 * PI / 4.0, ell))
}

/// The surface-group relator `g0 g1⁻¹ g2 g3⁻¹ g0⁻¹ g1 g2⁻¹ g3` evaluated numerically.
pub fn bolza_relation_product() -> Result<MobiusTransform> {
    let g = bolza_generators();
    let word = [
        g[0],
        g[1].inverse(),
        g[2],
        g[3].inverse(),
        g[0].inverse(),
        g[1],
        g[2].inverse(),
        g[3],
    ];
    word.iter()
        .try_fold(MobiusTransform::identity(), |acc, t| acc.compose(t))
}

impl FundamentalDomain {
    pub fn bolza() -> Self {
        let ell = bolza_translation_length();
        // cosh(vertex distance) = cot²(π/8) = (1 + √2)²
        let vertex_dist = ((1.0 + 2f64.sqrt()).powi(2)).acosh();
        let rv = radius_at_distance(vertex_dist);
        let vertices =
            std::array::from_fn(|j| Complex::from_polar(rv, (2.0 * j as f64 - 1.0) * PI / 8.0));
        let pairings =
            std::array::from_fn(|j| MobiusTransform::translation(j as f64 * PI / 4.0, ell));
        let neighbor_centers = std::array::from_fn(|j| pairings[j].apply(Complex::new(0.0, 0.0)));
        Self {
            vertices,
            pairings,
            neighbor_centers,
            genus: 2,
        }
    }

    pub fn vertices(&self) -> &[Complex; 8] {
        &self.vertices
    }

    pub fn pairings(&self) -> &[MobiusTransform; 8] {
        &self.pairings
    }

    pub fn generators(&self) -> [MobiusTransform; 4] {
        [
            self.pairings[0],
            self.pairings[1],
            self.pairings[2],
            self.pairings[3],
        ]
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Endpoints `(start, end)` of side `j`.
    pub fn side(&self, j: usize) -> (Complex, Complex) {
        (self.vertices[j % 8], self.vertices[(j + 1) % 8])
    }

    /// Hyperbolic distance from the center to a vertex.
    pub fn circumradius(&self) -> f64 {
        2.0 * self.vertices[0].norm().atanh()
    }

    /// Hyperbolic distance from the center to a side midpoint.
    pub fn inradius(&self) -> f64 {
        0.5 * bolza_translation_length()
    }

    /// Signed Dirichlet margin of `z` for side `j`: negative when `z` is strictly
    /// closer to the neighbouring center across side `j` than to the origin.
    fn margin(&self, z: Complex, j: usize) -> f64 {
        let q = self.neighbor_centers[j];
        (z - q).norm_sqr() / (1.0 - q.norm_sqr()) - z.norm_sqr()
    }

    /// Closed-domain membership with a small tolerance.
    pub fn contains(&self, z: Complex) -> bool {
        z.norm_sqr() < 1.0 && (0..8).all(|j| self.margin(z, j) >= -DOMAIN_TOL)
    }

    /// Reduces `z` into the closed octagon. Returns the representative and the deck
    /// transform with `deck(representative) = z`.
    pub fn unwrap(&self, z: Complex) -> Result<(Complex, MobiusTransform)> {
        self.unwrap_with_limit(z, DEFAULT_MAX_WORDS)
    }

    pub fn unwrap_with_limit(
        &self,
        z: Complex,
        max_words: usize,
    ) -> Result<(Complex, MobiusTransform)> {
        check_disk(z)?;
        let mut rep = z;
        let mut deck = MobiusTransform::identity();
        for _ in 0..=max_words {
            // most violated side; lowest index wins ties
            let mut worst: Option<(usize, f64)> = None;
            for j in 0..8 {
                let m = self.margin(rep, j);
                if m < -DOMAIN_TOL && worst.map_or(true, |(_, w)| m < w) {
                    worst = Some((j, m));
                }
            }
            match worst {
                None => return Ok((rep, deck)),
                Some((j, _)) => {
                    rep = self.pairings[j].inverse().apply(rep);
                    deck = deck.compose(&self.pairings[j])?;
                }
            }
        }
        Err(Error::OutOfRange {
            point: z,
            max_words,
        })
    }

    /// Reduces a tangent vector into the fundamental domain.
    pub fn unwrap_state(&self, s: &GeodesicState) -> Result<(GeodesicState, MobiusTransform)> {
        let (_, deck) = self.unwrap(s.point)?;
        Ok((s.transformed(&deck.inverse()), deck))
    }

    /// Geodesic flow on the unit tangent bundle of the surface: exact advance in the
    /// disk in substeps of at most [`DEFAULT_FLOW_SUBSTEP`], reducing after each one.
    pub fn flow(&self, s: &GeodesicState, t: f64) -> Result<GeodesicState> {
        self.flow_with_substep(s, t, DEFAULT_FLOW_SUBSTEP)
    }

    pub fn flow_with_substep(
        &self,
        s: &GeodesicState,
        t: f64,
        max_substep: f64,
    ) -> Result<GeodesicState> {
        if !(max_substep > 0.0) || !t.is_finite() {
            return Err(Error::Argument(format!(
                "flow time {t} / substep {max_substep} invalid"
            )));
        }
        let (mut state, _) = self.unwrap_state(s)?;
        if t == 0.0 {
            return Ok(state);
        }
        let steps = (t.abs() / max_substep).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        for _ in 0..steps {
            let moved = state.advance(h)?;
            state = self.unwrap_state(&moved)?.0;
        }
        Ok(state)
    }

    /// Hyperbolic area of the octagon by Gauss–Legendre quadrature in polar
    /// coordinates about the center, using `nodes` points per side.
    pub fn area_by_quadrature(&self, nodes: usize) -> f64 {
        let (xs, ws) = gauss_legendre(nodes);
        let m = radius_at_distance(self.inradius());
        let c = (1.0 + m * m) / (2.0 * m);
        let half = PI / 8.0;
        let sector: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(&x, &w)| {
                let psi = half * x;
                let cp = c * psi.cos();
                let r = cp - (cp * cp - 1.0).sqrt();
                // ∫_0^r 4ρ/(1−ρ²)² dρ = 2/(1−r²) − 2
                w * half * (2.0 / (1.0 - r * r) - 2.0)
            })
            .sum();
        8.0 * sector
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton iteration on Legendre polynomials).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_point(rng: &mut ChaCha8Rng, rmax: f64) -> Complex {
        Complex::from_polar(rmax * rng.gen::<f64>().sqrt(), rng.gen_range(-PI..PI))
    }

    fn random_transform(rng: &mut ChaCha8Rng) -> MobiusTransform {
        let z = random_point(rng, 0.9);
        MobiusTransform::to_origin(z)
            .unwrap()
            .compose(&MobiusTransform::rotation(rng.gen_range(-PI..PI)))
            .unwrap()
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = random_transform(&mut rng);
            let id = t.compose(&t.inverse()).unwrap();
            assert!(id.identity_defect() < 1e-12);
        }
        assert_eq!(MobiusTransform::identity().apply(c(0.3, 0.1)), c(0.3, 0.1));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (a, b) = (random_transform(&mut rng), random_transform(&mut rng));
            let z = random_point(&mut rng, 0.95);
            let ab = a.compose(&b).unwrap();
            assert!((ab.apply(z) - a.apply(b.apply(z))).norm() < 1e-12);
            assert!((ab.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degraded_determinant_is_rejected() {
        let err = MobiusTransform::new(c(1.0, 0.0), c(0.1, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Degraded { .. }));
        // tiny drift is renormalized
        let t = MobiusTransform::new(c(1.0 + 1e-10, 0.0), c(0.0, 0.0)).unwrap();
        assert!((t.determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(hyperbolic_distance(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        let d = hyperbolic_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-14);
        assert!(matches!(
            hyperbolic_distance(c(1.0, 0.0), c(0.0, 0.0)),
            Err(Error::Domain(_))
        ));
        assert!(hyperbolic_distance(c(0.0, 0.0), c(0.6, 0.9)).is_err());
    }

    #[test]
    fn distance_closed_form_agrees_with_arccosh() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (z1, z2) = (random_point(&mut rng, 0.95), random_point(&mut rng, 0.95));
            let arg = 1.0
                + 2.0 * (z1 - z2).norm_sqr() / ((1.0 - z1.norm_sqr()) * (1.0 - z2.norm_sqr()));
            let d = hyperbolic_distance(z1, z2).unwrap();
            assert!((d - arg.acosh()).abs() < 1e-9 * (1.0 + d));
            assert!((d - hyperbolic_distance(z2, z1).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn isometry_preserves_distance_on_1000_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let t = random_transform(&mut rng);
            let (z1, z2) = (random_point(&mut rng, 0.999), random_point(&mut rng, 0.999));
            let (w1, w2) = (t.apply(z1), t.apply(z2));
            if w1.norm() > 0.999 || w2.norm() > 0.999 {
                continue;
            }
            let d0 = hyperbolic_distance(z1, z2).unwrap();
            let d1 = hyperbolic_distance(w1, w2).unwrap();
            assert!((d0 - d1).abs() <= 1e-10 * d0.max(1.0), "{d0} vs {d1}");
        }
    }

    #[test]
    fn bolza_generators_have_systole_translation_length() {
        let ell = bolza_translation_length();
        assert!((ell - 3.0571).abs() < 1e-4);
        for g in bolza_generators() {
            // trace identity 2 cosh(ℓ/2) = |tr|
            assert!((g.trace_abs() - 2.0 * (0.5 * ell).cosh()).abs() < 1e-12);
            assert!((g.translation_length() - ell).abs() < 1e-12);
        }
    }

    #[test]
    fn bolza_relation_is_identity() {
        let p = bolza_relation_product().unwrap();
        assert!(p.identity_defect() < 1e-8, "defect {}", p.identity_defect());
    }

    #[test]
    fn side_pairings_match_endpoints() {
        let dom = FundamentalDomain::bolza();
        let v = dom.vertices();
        for j in 0..8 {
            let p = dom.pairings()[j];
            // side j+4 = [v_{j+4}, v_{j+5}] goes to side j = [v_{j+1}, v_j]
            assert!((p.apply(v[(j + 4) % 8]) - v[(j + 1) % 8]).norm() < 1e-10);
            assert!((p.apply(v[(j + 5) % 8]) - v[j]).norm() < 1e-10);
            // inverse pairing is the opposite side's pairing
            assert!(p.inverse().distance_to(&dom.pairings()[(j + 4) % 8]) < 1e-12);
        }
    }

    #[test]
    fn octagon_geometry() {
        let dom = FundamentalDomain::bolza();
        assert!((dom.area_by_quadrature(40) - 4.0 * PI).abs() < 1e-10);
        // all vertices are equidistant and lie on the boundary of the domain
        for v in dom.vertices() {
            assert!(dom.contains(*v));
            assert!((hyperbolic_distance(c(0.0, 0.0), *v).unwrap() - dom.circumradius()).abs() < 1e-12);
        }
        assert!(!dom.contains(c(0.9, 0.0)));
    }

    #[test]
    fn unwrap_examples() {
        let dom = FundamentalDomain::bolza();
        let (r, d) = dom.unwrap(c(0.0, 0.0)).unwrap();
        assert_eq!(r, c(0.0, 0.0));
        assert!(d.identity_defect() == 0.0);
        let z = c(0.2, -0.3);
        let (r, d) = dom.unwrap(z).unwrap();
        assert_eq!(r, z);
        assert!(d.identity_defect() == 0.0);

        let g0 = dom.generators()[0];
        let (r, d) = dom.unwrap(g0.apply(c(0.0, 0.0))).unwrap();
        assert!(r.norm() < 1e-12);
        assert!(d.distance_to(&g0) < 1e-12);
    }

    #[test]
    fn unwrap_recovers_random_images() {
        let dom = FundamentalDomain::bolza();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gens = dom.pairings();
        for _ in 0..300 {
            let z = random_point(&mut rng, 0.8);
            let mut w = z;
            for _ in 0..2 {
                w = gens[rng.gen_range(0..8)].apply(w);
            }
            let (rep, deck) = dom.unwrap(w).unwrap();
            assert!(dom.contains(rep));
            assert!((deck.apply(rep) - w).norm() < 1e-9);
        }
    }

    #[test]
    fn unwrap_exhaustion_is_reported() {
        let dom = FundamentalDomain::bolza();
        let far = c(0.999_999, 0.0);
        assert!(matches!(
            dom.unwrap_with_limit(far, 2),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn flow_examples() {
        let dom = FundamentalDomain::bolza();
        let s = GeodesicState::new(c(0.0, 0.0), 0.0);
        assert_eq!(dom.flow(&s, 0.0).unwrap(), s);
        let moved = s.advance(1.0).unwrap();
        assert!((moved.point - c(0.4621172, 0.0)).norm() < 1e-7);
        assert!((moved.point.re - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn advance_traverses_hyperbolic_length_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let s = GeodesicState::new(random_point(&mut rng, 0.7), rng.gen_range(-PI..PI));
            let t = rng.gen_range(0.0..1.0);
            let e = s.advance(t).unwrap();
            let d = hyperbolic_distance(s.point, e.point).unwrap();
            assert!((d - t).abs() < 1e-9);
            // advancing back returns to the start
            let back = e.advance(-t).unwrap();
            assert!(back.separation(&s) < 1e-10);
        }
    }

    #[test]
    fn flow_semigroup_on_random_states() {
        let dom = FundamentalDomain::bolza();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = GeodesicState::new(random_point(&mut rng, 0.6), rng.gen_range(-PI..PI));
            let (t1, t2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let a = dom.flow(&dom.flow(&s, t1).unwrap(), t2).unwrap();
            let b = dom.flow(&s, t1 + t2).unwrap();
            assert!(a.separation(&b) < 1e-8, "{a:?} {b:?}");
        }
    }

    #[test]
    fn closed_geodesic_along_g0_axis() {
        let dom = FundamentalDomain::bolza();
        let g0 = dom.generators()[0];
        let s = g0.axis_state().unwrap();
        assert!(s.point.norm() < 1e-12 && s.direction.abs() < 1e-12);
        let back = dom.flow(&s, g0.translation_length()).unwrap();
        assert!(back.separation(&s) < 1e-7, "{back:?}");
    }

    #[test]
    fn axis_state_is_translated_along_itself() {
        let dom = FundamentalDomain::bolza();
        let g = dom.pairings();
        let w = g[0].compose(&g[3]).unwrap();
        let s = w.axis_state().unwrap();
        let image = s.transformed(&w);
        let flowed = s.advance(w.translation_length()).unwrap();
        assert!(image.separation(&flowed) < 1e-8, "{image:?} {flowed:?}");
    }

    #[test]
    fn geodesic_midpoint_is_equidistant() {
        let (a, b) = (c(0.1, 0.5), c(-0.4, -0.2));
        let m = geodesic_midpoint(a, b).unwrap();
        let da = hyperbolic_distance(a, m).unwrap();
        let db = hyperbolic_distance(b, m).unwrap();
        let dab = hyperbolic_distance(a, b).unwrap();
        assert!((da - db).abs() < 1e-12 && (da + db - dab).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }
}
