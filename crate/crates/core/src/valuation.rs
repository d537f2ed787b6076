//! Single-peaked (triangular) value densities and cake instances.
//!
//! A valuation has density `v(x) = max(0, h - k|x - p|)` on `[0, 1]`, normalized so
//! that the whole cake is worth exactly one. Of the three parameters only two are
//! free: fixing the peak and either the peak density or the slope determines the
//! third through the normalization equation, which is solved in closed form over
//! the four ways the triangle can be truncated by the cake boundary.

use crate::error::{Error, Result};
use crate::ARITH_TOL;

/// Tolerance used when classifying which truncation case applies.
const CASE_TOL: f64 = 1e-12;
/// Acceptance threshold on the normalization residual of a closed-form solution.
const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePeakedValuation {
    peak: f64,
    peak_density: f64,
    slope: f64,
    left: f64,
    right: f64,
}

/// Mass of a linear ramp that rises with `slope` from zero (or from the cake
/// boundary `room` away) up to `height`.
fn ramp_mass(height: f64, slope: f64, room: f64) -> f64 {
    let run = (height / slope).min(room);
    run * height - slope * run * run / 2.0
}

fn total_mass(peak: f64, height: f64, slope: f64) -> f64 {
    ramp_mass(height, slope, peak) + ramp_mass(height, slope, 1.0 - peak)
}

fn check_position(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} {x} is outside [0, 1]")))
    }
}

/// Smallest root of a monotone function on `[lo, hi]` by bisection down to
/// floating-point resolution. `increasing` tells the direction of `f`.
fn bisect(mut lo: f64, mut hi: f64, increasing: bool, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
        let below = f(mid) < 0.0;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl SinglePeakedValuation {
    fn assemble(peak: f64, peak_density: f64, slope: f64) -> Self {
        let half_width = peak_density / slope;
        Self {
            peak,
            peak_density,
            slope,
            left: (peak - half_width).max(0.0),
            right: (peak + half_width).min(1.0),
        }
    }

    /// Builds the valuation with the given peak and peak density, solving for the slope.
    pub fn from_peak_density(peak: f64, peak_density: f64) -> Result<Self> {
        check_position(peak, "peak")?;
        if !(peak_density.is_finite() && peak_density > 0.0) {
            return Err(Error::domain(format!("peak density {peak_density} must be positive")));
        }
        // Mass tends to h as the slope goes to zero, so h <= 1 never reaches 1.
        if peak_density <= 1.0 {
            return Err(Error::NonNormalizable { peak_density });
        }
        let h = peak_density;
        let (a, b) = (peak, 1.0 - peak);

        // Candidates, one per truncation pattern: (slope, predicate on half-width).
        let one_side = |room: f64| {
            let lin = 1.0 - room * h;
            h * h / (lin + (lin * lin + room * room * h * h).sqrt())
        };
        let candidates = [
            (h * h, (true, true)),
            (one_side(a), (false, true)),
            (one_side(b), (true, false)),
            (2.0 * (h - 1.0) / (a * a + b * b), (false, false)),
        ];
        for (k, (left_inside, right_inside)) in candidates {
            if !(k.is_finite() && k > 0.0) {
                continue;
            }
            let w = h / k;
            let fits = |room: f64, inside: bool| {
                if inside {
                    w <= room + CASE_TOL
                } else {
                    w >= room - CASE_TOL
                }
            };
            if fits(a, left_inside)
                && fits(b, right_inside)
                && (total_mass(peak, h, k) - 1.0).abs() <= MASS_TOL
            {
                return Ok(Self::assemble(peak, h, k));
            }
        }

        // Mass is strictly decreasing in the slope.
        let mut hi = 1.0;
        while total_mass(peak, h, hi) > 1.0 {
            hi *= 2.0;
        }
        let k = bisect(0.0, hi, false, |k| total_mass(peak, h, k) - 1.0);
        Ok(Self::assemble(peak, h, k))
    }

    /// Builds the valuation with the given peak and slope, solving for the peak density.
    pub fn from_peak_slope(peak: f64, slope: f64) -> Result<Self> {
        check_position(peak, "peak")?;
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::domain(format!("slope {slope} must be positive")));
        }
        let k = slope;
        let (a, b) = (peak, 1.0 - peak);

        let one_side = |room: f64| {
            let c = k * k * room * room + 2.0 * k;
            c / (room * k + (room * room * k * k + c).sqrt())
        };
        let candidates = [
            (k.sqrt(), (true, true)),
            (one_side(a), (false, true)),
            (one_side(b), (true, false)),
            (1.0 + k * (a * a + b * b) / 2.0, (false, false)),
        ];
        for (h, (left_inside, right_inside)) in candidates {
            if !(h.is_finite() && h > 0.0) {
                continue;
            }
            let w = h / k;
            let fits = |room: f64, inside: bool| {
                if inside {
                    w <= room + CASE_TOL
                } else {
                    w >= room - CASE_TOL
                }
            };
            if fits(a, left_inside)
                && fits(b, right_inside)
                && (total_mass(peak, h, k) - 1.0).abs() <= MASS_TOL
            {
                return Ok(Self::assemble(peak, h, k));
            }
        }

        // Mass is strictly increasing and unbounded in the peak density.
        let mut hi = 1.0;
        while total_mass(peak, hi, k) < 1.0 {
            hi *= 2.0;
        }
        let h = bisect(0.0, hi, true, |h| total_mass(peak, h, k) - 1.0);
        Ok(Self::assemble(peak, h, k))
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn peak_density(&self) -> f64 {
        self.peak_density
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Left endpoint of the support.
    pub fn left(&self) -> f64 {
        self.left
    }

    /// Right endpoint of the support.
    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn support(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    /// `(peak, peak_density, slope)`.
    pub fn params(&self) -> (f64, f64, f64) {
        (self.peak, self.peak_density, self.slope)
    }

    /// Density without the domain check; callers guarantee `x` is in `[0, 1]`.
    pub(crate) fn density_unchecked(&self, x: f64) -> f64 {
        (self.peak_density - self.slope * (x - self.peak).abs()).max(0.0)
    }

    pub fn density_at(&self, x: f64) -> Result<f64> {
        check_position(x, "position")?;
        Ok(self.density_unchecked(x))
    }

    /// Exact value of `[x, y]`, summed as trapezoids over the two linear branches.
    pub(crate) fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        let mut total = 0.0;
        for (lo, hi) in [(self.left, self.peak), (self.peak, self.right)] {
            let start = x.max(lo);
            let end = y.min(hi);
            if end > start {
                total += (end - start)
                    * (self.density_unchecked(start) + self.density_unchecked(end))
                    / 2.0;
            }
        }
        total
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        check_position(x, "interval start")?;
        check_position(y, "interval end")?;
        if x > y {
            return Err(Error::domain(format!("interval [{x}, {y}] is reversed")));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Smallest `y >= x` with `eval(x, y) == target`.
    pub fn cut(&self, x: f64, target: f64) -> Result<f64> {
        check_position(x, "cut start")?;
        if !(target.is_finite() && target >= 0.0) {
            return Err(Error::domain(format!("cut target {target} must be non-negative")));
        }
        let available = self.eval_unchecked(x, 1.0);
        if target > available + ARITH_TOL {
            return Err(Error::Unreachable { target, available });
        }
        let target = target.min(available);
        if target <= 0.0 {
            return Ok(x);
        }
        let (k, p, h) = (self.slope, self.peak, self.peak_density);
        let start = x.max(self.left);
        let u0 = self.density_unchecked(start);

        let y = if start < p {
            let rising = self.eval_unchecked(start, p);
            if target <= rising {
                // u0 t + k t^2 / 2 = target
                start + 2.0 * target / (u0 + (u0 * u0 + 2.0 * k * target).sqrt())
            } else {
                // h e - k e^2 / 2 = rest
                let rest = target - rising;
                let disc = (h * h - 2.0 * k * rest).max(0.0);
                p + 2.0 * rest / (h + disc.sqrt())
            }
        } else {
            let disc = (u0 * u0 - 2.0 * k * target).max(0.0);
            start + 2.0 * target / (u0 + disc.sqrt())
        };
        Ok(y.clamp(x, self.right.max(x)))
    }

    /// Cumulative value of `[0, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.eval_unchecked(0.0, x.clamp(0.0, 1.0))
    }
}

/// Validity flags of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceFlags {
    pub common_slope: bool,
    pub distinct_peaks: bool,
    pub coverage: bool,
}

/// A cake-cutting problem: the unit interval, `n` agents and their valuations.
/// Agent order is the identity used by every mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct CakeInstance {
    agents: Vec<SinglePeakedValuation>,
    flags: InstanceFlags,
    waste_tolerant: bool,
}

const FLAG_TOL: f64 = 1e-9;

fn slopes_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= FLAG_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Whether the supports `(left, right)` cover `[0, 1]` up to gaps of length `FLAG_TOL`.
pub fn supports_cover(supports: &[(f64, f64)]) -> bool {
    let mut supports = supports.to_vec();
    supports.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut reach = 0.0_f64;
    for (l, r) in supports {
        if l > reach + FLAG_TOL {
            return false;
        }
        reach = reach.max(r);
    }
    reach >= 1.0 - FLAG_TOL
}

impl CakeInstance {
    /// Builds an instance; fails when the supports leave part of the cake uncovered.
    pub fn new(agents: Vec<SinglePeakedValuation>) -> Result<Self> {
        Self::build(agents, false)
    }

    /// Builds an instance that tolerates cake nobody values.
    pub fn new_waste_tolerant(agents: Vec<SinglePeakedValuation>) -> Result<Self> {
        Self::build(agents, true)
    }

    pub fn build(agents: Vec<SinglePeakedValuation>, waste_tolerant: bool) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidInstance("an instance needs at least one agent".into()));
        }
        let common_slope = agents.iter().all(|a| slopes_equal(a.slope(), agents[0].slope()));
        let distinct_peaks = agents.iter().enumerate().all(|(i, a)| {
            agents[i + 1..]
                .iter()
                .all(|b| (a.peak() - b.peak()).abs() > FLAG_TOL)
        });
        let supports: Vec<(f64, f64)> = agents.iter().map(|a| a.support()).collect();
        let coverage = supports_cover(&supports);
        if !coverage && !waste_tolerant {
            return Err(Error::InvalidInstance(
                "agent supports do not cover [0, 1]; enable waste-tolerant mode to allow this"
                    .into(),
            ));
        }
        Ok(Self {
            agents,
            flags: InstanceFlags {
                common_slope,
                distinct_peaks,
                coverage,
            },
            waste_tolerant,
        })
    }

    pub fn agents(&self) -> &[SinglePeakedValuation] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &SinglePeakedValuation {
        &self.agents[i]
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn flags(&self) -> InstanceFlags {
        self.flags
    }

    pub fn waste_tolerant(&self) -> bool {
        self.waste_tolerant
    }

    /// Agent indices sorted by peak, ties broken by index.
    pub fn peak_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| self.agents[i].peak().total_cmp(&self.agents[j].peak()).then(i.cmp(&j)));
        order
    }

    /// Area under the pointwise maximum of all densities.
    pub fn envelope_area(&self) -> f64 {
        let mut points = vec![0.0, 1.0];
        for a in &self.agents {
            points.extend([a.left(), a.peak(), a.right()]);
        }
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                points.extend(branch_crossings(a.params(), b.params()));
            }
        }
        points.retain(|x| (0.0..=1.0).contains(x));
        points.sort_by(f64::total_cmp);
        points.dedup();
        let envelope = |x: f64| {
            self.agents
                .iter()
                .map(|a| a.density_unchecked(x))
                .fold(0.0, f64::max)
        };
        points
            .windows(2)
            .map(|w| (w[1] - w[0]) * (envelope(w[0]) + envelope(w[1])) / 2.0)
            .sum()
    }
}

/// Positions in `[0, 1]` where a linear branch of one triangle meets a linear
/// branch of another; triangles are given as `(peak, peak_density, slope)`.
pub(crate) fn branch_crossings(a: (f64, f64, f64), b: (f64, f64, f64)) -> Vec<f64> {
    let mut out = Vec::new();
    for sa in [1.0, -1.0] {
        for sb in [1.0, -1.0] {
            // branch: density = h + s k (x - p)
            let da = sa * a.2;
            let db = sb * b.2;
            if (da - db).abs() <= f64::EPSILON * (da.abs() + db.abs()) {
                continue;
            }
            let x = (b.1 - a.1 + da * a.0 - db * b.0) / (da - db);
            if x.is_finite() && (0.0..=1.0).contains(&x) {
                out.push(x);
            }
        }
    }
    out
}
