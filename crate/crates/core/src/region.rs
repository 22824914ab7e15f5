//! Axis-aligned boxes, round balls and the regions used by displacement checks.

use crate::error::{Error, Result};

/// Closed axis-aligned box `[lo, hi]` in ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::Contract(format!(
                "box bounds must be finite with lo <= hi: {lo:?} / {hi:?}"
            )));
        }
        Ok(AxisBox { lo, hi })
    }

    /// The cube `[-half, half]ⁿ`.
    pub fn cube(dim: usize, half: f64) -> Self {
        AxisBox {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn centered(center: &[f64], half_widths: &[f64]) -> Self {
        AxisBox {
            lo: center.iter().zip(half_widths).map(|(c, h)| c - h).collect(),
            hi: center.iter().zip(half_widths).map(|(c, h)| c + h).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Strictly outside (not touching) the box.
    pub fn excludes(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .any(|(v, (a, b))| *v < *a || *v > *b)
    }

    pub fn inflate(&self, by: f64) -> Self {
        AxisBox {
            lo: self.lo.iter().map(|a| a - by).collect(),
            hi: self.hi.iter().map(|b| b + by).collect(),
        }
    }

    /// Inflates each side by a relative fraction of its width.
    pub fn inflate_relative(&self, frac: f64) -> Self {
        AxisBox {
            lo: self.lo.iter().zip(&self.hi).map(|(a, b)| a - frac * (b - a)).collect(),
            hi: self.lo.iter().zip(&self.hi).map(|(a, b)| b + frac * (b - a)).collect(),
        }
    }

    pub fn union(&self, other: &AxisBox) -> Self {
        AxisBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Intersection; `None` when empty.
    pub fn intersect(&self, other: &AxisBox) -> Option<Self> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        lo.iter().zip(&hi).all(|(a, b)| a <= b).then_some(AxisBox { lo, hi })
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, a), b) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*a, *b);
        }
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }

    /// Signed Euclidean distance: negative inside, positive outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        let mut outside = 0.0;
        let mut inside = f64::NEG_INFINITY;
        for ((v, a), b) in x.iter().zip(&self.lo).zip(&self.hi) {
            let d = (a - v).max(v - b);
            if d > 0.0 {
                outside += d * d;
            }
            inside = inside.max(d.min(0.0));
        }
        if outside > 0.0 {
            outside.sqrt()
        } else {
            inside
        }
    }
}

/// Round ball in ℝⁿ. Radius zero means the empty set.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Contract(format!("ball radius must be >= 0, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        d2.sqrt() - self.radius
    }

    pub fn bounding_box(&self) -> AxisBox {
        AxisBox::centered(&self.center, &vec![self.radius; self.center.len()])
    }
}

/// A region to be displaced.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ball(Ball),
    Box(AxisBox),
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Ok(Region::Ball(Ball::new(center, radius)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball(b) => b.center.len(),
            Region::Box(b) => b.dim(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Ball(b) => b.radius == 0.0,
            Region::Box(b) => b.widths().iter().any(|w| *w == 0.0),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Region::Ball(b) => b.center.clone(),
            Region::Box(b) => b.center(),
        }
    }

    pub fn bounding_box(&self) -> AxisBox {
        match self {
            Region::Ball(b) => b.bounding_box(),
            Region::Box(b) => b.clone(),
        }
    }

    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Ball(b) => b.signed_distance(x),
            Region::Box(b) => b.signed_distance(x),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) <= 0.0
    }

    /// Whether `self ⊂ other`, decided exactly for ball/box pairs.
    pub fn is_subset_of(&self, other: &Region) -> bool {
        if self.is_empty() {
            return true;
        }
        match (self, other) {
            (Region::Ball(a), Region::Ball(b)) => {
                let d: f64 = a
                    .center
                    .iter()
                    .zip(&b.center)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                d + a.radius <= b.radius
            }
            (Region::Box(a), _) => a.corners().iter().all(|c| other.contains(c)),
            (Region::Ball(a), Region::Box(b)) => b.contains(&a.bounding_box().lo) && b.contains(&a.bounding_box().hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_signed_distance() {
        let b = AxisBox::cube(2, 1.0);
        assert_eq!(b.signed_distance(&[0.0, 0.0]), -1.0);
        assert_eq!(b.signed_distance(&[2.0, 0.0]), 1.0);
        assert!((b.signed_distance(&[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.signed_distance(&[1.0, 0.5]), 0.0);
    }

    #[test]
    fn intersection_and_union() {
        let a = AxisBox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let b = AxisBox::new(vec![1.0, -1.0], vec![3.0, 1.0]).unwrap();
        let i = a.intersect(&b).unwrap();
        assert_eq!(i.lo, vec![1.0, 0.0]);
        assert_eq!(i.hi, vec![2.0, 1.0]);
        let u = a.union(&b);
        assert_eq!(u.lo, vec![0.0, -1.0]);
        assert_eq!(u.hi, vec![3.0, 2.0]);
        let far = AxisBox::new(vec![5.0, 5.0], vec![6.0, 6.0]).unwrap();
        assert!(a.intersect(&far).is_none());
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(AxisBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(Ball::new(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn ball_subset() {
        let small = Region::ball(vec![0.1, 0.0], 0.3).unwrap();
        let big = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
        assert!(small.is_subset_of(&big));
        assert!(!big.is_subset_of(&small));
        let empty = Region::ball(vec![9.0, 9.0], 0.0).unwrap();
        assert!(empty.is_subset_of(&small));
    }
}
