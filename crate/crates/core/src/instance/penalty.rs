use crate::error::{OsdError, Result};
use crate::scalar::{Extended, Scalar};

/// Continuous, nondecreasing, piecewise-linear delay penalty with `c(0) = 0`
/// and an optional deadline at which it jumps to `+inf`.
///
/// Segment `j` starts at delay `segments[j].0` and has slope `segments[j].1`;
/// the last segment extends forever.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyFn<T> {
    segments: Vec<(T, T)>,
    deadline: Option<T>,
}

impl<T: Scalar> PenaltyFn<T> {
    pub fn new(segments: Vec<(T, T)>, deadline: Option<T>) -> Result<Self> {
        if segments.is_empty() {
            return Err(OsdError::InvalidPenalty("at least one segment is required".into()));
        }
        if !segments[0].0.is_zero() {
            return Err(OsdError::InvalidPenalty("first segment must start at delay 0".into()));
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(OsdError::InvalidPenalty("segment offsets must increase strictly".into()));
            }
        }
        if segments.iter().any(|(_, s)| s.is_negative()) {
            return Err(OsdError::InvalidPenalty("slopes must be nonnegative".into()));
        }
        if let Some(d) = &deadline {
            if *d <= T::zero() {
                return Err(OsdError::InvalidPenalty("deadline must be positive".into()));
            }
        }
        Ok(PenaltyFn { segments, deadline })
    }

    pub fn linear(slope: T) -> Self {
        PenaltyFn::new(vec![(T::zero(), slope)], None).expect("valid linear penalty")
    }

    /// Zero penalty until `deadline`, then infinite.
    pub fn deadline_only(deadline: T) -> Self {
        PenaltyFn::new(vec![(T::zero(), T::zero())], Some(deadline)).expect("valid deadline penalty")
    }

    pub fn segments(&self) -> &[(T, T)] {
        &self.segments
    }

    pub fn deadline(&self) -> Option<&T> {
        self.deadline.as_ref()
    }

    pub fn set_deadline(&mut self, deadline: Option<T>) -> Result<()> {
        if let Some(d) = &deadline {
            if *d <= T::zero() {
                return Err(OsdError::InvalidPenalty("deadline must be positive".into()));
            }
        }
        self.deadline = deadline;
        Ok(())
    }

    /// Same shape with every slope multiplied by `factor`.
    pub fn scaled(&self, factor: &T) -> Self {
        PenaltyFn {
            segments: self.segments.iter().map(|(o, s)| (o.clone(), s.clone() * factor.clone())).collect(),
            deadline: self.deadline.clone(),
        }
    }

    /// Value of the finite piecewise-linear part, ignoring the deadline. This is
    /// also the left limit at the deadline.
    pub fn finite_value(&self, delay: &T) -> T {
        let mut total = T::zero();
        for (j, (start, slope)) in self.segments.iter().enumerate() {
            if *delay <= *start {
                break;
            }
            let end = match self.segments.get(j + 1) {
                Some((next, _)) if *next < *delay => next.clone(),
                _ => delay.clone(),
            };
            total = total + slope.clone() * (end - start.clone());
        }
        total
    }

    fn slope_at(&self, delay: &T) -> T {
        self.segments.iter().rev().find(|(start, _)| *start <= *delay).map(|(_, s)| s.clone()).unwrap_or_else(T::zero)
    }

    pub fn penalty_at(&self, delay: &T) -> Result<Extended<T>> {
        if delay.is_negative() {
            return Err(OsdError::NegativeDelay);
        }
        match &self.deadline {
            Some(d) if *delay >= *d => Ok(Extended::Infinite),
            _ => Ok(Extended::Finite(self.finite_value(delay))),
        }
    }

    /// Right derivative of [`PenaltyFn::penalty_at`].
    pub fn penalty_rate_at(&self, delay: &T) -> Result<Extended<T>> {
        if delay.is_negative() {
            return Err(OsdError::NegativeDelay);
        }
        match &self.deadline {
            Some(d) if *delay >= *d => Ok(Extended::Infinite),
            _ => Ok(Extended::Finite(self.slope_at(delay))),
        }
    }

    /// Delays where the rate changes, including the deadline, in increasing order.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = self.segments.iter().skip(1).map(|(o, _)| o.clone()).collect();
        if let Some(d) = &self.deadline {
            out.retain(|o| o < d);
            out.push(d.clone());
        }
        out
    }

    /// First breakpoint strictly after `delay`.
    pub fn next_breakpoint_after(&self, delay: &T) -> Option<T> {
        self.breakpoints().into_iter().find(|b| b > delay)
    }

    /// Smallest delay at which the value reaches `level`, if any.
    pub fn delay_reaching(&self, level: &T) -> Option<T> {
        if *level <= T::zero() {
            return Some(T::zero());
        }
        let mut acc = T::zero();
        for (j, (start, slope)) in self.segments.iter().enumerate() {
            let end = self.segments.get(j + 1).map(|(o, _)| o.clone());
            let candidate = if slope.is_positive() { Some(start.clone() + (level.clone() - acc.clone()) / slope.clone()) } else { None };
            match (&candidate, &end) {
                (Some(c), Some(e)) if c <= e => return self.clip(c.clone()),
                (Some(c), None) => return self.clip(c.clone()),
                _ => {}
            }
            if let Some(e) = end {
                acc = acc + slope.clone() * (e - start.clone());
            }
        }
        self.deadline.clone()
    }

    fn clip(&self, delay: T) -> Option<T> {
        match &self.deadline {
            Some(d) if *d < delay => Some(d.clone()),
            _ => Some(delay),
        }
    }
}
