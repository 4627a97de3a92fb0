use super::SynthError;

pub const STEPS_PER_BEAT: usize = 4;
pub const STEPS_PER_CYCLE: usize = 32;
pub const PATTERN_COUNT: usize = 9;

/// Inter-onset intervals (in sixteenth steps) of the predefined patterns.
/// Each sequence sums to a divisor of 32 and is tiled over the cycle.
const IOI_TABLE: [&[usize]; PATTERN_COUNT] = [
    &[4],
    &[3, 3, 2],
    &[3, 3, 4, 2, 4],
    &[2, 1, 1],
    &[3, 1],
    &[4, 4, 2, 2, 2, 2],
    &[2, 2, 2, 2, 8],
    &[1, 1, 6, 1, 1, 6],
    &[7, 1, 4, 4],
];

/// Onset steps within one 32-step cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhythmPattern {
    id: Option<usize>,
    steps: Vec<usize>,
}

impl RhythmPattern {
    pub fn new(mut steps: Vec<usize>) -> Result<Self, SynthError> {
        steps.sort_unstable();
        steps.dedup();
        if steps.is_empty() {
            return Err(SynthError::InvalidPattern("no onsets".into()));
        }
        if steps.iter().any(|&s| s >= STEPS_PER_CYCLE) {
            return Err(SynthError::InvalidPattern(format!("steps must be below {STEPS_PER_CYCLE}")));
        }
        Ok(Self { id: None, steps })
    }

    /// One of the predefined patterns, `id < PATTERN_COUNT`.
    pub fn standard(id: usize) -> Self {
        let iois = IOI_TABLE[id];
        let period: usize = iois.iter().sum();
        debug_assert_eq!(STEPS_PER_CYCLE % period, 0);
        let mut steps = Vec::new();
        let mut pos = 0;
        while pos < STEPS_PER_CYCLE {
            for &d in iois {
                steps.push(pos);
                pos += d;
            }
        }
        Self { id: Some(id), steps }
    }

    pub fn id(&self) -> Option<usize> {
        self.id
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn name(&self) -> String {
        match self.id {
            Some(i) => format!("pattern_{i}"),
            None => "custom".into(),
        }
    }

    /// Smallest shift (in steps) that maps the onset set onto itself.
    pub fn period_steps(&self) -> usize {
        (1..=STEPS_PER_CYCLE)
            .filter(|d| STEPS_PER_CYCLE % d == 0)
            .find(|&d| self.steps.iter().all(|s| self.steps.contains(&((s + d) % STEPS_PER_CYCLE))))
            .unwrap_or(STEPS_PER_CYCLE)
    }

    /// Intervals between consecutive onsets, wrapping around the cycle.
    pub fn iois(&self) -> Vec<usize> {
        let n = self.steps.len();
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { self.steps[i + 1] } else { self.steps[0] + STEPS_PER_CYCLE };
                next - self.steps[i]
            })
            .collect()
    }

    /// An onset on an odd sixteenth, or on an off-beat eighth whose next beat is silent.
    pub fn is_syncopated(&self) -> bool {
        self.steps.iter().any(|&s| {
            s % 2 == 1 || (s % STEPS_PER_BEAT == 2 && !self.steps.contains(&((s + 2) % STEPS_PER_CYCLE)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_patterns_are_distinct_and_tile() {
        let all: Vec<_> = (0..PATTERN_COUNT).map(RhythmPattern::standard).collect();
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.steps()[0], 0);
            assert_eq!(p.iois().iter().sum::<usize>(), STEPS_PER_CYCLE);
            for q in &all[i + 1..] {
                assert_ne!(p.steps(), q.steps());
            }
        }
        assert_eq!(RhythmPattern::standard(0).steps(), &[0, 4, 8, 12, 16, 20, 24, 28]);
        assert_eq!(RhythmPattern::standard(3).steps().len(), 24);
    }

    #[test]
    fn custom_patterns_validate() {
        assert!(RhythmPattern::new(vec![]).is_err());
        assert!(RhythmPattern::new(vec![32]).is_err());
        assert_eq!(RhythmPattern::new(vec![5, 0, 5]).unwrap().steps(), &[0, 5]);
    }
}
