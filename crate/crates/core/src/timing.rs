// SPDX-License-Identifier: Apache-2.0

//! Periodicity through relative timestamps, injectable delay models, and the
//! internal-delay arithmetic of a gate transition.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Nanosecond timestamp as carried by the switch pipeline (48 bits).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const BITS: u32 = 48;
    pub const MAX: Timestamp = Timestamp((1 << 48) - 1);

    pub fn ns(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ns", self.0)
    }
}

/// Timestamp of the last period-completion frame of one period.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodReference {
    pub last_completion: Timestamp,
    pub period: u64,
}

impl PeriodReference {
    pub fn new(last_completion: Timestamp, period: u64) -> Self {
        PeriodReference { last_completion, period }
    }

    pub fn complete(&mut self, t: Timestamp) {
        self.last_completion = t;
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TimingError {
    #[error("clock regression: timestamp {t} precedes the period reference {reference}")]
    ClockRegression { t: u64, reference: u64 },
    #[error("invalid delay model: {0}")]
    InvalidModel(String),
}

pub fn relative_timestamp(t_abs: Timestamp, reference: &PeriodReference) -> Result<u64, TimingError> {
    t_abs
        .0
        .checked_sub(reference.last_completion.0)
        .ok_or(TimingError::ClockRegression { t: t_abs.0, reference: reference.last_completion.0 })
}

/// Deviation of a measured period from the configured one.
pub fn delta_tg(t_next: Timestamp, t_prev: Timestamp, h: u64) -> i64 {
    t_next.0 as i64 - t_prev.0 as i64 - h as i64
}

pub fn internal_delay_total(d_tg: i64, d_queue: i64, d_control: i64) -> i64 {
    d_tg + d_queue + d_control
}

/// Duration of an entry whose start moved by `delta_prev` and whose end moved
/// by `delta_cur`, with an early predecessor counted by magnitude.
pub fn predicted_entry_duration(d: u64, delta_prev: i64, delta_cur: i64) -> i64 {
    d as i64 + delta_prev.abs() + delta_cur
}

/// Delay distribution in signed nanoseconds.
#[derive(Clone, Debug, PartialEq)]
pub enum DelayModel {
    Constant(i64),
    /// Inclusive on both ends.
    Uniform { lo: i64, hi: i64 },
    Empirical(Vec<(i64, f64)>),
    /// Replayed in order, wrapping at the end.
    Scripted(Vec<i64>),
}

impl DelayModel {
    pub fn validate(&self) -> Result<(), TimingError> {
        match self {
            DelayModel::Constant(_) => Ok(()),
            DelayModel::Uniform { lo, hi } if lo <= hi => Ok(()),
            DelayModel::Uniform { lo, hi } => Err(TimingError::InvalidModel(format!("uniform lo {lo} > hi {hi}"))),
            DelayModel::Empirical(table) => {
                if table.is_empty() {
                    return Err(TimingError::InvalidModel("empirical table is empty".into()));
                }
                if table.iter().any(|&(_, p)| !(p >= 0.0 && p.is_finite())) {
                    return Err(TimingError::InvalidModel("empirical probability is negative or not finite".into()));
                }
                let sum: f64 = table.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(TimingError::InvalidModel(format!("empirical probabilities sum to {sum}, not 1")));
                }
                Ok(())
            }
            DelayModel::Scripted(seq) if seq.is_empty() => {
                Err(TimingError::InvalidModel("scripted sequence is empty".into()))
            }
            DelayModel::Scripted(_) => Ok(()),
        }
    }

    pub fn min_value(&self) -> i64 {
        match self {
            DelayModel::Constant(c) => *c,
            DelayModel::Uniform { lo, .. } => *lo,
            DelayModel::Empirical(t) => t.iter().filter(|e| e.1 > 0.0).map(|e| e.0).min().unwrap_or(0),
            DelayModel::Scripted(s) => s.iter().copied().min().unwrap_or(0),
        }
    }

    pub fn max_value(&self) -> i64 {
        match self {
            DelayModel::Constant(c) => *c,
            DelayModel::Uniform { hi, .. } => *hi,
            DelayModel::Empirical(t) => t.iter().filter(|e| e.1 > 0.0).map(|e| e.0).max().unwrap_or(0),
            DelayModel::Scripted(s) => s.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DelayModel::Constant(c) => *c as f64,
            DelayModel::Uniform { lo, hi } => (*lo + *hi) as f64 / 2.0,
            DelayModel::Empirical(t) => t.iter().map(|&(v, p)| v as f64 * p).sum(),
            DelayModel::Scripted(s) => s.iter().sum::<i64>() as f64 / s.len().max(1) as f64,
        }
    }
}

/// Draws one value. `cursor` is the replay position of a scripted model and
/// is left untouched by the other kinds.
pub fn sample_delay<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R, cursor: &mut usize) -> i64 {
    match model {
        DelayModel::Constant(c) => *c,
        DelayModel::Uniform { lo, hi } => rng.gen_range(*lo..=*hi),
        DelayModel::Empirical(table) => {
            let dist = WeightedIndex::new(table.iter().map(|e| e.1)).expect("validated empirical table");
            table[dist.sample(rng)].0
        }
        DelayModel::Scripted(seq) => {
            let v = seq[*cursor % seq.len()];
            *cursor = (*cursor + 1) % seq.len();
            v
        }
    }
}

/// A delay model bound to its own random stream and replay cursor.
#[derive(Clone, Debug)]
pub struct DelaySource {
    model: DelayModel,
    weights: Option<WeightedIndex<f64>>,
    rng: ChaCha12Rng,
    cursor: usize,
}

impl DelaySource {
    pub fn new(model: DelayModel, rng: ChaCha12Rng) -> Result<Self, TimingError> {
        model.validate()?;
        let weights = match &model {
            DelayModel::Empirical(t) => {
                Some(WeightedIndex::new(t.iter().map(|e| e.1)).map_err(|e| TimingError::InvalidModel(e.to_string()))?)
            }
            _ => None,
        };
        Ok(DelaySource { model, weights, rng, cursor: 0 })
    }

    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    pub fn sample(&mut self) -> i64 {
        match (&self.model, &self.weights) {
            (DelayModel::Empirical(t), Some(w)) => t[w.sample(&mut self.rng)].0,
            (m, _) => sample_delay(m, &mut self.rng, &mut self.cursor),
        }
    }
}

/// Independent random streams carved out of one scenario seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Tg = 1,
    Queue = 2,
    Control = 3,
    Traffic = 4,
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | index);
    rng
}

/// Weight given to queue delays of at most 11 ns in the default table,
/// fitted so that openings measured at the sink average 14.6 ns once an
/// opening queued behind the preceding close is counted.
pub const DEFAULT_QUEUE_LOW_MASS: f64 = 0.82;

/// Period deviation of the traffic generator: mostly exact, rarely ±11 ns.
pub fn default_tg_model() -> DelayModel {
    let mut t = vec![(0, 0.5), (-1, 0.15), (1, 0.15), (-2, 0.07), (2, 0.07)];
    let tail = 0.06 / 18.0;
    for v in 3..=11 {
        t.push((-v, tail));
        t.push((v, tail));
    }
    DelayModel::Empirical(t)
}

/// Queue state-change delay: 1..=11 ns carries `DEFAULT_QUEUE_LOW_MASS`, the
/// rest is spread over 12..=63 ns.
pub fn default_queue_model() -> DelayModel {
    queue_model_with_low_mass(DEFAULT_QUEUE_LOW_MASS)
}

pub fn queue_model_with_low_mass(p: f64) -> DelayModel {
    let mut t = Vec::with_capacity(63);
    for v in 1..=11 {
        t.push((v, p / 11.0));
    }
    for v in 12..=63 {
        t.push((v, (1.0 - p) / 52.0));
    }
    DelayModel::Empirical(t)
}

/// Control-frame spacing: 9 ns with rare spikes up to 12 ns.
pub fn default_control_model() -> DelayModel {
    DelayModel::Empirical(vec![(9, 0.9997), (10, 1e-4), (11, 1e-4), (12, 1e-4)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_timestamps() {
        let r = PeriodReference::new(Timestamp(1000), 400);
        assert_eq!(relative_timestamp(Timestamp(1000), &r), Ok(0));
        assert_eq!(relative_timestamp(Timestamp(1399), &r), Ok(399));
        assert_eq!(relative_timestamp(Timestamp(1411), &r), Ok(411));
        assert_eq!(
            relative_timestamp(Timestamp(999), &r),
            Err(TimingError::ClockRegression { t: 999, reference: 1000 })
        );
    }

    #[test]
    fn delta_tg_examples() {
        let h = 400_000;
        assert_eq!(delta_tg(Timestamp(2 * h), Timestamp(h), h), 0);
        assert_eq!(delta_tg(Timestamp(800_011), Timestamp(400_000), h), 11);
        assert_eq!(delta_tg(Timestamp(799_989), Timestamp(400_000), h), -11);
        for x in -50..50 {
            assert_eq!(delta_tg(Timestamp((1_000_000 + h as i64 + x) as u64), Timestamp(1_000_000), h), x);
        }
    }

    #[test]
    fn internal_delay_examples() {
        assert_eq!(internal_delay_total(11, 63, 12), 86);
        assert_eq!(internal_delay_total(0, 0, 0), 0);
        assert_eq!(internal_delay_total(-11, 1, 0), -10);
        assert_eq!(predicted_entry_duration(50_000, -11, 86), 50_097);
        assert_eq!(predicted_entry_duration(50_000, 0, 0), 50_000);
        assert_eq!(predicted_entry_duration(50_000, -11, 0), 50_011);
    }

    #[test]
    fn sampling_kinds() {
        let mut rng = stream_rng(7, Stream::Tg, 0);
        let mut c = 0;
        assert_eq!(sample_delay(&DelayModel::Constant(9), &mut rng, &mut c), 9);
        let s = DelayModel::Scripted(vec![1, 63]);
        let got: Vec<i64> = (0..5).map(|_| sample_delay(&s, &mut rng, &mut c)).collect();
        assert_eq!(got, [1, 63, 1, 63, 1]);
        let u = DelayModel::Uniform { lo: -11, hi: 11 };
        let mut seen = [false; 23];
        for _ in 0..1_000_000 {
            let v = sample_delay(&u, &mut rng, &mut c);
            assert!((-11..=11).contains(&v));
            seen[(v + 11) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let model = DelayModel::Empirical(vec![(1, 0.5), (5, 0.3), (9, 0.2)]);
        let mut src = DelaySource::new(model.clone(), stream_rng(11, Stream::Queue, 0)).unwrap();
        let n = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            match src.sample() {
                1 => counts[0] += 1,
                5 => counts[1] += 1,
                9 => counts[2] += 1,
                v => panic!("unlisted value {v}"),
            }
        }
        for (k, &(_, p)) in model_table(&model).iter().enumerate() {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((counts[k] as f64 - n as f64 * p).abs() <= 3.0 * sigma, "value {k}: {}", counts[k]);
        }
    }

    fn model_table(m: &DelayModel) -> Vec<(i64, f64)> {
        match m {
            DelayModel::Empirical(t) => t.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn validation() {
        assert!(DelayModel::Empirical(vec![(1, 0.5), (2, 0.5 + 1e-12)]).validate().is_ok());
        assert!(DelayModel::Empirical(vec![(1, 0.5), (2, 0.4)]).validate().is_err());
        assert!(DelayModel::Empirical(vec![]).validate().is_err());
        assert!(DelayModel::Scripted(vec![]).validate().is_err());
        assert!(DelayModel::Uniform { lo: 2, hi: 1 }.validate().is_err());
        for m in [default_tg_model(), default_queue_model(), default_control_model()] {
            m.validate().unwrap();
        }
    }

    #[test]
    fn default_model_ranges() {
        let tg = default_tg_model();
        assert_eq!((tg.min_value(), tg.max_value()), (-11, 11));
        assert!(tg.mean().abs() < 1e-12);
        let q = default_queue_model();
        assert_eq!((q.min_value(), q.max_value()), (1, 63));
        let c = default_control_model();
        assert_eq!((c.min_value(), c.max_value()), (9, 12));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = stream_rng(1, Stream::Tg, 0).gen();
        let b: u64 = stream_rng(1, Stream::Queue, 0).gen();
        let c: u64 = stream_rng(1, Stream::Tg, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
