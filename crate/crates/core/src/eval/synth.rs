//! Seeded synthetic well-test-like series with planted events.
//!
//! Channels are `pressure` and `volume`. A valid test is a drawdown
//! (pressure falls linearly while volume ramps up) followed by a buildup
//! (pressure recovers along a concave curve while volume holds), after
//! which the tool retracts. A lost seal is a slow volume ramp during which
//! pressure rises and returns in one sharp bump.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{GroundTruthEvent, Interval, SeriesFrame};
use crate::predicates::robust_scale;

pub const VALID_TEST: &str = "valid_test";
pub const LOST_SEAL: &str = "lost_seal";
pub const PRESSURE: &str = "pressure";
pub const VOLUME: &str = "volume";

/// Lognormal length law, clipped to `[min, max]` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthDist {
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
}

impl LengthDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let law =
            LogNormal::from_mean_cv(self.mean, self.std / self.mean).expect("validated length law");
        (law.sample(rng).round() as usize).clamp(self.min, self.max)
    }

    fn validate(&self, name: &str) -> Result<(), EvalError> {
        if !(self.mean > 0.0 && self.std > 0.0 && self.mean.is_finite() && self.std.is_finite())
            || self.min < 8
            || self.min > self.max
        {
            return Err(EvalError::BadSpec(format!("invalid length law `{name}`")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Number of frames.
    pub n_samples: usize,
    /// Noise standard deviation relative to the clean channel's IQR.
    pub noise: f64,
    /// Share of frames carrying a lost seal instead of a valid test.
    pub lost_seal_fraction: f64,
    pub drawdown: LengthDist,
    pub buildup: LengthDist,
    pub lost_seal: LengthDist,
    /// Range of the event's share of the frame length.
    pub event_fraction: (f64, f64),
    /// Insert spikes and drifts outside the event.
    pub distractors: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_samples: 48,
            noise: 0.05,
            lost_seal_fraction: 0.125,
            drawdown: LengthDist {
                mean: 100.0,
                std: 80.0,
                min: 15,
                max: 600,
            },
            buildup: LengthDist {
                mean: 900.0,
                std: 500.0,
                min: 200,
                max: 2800,
            },
            lost_seal: LengthDist {
                mean: 800.0,
                std: 500.0,
                min: 234,
                max: 1945,
            },
            event_fraction: (0.35, 0.65),
            distractors: true,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        self.drawdown.validate("drawdown")?;
        self.buildup.validate("buildup")?;
        self.lost_seal.validate("lost_seal")?;
        let (lo, hi) = self.event_fraction;
        if !(lo > 0.05 && lo <= hi && hi < 0.95) {
            return Err(EvalError::BadSpec(
                "event_fraction must satisfy 0.05 < lo <= hi < 0.95".into(),
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(EvalError::BadSpec(
                "noise must be finite and nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lost_seal_fraction) {
            return Err(EvalError::BadSpec(
                "lost_seal_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One generated frame with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub frame: SeriesFrame,
    pub events: Vec<GroundTruthEvent>,
    /// Named sub-phases of the planted event, e.g. `drawdown`, `buildup`.
    pub phases: Vec<(String, Interval)>,
}

/// Generates `spec.n_samples` frames. Identical specs give identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<SyntheticSample>, EvalError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_lost = (spec.n_samples as f64 * spec.lost_seal_fraction).round() as usize;
    let mut kinds: Vec<bool> = (0..spec.n_samples).map(|i| i < n_lost).collect();
    kinds.shuffle(&mut rng);
    kinds
        .into_iter()
        .map(|lost| {
            if lost {
                lost_seal_frame(spec, &mut rng)
            } else {
                valid_test_frame(spec, &mut rng)
            }
        })
        .collect()
}

struct Layout {
    len: usize,
    start: usize,
}

/// Places an event of `event_len` samples (plus `tail` samples of
/// aftermath) in a frame whose length makes the event a random share of it.
fn layout(spec: &SyntheticSpec, rng: &mut ChaCha8Rng, event_len: usize, tail: usize) -> Layout {
    let (lo, hi) = spec.event_fraction;
    let frac = rng.random_range(lo..=hi);
    let len = ((event_len as f64 / frac).round() as usize).max(event_len + tail + 60);
    let rest = len - event_len;
    let pre_share = rng.random_range(0.3..=0.7);
    let start = ((rest as f64 * pre_share).round() as usize).clamp(30, rest - tail - 30);
    Layout { len, start }
}

fn valid_test_frame(
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticSample, EvalError> {
    let ld = spec.drawdown.sample(rng);
    let lb = spec.buildup.sample(rng);
    let lr = rng.random_range(5..=15);
    let Layout { len, start: s } = layout(spec, rng, ld + lb, lr);
    let m = s + ld;
    let e = m + lb;

    let hydro = rng.random_range(2000.0..4000.0);
    let depth = rng.random_range(200.0..800.0);
    let recovery = rng.random_range(0.6..0.9);
    let k: f64 = rng.random_range(0.8..1.3);
    let vmax = rng.random_range(20.0..60.0);
    let bottom = hydro - depth;
    let end_p = bottom + recovery * depth;

    let mut p = vec![hydro; len];
    let mut v = vec![0.0; len];
    for t in s..m {
        let u = (t - s) as f64 / ld as f64;
        p[t] = hydro - depth * u;
        v[t] = vmax * u;
    }
    for t in m..e {
        let u = (t - m) as f64 / (lb - 1).max(1) as f64;
        p[t] = bottom + recovery * depth * (1.0 - (-k * u).exp()) / (1.0 - (-k).exp());
        v[t] = vmax;
    }
    for t in e..(e + lr).min(len) {
        let u = (t - e + 1) as f64 / lr as f64;
        p[t] = end_p + (hydro - end_p) * u;
        v[t] = vmax * (1.0 - u);
    }
    if spec.distractors {
        add_distractors(rng, &mut p, depth, &[(0, s), (e + lr, len)]);
    }
    finish(
        spec,
        rng,
        p,
        v,
        vec![GroundTruthEvent::new(Interval::of(s, e), VALID_TEST)?],
        vec![
            ("drawdown".into(), Interval::of(s, m)),
            ("buildup".into(), Interval::of(m, e)),
        ],
    )
}

fn lost_seal_frame(
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticSample, EvalError> {
    let l = spec.lost_seal.sample(rng);
    let hold = rng.random_range(20..=80);
    let lr = rng.random_range(5..=15);
    let Layout { len, start: s } = layout(spec, rng, l, hold + lr);
    let e = s + l;

    let hydro = rng.random_range(2000.0..4000.0);
    let bump = rng.random_range(150.0..500.0);
    let vmax = rng.random_range(20.0..60.0);
    let mut p = vec![hydro; len];
    let mut v = vec![0.0; len];
    for t in s..e {
        let u = (t - s) as f64 / (l - 1) as f64;
        p[t] = hydro + bump * (std::f64::consts::PI * u).sin().powi(4);
        v[t] = vmax * u;
    }
    for x in v.iter_mut().take((e + hold).min(len)).skip(e) {
        *x = vmax;
    }
    let start = (e + hold).min(len);
    for (i, x) in v[start..(e + hold + lr).min(len)].iter_mut().enumerate() {
        let u = (i + 1) as f64 / lr as f64;
        *x = vmax * (1.0 - u);
    }
    if spec.distractors {
        add_distractors(rng, &mut p, bump, &[(0, s), (e + hold + lr, len)]);
    }
    finish(
        spec,
        rng,
        p,
        v,
        vec![GroundTruthEvent::new(Interval::of(s, e), LOST_SEAL)?],
        vec![("lost_seal".into(), Interval::of(s, e))],
    )
}

/// Up to two pressure spikes or slow drifts in each quiet region, kept
/// 20 samples clear of its ends.
fn add_distractors(
    rng: &mut ChaCha8Rng,
    p: &mut [f64],
    amplitude: f64,
    regions: &[(usize, usize)],
) {
    for &(a, b) in regions {
        let (a, b) = (a + 20, b.saturating_sub(20));
        for _ in 0..rng.random_range(0..=2) {
            let spike = rng.random_bool(0.5);
            let width = if spike {
                rng.random_range(10..=40)
            } else {
                rng.random_range(100..=300)
            };
            if b <= a || b - a <= width {
                continue;
            }
            let at = rng.random_range(a..b - width);
            let height = if spike {
                rng.random_range(0.2..0.5) * amplitude
            } else {
                rng.random_range(-0.1..0.1) * amplitude
            };
            for i in 0..width {
                let u = i as f64 / (width - 1) as f64;
                let shape = if spike {
                    1.0 - (2.0 * u - 1.0).abs()
                } else {
                    (std::f64::consts::PI * u).sin()
                };
                p[at + i] += height * shape;
            }
        }
    }
}

fn finish(
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
    mut p: Vec<f64>,
    mut v: Vec<f64>,
    events: Vec<GroundTruthEvent>,
    phases: Vec<(String, Interval)>,
) -> Result<SyntheticSample, EvalError> {
    for col in [&mut p, &mut v] {
        let sd = spec.noise * robust_scale(col);
        for x in col.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sd * z;
        }
    }
    let frame = SeriesFrame::new(vec![PRESSURE.into(), VOLUME.into()], vec![p, v], 1.0)?;
    Ok(SyntheticSample {
        frame,
        events,
        phases,
    })
}
