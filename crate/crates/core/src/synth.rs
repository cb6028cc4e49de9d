//! Seeded synthetic keystroke cohorts.
//!
//! Every user gets Gaussian per-key profiles (hold, touch offset, pressure,
//! area) and per-position inter-key intervals. User means are a shared base plus
//! `separation` within-user standard deviations times a standard normal draw, so
//! `separation = 0` makes every user identical. Imposter samples for a user are
//! other users typing that user's PIN.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sample::{KeyEvent, KeyId, KeystrokeSample, Label, DEFAULT_PIN_LENGTH};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("need at least 2 users, got {0}")]
    TooFewUsers(usize),
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub users: usize,
    pub sessions: usize,
    pub per_session: usize,
    /// Imposter attempts generated against each user.
    pub imposters_per_user: usize,
    pub separation: f64,
    /// Per-group overrides of `separation`.
    pub location_separation: Option<f64>,
    pub timing_separation: Option<f64>,
    pub force_separation: Option<f64>,
    /// Per-session mean shift, in within-user standard deviations.
    pub session_drift: f64,
    /// Fraction of samples with one stray touch location and one long pause.
    pub outlier_rate: f64,
    pub pin_length: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 17,
            sessions: 6,
            per_session: 100,
            imposters_per_user: 200,
            separation: 2.0,
            location_separation: None,
            timing_separation: None,
            force_separation: None,
            session_drift: 0.1,
            outlier_rate: 0.0,
            pin_length: DEFAULT_PIN_LENGTH,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.users < 2 {
            return Err(SynthError::TooFewUsers(self.users));
        }
        let check = |name: &'static str, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(SynthError::InvalidParameter { name, value })
            }
        };
        check("separation", self.separation, self.separation >= 0.0)?;
        for (name, v) in [
            ("location_separation", self.location_separation),
            ("timing_separation", self.timing_separation),
            ("force_separation", self.force_separation),
        ] {
            if let Some(v) = v {
                check(name, v, v >= 0.0)?;
            }
        }
        check("session_drift", self.session_drift, self.session_drift >= 0.0)?;
        check("outlier_rate", self.outlier_rate, (0.0..=1.0).contains(&self.outlier_rate))?;
        check("sessions", self.sessions as f64, self.sessions > 0)?;
        check("per_session", self.per_session as f64, self.per_session > 0)?;
        check("pin_length", self.pin_length as f64, self.pin_length >= 2)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    /// Rejection sample from the normal truncated to `[lo, hi]`.
    fn sample_truncated<R: Rng + ?Sized>(&self, rng: &mut R, lo: f64, hi: f64) -> f64 {
        for _ in 0..1000 {
            let z: f64 = StandardNormal.sample(rng);
            let v = self.mean + self.sd * z;
            if v >= lo && v <= hi {
                return v;
            }
        }
        self.mean.clamp(lo, hi)
    }

    fn shifted(&self, z: f64, scale: f64) -> Self {
        Self::new(self.mean + scale * self.sd * z, self.sd)
    }
}

const BASE_HOLD: Gaussian = Gaussian::new(100.0, 15.0);
const BASE_INTERVAL: Gaussian = Gaussian::new(250.0, 40.0);
const BASE_OFFSET: Gaussian = Gaussian::new(0.5, 0.08);
const BASE_PRESSURE: Gaussian = Gaussian::new(0.5, 0.05);
const BASE_AREA: Gaussian = Gaussian::new(0.3, 0.03);
const OFFSET_BOUNDS: (f64, f64) = (0.25, 0.75);
const MIN_TIME_MS: f64 = 1.0;
const PAUSE_MS: (f64, f64) = (500.0, 1500.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyProfile {
    pub hold: Gaussian,
    pub x: Gaussian,
    pub y: Gaussian,
    pub pressure: Gaussian,
    pub area: Gaussian,
}

/// Behavioral profile of one synthetic user. `keys` is indexed by digit, with
/// ENTER at 10; `intervals` holds the press-to-press gap per PIN position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub pin: Vec<KeyId>,
    pub keys: Vec<KeyProfile>,
    pub intervals: Vec<Gaussian>,
    pub session_drift: f64,
    pub seed: u64,
}

fn key_index(k: KeyId) -> usize {
    match k {
        KeyId::Digit(d) => d as usize,
        KeyId::Enter => 10,
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

impl UserProfile {
    fn generate<R: Rng + ?Sized>(cfg: &SynthConfig, index: usize, seed: u64, rng: &mut R) -> Self {
        let loc = cfg.location_separation.unwrap_or(cfg.separation);
        let timing = cfg.timing_separation.unwrap_or(cfg.separation);
        let force = cfg.force_separation.unwrap_or(cfg.separation);
        let mut pin: Vec<KeyId> = (0..cfg.pin_length - 1)
            .map(|_| KeyId::Digit(rng.random_range(0..10u8)))
            .collect();
        pin.push(KeyId::Enter);
        let keys = (0..11)
            .map(|_| {
                let mut hold = BASE_HOLD.shifted(normal(rng), timing);
                hold.mean = hold.mean.max(4.0 * hold.sd);
                let mut x = BASE_OFFSET.shifted(normal(rng), loc);
                let mut y = BASE_OFFSET.shifted(normal(rng), loc);
                x.mean = x.mean.clamp(OFFSET_BOUNDS.0, OFFSET_BOUNDS.1);
                y.mean = y.mean.clamp(OFFSET_BOUNDS.0, OFFSET_BOUNDS.1);
                let mut pressure = BASE_PRESSURE.shifted(normal(rng), force);
                let mut area = BASE_AREA.shifted(normal(rng), force);
                pressure.mean = pressure.mean.clamp(4.0 * pressure.sd, 1.0 - 4.0 * pressure.sd);
                area.mean = area.mean.clamp(4.0 * area.sd, 1.0 - 4.0 * area.sd);
                KeyProfile {
                    hold,
                    x,
                    y,
                    pressure,
                    area,
                }
            })
            .collect();
        let intervals = (0..cfg.pin_length - 1)
            .map(|_| {
                let mut g = BASE_INTERVAL.shifted(normal(rng), timing);
                g.mean = g.mean.max(4.0 * g.sd);
                g
            })
            .collect();
        Self {
            user_id: user_id(index),
            pin,
            keys,
            intervals,
            session_drift: cfg.session_drift,
            seed,
        }
    }

    /// Profile with every mean moved by `session_drift` standard deviations
    /// times an independent normal draw.
    pub fn for_session<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let d = self.session_drift;
        let mut out = self.clone();
        for k in &mut out.keys {
            for g in [&mut k.hold, &mut k.x, &mut k.y, &mut k.pressure, &mut k.area] {
                *g = g.shifted(normal(rng), d);
            }
        }
        for g in &mut out.intervals {
            *g = g.shifted(normal(rng), d);
        }
        out
    }

    /// One entry of `pin` typed with this profile's behavior.
    pub fn type_pin<R: Rng + ?Sized>(&self, pin: &[KeyId], outlier_rate: f64, rng: &mut R) -> Vec<KeyEvent> {
        let mut press = 0.0;
        let mut events = Vec::with_capacity(pin.len());
        for (k, &key) in pin.iter().enumerate() {
            if k > 0 {
                let g = self.intervals[(k - 1).min(self.intervals.len() - 1)];
                press += g.sample_truncated(rng, MIN_TIME_MS, f64::INFINITY);
            }
            let p = &self.keys[key_index(key)];
            let hold = p.hold.sample_truncated(rng, MIN_TIME_MS, f64::INFINITY);
            events.push(KeyEvent {
                key_id: key,
                press_time: press,
                release_time: press + hold,
                x: p.x.sample_truncated(rng, 0.0, 1.0),
                y: p.y.sample_truncated(rng, 0.0, 1.0),
                pressure: p.pressure.sample_truncated(rng, 1e-3, 1.0),
                area: p.area.sample_truncated(rng, 1e-3, 1.0),
            });
        }
        if outlier_rate > 0.0 && rng.random_bool(outlier_rate) {
            inject_outlier(&mut events, rng);
        }
        events
    }
}

/// A stray touch anywhere on one key and a long hesitation before another.
fn inject_outlier<R: Rng + ?Sized>(events: &mut [KeyEvent], rng: &mut R) {
    let k = rng.random_range(0..events.len());
    events[k].x = rng.random_range(0.0..1.0);
    events[k].y = rng.random_range(0.0..1.0);
    let j = rng.random_range(1..events.len());
    let pause = rng.random_range(PAUSE_MS.0..PAUSE_MS.1);
    for e in &mut events[j..] {
        e.press_time += pause;
        e.release_time += pause;
    }
}

pub fn user_id(index: usize) -> String {
    format!("user{index}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImposterSample {
    /// Index of the user whose profile produced the sample.
    pub source: usize,
    pub sample: KeystrokeSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserData {
    pub profile: UserProfile,
    /// Ordered by session.
    pub genuine: Vec<KeystrokeSample>,
    pub imposters: Vec<ImposterSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub config: SynthConfig,
    pub users: Vec<UserData>,
}

impl Cohort {
    /// All samples, user by user, genuine before imposter.
    pub fn samples(&self) -> Vec<KeystrokeSample> {
        self.users
            .iter()
            .flat_map(|u| u.genuine.iter().cloned().chain(u.imposters.iter().map(|i| i.sample.clone())))
            .collect()
    }
}

pub fn generate_cohort(cfg: &SynthConfig) -> Result<Cohort, SynthError> {
    cfg.validate()?;
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.users)
        .map(|i| ChaCha8Rng::seed_from_u64(cfg.seed ^ i as u64))
        .collect();
    let profiles: Vec<UserProfile> = rngs
        .iter_mut()
        .enumerate()
        .map(|(i, rng)| UserProfile::generate(cfg, i, cfg.seed ^ i as u64, rng))
        .collect();
    let users = rngs
        .into_par_iter()
        .enumerate()
        .map(|(u, mut rng)| {
            let profile = &profiles[u];
            let mut genuine = Vec::with_capacity(cfg.sessions * cfg.per_session);
            for s in 0..cfg.sessions {
                let session = profile.for_session(&mut rng);
                for _ in 0..cfg.per_session {
                    genuine.push(KeystrokeSample {
                        user_id: profile.user_id.clone(),
                        session_id: format!("s{s}"),
                        label: Label::Genuine,
                        events: session.type_pin(&profile.pin, cfg.outlier_rate, &mut rng),
                    });
                }
            }
            let imposters = (0..cfg.imposters_per_user)
                .map(|_| {
                    let mut source = rng.random_range(0..cfg.users - 1);
                    if source >= u {
                        source += 1;
                    }
                    let attacker = profiles[source].for_session(&mut rng);
                    ImposterSample {
                        source,
                        sample: KeystrokeSample {
                            user_id: profile.user_id.clone(),
                            session_id: format!("imposter-{}", profiles[source].user_id),
                            label: Label::Imposter,
                            events: attacker.type_pin(&profile.pin, cfg.outlier_rate, &mut rng),
                        },
                    }
                })
                .collect();
            UserData {
                profile: profile.clone(),
                genuine,
                imposters,
            }
        })
        .collect();
    Ok(Cohort {
        config: cfg.clone(),
        users,
    })
}
