//! Simulated TDoA ground-truth ranging: the REQ/RDY/GO exchange over a lossy
//! link, repeated at 20 platform orientations 18° apart.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap, RelativePosition};

pub const ORIENTATIONS: usize = 20;
pub const STEP_DEG: f64 = 18.0;
/// Ultrasound speed; RF is treated as instantaneous.
pub const DELTA_C: f64 = 343.0;
pub const DEFAULT_RETRY_CAP: usize = 3;

/// Platform orientation `k` in the robot frame, radians.
pub fn orientation(k: usize) -> f64 {
    (-180.0 + STEP_DEG * k as f64).to_radians()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Idle,
    ReqSent,
    Ready,
    GoSent,
    Measured,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SessionEvent {
    /// The TrackBot transmits the next packet (REQ from Idle, Measured or
    /// TimedOut; GO from Ready).
    Send,
    /// The pending packet reached its destination and was answered.
    Deliver,
    /// The pending packet was lost.
    Lose,
    /// No answer before the timeout.
    Timeout,
    /// A TDoA reading arrived; zero or negative means the ping was missed.
    Measure(f64),
}

impl fmt::Display for SessionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionEvent::Measure(v) => write!(f, "Measure({v})"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingSession {
    state: SessionState,
    index: usize,
    attempts: usize,
    retry_cap: usize,
    values: Vec<f64>,
}

impl Default for RangingSession {
    fn default() -> Self {
        Self::new(DEFAULT_RETRY_CAP)
    }
}

impl RangingSession {
    pub fn new(retry_cap: usize) -> Self {
        Self {
            state: SessionState::Idle,
            index: 0,
            attempts: 0,
            retry_cap,
            values: Vec::with_capacity(ORIENTATIONS),
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    /// Orientation currently being measured.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Failed attempts at the current orientation.
    pub fn attempts(&self) -> usize {
        self.attempts
    }

    /// Recorded TDoA per finished orientation; 0 marks a failure.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True once all orientations have a value and the session is idle.
    pub fn is_complete(&self) -> bool {
        self.state == SessionState::Idle && self.values.len() == ORIENTATIONS
    }

    fn record(&mut self, value: f64, next: SessionState) {
        self.values.push(value);
        self.attempts = 0;
        if self.values.len() == ORIENTATIONS {
            self.index = 0;
            self.state = SessionState::Idle;
        } else {
            self.index += 1;
            self.state = next;
        }
    }

    fn fail(&mut self) {
        self.attempts += 1;
        if self.attempts > self.retry_cap {
            self.record(0.0, SessionState::TimedOut);
        } else {
            self.state = SessionState::TimedOut;
        }
    }

    pub fn step(&mut self, event: SessionEvent) -> Result<()> {
        use SessionEvent as E;
        use SessionState as S;
        match (self.state, event) {
            (S::Idle, E::Send) => {
                if self.values.len() == ORIENTATIONS {
                    self.values.clear();
                }
                self.state = S::ReqSent;
            }
            (S::Measured | S::TimedOut, E::Send) => self.state = S::ReqSent,
            (S::ReqSent, E::Deliver) => self.state = S::Ready,
            (S::Ready, E::Send) => self.state = S::GoSent,
            (S::ReqSent | S::GoSent, E::Lose | E::Timeout) => self.fail(),
            (S::GoSent, E::Measure(v)) if v.is_finite() && v > 0.0 => self.record(v, S::Measured),
            (S::GoSent, E::Measure(_)) => self.fail(),
            (state, event) => {
                return Err(Error::IllegalTransition {
                    state: format!("{state:?}"),
                    event: event.to_string(),
                })
            }
        }
        Ok(())
    }
}

/// Pure form of [`RangingSession::step`].
pub fn session_step(session: &RangingSession, event: SessionEvent) -> Result<RangingSession> {
    let mut next = session.clone();
    next.step(event)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    /// Probability that any single packet is lost.
    pub loss_prob: f64,
    pub timeout_s: f64,
    pub tdoa_noise_sigma_s: f64,
    /// Half-width of the ultrasound beam, radians.
    pub half_beam: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            loss_prob: 0.1,
            timeout_s: 0.2,
            tdoa_noise_sigma_s: 0.07 / DELTA_C,
            half_beam: (STEP_DEG / 2.0).to_radians(),
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::Config("loss_prob must lie in [0, 1]".into()));
        }
        if !(self.tdoa_noise_sigma_s >= 0.0) || !(self.timeout_s > 0.0) || !(self.half_beam >= 0.0) {
            return Err(Error::Config("link timing parameters must be non-negative".into()));
        }
        Ok(())
    }
}

/// One TDoA reading at platform orientation `orientation`. Returns 0 when
/// the platform does not face the Leader or there is no line of sight.
pub fn measure_tdoa<R: Rng + ?Sized>(
    true_rel: RelativePosition,
    orientation: f64,
    link: &LinkModel,
    los: bool,
    rng: &mut R,
) -> Result<f64> {
    let d = true_rel.distance();
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("source must not coincide with the receiver".into()));
    }
    if !los || wrap(orientation - true_rel.angle()).abs() > link.half_beam + 1e-12 {
        return Ok(0.0);
    }
    let noise = if link.tdoa_noise_sigma_s > 0.0 {
        Normal::new(0.0, link.tdoa_noise_sigma_s).expect("positive sigma").sample(rng)
    } else {
        0.0
    };
    // A reading can never be negative; clamp at a tiny positive time.
    Ok((d / DELTA_C + noise).max(f64::MIN_POSITIVE))
}

/// Distance and angle from a sweep: the smallest nonzero reading wins.
pub fn reconstruct(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() != ORIENTATIONS {
        return Err(Error::InvalidArgument(format!(
            "expected {ORIENTATIONS} readings, got {}",
            values.len()
        )));
    }
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::RangingFailure)?;
    Ok((best.1 * DELTA_C, orientation(best.0)))
}

/// Drive a full session over the simulated link and return the 20 readings.
pub fn run_sweep<R: Rng + ?Sized>(
    true_rel: RelativePosition,
    link: &LinkModel,
    los: bool,
    retry_cap: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut s = RangingSession::new(retry_cap);
    let lost = |rng: &mut R| rng.random::<f64>() < link.loss_prob;
    loop {
        let event = match s.state() {
            SessionState::Idle | SessionState::Measured | SessionState::TimedOut | SessionState::Ready => {
                SessionEvent::Send
            }
            SessionState::ReqSent => {
                // REQ and the RDY reply must both survive.
                if lost(rng) || lost(rng) {
                    SessionEvent::Lose
                } else {
                    SessionEvent::Deliver
                }
            }
            SessionState::GoSent => {
                if lost(rng) {
                    SessionEvent::Lose
                } else {
                    SessionEvent::Measure(measure_tdoa(true_rel, orientation(s.index()), link, los, rng)?)
                }
            }
        };
        s.step(event)?;
        if s.is_complete() {
            return Ok(s.values().to_vec());
        }
    }
}

/// Full ranging with up to `max_sweeps` sweeps until one yields a reading.
pub fn range<R: Rng + ?Sized>(
    true_rel: RelativePosition,
    link: &LinkModel,
    los: bool,
    max_sweeps: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    for _ in 0..max_sweeps {
        let values = run_sweep(true_rel, link, los, DEFAULT_RETRY_CAP, rng)?;
        if let Ok(r) = reconstruct(&values) {
            return Ok(r);
        }
    }
    Err(Error::RangingFailure)
}
