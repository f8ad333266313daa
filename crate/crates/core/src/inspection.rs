//! Surface estimates from a single bounce.
//!
//! An episode starts when the sensed force rises above the detection threshold
//! and ends when it falls below the release threshold. The approach speed is
//! the mean normal velocity over a short window before contact, the rebound
//! speed the largest away-from-wall speed shortly after release.
//!
//! Two stiffness figures come out of an episode. `K_t = ½·m·v_f²` with the
//! series correction `K_e = K_u·K_t / (K_u − K_t)` is an energy, not a
//! stiffness, and only useful for ranking. The deflection estimate
//! `m·v_i² / δ_max²` has proper units of N/m.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InspectionError {
    #[error("no contact episode in the log")]
    NoEpisode,
    #[error("log contains {0} contact episodes, expected one")]
    MultipleEpisodes(usize),
    #[error("approach velocity {0} m/s is too small to estimate restitution")]
    ZeroApproach(f64),
    #[error("series stiffness formula is singular: K_u = {ku}, K_t = {kt}")]
    SeriesPole { ku: f64, kt: f64 },
    #[error("surface `{label}` has {count} trials, at least 2 are needed")]
    InsufficientTrials { label: String, count: usize },
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
    #[error("failed to write estimates: {0}")]
    Io(String),
}

/// One sample of the signals the detector needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSample {
    pub time: f64,
    /// Arm-tip velocity along the surface normal, positive toward the wall.
    pub normal_velocity: f64,
    pub sensed_force: f64,
    pub penetration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold_on: f64,
    pub threshold_off: f64,
    /// Averaging window before contact [s].
    pub pre_window: f64,
    /// Search window for the rebound peak after release [s].
    pub post_window: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold_on: 0.3,
            threshold_off: 0.15,
            pre_window: 0.05,
            post_window: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEpisode {
    pub approach_velocity: f64,
    /// Peak speed away from the wall after release (non-negative).
    pub rebound_velocity: f64,
    pub contact_start: f64,
    pub contact_duration: f64,
    pub peak_force: f64,
    pub max_penetration: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum DetectorState {
    Waiting,
    InContact {
        start: f64,
        approach_velocity: f64,
        peak_force: f64,
        max_penetration: f64,
    },
    Released {
        episode: ImpactEpisode,
        release: f64,
    },
    Complete(ImpactEpisode),
}

/// Streaming episode detector; [`detect_episode`] runs the same code over a
/// whole log.
#[derive(Debug, Clone)]
pub struct EpisodeDetector {
    cfg: DetectorConfig,
    history: VecDeque<(f64, f64)>,
    state: DetectorState,
    episodes: usize,
}

impl EpisodeDetector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self {
            cfg,
            history: VecDeque::new(),
            state: DetectorState::Waiting,
            episodes: 0,
        }
    }

    pub fn episode_count(&self) -> usize {
        self.episodes
    }

    /// Feeds one sample; returns the episode once its rebound window closes.
    pub fn push(&mut self, s: &EpisodeSample) -> Option<ImpactEpisode> {
        let cfg = self.cfg;
        let mut finished = None;
        self.state = match std::mem::replace(&mut self.state, DetectorState::Waiting) {
            // A touch inside an open rebound window also counts: the log is then ambiguous.
            DetectorState::Waiting | DetectorState::Released { .. } | DetectorState::Complete(_)
                if s.sensed_force > cfg.threshold_on =>
            {
                self.episodes += 1;
                let approach_velocity = if self.history.is_empty() {
                    s.normal_velocity
                } else {
                    self.history.iter().map(|&(_, v)| v).sum::<f64>() / self.history.len() as f64
                };
                DetectorState::InContact {
                    start: s.time,
                    approach_velocity,
                    peak_force: s.sensed_force,
                    max_penetration: s.penetration,
                }
            }
            DetectorState::InContact {
                start,
                approach_velocity,
                peak_force,
                max_penetration,
            } => {
                let peak_force = peak_force.max(s.sensed_force);
                let max_penetration = max_penetration.max(s.penetration);
                if s.sensed_force < cfg.threshold_off {
                    DetectorState::Released {
                        episode: ImpactEpisode {
                            approach_velocity,
                            rebound_velocity: (-s.normal_velocity).max(0.0),
                            contact_start: start,
                            contact_duration: s.time - start,
                            peak_force,
                            max_penetration,
                        },
                        release: s.time,
                    }
                } else {
                    DetectorState::InContact {
                        start,
                        approach_velocity,
                        peak_force,
                        max_penetration,
                    }
                }
            }
            DetectorState::Released { mut episode, release } => {
                episode.rebound_velocity = episode.rebound_velocity.max(-s.normal_velocity);
                episode.max_penetration = episode.max_penetration.max(s.penetration);
                if s.time - release >= cfg.post_window - 1e-12 {
                    finished = Some(episode);
                    DetectorState::Complete(episode)
                } else {
                    DetectorState::Released { episode, release }
                }
            }
            other => other,
        };

        self.history.push_back((s.time, s.normal_velocity));
        while self.history.front().is_some_and(|&(t, _)| s.time - t >= cfg.pre_window - 1e-12) {
            self.history.pop_front();
        }
        finished
    }

    /// Best episode available at the end of a log, with a truncated rebound
    /// window if the log stops early.
    pub fn finish(&self) -> Result<ImpactEpisode, InspectionError> {
        match (&self.state, self.episodes) {
            (_, 0) => Err(InspectionError::NoEpisode),
            (_, n) if n > 1 => Err(InspectionError::MultipleEpisodes(n)),
            (DetectorState::Complete(ep), _) | (DetectorState::Released { episode: ep, .. }, _) => Ok(*ep),
            _ => Err(InspectionError::NoEpisode),
        }
    }
}

pub fn detect_episode(samples: &[EpisodeSample], cfg: DetectorConfig) -> Result<ImpactEpisode, InspectionError> {
    let mut detector = EpisodeDetector::new(cfg);
    for s in samples {
        detector.push(s);
    }
    detector.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestitutionEstimate {
    pub value: f64,
    /// Raw ratio fell outside `[0, 1]` and was clamped.
    pub out_of_range: bool,
}

pub fn estimate_restitution(ep: &ImpactEpisode) -> Result<RestitutionEstimate, InspectionError> {
    if !(ep.approach_velocity > 1e-6) {
        return Err(InspectionError::ZeroApproach(ep.approach_velocity));
    }
    let raw = ep.rebound_velocity.abs() / ep.approach_velocity;
    Ok(RestitutionEstimate {
        value: raw.clamp(0.0, 1.0),
        out_of_range: !(0.0..=1.0).contains(&raw),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEstimate {
    pub trial_id: usize,
    pub surface: String,
    pub approach_velocity: f64,
    pub rebound_velocity: f64,
    pub restitution: f64,
    /// `½·m·v_f²`.
    pub stiffness_kt: f64,
    /// `½·m·v_i²`, the approach-velocity reading of the same formula.
    pub stiffness_kt_approach: f64,
    /// Series-corrected `K_u·K_t / (K_u − K_t)`.
    pub stiffness_ke: f64,
    /// `m·v_i² / δ_max²`, absent when no penetration was recorded.
    pub deflection_stiffness: Option<f64>,
}

/// `K_u·K_t / (K_u − K_t)`.
pub fn series_surface_stiffness(ku: f64, kt: f64) -> Result<f64, InspectionError> {
    if (ku - kt).abs() < 1e-9 * ku.abs().max(1.0) {
        return Err(InspectionError::SeriesPole { ku, kt });
    }
    Ok(ku * kt / (ku - kt))
}

pub fn estimate_stiffness(
    ep: &ImpactEpisode,
    mass: f64,
    ku: f64,
    surface: &str,
    trial_id: usize,
) -> Result<SurfaceEstimate, InspectionError> {
    if !(mass > 0.0 && ku > 0.0) {
        return Err(InspectionError::InvalidInput(format!("mass {mass} and K_u {ku} must be positive")));
    }
    let e = estimate_restitution(ep)?;
    let kt = 0.5 * mass * ep.rebound_velocity * ep.rebound_velocity;
    let ke = series_surface_stiffness(ku, kt)?;
    let deflection = (ep.max_penetration > 0.0)
        .then(|| mass * ep.approach_velocity * ep.approach_velocity / (ep.max_penetration * ep.max_penetration));
    Ok(SurfaceEstimate {
        trial_id,
        surface: surface.to_owned(),
        approach_velocity: ep.approach_velocity,
        rebound_velocity: ep.rebound_velocity,
        restitution: e.value,
        stiffness_kt: kt,
        stiffness_kt_approach: 0.5 * mass * ep.approach_velocity * ep.approach_velocity,
        stiffness_ke: ke,
        deflection_stiffness: deflection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Restitution,
    StiffnessKt,
    StiffnessKe,
    Deflection,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Restitution, Metric::StiffnessKt, Metric::StiffnessKe, Metric::Deflection];

    pub fn of(self, est: &SurfaceEstimate) -> Option<f64> {
        match self {
            Metric::Restitution => Some(est.restitution),
            Metric::StiffnessKt => Some(est.stiffness_kt),
            Metric::StiffnessKe => Some(est.stiffness_ke),
            Metric::Deflection => est.deflection_stiffness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
}

fn stats(values: &[f64]) -> Option<MetricStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(MetricStats {
        mean,
        std_dev: var.sqrt(),
        count: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub label: String,
    pub trials: usize,
    pub metrics: Vec<(Metric, MetricStats)>,
}

impl SurfaceSummary {
    pub fn get(&self, metric: Metric) -> Option<MetricStats> {
        self.metrics.iter().find(|(m, _)| *m == metric).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Higher { higher: String, lower: String },
    Indistinguishable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: Metric,
    pub a: String,
    pub b: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub surfaces: Vec<SurfaceSummary>,
    pub comparisons: Vec<Comparison>,
}

impl ClassificationReport {
    pub fn verdict(&self, metric: Metric, a: &str, b: &str) -> Option<&Verdict> {
        self.comparisons
            .iter()
            .find(|c| c.metric == metric && ((c.a == a && c.b == b) || (c.a == b && c.b == a)))
            .map(|c| &c.verdict)
    }

    /// `a` ranks strictly above `b` on restitution and on every stiffness
    /// metric both surfaces report.
    pub fn is_harder(&self, a: &str, b: &str) -> bool {
        let above = |m| matches!(self.verdict(m, a, b), Some(Verdict::Higher { higher, .. }) if higher == a);
        above(Metric::Restitution)
            && Metric::ALL[1..]
                .iter()
                .filter(|m| self.verdict(**m, a, b).is_some())
                .all(|m| above(*m))
            && Metric::ALL[1..].iter().any(|m| self.verdict(*m, a, b).is_some())
    }
}

/// Groups estimates by surface label (first-seen order) and compares each
/// pair of surfaces metric by metric. A pair is ordered only when the means
/// differ by more than the pooled standard deviation.
pub fn classify_surfaces(estimates: &[SurfaceEstimate]) -> Result<ClassificationReport, InspectionError> {
    let mut labels: Vec<&str> = Vec::new();
    for e in estimates {
        if !labels.contains(&e.surface.as_str()) {
            labels.push(&e.surface);
        }
    }
    let groups: Vec<Vec<&SurfaceEstimate>> = labels
        .iter()
        .map(|l| estimates.iter().filter(|e| e.surface == *l).collect())
        .collect();
    for (label, g) in labels.iter().zip(&groups) {
        if g.len() < 2 {
            return Err(InspectionError::InsufficientTrials {
                label: (*label).to_owned(),
                count: g.len(),
            });
        }
    }

    let surfaces: Vec<SurfaceSummary> = labels
        .iter()
        .zip(&groups)
        .map(|(label, g)| SurfaceSummary {
            label: (*label).to_owned(),
            trials: g.len(),
            metrics: Metric::ALL
                .iter()
                .filter_map(|&m| {
                    let values: Vec<f64> = g.iter().filter_map(|e| m.of(e)).collect();
                    stats(&values).map(|s| (m, s))
                })
                .collect(),
        })
        .collect();

    let mut comparisons = Vec::new();
    for i in 0..surfaces.len() {
        for j in i + 1..surfaces.len() {
            let (a, b) = (&surfaces[i], &surfaces[j]);
            for m in Metric::ALL {
                let (Some(sa), Some(sb)) = (a.get(m), b.get(m)) else {
                    continue;
                };
                if sa.count < 2 || sb.count < 2 {
                    continue;
                }
                let dof = (sa.count + sb.count - 2) as f64;
                let pooled = (((sa.count - 1) as f64 * sa.std_dev.powi(2) + (sb.count - 1) as f64 * sb.std_dev.powi(2)) / dof).sqrt();
                let diff = sa.mean - sb.mean;
                let verdict = if diff.abs() > pooled && diff != 0.0 {
                    let (hi, lo) = if diff > 0.0 { (a, b) } else { (b, a) };
                    Verdict::Higher {
                        higher: hi.label.clone(),
                        lower: lo.label.clone(),
                    }
                } else {
                    Verdict::Indistinguishable
                };
                comparisons.push(Comparison {
                    metric: m,
                    a: a.label.clone(),
                    b: b.label.clone(),
                    verdict,
                });
            }
        }
    }
    Ok(ClassificationReport { surfaces, comparisons })
}

/// Writes one row per trial: trial, surface, e, K_t, K_e, deflection stiffness,
/// then the raw velocities and the approach-velocity `K_t`.
pub fn write_estimates_table<W: Write>(out: W, estimates: &[SurfaceEstimate]) -> Result<(), InspectionError> {
    let io = |e: csv::Error| InspectionError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "surface",
        "restitution",
        "stiffness_kt",
        "stiffness_ke",
        "deflection_stiffness",
        "approach_velocity",
        "rebound_velocity",
        "stiffness_kt_approach",
    ])
    .map_err(io)?;
    for e in estimates {
        w.write_record([
            e.trial_id.to_string(),
            e.surface.clone(),
            format!("{:.6}", e.restitution),
            format!("{:.6e}", e.stiffness_kt),
            format!("{:.6e}", e.stiffness_ke),
            e.deflection_stiffness.map_or_else(String::new, |d| format!("{d:.6e}")),
            format!("{:.6}", e.approach_velocity),
            format!("{:.6}", e.rebound_velocity),
            format!("{:.6e}", e.stiffness_kt_approach),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| InspectionError::Io(e.to_string()))
}
