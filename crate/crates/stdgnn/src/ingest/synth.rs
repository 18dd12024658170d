//! Synthetic event-log generator with planted structure.
//!
//! Event times follow an hour-of-week intensity profile (workday peak,
//! night and weekend trough by default). Developers belong to home
//! components; tossing prefers same-component, high-reputation
//! developers, and the eventual fixer is strongly biased toward the
//! bug's component. Report text is drawn from a per-component
//! vocabulary. Models consuming these logs are expected to recover
//! exactly this structure.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{assemble_log, Event, EventKind, EventLog, ParseStats};
use crate::{seed, Error, Result};

/// Monday 2021-01-04 00:00:00 UTC; keeps hour-of-week arithmetic
/// aligned with profile index 0 = Monday midnight.
pub const BASE_TS: u64 = 1_609_718_400;

pub const HOURS_PER_WEEK: usize = 168;

const COMPONENT_STEMS: &[&str] = &["core", "ui", "net", "db", "gfx", "sec", "api", "ide"];

const SHARED_WORDS: &[&str] = &[
    "build", "crash", "fails", "patch", "regression", "stack", "trace", "window", "click",
    "start", "update", "version", "test", "case", "break", "change", "wrong", "value", "screen",
    "file",
];

const WORDS_PER_COMPONENT: usize = 40;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_devs: usize,
    pub n_bugs: usize,
    pub n_components: usize,
    pub weeks: u32,
    /// 168 nonnegative hour-of-week weights, Monday 00:00 first.
    pub intensity_profile: Vec<f64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_devs: 30,
            n_bugs: 500,
            n_components: 3,
            weeks: 8,
            intensity_profile: default_profile().to_vec(),
        }
    }
}

/// Workday business hours peak, evening shoulder, night/weekend trough.
pub fn default_profile() -> [f64; HOURS_PER_WEEK] {
    let mut profile = [0.0; HOURS_PER_WEEK];
    for day in 0..7 {
        for hour in 0..24 {
            let weight = if day < 5 {
                match hour {
                    9..=17 => 1.0,
                    8 | 18..=20 => 0.5,
                    7 | 21 | 22 => 0.2,
                    _ => 0.05,
                }
            } else {
                match hour {
                    10..=18 => 0.15,
                    _ => 0.03,
                }
            };
            profile[day * 24 + hour] = weight;
        }
    }
    profile
}

/// Hour-of-week index (0 = Monday 00:00 UTC) of a timestamp.
pub fn hour_of_week(ts: u64) -> usize {
    // The Unix epoch fell on a Thursday, day 3 of a Monday-first week.
    let days = ts / 86_400;
    let dow = ((days + 3) % 7) as usize;
    dow * 24 + ((ts % 86_400) / 3_600) as usize
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_devs < 3 {
            return Err(Error::Config(format!("n_devs must be >= 3, got {}", self.n_devs)));
        }
        if self.n_bugs < 1 {
            return Err(Error::Config("n_bugs must be >= 1".into()));
        }
        if self.n_components < 1 || self.n_components > self.n_devs {
            return Err(Error::Config(format!(
                "n_components must be in 1..=n_devs, got {}",
                self.n_components
            )));
        }
        if self.weeks < 1 {
            return Err(Error::Config("weeks must be >= 1".into()));
        }
        if self.intensity_profile.len() != HOURS_PER_WEEK {
            return Err(Error::Config(format!(
                "intensity profile needs {HOURS_PER_WEEK} values, got {}",
                self.intensity_profile.len()
            )));
        }
        if self.intensity_profile.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("intensity weights must be finite and >= 0".into()));
        }
        if self.intensity_profile.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("intensity profile sums to zero".into()));
        }
        Ok(())
    }

    pub fn component_name(&self, c: usize) -> String {
        format!("{}{}", COMPONENT_STEMS[c % COMPONENT_STEMS.len()], c)
    }
}

struct Cast {
    dev_names: Vec<String>,
    /// Members per component; developer `i` is at home in component
    /// `i % n_components`, and earlier members of a component are the
    /// more reputable ones.
    members: Vec<Vec<usize>>,
}

fn build_cast(cfg: &SyntheticConfig) -> Cast {
    let width = cfg.n_devs.to_string().len().max(2);
    let dev_names = (0..cfg.n_devs)
        .map(|i| format!("dev{:0width$}", i, width = width))
        .collect();
    let mut members = vec![Vec::new(); cfg.n_components];
    for dev in 0..cfg.n_devs {
        members[dev % cfg.n_components].push(dev);
    }
    Cast { dev_names, members }
}

/// Reputation-weighted member pick; rank k has weight `1/(k+1)^power`.
fn pick_member(members: &[usize], power: f64, rng: &mut impl Rng, exclude: Option<usize>) -> usize {
    loop {
        let total: f64 = (0..members.len())
            .map(|k| 1.0 / ((k + 1) as f64).powf(power))
            .sum();
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = members[members.len() - 1];
        for (k, &dev) in members.iter().enumerate() {
            let w = 1.0 / ((k + 1) as f64).powf(power);
            if u < w {
                chosen = dev;
                break;
            }
            u -= w;
        }
        if Some(chosen) != exclude || members.len() == 1 {
            return chosen;
        }
    }
}

/// Generate a deterministic synthetic event log.
pub fn generate_synthetic(cfg: &SyntheticConfig, rng_seed: u64) -> Result<EventLog> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed::mix(rng_seed, seed::SYNTH, 0));
    let cast = build_cast(cfg);

    let horizon_hours = cfg.weeks as usize * HOURS_PER_WEEK;
    let hour_weights: Vec<f64> = (0..horizon_hours)
        .map(|h| cfg.intensity_profile[h % HOURS_PER_WEEK])
        .collect();
    let hour_dist = WeightedIndex::new(&hour_weights)
        .map_err(|e| Error::Config(format!("unusable intensity profile: {e}")))?;

    let comp_words: Vec<Vec<String>> = (0..cfg.n_components)
        .map(|c| {
            let name = cfg.component_name(c);
            (0..WORDS_PER_COMPONENT)
                .map(|j| format!("{name}w{j:02}"))
                .collect()
        })
        .collect();

    let mut events: Vec<Event> = Vec::new();
    let mut texts: HashMap<String, Vec<(u64, String)>> = HashMap::new();
    let mut components: HashMap<String, String> = HashMap::new();

    let bug_width = cfg.n_bugs.to_string().len().max(2);
    for b in 0..cfg.n_bugs {
        let bug_id = format!("bug{:0width$}", b, width = bug_width);
        let comp = rng.gen_range(0..cfg.n_components);
        let members = &cast.members[comp];

        let n_toss = {
            let u = rng.gen::<f64>();
            if u < 0.35 {
                0
            } else if u < 0.65 {
                1
            } else if u < 0.85 {
                2
            } else {
                3
            }
        };
        let mut times: Vec<u64> = (0..n_toss + 2)
            .map(|_| {
                let hour = hour_dist.sample(&mut rng) as u64;
                BASE_TS + hour * 3_600 + rng.gen_range(0..3_600)
            })
            .collect();
        times.sort_unstable();

        // Initial holder: usually someone from the bug's component.
        let initial = if rng.gen::<f64>() < 0.6 {
            pick_member(members, 1.0, &mut rng, None)
        } else {
            rng.gen_range(0..cfg.n_devs)
        };
        events.push(Event {
            bug_id: bug_id.clone(),
            kind: EventKind::Report,
            from_dev: None,
            to_dev: Some(cast.dev_names[initial].clone()),
            ts: times[0],
        });

        let mut holder = initial;
        for t in 0..n_toss {
            let next = if rng.gen::<f64>() < 0.85 {
                pick_member(members, 1.0, &mut rng, Some(holder))
            } else {
                // Off-component toss.
                let mut other = rng.gen_range(0..cfg.n_devs);
                while other == holder {
                    other = rng.gen_range(0..cfg.n_devs);
                }
                other
            };
            if next != holder {
                events.push(Event {
                    bug_id: bug_id.clone(),
                    kind: EventKind::Toss,
                    from_dev: Some(cast.dev_names[holder].clone()),
                    to_dev: Some(cast.dev_names[next].clone()),
                    ts: times[t + 1],
                });
                holder = next;
            }
        }

        // Fixer: concentrated on the component's most reputable members.
        let fixer = if rng.gen::<f64>() < 0.9 {
            pick_member(members, 2.0, &mut rng, None)
        } else {
            rng.gen_range(0..cfg.n_devs)
        };
        events.push(Event {
            bug_id: bug_id.clone(),
            kind: EventKind::Fix,
            from_dev: Some(cast.dev_names[holder].clone()),
            to_dev: Some(cast.dev_names[fixer].clone()),
            ts: *times.last().unwrap(),
        });

        let n_words = rng.gen_range(8..=15);
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            if rng.gen::<f64>() < 0.75 {
                words.push(comp_words[comp][rng.gen_range(0..WORDS_PER_COMPONENT)].clone());
            } else {
                words.push(SHARED_WORDS[rng.gen_range(0..SHARED_WORDS.len())].to_string());
            }
        }
        texts.insert(bug_id.clone(), vec![(times[0], words.join(" "))]);
        components.insert(bug_id, cfg.component_name(comp));
    }

    let mut stats = ParseStats::default();
    let log = assemble_log(events, texts, components, &mut stats);
    debug_assert_eq!(stats.bugs_dropped_no_fixer, 0);
    Ok(log)
}
