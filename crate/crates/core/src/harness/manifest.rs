//! Append-only run manifests: key-value lines recording configuration,
//! stage events, metrics, and artifacts.
//!
//! Everything except `timing_*` keys is a pure function of (config, seed);
//! the deterministic view strips those so reproducibility can be asserted
//! textually.

use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};

/// One training-cycle stage, in mandated execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Occupancy,
    Critic,
    Sharing,
    Actor,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Occupancy => "occupancy",
            Stage::Critic => "critic",
            Stage::Sharing => "sharing",
            Stage::Actor => "actor",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "occupancy" => Some(Stage::Occupancy),
            "critic" => Some(Stage::Critic),
            "sharing" => Some(Stage::Sharing),
            "actor" => Some(Stage::Actor),
            _ => None,
        }
    }
}

/// Ordered key-value log of one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    lines: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn push_stage(&mut self, epoch: usize, cycle: usize, stage: Stage) {
        self.push("stage", format!("epoch={epoch} cycle={cycle} name={}", stage.name()));
    }

    pub fn lines(&self) -> &[(String, String)] {
        &self.lines
    }

    /// All values recorded under one key, in order.
    pub fn values(&self, key: &str) -> Vec<&str> {
        self.lines.iter().filter(|(k, _)| k == key).map(|(_, v)| v.as_str()).collect()
    }

    /// `key = value` lines.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Like [`RunManifest::text`] minus wall-clock lines, the only
    /// run-to-run varying content.
    pub fn deterministic_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            if k.starts_with("timing") {
                continue;
            }
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.text())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = RunManifest::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::contract(format!("malformed manifest line: {line}")))?;
            manifest.push(k.trim(), v.trim());
        }
        Ok(manifest)
    }

    /// Verifies every cycle logged exactly the stage sequence
    /// occupancy -> critic (-> sharing) -> actor, with cycles consecutive
    /// and non-interleaved.
    pub fn audit_stage_order(&self, sharing_expected: bool) -> Result<()> {
        let expected: &[Stage] = if sharing_expected {
            &[Stage::Occupancy, Stage::Critic, Stage::Sharing, Stage::Actor]
        } else {
            &[Stage::Occupancy, Stage::Critic, Stage::Actor]
        };
        let events: Vec<(usize, usize, Stage)> = self
            .values("stage")
            .into_iter()
            .map(parse_stage_line)
            .collect::<Result<_>>()?;
        if events.is_empty() {
            return Err(Error::contract("manifest holds no stage events"));
        }
        if events.len() % expected.len() != 0 {
            return Err(Error::contract(format!(
                "stage event count {} is not a multiple of the cycle length {}",
                events.len(),
                expected.len()
            )));
        }
        let mut prev_cycle: Option<(usize, usize)> = None;
        for group in events.chunks(expected.len()) {
            let cycle_id = (group[0].0, group[0].1);
            for (k, &(e, c, stage)) in group.iter().enumerate() {
                if (e, c) != cycle_id {
                    return Err(Error::contract(format!(
                        "stage events of cycle {cycle_id:?} interleave with epoch={e} cycle={c}"
                    )));
                }
                if stage != expected[k] {
                    return Err(Error::contract(format!(
                        "cycle {cycle_id:?} ran {} where {} was required",
                        stage.name(),
                        expected[k].name()
                    )));
                }
            }
            if let Some(prev) = prev_cycle {
                if cycle_id <= prev {
                    return Err(Error::contract(format!(
                        "cycle {cycle_id:?} logged after {prev:?}"
                    )));
                }
            }
            prev_cycle = Some(cycle_id);
        }
        Ok(())
    }
}

fn parse_stage_line(value: &str) -> Result<(usize, usize, Stage)> {
    let mut epoch = None;
    let mut cycle = None;
    let mut stage = None;
    for part in value.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::contract(format!("malformed stage field: {part}")))?;
        match k {
            "epoch" => epoch = v.parse::<usize>().ok(),
            "cycle" => cycle = v.parse::<usize>().ok(),
            "name" => stage = Stage::from_name(v),
            _ => {}
        }
    }
    match (epoch, cycle, stage) {
        (Some(e), Some(c), Some(s)) => Ok((e, c, s)),
        _ => Err(Error::contract(format!("incomplete stage line: {value}"))),
    }
}
