//! Imitation datasets built from validated plans.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domains::{parse_instance, serialize_instance, Action, Instance, State};
use crate::error::{CoatError, Result};
use crate::search::validate_plan;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Where a plan came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tier: String,
    /// Difficulty rank of the tier; curriculum rounds must exceed it.
    pub rank: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct PlanRecord {
    pub instance: Instance,
    pub actions: Vec<Action>,
    pub provenance: Provenance,
    /// Stable identifier derived from the instance text.
    pub id: String,
    states: Vec<State>,
}

impl PlanRecord {
    pub fn states(&self) -> &[State] {
        &self.states
    }
}

/// One training example: state `state_idx` of record `record`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub record: usize,
    pub state_idx: usize,
    /// Action taken from this state; absent at the goal.
    pub action: Option<Action>,
    /// Distance-to-go label.
    pub delta: u32,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<PlanRecord>,
    samples: Vec<Sample>,
    goal_samples: bool,
}

/// Short hex digest of the canonical instance text.
pub fn instance_id(instance: &Instance) -> String {
    let digest = Sha256::digest(serialize_instance(instance).as_bytes());
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

fn split_score(id: &str) -> f64 {
    let digest = Sha256::digest(format!("split:{id}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes) as f64 / u64::MAX as f64
}

impl Dataset {
    pub fn empty(goal_samples: bool) -> Self {
        Self {
            records: Vec::new(),
            samples: Vec::new(),
            goal_samples,
        }
    }

    /// One sample per plan state `s_0 .. s_{l-1}` labelled `l - i`, plus the
    /// goal state labelled 0 when `goal_samples` is set.
    pub fn build(plans: Vec<(Instance, Vec<Action>, Provenance)>, goal_samples: bool) -> Result<Self> {
        let mut ds = Self::empty(goal_samples);
        ds.extend(plans)?;
        Ok(ds)
    }

    /// Appends validated plans and re-tightens labels.
    pub fn extend(&mut self, plans: Vec<(Instance, Vec<Action>, Provenance)>) -> Result<()> {
        let mut fresh = Vec::with_capacity(plans.len());
        for (j, (instance, actions, provenance)) in plans.into_iter().enumerate() {
            let check = validate_plan(&instance, &actions);
            if !check.valid {
                return Err(CoatError::Contract(format!(
                    "plan {j} is invalid at index {}",
                    check.failure_index.unwrap_or(0)
                )));
            }
            let states = instance.replay(&actions).expect("validated plan replays");
            fresh.push(PlanRecord {
                id: instance_id(&instance),
                instance,
                actions,
                provenance,
                states,
            });
        }
        for record in fresh {
            let r = self.records.len();
            let l = record.actions.len();
            for (i, &a) in record.actions.iter().enumerate() {
                self.samples.push(Sample {
                    record: r,
                    state_idx: i,
                    action: Some(a),
                    delta: (l - i) as u32,
                });
            }
            if self.goal_samples || l == 0 {
                self.samples.push(Sample {
                    record: r,
                    state_idx: l,
                    action: None,
                    delta: 0,
                });
            }
            self.records.push(record);
        }
        self.tighten_labels();
        Ok(())
    }

    /// Equal states share the smallest witnessed distance.
    fn tighten_labels(&mut self) {
        let mut best: HashMap<String, u32> = HashMap::new();
        let keys: Vec<String> = self.samples.iter().map(|s| self.state(s).key()).collect();
        for (k, s) in keys.iter().zip(&self.samples) {
            best.entry(k.clone())
                .and_modify(|d| *d = (*d).min(s.delta))
                .or_insert(s.delta);
        }
        for (k, s) in keys.iter().zip(self.samples.iter_mut()) {
            s.delta = best[k];
        }
    }

    pub fn records(&self) -> &[PlanRecord] {
        &self.records
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn goal_samples(&self) -> bool {
        self.goal_samples
    }

    pub fn state(&self, sample: &Sample) -> &State {
        &self.records[sample.record].states[sample.state_idx]
    }

    pub fn max_rank(&self) -> Option<usize> {
        self.records.iter().map(|r| r.provenance.rank).max()
    }

    /// Sample indices split by instance: `(train, validation)`. An instance
    /// lands in validation when its hash score falls below `fraction`.
    pub fn split(&self, fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let in_val: Vec<bool> = self.records.iter().map(|r| split_score(&r.id) < fraction).collect();
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for (i, s) in self.samples.iter().enumerate() {
            if in_val[s.record] {
                val.push(i);
            } else {
                train.push(i);
            }
        }
        (train, val)
    }

    pub fn to_jsonl(&self) -> String {
        let header = FileHeader {
            format: "coat-dataset".into(),
            version: DATASET_FORMAT_VERSION,
            goal_samples: self.goal_samples,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            let line = FileRecord {
                instance: serialize_instance(&r.instance),
                plan: r.actions.iter().map(|a| a.name()).collect::<Vec<_>>().join(","),
                tier: r.provenance.tier.clone(),
                rank: r.provenance.rank,
                seed: r.provenance.seed,
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, first)) = lines.next() else {
            return Err(CoatError::Parse {
                line: 1,
                column: 1,
                message: "empty dataset file".into(),
            });
        };
        let header: FileHeader = serde_json::from_str(first).map_err(|e| json_err(0, e))?;
        if header.format != "coat-dataset" {
            return Err(CoatError::Parse {
                line: 1,
                column: 1,
                message: format!("not a dataset file (format {:?})", header.format),
            });
        }
        if header.version != DATASET_FORMAT_VERSION {
            return Err(CoatError::Version {
                found: header.version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        let mut plans = Vec::new();
        for (i, line) in lines {
            let rec: FileRecord = serde_json::from_str(line).map_err(|e| json_err(i, e))?;
            let instance = parse_instance(&rec.instance)?;
            let actions = if rec.plan.is_empty() {
                Vec::new()
            } else {
                rec.plan
                    .split(',')
                    .map(|n| Action::parse(instance.domain(), n.trim()))
                    .collect::<Result<Vec<_>>>()?
            };
            let provenance = Provenance {
                tier: rec.tier,
                rank: rec.rank,
                seed: rec.seed,
            };
            plans.push((instance, actions, provenance));
        }
        Self::build(plans, header.goal_samples)
    }
}

fn json_err(line_idx: usize, e: serde_json::Error) -> CoatError {
    CoatError::Parse {
        line: line_idx + 1,
        column: e.column(),
        message: e.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
    goal_samples: bool,
}

#[derive(Serialize, Deserialize)]
struct FileRecord {
    instance: String,
    plan: String,
    tier: String,
    rank: usize,
    seed: Option<u64>,
}
